"""Process operators over event nodes: construction, validation, probabilities.

A node X has an in-space X.in and an out-space X.out; the process operator
lives on the tensor product of every node's in-space with the dual of its
out-space. Probabilities of instrument outcomes come from the trace rule

    P(k_1 .. k_n) = Tr[ sigma  (tau_1^{k_1} ⊗ ... ⊗ tau_n^{k_n}) ],

where tau is the transposed CJ operator of the instrument element, living on
the same spaces as sigma's node factors.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channels import ChannelOperator, cj_from_kraus
from .hs import project_trivial, type_norms
from .labeled import (
    LabeledOperator,
    SystemLabel,
    distance,
    dual,
    fuse,
    identity_operator,
    partial_trace,
    product,
    reorder,
    split_system,
    tensor,
    transpose_systems,
)

__all__ = [
    "QuantumNode",
    "ProcessOperator",
    "process_operator",
    "ValidationVerdict",
    "validate_process",
    "signalling_residual",
    "no_signalling",
    "InstrumentElement",
    "Instrument",
    "element_from_kraus",
    "measure_prepare_element",
    "instrument_from_kraus",
    "readout_instrument",
    "preparation_instrument",
    "joint_probabilities",
    "conditional_process",
    "extend_nodes",
    "comb_from_circuit",
    "random_chain_process",
]


@dataclass(frozen=True)
class QuantumNode:
    """An event node with an input space and an output space."""

    name: str
    d_in: int
    d_out: int

    def __post_init__(self):
        if self.d_in < 1 or self.d_out < 1:
            raise ValueError("node dimensions must be positive")

    @property
    def in_system(self) -> SystemLabel:
        return SystemLabel(f"{self.name}.in", self.d_in)

    @property
    def out_system(self) -> SystemLabel:
        return SystemLabel(f"{self.name}.out", self.d_out)

    @property
    def out_dual(self) -> SystemLabel:
        return SystemLabel(f"{self.name}.out", self.d_out, dual=True)


@dataclass
class ProcessOperator:
    """Operator on ⊗_i (X_i.in ⊗ X_i.out*), with a validation latch.

    ``certified`` starts False and is set by validate_process (or by
    constructions that provably preserve validity).
    """

    nodes: tuple[QuantumNode, ...]
    op: LabeledOperator
    certified: bool = False

    @property
    def node_names(self) -> tuple[str, ...]:
        return tuple(n.name for n in self.nodes)

    def node(self, name: str) -> QuantumNode:
        for n in self.nodes:
            if n.name == name:
                return n
        raise KeyError(f"no node named {name!r}")

    @property
    def dim(self) -> int:
        return self.op.matrix.shape[0]

    def expected_trace(self) -> float:
        return float(np.prod([n.d_out for n in self.nodes]))


def canonical_systems(nodes) -> list[SystemLabel]:
    out = []
    for n in nodes:
        out.append(n.in_system)
        out.append(n.out_dual)
    return out


def process_operator(nodes, op: LabeledOperator) -> ProcessOperator:
    """Wrap an operator as a process over the given nodes.

    Systems are reordered to the canonical interleaved order (X1.in, X1.out*,
    X2.in, ...). The operator is not validated here.
    """
    nodes = tuple(nodes)
    names = [n.name for n in nodes]
    if len(set(names)) != len(names):
        raise ValueError("node names must be unique")
    want = canonical_systems(nodes)
    have = {s.key: s.dim for s in op.systems}
    for lbl in want:
        if have.get(lbl.key) != lbl.dim:
            raise ValueError(f"operator is missing system {lbl!r} or has wrong dimension")
    if len(op.systems) != len(want):
        raise ValueError("operator has extra systems beyond the node spaces")
    return ProcessOperator(nodes, reorder(op, [s.key for s in want]))


@dataclass(frozen=True)
class ValidationVerdict:
    valid: bool
    hermitian_residual: float
    psd_ok: bool
    min_eigenvalue: float
    psd_method: str
    trace: float
    expected_trace: float
    trace_ok: bool
    forbidden_norm: float
    forbidden_threshold: float
    type_ok: bool
    offending_types: tuple[str, ...]
    tol: float


def _forbidden_component(sigma: ProcessOperator) -> LabeledOperator:
    """Component of sigma outside the span of allowed basis types.

    A product-basis term is allowed iff it is the identity or some node is
    trivial on its out-dual factor while nontrivial on its in factor. The
    complement is removed by applying, per node, the projector onto types
    that do NOT gain such a witness at that node, then subtracting the
    identity component (which survives every factor but is allowed).
    """
    cur = sigma.op
    for n in sigma.nodes:
        od, ik = n.out_dual.key, n.in_system.key
        d_out_part = project_trivial(cur, [od])
        d_both = project_trivial(cur, [od, ik])
        cur = cur - d_out_part + d_both
    all_refs = [s.key for s in sigma.op.systems]
    ident_part = project_trivial(sigma.op, all_refs)
    return cur - reorder(ident_part, [s.key for s in cur.systems])


def validate_process(
    sigma: ProcessOperator,
    tol: float = 1e-9,
    psd_method: str = "auto",
    report_types: bool = True,
) -> ValidationVerdict:
    """Check positivity, total trace, and the allowed-type support condition.

    Marks the process certified when every check passes. ``psd_method`` may be
    "eigh", "cholesky", or "auto" (Cholesky certificate for large operators;
    it proves the spectrum is above -tol without computing it).
    """
    m = sigma.op.matrix
    norm = float(np.linalg.norm(m))
    herm = float(np.linalg.norm(m - m.conj().T))
    herm_ok = herm <= tol * max(1.0, norm)
    h = (m + m.conj().T) / 2
    if np.linalg.norm(h.imag) == 0.0:
        h = h.real

    d = h.shape[0]
    method = psd_method
    if method == "auto":
        method = "cholesky" if d > 2048 else "eigh"
    if method == "cholesky":
        try:
            np.linalg.cholesky(h + tol * np.eye(d, dtype=h.dtype))
            psd_ok, min_eig = True, float("nan")
        except np.linalg.LinAlgError:
            eigs = np.linalg.eigvalsh(h)
            min_eig = float(eigs[0])
            psd_ok = min_eig >= -tol
    else:
        eigs = np.linalg.eigvalsh(h)
        min_eig = float(eigs[0])
        psd_ok = min_eig >= -tol

    tr = float(np.trace(m).real)
    expected = sigma.expected_trace()
    trace_ok = abs(np.trace(m) - expected) <= tol * max(1.0, expected)

    forb = _forbidden_component(sigma)
    fnorm = float(np.linalg.norm(forb.matrix))
    threshold = tol * max(1.0, norm)
    type_ok = fnorm <= threshold

    offenders: tuple[str, ...] = ()
    if report_types and not type_ok and sigma.dim <= 1024:
        names = []
        for key, val in type_norms(forb, min_norm=threshold).items():
            label = "*".join(
                name + ("'" if is_dual else "") for name, is_dual in key
            )
            names.append((val, label))
        offenders = tuple(lbl for _, lbl in sorted(names, reverse=True)[:16])

    valid = bool(herm_ok and psd_ok and trace_ok and type_ok)
    sigma.certified = valid
    return ValidationVerdict(
        valid=valid,
        hermitian_residual=herm,
        psd_ok=bool(psd_ok),
        min_eigenvalue=min_eig,
        psd_method=method,
        trace=tr,
        expected_trace=expected,
        trace_ok=bool(trace_ok),
        forbidden_norm=fnorm,
        forbidden_threshold=threshold,
        type_ok=bool(type_ok),
        offending_types=offenders,
        tol=tol,
    )


def signalling_residual(sigma: ProcessOperator, from_nodes) -> float:
    """Residual of 'the nodes in from_nodes cannot signal to the rest'.

    Zero iff every basis type of sigma that is nontrivial somewhere on the
    from-set's factors either stays inside the from-set's allowed pattern or
    vanishes; concretely, applying per-node projectors Q_X = 1 - D_X^out(1 -
    D_X^in) over the from-set must land on the fully-trivial-on-S component.
    """
    names = set(from_nodes)
    all_names = set(sigma.node_names)
    if not names or not names < all_names:
        raise ValueError("from_nodes must be a nonempty proper subset of the nodes")
    lhs = sigma.op
    refs = []
    for n in sigma.nodes:
        if n.name not in names:
            continue
        od, ik = n.out_dual.key, n.in_system.key
        lhs = lhs - project_trivial(lhs, [od]) + project_trivial(lhs, [od, ik])
        refs.extend([od, ik])
    rhs = project_trivial(sigma.op, refs)
    return distance(lhs, rhs)


def no_signalling(sigma: ProcessOperator, from_nodes, tol: float = 1e-9) -> bool:
    """True iff no choice of interventions at from_nodes is detectable outside."""
    return signalling_residual(sigma, from_nodes) <= tol


@dataclass(frozen=True)
class InstrumentElement:
    """One outcome of a local intervention, as a transposed CJ operator.

    ``tau`` lives on the node's in-space (primal) and out-space (dual), i.e.
    the same factors the process operator uses for that node.
    """

    node_name: str
    tau: LabeledOperator


@dataclass(frozen=True)
class Instrument:
    node: QuantumNode
    elements: tuple[InstrumentElement, ...]

    def __post_init__(self):
        object.__setattr__(self, "elements", tuple(self.elements))
        for e in self.elements:
            if e.node_name != self.node.name:
                raise ValueError("instrument element belongs to a different node")

    def residuals(self) -> dict[str, float]:
        """Complete positivity per element and trace preservation of the sum."""
        cp = 0.0
        total = None
        for e in self.elements:
            m = e.tau.matrix
            cp = max(cp, float(np.linalg.norm(m - m.conj().T)))
            eigs = np.linalg.eigvalsh((m + m.conj().T) / 2)
            cp = max(cp, max(0.0, -float(eigs[0])) if eigs.size else 0.0)
            total = e.tau if total is None else total + e.tau
        marg = partial_trace(total, [self.node.out_dual.key])
        ident = reorder(identity_operator([self.node.in_system]), [s.key for s in marg.systems])
        return {"cp": cp, "tp": float(np.linalg.norm(marg.matrix - ident.matrix))}

    def is_valid(self, tol: float = 1e-9) -> bool:
        r = self.residuals()
        return r["cp"] <= tol and r["tp"] <= tol


def element_from_kraus(node: QuantumNode, kraus) -> InstrumentElement:
    """Instrument element from Kraus matrices mapping the in- to the out-space."""
    ch = cj_from_kraus(kraus, node.in_system, node.out_system)
    tau = transpose_systems(ch.op, [s.key for s in ch.op.systems])
    return InstrumentElement(node.name, tau)


def measure_prepare_element(node: QuantumNode, effect: np.ndarray, prep: np.ndarray) -> InstrumentElement:
    """Element that measures POVM effect on the input and prepares a fresh state.

    tau = effect ⊗ prep^T, on (node.in, node.out*).
    """
    effect = np.asarray(effect, dtype=complex)
    prep = np.asarray(prep, dtype=complex)
    tau = tensor(
        LabeledOperator((node.in_system,), effect),
        LabeledOperator((node.out_dual,), prep.T),
    )
    return InstrumentElement(node.name, tau)


def instrument_from_kraus(node: QuantumNode, kraus_lists) -> Instrument:
    return Instrument(node, tuple(element_from_kraus(node, kl) for kl in kraus_lists))


def readout_instrument(node: QuantumNode, prep: np.ndarray | None = None) -> Instrument:
    """Computational-basis measurement of the in-space, repreparing ``prep``.

    Default preparation is the maximally mixed state of the out-space; for a
    node with a one-dimensional out-space this is the plain readout.
    """
    if prep is None:
        prep = np.eye(node.d_out) / node.d_out
    els = []
    for k in range(node.d_in):
        eff = np.zeros((node.d_in, node.d_in))
        eff[k, k] = 1.0
        els.append(measure_prepare_element(node, eff, prep))
    return Instrument(node, tuple(els))


def preparation_instrument(node: QuantumNode, preps) -> Instrument:
    """Flip a uniform coin, discard the in-space, prepare the drawn state.

    Outcome k has element tau_k = (1/m) 1_in ⊗ prep_k^T, so the elements sum
    to a channel whenever each preparation has unit trace.
    """
    m = len(preps)
    eff = np.eye(node.d_in) / m
    return Instrument(node, tuple(measure_prepare_element(node, eff, p) for p in preps))


def joint_probabilities(sigma: ProcessOperator, instruments) -> np.ndarray:
    """Outcome distribution of one instrument per node, as an ndarray.

    ``instruments`` must contain exactly one Instrument for each node of the
    process, in any order; axis i of the result enumerates outcomes at the
    i-th node of the process.
    """
    by_name = {}
    for ins in instruments:
        if ins.node.name in by_name:
            raise ValueError(f"two instruments for node {ins.node.name!r}")
        by_name[ins.node.name] = ins
    if set(by_name) != set(sigma.node_names):
        raise ValueError("need exactly one instrument per node")

    n = len(sigma.nodes)
    st = sigma.op.as_tensor()
    # Subscripts 4i..4i+3 are (row-in, row-outdual, col-in, col-outdual) of
    # node i; subscripts 4n+i index outcomes.
    sig_subs = []
    for i in range(n):
        sig_subs.extend([4 * i, 4 * i + 1])
    for i in range(n):
        sig_subs.extend([4 * i + 2, 4 * i + 3])
    operands = [st, sig_subs]
    for i, node in enumerate(sigma.nodes):
        ins = by_name[node.name]
        taus = [reorder(e.tau, [node.in_system.key, node.out_dual.key]).as_tensor() for e in ins.elements]
        stack = np.stack(taus)
        # P = Tr[sigma tau]: sum over sigma[r, c] tau[c, r], so tau's row axes
        # carry sigma's column subscripts and vice versa.
        operands.append(stack)
        operands.append([4 * n + i, 4 * i + 2, 4 * i + 3, 4 * i, 4 * i + 1])
    operands.append([4 * n + i for i in range(n)])
    probs = np.einsum(*operands, optimize="greedy")
    return probs.real


def conditional_process(
    sigma: ProcessOperator,
    node_name: str,
    element: InstrumentElement,
    tol: float = 1e-9,
) -> ProcessOperator:
    """Process on the remaining nodes, conditioned on one outcome at a node.

    When the rest of the nodes cannot signal to the conditioned node, the
    result is automatically a valid process (certified without re-checking,
    provided sigma itself was certified). Otherwise the result is validated
    explicitly and an error is raised if conditioning broke validity.
    """
    if element.node_name != node_name:
        raise ValueError("element belongs to a different node")
    node = sigma.node(node_name)
    rest = tuple(n for n in sigma.nodes if n.name != node_name)
    if not rest:
        raise ValueError("cannot condition away the only node")

    joined = product([sigma.op, element.tau])
    m = partial_trace(joined, [node.in_system.key, node.out_dual.key])
    rest_trace = float(np.prod([n.d_out for n in rest]))
    lam = float(np.trace(m.matrix).real) / rest_trace
    if lam <= tol:
        raise ValueError("conditioning on an outcome of (near-)zero weight")
    result = process_operator(rest, m * (1.0 / lam))

    guaranteed = sigma.certified and no_signalling(sigma, set(sigma.node_names) - {node_name}, tol)
    if guaranteed:
        result.certified = True
        return result
    verdict = validate_process(result, tol)
    if not verdict.valid:
        raise ValueError(
            "conditioning produced an invalid operator "
            f"(forbidden norm {verdict.forbidden_norm:.3e}, min eig {verdict.min_eigenvalue:.3e})"
        )
    return result


def extend_nodes(sigma: ProcessOperator, ancilla: LabeledOperator, attach: dict, tol: float = 1e-9) -> ProcessOperator:
    """Tensor an ancillary state onto chosen nodes' in-spaces.

    ``attach`` maps node names to lists of ancilla system references; every
    ancilla system must be attached to exactly one node. The extended node's
    in-space orders the original factor first. Validity is preserved, so the
    certification latch carries over when the ancilla is a genuine state.
    """
    anc_keys = [s.key for s in ancilla.systems]
    cover = []
    for name, refs in attach.items():
        sigma.node(name)
        for r in refs:
            cover.append(r)
    resolved = []
    for r in cover:
        lbl = ancilla.system(r)
        if lbl.dual:
            raise ValueError("ancilla systems must be primal")
        resolved.append(lbl.key)
    if sorted(resolved) != sorted(anc_keys):
        raise ValueError("attach must cover every ancilla system exactly once")

    tr = float(np.trace(ancilla.matrix).real)
    eigs = np.linalg.eigvalsh((ancilla.matrix + ancilla.matrix.conj().T) / 2)
    is_state = abs(tr - 1.0) <= tol and float(eigs[0]) >= -tol

    big = tensor(sigma.op, ancilla)
    new_nodes = []
    for n in sigma.nodes:
        refs = attach.get(n.name, ())
        if refs:
            group = [n.in_system.key] + [ancilla.system(r).key for r in refs]
            extra = int(np.prod([ancilla.system(r).dim for r in refs]))
            big = fuse(big, group, f"{n.name}.in")
            new_nodes.append(QuantumNode(n.name, n.d_in * extra, n.d_out))
        else:
            new_nodes.append(n)
    out = process_operator(new_nodes, big)
    out.certified = bool(sigma.certified and is_state)
    return out


def _identity_cj(out_label: SystemLabel, in_dual: SystemLabel) -> LabeledOperator:
    d = out_label.dim
    if in_dual.dim != d:
        raise ValueError("identity wire needs equal dimensions")
    v = np.eye(d, dtype=complex).reshape(-1)
    return LabeledOperator((out_label, in_dual), np.outer(v, v.conj()))


def comb_from_circuit(initial_state: LabeledOperator, channels, node_slots) -> ProcessOperator:
    """Process operator of a fixed circuit with open slots.

    ``initial_state``: state on named wire systems. ``channels``: list of
    ChannelOperator whose input labels name the wires they consume and whose
    output labels name fresh wires. ``node_slots``: (node, in_wire, out_wire)
    triples; the slot's in-wire is rerouted into the node and the out-wire is
    a fresh wire carrying whatever the node emits. Steps are applied in any
    data-available order; unread wires are traced out at the end, and unread
    node out-wires become identity (discarded) legs.
    """
    current = initial_state
    open_primal: dict[str, SystemLabel] = {s.name: s for s in initial_state.systems}
    if any(s.dual for s in initial_state.systems):
        raise ValueError("initial state must live on primal wire systems")
    if len(open_primal) != len(initial_state.systems):
        raise ValueError("wire names must be unique")
    virtual: dict[str, QuantumNode] = {}
    seen_wires = set(open_primal)

    def fresh(name: str):
        if name in seen_wires:
            raise ValueError(f"wire name {name!r} reused")
        seen_wires.add(name)

    pending = [("slot", s) for s in node_slots] + [("chan", c) for c in channels]
    nodes = tuple(s[0] for s in node_slots)
    progress = True
    while pending and progress:
        progress = False
        remaining = []
        for kind, item in pending:
            if kind == "slot":
                node, in_wire, out_wire = item
                if in_wire in open_primal:
                    w = open_primal.pop(in_wire)
                    if w.dim != node.d_in:
                        raise ValueError(f"wire {in_wire!r} has dim {w.dim}, node needs {node.d_in}")
                    current = split_system(current, (in_wire, False), [node.in_system])
                elif in_wire in virtual:
                    src = virtual.pop(in_wire)
                    if src.d_out != node.d_in:
                        raise ValueError("direct wiring needs matching dimensions")
                    current = tensor(current, _identity_cj(node.in_system, src.out_dual))
                else:
                    remaining.append((kind, item))
                    continue
                fresh(out_wire)
                virtual[out_wire] = node
                progress = True
            else:
                ch = item
                names = [s.name for s in ch.inputs]
                if not all(nm in open_primal or nm in virtual for nm in names):
                    remaining.append((kind, item))
                    continue
                chop = ch.op
                consumed = []
                for inp in ch.inputs:
                    if inp.name in open_primal:
                        w = open_primal.pop(inp.name)
                        if w.dim != inp.dim:
                            raise ValueError(f"wire {inp.name!r} dimension mismatch")
                        current = transpose_systems(current, [(inp.name, False)])
                        consumed.append((inp.name, True))
                    else:
                        src = virtual.pop(inp.name)
                        if src.d_out != inp.dim:
                            raise ValueError(f"wire {inp.name!r} dimension mismatch")
                        chop = split_system(chop, (inp.name, True), [src.out_dual])
                current = product([current, chop])
                if consumed:
                    current = partial_trace(current, consumed)
                for out in ch.outputs:
                    fresh(out.name)
                    open_primal[out.name] = out
                progress = True
        pending = remaining
    if pending:
        raise ValueError("circuit has steps whose input wires never become available")

    if open_primal:
        current = partial_trace(current, [(nm, False) for nm in open_primal])
    for nm, node in virtual.items():
        current = tensor(current, identity_operator([node.out_dual]))
    return process_operator(nodes, current)


def random_chain_process(nodes, rng: np.random.Generator, memory_dim: int = 2) -> ProcessOperator:
    """Random process in which the given nodes occur in a fixed chain order.

    A memory wire threads random channels between consecutive slots, so the
    result is a valid process by construction and compatible with the listed
    total order.
    """
    from .rand import random_cptp, random_state

    nodes = tuple(nodes)
    if not nodes:
        raise ValueError("need at least one node")
    first = nodes[0]
    w0 = SystemLabel("w0", first.d_in)
    m0 = SystemLabel("m0", memory_dim)
    rho = random_state(first.d_in * memory_dim, rng)
    init = LabeledOperator((w0, m0), rho)

    slots = []
    channels = []
    for i, node in enumerate(nodes):
        slots.append((node, f"w{i}", f"u{i}"))
        if i + 1 < len(nodes):
            nxt = nodes[i + 1]
            kraus = random_cptp(node.d_out * memory_dim, nxt.d_in * memory_dim, rng)
            ch = cj_from_kraus(
                kraus,
                (SystemLabel(f"u{i}", node.d_out), SystemLabel(f"m{i}", memory_dim)),
                (SystemLabel(f"w{i+1}", nxt.d_in), SystemLabel(f"m{i+1}", memory_dim)),
            )
            channels.append(ch)
    return comb_from_circuit(init, channels, slots)
