"""Reference processes: the coherent control-of-order process, its classical
and reduced variants, the cyclic three-party fixed-point process with its
reversible dilation, signalling/mixing examples, and direct-sum decomposition
verifiers for the routing unitaries.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channels import ChannelOperator, channel_from_unitary, channel_influence_residual
from .classical import ClassicalNode, ClassicalProcess, DeterministicProcess, quantize
from .graphs import DirectedGraph, UnitaryProcess, directed_graph, make_unitary_process
from .labeled import (
    LabeledOperator,
    LinearMap,
    SystemLabel,
    cj_operator,
    identity_operator,
    partial_trace,
    tensor,
)
from .process import ProcessOperator, QuantumNode, comb_from_circuit, process_operator
from .rand import haar_unitary

__all__ = [
    "make_switch",
    "make_reduced_switch",
    "make_af",
    "make_af_deterministic",
    "make_bw_extension",
    "make_classical_switch",
    "MethodsCounterexample",
    "make_methods_counterexample",
    "make_mix_example",
    "make_mix_components",
    "SwitchParts",
    "BWParts",
    "switch_decomposition",
    "bw_decomposition",
    "DecompositionReport",
    "decomposition_report",
    "verify_decomposition",
    "random_unitary_chain",
    "switch_causal_graph",
    "reduced_switch_causal_graph",
    "af_causal_graph",
]


def _swap_matrix(d1: int, d2: int) -> np.ndarray:
    """Permutation sending |x, y> to |y, x>."""
    m = np.zeros((d1 * d2, d1 * d2))
    for x in range(d1):
        for y in range(d2):
            m[y * d1 + x, x * d2 + y] = 1.0
    return m


def make_switch(d: int = 2) -> UnitaryProcess:
    """Coherent control of the order of two channels, as a unitary process.

    Nodes A and B act on a d-dimensional target. The root P emits a control
    qubit and the initial target (composite dimension 2d, control most
    significant); the leaf F absorbs the control and the final target.
    Control value 0 routes the target through A then B, value 1 through B
    then A.
    """
    if d < 2:
        raise ValueError("target dimension must be at least 2")
    na = QuantumNode("A", d, d)
    nb = QuantumNode("B", d, d)
    np_ = QuantumNode("P", 1, 2 * d)
    nf = QuantumNode("F", 2 * d, 1)

    dim = d * d * 2 * d
    u = np.zeros((dim, dim))
    for a in range(d):
        for b in range(d):
            for q in range(2):
                for s in range(d):
                    col = (a * d + b) * 2 * d + q * d + s
                    if q == 0:
                        row = (s * d + a) * 2 * d + b
                    else:
                        row = (b * d + s) * 2 * d + d + a
                    u[row, col] = 1.0
    um = LinearMap(
        u.astype(complex),
        (na.out_system, nb.out_system, np_.out_system),
        (na.in_system, nb.in_system, nf.in_system),
    )
    up = make_unitary_process([na, nb, np_, nf], um)
    return up


def make_reduced_switch(d: int = 2) -> ProcessOperator:
    """The control-of-order process with the leaf node traced out."""
    up = make_switch(d)
    sigma = up.process
    nf = sigma.node("F")
    reduced = partial_trace(sigma.op, [nf.in_system.key, nf.out_dual.key])
    return process_operator(sigma.nodes[:3], reduced)


def make_af_deterministic() -> DeterministicProcess:
    """Three-bit cyclic function process: each input is a function of the
    other two outputs (in = NOT(next) AND previous, cyclically)."""
    nodes = (ClassicalNode("A", 2, 2), ClassicalNode("B", 2, 2), ClassicalNode("C", 2, 2))
    func = np.zeros((2, 2, 2, 3), dtype=np.int64)
    for a in range(2):
        for b in range(2):
            for c in range(2):
                func[a, b, c] = [(1 - b) & c, (1 - c) & a, (1 - a) & b]
    return DeterministicProcess(nodes, func)


def make_af() -> ProcessOperator:
    """Diagonal process operator of the three-bit cyclic function process."""
    return quantize(make_af_deterministic().to_classical())


def make_bw_extension() -> UnitaryProcess:
    """Reversible dilation of the three-bit cyclic process.

    The root P emits three ancilla bits (one per node, A-major); the leaf F
    absorbs a copy of all three node outputs. The permutation XORs each
    ancilla with the corresponding function value:
    (a, b, c, (l, m, n)) -> (l + (!b & c), m + (!c & a), n + (!a & b), (a, b, c)).
    """
    na = QuantumNode("A", 2, 2)
    nb = QuantumNode("B", 2, 2)
    nc = QuantumNode("C", 2, 2)
    np_ = QuantumNode("P", 1, 8)
    nf = QuantumNode("F", 8, 1)

    u = np.zeros((64, 64))
    for a in range(2):
        for b in range(2):
            for c in range(2):
                for l in range(2):
                    for m in range(2):
                        for n in range(2):
                            col = ((a * 2 + b) * 2 + c) * 8 + (l * 4 + m * 2 + n)
                            x = l ^ ((1 - b) & c)
                            y = m ^ ((1 - c) & a)
                            z = n ^ ((1 - a) & b)
                            row = ((x * 2 + y) * 2 + z) * 8 + (a * 4 + b * 2 + c)
                            u[row, col] = 1.0
    um = LinearMap(
        u.astype(complex),
        (na.out_system, nb.out_system, nc.out_system, np_.out_system),
        (na.in_system, nb.in_system, nc.in_system, nf.in_system),
    )
    return make_unitary_process([na, nb, nc, np_, nf], um)


def make_classical_switch(d: int = 2) -> DeterministicProcess:
    """Classical control of order: a control bit routes the target through
    A then B or B then A, and the leaf records the control and final target."""
    if d < 2:
        raise ValueError("target cardinality must be at least 2")
    nodes = (
        ClassicalNode("A", d, d),
        ClassicalNode("B", d, d),
        ClassicalNode("P", 1, 2 * d),
        ClassicalNode("F", 2 * d, 1),
    )
    func = np.zeros((d, d, 2 * d, 1, 4), dtype=np.int64)
    for a in range(d):
        for b in range(d):
            for q in range(2):
                for s in range(d):
                    if q == 0:
                        a_in, b_in, f_in = s, a, 0 * d + b
                    else:
                        a_in, b_in, f_in = b, s, d + a
                    func[a, b, q * d + s, 0] = [a_in, b_in, 0, f_in]
    return DeterministicProcess(nodes, func)


@dataclass(frozen=True)
class MethodsCounterexample:
    """Two mutually conditioned classical channels that admit no joint process.

    ``p_a`` holds P(A.in | B.out, C.out), axes (a_in, b_out, c_out);
    ``p_b`` holds P(B.in | A.out, C.out), axes (b_in, a_out, c_out).
    """

    p_a: np.ndarray
    p_b: np.ndarray

    def combined(self, p_c) -> ClassicalProcess:
        """Product table over three bit-nodes with the given C.in distribution."""
        p_c = np.asarray(p_c, dtype=float)
        if p_c.shape != (2,):
            raise ValueError("need a distribution over two C.in values")
        nodes = (ClassicalNode("A", 2, 2), ClassicalNode("B", 2, 2), ClassicalNode("C", 2, 2))
        table = np.zeros((2, 2, 2, 2, 2, 2))
        for ai in range(2):
            for ao in range(2):
                for bi in range(2):
                    for bo in range(2):
                        for ci in range(2):
                            for co in range(2):
                                table[ai, ao, bi, bo, ci, co] = (
                                    self.p_a[ai, bo, co] * self.p_b[bi, ao, co] * p_c[ci]
                                )
        return ClassicalProcess(nodes, table)


def make_methods_counterexample() -> MethodsCounterexample:
    """The fixed two-channel counterexample tables."""
    p_a = np.zeros((2, 2, 2))
    p_a[0] = [[0.4, 0.3], [0.8, 0.3]]
    p_a[1] = 1.0 - p_a[0]
    p_b = np.zeros((2, 2, 2))
    p_b[0] = [[0.5, 0.3], [0.25, 0.1]]
    p_b[1] = 1.0 - p_b[0]
    return MethodsCounterexample(p_a, p_b)


def make_mix_example(rho_a_in=None) -> ProcessOperator:
    """Two-node process with a fixed input state at A, a maximally mixed
    input at B, and no signalling in either direction."""
    if rho_a_in is None:
        rho_a_in = np.eye(2, dtype=complex) / 2
    rho_a_in = np.asarray(rho_a_in, dtype=complex)
    d = rho_a_in.shape[0]
    na = QuantumNode("A", d, d)
    nb = QuantumNode("B", 2, 2)
    op = tensor(
        LabeledOperator((na.in_system,), rho_a_in),
        identity_operator([na.out_dual]),
        LabeledOperator((nb.in_system,), np.eye(2, dtype=complex) / 2),
        identity_operator([nb.out_dual]),
    )
    return process_operator((na, nb), op)


def make_mix_components(rho_a_in=None):
    """The two coin-value circuits averaging to the mixed example.

    Each circuit prepares A's input and an ancilla bit (value 0 or 1), routes
    A's output through a controlled-NOT with the ancilla as target, discards
    the control wire, and feeds the target wire to B. Returns (sigma0, sigma1).
    """
    if rho_a_in is None:
        rho_a_in = np.eye(2, dtype=complex) / 2
    rho_a_in = np.asarray(rho_a_in, dtype=complex)
    d = rho_a_in.shape[0]
    if d != 2:
        raise ValueError("the controlled-NOT construction needs qubit wires")
    cnot = np.zeros((4, 4))
    for x in range(2):
        for y in range(2):
            cnot[x * 2 + (y ^ x), x * 2 + y] = 1.0

    out = []
    for coin in range(2):
        w_a = SystemLabel("wA", 2)
        w_anc = SystemLabel("wanc", 2)
        w_ao = SystemLabel("wAout", 2)
        w_ctrl = SystemLabel("wctrl", 2)
        w_tgt = SystemLabel("wtgt", 2)
        anc = np.zeros((2, 2), dtype=complex)
        anc[coin, coin] = 1.0
        init = tensor(
            LabeledOperator((w_a,), rho_a_in),
            LabeledOperator((w_anc,), anc),
        )
        gate = channel_from_unitary(LinearMap(cnot.astype(complex), (w_ao, w_anc), (w_ctrl, w_tgt)))
        na = QuantumNode("A", 2, 2)
        nb = QuantumNode("B", 2, 2)
        sigma = comb_from_circuit(init, [gate], [(na, "wA", "wAout"), (nb, "wtgt", "wB")])
        out.append(sigma)
    return tuple(out)


@dataclass(frozen=True)
class SwitchParts:
    """Direct-sum routing decomposition for a two-slot control-of-order unitary.

    The control block i splits P.out into L x R factors of dimensions
    ``block_dims[i]``; ``v[i]`` maps A.out (x) L_i to B.in (x) FL_i and
    ``w[i]`` maps R_i (x) B.out to FR_i (x) A.in, with F.in split per block
    into ``f_block_dims[i]``. ``s`` and ``t`` are the boundary basis changes
    on P.out and F.in.
    """

    d: int
    block_dims: tuple
    f_block_dims: tuple
    s: np.ndarray
    t: np.ndarray
    v: tuple
    w: tuple


def switch_decomposition(d: int = 2) -> SwitchParts:
    """Concrete routing parts: identity boundaries, identity-or-swap blocks."""
    if d < 2:
        raise ValueError("target dimension must be at least 2")
    return SwitchParts(
        d=d,
        block_dims=((1, d), (d, 1)),
        f_block_dims=((1, d), (d, 1)),
        s=np.eye(2 * d),
        t=np.eye(2 * d),
        v=(np.eye(d), _swap_matrix(d, d)),
        w=(_swap_matrix(d, d), np.eye(d)),
    )


@dataclass(frozen=True)
class BWParts:
    """Direct-sum decomposition of the three-bit dilation unitary.

    All direct-sum indices are binary and every indexed interior space is
    one-dimensional. ``p[i][j]``, ``q[i][k]``, ``r[j][k]`` are the per-block
    single-qubit maps ancilla -> node input; ``s``/``t``/``v`` split the three
    node outputs into their index values and ``w`` collects the index triple
    into F.in (lexicographic i, j, k).
    """

    s: np.ndarray
    t: np.ndarray
    v: np.ndarray
    w: np.ndarray
    p: tuple
    q: tuple
    r: tuple


def bw_decomposition() -> BWParts:
    """Concrete parts: identity boundaries, identity-or-NOT blocks."""
    eye = np.eye(2)
    not_ = np.array([[0.0, 1.0], [1.0, 0.0]])
    p = tuple(tuple(not_ if ((1 - i) & j) else eye for j in range(2)) for i in range(2))
    q = tuple(tuple(not_ if ((1 - k) & i) else eye for k in range(2)) for i in range(2))
    r = tuple(tuple(not_ if ((1 - j) & k) else eye for k in range(2)) for j in range(2))
    return BWParts(s=np.eye(2), t=np.eye(2), v=np.eye(2), w=np.eye(8), p=p, q=q, r=r)


@dataclass(frozen=True)
class DecompositionReport:
    passed: bool
    reconstruction_residual: float
    block_signalling: dict
    blocks_one_way: bool
    tol: float


def _axis_order(labels, wanted_names):
    """Axis permutation bringing ``wanted_names`` first; any extra axes must be
    trivial (dimension one) and are appended at the end."""
    names = [s.name for s in labels]
    order = []
    for nm in wanted_names:
        if nm not in names:
            raise ValueError(f"expected a system named {nm!r}, found {names}")
        order.append(names.index(nm))
    for i, s in enumerate(labels):
        if i in order:
            continue
        if s.dim != 1:
            raise ValueError(f"unexpected nontrivial system {s!r}")
        order.append(i)
    return order


def _switch_report(u: LinearMap, parts: SwitchParts, tol: float) -> DecompositionReport:
    d = parts.d
    dp = sum(l * r for l, r in parts.block_dims)
    df = sum(l * r for l, r in parts.f_block_dims)
    if parts.s.shape != (dp, dp) or parts.t.shape != (df, df):
        raise ValueError("boundary matrices do not match the block dimensions")
    for i, ((ld, rd), (fld, frd)) in enumerate(zip(parts.block_dims, parts.f_block_dims)):
        if parts.v[i].shape != (d * fld, d * ld):
            raise ValueError(f"block {i}: v has shape {parts.v[i].shape}, expected {(d * fld, d * ld)}")
        if parts.w[i].shape != (frd * d, rd * d):
            raise ValueError(f"block {i}: w has shape {parts.w[i].shape}, expected {(frd * d, rd * d)}")

    # middle stage on (A.out, sum-block, B.out) -> (B.in, f-sum-block, A.in)
    mid = np.zeros((d * df * d, d * dp * d), dtype=complex)
    off_in = 0
    off_out = 0
    for i, ((ld, rd), (fld, frd)) in enumerate(zip(parts.block_dims, parts.f_block_dims)):
        v = parts.v[i]
        w = parts.w[i]
        for a in range(d):
            for l in range(ld):
                for r in range(rd):
                    for b in range(d):
                        col = (a * dp + off_in + l * rd + r) * d + b
                        for y in range(d):
                            for fl in range(fld):
                                vv = v[y * fld + fl, a * ld + l]
                                if vv == 0:
                                    continue
                                for fr in range(frd):
                                    for x in range(d):
                                        ww = w[fr * d + x, r * d + b]
                                        if ww == 0:
                                            continue
                                        row = (y * df + off_out + fl * frd + fr) * d + x
                                        mid[row, col] += vv * ww
        off_in += ld * rd
        off_out += fld * frd

    stage1 = np.kron(np.kron(np.eye(d), parts.s), np.eye(d))
    stage3 = np.kron(np.kron(np.eye(d), parts.t), np.eye(d))
    u_rec = stage3 @ mid @ stage1

    dom_dims = [s.dim for s in u.domain]
    cod_dims = [s.dim for s in u.codomain]
    arr = u.matrix.reshape(cod_dims + dom_dims)
    cod_perm = _axis_order(u.codomain, ["B.in", "F.in", "A.in"])
    dom_perm = [len(cod_dims) + k for k in _axis_order(u.domain, ["A.out", "P.out", "B.out"])]
    arr = np.transpose(arr, cod_perm + dom_perm)
    u_target = arr.reshape(d * df * d, d * dp * d)
    resid = float(np.abs(u_rec - u_target).max())

    block_sig = {}
    one_way = True
    for i, ((ld, rd), (fld, frd)) in enumerate(zip(parts.block_dims, parts.f_block_dims)):
        aout = SystemLabel("A.out", d)
        bout = SystemLabel("B.out", d)
        ain = SystemLabel("A.in", d)
        bin_ = SystemLabel("B.in", d)
        pl = SystemLabel("P.L", ld)
        pr = SystemLabel("P.R", rd)
        fl = SystemLabel("F.L", fld)
        fr = SystemLabel("F.R", frd)
        ch_v = channel_from_unitary(LinearMap(parts.v[i].astype(complex), (aout, pl), (bin_, fl)))
        ch_w = channel_from_unitary(LinearMap(parts.w[i].astype(complex), (pr, bout), (fr, ain)))
        r_ab = channel_influence_residual(ch_v, "A.out", "B.in")
        r_ba = channel_influence_residual(ch_w, "B.out", "A.in")
        block_sig[i] = {"A->B": r_ab, "B->A": r_ba}
        if r_ab > tol and r_ba > tol:
            one_way = False

    passed = resid <= max(tol, 1e-12) and one_way
    return DecompositionReport(bool(passed), resid, block_sig, bool(one_way), tol)


def _bw_report(u: LinearMap, parts: BWParts, tol: float) -> DecompositionReport:
    for mat, nm in [(parts.s, "s"), (parts.t, "t"), (parts.v, "v")]:
        if mat.shape != (2, 2):
            raise ValueError(f"boundary {nm} must be 2x2")
    if parts.w.shape != (8, 8):
        raise ValueError("w must be 8x8")

    # middle stage on (lC, i, lB, j, k, lA) -> (C.in, B.in, A.in, sum-ijk)
    mid = np.zeros((64, 64), dtype=complex)
    for i in range(2):
        for j in range(2):
            for k in range(2):
                pm = parts.p[i][j]
                qm = parts.q[i][k]
                rm = parts.r[j][k]
                for n in range(2):
                    for m in range(2):
                        for l in range(2):
                            col = ((((n * 2 + i) * 2 + m) * 2 + j) * 2 + k) * 2 + l
                            for z in range(2):
                                for y in range(2):
                                    for x in range(2):
                                        val = pm[z, n] * qm[y, m] * rm[x, l]
                                        if val == 0:
                                            continue
                                        row = ((z * 2 + y) * 2 + x) * 8 + (i * 4 + j * 2 + k)
                                        mid[row, col] += val
    stage1 = np.kron(np.kron(np.kron(np.eye(2), parts.s), np.kron(np.eye(2), parts.t)),
                     np.kron(parts.v, np.eye(2)))
    stage3 = np.kron(np.eye(8), parts.w)
    u_rec = stage3 @ mid @ stage1

    dom_dims = [s.dim for s in u.domain]
    cod_dims = [s.dim for s in u.codomain]
    arr = u.matrix.reshape(cod_dims + dom_dims)
    cod_perm = _axis_order(u.codomain, ["C.in", "B.in", "A.in", "F.in"])
    dom_perm = [len(cod_dims) + kk for kk in _axis_order(u.domain, ["A.out", "B.out", "C.out", "P.out"])]
    arr = np.transpose(arr, cod_perm + dom_perm)
    # split P.out (A-major l, m, n) and bring the domain to (n, a, m, b, c, l)
    arr = arr.reshape(2, 2, 2, 8, 2, 2, 2, 2, 2, 2)
    arr = np.transpose(arr, (0, 1, 2, 3, 9, 4, 8, 5, 6, 7))
    u_target = arr.reshape(64, 64)
    resid = float(np.abs(u_rec - u_target).max())

    block_sig = {}
    one_way = True
    lam = {nm: SystemLabel(f"anc.{nm}", 2) for nm in "ABC"}
    ins = {nm: SystemLabel(f"{nm}.in", 2) for nm in "ABC"}
    for i in range(2):
        for j in range(2):
            for k in range(2):
                block = np.kron(np.kron(parts.p[i][j], parts.q[i][k]), parts.r[j][k])
                ch = channel_from_unitary(LinearMap(
                    block.astype(complex),
                    (lam["C"], lam["B"], lam["A"]),
                    (ins["C"], ins["B"], ins["A"]),
                ))
                cross = {}
                for src in "ABC":
                    for dst in "ABC":
                        if src == dst:
                            continue
                        cross[f"anc.{src}->{dst}.in"] = channel_influence_residual(
                            ch, f"anc.{src}", f"{dst}.in"
                        )
                block_sig[(i, j, k)] = cross
                if any(vv > tol for vv in cross.values()):
                    one_way = False
    passed = resid <= max(tol, 1e-12) and one_way
    return DecompositionReport(bool(passed), resid, block_sig, bool(one_way), tol)


def decomposition_report(u: LinearMap, parts, tol: float = 1e-9) -> DecompositionReport:
    """Reconstruct the direct-sum sandwich from the parts and compare to u.

    Also evaluates the per-block signalling structure: for the two-slot shape,
    each block may signal A to B or B to A but not both; for the three-bit
    shape every block must be influence-diagonal (ancilla i to node i only).
    """
    if isinstance(parts, SwitchParts):
        return _switch_report(u, parts, tol)
    if isinstance(parts, BWParts):
        return _bw_report(u, parts, tol)
    raise TypeError(f"unsupported parts type {type(parts).__name__}")


def verify_decomposition(u: LinearMap, parts, tol: float = 1e-9) -> bool:
    """True iff the parts reconstruct u and satisfy the block conditions."""
    return decomposition_report(u, parts, tol).passed


def random_unitary_chain(n_slots: int, rng: np.random.Generator) -> UnitaryProcess:
    """Random qubit-wire chain comb as a unitary process.

    A root node emits the first wire plus a memory qubit; Haar-random
    two-qubit stages thread the memory through the slots in a fixed order;
    the leaf absorbs the last wire and the memory.
    """
    if n_slots < 1:
        raise ValueError("need at least one slot")
    slot_names = [chr(ord("A") + i) for i in range(n_slots)]
    nodes = [QuantumNode(nm, 2, 2) for nm in slot_names]
    np_ = QuantumNode("P", 1, 4)
    nf = QuantumNode("F", 4, 1)

    mem = SystemLabel("mem", 2)
    u = LinearMap(
        haar_unitary(4, rng),
        (np_.out_system,),
        (nodes[0].in_system, mem),
    )
    for i in range(n_slots):
        if i + 1 < n_slots:
            cod = (nodes[i + 1].in_system, mem)
        else:
            cod = (nf.in_system,)
        stage = LinearMap(haar_unitary(4, rng), (nodes[i].out_system, mem), cod)
        u = _chain_stage(u, stage)
    return make_unitary_process(nodes + [np_, nf], u)


def _chain_stage(u: LinearMap, stage: LinearMap) -> LinearMap:
    """Compose a stage that consumes some of u's codomain plus fresh inputs."""
    from .labeled import apply_stage, tensor_maps, identity_map

    consumed = {s.key for s in stage.domain}
    fresh = [s for s in stage.domain if s.key not in {c.key for c in u.codomain}]
    if fresh:
        u = tensor_maps(u, identity_map(fresh))
    return apply_stage(u, stage)


def switch_causal_graph() -> DirectedGraph:
    """Influence graph of the control-of-order process: 7 edges."""
    return directed_graph(
        ["A", "B", "P", "F"],
        [("P", "A"), ("P", "B"), ("P", "F"), ("A", "B"), ("B", "A"), ("A", "F"), ("B", "F")],
    )


def reduced_switch_causal_graph() -> DirectedGraph:
    """Influence graph of the leaf-traced control-of-order process."""
    return directed_graph(["A", "B", "P"], [("P", "A"), ("P", "B"), ("A", "B"), ("B", "A")])


def af_causal_graph() -> DirectedGraph:
    """Complete directed graph on the three-bit cyclic process nodes."""
    return directed_graph(
        ["A", "B", "C"],
        [("A", "B"), ("B", "A"), ("B", "C"), ("C", "B"), ("C", "A"), ("A", "C")],
    )
