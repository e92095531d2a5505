"""Causal structure of processes: influence graphs, Markov factorizations,
compatibility of a process with a directed graph via unitary extensions.

The causal structure of a unitary process is read off from which inputs of
the unitary can influence which outputs. A directed graph (cycles allowed)
is confirmed for a process either intrinsically, by factoring the process
into commuting channel factors indexed by the graph's parent sets, or
extrinsically, by exhibiting a unitary extension whose influence pattern
matches the graph.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import networkx as nx
import numpy as np

from .channels import (
    ChannelOperator,
    channel_influence_residual,
    channel_no_influence,
    input_signals,
)
from .hs import project_trivial
from .labeled import (
    LabeledOperator,
    LinearMap,
    SystemLabel,
    cj_operator,
    distance,
    is_unitary,
    partial_trace,
    product,
    split_system,
    tensor,
)
from .process import ProcessOperator, QuantumNode, process_operator, validate_process

__all__ = [
    "DirectedGraph",
    "directed_graph",
    "complete_graph",
    "UnitaryProcess",
    "make_unitary_process",
    "causal_structure_unitary",
    "marginal_factor",
    "MarkovFactorization",
    "markov_check",
    "FaithfulnessReport",
    "faithfulness_check",
    "CompatibilityVerdict",
    "compatibility_check",
    "discover",
    "channel_no_influence",
]


@dataclass(frozen=True)
class DirectedGraph:
    """Immutable directed graph over named vertices; cycles are permitted."""

    vertices: tuple[str, ...]
    edges: frozenset

    def __post_init__(self):
        object.__setattr__(self, "vertices", tuple(self.vertices))
        object.__setattr__(self, "edges", frozenset(tuple(e) for e in self.edges))
        vs = set(self.vertices)
        if len(vs) != len(self.vertices):
            raise ValueError("duplicate vertices")
        for a, b in self.edges:
            if a not in vs or b not in vs:
                raise ValueError(f"edge ({a!r}, {b!r}) leaves the vertex set")

    def _nx(self) -> nx.DiGraph:
        g = nx.DiGraph()
        g.add_nodes_from(self.vertices)
        g.add_edges_from(sorted(self.edges))
        return g

    def parents(self, v: str) -> tuple[str, ...]:
        return tuple(sorted(a for a, b in self.edges if b == v))

    def children(self, v: str) -> tuple[str, ...]:
        return tuple(sorted(b for a, b in self.edges if a == v))

    def has_edge(self, a: str, b: str) -> bool:
        return (a, b) in self.edges

    @property
    def is_cyclic(self) -> bool:
        return not nx.is_directed_acyclic_graph(self._nx())

    def cycle(self) -> tuple[str, ...] | None:
        """Some cycle as a vertex tuple, smallest-then-lexicographic; None if acyclic."""
        g = self._nx()
        if nx.is_directed_acyclic_graph(g):
            return None

        def canonical(c):
            k = c.index(min(c))
            return tuple(c[k:] + c[:k])

        cycles = [canonical(list(c)) for c in nx.simple_cycles(g)]
        return min(cycles, key=lambda c: (len(c), c))

    def topological_order(self) -> tuple[str, ...]:
        """Deterministic (lexicographic tie-break) topological order; raises if cyclic."""
        return tuple(nx.lexicographical_topological_sort(self._nx()))

    def is_subgraph_of(self, other: "DirectedGraph") -> bool:
        return set(self.vertices) <= set(other.vertices) and self.edges <= other.edges

    def to_dot(self) -> str:
        lines = ["digraph causal {"]
        for v in sorted(self.vertices):
            lines.append(f'  "{v}";')
        for a, b in sorted(self.edges):
            lines.append(f'  "{a}" -> "{b}";')
        lines.append("}")
        return "\n".join(lines) + "\n"


def directed_graph(vertices, edges, allow_self_loops: bool = False) -> DirectedGraph:
    g = DirectedGraph(tuple(vertices), frozenset(tuple(e) for e in edges))
    if not allow_self_loops:
        for a, b in g.edges:
            if a == b:
                raise ValueError(f"self-loop at {a!r} (not enabled)")
    return g


def complete_graph(vertices) -> DirectedGraph:
    vs = tuple(vertices)
    return DirectedGraph(vs, frozenset((a, b) for a in vs for b in vs if a != b))


@dataclass(frozen=True)
class UnitaryProcess:
    """A process together with the unitary whose CJ operator it is.

    The unitary maps the tensor of all node out-spaces to the tensor of all
    node in-spaces.
    """

    process: ProcessOperator
    unitary: LinearMap

    @property
    def nodes(self) -> tuple[QuantumNode, ...]:
        return self.process.nodes

    @property
    def channel(self) -> ChannelOperator:
        """The process operator read as the CJ operator of the unitary channel."""
        outs = tuple(n.in_system for n in self.nodes)
        ins = tuple(n.out_system for n in self.nodes)
        return ChannelOperator(self.process.op, outs, ins)


def make_unitary_process(nodes, u: LinearMap, tol: float = 1e-9) -> UnitaryProcess:
    """Build the process operator of a unitary from out-spaces to in-spaces.

    The result is not auto-certified: not every unitary of the right shape is
    a valid process (e.g. wiring a node's output straight back into its own
    input fails the support condition).
    """
    nodes = tuple(nodes)
    dom_pad = list(u.domain)
    cod_pad = list(u.codomain)
    dom_keys = {s.key for s in u.domain}
    cod_keys = {s.key for s in u.codomain}
    for n in nodes:
        if n.out_system.key not in dom_keys and n.d_out == 1:
            dom_pad.append(n.out_system)
        if n.in_system.key not in cod_keys and n.d_in == 1:
            cod_pad.append(n.in_system)
    u = LinearMap(u.matrix, tuple(dom_pad), tuple(cod_pad))
    dom = sorted(s.key for s in u.domain)
    cod = sorted(s.key for s in u.codomain)
    if dom != sorted((f"{n.name}.out", False) for n in nodes):
        raise ValueError(f"unitary domain {dom} does not cover the node out-spaces")
    if cod != sorted((f"{n.name}.in", False) for n in nodes):
        raise ValueError(f"unitary codomain {cod} does not cover the node in-spaces")
    if not is_unitary(u, tol):
        raise ValueError("map is not unitary within tolerance")
    sigma = process_operator(nodes, cj_operator(u))
    return UnitaryProcess(sigma, u)


def causal_structure_unitary(up: UnitaryProcess, tol: float = 1e-9) -> DirectedGraph:
    """Influence graph of a unitary process: j -> i iff A_j.out can influence A_i.in."""
    ch = up.channel
    edges = set()
    for nj in up.nodes:
        if nj.d_out == 1:
            continue
        for ni in up.nodes:
            if ni.d_in == 1 or ni.name == nj.name:
                continue
            if not channel_no_influence(ch, f"{nj.name}.out", f"{ni.name}.in", tol):
                edges.add((nj.name, ni.name))
    return DirectedGraph(tuple(n.name for n in up.nodes), frozenset(edges))


def marginal_factor(sigma: ProcessOperator, node_name: str, parents) -> ChannelOperator:
    """Candidate channel factor for one node given a parent set.

    Traces every in-space except the node's own and every out-dual outside
    the parent set, rescaled so the result is trace-preserving whenever the
    parents screen the node off (the defining property the Markov check then
    verifies).
    """
    node = sigma.node(node_name)
    parents = set(parents)
    for p in parents:
        sigma.node(p)
    traced = []
    scale = 1.0
    for n in sigma.nodes:
        if n.name != node_name:
            traced.append(n.in_system.key)
        if n.name not in parents:
            traced.append(n.out_dual.key)
            scale /= n.d_out
    marg = partial_trace(sigma.op, traced) * scale
    outs = (node.in_system,)
    ins = tuple(sigma.node(p).out_system for p in sorted(parents))
    return ChannelOperator(marg, outs, ins)


@dataclass(frozen=True)
class MarkovFactorization:
    graph: DirectedGraph
    factors: dict
    channel_residuals: dict
    commutator_residuals: dict
    product_residual: float
    accepted: bool
    tol: float


def markov_check(sigma: ProcessOperator, graph: DirectedGraph, tol: float = 1e-9) -> MarkovFactorization:
    """Does sigma factor into commuting channels, one per node, along the graph?

    Each node's factor conditions on its graph parents. Accepted iff every
    factor is a channel (PSD, trace-preserving), all factors commute, and the
    ordered product reproduces sigma.
    """
    if set(graph.vertices) != set(sigma.node_names):
        raise ValueError("graph vertices must match the process nodes")
    factors = {n.name: marginal_factor(sigma, n.name, graph.parents(n.name)) for n in sigma.nodes}

    chres = {}
    ok = True
    for name, ch in factors.items():
        r = ch.cptp_residuals()
        chres[name] = r
        if r["hermitian"] > tol or r["min_eigenvalue"] < -tol or r["trace_preserving"] > tol:
            ok = False

    ops = {name: factors[name].op for name in factors}
    comm = {}
    names = [n.name for n in sigma.nodes]
    for a, b in itertools.combinations(names, 2):
        x = product([ops[a], ops[b]])
        y = product([ops[b], ops[a]])
        scale = max(1.0, float(np.linalg.norm(ops[a].matrix)) * float(np.linalg.norm(ops[b].matrix)))
        res = float(np.linalg.norm(x.matrix - x._aligned(y))) / scale
        comm[(a, b)] = res
        if res > tol:
            ok = False

    prod = product([ops[nm] for nm in names], systems=sigma.op.systems)
    pres = distance(prod, sigma.op)
    if pres > tol:
        ok = False
    return MarkovFactorization(graph, factors, chres, comm, pres, bool(ok), tol)


@dataclass(frozen=True)
class FaithfulnessReport:
    edge_signalling: dict
    faithful: bool
    tol: float


def faithfulness_check(mf: MarkovFactorization, tol: float | None = None) -> FaithfulnessReport:
    """Is every edge of an accepted factorization load-bearing?

    An edge p -> c is confirmed when the factor at c actually depends on
    p's out-space; a faithful graph has no removable edges.
    """
    t = mf.tol if tol is None else tol
    report = {}
    for a, b in sorted(mf.graph.edges):
        ch = mf.factors[b]
        report[(a, b)] = bool(input_signals(ch, f"{a}.out", t))
    return FaithfulnessReport(report, all(report.values()) if report else True, t)


@dataclass(frozen=True)
class CompatibilityVerdict:
    compatible: bool
    extension_valid: bool
    marginal_residual: float
    influence_residuals: dict
    tol: float


def compatibility_check(
    sigma: ProcessOperator,
    graph: DirectedGraph,
    extension: UnitaryProcess,
    lambda_states,
    tol: float = 1e-9,
    validate_extension: bool = True,
) -> CompatibilityVerdict:
    """Confirm a causal structure for sigma via a unitary extension.

    The extension must add exactly one root node (trivial in-space, out-space
    split into one memory system per node of sigma) and one leaf node
    (trivial out-space). Compatibility requires: the extension is itself a
    valid process; preparing the product of ``lambda_states`` at the root and
    discarding the leaf reproduces sigma; and the extension's unitary shows
    no influence from A_j.out to A_i.in unless the graph has edge j -> i,
    none from A_i.out back to A_i.in, and none from the j-th memory system
    to A_i.in for j != i.
    """
    sig_names = list(sigma.node_names)
    extras = [n for n in extension.nodes if n.name not in set(sig_names)]
    if len(extras) != 2:
        raise ValueError("extension must add exactly a root and a leaf node")
    roots = [n for n in extras if n.d_in == 1 and n.d_out > 1]
    leaves = [n for n in extras if n.d_out == 1]
    if len(roots) != 1 or len(leaves) != 1 or roots[0].name == leaves[0].name:
        raise ValueError("could not identify root and leaf among the extra nodes")
    root, leaf = roots[0], leaves[0]
    for name in sig_names:
        a, b = sigma.node(name), extension.process.node(name)
        if (a.d_in, a.d_out) != (b.d_in, b.d_out):
            raise ValueError(f"node {name!r} has different dimensions in the extension")

    lams = [np.asarray(l, dtype=complex) for l in lambda_states]
    if len(lams) != len(sig_names):
        raise ValueError("need one memory state per node of sigma")
    dims = [l.shape[0] for l in lams]
    if int(np.prod(dims)) != root.d_out:
        raise ValueError("memory dimensions do not multiply to the root out-space")

    ext_valid = True
    if validate_extension:
        ext_valid = validate_process(extension.process, tol).valid

    # Marginal reproduction: prepare the memory product at the root, discard the leaf.
    prep = lams[0]
    for l in lams[1:]:
        prep = np.kron(prep, l)
    tau_root = tensor(
        LabeledOperator((root.in_system,), np.eye(1, dtype=complex)),
        LabeledOperator((root.out_dual,), prep.T),
    )
    contracted = product([extension.process.op, tau_root])
    marg = partial_trace(
        contracted,
        [root.in_system.key, root.out_dual.key, leaf.in_system.key, leaf.out_dual.key],
    )
    marginal_residual = distance(marg, sigma.op)

    # Influence pattern of the unitary, with the root out-space split per node.
    lam_labels = [SystemLabel(f"{root.name}[{nm}]", d) for nm, d in zip(sig_names, dims)]
    ch = extension.channel
    chop = ch.op
    if root.d_out > 1:
        chop = split_system(chop, (f"{root.name}.out", True), [SystemLabel(l.name, l.dim, dual=True) for l in lam_labels])
    new_inputs = []
    for s in ch.inputs:
        if s.name == f"{root.name}.out":
            new_inputs.extend(lam_labels)
        else:
            new_inputs.append(s)
    ch2 = ChannelOperator(chop, ch.outputs, tuple(new_inputs))

    influence = {}
    ok = True
    for j in sig_names:
        nj = sigma.node(j)
        for i in sig_names:
            ni = sigma.node(i)
            if ni.d_in == 1:
                continue
            if nj.d_out > 1 and not graph.has_edge(j, i):
                r = channel_influence_residual(ch2, f"{j}.out", f"{i}.in")
                influence[f"{j}.out -/-> {i}.in"] = r
                ok = ok and r <= tol
            if j != i:
                lam = lam_labels[sig_names.index(j)]
                if lam.dim > 1:
                    r = channel_influence_residual(ch2, lam.name, f"{i}.in")
                    influence[f"{lam.name} -/-> {i}.in"] = r
                    ok = ok and r <= tol
    compatible = bool(ok and ext_valid and marginal_residual <= tol)
    return CompatibilityVerdict(compatible, bool(ext_valid), float(marginal_residual), influence, tol)


def discover(sigma: ProcessOperator, tol: float = 1e-9) -> tuple[DirectedGraph, MarkovFactorization]:
    """Read a candidate causal structure off the process and try to confirm it.

    Edge j -> i is proposed iff the marginal on A_i.in (with all other
    in-spaces traced) depends on A_j's out-dual factor. The returned
    factorization's ``accepted`` flag says whether the graph is confirmed
    intrinsically.
    """
    edges = set()
    for ni in sigma.nodes:
        if ni.d_in == 1:
            continue
        traced = [n.in_system.key for n in sigma.nodes if n.name != ni.name]
        marg = partial_trace(sigma.op, traced)
        for nj in sigma.nodes:
            if nj.name == ni.name or nj.d_out == 1:
                continue
            res = distance(marg, project_trivial(marg, [nj.out_dual.key]))
            if res > tol:
                edges.add((nj.name, ni.name))
    graph = DirectedGraph(tuple(sigma.node_names), frozenset(edges))
    return graph, markov_check(sigma, graph, tol)
