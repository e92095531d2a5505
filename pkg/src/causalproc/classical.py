"""Classical processes on split nodes: validity, enumeration, polytope tests.

A classical process over nodes X_1..X_n is a nonnegative table
kappa(X_1^in, X_1^out, ..., X_n^in, X_n^out) such that for every choice of
deterministic local functions g_i: X_i^in -> X_i^out the total weight
sum_ins kappa(ins, g(ins)) equals one. Deterministic processes are given by a
global function f mapping all out-values to all in-values; they are valid iff
f has exactly one consistent assignment against every local tuple g.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import linprog

from .labeled import LabeledOperator
from .process import ProcessOperator, QuantumNode, process_operator

__all__ = [
    "ClassicalNode",
    "ClassicalProcess",
    "DeterministicProcess",
    "ClassicalValidationVerdict",
    "validate_classical",
    "validate_deterministic",
    "classical_joint_probabilities",
    "causal_structure_deterministic",
    "ClassicalMarkov",
    "classical_markov_check",
    "enumerate_deterministic_processes",
    "PolytopeVerdict",
    "polytope_membership",
    "ReversibleExtension",
    "reversible_extension",
    "find_process_outside_hull",
    "ClassicalCompatibilityVerdict",
    "classical_compatibility_check",
    "quantize",
]


@dataclass(frozen=True)
class ClassicalNode:
    """A split node with classical in/out variables of the given cardinalities."""

    name: str
    in_card: int
    out_card: int

    def __post_init__(self):
        if self.in_card < 1 or self.out_card < 1:
            raise ValueError("cardinalities must be positive")


def _interleaved_shape(nodes) -> tuple[int, ...]:
    shape = []
    for n in nodes:
        shape.extend([n.in_card, n.out_card])
    return tuple(shape)


@dataclass(frozen=True)
class ClassicalProcess:
    """Probability table over interleaved (in, out) axes, one pair per node."""

    nodes: tuple[ClassicalNode, ...]
    table: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        t = np.asarray(self.table, dtype=float)
        want = _interleaved_shape(self.nodes)
        if t.shape != want:
            raise ValueError(f"table shape {t.shape}, expected {want}")
        object.__setattr__(self, "table", t)

    @property
    def node_names(self) -> tuple[str, ...]:
        return tuple(n.name for n in self.nodes)

    def node(self, name: str) -> ClassicalNode:
        for n in self.nodes:
            if n.name == name:
                return n
        raise KeyError(f"no node named {name!r}")


@dataclass(frozen=True)
class DeterministicProcess:
    """Global function from all out-values to all in-values.

    ``function`` has one axis per node's out-variable (in node order) plus a
    trailing axis of length n holding each node's in-value.
    """

    nodes: tuple[ClassicalNode, ...]
    function: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        f = np.asarray(self.function)
        want = tuple(n.out_card for n in self.nodes) + (len(self.nodes),)
        if f.shape != want:
            raise ValueError(f"function shape {f.shape}, expected {want}")
        for i, n in enumerate(self.nodes):
            vals = f[..., i]
            if vals.min() < 0 or vals.max() >= n.in_card:
                raise ValueError(f"in-values for node {n.name!r} out of range")
        object.__setattr__(self, "function", f)

    def to_classical(self) -> ClassicalProcess:
        """The 0/1 table kappa(ins, outs) = [ins == f(outs)]."""
        shape = _interleaved_shape(self.nodes)
        table = np.zeros(shape)
        for outs in np.ndindex(*[n.out_card for n in self.nodes]):
            ins = self.function[outs]
            idx = []
            for i in range(len(self.nodes)):
                idx.extend([int(ins[i]), int(outs[i])])
            table[tuple(idx)] = 1.0
        return ClassicalProcess(self.nodes, table)


def _local_function_tuples(nodes, budget: int):
    """All tuples of deterministic local maps g_i: in_i -> out_i, in a fixed order."""
    total = 1
    for n in nodes:
        total *= n.out_card**n.in_card
    if total > budget:
        raise ValueError(f"{total} local function tuples exceed the budget {budget}")
    per_node = [
        [np.array(g, dtype=np.int64) for g in itertools.product(range(n.out_card), repeat=n.in_card)]
        for n in nodes
    ]
    return list(itertools.product(*per_node))


@dataclass(frozen=True)
class ClassicalValidationVerdict:
    valid: bool
    min_entry: float
    max_normalization_error: float
    tuples_checked: int
    tol: float


def validate_classical(kp: ClassicalProcess, tol: float = 1e-9, budget: int = 10**7) -> ClassicalValidationVerdict:
    """Nonnegativity plus unit total weight against every deterministic tuple."""
    t = kp.table
    min_entry = float(t.min())
    grids = np.indices([n.in_card for n in kp.nodes])
    worst = 0.0
    tuples = _local_function_tuples(kp.nodes, budget)
    for g in tuples:
        idx = []
        for i in range(len(kp.nodes)):
            idx.append(grids[i])
            idx.append(g[i][grids[i]])
        s = float(t[tuple(idx)].sum())
        worst = max(worst, abs(s - 1.0))
    valid = min_entry >= -tol and worst <= tol
    return ClassicalValidationVerdict(bool(valid), min_entry, worst, len(tuples), tol)


def validate_deterministic(dp: DeterministicProcess, budget: int = 10**7):
    """True iff every local tuple admits exactly one consistent assignment.

    Returns (valid, witness): the witness is an offending tuple of local maps
    (or None), with its number of consistent assignments.
    """
    out_cards = [n.out_card for n in dp.nodes]
    out_space = int(np.prod(out_cards))
    f_comp = dp.function.reshape(out_space, len(dp.nodes))
    xs = np.arange(out_space)
    for g in _local_function_tuples(dp.nodes, budget):
        mapped = [g[i][f_comp[:, i]] for i in range(len(dp.nodes))]
        y = np.ravel_multi_index(mapped, out_cards)
        count = int((y == xs).sum())
        if count != 1:
            return False, (tuple(tuple(gi) for gi in g), count)
    return True, None


def classical_joint_probabilities(kp: ClassicalProcess, channels) -> np.ndarray:
    """Outcome distribution for local classical instruments.

    ``channels`` holds one array per node, shape (outcomes, out_card, in_card),
    giving P(k, out | in). Result axis i enumerates outcomes at node i.
    """
    if len(channels) != len(kp.nodes):
        raise ValueError("need one channel per node")
    n = len(kp.nodes)
    subs = []
    for i in range(n):
        subs.extend([2 * i, 2 * i + 1])
    operands = [kp.table, subs]
    for i, ch in enumerate(channels):
        ch = np.asarray(ch, dtype=float)
        node = kp.nodes[i]
        if ch.shape[1:] != (node.out_card, node.in_card):
            raise ValueError(f"channel {i} has shape {ch.shape}, expected (k, {node.out_card}, {node.in_card})")
        operands.append(ch)
        operands.append([2 * n + i, 2 * i + 1, 2 * i])
    operands.append([2 * n + i for i in range(n)])
    return np.einsum(*operands, optimize="greedy")


def causal_structure_deterministic(dp: DeterministicProcess):
    """Influence graph of a deterministic process: j -> i iff f_i varies with X_j^out."""
    from .graphs import DirectedGraph

    n = len(dp.nodes)
    edges = set()
    for i in range(n):
        comp = dp.function[..., i]
        for j in range(n):
            if dp.nodes[j].out_card == 1:
                continue
            ref = np.take(comp, [0], axis=j)
            if not np.array_equal(comp, np.broadcast_to(ref, comp.shape)):
                if i == j:
                    raise ValueError(
                        f"node {dp.nodes[i].name!r} input depends on its own output; "
                        "not a valid deterministic process"
                    )
                edges.add((dp.nodes[j].name, dp.nodes[i].name))
    return DirectedGraph(tuple(n.name for n in dp.nodes), frozenset(edges))


@dataclass(frozen=True)
class ClassicalMarkov:
    graph: object
    factors: dict
    stochastic_residual: float
    product_residual: float
    accepted: bool
    tol: float


def classical_markov_check(kp: ClassicalProcess, graph, tol: float = 1e-9) -> ClassicalMarkov:
    """Does kappa factor into conditionals P(X_i^in | parent out-values)?

    Factor axes are (in_i,) followed by the parents' out-variables in process
    node order. Accepted iff each factor is a stochastic channel and their
    product reproduces the table.
    """
    if set(graph.vertices) != set(kp.node_names):
        raise ValueError("graph vertices must match the process nodes")
    n = len(kp.nodes)
    names = list(kp.node_names)
    factors = {}
    stoch = 0.0
    for i, node in enumerate(kp.nodes):
        parents = set(graph.parents(node.name))
        keep_axes = [2 * i]
        scale = 1.0
        for j, other in enumerate(kp.nodes):
            if other.name in parents:
                keep_axes.append(2 * j + 1)
            else:
                scale /= other.out_card
        # marginalize: sum over everything else
        axes = tuple(a for a in range(2 * n) if a not in keep_axes)
        fac = kp.table.sum(axis=axes) * scale
        # axes order after sum: kept axes in ascending order; bring in_i first
        kept_sorted = sorted(keep_axes)
        perm = [kept_sorted.index(a) for a in keep_axes]
        fac = np.transpose(fac, perm)
        factors[node.name] = fac
        stoch = max(stoch, float(np.abs(fac.sum(axis=0) - 1.0).max()))
        if fac.min() < -tol:
            stoch = max(stoch, -float(fac.min()))

    subs = []
    for i in range(n):
        subs.extend([2 * i, 2 * i + 1])
    operands = []
    covered_out = set()
    for i, node in enumerate(kp.nodes):
        parents = set(graph.parents(node.name))
        fac_subs = [2 * i]
        for j, other in enumerate(kp.nodes):
            if other.name in parents:
                fac_subs.append(2 * j + 1)
                covered_out.add(2 * j + 1)
        operands.append(factors[node.name])
        operands.append(fac_subs)
    for j, node in enumerate(kp.nodes):
        if 2 * j + 1 not in covered_out:
            operands.append(np.ones(node.out_card))
            operands.append([2 * j + 1])
    operands.append(subs)
    rec = np.einsum(*operands, optimize="greedy")
    prod_res = float(np.abs(rec - kp.table).max())
    accepted = stoch <= tol and prod_res <= tol
    return ClassicalMarkov(graph, factors, stoch, prod_res, bool(accepted), tol)


@lru_cache(maxsize=8)
def _enumerate_cached(cards: tuple, budget: int):
    in_cards = [c[0] for c in cards]
    out_cards = [c[1] for c in cards]
    in_space = int(np.prod(in_cards))
    out_space = int(np.prod(out_cards))
    total = in_space**out_space
    if total > budget:
        raise ValueError(f"{total} candidate functions exceed the budget {budget}")

    # Flat local tuples: g maps flat-in -> flat-out.
    nodes = tuple(ClassicalNode(f"n{i}", ic, oc) for i, (ic, oc) in enumerate(cards))
    gmaps = []
    for g in _local_function_tuples(nodes, budget):
        grids = np.indices(in_cards).reshape(len(cards), in_space)
        outs = [g[i][grids[i]] for i in range(len(cards))]
        gmaps.append(np.ravel_multi_index(outs, out_cards).astype(np.int64))

    xs = np.arange(out_space, dtype=np.int64)
    powers = np.array([in_space ** (out_space - 1 - c) for c in range(out_space)], dtype=np.int64)
    in_divs = []
    acc = 1
    for ic in reversed(in_cards):
        in_divs.append(acc)
        acc *= ic
    in_divs = list(reversed(in_divs))
    valid_ids = []
    chunk = 1 << 20
    for lo in range(0, total, chunk):
        hi = min(lo + chunk, total)
        idx = np.arange(lo, hi, dtype=np.int64)
        f = ((idx[:, None] // powers[None, :]) % in_space).astype(np.int64)
        # cheap necessary condition: no component may read its own out-value
        # (fixing the other parties' maps to constants would leave zero fixed points)
        ok = np.ones(hi - lo, dtype=bool)
        for i in range(len(cards)):
            comp = ((f // in_divs[i]) % in_cards[i]).reshape((hi - lo,) + tuple(out_cards))
            ref = np.take(comp, [0], axis=1 + i)
            ok &= (comp == ref).all(axis=tuple(range(1, len(cards) + 1)))
        keep = np.flatnonzero(ok)
        if keep.size == 0:
            continue
        f = f[keep]
        sub_ok = np.ones(keep.size, dtype=bool)
        for gflat in gmaps:
            y = gflat[f]
            sub_ok &= (y == xs[None, :]).sum(axis=1) == 1
            if not sub_ok.any():
                break
        valid_ids.extend(idx[keep[sub_ok]].tolist())
    return tuple(valid_ids)


def enumerate_deterministic_processes(nodes, budget: int = 2**24) -> list[DeterministicProcess]:
    """All valid deterministic processes over the nodes, in a fixed order.

    The scan covers every function from out-values to in-values (count
    (prod in)^(prod out), guarded by ``budget``) and keeps those whose
    fixed-point count is one against every local tuple. Results are cached
    per node signature.
    """
    nodes = tuple(nodes)
    cards = tuple((n.in_card, n.out_card) for n in nodes)
    ids = _enumerate_cached(cards, budget)
    in_cards = [n.in_card for n in nodes]
    out_cards = [n.out_card for n in nodes]
    out_space = int(np.prod(out_cards))
    in_space = int(np.prod(in_cards))
    powers = np.array([in_space ** (out_space - 1 - c) for c in range(out_space)], dtype=np.int64)
    result = []
    for fid in ids:
        flat = (fid // powers) % in_space
        per_node = np.stack(np.unravel_index(flat, in_cards), axis=-1)
        func = per_node.reshape(tuple(out_cards) + (len(nodes),))
        result.append(DeterministicProcess(nodes, func))
    return result


@dataclass(frozen=True)
class PolytopeVerdict:
    inside: bool
    weights: np.ndarray | None
    residual: float


def polytope_membership(kp: ClassicalProcess, vertices=None, tol: float = 1e-8, budget: int = 2**24) -> PolytopeVerdict:
    """Is the table a convex combination of deterministic processes?

    Solves an exact feasibility LP; on failure, a second LP reports the
    minimal L1 distance to the hull. ``vertices`` defaults to the full
    enumeration for the node signature.
    """
    if vertices is None:
        vertices = enumerate_deterministic_processes(kp.nodes, budget)
    v = np.stack([vert.to_classical().table.reshape(-1) for vert in vertices], axis=1)
    target = kp.table.reshape(-1)
    nv = v.shape[1]

    a_eq = np.vstack([v, np.ones((1, nv))])
    b_eq = np.concatenate([target, [1.0]])
    res = linprog(np.zeros(nv), A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if res.status == 0:
        w = res.x
        resid = float(np.abs(v @ w - target).max())
        if resid <= max(tol, 1e-7):
            return PolytopeVerdict(True, w, resid)

    # L1 projection: min sum(t) s.t. -t <= Vq - target <= t, sum q = 1, q,t >= 0
    m = v.shape[0]
    c = np.concatenate([np.zeros(nv), np.ones(m)])
    a_ub = np.block([[v, -np.eye(m)], [-v, -np.eye(m)]])
    b_ub = np.concatenate([target, -target])
    a_eq2 = np.concatenate([np.ones(nv), np.zeros(m)])[None, :]
    res2 = linprog(c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq2, b_eq=[1.0], bounds=(0, None), method="highs")
    if res2.status != 0:
        raise RuntimeError(f"distance LP failed: {res2.message}")
    w = res2.x[:nv]
    return PolytopeVerdict(False, w, float(res2.fun))


@dataclass(frozen=True)
class ReversibleExtension:
    """Reversible (bijective) dilation of a mixture of deterministic processes.

    The extension adds a root node whose out-value encodes (branch i, shift z)
    as i * prod(in_cards) + z, and a leaf node whose in-value encodes
    (out-values x, branch i) as x * len(mixture) + i. The dynamics reads
    ins = z (+) f_i(outs) with per-node modular addition, which is a bijection
    from (outs, root) to (ins, leaf).
    """

    extension: DeterministicProcess
    lambda_distribution: np.ndarray
    base_nodes: tuple[ClassicalNode, ...]

    def marginal(self) -> ClassicalProcess:
        """Feed the stored distribution into the root and discard the leaf."""
        return _extension_marginal(self.extension, self.lambda_distribution, self.base_nodes)


def _extension_marginal(ext: DeterministicProcess, dist: np.ndarray, base_nodes) -> ClassicalProcess:
    root = ext.nodes[0]
    n = len(base_nodes)
    out_cards = [nd.out_card for nd in base_nodes]
    acc = np.zeros(_interleaved_shape(base_nodes))
    for lam in range(root.out_card):
        p = float(dist[lam])
        for outs in np.ndindex(*out_cards):
            full = ext.function[(lam,) + outs + (0,)]
            idx = []
            for i in range(n):
                idx.extend([int(full[1 + i]), int(outs[i])])
            acc[tuple(idx)] += p
    return ClassicalProcess(tuple(base_nodes), acc)


def reversible_extension(mixture) -> ReversibleExtension:
    """Dilate a convex mixture of deterministic processes to one reversible one.

    ``mixture`` is a sequence of (weight, DeterministicProcess) over common
    nodes. The root distribution puts weight w_i on (branch i, shift 0).
    """
    mixture = list(mixture)
    if not mixture:
        raise ValueError("mixture must be nonempty")
    base = mixture[0][1].nodes
    for _, dp in mixture:
        if dp.nodes != base:
            raise ValueError("all processes must share the same nodes")
    weights = np.array([w for w, _ in mixture], dtype=float)
    if weights.min() < 0 or abs(weights.sum() - 1.0) > 1e-12:
        raise ValueError("weights must be a probability distribution")

    n = len(base)
    m = len(mixture)
    in_cards = [nd.in_card for nd in base]
    out_cards = [nd.out_card for nd in base]
    in_space = int(np.prod(in_cards))
    out_space = int(np.prod(out_cards))

    root = ClassicalNode("root", 1, m * in_space)
    leaf = ClassicalNode("leaf", m * out_space, 1)
    nodes = (root,) + base + (leaf,)

    func = np.zeros((m * in_space,) + tuple(out_cards) + (1, n + 2), dtype=np.int64)
    for lam in range(m * in_space):
        i, z = divmod(lam, in_space)
        z_tuple = np.unravel_index(z, in_cards)
        f_i = mixture[i][1].function
        for outs in np.ndindex(*out_cards):
            ins = [(int(z_tuple[k]) + int(f_i[outs][k])) % in_cards[k] for k in range(n)]
            x_flat = int(np.ravel_multi_index(outs, out_cards))
            func[(lam,) + outs + (0,)] = [0] + ins + [x_flat * m + i]
    ext = DeterministicProcess(nodes, func)

    dist = np.zeros(m * in_space)
    for i in range(m):
        dist[i * in_space] = weights[i]
    return ReversibleExtension(ext, dist, base)


def find_process_outside_hull(nodes, budget: int = 2**24, seed: int = 0, attempts: int = 64):
    """A valid classical process outside the deterministic hull, found by LP.

    Maximizes linear functionals over the validity polytope; each optimizer is
    a vertex of that polytope, and the first one that fails hull membership is
    returned along with its L1 distance from the hull. Raises if every
    attempted vertex is deterministic-decomposable (possible when the two
    sets coincide).
    """
    nodes = tuple(nodes)
    shape = _interleaved_shape(nodes)
    size = int(np.prod(shape))
    tuples = _local_function_tuples(nodes, budget)
    grids = np.indices([n.in_card for n in nodes])
    rows = []
    for g in tuples:
        idx = []
        for i in range(len(nodes)):
            idx.append(grids[i])
            idx.append(g[i][grids[i]])
        flat = np.ravel_multi_index(tuple(a.reshape(-1) for a in idx), shape)
        row = np.zeros(size)
        np.add.at(row, flat, 1.0)
        rows.append(row)
    a_eq = np.stack(rows)
    b_eq = np.ones(len(rows))

    vertices = enumerate_deterministic_processes(nodes, budget)

    rng = np.random.default_rng(seed)
    n = len(nodes)
    directions = []
    # structured candidates: reward agreement with cyclic copies of out-values
    for shift in range(1, n):
        d = np.zeros(shape)
        for outs in np.ndindex(*[nd.out_card for nd in nodes]):
            ins = tuple(outs[(i + shift) % n] for i in range(n))
            if all(ins[i] < nodes[i].in_card for i in range(n)):
                idx = []
                for i in range(n):
                    idx.extend([ins[i], outs[i]])
                d[tuple(idx)] = 1.0
        directions.append(d.reshape(-1))
        directions.append(-d.reshape(-1))
    for _ in range(attempts):
        directions.append(rng.normal(size=size))

    for c in directions:
        res = linprog(-c, A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
        if res.status != 0:
            continue
        x = np.clip(res.x, 0.0, None)
        kp = ClassicalProcess(nodes, x.reshape(shape))
        verdict = polytope_membership(kp, vertices)
        if not verdict.inside and verdict.residual > 1e-7:
            return kp, float(verdict.residual)
    raise RuntimeError("no separating vertex found; hull may equal the validity polytope")


@dataclass(frozen=True)
class ClassicalCompatibilityVerdict:
    compatible: bool
    extension_valid: bool
    marginal_residual: float
    violations: tuple

    def __bool__(self):
        return self.compatible


def classical_compatibility_check(
    kp: ClassicalProcess,
    graph,
    extension: DeterministicProcess,
    lambda_distribution: np.ndarray,
    tol: float = 1e-12,
) -> ClassicalCompatibilityVerdict:
    """Confirm a causal structure for a classical process via a reversible extension.

    The extension must have nodes (root, original..., leaf) with the root
    out-space factoring per node as prod(in_cards). Checks: the extension is a
    valid deterministic process; the stored distribution reproduces kappa; and
    node i's in-value depends neither on the j-th root factor (j != i) nor on
    X_j^out for j outside its parent set (including j = i).
    """
    base = kp.nodes
    n = len(base)
    if len(extension.nodes) != n + 2:
        raise ValueError("extension must add exactly a root and a leaf node")
    root, leaf = extension.nodes[0], extension.nodes[-1]
    if tuple(extension.nodes[1:-1]) != tuple(base):
        raise ValueError("extension middle nodes must match the process nodes")
    in_cards = [nd.in_card for nd in base]
    if root.in_card != 1 or root.out_card != int(np.prod(in_cards)):
        raise ValueError("root out-space must factor as the product of in-cardinalities")
    if leaf.out_card != 1:
        raise ValueError("leaf must have a trivial out-space")

    valid, _ = validate_deterministic(extension)
    marg = _extension_marginal(extension, lambda_distribution, base)
    mres = float(np.abs(marg.table - kp.table).max())

    violations = []
    # function axes: (root out, out_1..out_n, leaf out=1, component)
    func = extension.function
    split = func.reshape(tuple(in_cards) + tuple(nd.out_card for nd in base) + (1, n + 2))
    for i, node in enumerate(base):
        comp = split[..., 1 + i]
        for j, other in enumerate(base):
            if j != i and in_cards[j] > 1:
                ref = np.take(comp, [0], axis=j)
                if not np.array_equal(comp, np.broadcast_to(ref, comp.shape)):
                    violations.append(f"root[{other.name}] -> {node.name}.in")
        parents = set(graph.parents(node.name))
        for j, other in enumerate(base):
            if other.out_card == 1 or other.name in parents:
                continue
            axis = n + j
            ref = np.take(comp, [0], axis=axis)
            if not np.array_equal(comp, np.broadcast_to(ref, comp.shape)):
                violations.append(f"{other.name}.out -> {node.name}.in")
    compatible = bool(valid and mres <= tol and not violations)
    return ClassicalCompatibilityVerdict(compatible, bool(valid), mres, tuple(violations))


def quantize(kp: ClassicalProcess) -> ProcessOperator:
    """Diagonal process operator with the table on the computational basis.

    The interleaved table axes line up with the canonical system order, so
    the diagonal is just the flattened table. The result is not certified;
    validate it like any other operator.
    """
    qnodes = [QuantumNode(n.name, n.in_card, n.out_card) for n in kp.nodes]
    systems = []
    for n in qnodes:
        systems.extend([n.in_system, n.out_dual])
    mat = np.diag(kp.table.reshape(-1)).astype(complex)
    return process_operator(qnodes, LabeledOperator(tuple(systems), mat))
