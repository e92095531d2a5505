"""Labeled tensor-product operators and linear maps.

Composite indices are row-major with the first listed system as the most
significant digit, so ``np.kron(A, B)`` realizes the system order ``(A, B)``.
Dual spaces are bookkeeping only: a label carries a ``dual`` flag and the
matrix data is stored the same way for primal and dual factors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "SystemLabel",
    "LabeledOperator",
    "LinearMap",
    "dual",
    "identity_operator",
    "tensor",
    "reorder",
    "partial_trace",
    "transpose_systems",
    "fuse",
    "split_system",
    "embed",
    "product",
    "distance",
    "close",
    "identity_map",
    "tensor_maps",
    "compose_maps",
    "apply_stage",
    "cj_operator",
    "is_unitary",
]


@dataclass(frozen=True)
class SystemLabel:
    """One named tensor factor; ``dual=True`` marks the dual copy of the space."""

    name: str
    dim: int
    dual: bool = False

    @property
    def key(self) -> tuple[str, bool]:
        return (self.name, self.dual)

    def __repr__(self) -> str:
        star = "*" if self.dual else ""
        return f"{self.name}{star}({self.dim})"


def dual(label: SystemLabel) -> SystemLabel:
    """The dual partner of a label (same name and dimension, flipped flag)."""
    return SystemLabel(label.name, label.dim, not label.dual)


def _as_key(ref, systems: tuple[SystemLabel, ...]) -> tuple[str, bool]:
    """Resolve a system reference to a (name, dual) key.

    Accepts a SystemLabel, a (name, dual) pair, or a bare name when the name is
    unambiguous among ``systems``.
    """
    if isinstance(ref, SystemLabel):
        return ref.key
    if isinstance(ref, tuple) and len(ref) == 2 and isinstance(ref[0], str):
        return (ref[0], bool(ref[1]))
    if isinstance(ref, str):
        hits = [s.key for s in systems if s.name == ref]
        if len(hits) != 1:
            raise KeyError(f"system name {ref!r} is ambiguous or absent: {hits}")
        return hits[0]
    raise TypeError(f"cannot interpret system reference {ref!r}")


@dataclass(frozen=True)
class LabeledOperator:
    """A square operator on an ordered tensor product of labeled systems."""

    systems: tuple[SystemLabel, ...]
    matrix: np.ndarray

    def __post_init__(self):
        systems = tuple(self.systems)
        object.__setattr__(self, "systems", systems)
        keys = [s.key for s in systems]
        if len(set(keys)) != len(keys):
            raise ValueError(f"duplicate system labels: {keys}")
        d = math.prod(s.dim for s in systems)
        m = np.asarray(self.matrix)
        if m.shape != (d, d):
            raise ValueError(f"matrix shape {m.shape} does not match systems (dim {d})")
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def index(self, ref) -> int:
        key = _as_key(ref, self.systems)
        for i, s in enumerate(self.systems):
            if s.key == key:
                return i
        raise KeyError(f"no system {key} in {self.systems}")

    def system(self, ref) -> SystemLabel:
        return self.systems[self.index(ref)]

    def as_tensor(self) -> np.ndarray:
        """View with one row axis and one column axis per system (rows first)."""
        dims = tuple(s.dim for s in self.systems)
        return self.matrix.reshape(dims + dims)

    def _aligned(self, other: "LabeledOperator") -> np.ndarray:
        if not isinstance(other, LabeledOperator):
            raise TypeError("expected a LabeledOperator")
        if other.systems == self.systems:
            return other.matrix
        return reorder(other, [s.key for s in self.systems]).matrix

    def __add__(self, other: "LabeledOperator") -> "LabeledOperator":
        return LabeledOperator(self.systems, self.matrix + self._aligned(other))

    def __sub__(self, other: "LabeledOperator") -> "LabeledOperator":
        return LabeledOperator(self.systems, self.matrix - self._aligned(other))

    def __mul__(self, scalar) -> "LabeledOperator":
        return LabeledOperator(self.systems, self.matrix * scalar)

    __rmul__ = __mul__

    def __neg__(self) -> "LabeledOperator":
        return LabeledOperator(self.systems, -self.matrix)


def identity_operator(systems) -> LabeledOperator:
    systems = tuple(systems)
    d = math.prod(s.dim for s in systems)
    return LabeledOperator(systems, np.eye(d, dtype=complex))


def tensor(*ops: LabeledOperator) -> LabeledOperator:
    """Tensor product; system order is the concatenation of the factors'."""
    systems: tuple[SystemLabel, ...] = ()
    matrix = np.array([[1.0 + 0.0j]])
    for op in ops:
        systems = systems + op.systems
        matrix = np.kron(matrix, op.matrix)
    return LabeledOperator(systems, matrix)


def reorder(op: LabeledOperator, new_order) -> LabeledOperator:
    """Permute the system order; the matrix is permuted to match."""
    keys = [_as_key(r, op.systems) for r in new_order]
    if sorted(keys) != sorted(s.key for s in op.systems):
        raise ValueError(f"{keys} is not a permutation of {[s.key for s in op.systems]}")
    perm = [op.index(k) for k in keys]
    n = len(op.systems)
    t = op.as_tensor().transpose(perm + [n + p for p in perm])
    d = op.dim
    return LabeledOperator(tuple(op.systems[p] for p in perm), t.reshape(d, d))


def partial_trace(op: LabeledOperator, refs) -> LabeledOperator:
    """Trace out the listed systems; the rest keep their relative order."""
    keys = {_as_key(r, op.systems) for r in refs}
    n = len(op.systems)
    in_subs = list(range(n)) + [
        i if op.systems[i].key in keys else n + i for i in range(n)
    ]
    keep = [i for i in range(n) if op.systems[i].key not in keys]
    out_subs = keep + [n + i for i in keep]
    t = np.einsum(op.as_tensor(), in_subs, out_subs)
    systems = tuple(op.systems[i] for i in keep)
    d = math.prod(s.dim for s in systems)
    return LabeledOperator(systems, t.reshape(d, d))


def transpose_systems(op: LabeledOperator, refs) -> LabeledOperator:
    """Partial transpose over the listed systems; their dual flags flip."""
    keys = {_as_key(r, op.systems) for r in refs}
    n = len(op.systems)
    axes = []
    for i in range(n):
        axes.append(n + i if op.systems[i].key in keys else i)
    for i in range(n):
        axes.append(i if op.systems[i].key in keys else n + i)
    t = op.as_tensor().transpose(axes)
    systems = tuple(
        dual(s) if s.key in keys else s for s in op.systems
    )
    return LabeledOperator(systems, t.reshape(op.dim, op.dim))


def fuse(op: LabeledOperator, refs, name: str, dual_flag: bool | None = None) -> LabeledOperator:
    """Merge the listed systems (in the given order) into one composite system.

    The composite index of the new system is row-major over ``refs``.
    """
    keys = [_as_key(r, op.systems) for r in refs]
    rest = [s for s in op.systems if s.key not in keys]
    group = [op.system(k) for k in keys]
    if dual_flag is None:
        flags = {s.dual for s in group}
        if len(flags) != 1:
            raise ValueError("fusing systems with mixed dual flags needs dual_flag")
        dual_flag = flags.pop()
    moved = reorder(op, keys + [s.key for s in rest])
    fused = SystemLabel(name, math.prod(s.dim for s in group), dual_flag)
    return LabeledOperator((fused,) + tuple(rest), moved.matrix)


def split_system(op: LabeledOperator, ref, parts) -> LabeledOperator:
    """Replace one system by consecutive factors (row-major composite index).

    ``parts`` is a sequence of SystemLabels whose dimensions multiply to the
    dimension of the replaced system.
    """
    i = op.index(ref)
    parts = tuple(parts)
    if math.prod(p.dim for p in parts) != op.systems[i].dim:
        raise ValueError("part dimensions do not multiply to the split system's")
    systems = op.systems[:i] + parts + op.systems[i + 1 :]
    return LabeledOperator(systems, op.matrix)


def embed(op: LabeledOperator, systems) -> LabeledOperator:
    """Pad with identities so the result lives on ``systems`` (in that order)."""
    systems = tuple(systems)
    have = {s.key for s in op.systems}
    missing = [s for s in systems if s.key not in have]
    if len(have - {s.key for s in systems}) > 0:
        raise ValueError("target systems must contain the operator's systems")
    padded = tensor(op, identity_operator(missing)) if missing else op
    return reorder(padded, systems)


def product(ops, systems=None) -> LabeledOperator:
    """Matrix product of operators embedded in a common system set.

    ``systems`` fixes the output order; by default the union in first-seen order.
    A factor supported on a small subsystem is contracted on its own axes
    instead of being embedded and multiplied in the full space.
    """
    ops = list(ops)
    if systems is None:
        seen: dict[tuple[str, bool], SystemLabel] = {}
        for op in ops:
            for s in op.systems:
                seen.setdefault(s.key, s)
        systems = tuple(seen.values())
    systems = tuple(systems)
    m = None
    for op in ops:
        m = _right_multiply_embedded(m, op, systems)
    if m is None:
        return identity_operator(systems)
    return LabeledOperator(systems, m)


def _right_multiply_embedded(m, op: LabeledOperator, systems) -> np.ndarray:
    """``m @ embed(op, systems).matrix`` without forming the embedding.

    ``m`` may be None, standing for the identity on ``systems``.
    """
    have = {s.key for s in systems}
    if any(s.key not in have for s in op.systems):
        raise ValueError("target systems must contain the operator's systems")
    if m is None:
        return embed(op, systems).matrix
    keys = {s.key for s in op.systems}
    pos = [i for i, s in enumerate(systems) if s.key in keys]
    sub = reorder(op, [systems[i] for i in pos])
    d = m.shape[0]
    if sub.dim * sub.dim >= d:
        return m @ embed(op, systems).matrix
    dims = [s.dim for s in systems]
    n = len(systems)
    t = m.reshape([d] + dims)
    a = sub.as_tensor()
    k = len(pos)
    t_subs = [0] + [1 + i for i in range(n)]
    a_subs = [1 + p for p in pos] + [n + 1 + j for j in range(k)]
    out_subs = [0] + [n + 1 + pos.index(i) if i in pos else 1 + i for i in range(n)]
    out = np.einsum(t, t_subs, a, a_subs, out_subs)
    return np.ascontiguousarray(out.reshape(d, d))


def distance(a: LabeledOperator, b: LabeledOperator) -> float:
    """Frobenius distance normalized by max(1, operand norms).

    ``b`` is reordered to ``a``'s system order first; the system sets must match.
    """
    b = reorder(b, [s.key for s in a.systems])
    na = np.linalg.norm(a.matrix)
    nb = np.linalg.norm(b.matrix)
    return float(np.linalg.norm(a.matrix - b.matrix) / max(1.0, na, nb))


def close(a: LabeledOperator, b: LabeledOperator, tol: float = 1e-9) -> bool:
    return distance(a, b) <= tol


@dataclass(frozen=True)
class LinearMap:
    """Matrix of a linear map between labeled tensor-product spaces.

    Rows index the codomain, columns the domain, both row-major in the listed
    system order. Labels are primal; duals appear only in CJ operators.
    """

    matrix: np.ndarray
    domain: tuple[SystemLabel, ...]
    codomain: tuple[SystemLabel, ...]

    def __post_init__(self):
        object.__setattr__(self, "domain", tuple(self.domain))
        object.__setattr__(self, "codomain", tuple(self.codomain))
        m = np.asarray(self.matrix)
        shape = (
            math.prod(s.dim for s in self.codomain),
            math.prod(s.dim for s in self.domain),
        )
        if m.shape != shape:
            raise ValueError(f"matrix shape {m.shape}, expected {shape}")
        object.__setattr__(self, "matrix", m)


def identity_map(systems) -> LinearMap:
    systems = tuple(systems)
    d = math.prod(s.dim for s in systems)
    return LinearMap(np.eye(d, dtype=complex), systems, systems)


def tensor_maps(*maps: LinearMap) -> LinearMap:
    matrix = np.array([[1.0 + 0.0j]])
    dom: tuple[SystemLabel, ...] = ()
    cod: tuple[SystemLabel, ...] = ()
    for m in maps:
        matrix = np.kron(matrix, m.matrix)
        dom = dom + m.domain
        cod = cod + m.codomain
    return LinearMap(matrix, dom, cod)


def _perm_matrix(from_systems, to_systems) -> np.ndarray:
    """Permutation matrix taking the composite index of from-order to to-order."""
    from_keys = [s.key for s in from_systems]
    to_keys = [s.key for s in to_systems]
    if sorted(from_keys) != sorted(to_keys):
        raise ValueError(f"{from_keys} vs {to_keys}: not a permutation")
    dims = [s.dim for s in from_systems]
    d = math.prod(dims)
    perm = [from_keys.index(k) for k in to_keys]
    idx = np.arange(d).reshape(dims).transpose(perm).reshape(-1)
    p = np.zeros((d, d), dtype=complex)
    p[np.arange(d), idx] = 1.0
    return p


def permute_map(m: LinearMap, domain=None, codomain=None) -> LinearMap:
    """Same map with domain/codomain systems listed in a new order."""
    matrix = m.matrix
    dom, cod = m.domain, m.codomain
    if domain is not None:
        new_dom = tuple(m.domain[[s.key for s in m.domain].index(_as_key(r, m.domain))] for r in domain)
        matrix = matrix @ _perm_matrix(new_dom, m.domain)
        dom = new_dom
    if codomain is not None:
        new_cod = tuple(m.codomain[[s.key for s in m.codomain].index(_as_key(r, m.codomain))] for r in codomain)
        matrix = _perm_matrix(m.codomain, new_cod) @ matrix
        cod = new_cod
    return LinearMap(matrix, dom, cod)


def compose_maps(f: LinearMap, g: LinearMap) -> LinearMap:
    """f after g; g's codomain must be a permutation of f's domain."""
    g_aligned = permute_map(g, codomain=f.domain)
    return LinearMap(f.matrix @ g_aligned.matrix, g.domain, f.codomain)


def apply_stage(current: LinearMap, stage: LinearMap) -> LinearMap:
    """Compose ``stage`` onto the part of ``current``'s codomain it consumes.

    Systems of the codomain not in the stage's domain pass through unchanged and
    are listed after the stage's codomain in the result.
    """
    stage_keys = {s.key for s in stage.domain}
    rest = [s for s in current.codomain if s.key not in stage_keys]
    full_stage = tensor_maps(stage, identity_map(rest))
    return compose_maps(full_stage, current)


def is_unitary(m: LinearMap, tol: float = 1e-9) -> bool:
    a = m.matrix
    if a.shape[0] != a.shape[1]:
        return False
    return bool(np.linalg.norm(a.conj().T @ a - np.eye(a.shape[0])) <= tol * a.shape[0])


def cj_operator(m: LinearMap) -> LabeledOperator:
    """CJ operator of the channel X -> m X m†, on codomain ⊗ dual(domain).

    For an isometry V this is the rank-one operator |v><v| with
    v[(out, in)] = V[out, in]; general channels sum this over Kraus terms.
    """
    v = m.matrix.reshape(-1)
    systems = m.codomain + tuple(dual(s) for s in m.domain)
    return LabeledOperator(systems, np.outer(v, v.conj()))
