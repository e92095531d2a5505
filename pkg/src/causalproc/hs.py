"""Hermitian operator bases, type decompositions, and identity projections.

A basis here is {η^0 = (1/d)·1} ∪ {η^l traceless, orthonormal}; the dual basis
{1, η^1, ...} extracts expansion coefficients, so α_0 = Tr σ and the "type" of a
coefficient records which tensor factors carry a non-identity element.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .labeled import LabeledOperator, identity_operator, partial_trace, reorder, tensor

__all__ = [
    "HSBasis",
    "gell_mann_basis",
    "project_trivial",
    "hs_expand",
    "reconstruct",
    "type_norms",
]


@dataclass(frozen=True)
class HSBasis:
    """Hermitian operator basis for one d-dimensional factor.

    ``elements[0]`` is (1/d)·identity; elements 1..d²−1 are traceless and
    orthonormal in the trace inner product.
    """

    dim: int
    elements: np.ndarray  # shape (d*d, d, d)

    def check(self, tol: float = 1e-12) -> dict[str, float]:
        """Residuals of the defining properties (all should be ~0)."""
        d = self.dim
        e = self.elements
        res = {}
        res["element0"] = float(np.linalg.norm(e[0] - np.eye(d) / d))
        res["hermitian"] = float(max(np.linalg.norm(x - x.conj().T) for x in e))
        res["traceless"] = float(max((abs(np.trace(x)) for x in e[1:]), default=0.0))
        gram = np.einsum("aij,bji->ab", e[1:], e[1:]) if d > 1 else np.zeros((0, 0))
        res["orthonormal"] = float(
            np.linalg.norm(gram - np.eye(d * d - 1)) if d > 1 else 0.0
        )
        cross = np.einsum("ij,bji->b", e[0], e[1:]) if d > 1 else np.zeros(0)
        res["orthogonal0"] = float(np.linalg.norm(cross))
        return res

    def dual_elements(self) -> np.ndarray:
        """Basis dual to ``elements``: identity followed by the traceless part."""
        out = self.elements.copy()
        out[0] = np.eye(self.dim)
        return out


@lru_cache(maxsize=None)
def gell_mann_basis(d: int) -> HSBasis:
    """Generalized Gell-Mann basis: symmetric/antisymmetric pairs then diagonals."""
    elements = np.zeros((d * d, d, d), dtype=complex)
    elements[0] = np.eye(d) / d
    k = 1
    for i in range(d):
        for j in range(i + 1, d):
            m = np.zeros((d, d), dtype=complex)
            m[i, j] = m[j, i] = 1 / math.sqrt(2)
            elements[k] = m
            k += 1
            m = np.zeros((d, d), dtype=complex)
            m[i, j] = -1j / math.sqrt(2)
            m[j, i] = 1j / math.sqrt(2)
            elements[k] = m
            k += 1
    for l in range(1, d):
        m = np.zeros((d, d), dtype=complex)
        m[:l, :l] = np.eye(l)
        m[l, l] = -l
        elements[k] = m / math.sqrt(l * (l + 1))
        k += 1
    return HSBasis(d, elements)


def project_trivial(op: LabeledOperator, refs) -> LabeledOperator:
    """Orthogonal projection onto operators that act as identity on ``refs``.

    This is the conditional expectation  op ↦ (1/Πd) Tr_refs[op] ⊗ 1_refs,
    returned in the original system order.
    """
    refs = list(refs)
    if not refs:
        return op
    traced = partial_trace(op, refs)
    labels = [op.system(r) for r in refs]
    scale = math.prod(s.dim for s in labels)
    rest = tensor(traced, identity_operator(labels))
    out = reorder(rest, [s.key for s in op.systems])
    return LabeledOperator(out.systems, out.matrix / scale)


def _bases_for(op: LabeledOperator, bases) -> list[HSBasis]:
    if bases is None:
        return [gell_mann_basis(s.dim) for s in op.systems]
    bases = list(bases)
    if len(bases) != len(op.systems):
        raise ValueError("need one basis per system")
    for b, s in zip(bases, op.systems):
        if b.dim != s.dim:
            raise ValueError(f"basis dim {b.dim} != system dim {s.dim}")
    return bases


def _coefficient_tensor(op: LabeledOperator, bases) -> np.ndarray:
    """Full coefficient tensor α[M1..Mn] = Tr[(⊗ dual η^{M_i}) op]."""
    n = len(op.systems)
    if n == 0:
        return np.asarray(op.matrix[0, 0])
    operands = [op.as_tensor(), list(range(2 * n))]
    for i, b in enumerate(bases):
        operands.append(b.dual_elements())
        operands.append([2 * n + i, n + i, i])
    operands.append([2 * n + i for i in range(n)])
    return np.einsum(*operands, optimize="greedy")


def hs_expand(op: LabeledOperator, bases=None) -> dict[tuple, np.ndarray]:
    """Expansion coefficients grouped by type signature.

    The key is the tuple of (name, dual) keys of the systems that carry a
    non-identity basis element; the value holds the coefficients over those
    systems' traceless indices (axis length d²−1 each). The key () holds the
    scalar coefficient of the all-identity term.
    """
    bases = _bases_for(op, bases)
    alpha = _coefficient_tensor(op, bases)
    n = len(op.systems)
    table: dict[tuple, np.ndarray] = {}
    for mask in range(2**n):
        involved = [i for i in range(n) if mask >> i & 1]
        sl = tuple(
            slice(1, None) if i in involved else 0 for i in range(n)
        )
        block = alpha[sl]
        key = tuple(op.systems[i].key for i in involved)
        table[key] = np.asarray(block)
    return table


def reconstruct(systems, table: dict[tuple, np.ndarray], bases=None) -> LabeledOperator:
    """Rebuild the operator from an hs_expand coefficient table."""
    systems = tuple(systems)
    probe = identity_operator(systems)
    bases = _bases_for(probe, bases)
    n = len(systems)
    dims2 = [b.dim * b.dim for b in bases]
    alpha = np.zeros(dims2, dtype=complex)
    keys = [s.key for s in systems]
    for key, block in table.items():
        involved = [keys.index(k) for k in key]
        sl = tuple(
            slice(1, None) if i in involved else 0 for i in range(n)
        )
        alpha[sl] = block
    operands = [alpha, [2 * n + i for i in range(n)]]
    for i, b in enumerate(bases):
        operands.append(b.elements)
        operands.append([2 * n + i, i, n + i])
    operands.append(list(range(2 * n)))
    t = np.einsum(*operands, optimize="greedy")
    d = math.prod(s.dim for s in systems)
    return LabeledOperator(systems, t.reshape(d, d))


def type_norms(op: LabeledOperator, bases=None, min_norm: float = 0.0) -> dict[tuple, float]:
    """Frobenius norm of each type component of op, keyed like hs_expand.

    Squared norms sum to ‖op‖_F²: coefficient-block norms are weighted by the
    norm of the identity factors (1/√d per trivial system).
    """
    bases = _bases_for(op, bases)
    table = hs_expand(op, bases)
    out = {}
    for key, block in table.items():
        involved = set(key)
        weight = 1.0
        for s in op.systems:
            if s.key not in involved:
                weight /= math.sqrt(s.dim)
        norm = float(np.linalg.norm(block)) * weight
        if norm > min_norm:
            out[key] = norm
    return out
