from __future__ import annotations

import numpy as np

from causalproc import (
    LabeledOperator,
    SystemLabel,
    gell_mann_basis,
    hs_expand,
    identity_operator,
    project_trivial,
    reconstruct,
    tensor,
    type_norms,
)
from causalproc.rand import random_state


def test_basis_orthonormal_traceless():
    for d in (2, 3, 4):
        basis = gell_mann_basis(d)
        els = basis.elements
        assert els.shape == (d * d, d, d)
        assert np.abs(els[0] - np.eye(d) / d).max() < 1e-14
        for i in range(1, d * d):
            assert abs(np.trace(els[i])) < 1e-12
            assert np.abs(els[i] - els[i].conj().T).max() < 1e-12
            for j in range(1, d * d):
                g = np.trace(els[i].conj().T @ els[j])
                assert abs(g - (1.0 if i == j else 0.0)) < 1e-12


def test_expand_reconstruct_round_trip(rng):
    a, b = SystemLabel("a", 2), SystemLabel("b", 3)
    m = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
    x = LabeledOperator((a, b), m)
    table = hs_expand(x)
    y = reconstruct((a, b), table)
    assert np.abs(y.matrix - m).max() < 1e-12


def test_type_norms_sum_to_squared_frobenius(rng):
    a, b = SystemLabel("a", 2), SystemLabel("b", 2)
    m = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    m = m + m.conj().T
    x = LabeledOperator((a, b), m)
    norms = type_norms(x)
    total = sum(v * v for v in norms.values())
    assert abs(total - np.linalg.norm(m) ** 2) < 1e-10


def test_type_norms_of_identity():
    a, b = SystemLabel("a", 2), SystemLabel("b", 3)
    one = identity_operator([a, b])
    norms = type_norms(one, min_norm=1e-12)
    assert list(norms.keys()) == [()]


def test_project_trivial_idempotent(rng):
    a, b = SystemLabel("a", 2), SystemLabel("b", 2)
    m = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    x = LabeledOperator((a, b), m)
    p = project_trivial(x, [b])
    pp = project_trivial(p, [b])
    assert np.abs(p.matrix - pp.matrix).max() < 1e-12
    # projection is orthogonal: the residual has no overlap with the range
    r = x - p
    overlap = np.trace(r.matrix.conj().T @ p.matrix)
    assert abs(overlap) < 1e-10


def test_project_trivial_on_product_state(rng):
    a, b = SystemLabel("a", 2), SystemLabel("b", 3)
    ra, rb = random_state(2, rng), random_state(3, rng)
    x = tensor(LabeledOperator((a,), ra), LabeledOperator((b,), rb))
    p = project_trivial(x, [b])
    want = np.kron(ra, np.trace(rb) * np.eye(3) / 3)
    assert np.abs(p.matrix - want).max() < 1e-12
