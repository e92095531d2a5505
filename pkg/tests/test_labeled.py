from __future__ import annotations

import numpy as np
import pytest

from causalproc import (
    LabeledOperator,
    LinearMap,
    SystemLabel,
    cj_operator,
    close,
    compose_maps,
    distance,
    dual,
    embed,
    fuse,
    identity_map,
    identity_operator,
    is_unitary,
    partial_trace,
    permute_map,
    product,
    reorder,
    split_system,
    tensor,
    tensor_maps,
    transpose_systems,
)
from causalproc.rand import haar_unitary, random_state


def test_system_label_dual_involution():
    a = SystemLabel("A.in", 3)
    assert dual(a).dual and dual(a).name == "A.in" and dual(a).dim == 3
    assert dual(dual(a)) == a
    assert a.key == ("A.in", False)
    assert dual(a).key == ("A.in", True)


def test_reorder_round_trip(rng):
    a, b, c = SystemLabel("a", 2), SystemLabel("b", 3), SystemLabel("c", 2)
    m = rng.normal(size=(12, 12)) + 1j * rng.normal(size=(12, 12))
    x = LabeledOperator((a, b, c), m)
    y = reorder(reorder(x, [c, a, b]), [a, b, c])
    assert y.systems == (a, b, c)
    assert np.abs(y.matrix - m).max() < 1e-14


def test_reorder_matches_kron_swap(rng):
    a, b = SystemLabel("a", 2), SystemLabel("b", 3)
    ma = rng.normal(size=(2, 2))
    mb = rng.normal(size=(3, 3))
    x = tensor(LabeledOperator((a,), ma), LabeledOperator((b,), mb))
    assert np.abs(x.matrix - np.kron(ma, mb)).max() < 1e-14
    y = reorder(x, [b, a])
    assert np.abs(y.matrix - np.kron(mb, ma)).max() < 1e-14


def test_addition_aligns_system_order(rng):
    a, b = SystemLabel("a", 2), SystemLabel("b", 2)
    m = rng.normal(size=(4, 4))
    x = LabeledOperator((a, b), m)
    y = reorder(x, [b, a])
    z = x + y
    assert np.abs(z.matrix - 2 * m).max() < 1e-14
    assert distance(x, y) < 1e-14


def test_partial_trace_of_product_state(rng):
    a, b = SystemLabel("a", 2), SystemLabel("b", 3)
    ra, rb = random_state(2, rng), random_state(3, rng)
    x = tensor(LabeledOperator((a,), ra), LabeledOperator((b,), rb))
    y = partial_trace(x, [b])
    assert y.systems == (a,)
    assert np.abs(y.matrix - ra).max() < 1e-14
    full = partial_trace(x, [a, b])
    assert abs(full.matrix[0, 0] - 1) < 1e-12


def test_embed_pads_with_identity(rng):
    a, b = SystemLabel("a", 2), SystemLabel("b", 3)
    ra = random_state(2, rng)
    x = LabeledOperator((a,), ra)
    y = embed(x, [a, b])
    assert np.abs(y.matrix - np.kron(ra, np.eye(3))).max() < 1e-14


def test_fuse_and_split_round_trip(rng):
    a, b = SystemLabel("a", 2), SystemLabel("b", 3)
    m = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
    x = LabeledOperator((a, b), m)
    f = fuse(x, [a, b], "ab")
    assert f.systems[0].dim == 6
    assert np.abs(f.matrix - m).max() < 1e-14
    back = split_system(f, "ab", [a, b])
    assert back.systems == (a, b)
    assert np.abs(back.matrix - m).max() < 1e-14


def test_product_embeds_factors(rng):
    a, b = SystemLabel("a", 2), SystemLabel("b", 2)
    ma = rng.normal(size=(2, 2))
    mb = rng.normal(size=(2, 2))
    x = LabeledOperator((a,), ma)
    y = LabeledOperator((b,), mb)
    z = product([x, y])
    assert np.abs(z.matrix - np.kron(ma, mb)).max() < 1e-14
    # same-space factors multiply as matrices
    w = product([LabeledOperator((a,), ma), LabeledOperator((a,), mb)])
    assert np.abs(w.matrix - ma @ mb).max() < 1e-14


def test_transpose_systems_is_involutive(rng):
    a, b = SystemLabel("a", 2), SystemLabel("b", 3)
    m = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
    x = LabeledOperator((a, b), m)
    t = transpose_systems(x, [b])
    assert t.systems[1].dual
    tt = transpose_systems(t, [dual(b)])
    assert np.abs(tt.matrix - m).max() < 1e-14
    # full transpose equals the matrix transpose
    full = transpose_systems(x, [a, b])
    assert np.abs(full.matrix - m.T).max() < 1e-14


def test_identity_operator_trace():
    a, b = SystemLabel("a", 2), SystemLabel("b", 3)
    one = identity_operator([a, b])
    assert abs(np.trace(one.matrix) - 6) < 1e-12


def test_compose_maps_matches_matrix_product(rng):
    a, b, c = SystemLabel("a", 2), SystemLabel("b", 2), SystemLabel("c", 2)
    u = haar_unitary(2, rng)
    v = haar_unitary(2, rng)
    f = LinearMap(u, (a,), (b,))
    g = LinearMap(v, (b,), (c,))
    h = compose_maps(g, f)
    assert h.domain == (a,) and h.codomain == (c,)
    assert np.abs(h.matrix - v @ u).max() < 1e-14


def test_compose_maps_aligns_permuted_codomain(rng):
    a, b, c, d = (SystemLabel(s, 2) for s in "abcd")
    u = haar_unitary(4, rng)
    f = LinearMap(u, (a, b), (c, d))
    swap = np.zeros((4, 4))
    for i in range(2):
        for j in range(2):
            swap[j * 2 + i, i * 2 + j] = 1.0
    g = LinearMap(swap.astype(complex), (d, c), (a, b))
    h = compose_maps(g, f)
    # g expects (d, c); f produces (c, d); composition must insert the permutation
    direct = swap @ np.kron(np.eye(2), np.eye(2))
    ref = compose_maps(permute_map(g, domain=(c, d)), f)
    assert np.abs(h.matrix - ref.matrix).max() < 1e-14
    assert is_unitary(h)


def test_tensor_maps_kron(rng):
    a, b, c, d = (SystemLabel(s, 2) for s in "abcd")
    u = haar_unitary(2, rng)
    v = haar_unitary(2, rng)
    t = tensor_maps(LinearMap(u, (a,), (c,)), LinearMap(v, (b,), (d,)))
    assert t.domain == (a, b) and t.codomain == (c, d)
    assert np.abs(t.matrix - np.kron(u, v)).max() < 1e-14
    ident = identity_map([a, b])
    assert np.abs(ident.matrix - np.eye(4)).max() < 1e-14


def test_is_unitary(rng):
    a, b = SystemLabel("a", 3), SystemLabel("b", 3)
    u = haar_unitary(3, rng)
    assert is_unitary(LinearMap(u, (a,), (b,)))
    assert not is_unitary(LinearMap(u + 0.01, (a,), (b,)))


def test_cj_operator_of_unitary(rng):
    a, b = SystemLabel("A.out", 2), SystemLabel("B.in", 2)
    u = haar_unitary(2, rng)
    cj = cj_operator(LinearMap(u, (a,), (b,)))
    assert cj.systems == (b, dual(a))
    # rank one, PSD, trace equals the input dimension
    evals = np.linalg.eigvalsh(cj.matrix)
    assert (evals > 1e-9).sum() == 1
    assert abs(np.trace(cj.matrix) - 2) < 1e-12
    # identity map gives the unnormalized maximally entangled state
    cj_id = cj_operator(LinearMap(np.eye(2, dtype=complex), (a,), (b,)))
    phi = np.zeros((4, 4))
    for i in range(2):
        for j in range(2):
            phi[i * 2 + i, j * 2 + j] = 1.0
    assert np.abs(cj_id.matrix - phi).max() < 1e-14


def test_labeled_operator_rejects_mismatched_shape():
    a = SystemLabel("a", 2)
    with pytest.raises(ValueError):
        LabeledOperator((a,), np.zeros((3, 3)))
