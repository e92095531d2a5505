from __future__ import annotations

import numpy as np
import pytest

from causalproc import (
    LabeledOperator,
    LinearMap,
    QuantumNode,
    SystemLabel,
    channel_from_unitary,
    comb_from_circuit,
    conditional_process,
    identity_operator,
    joint_probabilities,
    measure_prepare_element,
    no_signalling,
    process_operator,
    readout_instrument,
    preparation_instrument,
    signalling_residual,
    tensor,
    validate_process,
)
from causalproc.rand import haar_unitary, random_state


def product_process(rho_a, rho_b):
    na, nb = QuantumNode("A", 2, 2), QuantumNode("B", 2, 2)
    op = tensor(
        LabeledOperator((na.in_system,), rho_a),
        identity_operator([na.out_dual]),
        LabeledOperator((nb.in_system,), rho_b),
        identity_operator([nb.out_dual]),
    )
    return process_operator([na, nb], op)


def test_validate_product_process(rng):
    sigma = product_process(random_state(2, rng), random_state(2, rng))
    v = validate_process(sigma)
    assert v.valid
    assert v.psd_ok and v.trace_ok and v.type_ok
    assert abs(v.trace - 4) < 1e-12
    assert v.expected_trace == 4
    assert v.offending_types == ()


def test_validate_rejects_wrong_trace(rng):
    sigma = product_process(random_state(2, rng), random_state(2, rng))
    bad = process_operator(sigma.nodes, LabeledOperator(sigma.op.systems, 2 * sigma.op.matrix))
    v = validate_process(bad)
    assert not v.valid and not v.trace_ok
    assert v.psd_ok


def test_validate_rejects_non_psd():
    na = QuantumNode("A", 2, 2)
    z = np.diag([1.1, -0.1]).astype(complex)
    op = tensor(LabeledOperator((na.in_system,), z), identity_operator([na.out_dual]))
    v = validate_process(process_operator([na], op))
    assert not v.valid and not v.psd_ok
    assert v.min_eigenvalue < -0.05
    assert v.trace_ok


def test_validate_rejects_forbidden_type():
    na = QuantumNode("A", 2, 2)
    x = np.array([[0, 1], [1, 0]], dtype=complex)
    op = tensor(LabeledOperator((na.in_system,), np.eye(2) / 2),
                identity_operator([na.out_dual]))
    bump = tensor(LabeledOperator((na.in_system,), 0.1 * x),
                  LabeledOperator((na.out_dual,), x.astype(complex)))
    sig = process_operator([na], op + bump)
    v = validate_process(sig)
    assert not v.valid and not v.type_ok
    assert v.forbidden_norm > 0.1
    assert "A.in*A.out'" in v.offending_types
    assert v.trace_ok


def test_hermitian_residual_reported(rng):
    na = QuantumNode("A", 2, 2)
    m = np.eye(4, dtype=complex)
    m[0, 1] = 0.3j
    sig = process_operator([na], LabeledOperator((na.in_system, na.out_dual), m))
    v = validate_process(sig)
    assert not v.valid
    assert v.hermitian_residual > 0.1


def test_signalling_residual_of_product(rng):
    sigma = product_process(random_state(2, rng), random_state(2, rng))
    assert signalling_residual(sigma, ["A"]) < 1e-12
    assert signalling_residual(sigma, ["B"]) < 1e-12
    assert no_signalling(sigma, ["A"])


def test_chain_comb_signals_one_way(rng):
    # state -> A -> identity wire -> B: A signals to B, B does not signal back
    w0, u = SystemLabel("w0", 2), haar_unitary(2, rng)
    init = LabeledOperator((w0,), random_state(2, rng))
    ch = channel_from_unitary(LinearMap(u, (SystemLabel("wA", 2),), (SystemLabel("w1", 2),)))
    na, nb = QuantumNode("A", 2, 2), QuantumNode("B", 2, 2)
    sigma = comb_from_circuit(init, [ch], [(na, "w0", "wA"), (nb, "w1", "wB")])
    assert validate_process(sigma).valid
    assert signalling_residual(sigma, ["B"]) < 1e-12
    assert signalling_residual(sigma, ["A"]) > 0.1
    assert not no_signalling(sigma, ["A"])


def test_comb_from_circuit_single_slot(rng):
    rho = random_state(2, rng)
    w0 = SystemLabel("w0", 2)
    na = QuantumNode("A", 2, 2)
    sigma = comb_from_circuit(LabeledOperator((w0,), rho), [], [(na, "w0", "wA")])
    want = tensor(LabeledOperator((na.in_system,), rho), identity_operator([na.out_dual]))
    assert np.abs(sigma.op.matrix - want.matrix).max() < 1e-12


def test_joint_probabilities_trace_rule(rng):
    rho_a, rho_b = random_state(2, rng), random_state(2, rng)
    sigma = product_process(rho_a, rho_b)
    insts = [readout_instrument(sigma.node("A")), readout_instrument(sigma.node("B"))]
    p = joint_probabilities(sigma, insts)
    assert p.shape == (2, 2)
    assert abs(p.sum() - 1) < 1e-10
    want = np.outer(np.diag(rho_a).real, np.diag(rho_b).real)
    assert np.abs(p - want).max() < 1e-10


def test_joint_probabilities_chain_copies_output(rng):
    # B reads exactly what A prepared through the identity wire
    w0 = SystemLabel("w0", 2)
    init = LabeledOperator((w0,), np.eye(2, dtype=complex) / 2)
    ch = channel_from_unitary(
        LinearMap(np.eye(2, dtype=complex), (SystemLabel("wA", 2),), (SystemLabel("w1", 2),))
    )
    na, nb = QuantumNode("A", 2, 2), QuantumNode("B", 2, 2)
    sigma = comb_from_circuit(init, [ch], [(na, "w0", "wA"), (nb, "w1", "wB")])
    zero = np.array([[1, 0], [0, 0]], dtype=complex)
    one = np.array([[0, 0], [0, 1]], dtype=complex)
    p0 = joint_probabilities(
        sigma, [preparation_instrument(sigma.node("A"), [zero]), readout_instrument(sigma.node("B"))]
    )
    assert np.abs(p0 - np.array([[1.0, 0.0]])).max() < 1e-10
    p1 = joint_probabilities(
        sigma, [preparation_instrument(sigma.node("A"), [one]), readout_instrument(sigma.node("B"))]
    )
    assert np.abs(p1 - np.array([[0.0, 1.0]])).max() < 1e-10


def test_conditional_process_on_product(rng):
    rho_a, rho_b = random_state(2, rng), random_state(2, rng)
    sigma = product_process(rho_a, rho_b)
    el = measure_prepare_element(sigma.node("B"), np.eye(2, dtype=complex), random_state(2, rng))
    cond = conditional_process(sigma, "B", el)
    assert [n.name for n in cond.nodes] == ["A"]
    want = tensor(
        LabeledOperator((sigma.node("A").in_system,), rho_a),
        identity_operator([sigma.node("A").out_dual]),
    )
    assert np.abs(cond.op.matrix - want.matrix).max() < 1e-10


def test_process_operator_rejects_extra_systems(rng):
    na = QuantumNode("A", 2, 2)
    extra = SystemLabel("junk", 2)
    op = tensor(
        LabeledOperator((na.in_system,), random_state(2, rng)),
        identity_operator([na.out_dual, extra]),
    )
    with pytest.raises(ValueError):
        process_operator([na], op)
