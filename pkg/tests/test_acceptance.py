"""End-to-end acceptance checks, one test per headline guarantee.

Each test is self-contained: it builds what it needs, checks the advertised
behavior, and (where a budget is part of the guarantee) asserts its own
runtime. Numbering only fixes the report order.
"""

from __future__ import annotations

import time

import numpy as np

from causalproc import (
    ClassicalNode,
    ClassicalProcess,
    DeterministicProcess,
    LabeledOperator,
    LinearMap,
    af_causal_graph,
    bipartite_separability,
    bw_decomposition,
    causal_structure_unitary,
    classical_markov_check,
    comb_check,
    comb_search,
    compatibility_check,
    compose_maps,
    complete_graph,
    conditional_process,
    decomposition_report,
    directed_graph,
    distance,
    enumerate_deterministic_processes,
    faithfulness_check,
    find_process_outside_hull,
    haar_unitary,
    identity_map,
    make_af,
    make_af_deterministic,
    make_bw_extension,
    make_classical_switch,
    make_methods_counterexample,
    make_mix_example,
    make_reduced_switch,
    make_switch,
    make_unitary_process,
    markov_check,
    measure_prepare_element,
    partial_trace,
    polytope_membership,
    process_operator,
    quantize,
    random_signalling_channel,
    random_state,
    random_unitary_chain,
    read_process_file,
    reduced_switch_causal_graph,
    reorder,
    reversible_extension,
    switch_causal_graph,
    switch_decomposition,
    tensor_maps,
    unitary_causal_separability,
    validate_classical,
    validate_process,
    verify_decomposition,
    write_process_file,
)
from causalproc.process import QuantumNode


def test_01_coherent_order_control_is_valid_cyclic_and_nonseparable():
    """Coherent control of the order of two qubit operations gives a valid
    rank-one process whose causal structure is the two-cycle graph, which is
    a comb for no node order, and which is not causally separable."""
    start = time.monotonic()
    sw = make_switch(2)
    sigma = sw.process
    assert sigma.op.dim == 256

    verdict = validate_process(sigma, tol=1e-9)
    assert verdict.valid
    assert abs(verdict.trace - 16.0) < 1e-9

    eigs = np.linalg.eigvalsh(sigma.op.matrix)
    assert int((eigs > 1e-9 * eigs.max()).sum()) == 1

    graph = causal_structure_unitary(sw, tol=1e-9)
    expected = switch_causal_graph()
    assert set(graph.vertices) == set(expected.vertices)
    assert graph.edges == expected.edges
    assert len(graph.edges) == 7

    assert comb_search(sigma, tol=1e-9) is None

    sep = unitary_causal_separability(sw, tol=1e-9)
    assert not sep.separable
    assert sep.cycle == ("A", "B")
    assert sep.order is None and sep.comb is None

    assert time.monotonic() - start < 10.0


def test_02_markov_factorization_is_exact_faithful_and_edge_minimal():
    """Both cyclic exemplars factor into commuting channels along their causal
    graphs, the three-bit factors match their closed forms entry for entry,
    the factorizations are faithful, and dropping any edge breaks them."""
    start = time.monotonic()

    sw = make_switch(2)
    g_switch = switch_causal_graph()
    mf_switch = markov_check(sw.process, g_switch, tol=1e-9)
    assert mf_switch.accepted
    assert sorted(mf_switch.factors) == ["A", "B", "F", "P"]
    assert max(mf_switch.commutator_residuals.values()) < 1e-9
    assert mf_switch.product_residual < 1e-9
    assert faithfulness_check(mf_switch).faithful

    af = make_af()
    triangle = af_causal_graph()
    mf_af = markov_check(af, triangle, tol=1e-9)
    assert mf_af.accepted
    assert max(mf_af.commutator_residuals.values()) < 1e-9
    assert mf_af.product_residual < 1e-9
    assert faithfulness_check(mf_af).faithful

    # each node's input is a fixed boolean function of the other two outputs
    closed_forms = {
        "A": ("B", "C", lambda b, c: (1 - b) & c),
        "B": ("A", "C", lambda a, c: (1 - c) & a),
        "C": ("A", "B", lambda a, b: (1 - a) & b),
    }
    for name, (p1, p2, fn) in closed_forms.items():
        assert triangle.parents(name) == (p1, p2)
        node = af.node(name)
        order = (node.in_system, af.node(p1).out_dual, af.node(p2).out_dual)
        matrix = reorder(mf_af.factors[name].op, order).matrix
        expected = np.zeros((8, 8), dtype=matrix.dtype)
        for i in range(2):
            for x in range(2):
                for y in range(2):
                    if i == fn(x, y):
                        idx = i * 4 + x * 2 + y
                        expected[idx, idx] = 1.0
        assert np.array_equal(matrix, expected)

    for graph, sigma in ((g_switch, sw.process), (triangle, af)):
        for edge in graph.edges:
            pruned = directed_graph(graph.vertices, [e for e in graph.edges if e != edge])
            assert not markov_check(sigma, pruned, tol=1e-9).accepted

    assert time.monotonic() - start < 20.0


def test_03_reversible_dilation_reproduces_the_cyclic_process():
    """The reversible three-bit dilation marginalizes exactly to the cyclic
    process, shows every required no-influence condition exactly, certifies
    compatibility with the triangle graph, and both block decompositions
    reconstruct their unitaries to floating-point accuracy."""
    start = time.monotonic()

    bw = make_bw_extension()
    af = make_af()
    triangle = af_causal_graph()

    prep = np.zeros((8, 8), dtype=complex)
    prep[0, 0] = 1.0
    element = measure_prepare_element(bw.process.node("P"), np.eye(1, dtype=complex), prep)
    cond = conditional_process(bw.process, "P", element)
    leaf = cond.node("F")
    marg = partial_trace(cond.op, [leaf.in_system.key, leaf.out_dual.key])
    sigma = process_operator([n for n in cond.nodes if n.name in "ABC"], marg)
    assert distance(sigma.op, af.op) == 0.0

    ground = np.array([[1, 0], [0, 0]], dtype=complex)
    verdict = compatibility_check(af, triangle, bw, [ground, ground, ground], tol=1e-9)
    assert verdict.compatible
    assert verdict.extension_valid
    assert verdict.marginal_residual == 0.0
    expected_conditions = {
        "A.out -/-> A.in",
        "B.out -/-> B.in",
        "C.out -/-> C.in",
        "P[A] -/-> B.in",
        "P[A] -/-> C.in",
        "P[B] -/-> A.in",
        "P[B] -/-> C.in",
        "P[C] -/-> A.in",
        "P[C] -/-> B.in",
    }
    assert set(verdict.influence_residuals) == expected_conditions
    assert all(v == 0.0 for v in verdict.influence_residuals.values())

    sw = make_switch(2)
    for unitary, parts in ((sw.unitary, switch_decomposition(2)), (bw.unitary, bw_decomposition())):
        assert verify_decomposition(unitary, parts)
        report = decomposition_report(unitary, parts)
        assert report.passed
        assert report.reconstruction_residual < 1e-12

    assert time.monotonic() - start < 30.0


def test_04_two_way_signalling_products_fail_exactly_one_type_term():
    """Pairing a channel from B to A with a channel from A to B never gives a
    valid process, and the violation is always the single basis sector
    supported on all four spaces; making either direction constant repairs it."""
    rng = np.random.default_rng(20260816)
    na = QuantumNode("A", 2, 2)
    nb = QuantumNode("B", 2, 2)

    for _ in range(100):
        b_to_a = random_signalling_channel(nb.out_system, na.in_system, nb.out_system, rng)
        a_to_b = random_signalling_channel(na.out_system, nb.in_system, na.out_system, rng)
        sigma = process_operator((na, nb), LabeledOperator(
            (na.in_system, nb.out_dual, nb.in_system, na.out_dual),
            np.kron(b_to_a.op.matrix, a_to_b.op.matrix),
        ))
        verdict = validate_process(sigma)
        assert not verdict.valid
        assert verdict.offending_types == ("A.in*A.out'*B.in*B.out'",)

        const_to_a = LabeledOperator(
            (na.in_system, nb.out_dual), np.kron(random_state(2, rng), np.eye(2))
        )
        const_to_b = LabeledOperator(
            (nb.in_system, na.out_dual), np.kron(random_state(2, rng), np.eye(2))
        )
        fixed_first = process_operator((na, nb), LabeledOperator(
            (na.in_system, nb.out_dual, nb.in_system, na.out_dual),
            np.kron(const_to_a.matrix, a_to_b.op.matrix),
        ))
        fixed_second = process_operator((na, nb), LabeledOperator(
            (na.in_system, nb.out_dual, nb.in_system, na.out_dual),
            np.kron(b_to_a.op.matrix, const_to_b.matrix),
        ))
        assert validate_process(fixed_first).valid
        assert validate_process(fixed_second).valid


def test_05_randomized_order_control_family_stays_causally_separable():
    """Dressing the order-control unitary with random local unitaries on the
    control preparation and the final wire, then conditioning on a random
    control state and discarding the leaf, always leaves a causally separable
    two-party process; the unperturbed block decomposition is one-way per block."""
    start = time.monotonic()
    rng = np.random.default_rng(20260816)

    sw = make_switch(2)
    u = sw.unitary
    p_out = next(s for s in u.domain if s.name == "P.out")
    f_in = next(s for s in u.codomain if s.name == "F.in")
    rest_domain = tuple(s for s in u.domain if s.name != "P.out")
    rest_codomain = tuple(s for s in u.codomain if s.name != "F.in")

    for _ in range(50):
        dress_p = tensor_maps(identity_map(rest_domain), LinearMap(haar_unitary(4, rng), (p_out,), (p_out,)))
        dress_f = tensor_maps(identity_map(rest_codomain), LinearMap(haar_unitary(4, rng), (f_in,), (f_in,)))
        dressed = compose_maps(dress_f, compose_maps(u, dress_p))
        up = make_unitary_process(sw.process.nodes, dressed)

        tau = random_state(4, rng)
        element = measure_prepare_element(up.process.node("P"), np.eye(1, dtype=complex), tau)
        cond = conditional_process(up.process, "P", element)
        leaf = cond.node("F")
        marg = partial_trace(cond.op, [leaf.in_system.key, leaf.out_dual.key])
        pair = process_operator([cond.node("A"), cond.node("B")], marg)

        verdict = bipartite_separability(pair, tol=1e-6, max_iter=5000)
        assert verdict.separable
        assert verdict.residual < 1e-6
        assert verdict.iterations <= 5000

    report = decomposition_report(sw.unitary, switch_decomposition(2))
    assert report.passed and report.blocks_one_way
    assert verify_decomposition(sw.unitary, switch_decomposition(2))

    assert time.monotonic() - start < 300.0


def test_06_chain_combs_are_acyclic_while_order_control_is_not():
    """Random unitary chains over two or three slots always have an acyclic
    causal structure and a comb order, while the two cyclic exemplars have
    neither."""
    rng = np.random.default_rng(20260816)
    for n_slots in (2, 3):
        for _ in range(50):
            up = random_unitary_chain(n_slots, rng)
            graph = causal_structure_unitary(up)
            assert not graph.is_cyclic
            order = comb_search(up.process)
            assert order is not None
            assert set(order) == {n.name for n in up.process.nodes}

    sw = make_switch(2)
    assert causal_structure_unitary(sw).is_cyclic
    assert comb_search(sw.process) is None

    bw = make_bw_extension()
    assert causal_structure_unitary(bw).is_cyclic
    assert comb_search(bw.process) is None


def test_07_stochastic_counterexample_admits_no_process_closure():
    """The stored pair of mutually conditioned tables forms no valid process
    for point, uniform, or generic distributions over the third node's input,
    and its first-slice two-node table fails the four-space sector test."""
    cx = make_methods_counterexample()
    distributions = (
        [1.0, 0.0],
        [0.0, 1.0],
        [0.5, 0.5],
        [0.3, 0.7],
        [0.9, 0.1],
    )
    for dist in distributions:
        combined = cx.combined(np.array(dist))
        assert not validate_classical(combined).valid

    table = np.zeros((2, 2, 2, 2))
    for ai in range(2):
        for ao in range(2):
            for bi in range(2):
                for bo in range(2):
                    table[ai, ao, bi, bo] = cx.p_a[ai, bo, 0] * cx.p_b[bi, ao, 0]
    pair = ClassicalProcess((ClassicalNode("A", 2, 2), ClassicalNode("B", 2, 2)), table)
    verdict = validate_process(quantize(pair))
    assert not verdict.valid
    assert "A.in*A.out'*B.in*B.out'" in verdict.offending_types


def test_08_deterministic_polytope_enumeration_and_membership():
    """Enumeration of two-bit deterministic processes matches a brute-force
    unique-fixed-point oracle; random mixtures are recognized as interior with
    exact weights and reversible dilations; a linear-program witness stays
    outside; and table-level and operator-level verdicts agree throughout."""
    bits = (ClassicalNode("A", 2, 2), ClassicalNode("B", 2, 2))

    local_maps = [(g0, g1) for g0 in range(2) for g1 in range(2)]
    oracle_ids = []
    for fid in range(256):
        assignments = [(fid // 4 ** (3 - pos)) % 4 for pos in range(4)]
        unique = True
        for ga in local_maps:
            for gb in local_maps:
                count = 0
                for a in range(2):
                    for b in range(2):
                        a_in, b_in = divmod(assignments[a * 2 + b], 2)
                        if ga[a_in] == a and gb[b_in] == b:
                            count += 1
                if count != 1:
                    unique = False
                    break
            if not unique:
                break
        if unique:
            oracle_ids.append(fid)

    library = enumerate_deterministic_processes(bits)
    library_ids = []
    for dp in library:
        fid = 0
        for a in range(2):
            for b in range(2):
                fid = fid * 4 + int(dp.function[a, b, 0]) * 2 + int(dp.function[a, b, 1])
        library_ids.append(fid)
    assert library_ids == oracle_ids

    rng = np.random.default_rng(20260816)
    for _ in range(50):
        weights = rng.dirichlet(np.ones(len(library)))
        table = sum(w * dp.to_classical().table for w, dp in zip(weights, library))
        mixture = ClassicalProcess(bits, table)
        verdict = polytope_membership(mixture)
        assert verdict.inside
        rebuilt = sum(w * dp.to_classical().table for w, dp in zip(verdict.weights, library))
        assert np.abs(rebuilt - table).max() < 1e-9

        pairs = [(float(w), dp) for w, dp in zip(weights, library)]
        extension = reversible_extension(pairs)
        oracle = np.zeros_like(table)
        for w, dp in pairs:
            oracle = oracle + w * dp.to_classical().table
        assert np.array_equal(extension.marginal().table, oracle)

    trio = (ClassicalNode("A", 2, 2), ClassicalNode("B", 2, 2), ClassicalNode("C", 2, 2))
    outside, witness_gap = find_process_outside_hull(trio)
    assert validate_classical(outside).valid
    assert witness_gap > 1e-7
    assert not polytope_membership(outside).inside

    # the two validation routes agree on every corpus member
    chain_fn = np.zeros((2, 2, 2), dtype=np.int64)
    for a in range(2):
        for b in range(2):
            chain_fn[a, b] = [0, a]
    cx = make_methods_counterexample()
    corpus = [
        make_af_deterministic().to_classical(),
        make_classical_switch(2).to_classical(),
        cx.combined(np.array([0.5, 0.5])),
        cx.combined(np.array([1.0, 0.0])),
        outside,
        ClassicalProcess(bits, sum(0.25 * dp.to_classical().table for dp in library[:4])),
    ] + [dp.to_classical() for dp in library]
    for kp in corpus:
        assert validate_classical(kp).valid == validate_process(quantize(kp)).valid

    chain = DeterministicProcess(bits, chain_fn).to_classical()
    triangle = af_causal_graph()
    paired = [
        (make_af_deterministic().to_classical(), triangle),
        (make_af_deterministic().to_classical(),
         directed_graph(triangle.vertices, [e for e in triangle.edges if e != ("B", "A")])),
        (make_classical_switch(2).to_classical(), switch_causal_graph()),
        (make_classical_switch(2).to_classical(),
         directed_graph(switch_causal_graph().vertices, [("P", "A"), ("P", "B"), ("P", "F")])),
        (chain, directed_graph(["A", "B"], [("A", "B")])),
        (chain, directed_graph(["A", "B"], [])),
        (cx.combined(np.array([0.5, 0.5])), complete_graph(["A", "B", "C"])),
    ]
    for kp, graph in paired:
        table_verdict = classical_markov_check(kp, graph).accepted
        operator_verdict = markov_check(quantize(kp), graph).accepted
        assert table_verdict == operator_verdict


def test_09_control_conditioning_selects_each_fixed_order():
    """The incoherent order-control process is Markov and faithful for its
    four-edge graph, and fixing the control bit turns it into a comb in the
    matching direction only."""
    red = make_reduced_switch(2)
    mf = markov_check(red, reduced_switch_causal_graph(), tol=1e-9)
    assert mf.accepted
    assert faithfulness_check(mf).faithful

    for control, order in ((0, ("A", "B")), (1, ("B", "A"))):
        prep = np.zeros((4, 4), dtype=complex)
        prep[control * 2, control * 2] = 1.0
        element = measure_prepare_element(red.node("P"), np.eye(1, dtype=complex), prep)
        cond = conditional_process(red, "P", element)
        verdict = comb_check(cond, order, tol=1e-9)
        assert verdict.accepted
        assert max(verdict.residuals) < 1e-9
        assert not comb_check(cond, order[::-1], tol=1e-9).accepted


def test_10_cli_round_trips_determinism_and_exit_codes(tmp_path, capsys):
    """Structure discovery emits byte-identical DOT across runs, every bundled
    exemplar survives an export/import/export cycle byte for byte, and the
    exit codes separate valid, invalid, and malformed inputs."""
    from causalproc.cli import EXEMPLAR_NAMES, main

    def run(*argv):
        code = main(list(argv))
        out = capsys.readouterr()
        return code, out.out

    for name in ("switch", "af"):
        source = tmp_path / f"{name}.json"
        assert run("exemplar", name, "--out", str(source))[0] == 0
        first = tmp_path / f"{name}-1.dot"
        second = tmp_path / f"{name}-2.dot"
        assert run("discover", str(source), "--dot", str(first))[0] == 0
        assert run("discover", str(source), "--dot", str(second))[0] == 0
        assert first.read_bytes() == second.read_bytes()

    for name in EXEMPLAR_NAMES:
        exported = tmp_path / f"{name}.json"
        assert run("exemplar", name, "--out", str(exported))[0] == 0
        loaded = read_process_file(exported)
        rewritten = tmp_path / f"{name}-2.json"
        write_process_file(rewritten, loaded.process, loaded.graph, loaded.metadata)
        assert exported.read_bytes() == rewritten.read_bytes()

    # the codec is exact: the reloaded operator matches the constructor bit for bit
    reloaded = read_process_file(tmp_path / "switch.json").process
    rebuilt = reorder(reloaded.op, make_switch(2).process.op.systems)
    assert np.array_equal(rebuilt.matrix, make_switch(2).process.op.matrix)

    valid_path = tmp_path / "switch.json"
    assert run("validate", str(valid_path))[0] == 0

    mix = make_mix_example()
    invalid = process_operator(mix.nodes, LabeledOperator(mix.op.systems, 2.0 * mix.op.matrix))
    invalid_path = tmp_path / "invalid.json"
    write_process_file(invalid_path, invalid)
    assert run("validate", str(invalid_path))[0] == 1

    malformed_path = tmp_path / "broken.json"
    malformed_path.write_text("{not json", encoding="utf-8")
    assert run("validate", str(malformed_path))[0] == 2
    assert run("validate", str(tmp_path / "absent.json"))[0] == 2
