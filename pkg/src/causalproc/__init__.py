"""Process operators with cyclic causal structure: construction, validation,
Markov factorization and discovery, comb and separability analysis, classical
(deterministic and stochastic) processes, and JSON/CLI plumbing.
"""

from .labeled import (
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
from .hs import HSBasis, gell_mann_basis, hs_expand, project_trivial, reconstruct, type_norms
from .channels import (
    ChannelOperator,
    apply_channel,
    channel_from_unitary,
    channel_influence_residual,
    channel_no_influence,
    cj_from_kraus,
    input_signals,
)
from .rand import (
    haar_unitary,
    random_cptp,
    random_instrument_kraus,
    random_pure_state,
    random_signalling_channel,
    random_state,
)
from .process import (
    Instrument,
    InstrumentElement,
    ProcessOperator,
    QuantumNode,
    ValidationVerdict,
    comb_from_circuit,
    conditional_process,
    element_from_kraus,
    extend_nodes,
    instrument_from_kraus,
    joint_probabilities,
    measure_prepare_element,
    no_signalling,
    preparation_instrument,
    process_operator,
    random_chain_process,
    readout_instrument,
    signalling_residual,
    validate_process,
)
from .graphs import (
    CompatibilityVerdict,
    DirectedGraph,
    FaithfulnessReport,
    MarkovFactorization,
    UnitaryProcess,
    causal_structure_unitary,
    compatibility_check,
    complete_graph,
    directed_graph,
    discover,
    faithfulness_check,
    make_unitary_process,
    markov_check,
)
from .combs import (
    CombVerdict,
    SeparabilityVerdict,
    UnitarySeparabilityVerdict,
    bipartite_separability,
    comb_check,
    comb_search,
    is_isometric,
    switch_type_decomposition_check,
    unitary_causal_separability,
)
from .classical import (
    ClassicalCompatibilityVerdict,
    ClassicalMarkov,
    ClassicalNode,
    ClassicalProcess,
    ClassicalValidationVerdict,
    DeterministicProcess,
    PolytopeVerdict,
    ReversibleExtension,
    causal_structure_deterministic,
    classical_compatibility_check,
    classical_joint_probabilities,
    classical_markov_check,
    enumerate_deterministic_processes,
    find_process_outside_hull,
    polytope_membership,
    quantize,
    reversible_extension,
    validate_classical,
    validate_deterministic,
)
from .exemplars import (
    BWParts,
    DecompositionReport,
    MethodsCounterexample,
    SwitchParts,
    af_causal_graph,
    bw_decomposition,
    decomposition_report,
    make_af,
    make_af_deterministic,
    make_bw_extension,
    make_classical_switch,
    make_methods_counterexample,
    make_mix_components,
    make_mix_example,
    make_reduced_switch,
    make_switch,
    random_unitary_chain,
    reduced_switch_causal_graph,
    switch_causal_graph,
    switch_decomposition,
    verify_decomposition,
)
from .fileio import (
    FORMAT_VERSION,
    LoadedProcessFile,
    ProcessFileError,
    dict_to_process,
    process_to_dict,
    read_process_file,
    write_process_file,
)

__version__ = "0.1.0"
