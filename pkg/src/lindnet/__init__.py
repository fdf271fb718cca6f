"""Lindblad dynamics of small open quantum networks.

Tensor-product bases of qubits and finite spins, network models with incoherent
transfer/pump/loss channels, a vectorized-Liouvillian propagator with an exact
expm cross-check, closed-form solutions for the exactly solvable networks, and
detectors for the transport effects those networks exhibit (congestion valley,
filling staircase, asymptotic unitarity).
"""

from lindnet.hilbert import (
    DensityMatrix,
    ProductBasis,
    PureState,
    SiteDescriptor,
    basis_state,
    build_basis,
    dicke_state,
    embed_site_operator,
    reverse_occupation_order,
)
from lindnet.model import (
    Dephasing,
    Dissipation,
    Extraction,
    Injection,
    NetworkSpec,
    PresetParams,
    PresetRun,
    Transfer,
    build_hamiltonian,
    build_jump_operators,
    cosine_noise,
    preset,
    preset_names,
    uniform_noise,
)
from lindnet.dynamics import (
    InvariantViolation,
    LindbladGenerator,
    PropagationConfig,
    SteadyStateResult,
    Trajectory,
    build_superoperator,
    lindblad_apply,
    propagate,
    propagate_expm,
    steady_states,
)
from lindnet.observables import (
    EffectReport,
    FrequencyEstimate,
    detect_asymptotic_unitarity,
    detect_congestion_valley,
    dominant_frequency,
    eigenbasis_element,
    population,
    purity_and_rate,
    staircase_steps,
    unitarity_distance,
)

__version__ = "0.1.0"
