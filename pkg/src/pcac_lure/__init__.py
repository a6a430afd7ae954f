"""Predictive cost adaptive control of discrete-time Lur'e systems with
instantaneous circle and Tsypkin absolute-stability certificates."""

from .bocf import BocfModel, assemble_model, assemble_state, markov_parameters
from .bpre import BpreConfig, BpreResult, bpre_gain, oracle_lqr_gain
from .certify import CircleReport, TsypkinReport, certificate_trace, circle_certificate, scan_N, tsypkin_certificate
from .lure import (
    DeadZone,
    LinearGain,
    LurePlant,
    Saturation,
    SectorBound,
    Tanh,
    simulate,
    step_plant,
    verify_disb,
    verify_sector,
)
from .pcac import (
    ControllerRealization,
    PcacConfig,
    PcacState,
    closed_loop_realization,
    controller_realization,
    pcac_step,
)
from .rlsvrf import RlsConfig, RlsState, batch_oracle, regressor, rls_update, vrf_beta
from .scenario import ScenarioConfig, gen_perturbation, load_config, roa_sweep, run_scenario
from .sslin import (
    FrequencyGrid,
    StateSpace,
    freq_response,
    hermitian_min_eig,
    observability_rank,
    spectral_radius,
)

__version__ = "0.1.0"
