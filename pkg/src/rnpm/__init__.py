"""Remote nondestructive parity measurement simulator.

Dispersively coupled qubit-resonator systems monitored by photodetectors:
deterministic master equations, photon-counting trajectory unravelings with
exact closed-form oracles, and the displacement/feedback parity protocol.
"""

from .errors import (
    ConfigError,
    ConsistencyError,
    CutoffError,
    DimensionError,
    IntegratorError,
    RnpmError,
)
from .hilbert import (
    HilbertSpace,
    MixedState,
    Operator,
    PureState,
    coherent_state,
    displacement,
    embed,
    fock_annihilation,
    partial_trace,
)
from .kernels import BACKEND_NAME
from .params import DetectionRecord, QubitAmplitudes, SystemParams
from .trajectory import RngStream, Trajectory, run_ensemble, run_mixed_trajectory, run_pure_trajectory

__version__ = "0.1.0"

__all__ = [
    "BACKEND_NAME",
    "ConfigError",
    "ConsistencyError",
    "CutoffError",
    "DetectionRecord",
    "DimensionError",
    "HilbertSpace",
    "IntegratorError",
    "MixedState",
    "Operator",
    "PureState",
    "QubitAmplitudes",
    "RngStream",
    "RnpmError",
    "SystemParams",
    "Trajectory",
    "coherent_state",
    "displacement",
    "embed",
    "fock_annihilation",
    "partial_trace",
    "run_ensemble",
    "run_mixed_trajectory",
    "run_pure_trajectory",
]
