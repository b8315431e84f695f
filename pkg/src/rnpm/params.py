"""Physical parameters, qubit amplitudes, and photodetection records."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError
from .hilbert import COHERENT_TAIL_TOL, required_cutoff

CHANNEL_SINGLE = "single"
CHANNEL_PLUS = "plus"
CHANNEL_MINUS = "minus"

DRIVE_DISPLACEMENT = "displacement"
DRIVE_GAUSSIAN = "gaussian"


@dataclass(frozen=True)
class SystemParams:
    """Dispersive qubit-resonator constants (hbar = 1, angular rates).

    `alpha` is the coherent amplitude each resonator is driven to at t = 0.
    `fock_cutoff` = None sizes the truncation automatically from the largest
    reachable coherent amplitude (sqrt(2)*alpha for the two-resonator setup,
    whose sum mode starts in |sqrt(2) alpha>).
    """

    chi: float = 1.0
    kappa: float = 1.0
    alpha: complex = 1.0
    eta_plus: float = 1.0
    eta_minus: float = 1.0
    gamma: float = 0.0
    fock_cutoff: int | None = None
    drive_model: str = DRIVE_DISPLACEMENT
    drive_width: float | None = None
    truncation_tol: float = COHERENT_TAIL_TOL

    def __post_init__(self):
        errs = self.validation_errors()
        if errs:
            raise ConfigError("; ".join(errs))

    def validation_errors(self) -> list[str]:
        errs = []
        if not self.chi > 0:
            errs.append(f"chi must be > 0, got {self.chi}")
        if not self.kappa > 0:
            errs.append(f"kappa must be > 0, got {self.kappa}")
        for name, eta in (("eta_plus", self.eta_plus), ("eta_minus", self.eta_minus)):
            if not 0.0 <= eta <= 1.0:
                errs.append(f"{name} must lie in [0, 1], got {eta}")
        if self.gamma < 0:
            errs.append(f"gamma must be >= 0, got {self.gamma}")
        if self.fock_cutoff is not None and self.fock_cutoff < 2:
            errs.append(f"fock_cutoff must be >= 2, got {self.fock_cutoff}")
        if self.drive_model not in (DRIVE_DISPLACEMENT, DRIVE_GAUSSIAN):
            errs.append(f"unknown drive model {self.drive_model!r}")
        if self.drive_model == DRIVE_GAUSSIAN:
            limit = 0.02 * min(1.0 / self.kappa, 1.0 / self.chi)
            if self.drive_width is None or not 0 < self.drive_width <= limit:
                errs.append(
                    f"gaussian drive needs 0 < drive_width <= {limit:.3g} "
                    f"(kappa, chi << 1/T_d), got {self.drive_width}"
                )
        if not 0 < self.truncation_tol < 1:
            errs.append(f"truncation_tol must lie in (0, 1), got {self.truncation_tol}")
        return errs

    def cutoff_for(self, n_resonators: int) -> int:
        """Fock levels per mode; auto-sized to the sum-mode amplitude sqrt(n)*alpha."""
        if self.fock_cutoff is not None:
            return self.fock_cutoff
        reach_sq = n_resonators * abs(self.alpha) ** 2
        return max(required_cutoff(reach_sq, self.truncation_tol), 4)

    def with_(self, **kwargs) -> "SystemParams":
        return replace(self, **kwargs)


@dataclass(frozen=True)
class QubitAmplitudes:
    """Normalized computational-basis amplitudes for one or two qubits.

    Two-qubit ordering is (gg, ge, eg, ee); single-qubit is (g, e).
    """

    vec: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vec, dtype=np.complex128).reshape(-1)
        if v.size not in (2, 4):
            raise ConfigError(f"expected 2 or 4 amplitudes, got {v.size}")
        if abs(np.vdot(v, v).real - 1.0) >= 1e-12:
            raise ConfigError("qubit amplitudes must be normalized within 1e-12")
        v.setflags(write=False)
        object.__setattr__(self, "vec", v)

    @classmethod
    def single(cls, q_g: complex, q_e: complex) -> "QubitAmplitudes":
        v = np.array([q_g, q_e], dtype=np.complex128)
        return cls(v / np.linalg.norm(v))

    @classmethod
    def pair(cls, q_gg: complex, q_ge: complex, q_eg: complex, q_ee: complex) -> "QubitAmplitudes":
        v = np.array([q_gg, q_ge, q_eg, q_ee], dtype=np.complex128)
        return cls(v / np.linalg.norm(v))

    @classmethod
    def uniform_pair(cls) -> "QubitAmplitudes":
        return cls.pair(0.5, 0.5, 0.5, 0.5)

    @property
    def n_qubits(self) -> int:
        return 1 if self.vec.size == 2 else 2

    @property
    def p_odd(self) -> float:
        if self.n_qubits != 2:
            raise ConfigError("parity weight defined for two qubits only")
        return float(abs(self.vec[1]) ** 2 + abs(self.vec[2]) ** 2)

    @property
    def p_even(self) -> float:
        """|q_gg|^2 + |q_ee|^2, computed directly so definite parity is exact."""
        if self.n_qubits != 2:
            raise ConfigError("parity weight defined for two qubits only")
        return float(abs(self.vec[0]) ** 2 + abs(self.vec[3]) ** 2)


@dataclass(frozen=True)
class DetectionRecord:
    """Ordered photon arrival times with their detector channel."""

    events: tuple[tuple[float, str], ...]
    final_time: float

    def __post_init__(self):
        evs = tuple((float(t), str(ch)) for t, ch in self.events)
        times = [t for t, _ in evs]
        if any(t2 <= t1 for t1, t2 in zip(times, times[1:])):
            raise ConfigError("event times must be strictly increasing")
        if times and not (times[0] > 0 and times[-1] <= self.final_time):
            raise ConfigError("event times must lie in (0, final_time]")
        for _, ch in evs:
            if ch not in (CHANNEL_SINGLE, CHANNEL_PLUS, CHANNEL_MINUS):
                raise ConfigError(f"unknown channel {ch!r}")
        object.__setattr__(self, "events", evs)
        object.__setattr__(self, "final_time", float(self.final_time))

    @classmethod
    def empty(cls, final_time: float) -> "DetectionRecord":
        return cls((), final_time)

    def times(self, channel: str | None = None, before: float | None = None):
        out = [t for t, ch in self.events if channel is None or ch == channel]
        if before is not None:
            out = [t for t in out if t <= before]
        return out

    def count(self, channel: str, before: float | None = None) -> int:
        return len(self.times(channel, before))

    @property
    def n_plus(self) -> int:
        return self.count(CHANNEL_PLUS)

    @property
    def n_minus(self) -> int:
        return self.count(CHANNEL_MINUS)
