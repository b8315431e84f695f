"""Closed-form trajectory solutions used as the independent oracle.

All expressions assume the interaction picture with dispersive coupling
chi * sigma_z * n per qubit-resonator pair, resonator decay kappa, perfect
photodetection, and no qubit relaxation.  Detection-conditioned states are
known exactly in this regime; the numerical engines are validated against
the functions in this module.
"""

from __future__ import annotations

import cmath
import math

import numpy as np

from .errors import ConfigError
from .hilbert import HilbertSpace, PureState, coherent_state, tensor_states
from .params import CHANNEL_MINUS, CHANNEL_PLUS, CHANNEL_SINGLE, DetectionRecord, QubitAmplitudes, SystemParams


def coherent_labels_1q(params: SystemParams, t: float) -> tuple[complex, complex]:
    """Resonator coherent labels (alpha_g, alpha_e) at time t >= 0.

    The qubit in |g> shifts the resonator by -chi, so its label rotates as
    e^{+i chi t}; |e> rotates the opposite way.  Both decay at kappa/2.
    """
    if t < 0:
        raise ConfigError("t must be >= 0")
    decay = math.exp(-0.5 * params.kappa * t)
    a_g = params.alpha * cmath.exp(1j * params.chi * t) * decay
    a_e = params.alpha * cmath.exp(-1j * params.chi * t) * decay
    return a_g, a_e


def offdiag_coherence(params: SystemParams, c_eg0: complex, t: float) -> complex:
    """Qubit off-diagonal element a_eg(t) of the traced single-qubit state.

    a_eg(t) = c_eg(0) * exp[-|alpha|^2 (1 - e^{-(2i chi + kappa) t}) / (1 - i kappa / 2 chi)],
    the integral of -2i chi alpha_e alpha_g^* from 0 to t.  The long-time
    modulus is exp[-|alpha|^2/(1 + kappa^2/4chi^2)] and the phase approaches
    the unconditional rotation angle.
    """
    if t < 0:
        raise ConfigError("t must be >= 0")
    chi, kappa = params.chi, params.kappa
    asq = abs(params.alpha) ** 2
    exponent = -asq * (1.0 - cmath.exp(-(2j * chi + kappa) * t)) / (1.0 - 0.5j * kappa / chi)
    return c_eg0 * cmath.exp(exponent)


def qubit_coherence_factor(params: SystemParams, t: float) -> complex:
    """a_eg(t)/c_eg(0); modulus = dephasing factor, phase = coherent rotation."""
    return offdiag_coherence(params, 1.0, t)


def coherent_overlap(beta: complex, gamma_: complex) -> complex:
    """<beta|gamma> for normalized coherent states."""
    return cmath.exp(-0.5 * abs(beta) ** 2 - 0.5 * abs(gamma_) ** 2 + np.conj(beta) * gamma_)


def phi_unconditional(params: SystemParams) -> float:
    """Deterministic qubit rotation angle accumulated by the full decay."""
    x = 2.0 * params.chi / params.kappa
    return -abs(params.alpha) ** 2 / (x + 1.0 / x)


def stochastic_phase_1q(record: DetectionRecord, chi: float) -> float:
    """phi(T) = 2 chi sum_i t_i, stored unreduced (no mod 2 pi)."""
    if any(ch != CHANNEL_SINGLE for _, ch in record.events):
        raise ConfigError("single-qubit phase needs a single-channel record")
    return 2.0 * chi * sum(t for t, _ in record.events)


def no_jump_probability(alpha_sq_total: float, kappa: float, t: float) -> float:
    """Squared norm of the unnormalized no-click state after time t."""
    return math.exp(-alpha_sq_total * (1.0 - math.exp(-kappa * t)))


def jump_time_from_threshold(
    r: float, alpha_sq_total: float, kappa: float, t_start: float = 0.0
) -> float | None:
    """Absolute time at which the no-click norm crosses threshold r.

    `alpha_sq_total` is the total mean photon number at time zero (|alpha|^2
    for one resonator, 2|alpha|^2 for two); the remainder at `t_start` is
    alpha_sq_total * e^{-kappa t_start}.  Returns None when the threshold is
    never reached (no further click).
    """
    if not 0.0 < r <= 1.0:
        raise ConfigError(f"threshold r must lie in (0, 1], got {r}")
    if alpha_sq_total < 0:
        raise ConfigError("mean photon number must be >= 0")
    remaining = alpha_sq_total * math.exp(-kappa * t_start)
    if remaining <= 0.0 or r <= math.exp(-remaining):
        return None
    return t_start - math.log1p(math.log(r) / remaining) / kappa


def analytic_trajectory_1q(
    params: SystemParams,
    q: QubitAmplitudes,
    record: DetectionRecord,
    t: float,
    cutoff: int | None = None,
) -> PureState:
    """Exact normalized conditional state on qubit (x) mode at time t (eta = 1)."""
    if q.n_qubits != 1:
        raise ConfigError("single-qubit amplitudes required")
    times = record.times(before=t)
    if len(times) != len(record.events):
        raise ConfigError("record contains events after the requested time")
    cutoff = cutoff if cutoff is not None else params.cutoff_for(1)
    a_g, a_e = coherent_labels_1q(params, t)
    theta = params.chi * sum(times)
    qs = PureState(HilbertSpace((2,)), np.array([1.0, 0.0], dtype=complex))
    g_part = tensor_states(qs, coherent_state(a_g, cutoff, params.truncation_tol))
    qs_e = PureState(HilbertSpace((2,)), np.array([0.0, 1.0], dtype=complex))
    e_part = tensor_states(qs_e, coherent_state(a_e, cutoff, params.truncation_tol))
    v = q.vec[0] * cmath.exp(1j * theta) * g_part.amplitudes + q.vec[1] * cmath.exp(
        -1j * theta
    ) * e_part.amplitudes
    v = v / np.linalg.norm(v)
    return PureState(HilbertSpace((2, cutoff)), v)


def _two_qubit_mode_labels(params: SystemParams, t: float, theta_t: float):
    """Sum/difference-mode coherent labels for each computational component."""
    big_a = math.sqrt(2.0) * params.alpha * math.exp(-0.5 * params.kappa * t)
    return {
        "gg": (big_a * cmath.exp(1j * theta_t), 0.0),
        "ee": (big_a * cmath.exp(-1j * theta_t), 0.0),
        "ge": (big_a * math.cos(theta_t), 1j * big_a * math.sin(theta_t)),
        "eg": (big_a * math.cos(theta_t), -1j * big_a * math.sin(theta_t)),
    }


def analytic_trajectory_2q(
    params: SystemParams,
    q: QubitAmplitudes,
    record: DetectionRecord,
    t: float,
    cutoff: int | None = None,
    interaction_angle=None,
) -> PureState:
    """Exact normalized conditional state on q1 (x) q2 (x) mode+ (x) mode- (eta = 1).

    `interaction_angle` maps absolute time to the accumulated coupling angle
    chi * tau(t); the default is the always-on coupling tau(t) = t.  Detection
    events multiply the even components by e^{+-i angle} (plus channel) and
    the odd components by cos(angle) (plus) or +-i sin(angle) (minus); common
    factors are absorbed by normalization, leaving (+-i)^{N_-} relative signs.
    """
    if q.n_qubits != 2:
        raise ConfigError("two-qubit amplitudes required")
    angle = interaction_angle if interaction_angle is not None else (lambda s: params.chi * s)
    times = [(ti, ch) for ti, ch in record.events if ti <= t]
    if len(times) != len(record.events):
        raise ConfigError("record contains events after the requested time")
    cutoff = cutoff if cutoff is not None else params.cutoff_for(2)

    n_minus = sum(1 for _, ch in times if ch == CHANNEL_MINUS)
    plus_angles = [angle(ti) for ti, ch in times if ch == CHANNEL_PLUS]
    amps = _branch_amplitudes(q, plus_angles, n_minus)

    labels = _two_qubit_mode_labels(params, t, angle(t))
    dims = (2, 2, cutoff, cutoff)
    v = np.zeros(int(np.prod(dims)), dtype=np.complex128)
    basis = {"gg": (0, 0), "ge": (0, 1), "eg": (1, 0), "ee": (1, 1)}
    for key, (i, j) in basis.items():
        if amps[key] == 0.0:
            continue
        bp, bm = labels[key]
        mode = np.kron(
            coherent_state(bp, cutoff, params.truncation_tol).amplitudes,
            coherent_state(bm, cutoff, params.truncation_tol).amplitudes,
        )
        qv = np.zeros(4, dtype=np.complex128)
        qv[i * 2 + j] = 1.0
        v += amps[key] * np.kron(qv, mode)
    v = v / np.linalg.norm(v)
    return PureState(HilbertSpace(dims), v)


def _branch_amplitudes(q: QubitAmplitudes, plus_angles, n_minus: int) -> dict:
    q_gg, q_ge, q_eg, q_ee = q.vec
    if n_minus > 0:
        phase = 1j**n_minus
        return {"gg": 0.0, "ee": 0.0, "ge": phase * q_ge, "eg": np.conj(phase) * q_eg}
    s = sum(plus_angles)
    c = math.prod(math.cos(a) for a in plus_angles)
    return {
        "gg": cmath.exp(1j * s) * q_gg,
        "ee": cmath.exp(-1j * s) * q_ee,
        "ge": c * q_ge,
        "eg": c * q_eg,
    }


def parity_weight_from_angles(q: QubitAmplitudes, plus_angles, n_minus: int) -> float:
    """P_-1 = <Pi_-1> of the normalized conditional qubit state at t_f."""
    p_odd, p_even = q.p_odd, q.p_even
    if n_minus > 0:
        return 1.0
    if p_odd == 0.0:
        return 0.0
    if p_even == 0.0:
        return 1.0
    c_sq = math.prod(math.cos(a) ** 2 for a in plus_angles)
    return c_sq * p_odd / (p_even + c_sq * p_odd)


def parity_weight(q: QubitAmplitudes, record: DetectionRecord, chi: float) -> float:
    """Parity weight of a completed constant-coupling protocol record."""
    angles = [chi * t for t in record.times(CHANNEL_PLUS)]
    return parity_weight_from_angles(q, angles, record.n_minus)


def unnormalized_odd_weight(q: QubitAmplitudes, record: DetectionRecord, chi: float) -> float:
    """The bare product form p_odd * (prod cos chi t_i)^2 (not renormalized).

    Kept for comparison; it equals `parity_weight` only when every cosine
    factor is 1 or the input parity is definite.
    """
    if record.n_minus > 0:
        return 1.0
    c = math.prod(math.cos(chi * t) for t in record.times(CHANNEL_PLUS))
    return q.p_odd * c * c


def predicted_qubits_after_feedback(
    q: QubitAmplitudes, plus_angles, n_minus: int
) -> PureState:
    """Post-feedback qubit state implied by the record (ideal engine).

    Odd outcome: the projected odd component.  Even-dominated records: the
    even projection plus the cosine-suppressed odd component.
    """
    q_gg, q_ge, q_eg, q_ee = q.vec
    if n_minus > 0:
        v = np.array([0.0, q_ge, q_eg, 0.0], dtype=np.complex128)
    else:
        c = math.prod(math.cos(a) for a in plus_angles)
        v = np.array([q_gg, c * q_ge, c * q_eg, q_ee], dtype=np.complex128)
    return PureState(HilbertSpace((2, 2)), v / np.linalg.norm(v))
