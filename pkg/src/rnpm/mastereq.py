"""Deterministic (unconditioned) Lindblad evolution on a fixed RK4 grid.

The same grid and stepper are shared with the trajectory engines so that
ensemble averages overlay the master-equation curves sample by sample.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import hilbert as hb
from . import kernels
from .errors import ConfigError, DimensionError, IntegratorError
from .hilbert import HilbertSpace, MixedState, PureState
from .models import LindbladModel, mixed_generator, MonitoredModel
from .params import SystemParams

TRACE_DRIFT_LIMIT = 1e-6


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float
    t_end: float
    sample_every: int = 10
    t_start: float = 0.0

    def __post_init__(self):
        if self.dt <= 0:
            raise ConfigError(f"dt must be > 0, got {self.dt}")
        if self.t_end <= self.t_start:
            raise ConfigError("t_end must exceed t_start")
        if self.sample_every < 1:
            raise ConfigError("sample_every must be >= 1")

    def check_rates(self, *rates: float) -> None:
        """Accuracy guard: dt <= 1e-2 / max rate."""
        top = max(r for r in rates if r is not None)
        if top > 0 and self.dt > 1e-2 / top:
            raise ConfigError(
                f"dt = {self.dt:.3g} too coarse for max rate {top:.3g}; need dt <= {1e-2 / top:.3g}"
            )


@dataclass
class EvolveResult:
    times: np.ndarray
    columns: dict
    states: list | None
    final_state: MixedState

    def column(self, name: str) -> np.ndarray:
        return self.columns[name]


def lindblad_rhs(model: LindbladModel, rho: MixedState | np.ndarray) -> np.ndarray:
    """d rho / dt = -i[H, rho] + sum_k (c rho c^dag - {c^dag c, rho}/2)."""
    r = rho.matrix if isinstance(rho, MixedState) else np.asarray(rho)
    h = model.hamiltonian.matrix
    if r.shape != h.shape:
        raise DimensionError("state dimension does not match model")
    out = -1j * (h @ r - r @ h)
    for c in model.collapse_ops:
        m = c.matrix
        cr = m @ r
        cdc = m.conj().T @ m
        out += cr @ m.conj().T - 0.5 * (cdc @ r + r @ cdc)
    return out


def _as_matrix(op):
    return op.matrix if hasattr(op, "matrix") else op


def _expectations(rho: np.ndarray, observables: dict) -> dict:
    out = {}
    for name, op in observables.items():
        prod = op @ rho
        tr = prod.trace() if sp.issparse(op) else np.trace(prod)
        out[name] = float(complex(tr).real)
    return out


def evolve(
    model: LindbladModel,
    initial: MixedState | PureState,
    cfg: IntegratorConfig,
    observables: dict | None = None,
    keep_states: bool | None = None,
) -> EvolveResult:
    """Integrate the master equation, sampling every `sample_every` steps.

    Trace drift beyond 1e-6 raises IntegratorError (advice: smaller dt).
    Each RK4 step ends with a (rho + rho^dag)/2 re-symmetrization.
    """
    if isinstance(initial, PureState):
        initial = initial.to_mixed()
    if initial.space.dims != model.space.dims:
        raise DimensionError("initial state does not live on the model space")
    if keep_states is None:
        keep_states = observables is None
    observables = observables or {}
    obs_mats = {k: _as_matrix(v) for k, v in observables.items()}

    # every channel unmonitored: trace-preserving generator
    monitored_free = MonitoredModel(model.hamiltonian, (), tuple(model.collapse_ops))
    g, u_ops = mixed_generator(monitored_free)
    kern = kernels.make_mixed_kernel(g, u_ops)

    rho = initial.matrix.astype(np.complex128).copy()
    t = cfg.t_start
    times = [t]
    cols: dict[str, list[float]] = {k: [v] for k, v in _expectations(rho, obs_mats).items()}
    states = [MixedState(model.space, rho.copy(), normalized=False)] if keep_states else None

    span = cfg.t_end - cfg.t_start
    n_full = int(math.floor(span / cfg.dt + 1e-9))
    remainder = span - n_full * cfg.dt

    def check_and_sample(rho, t):
        tr = float(np.trace(rho).real)
        if abs(tr - 1.0) > TRACE_DRIFT_LIMIT:
            raise IntegratorError(
                f"trace drifted to {tr:.9f} at t = {t:.4g}; reduce dt below {cfg.dt:.3g}"
            )
        times.append(t)
        for k, v in _expectations(rho, obs_mats).items():
            cols[k].append(v)
        if keep_states:
            states.append(MixedState(model.space, rho.copy(), normalized=False))

    done = 0
    while done < n_full:
        chunk = min(cfg.sample_every, n_full - done)
        rho, _, status = kern.advance(rho, cfg.dt, chunk, -1.0)
        if status == kernels.STATUS_INCREASED:
            raise IntegratorError(
                f"trace grew during a master-equation step; reduce dt below {cfg.dt:.3g}"
            )
        done += chunk
        t = cfg.t_start + done * cfg.dt
        check_and_sample(rho, t)
    if remainder > 1e-12 * max(1.0, span):
        rho = kern.step(rho, remainder)
        check_and_sample(rho, cfg.t_end)

    final = MixedState(model.space, rho, normalized=False)
    return EvolveResult(
        times=np.asarray(times),
        columns={k: np.asarray(v) for k, v in cols.items()},
        states=states,
        final_state=final,
    )


def gaussian_drive_amplitude(alpha: complex, t_d: float, t: float) -> complex:
    """eps(t) = i alpha e^{-t^2 / 2 T_d^2} / sqrt(2 pi T_d^2); pulse area = i alpha."""
    return 1j * alpha * math.exp(-0.5 * (t / t_d) ** 2) / math.sqrt(2.0 * math.pi * t_d**2)


def evolve_with_gaussian_drive(
    model: LindbladModel,
    initial: MixedState | PureState,
    params: SystemParams,
    cfg: IntegratorConfig,
    observables: dict | None = None,
    keep_states: bool | None = None,
) -> EvolveResult:
    """Master equation with the explicit drive pulse instead of D(alpha).

    The pulse is centered at t = 0, so cfg.t_start should be <= -5 T_d; just
    after the pulse the state matches the instantaneous-displacement model.
    Supported on the single qubit (x) mode space.
    """
    if params.drive_width is None or params.drive_width <= 0:
        raise ConfigError("gaussian drive requires params.drive_width > 0")
    dims = model.space.dims
    if len(dims) != 2 or dims[0] != 2:
        raise ConfigError("gaussian drive validation supports the qubit (x) mode space")
    if isinstance(initial, PureState):
        initial = initial.to_mixed()
    if keep_states is None:
        keep_states = observables is None
    observables = observables or {}
    obs_mats = {k: _as_matrix(v) for k, v in observables.items()}

    a = hb.embed(hb.fock_annihilation(dims[1]), 1, model.space).matrix
    a_dag = a.conj().T
    h0 = model.hamiltonian.matrix
    cs = [c.matrix for c in model.collapse_ops]
    cdcs = [c.conj().T @ c for c in cs]
    t_d = params.drive_width

    def rhs(rho, t):
        eps = gaussian_drive_amplitude(params.alpha, t_d, t)
        h = h0 + eps * a_dag + np.conj(eps) * a
        out = -1j * (h @ rho - rho @ h)
        for c, cdc in zip(cs, cdcs):
            out += c @ rho @ c.conj().T - 0.5 * (cdc @ rho + rho @ cdc)
        return out

    rho = initial.matrix.astype(np.complex128).copy()
    span = cfg.t_end - cfg.t_start
    n_steps = int(math.ceil(span / cfg.dt - 1e-9))
    times = [cfg.t_start]
    cols: dict[str, list[float]] = {k: [v] for k, v in _expectations(rho, obs_mats).items()}
    states = [MixedState(model.space, rho.copy(), normalized=False)] if keep_states else None

    t = cfg.t_start
    for i in range(n_steps):
        h = min(cfg.dt, cfg.t_end - t)
        k1 = rhs(rho, t)
        k2 = rhs(rho + 0.5 * h * k1, t + 0.5 * h)
        k3 = rhs(rho + 0.5 * h * k2, t + 0.5 * h)
        k4 = rhs(rho + h * k3, t + h)
        rho = rho + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        rho = 0.5 * (rho + rho.conj().T)
        t += h
        if (i + 1) % cfg.sample_every == 0 or i == n_steps - 1:
            tr = float(np.trace(rho).real)
            if abs(tr - 1.0) > TRACE_DRIFT_LIMIT:
                raise IntegratorError(f"trace drifted to {tr:.9f} under the drive; reduce dt")
            times.append(t)
            for k, v in _expectations(rho, obs_mats).items():
                cols[k].append(v)
            if keep_states:
                states.append(MixedState(model.space, rho.copy(), normalized=False))

    return EvolveResult(
        times=np.asarray(times),
        columns={k: np.asarray(v) for k, v in cols.items()},
        states=states,
        final_state=MixedState(model.space, rho, normalized=False),
    )
