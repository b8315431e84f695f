"""Photon-counting trajectory engines (quantum jump unravelings).

Both engines integrate the unnormalized conditional state on a fixed RK4
grid, watch its squared norm (pure) or trace (mixed) against a uniformly
drawn threshold, locate each crossing by bisection to 1e-8 in time, apply
the sampled channel operator, renormalize, and continue.  Times are local
to the run (t = 0 at the start of the segment list).
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import kernels
from .errors import ConfigError, ConsistencyError, IntegratorError
from .hilbert import MixedState, PureState
from .metrics import EnsembleStats
from .models import MonitoredModel, mixed_generator, pure_generator
from .params import DetectionRecord, QubitAmplitudes, SystemParams

JUMP_TIME_TOL = 1e-8
MIN_CHANNEL_WEIGHT = 1e-30


@dataclass(frozen=True)
class RngStream:
    """Reproducible per-trajectory random stream: (seed, stream_id) fixes the run."""

    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,))
        return np.random.Generator(np.random.PCG64(ss))


def _as_generator(rng):
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator) or hasattr(rng, "random"):
        return rng  # also admits stub generators with a .random() method
    return RngStream(int(rng)).generator()


def _draw_threshold(gen: np.random.Generator) -> float:
    # uniform on (0, 1]; r = 0 would mean "never jump"
    return 1.0 - gen.random()


@dataclass
class Trajectory:
    params: SystemParams
    record: DetectionRecord
    times: np.ndarray
    columns: dict
    states: list | None
    final_state: PureState | MixedState
    engine: str

    def column(self, name: str) -> np.ndarray:
        return self.columns[name]


def _cached(model: MonitoredModel, key: str, builder):
    cache = model.runtime_cache
    if key not in cache:
        cache[key] = builder()
    return cache[key]


def _channel_csr(model: MonitoredModel):
    return _cached(
        model,
        "channels",
        lambda: [(ch.label, sp.csr_matrix(ch.op.matrix)) for ch in model.monitored],
    )


class _PureOps:
    """State algebra for the pure engine (unnormalized ket)."""

    engine = "pure"

    def __init__(self, model: MonitoredModel):
        self.channels = _channel_csr(model)
        self.space = model.space

    @staticmethod
    def kernel_for(m: MonitoredModel):
        key = f"pure_kernel_{kernels.BACKEND_NAME}"
        return _cached(m, key, lambda: kernels.make_pure_kernel(pure_generator(m)))

    def value(self, psi) -> float:
        return float(np.vdot(psi, psi).real)

    def weights(self, psi) -> list[float]:
        out = []
        for _, m in self.channels:
            v = m @ psi
            out.append(float(np.vdot(v, v).real))
        return out

    def apply_jump(self, psi, idx: int):
        v = self.channels[idx][1] @ psi
        return v / np.linalg.norm(v)

    def normalize(self, psi):
        return psi / np.linalg.norm(psi)

    def expect(self, psi, mat) -> float:
        return float(np.vdot(psi, mat @ psi).real)

    def wrap(self, psi, normalized: bool = True):
        return PureState(self.space, psi, normalized=normalized)


class _MixedOps:
    """State algebra for the mixed engine (unnormalized density matrix)."""

    engine = "mixed"

    def __init__(self, model: MonitoredModel):
        self.channels = _channel_csr(model)
        self._channels_conj = _cached(
            model, "channels_conj", lambda: [(lbl, m.conj()) for lbl, m in self.channels]
        )
        self.space = model.space

    @staticmethod
    def kernel_for(m: MonitoredModel):
        key = f"mixed_kernel_{kernels.BACKEND_NAME}"

        def build():
            g, u = mixed_generator(m)
            return kernels.make_mixed_kernel(g, u)

        return _cached(m, key, build)

    def value(self, rho) -> float:
        return float(np.trace(rho).real)

    def weights(self, rho) -> list[float]:
        out = []
        for (_, m), (_, mc) in zip(self.channels, self._channels_conj):
            b = m @ rho
            out.append(float(mc.multiply(b).sum().real))
        return out

    def apply_jump(self, rho, idx: int):
        m = self.channels[idx][1]
        b = m @ rho
        out = m @ b.conj().T
        out = 0.5 * (out + out.conj().T)
        return out / float(np.trace(out).real)

    def normalize(self, rho):
        return rho / float(np.trace(rho).real)

    def expect(self, rho, mat) -> float:
        if sp.issparse(mat):
            return float(complex((mat @ rho).trace()).real)
        return float(np.einsum("ij,ji->", mat, rho).real)

    def wrap(self, rho, normalized: bool = True):
        return MixedState(self.space, 0.5 * (rho + rho.conj().T), normalized=normalized)


def _locate_jump(kernel, state, t_lo: float, h_max: float, r: float, value) -> tuple[float, object]:
    """Bisect the threshold crossing inside (t_lo, t_lo + h_max]."""
    lo, hi = 0.0, h_max
    while hi - lo > JUMP_TIME_TOL:
        mid = 0.5 * (lo + hi)
        probe = kernel.step(state, mid)
        if value(probe) >= r:
            lo = mid
        else:
            hi = mid
    h_jump = 0.5 * (lo + hi)
    return t_lo + h_jump, kernel.step(state, h_jump)


def _run_conditioned(
    ops,
    state,
    segments,
    t_end: float,
    dt: float,
    sample_every: int,
    gen: np.random.Generator,
    observables: dict,
    keep_states: bool,
    grid_t0: float = 0.0,
    include_final: bool = True,
):
    """Shared jump-process driver; `segments` = [(t_start, kernel), ...].

    Samples land on the global grid {m * sample_every * dt - grid_t0}, so
    series stitched from several runs share one uniform time axis.
    """
    events: list[tuple[float, str]] = []
    sample_dt = sample_every * dt
    eps = 1e-9 * max(1.0, t_end + abs(grid_t0))
    sample_times = []
    m = int(math.floor((grid_t0 + eps) / sample_dt)) + 1
    while m * sample_dt - grid_t0 <= t_end + eps:
        sample_times.append(m * sample_dt - grid_t0)
        m += 1
    if include_final and (not sample_times or t_end - sample_times[-1] > eps):
        sample_times.append(t_end)

    boundaries = sorted({t for t, _ in segments if 0.0 < t < t_end})
    checkpoints = sorted(set(sample_times) | set(boundaries) | {t_end})
    sample_set = set(sample_times)

    def kernel_at(t: float):
        current = segments[0][1]
        for t0, k in segments:
            if t >= t0 - 1e-12:
                current = k
        return current

    times = [0.0]
    cols: dict[str, list[float]] = {}
    norm_state = ops.normalize(state)
    for name, mat in observables.items():
        cols[name] = [ops.expect(norm_state, mat)]
    states = [ops.wrap(norm_state.copy())] if keep_states else None

    r = _draw_threshold(gen)
    t = 0.0
    for target in checkpoints:
        kern = kernel_at(t)
        while t < target - 1e-12 * max(1.0, t_end):
            remaining = target - t
            n_full = int(math.floor(remaining / dt + 1e-9))
            crossed_here = False
            if n_full > 0:
                new_state, done, status = kern.advance(state, dt, n_full, r)
                if status == kernels.STATUS_INCREASED:
                    raise IntegratorError("conditional norm grew beyond tolerance; reduce dt")
                t += done * dt
                state = new_state
                if status == kernels.STATUS_CROSSED:
                    crossed_here = True
                    h_bracket = dt
            if not crossed_here:
                rem = target - t
                if rem > 1e-12 * max(1.0, t_end):
                    probe = kern.step(state, rem)
                    if ops.value(probe) < r:
                        crossed_here = True
                        h_bracket = rem
                    else:
                        state = probe
                        t = target
                else:
                    t = target
            if crossed_here:
                t_jump, state_j = _locate_jump(kern, state, t, h_bracket, r, ops.value)
                w = ops.weights(state_j)
                total = sum(w)
                if total < MIN_CHANNEL_WEIGHT:
                    raise ConsistencyError(
                        "threshold crossed but no channel has photon flux (logic bug)"
                    )
                u = gen.random() * total
                idx = 0
                acc = w[0]
                while acc < u and idx < len(w) - 1:
                    idx += 1
                    acc += w[idx]
                state = ops.apply_jump(state_j, idx)
                events.append((t_jump, ops.channels[idx][0]))
                r = _draw_threshold(gen)
                t = t_jump
        if target in sample_set:
            norm_state = ops.normalize(state)
            times.append(target)
            for name, mat in observables.items():
                cols[name].append(ops.expect(norm_state, mat))
            if keep_states:
                states.append(ops.wrap(norm_state.copy()))

    final = ops.wrap(ops.normalize(state))
    record = DetectionRecord(tuple(events), final_time=t_end)
    return record, np.asarray(times), {k: np.asarray(v) for k, v in cols.items()}, states, final


def _prepare_segments(ops, model: MonitoredModel, schedule):
    if schedule is None:
        return [(0.0, ops.kernel_for(model))]
    segs = []
    for t0, m in schedule:
        segs.append((float(t0), ops.kernel_for(m)))
    if segs[0][0] != 0.0:
        raise ConfigError("schedule must start at t = 0")
    return segs


def run_pure_trajectory(
    model: MonitoredModel,
    initial: PureState,
    params: SystemParams,
    rng,
    t_end: float,
    dt: float | None = None,
    sample_every: int = 10,
    observables: dict | None = None,
    keep_states: bool = False,
    schedule=None,
    grid_t0: float = 0.0,
    include_final: bool = True,
) -> Trajectory:
    """Exact-unraveling pure-state engine; requires eta = 1 and gamma = 0."""
    if params.eta_plus != 1.0 or params.eta_minus != 1.0 or params.gamma != 0.0:
        raise ConfigError("pure-state engine requires eta_plus = eta_minus = 1 and gamma = 0")
    if not model.is_pure_compatible():
        raise ConfigError("model carries unmonitored channels; use the mixed engine")
    dt = dt if dt is not None else 1e-3 / params.kappa
    ops = _PureOps(model)
    gen = _as_generator(rng)
    psi = initial.amplitudes.astype(np.complex128).copy()
    record, times, cols, states, final = _run_conditioned(
        ops,
        psi,
        _prepare_segments(ops, model, schedule),
        t_end,
        dt,
        sample_every,
        gen,
        observables or {},
        keep_states,
        grid_t0=grid_t0,
        include_final=include_final,
    )
    return Trajectory(params, record, times, cols, states, final, engine="pure")


def run_mixed_trajectory(
    model: MonitoredModel,
    initial: MixedState | PureState,
    params: SystemParams,
    rng,
    t_end: float,
    dt: float | None = None,
    sample_every: int = 10,
    observables: dict | None = None,
    keep_states: bool = False,
    schedule=None,
    grid_t0: float = 0.0,
    include_final: bool = True,
) -> Trajectory:
    """General-efficiency engine with unmonitored loss and qubit relaxation."""
    dt = dt if dt is not None else 1e-3 / params.kappa
    ops = _MixedOps(model)
    gen = _as_generator(rng)
    rho = (initial.to_mixed() if isinstance(initial, PureState) else initial).matrix.copy()
    record, times, cols, states, final = _run_conditioned(
        ops,
        rho,
        _prepare_segments(ops, model, schedule),
        t_end,
        dt,
        sample_every,
        gen,
        observables or {},
        keep_states,
        grid_t0=grid_t0,
        include_final=include_final,
    )
    return Trajectory(params, record, times, cols, states, final, engine="mixed")


def sample_jump_channel(state: PureState | MixedState, channel_ops, rng) -> int:
    """Pick channel k with probability <c_k^dag c_k> / sum_j <c_j^dag c_j>."""
    gen = _as_generator(rng)
    weights = []
    for op in channel_ops:
        m = op.matrix if hasattr(op, "matrix") else np.asarray(op)
        if isinstance(state, PureState):
            v = m @ state.amplitudes
            weights.append(float(np.vdot(v, v).real))
        else:
            weights.append(float(np.trace(m @ state.matrix @ m.conj().T).real))
    total = sum(weights)
    if total < MIN_CHANNEL_WEIGHT:
        raise ConsistencyError("no channel has positive photon flux")
    u = gen.random() * total
    acc = 0.0
    for k, w in enumerate(weights):
        acc += w
        if u < acc:
            return k
    return len(weights) - 1


# ---------------------------------------------------------------------------
# ensembles
#
# The heavy payload (model, initial state, observables) is shipped to each
# worker once through the pool initializer; per-trajectory jobs carry only
# the stream index, so scheduling order cannot affect the merged result.

_WORKER_CTX: dict = {}


def _ensemble_init(ctx):
    _WORKER_CTX.clear()
    _WORKER_CTX.update(ctx)


def _ensemble_run_stream(stream: int):
    c = _WORKER_CTX
    run = run_pure_trajectory if c["engine"] == "pure" else run_mixed_trajectory
    traj = run(
        c["model"],
        c["initial"],
        c["params"],
        RngStream(c["base_seed"], stream),
        c["t_end"],
        dt=c["dt"],
        sample_every=c["sample_every"],
        observables=c["observables"],
        keep_states=False,
    )
    return stream, traj.times, traj.columns, traj.record


def run_ensemble(
    model: MonitoredModel,
    initial: PureState | MixedState,
    params: SystemParams,
    n: int,
    base_seed: int,
    t_end: float,
    dt: float | None = None,
    sample_every: int = 10,
    observables: dict | None = None,
    engine: str = "pure",
    q: QubitAmplitudes | None = None,
    n_workers: int | None = None,
) -> EnsembleStats:
    """Independent trajectories on per-stream rngs, merged in stream order.

    When two-qubit amplitudes `q` are supplied, each record is also scored
    with the analytic parity weight so the outcome distribution is returned.
    """
    if n < 1:
        raise ConfigError("ensemble size must be >= 1")
    dt = dt if dt is not None else 1e-3 / params.kappa
    ctx = dict(
        model=model,
        initial=initial,
        params=params,
        t_end=t_end,
        dt=dt,
        sample_every=sample_every,
        observables=observables or {},
        engine=engine,
        base_seed=base_seed,
    )
    results = {}
    if (n_workers is None or n_workers > 1) and n > 1:
        try:
            with ProcessPoolExecutor(
                max_workers=n_workers, initializer=_ensemble_init, initargs=(ctx,)
            ) as pool:
                for stream, times, cols, record in pool.map(
                    _ensemble_run_stream, range(n), chunksize=max(1, n // 256)
                ):
                    results[stream] = (times, cols, record)
        except (OSError, PermissionError):  # restricted environments: run serially
            results = {}
    if not results:
        _ensemble_init(ctx)
        for i in range(n):
            stream, times, cols, record = _ensemble_run_stream(i)
            results[stream] = (times, cols, record)

    ordered = [results[i] for i in range(n)]
    times = ordered[0][0]
    records = [rec for _, _, rec in ordered]
    means, stderrs = {}, {}
    for name in ordered[0][1]:
        stack = np.stack([cols[name] for _, cols, _ in ordered])
        means[name] = stack.mean(axis=0)
        stderrs[name] = (
            stack.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.zeros(stack.shape[1])
        )
    hist: dict[tuple[int, int], int] = {}
    for rec in records:
        key = (rec.n_plus + rec.count("single"), rec.n_minus)
        hist[key] = hist.get(key, 0) + 1
    p_vals = None
    if q is not None and q.n_qubits == 2:
        from .analytic import parity_weight

        p_vals = np.array([parity_weight(q, rec, params.chi) for rec in records])

    return EnsembleStats(
        n=n,
        times=times,
        means=means,
        stderrs=stderrs,
        count_histogram=hist,
        p_minus1=p_vals,
        records=tuple(records),
    )
