"""Remote nondestructive parity measurement: displacement, monitored decay,
counter-displacement, and record-conditioned feedback phase gates.

All arrival times entering the feedback phases are measured from the
iteration's own injection displacement (local clock): each repetition
re-injects a fresh coherent state, so the accumulated dispersive phase of a
detected photon depends on how long it lived in *that* iteration.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import hilbert as hb
from .analytic import parity_weight_from_angles, predicted_qubits_after_feedback
from .errors import ConfigError, ConsistencyError
from .hilbert import HilbertSpace, MixedState, Operator, PureState
from .metrics import expectation, fidelity, two_qubit_observables
from .models import sum_mode_displacement, two_qubit_initial, two_qubit_model
from .params import CHANNEL_PLUS, DetectionRecord, QubitAmplitudes, SystemParams
from .trajectory import (
    RngStream,
    Trajectory,
    _as_generator,
    run_mixed_trajectory,
    run_pure_trajectory,
)

VACUUM_RETURN_TOL = 1e-8


def _qubit_stabilizers() -> dict:
    space = HilbertSpace((2, 2))
    out = {}
    for name, op in (("sxx", hb.sigma_x()), ("syy", hb.sigma_y()), ("szz", hb.sigma_z())):
        out[name] = hb.embed(op, 0, space) @ hb.embed(op, 1, space)
    return out


_STABILIZERS = _qubit_stabilizers()

VARIANT_STANDARD = "standard"
VARIANT_TUNABLE = "tunable"


@dataclass(frozen=True)
class ProtocolParams:
    system: SystemParams
    k: int = 1
    variant: str = VARIANT_STANDARD
    t_prime: float | None = None
    repetitions: int = 1
    projection_threshold: float = 0.01
    t_end: float | None = None
    dt: float | None = None
    sample_every: int = 10

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        if not 0.0 < self.projection_threshold < 0.5:
            raise ConfigError("projection_threshold must lie in (0, 0.5)")
        if self.repetitions < 1:
            raise ConfigError("repetitions must be >= 1")
        if self.variant not in (VARIANT_STANDARD, VARIANT_TUNABLE):
            raise ConfigError(f"unknown variant {self.variant!r}")
        if self.variant == VARIANT_TUNABLE:
            if self.t_f < 8.0 / self.system.kappa:
                raise ConfigError(
                    f"tunable variant needs t_f >= 8/kappa = {8.0 / self.system.kappa:.3g} "
                    f"so the resonators decay out; got {self.t_f:.3g}"
                )
            if self.t_prime is not None:
                if self.t_prime < self.t_off or self.t_prime + self.t_off > self.t_f:
                    raise ConfigError("need t_off <= t_prime and t_prime + t_off <= t_f")
        elif self.t_prime is not None:
            raise ConfigError("t_prime applies to the tunable variant only")

    @property
    def t_f(self) -> float:
        if self.variant == VARIANT_TUNABLE:
            return self.t_end if self.t_end is not None else 10.0 / self.system.kappa
        return self.k * math.pi / self.system.chi

    @property
    def t_off(self) -> float:
        return 0.5 * math.pi / self.system.chi

    @property
    def observe_until(self) -> float:
        t = self.t_end if self.t_end is not None else self.t_f
        return max(t, self.t_f)

    def interaction_angle(self, t: float) -> float:
        """chi * tau(t): accumulated coupling angle, clamped while chi is off."""
        if self.variant == VARIANT_STANDARD:
            return self.system.chi * t
        tau = min(t, self.t_off)
        if self.t_prime is not None and t > self.t_prime:
            tau += min(t - self.t_prime, self.t_off)
        return self.system.chi * tau


@dataclass(frozen=True)
class FeedbackPhases:
    phi_plus: float
    phi_minus: float

    def __post_init__(self):
        ratio = self.phi_minus / math.pi
        if abs(ratio - round(ratio)) > 1e-9:
            raise ConfigError("phi_minus must be an integer multiple of pi")


@dataclass(frozen=True)
class ParityProjectors:
    even: Operator
    odd: Operator

    @classmethod
    def build(cls) -> "ParityProjectors":
        space = HilbertSpace((2, 2))
        even = np.diag([1.0, 0.0, 0.0, 1.0]).astype(complex)
        odd = np.diag([0.0, 1.0, 1.0, 0.0]).astype(complex)
        return cls(Operator(space, even, hermitian=True), Operator(space, odd, hermitian=True))


@dataclass
class ProtocolOutcome:
    record: DetectionRecord
    iteration_records: tuple[DetectionRecord, ...]
    phases: FeedbackPhases
    p_minus1: float
    final_qubits: MixedState
    fidelity_to_prediction: float
    iterations_used: int
    label: int
    trajectory: Trajectory | None = None


def compute_feedback(
    record: DetectionRecord, chi: float, angle_of=None
) -> FeedbackPhases:
    """phi_+ = 2 sum of plus-channel coupling angles, phi_- = pi N_-; unreduced."""
    angle = angle_of if angle_of is not None else (lambda t: chi * t)
    phi_plus = 2.0 * sum(angle(t) for t in record.times(CHANNEL_PLUS))
    return FeedbackPhases(phi_plus=phi_plus, phi_minus=math.pi * record.n_minus)


def feedback_operator(space: HilbertSpace, phases: FeedbackPhases) -> Operator:
    """F = R(phi_+/2 + phi_-/2) (x) R(phi_+/2 - phi_-/2) on the two qubit factors.

    Both gates are diagonal, so F is assembled as a diagonal (no matmul).
    """
    r1 = np.diag(hb.phase_gate(0.5 * (phases.phi_plus + phases.phi_minus)).matrix)
    r2 = np.diag(hb.phase_gate(0.5 * (phases.phi_plus - phases.phi_minus)).matrix)
    diag = np.ones(1, dtype=complex)
    for i, d in enumerate(space.dims):
        if i == 0:
            diag = np.kron(diag, r1)
        elif i == 1:
            diag = np.kron(diag, r2)
        else:
            diag = np.kron(diag, np.ones(d, dtype=complex))
    return Operator(space, np.diag(diag))


def apply_feedback(state: PureState | MixedState, phases: FeedbackPhases):
    f = feedback_operator(state.space, phases)
    return _apply_unitary(state, f)


def _apply_unitary(state, op: Operator):
    if isinstance(state, PureState):
        v = op.matrix @ state.amplitudes
        return PureState(state.space, v / np.linalg.norm(v))
    m = op.matrix @ state.matrix @ op.matrix.conj().T
    m = 0.5 * (m + m.conj().T)
    return MixedState(state.space, m / np.trace(m).real)


from functools import lru_cache


@lru_cache(maxsize=16)
def _total_number_diagonal(space: HilbertSpace) -> np.ndarray:
    cutoff = space.dims[2]
    diag = np.diag(hb.embed(hb.fock_number(cutoff), 2, space).matrix).real
    diag = diag + np.diag(hb.embed(hb.fock_number(cutoff), 3, space).matrix).real
    return diag


def _resonator_population(state, space: HilbertSpace) -> float:
    diag = _total_number_diagonal(space)
    if isinstance(state, PureState):
        return float(np.sum(diag * np.abs(state.amplitudes) ** 2))
    return float(np.sum(diag * np.diag(state.matrix).real))


def _run_segment(
    engine, model, state, params, gen, t_end, dt, sample_every, observables, keep_states,
    schedule=None, grid_t0=0.0, include_final=True,
):
    run = run_pure_trajectory if engine == "pure" else run_mixed_trajectory
    return run(
        model,
        state,
        params,
        gen,
        t_end,
        dt=dt,
        sample_every=sample_every,
        observables=observables,
        keep_states=keep_states,
        schedule=schedule,
        grid_t0=grid_t0,
        include_final=include_final,
    )


def _stitch(trajs, offsets):
    times = [trajs[0].times]
    cols = {k: [v] for k, v in trajs[0].columns.items()}
    states = None if trajs[0].states is None else list(trajs[0].states)
    for traj, off in zip(trajs[1:], offsets[1:]):
        times.append(traj.times[1:] + off)
        for k in cols:
            cols[k].append(traj.columns[k][1:])
        if states is not None:
            states.extend(traj.states[1:])
    return (
        np.concatenate(times),
        {k: np.concatenate(v) for k, v in cols.items()},
        states,
    )


def run_protocol(
    q: QubitAmplitudes,
    pp: ProtocolParams,
    engine: str,
    rng,
    observables: dict | None = None,
    keep_states: bool = False,
) -> ProtocolOutcome:
    """One pass of the protocol (steps 1-5); honors the tunable variant."""
    return _execute(q, pp, engine, rng, max_reps=1, observables=observables, keep_states=keep_states)


def run_protocol_repeated(
    q: QubitAmplitudes,
    pp: ProtocolParams,
    engine: str,
    rng,
    observables: dict | None = None,
    keep_states: bool = False,
) -> ProtocolOutcome:
    """Repeat steps 2-4 until P_-1 is within projection_threshold of {0, 1}.

    Adjacent counter-displacement / re-displacement pairs are merged into a
    single displacement; one feedback operation at the end accounts for all
    recorded photons with per-iteration local clocks.
    """
    if pp.variant != VARIANT_STANDARD:
        raise ConfigError("repetition applies to the standard variant")
    return _execute(q, pp, engine, rng, max_reps=pp.repetitions, observables=observables, keep_states=keep_states)


def run_variant_tunable(
    q: QubitAmplitudes,
    pp: ProtocolParams,
    engine: str,
    rng,
    observables: dict | None = None,
    keep_states: bool = False,
) -> ProtocolOutcome:
    if pp.variant != VARIANT_TUNABLE:
        raise ConfigError("params are not configured for the tunable variant")
    return _execute(q, pp, engine, rng, max_reps=1, observables=observables, keep_states=keep_states)


def _execute(q, pp, engine, rng, max_reps, observables=None, keep_states=False):
    if q.n_qubits != 2:
        raise ConfigError("the protocol measures two qubits")
    params = pp.system
    if engine == "pure" and (params.eta_plus != 1.0 or params.eta_minus != 1.0 or params.gamma != 0.0):
        raise ConfigError("pure engine requires eta = 1 and gamma = 0")
    if engine not in ("pure", "mixed"):
        raise ConfigError(f"unknown engine {engine!r}")

    cutoff = params.cutoff_for(2)
    model = two_qubit_model(params, cutoff)
    space = model.space
    gen = _as_generator(rng)
    dt = pp.dt if pp.dt is not None else 1e-3 / params.kappa
    if observables is None:
        observables = two_qubit_observables(space, params.eta_plus, params.eta_minus)

    initial = two_qubit_initial(q, params, cutoff, displaced=False)
    state: PureState | MixedState = initial if engine == "pure" else initial.to_mixed()

    if pp.variant == VARIANT_TUNABLE:
        return _execute_tunable(q, pp, engine, model, state, gen, dt, observables, keep_states)

    alpha_in = math.sqrt(2.0) * params.alpha
    return_amp = -((-1.0) ** pp.k) * alpha_in * math.exp(-0.5 * params.kappa * pp.t_f)
    disp_in = sum_mode_displacement(space, alpha_in, params.truncation_tol)
    disp_out = sum_mode_displacement(space, return_amp, params.truncation_tol)

    def disp_merged():
        # counter-displacement and the next injection fused into one unitary;
        # it only ever acts on states within the sqrt(2)|alpha| reach, so the
        # displaced-vacuum adequacy check does not apply to the fused amplitude
        return sum_mode_displacement(space, alpha_in + return_amp, math.inf)

    trajs, offsets, iteration_records = [], [], []
    plus_angles: list[float] = []
    n_minus = 0
    p_now = q.p_odd
    iters = 0
    for i in range(max_reps):
        state = _apply_unitary(state, disp_in if i == 0 else disp_merged())
        traj = _run_segment(
            engine, model, state, params, gen, pp.t_f, dt, pp.sample_every, observables,
            keep_states, grid_t0=i * pp.t_f, include_final=False,
        )
        state = traj.final_state
        trajs.append(traj)
        offsets.append(i * pp.t_f)
        iteration_records.append(traj.record)
        plus_angles += [pp.interaction_angle(t) for t in traj.record.times(CHANNEL_PLUS)]
        n_minus += traj.record.n_minus
        iters = i + 1
        p_now = parity_weight_from_angles(q, plus_angles, n_minus)
        if p_now <= pp.projection_threshold or p_now >= 1.0 - pp.projection_threshold:
            break

    state = _apply_unitary(state, disp_out)
    if engine == "pure":
        pop = _resonator_population(state, space)
        if pop >= VACUUM_RETURN_TOL:
            raise ConsistencyError(
                f"resonators hold population {pop:.3e} after the return displacement"
            )

    # optional observation window past the last iteration (events there are
    # logged for plotting but do not enter the feedback phases)
    t_post = pp.observe_until - pp.t_f
    if t_post > 1e-12:
        traj = _run_segment(
            engine, model, state, params, gen, t_post, dt, pp.sample_every, observables,
            keep_states, grid_t0=iters * pp.t_f,
        )
        state = traj.final_state
        trajs.append(traj)
        offsets.append(iters * pp.t_f)

    return _finish(q, pp, engine, state, trajs, offsets, iteration_records, plus_angles, n_minus, iters, params)


def _execute_tunable(q, pp, engine, model, state, gen, dt, observables, keep_states):
    params = pp.system
    space = model.space
    model_off = two_qubit_model(params, space.dims[2], chi_on=False)
    alpha_in = math.sqrt(2.0) * params.alpha
    state = _apply_unitary(state, sum_mode_displacement(space, alpha_in, params.truncation_tol))

    trajs, offsets = [], []
    if pp.t_prime is None:
        schedule = [(0.0, model), (pp.t_off, model_off)]
        traj = _run_segment(
            engine, model, state, params, gen, pp.t_f, dt, pp.sample_every, observables,
            keep_states, schedule,
        )
        state = traj.final_state
        trajs.append(traj)
        offsets.append(0.0)
        iteration_records = [traj.record]
    else:
        t_restore = pp.t_prime + pp.t_off
        schedule = [(0.0, model), (pp.t_off, model_off), (pp.t_prime, model)]
        traj1 = _run_segment(
            engine, model, state, params, gen, t_restore, dt, pp.sample_every, observables,
            keep_states, schedule, include_final=False,
        )
        # both modes are back in a qubit-independent configuration: mode- in
        # vacuum, mode+ at -A(t_restore); one unconditioned displacement stops it
        amp = alpha_in * math.exp(-0.5 * params.kappa * t_restore)
        state = _apply_unitary(traj1.final_state, sum_mode_displacement(space, amp, params.truncation_tol))
        if engine == "pure":
            pop = _resonator_population(state, space)
            if pop >= VACUUM_RETURN_TOL:
                raise ConsistencyError(
                    f"resonators hold population {pop:.3e} after the restore displacement"
                )
        traj2 = _run_segment(
            engine, model_off, state, params, gen, pp.t_f - t_restore, dt, pp.sample_every,
            observables, keep_states, grid_t0=t_restore,
        )
        state = traj2.final_state
        trajs = [traj1, traj2]
        offsets = [0.0, t_restore]
        merged = tuple(traj1.record.events) + tuple(
            (t + t_restore, ch) for t, ch in traj2.record.events
        )
        iteration_records = [DetectionRecord(merged, final_time=pp.t_f)]

    rec = iteration_records[0]
    plus_angles = [pp.interaction_angle(t) for t in rec.times(CHANNEL_PLUS)]
    return _finish(q, pp, engine, state, trajs, offsets, iteration_records, plus_angles, rec.n_minus, 1, params)


def _finish(q, pp, engine, state, trajs, offsets, iteration_records, plus_angles, n_minus, iters, params):
    phi_plus = 2.0 * sum(plus_angles)
    phases = FeedbackPhases(phi_plus=phi_plus, phi_minus=math.pi * n_minus)
    state_fb = apply_feedback(state, phases)
    final_qubits = hb.reduced_state(state_fb, (0, 1))

    predicted = predicted_qubits_after_feedback(q, plus_angles, n_minus)
    fid = fidelity(final_qubits, predicted)
    if engine == "pure":
        p_minus1 = parity_weight_from_angles(q, plus_angles, n_minus)
    else:
        p_minus1 = expectation(final_qubits, ParityProjectors.build().odd)

    thr = pp.projection_threshold
    label = -1 if p_minus1 >= 1.0 - thr else (1 if p_minus1 <= thr else 0)

    all_events = []
    for traj, off in zip(trajs, offsets):
        all_events += [(t + off, ch) for t, ch in traj.record.events]
    record = DetectionRecord(tuple(all_events), final_time=offsets[-1] + trajs[-1].record.final_time)
    times, cols, states = _stitch(trajs, offsets)
    stitched = Trajectory(
        params=params,
        record=record,
        times=times,
        columns=cols,
        states=states,
        final_state=state,
        engine=engine,
    )
    return ProtocolOutcome(
        record=record,
        iteration_records=tuple(iteration_records),
        phases=phases,
        p_minus1=float(p_minus1),
        final_qubits=final_qubits,
        fidelity_to_prediction=float(fid),
        iterations_used=iters,
        label=label,
        trajectory=stitched,
    )


# ---------------------------------------------------------------------------
# protocol ensembles


@dataclass(frozen=True)
class ProtocolEnsemble:
    n: int
    times: np.ndarray
    means: dict
    stderrs: dict
    p_minus1: np.ndarray
    feedback_values: dict
    count_histogram: dict
    iterations: np.ndarray

    @property
    def mean_p_minus1(self) -> float:
        return float(self.p_minus1.mean())


def _protocol_worker(args):
    q, pp, engine, seed, stream, repeated, collect_columns = args
    run = run_protocol_repeated if repeated else run_protocol
    out = run(q, pp, engine, RngStream(seed, stream))
    fb = {name: expectation(out.final_qubits, op) for name, op in _STABILIZERS.items()}
    times = out.trajectory.times if collect_columns else None
    cols = out.trajectory.columns if collect_columns else None
    return (
        stream,
        times,
        cols,
        (out.record.n_plus, out.record.n_minus),
        out.p_minus1,
        fb,
        out.iterations_used,
    )


def run_protocol_ensemble(
    q: QubitAmplitudes,
    pp: ProtocolParams,
    engine: str,
    n: int,
    base_seed: int,
    repeated: bool = False,
    n_workers: int | None = None,
    collect_columns: bool | None = None,
) -> ProtocolEnsemble:
    """n independent protocol runs on per-stream rngs, merged in stream order.

    Repeated runs produce series of varying length, so per-sample column
    averaging is disabled for them unless requested.
    """
    if n < 1:
        raise ConfigError("ensemble size must be >= 1")
    if collect_columns is None:
        collect_columns = not repeated
    jobs = [(q, pp, engine, base_seed, i, repeated, collect_columns) for i in range(n)]
    results = {}
    if (n_workers is None or n_workers > 1) and n > 1:
        try:
            with ProcessPoolExecutor(max_workers=n_workers) as pool:
                for tup in pool.map(_protocol_worker, jobs, chunksize=max(1, n // 64)):
                    results[tup[0]] = tup[1:]
        except (OSError, PermissionError):
            results = {}
    if not results:
        for job in jobs:
            tup = _protocol_worker(job)
            results[tup[0]] = tup[1:]

    ordered = [results[i] for i in range(n)]
    times = ordered[0][0] if collect_columns else np.array([])
    means, stderrs = {}, {}
    if collect_columns:
        for name in ordered[0][1]:
            stack = np.stack([cols[name] for _, cols, *_ in ordered])
            means[name] = stack.mean(axis=0)
            stderrs[name] = (
                stack.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.zeros(stack.shape[1])
            )
    hist: dict[tuple[int, int], int] = {}
    for _, _, key, *_ in ordered:
        hist[key] = hist.get(key, 0) + 1
    p_vals = np.array([row[3] for row in ordered])
    fb_names = ordered[0][4].keys()
    fb = {name: np.array([row[4][name] for row in ordered]) for name in fb_names}
    iters = np.array([row[5] for row in ordered])
    return ProtocolEnsemble(
        n=n,
        times=times,
        means=means,
        stderrs=stderrs,
        p_minus1=p_vals,
        feedback_values=fb,
        count_histogram=hist,
        iterations=iters,
    )
