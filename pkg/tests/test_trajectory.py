import math

import numpy as np
import pytest
from scipy.stats import kstest

from rnpm import analytic, hilbert as hb, metrics
from rnpm.errors import ConfigError
from rnpm.mastereq import IntegratorConfig, evolve
from rnpm.models import (
    single_qubit_initial,
    single_qubit_model,
    two_qubit_initial,
    two_qubit_model,
)
from rnpm.params import DetectionRecord, QubitAmplitudes, SystemParams
from rnpm.trajectory import (
    RngStream,
    run_ensemble,
    run_mixed_trajectory,
    run_pure_trajectory,
    sample_jump_channel,
)

P = SystemParams(chi=1.0, kappa=1.0, alpha=1.0)
QPLUS = QubitAmplitudes.single(1.0, 1.0)
QUNI = QubitAmplitudes.uniform_pair()


class QueueRng:
    """Deterministic stand-in for a Generator: .random() pops queued values."""

    def __init__(self, values):
        self.values = list(values)

    def random(self):
        return self.values.pop(0) if self.values else 0.5


def test_no_drive_means_no_jumps():
    p = P.with_(alpha=0.0, fock_cutoff=4)
    model = single_qubit_model(p, 4)
    init = single_qubit_initial(QPLUS, p, 4)
    traj = run_pure_trajectory(model, init, p, RngStream(0), 3.0, dt=1e-3,
                               sample_every=1000, keep_states=True)
    assert traj.record.events == ()
    for st in traj.states:
        assert abs(abs(st.overlap(init)) - 1.0) < 1e-10


def test_fixed_threshold_jump_time_matches_formula():
    # r = e^{-1/2} gives t_1 = ln 2 / kappa for one resonator at alpha = 1
    model = single_qubit_model(P, 14)
    init = single_qubit_initial(QPLUS, P, 14)
    # queued draws: threshold (r = e^{-1/2}), channel pick, next threshold r ~ 1e-6
    rng = QueueRng([1.0 - math.exp(-0.5), 0.1, 1.0 - 1e-6])
    traj = run_pure_trajectory(model, init, P, rng, 2.0, dt=1e-3, sample_every=2000)
    assert len(traj.record.events) == 1
    t1 = traj.record.events[0][0]
    assert abs(t1 - math.log(2.0)) < 1e-8


def test_trajectory_against_analytic_oracle_1q():
    cutoff = 18
    p = P.with_(fock_cutoff=cutoff)
    model = single_qubit_model(p, cutoff)
    init = single_qubit_initial(QPLUS, p, cutoff)
    for seed in (3, 5, 8):
        traj = run_pure_trajectory(model, init, p, RngStream(seed), 6.0, dt=1e-3,
                                   sample_every=400, keep_states=True)
        for t, st in zip(traj.times, traj.states):
            rec = DetectionRecord(
                tuple(e for e in traj.record.events if e[0] <= t), final_time=max(t, 1e-9)
            )
            oracle = analytic.analytic_trajectory_1q(p, QPLUS, rec, t, cutoff=cutoff)
            ov = np.vdot(oracle.amplitudes, st.amplitudes)
            assert np.linalg.norm(st.amplitudes - ov / abs(ov) * oracle.amplitudes) < 1e-6


def test_trajectory_against_analytic_oracle_2q():
    cutoff = 22
    p = P.with_(fock_cutoff=cutoff)
    model = two_qubit_model(p, cutoff)
    init = two_qubit_initial(QUNI, p, cutoff)
    found_minus = found_plus = False
    for seed in (1, 3, 5, 14, 15):  # seeds 14/15 realize minus-channel events
        traj = run_pure_trajectory(model, init, p, RngStream(seed), 3.0, dt=1e-3,
                                   sample_every=500, keep_states=True)
        found_minus |= traj.record.n_minus > 0
        found_plus |= traj.record.n_plus > 0
        for t, st in zip(traj.times, traj.states):
            rec = DetectionRecord(
                tuple(e for e in traj.record.events if e[0] <= t), final_time=max(t, 1e-9)
            )
            oracle = analytic.analytic_trajectory_2q(p, QUNI, rec, t, cutoff=cutoff)
            ov = np.vdot(oracle.amplitudes, st.amplitudes)
            assert np.linalg.norm(st.amplitudes - ov / abs(ov) * oracle.amplitudes) < 1e-6
    assert found_minus and found_plus  # the seed range exercises both channels


def test_norm_stays_unity_after_renormalization():
    model = single_qubit_model(P, 14)
    init = single_qubit_initial(QPLUS, P, 14)
    traj = run_pure_trajectory(model, init, P, RngStream(5), 8.0, dt=1e-3,
                               sample_every=100, keep_states=True)
    for st in traj.states:
        assert abs(st.norm_sq - 1.0) < 1e-10
        assert metrics.purity(st) == pytest.approx(1.0)


def test_sample_jump_channel_even_parity_never_clicks_minus():
    p = P.with_(fock_cutoff=14)
    q_even = QubitAmplitudes.pair(1.0, 0.0, 0.0, 1.0)
    st = analytic.analytic_trajectory_2q(p, q_even, DetectionRecord.empty(0.0), 0.5, cutoff=14)
    model = two_qubit_model(p, 14)
    ops = [ch.op for ch in model.monitored]
    for u in (0.01, 0.5, 0.99):
        assert sample_jump_channel(st, ops, QueueRng([u])) == 0


def test_sample_jump_channel_balanced():
    p = P.with_(fock_cutoff=14)
    st = analytic.analytic_trajectory_2q(
        p, QUNI, DetectionRecord.empty(0.0), math.pi / 4.0, cutoff=14
    )
    model = two_qubit_model(p, 14)
    ops = [ch.op for ch in model.monitored]
    w_plus = metrics.expectation(st, (ops[0].matrix.conj().T @ ops[0].matrix))
    w_minus = metrics.expectation(st, (ops[1].matrix.conj().T @ ops[1].matrix))
    frac = w_minus / (w_plus + w_minus)
    # channel draw splits the cumulative weight exactly at frac
    assert sample_jump_channel(st, ops, QueueRng([1.0 - frac - 1e-6])) == 0
    assert sample_jump_channel(st, ops, QueueRng([1.0 - frac + 1e-6])) == 1


def test_sample_jump_channel_odd_parity_quarter_period():
    # frozen coupling at chi t = pi/2: sum-mode amplitude cos factor vanishes
    p = P.with_(fock_cutoff=14)
    q_odd = QubitAmplitudes.pair(0.0, 1.0, 1.0, 0.0)
    angle = lambda s: p.chi * min(s, math.pi / 2.0)
    st = analytic.analytic_trajectory_2q(
        p, q_odd, DetectionRecord.empty(0.0), 2.0, cutoff=14, interaction_angle=angle
    )
    model = two_qubit_model(p, 14)
    ops = [ch.op for ch in model.monitored]
    for u in (0.001, 0.999):
        assert sample_jump_channel(st, ops, QueueRng([u])) == 1


def test_mixed_engine_matches_pure_at_unit_efficiency():
    cutoff = 12
    p = P.with_(fock_cutoff=cutoff, truncation_tol=1e-5)
    model = two_qubit_model(p, cutoff)
    init = two_qubit_initial(QUNI, p, cutoff)
    obs = metrics.two_qubit_observables(model.space)
    for seed in (1, 3):
        tp = run_pure_trajectory(model, init, p, RngStream(seed), 2.0, dt=2e-3,
                                 sample_every=100, observables=obs)
        tm = run_mixed_trajectory(model, init, p, RngStream(seed), 2.0, dt=2e-3,
                                  sample_every=100, observables=obs)
        assert len(tp.record.events) == len(tm.record.events)
        for (t1, c1), (t2, c2) in zip(tp.record.events, tm.record.events):
            assert c1 == c2 and abs(t1 - t2) < 1e-7
        for name in obs:
            assert np.max(np.abs(tp.columns[name] - tm.columns[name])) < 1e-6


def test_relaxation_only_matches_four_level_oracle():
    # alpha = 0 with gamma > 0: the resonators stay in vacuum and the parity
    # decay must match a resonator-free two-qubit amplitude-damping model
    gamma = 0.1 / math.pi
    p = P.with_(alpha=0.0, gamma=gamma, fock_cutoff=3)
    model = two_qubit_model(p, 3)
    init = two_qubit_initial(QUNI, p, 3)
    obs = metrics.two_qubit_observables(model.space)
    traj = run_mixed_trajectory(model, init, p, RngStream(0), 4.0, dt=2e-3,
                                sample_every=100, observables=obs)
    assert traj.record.events == ()

    # brute-force 4-dimensional Lindblad oracle integrated independently
    space_q = hb.HilbertSpace((2, 2))
    sm1 = hb.embed(hb.sigma_minus(), 0, space_q).matrix * math.sqrt(gamma)
    sm2 = hb.embed(hb.sigma_minus(), 1, space_q).matrix * math.sqrt(gamma)
    szz = hb.embed(hb.sigma_z(), 0, space_q).matrix @ hb.embed(hb.sigma_z(), 1, space_q).matrix
    rho = np.outer(QUNI.vec, QUNI.vec.conj())

    def rhs(r):
        out = np.zeros_like(r)
        for c in (sm1, sm2):
            cdc = c.conj().T @ c
            out += c @ r @ c.conj().T - 0.5 * (cdc @ r + r @ cdc)
        return out

    dt = 2e-3
    expected = [np.trace(szz @ rho).real]
    for i in range(2000):
        k1 = rhs(rho)
        k2 = rhs(rho + 0.5 * dt * k1)
        k3 = rhs(rho + 0.5 * dt * k2)
        k4 = rhs(rho + dt * k3)
        rho = rho + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if (i + 1) % 100 == 0:
            expected.append(np.trace(szz @ rho).real)
    got = traj.columns["szz"]
    assert np.max(np.abs(got - np.array(expected))) < 1e-8
    # both qubits decay toward |g>, so the parity grows as (1 - e^{-gamma t})^2
    assert got[-1] == pytest.approx((1.0 - math.exp(-gamma * 4.0)) ** 2, abs=1e-6)


def test_parity_conserved_along_trajectories_without_relaxation():
    p = P.with_(fock_cutoff=12, truncation_tol=1e-5, eta_plus=0.7, eta_minus=0.7)
    model = two_qubit_model(p, 12)
    init = two_qubit_initial(QubitAmplitudes.pair(1.0, 0.0, 0.0, 1.0), p, 12)
    obs = metrics.two_qubit_observables(model.space, 0.7, 0.7)
    traj = run_mixed_trajectory(model, init, p, RngStream(4), 2.0, dt=2e-3,
                                sample_every=100, observables=obs)
    assert np.max(np.abs(traj.columns["szz"] - 1.0)) < 1e-8
    assert np.max(np.abs(traj.columns["rate_minus"])) < 1e-10


def test_pure_engine_rejects_lossy_params():
    p = P.with_(eta_plus=0.9)
    with pytest.raises(ConfigError):
        run_pure_trajectory(two_qubit_model(P, 16), two_qubit_initial(QUNI, P, 16), p,
                            RngStream(0), 1.0)


def test_trajectory_determinism():
    model = single_qubit_model(P, 12)
    init = single_qubit_initial(QPLUS, P, 12)
    t1 = run_pure_trajectory(model, init, P, RngStream(42, 7), 5.0, dt=1e-3, sample_every=500)
    t2 = run_pure_trajectory(model, init, P, RngStream(42, 7), 5.0, dt=1e-3, sample_every=500)
    assert t1.record.events == t2.record.events
    assert np.array_equal(t1.final_state.amplitudes, t2.final_state.amplitudes)
    t3 = run_pure_trajectory(model, init, P, RngStream(42, 8), 5.0, dt=1e-3, sample_every=500)
    assert t1.record.events != t3.record.events or not np.array_equal(
        t1.final_state.amplitudes, t3.final_state.amplitudes
    )


def test_ensemble_single_trajectory_reduces_to_run():
    model = single_qubit_model(P, 12)
    init = single_qubit_initial(QPLUS, P, 12)
    obs = metrics.single_qubit_observables(model.space)
    stats = run_ensemble(model, init, P, 1, 99, 3.0, dt=1e-3, sample_every=300,
                         observables=obs, n_workers=1)
    traj = run_pure_trajectory(model, init, P, RngStream(99, 0), 3.0, dt=1e-3,
                               sample_every=300, observables=obs)
    for name in obs:
        assert np.array_equal(stats.means[name], traj.columns[name])
    assert stats.records[0].events == traj.record.events


def test_ensemble_mean_photodetections():
    model = two_qubit_model(P)
    init = two_qubit_initial(QUNI, P)
    stats = run_ensemble(model, init, P, 150, 2024, math.pi, dt=2e-3, sample_every=1600, q=QUNI)
    total = sum((kp + km) * c for (kp, km), c in stats.count_histogram.items()) / stats.n
    expected = 2.0 * (1.0 - math.exp(-math.pi))
    sigma = math.sqrt(expected / stats.n)  # Poisson-ish error on the mean
    assert abs(total - expected) < 4 * sigma
    assert 0.0 <= stats.p_minus1.min() and stats.p_minus1.max() <= 1.0


def test_ensemble_matches_master_equation():
    cutoff = 12
    model = single_qubit_model(P, cutoff)
    init = single_qubit_initial(QPLUS, P, cutoff)
    obs = metrics.single_qubit_observables(model.space)
    stats = run_ensemble(model, init, P, 300, 7, 3.0, dt=2e-3, sample_every=150,
                         observables=obs)
    me = evolve(single_qubit_model(P, cutoff).lindblad(), init.to_mixed(),
                IntegratorConfig(dt=2e-3, t_end=3.0, sample_every=150), observables=obs)
    for name in obs:
        gap = np.abs(stats.means[name] - me.columns[name])
        # the absolute floor covers the record-independent columns, whose
        # standard error vanishes and whose gap is set by the truncation tail
        allowed = 3.0 * stats.stderrs[name] + 1e-7
        assert np.all(gap <= allowed), f"{name}: worst z = {np.max(gap / allowed):.2f}"


def test_jump_times_reproduce_analytic_cdf():
    # first-jump times against the closed-form survival law (KS test)
    n = 5000
    t_end = 3.0
    model = single_qubit_model(P, 12)
    init = single_qubit_initial(QPLUS, P, 12)
    stats = run_ensemble(model, init, P, n, 31415, t_end, dt=2e-3, sample_every=3000)
    first = np.array([rec.events[0][0] for rec in stats.records if rec.events])
    assert len(first) > 0.5 * n

    def cdf(t):
        norm = 1.0 - math.exp(-(1.0 - math.exp(-t_end)))
        return (1.0 - np.exp(-(1.0 - np.exp(-np.asarray(t))))) / norm

    result = kstest(first, cdf)
    assert result.statistic < 0.03
