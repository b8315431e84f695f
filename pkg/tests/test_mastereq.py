import cmath
import math

import numpy as np
import pytest
from scipy.integrate import quad

from rnpm import analytic, hilbert as hb, metrics
from rnpm.errors import ConfigError, IntegratorError
from rnpm.mastereq import (
    IntegratorConfig,
    evolve,
    evolve_with_gaussian_drive,
    gaussian_drive_amplitude,
    lindblad_rhs,
)
from rnpm.models import (
    LindbladModel,
    local_annihilation_pair,
    single_qubit_initial,
    single_qubit_model,
    two_qubit_initial,
    two_qubit_local_lindblad,
    two_qubit_model,
)
from rnpm.params import QubitAmplitudes, SystemParams

P = SystemParams(chi=1.0, kappa=1.0, alpha=1.0, fock_cutoff=12)
QPLUS = QubitAmplitudes.single(1.0, 1.0)


def qubit_offdiag(state):
    """<e| tr_mode rho |g> of a qubit (x) mode density matrix."""
    rho_q = hb.partial_trace(state, (0,))
    return rho_q.matrix[1, 0]


def test_rhs_stationary_vacuum():
    model = single_qubit_model(P).lindblad()
    vac = hb.tensor_states(hb.qubit_state([0.6, 0.8]), hb.vacuum(12))
    rho = np.diag(np.diag(vac.to_mixed().matrix))  # diagonal qubit, vacuum mode
    out = lindblad_rhs(model, hb.MixedState(model.space, rho, normalized=False))
    assert np.max(np.abs(out)) < 1e-12


def test_rhs_photon_decay_law():
    cutoff = 12
    space = hb.HilbertSpace((2, cutoff))
    h0 = hb.Operator(space, np.zeros((space.dim, space.dim), dtype=complex), hermitian=True)
    a = hb.embed(hb.fock_annihilation(cutoff), 1, space)
    model = LindbladModel(h0, (a,))  # rate kappa = 1
    rho = hb.tensor_states(hb.qubit_state([1, 0]), hb.coherent_state(1.0, cutoff)).to_mixed()
    drho = lindblad_rhs(model, rho)
    n = hb.embed(hb.fock_number(cutoff), 1, space).matrix
    dn_dt = np.trace(n @ drho).real
    n0 = np.trace(n @ rho.matrix).real
    assert dn_dt == pytest.approx(-n0, rel=1e-10)


def test_rhs_traceless():
    model = single_qubit_model(P).lindblad()
    rng = np.random.default_rng(2)
    m = rng.normal(size=(24, 24)) + 1j * rng.normal(size=(24, 24))
    m = m @ m.conj().T
    m /= np.trace(m)
    out = lindblad_rhs(model, hb.MixedState(model.space, m))
    assert abs(np.trace(out)) < 1e-12


def test_evolve_matches_analytic_coherence():
    model = single_qubit_model(P).lindblad()
    init = single_qubit_initial(QPLUS, P).to_mixed()
    cfg = IntegratorConfig(dt=1e-3, t_end=3.0, sample_every=100)
    res = evolve(model, init, cfg)
    for t, st in zip(res.times, res.states):
        expected = analytic.offdiag_coherence(P, 0.5, t)
        assert abs(qubit_offdiag(st) - expected) < 1e-6


def test_evolve_long_time_bloch_components():
    model = single_qubit_model(P).lindblad()
    init = single_qubit_initial(QPLUS, P).to_mixed()
    cfg = IntegratorConfig(dt=1e-3, t_end=10.0, sample_every=1000)
    obs = metrics.single_qubit_observables(model.space)
    res = evolve(model, init, cfg, observables=obs)
    sx, sy = res.columns["sigma_x"][-1], res.columns["sigma_y"][-1]
    assert sx == pytest.approx(math.exp(-0.8) * math.cos(0.4), abs=1e-4)
    assert sy == pytest.approx(-math.exp(-0.8) * math.sin(0.4), abs=1e-4)


def test_evolve_trace_hermiticity_positivity():
    model = single_qubit_model(P).lindblad()
    init = single_qubit_initial(QPLUS, P).to_mixed()
    cfg = IntegratorConfig(dt=1e-3, t_end=4.0, sample_every=200)
    res = evolve(model, init, cfg)
    for st in res.states:
        assert abs(st.trace - 1.0) < 1e-8
        assert np.max(np.abs(st.matrix - st.matrix.conj().T)) < 1e-12
        assert st.min_eigenvalue() > -1e-8


def test_evolve_diagonal_populations_frozen():
    model = single_qubit_model(P).lindblad()
    init = single_qubit_initial(QubitAmplitudes.single(0.6, 0.8), P).to_mixed()
    cfg = IntegratorConfig(dt=1e-3, t_end=3.0, sample_every=300)
    res = evolve(model, init, cfg)
    pops0 = None
    for st in res.states:
        rho_q = hb.partial_trace(st, (0,))
        pops = np.diag(rho_q.matrix).real
        if pops0 is None:
            pops0 = pops
        assert np.max(np.abs(pops - pops0)) < 1e-8


def test_evolve_rk4_convergence_order():
    # cutoff 16 pushes the truncation floor below the time-stepping error
    p = P.with_(fock_cutoff=16)
    model = single_qubit_model(p, 16).lindblad()
    init = single_qubit_initial(QPLUS, p, 16).to_mixed()

    def max_err(dt):
        cfg = IntegratorConfig(dt=dt, t_end=1.0, sample_every=max(1, int(round(0.25 / dt))))
        res = evolve(model, init, cfg)
        return max(
            abs(qubit_offdiag(st) - analytic.offdiag_coherence(p, 0.5, t))
            for t, st in zip(res.times[1:], res.states[1:])
        )

    e1, e2 = max_err(1e-2), max_err(5e-3)
    assert 8.0 < e1 / e2 < 32.0  # fourth order: halving dt gains ~16x


def test_evolve_trace_drift_error():
    model = single_qubit_model(P).lindblad()
    init = single_qubit_initial(QPLUS, P).to_mixed()
    with pytest.raises(IntegratorError, match="dt"):
        evolve(model, init, IntegratorConfig(dt=0.8, t_end=8.0, sample_every=1))


def test_integrator_config_validation():
    with pytest.raises(ConfigError):
        IntegratorConfig(dt=0.0, t_end=1.0)
    with pytest.raises(ConfigError):
        IntegratorConfig(dt=0.1, t_end=0.0)
    cfg = IntegratorConfig(dt=5e-3, t_end=1.0)
    cfg.check_rates(1.0, 1.0, 0.0)
    with pytest.raises(ConfigError):
        cfg.check_rates(10.0, 1.0, 0.0)


def test_scattering_mode_equivalence():
    # collapse sets {c+, c-} and {a1, a2} generate identical unconditioned evolution
    p = P.with_(fock_cutoff=8, truncation_tol=5e-3)
    model_pm = two_qubit_model(p, 8).lindblad()
    space = model_pm.space
    a1, a2 = local_annihilation_pair(space)
    model_local = LindbladModel(model_pm.hamiltonian, (a1, a2))
    init = two_qubit_initial(QubitAmplitudes.uniform_pair(), p, 8).to_mixed()
    cfg = IntegratorConfig(dt=2e-3, t_end=1.0, sample_every=100)
    r1 = evolve(model_pm, init, cfg)
    r2 = evolve(model_local, init, cfg)
    for s1, s2 in zip(r1.states, r2.states):
        assert np.max(np.abs(s1.matrix - s2.matrix)) < 1e-10


def test_two_qubit_factorized_solution():
    # the unconditioned two-qubit state stays rho_1q (x) rho_1q in the local basis
    cutoff = 8
    p = P.with_(fock_cutoff=cutoff, truncation_tol=1e-3)
    q1 = QubitAmplitudes.single(1.0, 1.0)
    model_1q = single_qubit_model(p, cutoff).lindblad()
    init_1q = single_qubit_initial(q1, p, cutoff).to_mixed()
    cfg = IntegratorConfig(dt=2e-3, t_end=1.5, sample_every=150)
    res_1q = evolve(model_1q, init_1q, cfg)

    model_2q = two_qubit_local_lindblad(p, cutoff)
    init_2q = hb.tensor_mixed(init_1q, init_1q)
    # reorder (q1, m1, q2, m2) -> (q1, q2, m1, m2)
    perm = _permute_axes(init_2q.matrix, (2, cutoff, 2, cutoff), (0, 2, 1, 3))
    res_2q = evolve(model_2q, hb.MixedState(model_2q.space, perm), cfg)
    for s1, s2 in zip(res_1q.states, res_2q.states):
        prod = np.kron(s1.matrix, s1.matrix)
        prod = _permute_axes(prod, (2, cutoff, 2, cutoff), (0, 2, 1, 3))
        assert np.max(np.abs(prod - s2.matrix)) < 1e-6


def _permute_axes(matrix, dims, order):
    n = len(dims)
    t = matrix.reshape(tuple(dims) * 2)
    t = np.transpose(t, tuple(order) + tuple(o + n for o in order))
    d = int(np.prod(dims))
    return t.reshape(d, d)


def test_two_qubit_parity_expectation_invariant():
    p = P.with_(fock_cutoff=8, truncation_tol=5e-3)
    model = two_qubit_model(p, 8).lindblad()
    init = two_qubit_initial(QubitAmplitudes.pair(0.2, 0.5, 0.6, 0.6), p, 8).to_mixed()
    obs = metrics.two_qubit_observables(model.space)
    cfg = IntegratorConfig(dt=2e-3, t_end=2.0, sample_every=100)
    res = evolve(model, init, cfg, observables=obs)
    szz = res.columns["szz"]
    assert np.max(np.abs(szz - szz[0])) < 1e-8


# ---------------------------------------------------------------------------
# gaussian drive


def test_gaussian_pulse_area():
    t_d = 0.01
    area, _ = quad(lambda t: gaussian_drive_amplitude(1.0, t_d, t).imag, -5 * t_d, 5 * t_d)
    assert area == pytest.approx(1.0, abs=1e-6)
    re, _ = quad(lambda t: gaussian_drive_amplitude(1.0, t_d, t).real, -5 * t_d, 5 * t_d)
    assert abs(re) < 1e-12


def test_gaussian_drive_zero_alpha_matches_undriven():
    p = SystemParams(chi=1.0, kappa=1.0, alpha=0.0, fock_cutoff=8,
                     drive_model="gaussian", drive_width=0.01)
    model = single_qubit_model(p, 8).lindblad()
    init = hb.tensor_states(hb.qubit_state([1.0, 1.0]), hb.vacuum(8)).to_mixed()
    cfg = IntegratorConfig(dt=2e-4, t_end=0.05, sample_every=50, t_start=-0.05)
    driven = evolve_with_gaussian_drive(model, init, p, cfg)
    free = evolve(model, init, IntegratorConfig(dt=2e-4, t_end=0.1, sample_every=50))
    assert np.max(np.abs(driven.final_state.matrix - free.final_state.matrix)) < 1e-10


def test_gaussian_drive_reaches_displaced_state():
    t_d = 0.01
    p = SystemParams(chi=1.0, kappa=1.0, alpha=1.0, fock_cutoff=12,
                     drive_model="gaussian", drive_width=t_d)
    model = single_qubit_model(p, 12).lindblad()
    init = hb.tensor_states(hb.qubit_state([1.0, 1.0]), hb.vacuum(12)).to_mixed()
    cfg = IntegratorConfig(dt=t_d / 50.0, t_end=5 * t_d, sample_every=100, t_start=-5 * t_d)
    driven = evolve_with_gaussian_drive(model, init, p, cfg)

    # reference: instantaneous displacement at t = 0, then free decay to 5 T_d
    disp_init = single_qubit_initial(QPLUS, p, 12).to_mixed()
    ref = evolve(model, disp_init, IntegratorConfig(dt=t_d / 50.0, t_end=5 * t_d, sample_every=100))
    fid = metrics.fidelity(driven.final_state, ref.final_state)
    assert fid >= 1.0 - 1e-3

    # the resonator states of the two models agree; comparing against the
    # static |alpha> instead would be off by the decay and dispersive rotation
    # accumulated over the 5 T_d pulse window (~5e-2 in trace distance)
    mode_driven = hb.partial_trace(driven.final_state, (1,))
    mode_ref = hb.partial_trace(ref.final_state, (1,))
    assert metrics.fidelity(mode_driven, mode_ref) >= 1.0 - 1e-3
    diff = mode_driven.matrix - mode_ref.matrix
    trace_distance = 0.5 * np.sum(np.abs(np.linalg.eigvalsh(diff)))
    assert trace_distance < 1e-3
