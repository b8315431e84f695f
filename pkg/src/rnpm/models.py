"""System models: Hamiltonians, detection channels, and initial states.

The two-qubit system is represented in the beam-splitter output basis
(qubit1, qubit2, sum mode, difference mode), where the photodetectors see
plain single-mode annihilation operators and the dispersive coupling reads

    H = (chi/2) [ (sz1 + sz2)(n+ + n-) + (sz1 - sz2)(c+^dag c- + c-^dag c+) ].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from . import hilbert as hb
from .errors import ConfigError
from .hilbert import HilbertSpace, Operator, PureState
from .params import CHANNEL_MINUS, CHANNEL_PLUS, CHANNEL_SINGLE, QubitAmplitudes, SystemParams


@dataclass(frozen=True)
class LindbladModel:
    """Deterministic master-equation model; collapse ops pre-scaled by sqrt(rate)."""

    hamiltonian: Operator
    collapse_ops: tuple[Operator, ...]

    def __post_init__(self):
        if not self.hamiltonian.hermitian:
            raise ConfigError("Hamiltonian must be Hermitian")
        for c in self.collapse_ops:
            if c.space.dims != self.space.dims:
                raise ConfigError("collapse operator dimension mismatch")
        object.__setattr__(self, "collapse_ops", tuple(self.collapse_ops))

    @property
    def space(self) -> HilbertSpace:
        return self.hamiltonian.space


@dataclass(frozen=True)
class MonitoredChannel:
    """A photodetector channel; `op` is pre-scaled by sqrt(eta * rate)."""

    label: str
    op: Operator


@dataclass(frozen=True)
class MonitoredModel:
    """Conditional-evolution model: detector channels plus unmonitored loss."""

    hamiltonian: Operator
    monitored: tuple[MonitoredChannel, ...]
    unmonitored: tuple[Operator, ...]
    # derived kernels / CSR forms, built once per model instance
    runtime_cache: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def space(self) -> HilbertSpace:
        return self.hamiltonian.space

    def lindblad(self) -> LindbladModel:
        """Unconditioned limit: every channel becomes an ordinary dissipator."""
        return LindbladModel(
            self.hamiltonian,
            tuple(ch.op for ch in self.monitored) + self.unmonitored,
        )

    def is_pure_compatible(self) -> bool:
        return not self.unmonitored

    # compiled kernels in the cache are not picklable; workers rebuild them
    def __getstate__(self):
        return (self.hamiltonian, self.monitored, self.unmonitored)

    def __setstate__(self, state):
        object.__setattr__(self, "hamiltonian", state[0])
        object.__setattr__(self, "monitored", state[1])
        object.__setattr__(self, "unmonitored", state[2])
        object.__setattr__(self, "runtime_cache", {})


def _csr(matrix) -> sp.csr_matrix:
    m = sp.csr_matrix(matrix)
    m.eliminate_zeros()
    m.sort_indices()
    return m.astype(np.complex128)


def pure_generator(model: MonitoredModel) -> sp.csr_matrix:
    """A = -i H_eff with H_eff = H - (i/2) sum m^dag m over monitored channels."""
    if not model.is_pure_compatible():
        raise ConfigError("pure-state engine requires eta = 1 and gamma = 0")
    a = _csr(model.hamiltonian.matrix)
    for ch in model.monitored:
        m = _csr(ch.op.matrix)
        a = a - 0.5j * (m.conj().T @ m)
    return _csr(-1j * a)


def mixed_generator(model: MonitoredModel) -> tuple[sp.csr_matrix, list[sp.csr_matrix]]:
    """(G, unmonitored ops) with G = iH + (1/2) sum_all c^dag c."""
    g = 1j * _csr(model.hamiltonian.matrix)
    for op in [ch.op for ch in model.monitored] + list(model.unmonitored):
        m = _csr(op.matrix)
        g = g + 0.5 * (m.conj().T @ m)
    return _csr(g), [_csr(u.matrix) for u in model.unmonitored]


# ---------------------------------------------------------------------------
# single qubit + resonator


def single_qubit_space(cutoff: int) -> HilbertSpace:
    return HilbertSpace((2, cutoff))


@lru_cache(maxsize=32)
def single_qubit_model(params: SystemParams, cutoff: int | None = None) -> MonitoredModel:
    cutoff = cutoff if cutoff is not None else params.cutoff_for(1)
    space = single_qubit_space(cutoff)
    sz_diag = np.diag(hb.embed(hb.sigma_z(), 0, space).matrix).real
    n_diag = np.diag(hb.embed(hb.fock_number(cutoff), 1, space).matrix).real
    a = hb.embed(hb.fock_annihilation(cutoff), 1, space)
    h = Operator(space, np.diag(params.chi * sz_diag * n_diag).astype(complex), hermitian=True)

    eta = params.eta_plus
    monitored = (MonitoredChannel(CHANNEL_SINGLE, _scaled(a, eta * params.kappa)),)
    unmonitored = []
    if eta < 1.0:
        unmonitored.append(_scaled(a, (1.0 - eta) * params.kappa))
    if params.gamma > 0.0:
        unmonitored.append(_scaled(hb.embed(hb.sigma_minus(), 0, space), params.gamma))
    return MonitoredModel(h, monitored, tuple(unmonitored))


def single_qubit_initial(
    q: QubitAmplitudes, params: SystemParams, cutoff: int | None = None, displaced: bool = True
) -> PureState:
    if q.n_qubits != 1:
        raise ConfigError("single-qubit amplitudes required")
    cutoff = cutoff if cutoff is not None else params.cutoff_for(1)
    qubit = PureState(HilbertSpace((2,)), q.vec)
    mode = (
        hb.coherent_state(params.alpha, cutoff, params.truncation_tol)
        if displaced
        else hb.vacuum(cutoff)
    )
    return hb.tensor_states(qubit, mode)


# ---------------------------------------------------------------------------
# two qubits + sum/difference modes


def two_qubit_space(cutoff: int) -> HilbertSpace:
    return HilbertSpace((2, 2, cutoff, cutoff))


def _scaled(op: Operator, rate: float) -> Operator:
    return Operator(op.space, math.sqrt(rate) * op.matrix)


def two_qubit_hamiltonian(space: HilbertSpace, chi: float) -> Operator:
    # all factors except the mode-exchange term are diagonal here, so the
    # products reduce to row scalings (the full dense matmul is ~1000x slower)
    cutoff = space.dims[2]
    sz1 = np.diag(hb.embed(hb.sigma_z(), 0, space).matrix).real
    sz2 = np.diag(hb.embed(hb.sigma_z(), 1, space).matrix).real
    np_ = np.diag(hb.embed(hb.fock_number(cutoff), 2, space).matrix).real
    nm = np.diag(hb.embed(hb.fock_number(cutoff), 3, space).matrix).real
    cp = _csr(hb.embed(hb.fock_annihilation(cutoff), 2, space).matrix)
    cm = _csr(hb.embed(hb.fock_annihilation(cutoff), 3, space).matrix)
    hop = (cp.conj().T @ cm + cm.conj().T @ cp).toarray()
    h = np.diag(0.5 * chi * (sz1 + sz2) * (np_ + nm)).astype(complex)
    h += (0.5 * chi * (sz1 - sz2))[:, None] * hop
    return Operator(space, h, hermitian=True)


@lru_cache(maxsize=32)
def two_qubit_model(
    params: SystemParams, cutoff: int | None = None, chi_on: bool = True
) -> MonitoredModel:
    cutoff = cutoff if cutoff is not None else params.cutoff_for(2)
    space = two_qubit_space(cutoff)
    chi = params.chi if chi_on else 0.0
    h = two_qubit_hamiltonian(space, chi)
    c_plus = hb.embed(hb.fock_annihilation(cutoff), 2, space)
    c_minus = hb.embed(hb.fock_annihilation(cutoff), 3, space)

    monitored = (
        MonitoredChannel(CHANNEL_PLUS, _scaled(c_plus, params.eta_plus * params.kappa)),
        MonitoredChannel(CHANNEL_MINUS, _scaled(c_minus, params.eta_minus * params.kappa)),
    )
    unmonitored = []
    if params.eta_plus < 1.0:
        unmonitored.append(_scaled(c_plus, (1.0 - params.eta_plus) * params.kappa))
    if params.eta_minus < 1.0:
        unmonitored.append(_scaled(c_minus, (1.0 - params.eta_minus) * params.kappa))
    if params.gamma > 0.0:
        for iq in (0, 1):
            unmonitored.append(_scaled(hb.embed(hb.sigma_minus(), iq, space), params.gamma))
    return MonitoredModel(h, monitored, tuple(unmonitored))


def two_qubit_local_lindblad(params: SystemParams, cutoff: int | None = None) -> LindbladModel:
    """Same physics in the local-mode basis (q1, q2, mode1, mode2); ME checks only."""
    cutoff = cutoff if cutoff is not None else params.cutoff_for(2)
    space = HilbertSpace((2, 2, cutoff, cutoff))
    sz1 = np.diag(hb.embed(hb.sigma_z(), 0, space).matrix).real
    sz2 = np.diag(hb.embed(hb.sigma_z(), 1, space).matrix).real
    n1 = np.diag(hb.embed(hb.fock_number(cutoff), 2, space).matrix).real
    n2 = np.diag(hb.embed(hb.fock_number(cutoff), 3, space).matrix).real
    h = Operator(space, np.diag(params.chi * (sz1 * n1 + sz2 * n2)).astype(complex), hermitian=True)
    a1 = _scaled(hb.embed(hb.fock_annihilation(cutoff), 2, space), params.kappa)
    a2 = _scaled(hb.embed(hb.fock_annihilation(cutoff), 3, space), params.kappa)
    ops = [a1, a2]
    if params.gamma > 0.0:
        ops += [
            _scaled(hb.embed(hb.sigma_minus(), iq, space), params.gamma) for iq in (0, 1)
        ]
    return LindbladModel(h, tuple(ops))


def local_annihilation_pair(space: HilbertSpace) -> tuple[Operator, Operator]:
    """a1, a2 = (c+ +- c-)/sqrt(2) expressed in the sum/difference basis."""
    cutoff = space.dims[2]
    cp = hb.embed(hb.fock_annihilation(cutoff), 2, space).matrix
    cm = hb.embed(hb.fock_annihilation(cutoff), 3, space).matrix
    inv = 1.0 / math.sqrt(2.0)
    return (
        Operator(space, inv * (cp + cm)),
        Operator(space, inv * (cp - cm)),
    )


def two_qubit_initial(
    q: QubitAmplitudes, params: SystemParams, cutoff: int | None = None, displaced: bool = True
) -> PureState:
    """Qubit pair (x) |sqrt(2) alpha>_+ (x) |0>_- (or both modes in vacuum)."""
    if q.n_qubits != 2:
        raise ConfigError("two-qubit amplitudes required")
    cutoff = cutoff if cutoff is not None else params.cutoff_for(2)
    qubits = PureState(HilbertSpace((2, 2)), q.vec)
    if displaced:
        plus = hb.coherent_state(math.sqrt(2.0) * params.alpha, cutoff, params.truncation_tol)
    else:
        plus = hb.vacuum(cutoff)
    return hb.tensor_states(qubits, plus, hb.vacuum(cutoff))


@lru_cache(maxsize=64)
def sum_mode_displacement(space: HilbertSpace, beta: complex, tail_tol: float) -> Operator:
    """D(beta) acting on the sum mode; equals D(beta/sqrt2) on each resonator."""
    return hb.embed(hb.displacement(beta, space.dims[2], tail_tol), 2, space)


def single_mode_displacement(space: HilbertSpace, beta: complex, tail_tol: float) -> Operator:
    return hb.embed(hb.displacement(beta, space.dims[1], tail_tol), 1, space)
