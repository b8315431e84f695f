"""Observables, diagnostics, and ensemble statistics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from . import hilbert as hb
from .errors import ConfigError, DimensionError
from .hilbert import HilbertSpace, MixedState, Operator, PureState, reduced_state
from .params import DetectionRecord

IMAG_RESIDUE_TOL = 1e-10


@dataclass(frozen=True)
class TimeSeries:
    """Sampled real-valued observable columns over a common time grid (1/kappa units)."""

    times: np.ndarray
    columns: dict
    events: DetectionRecord | None = None

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        cols = {k: np.asarray(v, dtype=float) for k, v in self.columns.items()}
        for name, col in cols.items():
            if col.shape != t.shape:
                raise ConfigError(f"column {name!r} length {col.shape} != times {t.shape}")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "columns", cols)

    def column(self, name: str) -> np.ndarray:
        if name not in self.columns:
            raise ConfigError(f"no column named {name!r}; have {sorted(self.columns)}")
        return self.columns[name]


@dataclass(frozen=True)
class EnsembleStats:
    """Per-sample means and standard errors over independent trajectories."""

    n: int
    times: np.ndarray
    means: dict
    stderrs: dict
    count_histogram: dict = field(default_factory=dict)
    p_minus1: np.ndarray | None = None
    records: tuple = ()

    def mean(self, name: str) -> np.ndarray:
        return self.means[name]

    def stderr(self, name: str) -> np.ndarray:
        return self.stderrs[name]


def expectation(state: PureState | MixedState, op) -> float:
    """Real expectation value; asserts the imaginary residue is numerical noise."""
    m = op.matrix if isinstance(op, Operator) else op
    if isinstance(state, PureState):
        val = complex(np.vdot(state.amplitudes, m @ state.amplitudes))
    elif sp.issparse(m):
        val = complex((m @ state.matrix).trace())
    else:
        val = complex(np.trace(m @ state.matrix))
    if abs(val.imag) > IMAG_RESIDUE_TOL * max(1.0, abs(val.real)):
        raise ConfigError(f"expectation of a non-Hermitian observable: imag = {val.imag:.3e}")
    return val.real


# ---------------------------------------------------------------------------
# observable operator sets (CSR matrices keyed by column name; all are sparse
# in the product basis, and the engines evaluate them at every sample)


@lru_cache(maxsize=16)
def single_qubit_observables(space: HilbertSpace) -> dict:
    """Raw operators behind the Fig-2 columns; <n> is recorded, sqrt applied later."""
    if len(space.dims) != 2 or space.dims[0] != 2:
        raise DimensionError("expected qubit (x) mode space")
    cutoff = space.dims[1]
    a = hb.embed(hb.fock_annihilation(cutoff), 1, space).matrix
    sz = np.diag(hb.embed(hb.sigma_z(), 0, space).matrix).real
    quad_p = 0.5j * (a.conj().T - a)
    return {
        "n": sp.csr_matrix(a.conj().T @ a),
        "quad_x": sp.csr_matrix(0.5 * (a.conj().T + a)),
        # joint correlator -<sigma_z (x) i(a^dag - a)/2>; each factor alone averages to zero
        "quad_p_msz": sp.csr_matrix(-sz[:, None] * quad_p),
        "sigma_x": sp.csr_matrix(hb.embed(hb.sigma_x(), 0, space).matrix),
        "sigma_y": sp.csr_matrix(hb.embed(hb.sigma_y(), 0, space).matrix),
    }


@lru_cache(maxsize=16)
def two_qubit_observables(space: HilbertSpace, eta_plus: float = 1.0, eta_minus: float = 1.0) -> dict:
    """Fig-4 columns: detection rates in units of kappa, and the Bell stabilizers."""
    if len(space.dims) != 4 or space.dims[0] != 2 or space.dims[1] != 2:
        raise DimensionError("expected q1 (x) q2 (x) mode+ (x) mode- space")
    cutoff = space.dims[2]
    eye_f = np.eye(cutoff)
    n_plus = hb.embed(hb.fock_number(cutoff), 2, space).matrix
    n_minus = hb.embed(hb.fock_number(cutoff), 3, space).matrix
    out = {
        "rate_plus": sp.csr_matrix(eta_plus * n_plus),
        "rate_minus": sp.csr_matrix(eta_minus * n_minus),
    }
    for name, op in (("sxx", hb.sigma_x()), ("syy", hb.sigma_y()), ("szz", hb.sigma_z())):
        m = np.kron(np.kron(op.matrix, op.matrix), np.kron(eye_f, eye_f))
        out[name] = sp.csr_matrix(m)
    return out


def observable_set_1q(state: PureState | MixedState) -> dict:
    ops = single_qubit_observables(state.space)
    row = {k: expectation(state, m) for k, m in ops.items()}
    row["sqrt_n"] = math.sqrt(max(row.pop("n"), 0.0))
    return row


def observable_set_2q(state: PureState | MixedState, eta_plus: float = 1.0, eta_minus: float = 1.0) -> dict:
    ops = two_qubit_observables(state.space, eta_plus, eta_minus)
    return {k: expectation(state, m) for k, m in ops.items()}


# ---------------------------------------------------------------------------
# diagnostics


def purity(state: PureState | MixedState) -> float:
    if isinstance(state, PureState):
        n = state.norm_sq
        return n * n if not state.normalized else 1.0
    m = state.matrix
    return float(np.einsum("ij,ji->", m, m).real)


def entanglement_entropy(state: PureState | MixedState, cut) -> float:
    """Von Neumann entropy (base 2) of the reduced state over subsystems `cut`."""
    red = reduced_state(state, tuple(cut))
    evals = np.linalg.eigvalsh(red.matrix)
    evals = np.clip(evals.real, 1e-30, None)
    return float(-np.sum(evals * np.log2(evals)))


def fidelity(state: PureState | MixedState, reference: PureState | MixedState) -> float:
    """Uhlmann fidelity, squared-overlap convention: F(psi, phi) = |<psi|phi>|^2."""
    if state.space.dims != reference.space.dims:
        raise DimensionError("fidelity across different spaces")
    if isinstance(state, PureState) and isinstance(reference, PureState):
        return float(abs(np.vdot(state.amplitudes, reference.amplitudes)) ** 2)
    if isinstance(state, PureState):
        v = state.amplitudes
        return float(np.vdot(v, reference.matrix @ v).real)
    if isinstance(reference, PureState):
        v = reference.amplitudes
        return float(np.vdot(v, state.matrix @ v).real)
    evals, vecs = np.linalg.eigh(state.matrix)
    evals = np.clip(evals, 0.0, None)
    sqrt_rho = (vecs * np.sqrt(evals)) @ vecs.conj().T
    inner = sqrt_rho @ reference.matrix @ sqrt_rho
    w = np.clip(np.linalg.eigvalsh(inner), 0.0, None)
    return float(np.sum(np.sqrt(w)) ** 2)
