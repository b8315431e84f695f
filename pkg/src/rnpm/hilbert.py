"""Dense linear algebra over composite qubit/Fock Hilbert spaces.

Conventions used throughout the package:

* qubit basis order is (|g>, |e|), so sigma_z = diag(-1, +1);
* subsystem order is qubits first, then bosonic modes;
* all matrices are dense complex128 and immutable after construction.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import exp, lgamma, log

import numpy as np
from scipy.linalg import expm

from .errors import CutoffError, DimensionError

HERMITICITY_TOL = 1e-12
TRACE_TOL = 1e-10
NORM_TOL = 1e-12

#: Default bound on the discarded Poisson tail of a truncated coherent state.
COHERENT_TAIL_TOL = 1e-9


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr, dtype=np.complex128)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class HilbertSpace:
    """Ordered tensor product of finite-dimensional subsystems."""

    dims: tuple[int, ...]

    def __post_init__(self):
        if any(d < 2 for d in self.dims) or not self.dims:
            raise DimensionError(f"all subsystem dimensions must be >= 2, got {self.dims}")
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))

    @property
    def dim(self) -> int:
        return int(np.prod(self.dims))

    @property
    def n_subsystems(self) -> int:
        return len(self.dims)

    def basis_index(self, occupations) -> int:
        """Flat index of the product basis state |n_0 n_1 ...>."""
        if len(occupations) != len(self.dims):
            raise DimensionError("one occupation number per subsystem required")
        idx = 0
        for n, d in zip(occupations, self.dims):
            if not 0 <= n < d:
                raise DimensionError(f"occupation {n} outside [0, {d})")
            idx = idx * d + n
        return idx


@dataclass(frozen=True)
class Operator:
    space: HilbertSpace
    matrix: np.ndarray
    hermitian: bool = False

    def __post_init__(self):
        m = _freeze(self.matrix)
        if m.shape != (self.space.dim, self.space.dim):
            raise DimensionError(f"matrix shape {m.shape} does not match space dim {self.space.dim}")
        if self.hermitian and np.max(np.abs(m - m.conj().T)) >= HERMITICITY_TOL:
            raise DimensionError("operator tagged Hermitian is not Hermitian")
        object.__setattr__(self, "matrix", m)

    def dagger(self) -> "Operator":
        return Operator(self.space, self.matrix.conj().T, hermitian=self.hermitian)

    def __matmul__(self, other: "Operator") -> "Operator":
        if self.space.dims != other.space.dims:
            raise DimensionError("operator product across different spaces")
        return Operator(self.space, self.matrix @ other.matrix)

    def expectation(self, state: "PureState | MixedState") -> complex:
        if state.space.dims != self.space.dims:
            raise DimensionError("expectation across different spaces")
        if isinstance(state, PureState):
            return complex(np.vdot(state.amplitudes, self.matrix @ state.amplitudes))
        return complex(np.trace(self.matrix @ state.matrix))


@dataclass(frozen=True)
class PureState:
    space: HilbertSpace
    amplitudes: np.ndarray
    normalized: bool = True

    def __post_init__(self):
        v = _freeze(self.amplitudes)
        if v.shape != (self.space.dim,):
            raise DimensionError(f"amplitude shape {v.shape} does not match space dim {self.space.dim}")
        if self.normalized and abs(np.vdot(v, v).real - 1.0) >= NORM_TOL:
            raise DimensionError("state tagged normalized has |<psi|psi>| - 1 >= 1e-12")
        object.__setattr__(self, "amplitudes", v)

    @property
    def norm_sq(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def normalize(self) -> "PureState":
        return PureState(self.space, self.amplitudes / np.sqrt(self.norm_sq))

    def to_mixed(self) -> "MixedState":
        v = self.amplitudes
        return MixedState(self.space, np.outer(v, v.conj()))

    def overlap(self, other: "PureState") -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes))


@dataclass(frozen=True)
class MixedState:
    space: HilbertSpace
    matrix: np.ndarray
    normalized: bool = True

    def __post_init__(self):
        m = _freeze(self.matrix)
        if m.shape != (self.space.dim, self.space.dim):
            raise DimensionError(f"matrix shape {m.shape} does not match space dim {self.space.dim}")
        if np.max(np.abs(m - m.conj().T)) >= 1e-10:
            raise DimensionError("density matrix is not Hermitian within 1e-10")
        if self.normalized and abs(np.trace(m).real - 1.0) >= TRACE_TOL:
            raise DimensionError("density matrix trace differs from 1 by >= 1e-10")
        object.__setattr__(self, "matrix", m)

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.matrix)[0])


# ---------------------------------------------------------------------------
# constructors


def identity(space: HilbertSpace) -> Operator:
    return Operator(space, np.eye(space.dim), hermitian=True)


def fock_annihilation(cutoff: int) -> Operator:
    """Truncated bosonic a with <n-1|a|n> = sqrt(n); `cutoff` = kept levels."""
    if cutoff < 2:
        raise DimensionError(f"Fock cutoff must be >= 2, got {cutoff}")
    m = np.zeros((cutoff, cutoff), dtype=np.complex128)
    ns = np.arange(1, cutoff)
    m[ns - 1, ns] = np.sqrt(ns)
    return Operator(HilbertSpace((cutoff,)), m)


def fock_number(cutoff: int) -> Operator:
    a = fock_annihilation(cutoff)
    return Operator(a.space, a.matrix.conj().T @ a.matrix, hermitian=True)


def sigma_x() -> Operator:
    return Operator(HilbertSpace((2,)), np.array([[0, 1], [1, 0]], dtype=complex), hermitian=True)


def sigma_y() -> Operator:
    return Operator(HilbertSpace((2,)), np.array([[0, -1j], [1j, 0]], dtype=complex), hermitian=True)


def sigma_z() -> Operator:
    return Operator(HilbertSpace((2,)), np.diag([-1.0 + 0j, 1.0]), hermitian=True)


def sigma_minus() -> Operator:
    """|g><e| lowering operator in the (|g>, |e>) basis."""
    return Operator(HilbertSpace((2,)), np.array([[0, 1], [0, 0]], dtype=complex))


def phase_gate(phi: float) -> Operator:
    """R(phi) = e^{-i phi/2}|g><g| + e^{+i phi/2}|e><e|."""
    return Operator(HilbertSpace((2,)), np.diag([np.exp(-0.5j * phi), np.exp(0.5j * phi)]))


def qubit_state(amplitudes) -> PureState:
    v = np.asarray(amplitudes, dtype=np.complex128)
    n_qubits = int(round(log(v.size, 2)))
    if 2**n_qubits != v.size:
        raise DimensionError("qubit amplitude vector length must be a power of 2")
    return PureState(HilbertSpace((2,) * n_qubits), v / np.linalg.norm(v))


def coherent_tail(alpha_sq: float, cutoff: int) -> float:
    """Poisson weight P(N >= cutoff) discarded by truncating |alpha>."""
    if alpha_sq == 0.0:
        return 0.0
    # survival function computed stably in log space
    log_terms = [-alpha_sq + n * log(alpha_sq) - lgamma(n + 1) for n in range(cutoff, cutoff + 80)]
    return float(sum(exp(t) for t in log_terms))


@lru_cache(maxsize=256)
def required_cutoff(alpha_sq: float, tail_tol: float = COHERENT_TAIL_TOL) -> int:
    """Smallest number of Fock levels keeping the discarded tail below tol."""
    cutoff = 2
    while coherent_tail(alpha_sq, cutoff) >= tail_tol:
        cutoff += 1
    return cutoff


def _check_truncation(alpha: complex, cutoff: int, tail_tol: float) -> None:
    tail = coherent_tail(abs(alpha) ** 2, cutoff)
    if tail >= tail_tol:
        need = required_cutoff(abs(alpha) ** 2, tail_tol)
        raise CutoffError(
            f"cutoff {cutoff} keeps only 1 - {tail:.2e} of |alpha|^2 = {abs(alpha)**2:.4g}; "
            f"need cutoff >= {need} for tail < {tail_tol:.0e}",
            required_cutoff=need,
        )


def coherent_state(alpha: complex, cutoff: int, tail_tol: float = COHERENT_TAIL_TOL) -> PureState:
    """Truncated, renormalized coherent state |alpha>."""
    if cutoff < 2:
        raise DimensionError(f"Fock cutoff must be >= 2, got {cutoff}")
    _check_truncation(alpha, cutoff, tail_tol)
    v = np.zeros(cutoff, dtype=np.complex128)
    v[0] = 1.0
    for n in range(1, cutoff):
        v[n] = v[n - 1] * alpha / np.sqrt(n)
    v *= np.exp(-0.5 * abs(alpha) ** 2)
    v /= np.linalg.norm(v)
    return PureState(HilbertSpace((cutoff,)), v)


def displacement(alpha: complex, cutoff: int, tail_tol: float = COHERENT_TAIL_TOL) -> Operator:
    """D(alpha) = exp(alpha a^dag - alpha^* a), unitary within truncation."""
    if cutoff < 2:
        raise DimensionError(f"Fock cutoff must be >= 2, got {cutoff}")
    _check_truncation(alpha, cutoff, tail_tol)
    a = fock_annihilation(cutoff).matrix
    return Operator(HilbertSpace((cutoff,)), expm(alpha * a.conj().T - np.conj(alpha) * a))


def vacuum(cutoff: int) -> PureState:
    v = np.zeros(cutoff, dtype=np.complex128)
    v[0] = 1.0
    return PureState(HilbertSpace((cutoff,)), v)


# ---------------------------------------------------------------------------
# composition


def tensor_states(*states: PureState) -> PureState:
    v = states[0].amplitudes
    dims: tuple[int, ...] = states[0].space.dims
    for s in states[1:]:
        v = np.kron(v, s.amplitudes)
        dims = dims + s.space.dims
    return PureState(HilbertSpace(dims), v, normalized=all(s.normalized for s in states))


def tensor_mixed(*states: MixedState) -> MixedState:
    m = states[0].matrix
    dims: tuple[int, ...] = states[0].space.dims
    for s in states[1:]:
        m = np.kron(m, s.matrix)
        dims = dims + s.space.dims
    return MixedState(HilbertSpace(dims), m)


def tensor_ops(*ops: Operator) -> Operator:
    m = ops[0].matrix
    dims: tuple[int, ...] = ops[0].space.dims
    for o in ops[1:]:
        m = np.kron(m, o.matrix)
        dims = dims + o.space.dims
    return Operator(HilbertSpace(dims), m, hermitian=all(o.hermitian for o in ops))


def embed(op: Operator, subsystem: int, space: HilbertSpace) -> Operator:
    """Lift a single-subsystem operator to the full space (identity elsewhere)."""
    if not 0 <= subsystem < space.n_subsystems:
        raise DimensionError(f"subsystem index {subsystem} out of range for {space.dims}")
    if op.space.dim != space.dims[subsystem]:
        raise DimensionError(
            f"operator dim {op.space.dim} does not match subsystem dim {space.dims[subsystem]}"
        )
    m = np.eye(1, dtype=np.complex128)
    for i, d in enumerate(space.dims):
        m = np.kron(m, op.matrix if i == subsystem else np.eye(d))
    return Operator(space, m, hermitian=op.hermitian)


def partial_trace(state: MixedState, keep) -> MixedState:
    """Reduced density matrix over the `keep` subsystems (order preserved)."""
    keep = tuple(keep)
    dims = state.space.dims
    n = len(dims)
    if len(set(keep)) != len(keep) or any(not 0 <= k < n for k in keep):
        raise DimensionError(f"invalid keep indices {keep} for {dims}")
    t = state.matrix.reshape(dims + dims)
    removed = 0
    for i in sorted((i for i in range(n) if i not in keep), reverse=True):
        # row axis i pairs with column axis i + (n - removed) in the shrinking tensor
        t = np.trace(t, axis1=i, axis2=i + n - removed)
        removed += 1
    kept_sorted = sorted(keep)
    k = len(keep)
    if list(keep) != kept_sorted:
        pos = [kept_sorted.index(i) for i in keep]
        t = np.transpose(t, pos + [p + k for p in pos])
    d_keep = int(np.prod([dims[i] for i in keep]))
    m = t.reshape(d_keep, d_keep)
    m = 0.5 * (m + m.conj().T)
    return MixedState(HilbertSpace(tuple(dims[i] for i in keep)), m, normalized=state.normalized)


def reduced_state(state: PureState | MixedState, keep) -> MixedState:
    if isinstance(state, PureState):
        # contract the traced subsystems directly; forming the full density
        # matrix first costs O(dim^2) memory for an O(dim) job
        keep = tuple(keep)
        dims = state.space.dims
        n = len(dims)
        if len(set(keep)) != len(keep) or any(not 0 <= k < n for k in keep):
            raise DimensionError(f"invalid keep indices {keep} for {dims}")
        rest = [i for i in range(n) if i not in keep]
        v = state.amplitudes.reshape(dims).transpose(list(keep) + rest)
        d_keep = int(np.prod([dims[i] for i in keep]))
        v = v.reshape(d_keep, -1)
        m = v @ v.conj().T
        m = 0.5 * (m + m.conj().T)
        return MixedState(
            HilbertSpace(tuple(dims[i] for i in keep)), m, normalized=state.normalized
        )
    return partial_trace(state, keep)
