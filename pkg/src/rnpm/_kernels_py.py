"""Reference numpy/scipy kernels for the RK4 inner loops.

These are the fallback implementations; `rnpm._kernels_cy` provides the
compiled equivalents with identical semantics.  Small systems run on dense
matrices (lower call overhead), large ones on CSR.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

BACKEND_NAME = "python"

_DENSE_MAX_DIM = 192

STATUS_OK = 0
STATUS_CROSSED = 1
STATUS_INCREASED = 2

_NORM_GROWTH_TOL = 1e-10


def _maybe_dense(mat: sp.csr_matrix):
    if mat.shape[0] <= _DENSE_MAX_DIM:
        return np.ascontiguousarray(mat.toarray())
    return mat


class PureKernel:
    """Fixed-step RK4 for d psi / dt = A psi with A = -i * H_eff."""

    def __init__(self, a_csr: sp.csr_matrix):
        self._a = _maybe_dense(a_csr.astype(np.complex128))

    def step(self, psi: np.ndarray, h: float) -> np.ndarray:
        a = self._a
        k1 = a @ psi
        k2 = a @ (psi + (0.5 * h) * k1)
        k3 = a @ (psi + (0.5 * h) * k2)
        k4 = a @ (psi + h * k3)
        return psi + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    def advance(self, psi: np.ndarray, h: float, n_steps: int, threshold: float):
        """March up to n_steps; stop just before the squared norm crosses threshold.

        Returns (state, steps_done, status); on STATUS_CROSSED the state is the
        one *preceding* the crossing step.
        """
        cur = psi
        val = float(np.vdot(cur, cur).real)
        for i in range(n_steps):
            nxt = self.step(cur, h)
            nval = float(np.vdot(nxt, nxt).real)
            if nval > val * (1.0 + _NORM_GROWTH_TOL) + 1e-300:
                return cur, i, STATUS_INCREASED
            if nval < threshold:
                return cur, i, STATUS_CROSSED
            cur, val = nxt, nval
        return cur, n_steps, STATUS_OK


class MixedKernel:
    """Fixed-step RK4 for the unnormalized conditional density matrix.

    rhs(rho) = -(G rho + (G rho)^dag) + sum_u u (u rho)^dag
    with G = i H + (1/2) sum_all c^dag c; monitored channels contribute only
    their anticommutator sink, so the trace decays by exactly the monitored
    photon flux between jumps.
    """

    def __init__(self, g_csr: sp.csr_matrix, unmonitored: list[sp.csr_matrix], hermitize: bool = True):
        self._g = _maybe_dense(g_csr.astype(np.complex128))
        self._u = [_maybe_dense(u.astype(np.complex128)) for u in unmonitored]
        self._hermitize = hermitize

    def rhs(self, rho: np.ndarray) -> np.ndarray:
        t = self._g @ rho
        out = -(t + t.conj().T)
        for u in self._u:
            b = u @ rho
            out += u @ b.conj().T
        return out

    def step(self, rho: np.ndarray, h: float) -> np.ndarray:
        k1 = self.rhs(rho)
        k2 = self.rhs(rho + (0.5 * h) * k1)
        k3 = self.rhs(rho + (0.5 * h) * k2)
        k4 = self.rhs(rho + h * k3)
        out = rho + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if self._hermitize:
            out = 0.5 * (out + out.conj().T)
        return out

    def advance(self, rho: np.ndarray, h: float, n_steps: int, threshold: float):
        """Like PureKernel.advance with the trace as the monitored value."""
        cur = rho
        val = float(np.trace(cur).real)
        for i in range(n_steps):
            nxt = self.step(cur, h)
            nval = float(np.trace(nxt).real)
            if nval > val * (1.0 + _NORM_GROWTH_TOL) + 1e-300:
                return cur, i, STATUS_INCREASED
            if nval < threshold:
                return cur, i, STATUS_CROSSED
            cur, val = nxt, nval
        return cur, n_steps, STATUS_OK


def make_pure_kernel(a_csr) -> PureKernel:
    return PureKernel(a_csr)


def make_mixed_kernel(g_csr, unmonitored, hermitize: bool = True) -> MixedKernel:
    return MixedKernel(g_csr, unmonitored, hermitize)
