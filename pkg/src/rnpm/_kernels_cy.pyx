# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled RK4 kernels: CSR matvec/matmul inner loops fused in C.

Mirrors rnpm._kernels_py exactly (same classes, same advance semantics).
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND_NAME = "cython"

STATUS_OK = 0
STATUS_CROSSED = 1
STATUS_INCREASED = 2

DEF NORM_GROWTH_TOL = 1e-10


def _writable(arr, int ndim):
    out = np.ascontiguousarray(arr, dtype=np.complex128)
    if not out.flags.writeable:
        out = out.copy()
    return out


cdef void _csr_matvec(
    const double complex[::1] data,
    const int[::1] indices,
    const int[::1] indptr,
    const double complex[::1] x,
    double complex[::1] out,
) noexcept nogil:
    cdef Py_ssize_t i, j, n = out.shape[0]
    cdef double complex acc
    for i in range(n):
        acc = 0
        for j in range(indptr[i], indptr[i + 1]):
            acc = acc + data[j] * x[indices[j]]
        out[i] = acc


cdef void _csr_matmul(
    const double complex[::1] data,
    const int[::1] indices,
    const int[::1] indptr,
    const double complex[:, ::1] b,
    double complex[:, ::1] out,
) noexcept nogil:
    # out = A @ b with A in CSR; row-major accumulation keeps b rows hot
    cdef Py_ssize_t i, j, k, n = out.shape[0], m = out.shape[1]
    cdef double complex a
    for i in range(n):
        for k in range(m):
            out[i, k] = 0
        for j in range(indptr[i], indptr[i + 1]):
            a = data[j]
            for k in range(m):
                out[i, k] = out[i, k] + a * b[indices[j], k]


cdef double _norm_sq(const double complex[::1] x) noexcept nogil:
    cdef Py_ssize_t i
    cdef double s = 0
    for i in range(x.shape[0]):
        s += x[i].real * x[i].real + x[i].imag * x[i].imag
    return s


cdef double _trace_real(const double complex[:, ::1] m) noexcept nogil:
    cdef Py_ssize_t i
    cdef double s = 0
    for i in range(m.shape[0]):
        s += m[i, i].real
    return s


DEF TILE = 64


cdef void _neg_plus_dagger(const double complex[:, ::1] t, double complex[:, ::1] out) noexcept nogil:
    # out = -(t + t^H), tiled for the transposed reads
    cdef Py_ssize_t n = t.shape[0], bi, bj, i, j, i1, j1
    for bi in range(0, n, TILE):
        i1 = min(bi + TILE, n)
        for bj in range(0, n, TILE):
            j1 = min(bj + TILE, n)
            for i in range(bi, i1):
                for j in range(bj, j1):
                    out[i, j] = -t[i, j] - t[j, i].conjugate()


cdef void _conj_transpose(const double complex[:, ::1] t, double complex[:, ::1] out) noexcept nogil:
    cdef Py_ssize_t n = t.shape[0], bi, bj, i, j, i1, j1
    for bi in range(0, n, TILE):
        i1 = min(bi + TILE, n)
        for bj in range(0, n, TILE):
            j1 = min(bj + TILE, n)
            for i in range(bi, i1):
                for j in range(bj, j1):
                    out[i, j] = t[j, i].conjugate()


cdef class PureKernel:
    """RK4 for d psi / dt = A psi, A = -i H_eff in CSR form."""

    cdef double complex[::1] data
    cdef int[::1] indices
    cdef int[::1] indptr
    cdef Py_ssize_t n

    def __init__(self, a_csr):
        a = a_csr.tocsr().astype(np.complex128)
        a.sort_indices()
        self.data = np.ascontiguousarray(a.data, dtype=np.complex128)
        self.indices = np.ascontiguousarray(a.indices, dtype=np.int32)
        self.indptr = np.ascontiguousarray(a.indptr, dtype=np.int32)
        self.n = a.shape[0]

    cdef void _step_into(self, const double complex[::1] psi, double h, double complex[::1] out,
                         double complex[::1] k, double complex[::1] tmp) noexcept nogil:
        cdef Py_ssize_t i, n = self.n
        cdef double h2 = 0.5 * h, h6 = h / 6.0
        # k1
        _csr_matvec(self.data, self.indices, self.indptr, psi, k)
        for i in range(n):
            out[i] = psi[i] + h6 * k[i]
            tmp[i] = psi[i] + h2 * k[i]
        # k2
        _csr_matvec(self.data, self.indices, self.indptr, tmp, k)
        for i in range(n):
            out[i] = out[i] + 2 * h6 * k[i]
            tmp[i] = psi[i] + h2 * k[i]
        # k3
        _csr_matvec(self.data, self.indices, self.indptr, tmp, k)
        for i in range(n):
            out[i] = out[i] + 2 * h6 * k[i]
            tmp[i] = psi[i] + h * k[i]
        # k4
        _csr_matvec(self.data, self.indices, self.indptr, tmp, k)
        for i in range(n):
            out[i] = out[i] + h6 * k[i]

    def step(self, psi, double h):
        cdef cnp.ndarray[cnp.complex128_t, ndim=1] x = _writable(psi, 1)
        cdef cnp.ndarray[cnp.complex128_t, ndim=1] out = np.empty(self.n, dtype=np.complex128)
        cdef cnp.ndarray[cnp.complex128_t, ndim=1] k = np.empty(self.n, dtype=np.complex128)
        cdef cnp.ndarray[cnp.complex128_t, ndim=1] tmp = np.empty(self.n, dtype=np.complex128)
        self._step_into(x, h, out, k, tmp)
        return out

    def advance(self, psi, double h, Py_ssize_t n_steps, double threshold):
        cdef cnp.ndarray[cnp.complex128_t, ndim=1] a_buf = np.array(psi, dtype=np.complex128, copy=True)
        cdef cnp.ndarray[cnp.complex128_t, ndim=1] b_buf = np.empty(self.n, dtype=np.complex128)
        cdef cnp.ndarray[cnp.complex128_t, ndim=1] k = np.empty(self.n, dtype=np.complex128)
        cdef cnp.ndarray[cnp.complex128_t, ndim=1] tmp = np.empty(self.n, dtype=np.complex128)
        cdef double complex[::1] cur_v = a_buf
        cdef double complex[::1] nxt_v = b_buf
        cdef double complex[::1] k_v = k
        cdef double complex[::1] tmp_v = tmp
        cdef double complex[::1] swap
        cdef double val, nval
        cdef Py_ssize_t i
        cdef bint in_a = True
        val = _norm_sq(cur_v)
        for i in range(n_steps):
            self._step_into(cur_v, h, nxt_v, k_v, tmp_v)
            nval = _norm_sq(nxt_v)
            if nval > val * (1.0 + NORM_GROWTH_TOL) + 1e-300:
                return (a_buf if in_a else b_buf), i, STATUS_INCREASED
            if nval < threshold:
                return (a_buf if in_a else b_buf), i, STATUS_CROSSED
            swap = cur_v
            cur_v = nxt_v
            nxt_v = swap
            in_a = not in_a
            val = nval
        return (a_buf if in_a else b_buf), n_steps, STATUS_OK


cdef class MixedKernel:
    """RK4 for the unnormalized conditional density matrix (see python backend)."""

    cdef double complex[::1] g_data
    cdef int[::1] g_indices
    cdef int[::1] g_indptr
    cdef list u_csr
    cdef Py_ssize_t n
    cdef bint hermitize

    def __init__(self, g_csr, unmonitored, bint hermitize=True):
        g = g_csr.tocsr().astype(np.complex128)
        g.sort_indices()
        self.g_data = np.ascontiguousarray(g.data, dtype=np.complex128)
        self.g_indices = np.ascontiguousarray(g.indices, dtype=np.int32)
        self.g_indptr = np.ascontiguousarray(g.indptr, dtype=np.int32)
        self.n = g.shape[0]
        self.u_csr = []
        for u in unmonitored:
            uc = u.tocsr().astype(np.complex128)
            uc.sort_indices()
            self.u_csr.append(
                (
                    np.ascontiguousarray(uc.data, dtype=np.complex128),
                    np.ascontiguousarray(uc.indices, dtype=np.int32),
                    np.ascontiguousarray(uc.indptr, dtype=np.int32),
                )
            )
        self.hermitize = hermitize

    cdef void _rhs(self, double complex[:, ::1] rho, double complex[:, ::1] out,
                   double complex[:, ::1] t1, double complex[:, ::1] t2):
        cdef Py_ssize_t i, j, n = self.n
        cdef double complex[::1] ud
        cdef int[::1] ui, up
        # drift/sink: out = -(G rho + (G rho)^H)
        _csr_matmul(self.g_data, self.g_indices, self.g_indptr, rho, t1)
        _neg_plus_dagger(t1, out)
        # refill: out += u (u rho)^H for each unmonitored channel
        for tup in self.u_csr:
            ud = tup[0]
            ui = tup[1]
            up = tup[2]
            _csr_matmul(ud, ui, up, rho, t1)
            _conj_transpose(t1, t2)
            _csr_matmul(ud, ui, up, t2, t1)
            for i in range(n):
                for j in range(n):
                    out[i, j] = out[i, j] + t1[i, j]

    cdef void _step_into(self, double complex[:, ::1] rho, double h, double complex[:, ::1] out,
                         double complex[:, ::1] k, double complex[:, ::1] stage,
                         double complex[:, ::1] t1, double complex[:, ::1] t2):
        cdef Py_ssize_t i, j, n = self.n
        cdef double h2 = 0.5 * h, h6 = h / 6.0
        cdef double complex tmp
        self._rhs(rho, k, t1, t2)
        for i in range(n):
            for j in range(n):
                out[i, j] = rho[i, j] + h6 * k[i, j]
                stage[i, j] = rho[i, j] + h2 * k[i, j]
        self._rhs(stage, k, t1, t2)
        for i in range(n):
            for j in range(n):
                out[i, j] = out[i, j] + 2 * h6 * k[i, j]
                stage[i, j] = rho[i, j] + h2 * k[i, j]
        self._rhs(stage, k, t1, t2)
        for i in range(n):
            for j in range(n):
                out[i, j] = out[i, j] + 2 * h6 * k[i, j]
                stage[i, j] = rho[i, j] + h * k[i, j]
        self._rhs(stage, k, t1, t2)
        for i in range(n):
            for j in range(n):
                out[i, j] = out[i, j] + h6 * k[i, j]
        if self.hermitize:
            for i in range(n):
                for j in range(i, n):
                    tmp = 0.5 * (out[i, j] + out[j, i].conjugate())
                    out[i, j] = tmp
                    out[j, i] = tmp.conjugate()

    def rhs(self, rho):
        cdef cnp.ndarray[cnp.complex128_t, ndim=2] r = _writable(rho, 2)
        out = np.empty((self.n, self.n), dtype=np.complex128)
        t1 = np.empty((self.n, self.n), dtype=np.complex128)
        t2 = np.empty((self.n, self.n), dtype=np.complex128)
        self._rhs(r, out, t1, t2)
        return out

    def step(self, rho, double h):
        cdef cnp.ndarray[cnp.complex128_t, ndim=2] r = _writable(rho, 2)
        out = np.empty((self.n, self.n), dtype=np.complex128)
        k = np.empty((self.n, self.n), dtype=np.complex128)
        stage = np.empty((self.n, self.n), dtype=np.complex128)
        t1 = np.empty((self.n, self.n), dtype=np.complex128)
        t2 = np.empty((self.n, self.n), dtype=np.complex128)
        self._step_into(r, h, out, k, stage, t1, t2)
        return out

    def advance(self, rho, double h, Py_ssize_t n_steps, double threshold):
        cur = np.array(rho, dtype=np.complex128, copy=True)
        nxt = np.empty((self.n, self.n), dtype=np.complex128)
        k = np.empty((self.n, self.n), dtype=np.complex128)
        stage = np.empty((self.n, self.n), dtype=np.complex128)
        t1 = np.empty((self.n, self.n), dtype=np.complex128)
        t2 = np.empty((self.n, self.n), dtype=np.complex128)
        cdef double complex[:, ::1] cur_v = cur, nxt_v = nxt
        cdef double val, nval
        cdef Py_ssize_t i
        val = _trace_real(cur_v)
        for i in range(n_steps):
            self._step_into(cur_v, h, nxt_v, k, stage, t1, t2)
            nval = _trace_real(nxt_v)
            if nval > val * (1.0 + NORM_GROWTH_TOL) + 1e-300:
                return cur, i, STATUS_INCREASED
            if nval < threshold:
                return cur, i, STATUS_CROSSED
            cur_v[:, :] = nxt_v
            val = nval
        return cur, n_steps, STATUS_OK


def make_pure_kernel(a_csr):
    return PureKernel(a_csr)


def make_mixed_kernel(g_csr, unmonitored, hermitize=True):
    return MixedKernel(g_csr, unmonitored, hermitize)
