# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled master-equation propagation kernel.

Implements exactly the algorithm of ``_lindblad_py``: Dormand-Prince 5(4)
with FSAL and the same step controller, on the structured problem

    drho/dt = -i [H(t), rho] + sum_k L_k rho L_k^dag - 1/2 {G, rho}

with H(t) = Hs + e^{i phi(t)} C + e^{-i phi(t)} C^dag, diagonal G, and
sparse jump operators. Matrix products go through BLAS zgemm; everything
else is tight C loops under nogil.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport cos, sin, sqrt
from scipy.linalg.cython_blas cimport zgemm

cnp.import_array()

BACKEND_NAME = "cython"

ctypedef double complex zdouble

cdef double _C2 = 1.0 / 5, _C3 = 3.0 / 10, _C4 = 4.0 / 5, _C5 = 8.0 / 9

cdef double _A21 = 1.0 / 5
cdef double _A31 = 3.0 / 40, _A32 = 9.0 / 40
cdef double _A41 = 44.0 / 45, _A42 = -56.0 / 15, _A43 = 32.0 / 9
cdef double _A51 = 19372.0 / 6561, _A52 = -25360.0 / 2187
cdef double _A53 = 64448.0 / 6561, _A54 = -212.0 / 729
cdef double _A61 = 9017.0 / 3168, _A62 = -355.0 / 33, _A63 = 46732.0 / 5247
cdef double _A64 = 49.0 / 176, _A65 = -5103.0 / 18656
cdef double _A71 = 35.0 / 384, _A73 = 500.0 / 1113, _A74 = 125.0 / 192
cdef double _A75 = -2187.0 / 6784, _A76 = 11.0 / 84
# error weights: b5 - b4 (k7 = FSAL stage)
cdef double _E1 = 35.0 / 384 - 5179.0 / 57600
cdef double _E3 = 500.0 / 1113 - 7571.0 / 16695
cdef double _E4 = 125.0 / 192 - 393.0 / 640
cdef double _E5 = -2187.0 / 6784 + 92097.0 / 339200
cdef double _E6 = 11.0 / 84 - 187.0 / 2100
cdef double _E7 = -1.0 / 40

cdef long MAX_STEPS = 1000000


cdef void _build_h(
    zdouble* hs, zdouble* coup, zdouble* coup_dag, bint has_drive,
    double amp, double freq, double offset, double slope, double t,
    zdouble* h, int d,
) noexcept nogil:
    cdef int i, n = d * d
    cdef double ph
    cdef zdouble e, ec
    if not has_drive:
        for i in range(n):
            h[i] = hs[i]
        return
    ph = amp * cos(freq * t + offset) + slope * t
    e = cos(ph) + 1j * sin(ph)
    ec = cos(ph) - 1j * sin(ph)
    for i in range(n):
        h[i] = hs[i] + e * coup[i] + ec * coup_dag[i]


cdef void _rhs(
    zdouble* h, zdouble* y, zdouble* out, zdouble* tmp,
    double* gdiag, bint has_g,
    long n_jumps, long* jptr, long* jrows, long* jcols, zdouble* jamps,
    int b_count, int d,
) noexcept nogil:
    """out = -i[H, y] - 1/2 {G, y} + jump terms, batched over b_count."""
    cdef int b, i, j, n = d * d
    cdef long k, p, q, s, e
    cdef zdouble one = 1.0, zero = 0.0, w
    cdef zdouble* yb
    cdef zdouble* ob
    cdef char* cn = "N"
    for b in range(b_count):
        yb = y + b * n
        ob = out + b * n
        # tmp = H @ yb, out = yb @ H (row-major via transposed col-major calls)
        zgemm(cn, cn, &d, &d, &d, &one, yb, &d, h, &d, &zero, tmp, &d)
        zgemm(cn, cn, &d, &d, &d, &one, h, &d, yb, &d, &zero, ob, &d)
        for i in range(n):
            ob[i] = -1j * (tmp[i] - ob[i])  # -i (H y - y H)
        if has_g:
            for i in range(d):
                for j in range(d):
                    ob[i * d + j] = ob[i * d + j] - 0.5 * (
                        gdiag[i] + gdiag[j]
                    ) * yb[i * d + j]
        for k in range(n_jumps):
            s = jptr[k]
            e = jptr[k + 1]
            for p in range(s, e):
                for q in range(s, e):
                    w = jamps[p] * (jamps[q].real - 1j * jamps[q].imag)
                    ob[jrows[p] * d + jrows[q]] = (
                        ob[jrows[p] * d + jrows[q]]
                        + w * yb[jcols[p] * d + jcols[q]]
                    )


def propagate(
    rho,
    double t0,
    double t1,
    double rtol,
    double atol,
    h0,
    coup,
    double phase_amp,
    double phase_freq,
    double phase_offset,
    double phase_slope,
    double det_const,
    det_diag,
    jump_ptr,
    jump_rows,
    jump_cols,
    jump_amps,
    gdiag,
):
    """Propagate a (B, d, d) batch of density matrices from t0 to t1."""
    cdef cnp.ndarray[zdouble, ndim=3] y = np.array(rho, dtype=complex, order="C")
    cdef int b_count = y.shape[0]
    cdef int d = y.shape[1]
    cdef int n = d * d
    cdef long total = b_count * n

    cdef cnp.ndarray[zdouble, ndim=2] hs = np.array(h0, dtype=complex, order="C")
    if det_diag is not None and det_const != 0.0:
        hs = hs + det_const * np.diag(np.asarray(det_diag, dtype=complex))
    cdef bint has_drive = coup is not None
    cdef cnp.ndarray[zdouble, ndim=2] cp
    cdef cnp.ndarray[zdouble, ndim=2] cpd
    if has_drive:
        cp = np.ascontiguousarray(coup, dtype=complex)
        cpd = np.ascontiguousarray(np.asarray(coup).conj().T, dtype=complex)
    else:
        cp = np.zeros((1, 1), dtype=complex)
        cpd = np.zeros((1, 1), dtype=complex)

    cdef bint has_g = gdiag is not None and np.any(np.asarray(gdiag) != 0.0)
    cdef cnp.ndarray[double, ndim=1] gd
    if has_g:
        gd = np.ascontiguousarray(np.asarray(gdiag).real, dtype=float)
    else:
        gd = np.zeros(1, dtype=float)

    cdef cnp.ndarray[long, ndim=1] jptr = np.ascontiguousarray(
        jump_ptr if jump_ptr is not None else np.zeros(1), dtype=np.int64
    )
    cdef long n_jumps = jptr.shape[0] - 1
    cdef cnp.ndarray[long, ndim=1] jrows = np.ascontiguousarray(
        jump_rows if jump_rows is not None else np.zeros(0), dtype=np.int64
    )
    cdef cnp.ndarray[long, ndim=1] jcols = np.ascontiguousarray(
        jump_cols if jump_cols is not None else np.zeros(0), dtype=np.int64
    )
    cdef cnp.ndarray[zdouble, ndim=1] jamps = np.ascontiguousarray(
        jump_amps if jump_amps is not None else np.zeros(0), dtype=complex
    )

    cdef double span = t1 - t0
    if span < 0:
        raise ValueError("integration span must be non-negative")
    if span == 0:
        return y

    # stage storage
    cdef cnp.ndarray[zdouble, ndim=1] k1 = np.zeros(total, dtype=complex)
    cdef cnp.ndarray[zdouble, ndim=1] k2 = np.zeros(total, dtype=complex)
    cdef cnp.ndarray[zdouble, ndim=1] k3 = np.zeros(total, dtype=complex)
    cdef cnp.ndarray[zdouble, ndim=1] k4 = np.zeros(total, dtype=complex)
    cdef cnp.ndarray[zdouble, ndim=1] k5 = np.zeros(total, dtype=complex)
    cdef cnp.ndarray[zdouble, ndim=1] k6 = np.zeros(total, dtype=complex)
    cdef cnp.ndarray[zdouble, ndim=1] k7 = np.zeros(total, dtype=complex)
    cdef cnp.ndarray[zdouble, ndim=1] ytmp = np.zeros(total, dtype=complex)
    cdef cnp.ndarray[zdouble, ndim=1] y5 = np.zeros(total, dtype=complex)
    cdef cnp.ndarray[zdouble, ndim=2] hwork = np.zeros((d, d), dtype=complex)
    cdef cnp.ndarray[zdouble, ndim=1] mtmp = np.zeros(n, dtype=complex)

    cdef zdouble* yp = <zdouble*>y.data
    cdef zdouble* hsp = <zdouble*>hs.data
    cdef zdouble* cpp = <zdouble*>cp.data
    cdef zdouble* cpdp = <zdouble*>cpd.data
    cdef double* gdp = <double*>gd.data
    cdef long* jptrp = <long*>jptr.data
    cdef long* jrowsp = <long*>jrows.data
    cdef long* jcolsp = <long*>jcols.data
    cdef zdouble* jampsp = <zdouble*>jamps.data
    cdef zdouble* k1p = <zdouble*>k1.data
    cdef zdouble* k2p = <zdouble*>k2.data
    cdef zdouble* k3p = <zdouble*>k3.data
    cdef zdouble* k4p = <zdouble*>k4.data
    cdef zdouble* k5p = <zdouble*>k5.data
    cdef zdouble* k6p = <zdouble*>k6.data
    cdef zdouble* k7p = <zdouble*>k7.data
    cdef zdouble* ytp = <zdouble*>ytmp.data
    cdef zdouble* y5p = <zdouble*>y5.data
    cdef zdouble* hp = <zdouble*>hwork.data
    cdef zdouble* mtp = <zdouble*>mtmp.data

    cdef double t = t0
    cdef double h = span / 100.0
    cdef long nsteps = 0
    cdef long i
    cdef double err, sc, ae, factor
    cdef bint step_fail = False

    with nogil:
        _build_h(hsp, cpp, cpdp, has_drive, phase_amp, phase_freq,
                 phase_offset, phase_slope, t, hp, d)
        _rhs(hp, yp, k1p, mtp, gdp, has_g, n_jumps, jptrp, jrowsp, jcolsp,
             jampsp, b_count, d)
        while t < t1:
            nsteps += 1
            if nsteps > MAX_STEPS:
                step_fail = True
                break
            if h > t1 - t:
                h = t1 - t
            # stage 2
            for i in range(total):
                ytp[i] = yp[i] + h * _A21 * k1p[i]
            _build_h(hsp, cpp, cpdp, has_drive, phase_amp, phase_freq,
                     phase_offset, phase_slope, t + _C2 * h, hp, d)
            _rhs(hp, ytp, k2p, mtp, gdp, has_g, n_jumps, jptrp, jrowsp,
                 jcolsp, jampsp, b_count, d)
            # stage 3
            for i in range(total):
                ytp[i] = yp[i] + h * (_A31 * k1p[i] + _A32 * k2p[i])
            _build_h(hsp, cpp, cpdp, has_drive, phase_amp, phase_freq,
                     phase_offset, phase_slope, t + _C3 * h, hp, d)
            _rhs(hp, ytp, k3p, mtp, gdp, has_g, n_jumps, jptrp, jrowsp,
                 jcolsp, jampsp, b_count, d)
            # stage 4
            for i in range(total):
                ytp[i] = yp[i] + h * (
                    _A41 * k1p[i] + _A42 * k2p[i] + _A43 * k3p[i]
                )
            _build_h(hsp, cpp, cpdp, has_drive, phase_amp, phase_freq,
                     phase_offset, phase_slope, t + _C4 * h, hp, d)
            _rhs(hp, ytp, k4p, mtp, gdp, has_g, n_jumps, jptrp, jrowsp,
                 jcolsp, jampsp, b_count, d)
            # stage 5
            for i in range(total):
                ytp[i] = yp[i] + h * (
                    _A51 * k1p[i] + _A52 * k2p[i] + _A53 * k3p[i]
                    + _A54 * k4p[i]
                )
            _build_h(hsp, cpp, cpdp, has_drive, phase_amp, phase_freq,
                     phase_offset, phase_slope, t + _C5 * h, hp, d)
            _rhs(hp, ytp, k5p, mtp, gdp, has_g, n_jumps, jptrp, jrowsp,
                 jcolsp, jampsp, b_count, d)
            # stage 6
            for i in range(total):
                ytp[i] = yp[i] + h * (
                    _A61 * k1p[i] + _A62 * k2p[i] + _A63 * k3p[i]
                    + _A64 * k4p[i] + _A65 * k5p[i]
                )
            _build_h(hsp, cpp, cpdp, has_drive, phase_amp, phase_freq,
                     phase_offset, phase_slope, t + h, hp, d)
            _rhs(hp, ytp, k6p, mtp, gdp, has_g, n_jumps, jptrp, jrowsp,
                 jcolsp, jampsp, b_count, d)
            # 5th order solution (stage 7 input)
            for i in range(total):
                y5p[i] = yp[i] + h * (
                    _A71 * k1p[i] + _A73 * k3p[i] + _A74 * k4p[i]
                    + _A75 * k5p[i] + _A76 * k6p[i]
                )
            _rhs(hp, y5p, k7p, mtp, gdp, has_g, n_jumps, jptrp, jrowsp,
                 jcolsp, jampsp, b_count, d)
            # scaled RMS error over the whole batch
            err = 0.0
            for i in range(total):
                ae = h * zabs(
                    _E1 * k1p[i] + _E3 * k3p[i] + _E4 * k4p[i]
                    + _E5 * k5p[i] + _E6 * k6p[i] + _E7 * k7p[i]
                )
                sc = atol + rtol * zmax(yp[i], y5p[i])
                err += (ae / sc) * (ae / sc)
            err = sqrt(err / total)
            if err <= 1.0:
                t = t + h
                for i in range(total):
                    yp[i] = y5p[i]
                    k1p[i] = k7p[i]
                if err == 0.0:
                    factor = 5.0
                else:
                    factor = 0.9 * err ** -0.2
                    if factor > 5.0:
                        factor = 5.0
            else:
                factor = 0.9 * err ** -0.2
                if factor < 0.2:
                    factor = 0.2
            h = h * factor
            if h <= 0.0:
                step_fail = True
                break
    if step_fail:
        raise RuntimeError("integrator exceeded the step budget or underflowed")
    return y


cdef inline double zabs(zdouble z) noexcept nogil:
    return sqrt(z.real * z.real + z.imag * z.imag)


cdef inline double zmax(zdouble a, zdouble b) noexcept nogil:
    cdef double aa = zabs(a)
    cdef double bb = zabs(b)
    return aa if aa > bb else bb
