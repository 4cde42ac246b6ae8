"""Numpy implementation of the master-equation propagation kernel.

This is the reference backend; ``_lindblad_cy`` implements the identical
algorithm (Dormand-Prince 5(4), same tableau, same step control) in C and is
preferred at import time when available.

The structured problem solved here is

    drho/dt = -i [H(t), rho] + sum_k L_k rho L_k^dag - 1/2 {G, rho}

with H(t) = H0 + exp(i*phi(t)) C + exp(-i*phi(t)) C^dag + delta * D,
phi(t) = a*cos(w t + p) + s*t, delta a constant, D and G diagonal, and the
L_k given in concatenated sparse (row, col, amplitude) form with the decay
rates folded into the amplitudes. G = sum_k L_k^dag L_k is precomputed by the
caller.
"""

import numpy as np

BACKEND_NAME = "python"

# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
# y5 uses row 7 of A (FSAL); embedded 4th-order weights:
_B4 = np.array(
    [5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40]
)
_E = np.concatenate([_A[6], [0.0]]) - _B4  # error weights, k7 included

MAX_STEPS = 1_000_000


def dopri5(rhs, y0, t0, t1, rtol, atol, first_step=None):
    """Adaptive Dormand-Prince integration of dy/dt = rhs(t, y).

    ``y`` may be a complex array of any shape. Returns y(t1).
    """
    span = t1 - t0
    if span < 0:
        raise ValueError("integration span must be non-negative")
    y = np.array(y0, dtype=complex)
    if span == 0:
        return y
    t = t0
    k = [None] * 7
    k[0] = rhs(t, y)
    h = first_step if first_step is not None else span / 100.0
    h = min(h, span)
    nsteps = 0
    while t < t1:
        if nsteps > MAX_STEPS:
            raise RuntimeError("integrator exceeded the maximum step count")
        nsteps += 1
        h = min(h, t1 - t)
        for i in range(1, 7):
            yi = y
            for j, a in enumerate(_A[i]):
                if a != 0.0:
                    yi = yi + (h * a) * k[j]
            k[i] = rhs(t + _C[i] * h, yi)
        y5 = yi  # stage 7 input is the 5th-order solution (FSAL)
        err_vec = k[0] * _E[0]
        for j in range(1, 7):
            if _E[j] != 0.0:
                err_vec = err_vec + _E[j] * k[j]
        err_vec = err_vec * h
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y5))
        err = np.sqrt(np.mean(np.abs(err_vec / scale) ** 2))
        if err <= 1.0:
            t = t + h
            y = y5
            k[0] = k[6]  # FSAL
            factor = 5.0 if err == 0.0 else min(5.0, 0.9 * err ** -0.2)
        else:
            factor = max(0.2, 0.9 * err ** -0.2)
            k0 = k[0]
            k = [None] * 7
            k[0] = k0
        h = h * factor
        if h <= 0 or not np.isfinite(h):
            raise RuntimeError("integrator step size underflow")
    return y


def rk4(rhs, y0, t0, t1, n_steps):
    """Fixed-step classical RK4; kept as an independent order-4 oracle."""
    y = np.array(y0, dtype=complex)
    h = (t1 - t0) / n_steps
    t = t0
    for _ in range(n_steps):
        k1 = rhs(t, y)
        k2 = rhs(t + h / 2, y + (h / 2) * k1)
        k3 = rhs(t + h / 2, y + (h / 2) * k2)
        k4 = rhs(t + h, y + h * k3)
        y = y + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        t += h
    return y


def make_structured_rhs(
    h0,
    coup,
    phase_amp,
    phase_freq,
    phase_offset,
    phase_slope,
    det_const,
    det_diag,
    jump_ptr,
    jump_rows,
    jump_cols,
    jump_amps,
    gdiag,
):
    """Build the batched Lindblad right-hand side for the structured problem."""
    d = h0.shape[0]
    hbase = np.array(h0, dtype=complex)
    if det_diag is not None and det_const != 0.0:
        hbase[np.arange(d), np.arange(d)] += det_const * det_diag
    coup_dag = None if coup is None else coup.conj().T
    has_g = gdiag is not None and np.any(gdiag != 0.0)
    n_jumps = len(jump_ptr) - 1 if jump_ptr is not None else 0
    jumps = []
    for kk in range(n_jumps):
        s, e = jump_ptr[kk], jump_ptr[kk + 1]
        rows = jump_rows[s:e]
        cols = jump_cols[s:e]
        amps = jump_amps[s:e]
        jumps.append((rows, cols, np.outer(amps, amps.conj())))

    def rhs(t, rho):
        if coup is None:
            h = hbase
        else:
            ph = phase_amp * np.cos(phase_freq * t + phase_offset) + phase_slope * t
            e = np.exp(1j * ph)
            h = hbase + e * coup + np.conj(e) * coup_dag
        out = -1j * (h @ rho - rho @ h)
        if has_g:
            out -= 0.5 * (gdiag[:, None] * rho + rho * gdiag[None, :])
        for rows, cols, w in jumps:
            sub = rho[..., cols[:, None], cols[None, :]]
            out[..., rows[:, None], rows[None, :]] += w * sub
        return out

    return rhs


def propagate(
    rho,
    t0,
    t1,
    rtol,
    atol,
    h0,
    coup,
    phase_amp,
    phase_freq,
    phase_offset,
    phase_slope,
    det_const,
    det_diag,
    jump_ptr,
    jump_rows,
    jump_cols,
    jump_amps,
    gdiag,
):
    """Propagate a (B, d, d) batch of density matrices from t0 to t1."""
    rhs = make_structured_rhs(
        h0,
        coup,
        phase_amp,
        phase_freq,
        phase_offset,
        phase_slope,
        det_const,
        det_diag,
        jump_ptr,
        jump_rows,
        jump_cols,
        jump_amps,
        gdiag,
    )
    return dopri5(rhs, rho, t0, t1, rtol, atol)
