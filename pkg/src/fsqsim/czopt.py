"""Pulse-parameter optimization for the phase-modulated CZ gate.

Deterministic local search: a finite-difference Hessian at the current point,
then damped Newton steps with backtracking on the damping parameter. The
default objective mirrors gate tune-up in the lab: the |11> return
probability after ten CZ gates interleaved with global X(pi) echo pulses,
which cancels the single-qubit phase and isolates the entangling error.
"""

from dataclasses import dataclass

import numpy as np

from .levels import DIM, Q0, Q1, full_index
from .pulses import rotation
from .rydberg import (
    CZPulseProfile,
    RydbergDrive,
    assemble_unitary,
    cz_average_fidelity,
    computational_amplitudes,
    extract_phi_sq,
    sector_unitaries,
)
from .states import embed_local

# Reference modulation parameters at V/Omega = 19 (Omega = 2 pi x 6 MHz),
# produced by optimize_cz itself from a multi-start search and frozen here;
# tests regenerate the optimum from perturbed starts. Avg gate fidelity at
# these values is 1 - 6.5e-10; Omega * t_gate = 7.708.
DEFAULT_THETA = (1.02333264, 1.57079633, 7.89138861, 0.0)
DEFAULT_T_GATE = 0.20444920  # us
DEFAULT_PHI_SQ = 2.13183248  # rad, single-qubit phase of the default pulse


def default_profile() -> CZPulseProfile:
    return CZPulseProfile(
        theta=DEFAULT_THETA, t_gate=DEFAULT_T_GATE, phi_sq=DEFAULT_PHI_SQ
    )


def _global_xpi(n_atoms: int = 2) -> np.ndarray:
    x = np.eye(DIM, dtype=complex)
    x[np.ix_((Q0, Q1), (Q0, Q1))] = rotation(np.pi, 0.0)
    out = embed_local(x, 0, n_atoms)
    for a in range(1, n_atoms):
        out = out @ embed_local(x, a, n_atoms)
    return out


# Inside optimization loops the integrator runs at a looser tolerance; the
# objective only needs ~1e-6 absolute accuracy and this is ~4x faster.
OBJECTIVE_RTOL = 1e-7
OBJECTIVE_ATOL = 1e-9


def echo_return_probability(
    profile: CZPulseProfile,
    drive: RydbergDrive,
    n_cz: int = 10,
    rtol: float = OBJECTIVE_RTOL,
    atol: float = OBJECTIVE_ATOL,
) -> float:
    """P(|11> -> |11>) after n_cz gates with a global X(pi) echo after each."""
    u2, u4 = sector_unitaries(profile, drive, rtol=rtol, atol=atol)
    u = assemble_unitary(u2, u4)
    echo = _global_xpi(2)
    psi = np.zeros(36, dtype=complex)
    i11 = full_index([Q1, Q1])
    psi[i11] = 1.0
    for _ in range(n_cz):
        psi = echo @ (u @ psi)
    return float(abs(psi[i11]) ** 2)


def make_echo_objective(drive: RydbergDrive, n_cz: int = 10):
    return lambda profile: echo_return_probability(profile, drive, n_cz)


def make_fidelity_objective(
    drive: RydbergDrive, rtol: float = OBJECTIVE_RTOL, atol: float = OBJECTIVE_ATOL
):
    """Average gate fidelity to CZ, single-qubit phase optimized out."""

    def objective(profile: CZPulseProfile) -> float:
        u2, u4 = sector_unitaries(profile, drive, rtol=rtol, atol=atol)
        a01, a11 = computational_amplitudes(u2, u4)
        f, _ = cz_average_fidelity(a01, a11)
        return f

    return objective


@dataclass(frozen=True)
class OptimizeResult:
    profile: CZPulseProfile
    objective_value: float
    converged: bool
    n_iterations: int
    n_evaluations: int
    message: str


def _pvec(profile: CZPulseProfile) -> np.ndarray:
    return np.array([*profile.theta[:3], profile.t_gate])


def _profile(p: np.ndarray, theta4: float) -> CZPulseProfile:
    return CZPulseProfile(theta=(p[0], p[1], p[2], theta4), t_gate=p[3])


def optimize_cz(
    initial: CZPulseProfile,
    drive: RydbergDrive,
    objective=None,
    max_iterations: int = 60,
    gtol: float = 1e-9,
    ftol: float = 1e-13,
    fd_step: float = 1e-4,
    hessian_refresh: int = 4,
    seed: int = 0,
) -> OptimizeResult:
    """Maximize ``objective(profile)`` over (theta1, theta2, theta3, t_gate).

    theta4 is a pure gauge for any objective built on populations and is held
    fixed. The search is fully deterministic (``seed`` is accepted for API
    uniformity but nothing here is stochastic).
    """
    drive_obj = objective or make_echo_objective(drive)
    theta4 = initial.theta[3]
    nev = 0

    def cost(p) -> float:
        nonlocal nev
        nev += 1
        if p[3] <= 0:
            return 2.0
        return 1.0 - drive_obj(_profile(p, theta4))

    scales = np.array(
        [1.0, 1.0, max(drive.rabi_frequency, 1.0), max(initial.t_gate, 1e-3)]
    )

    def grad_hess(p, need_hess=True):
        h = fd_step * scales
        g = np.zeros(4)
        hess = np.zeros((4, 4))
        f0 = cost(p)
        fp = np.zeros(4)
        fm = np.zeros(4)
        for i in range(4):
            e = np.zeros(4)
            e[i] = h[i]
            fp[i] = cost(p + e)
            fm[i] = cost(p - e)
            g[i] = (fp[i] - fm[i]) / (2 * h[i])
            if need_hess:
                hess[i, i] = (fp[i] - 2 * f0 + fm[i]) / h[i] ** 2
        if need_hess:
            for i in range(4):
                for j in range(i + 1, 4):
                    ei = np.zeros(4)
                    ej = np.zeros(4)
                    ei[i] = h[i]
                    ej[j] = h[j]
                    fpp = cost(p + ei + ej)
                    fmm = cost(p - ei - ej)
                    hij = (fpp - fp[i] - fp[j] + 2 * f0 - fm[i] - fm[j] + fmm) / (
                        2 * h[i] * h[j]
                    )
                    hess[i, j] = hess[j, i] = hij
        return f0, g, hess

    p = _pvec(initial)
    f, g, hess = grad_hess(p)
    lam = 0.0  # undamped Newton first; back off on failure
    converged = False
    message = "maximum iterations reached"
    it = 0
    for it in range(1, max_iterations + 1):
        if np.linalg.norm(g * scales) < gtol:
            converged = True
            message = "gradient below tolerance"
            break
        accepted = False
        for _ in range(14):
            try:
                step = np.linalg.solve(
                    hess + lam * np.diag(np.maximum(np.diag(hess), 1.0 / scales**2)),
                    -g,
                )
            except np.linalg.LinAlgError:
                step = -g * scales**2
            f_new = cost(p + step)
            if f_new < f:
                p = p + step
                df = f - f_new
                f = f_new
                lam = 0.0 if lam < 1e-8 else lam / 3.0
                accepted = True
                break
            lam = 1e-4 if lam == 0.0 else lam * 10.0
        if not accepted:
            converged = True
            message = "no improving step found"
            break
        refresh = it % hessian_refresh == 0
        f, g, hess_new = grad_hess(p, need_hess=refresh)
        if refresh:
            hess = hess_new
        if df < ftol:
            converged = True
            message = "objective change below tolerance"
            break

    best = _profile(p, theta4)
    u2, _ = sector_unitaries(best, drive)
    best = CZPulseProfile(theta=best.theta, t_gate=best.t_gate,
                          phi_sq=extract_phi_sq(u2))
    return OptimizeResult(
        profile=best,
        objective_value=1.0 - f,
        converged=converged,
        n_iterations=it,
        n_evaluations=nev,
        message=message,
    )
