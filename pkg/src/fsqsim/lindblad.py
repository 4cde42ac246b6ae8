"""Master-equation time evolution for one- and two-atom density matrices.

Hamiltonians may be supplied as a static matrix, as a :class:`ModulatedDrive`
(the structured form every hot path uses, handled by the compiled kernel when
available), as an arbitrary callable ``t -> matrix`` (slow generic path), or
as ``None`` for free decay.
"""

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .levels import DIM
from .states import QuantumState, embed_local

DEFAULT_RTOL = 1e-8
DEFAULT_ATOL = 1e-9
TRACE_DRIFT_TOL = 1e-8


class IntegrationError(RuntimeError):
    """Raised when the integrator cannot certify the requested accuracy."""


@dataclass(frozen=True)
class CollapseOperator:
    """A single Lindblad jump operator with its rate in 1/us.

    ``operator`` is either a 6x6 single-atom matrix or a full-space matrix.
    A local operator with ``atom=None`` acts on every atom (one embedded copy
    per atom), which is the common case for global noise channels.
    """

    rate: float
    operator: np.ndarray = field(repr=False)
    atom: int | None = None

    def __post_init__(self):
        if self.rate < 0:
            raise ValueError("collapse rate must be non-negative")
        op = np.asarray(self.operator, dtype=complex)
        if op.ndim != 2 or op.shape[0] != op.shape[1]:
            raise ValueError("collapse operator must be square")
        object.__setattr__(self, "operator", op)

    def expand(self, n_atoms: int) -> list:
        """Full-space (rate, operator) pairs for an ``n_atoms`` system."""
        d = DIM**n_atoms
        if self.operator.shape == (d, d):
            return [(self.rate, self.operator)]
        if self.operator.shape != (DIM, DIM):
            raise ValueError(
                f"collapse operator must be {DIM}x{DIM} or {d}x{d}, "
                f"got {self.operator.shape}"
            )
        atoms = range(n_atoms) if self.atom is None else [self.atom]
        return [(self.rate, embed_local(self.operator, a, n_atoms)) for a in atoms]


@dataclass(frozen=True)
class ModulatedDrive:
    """H(t) = h0 + e^{i phi(t)} coupling + h.c. + detuning(t) * diag.

    phi(t) = phase_amp * cos(phase_freq * t + phase_offset) + phase_slope * t.
    The detuning term is piecewise constant on ``detuning_edges`` (used for
    sampled laser-noise trajectories); a plain constant detuning can be folded
    into ``h0`` instead.
    """

    h0: np.ndarray = field(repr=False)
    coupling: np.ndarray | None = field(default=None, repr=False)
    phase_amp: float = 0.0
    phase_freq: float = 0.0
    phase_offset: float = 0.0
    phase_slope: float = 0.0
    detuning_diag: np.ndarray | None = field(default=None, repr=False)
    detuning_edges: np.ndarray | None = None
    detuning_values: np.ndarray | None = None

    @property
    def dim(self) -> int:
        return self.h0.shape[0]

    def phase(self, t: float) -> float:
        return (
            self.phase_amp * np.cos(self.phase_freq * t + self.phase_offset)
            + self.phase_slope * t
        )

    def detuning(self, t: float) -> float:
        if self.detuning_values is None:
            return 0.0
        j = np.searchsorted(self.detuning_edges, t, side="right") - 1
        j = min(max(j, 0), len(self.detuning_values) - 1)
        return float(self.detuning_values[j])

    def hamiltonian(self, t: float) -> np.ndarray:
        h = np.array(self.h0, dtype=complex)
        if self.coupling is not None:
            e = np.exp(1j * self.phase(t))
            h += e * self.coupling + np.conj(e) * self.coupling.conj().T
        if self.detuning_diag is not None:
            d = self.detuning(t)
            if d != 0.0:
                h[np.diag_indices_from(h)] += d * self.detuning_diag
        return h


def _jump_arrays(collapses, n_atoms):
    """Flatten collapse operators to the kernel's sparse layout.

    Returns (ptr, rows, cols, amps, gdiag) with sqrt(rate) folded into the
    amplitudes, or None in the last slot if G = sum L^dag L is not diagonal
    (which forces the generic dense path).
    """
    d = DIM**n_atoms
    ptr, rows, cols, amps = [0], [], [], []
    g = np.zeros((d, d), dtype=complex)
    for c in collapses or []:
        for rate, op in c.expand(n_atoms):
            if rate == 0.0:
                continue
            rr, cc = np.nonzero(op)
            vals = np.sqrt(rate) * op[rr, cc]
            rows.extend(rr)
            cols.extend(cc)
            amps.extend(vals)
            ptr.append(len(rows))
            g += rate * (op.conj().T @ op)
    gd = np.diag(g).real.copy()
    off = g - np.diag(np.diag(g))
    gdiag_ok = np.max(np.abs(off)) < 1e-14 if g.size else True
    return (
        np.asarray(ptr, dtype=np.int64),
        np.asarray(rows, dtype=np.int64),
        np.asarray(cols, dtype=np.int64),
        np.asarray(amps, dtype=complex),
        gd if gdiag_ok else None,
        g,
    )


def _dense_lindblad_rhs(h_of_t, pairs):
    ldag = [(r, op, op.conj().T) for r, op in pairs]

    def rhs(t, rho):
        h = h_of_t(t)
        out = -1j * (h @ rho - rho @ h)
        for rate, op, opd in ldag:
            m = opd @ op
            out += rate * (op @ rho @ opd - 0.5 * (m @ rho + rho @ m))
        return out

    return rhs


def evolve_rho(
    rho,
    hamiltonian,
    collapses,
    duration,
    n_atoms,
    rtol=DEFAULT_RTOL,
    atol=DEFAULT_ATOL,
):
    """Propagate a (d, d) matrix or a (B, d, d) batch; no state validation.

    This is the raw engine behind :func:`evolve_lindblad` and the channel
    constructors; it happily evolves non-Hermitian matrix units.
    """
    if duration < 0:
        raise ValueError("duration must be non-negative")
    rho = np.ascontiguousarray(rho, dtype=complex)
    batched = rho.ndim == 3
    work = rho if batched else rho[None, :, :]
    d = work.shape[-1]

    ptr, rows, cols, amps, gdiag, gdense = _jump_arrays(collapses, n_atoms)

    if callable(hamiltonian) and not isinstance(hamiltonian, ModulatedDrive):
        pairs = [p for c in (collapses or []) for p in c.expand(n_atoms)]
        rhs = _dense_lindblad_rhs(hamiltonian, pairs)
        out = _kernels.dopri5(rhs, work, 0.0, duration, rtol, atol)
        return out if batched else out[0]

    if hamiltonian is None:
        drive = ModulatedDrive(h0=np.zeros((d, d), dtype=complex))
    elif isinstance(hamiltonian, ModulatedDrive):
        drive = hamiltonian
    else:
        drive = ModulatedDrive(h0=np.asarray(hamiltonian, dtype=complex))
    if drive.dim != d:
        raise ValueError("Hamiltonian dimension does not match the state")

    if gdiag is None:
        # Non-diagonal G: fall back to the dense generic path.
        pairs = [p for c in (collapses or []) for p in c.expand(n_atoms)]
        rhs = _dense_lindblad_rhs(drive.hamiltonian, pairs)
        out = _kernels.dopri5(rhs, work, 0.0, duration, rtol, atol)
        return out if batched else out[0]

    coup = None
    if drive.coupling is not None:
        coup = np.ascontiguousarray(drive.coupling, dtype=complex)
    det_diag = drive.detuning_diag
    if det_diag is not None:
        det_diag = np.ascontiguousarray(det_diag, dtype=complex)

    # Split on detuning discontinuities so each kernel call sees a constant.
    if drive.detuning_values is None:
        segments = [(0.0, duration, 0.0)]
    else:
        edges = np.asarray(drive.detuning_edges, dtype=float)
        cuts = [0.0] + [float(e) for e in edges if 0.0 < e < duration] + [duration]
        segments = [
            (cuts[i], cuts[i + 1], drive.detuning((cuts[i] + cuts[i + 1]) / 2))
            for i in range(len(cuts) - 1)
        ]

    h0m = np.ascontiguousarray(drive.h0, dtype=complex)
    for t0, t1, det in segments:
        if t1 <= t0:
            continue
        work = _kernels.propagate(
            work,
            t0,
            t1,
            rtol,
            atol,
            h0m,
            coup,
            drive.phase_amp,
            drive.phase_freq,
            drive.phase_offset,
            drive.phase_slope,
            det,
            det_diag,
            ptr,
            rows,
            cols,
            amps,
            gdiag,
        )
    return work if batched else work[0]


def evolve_lindblad(
    state: QuantumState,
    hamiltonian,
    collapses,
    duration: float,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
) -> QuantumState:
    """Evolve a state under the Lindblad equation for ``duration`` (us)."""
    out = evolve_rho(
        state.rho, hamiltonian, collapses, duration, state.n_atoms, rtol, atol
    )
    drift = abs(np.trace(out).real - 1.0)
    if drift > TRACE_DRIFT_TOL:
        raise IntegrationError(
            f"trace drifted by {drift:.3e} (> {TRACE_DRIFT_TOL}); "
            "tighten tolerances"
        )
    out = 0.5 * (out + out.conj().T)  # scrub roundoff asymmetry only
    return QuantumState(state.n_atoms, out / np.trace(out).real)
