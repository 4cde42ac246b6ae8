"""The 24-element single-qubit Clifford group and its pulse compilation.

Each Clifford is compiled to at most two physical pi/2 pulses plus virtual-Z
frame updates; the compilation table is generated once and verified by the
test suite (closure, inverses, pulse-count census).
"""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .pulses import rotation, virtual_z_equivalent

PHASE_GRID = (0.0, np.pi / 2, np.pi, 3 * np.pi / 2)
MATCH_TOL = 1e-10


def equal_up_to_phase(u: np.ndarray, v: np.ndarray, tol: float = MATCH_TOL) -> bool:
    i, j = np.unravel_index(np.argmax(np.abs(v)), v.shape)
    if abs(v[i, j]) < tol or abs(u[i, j]) < tol:
        return False
    return bool(np.max(np.abs(u * (v[i, j] / u[i, j]) - v)) < tol)


def _canonical(u: np.ndarray) -> np.ndarray:
    """Fix the global phase: largest element real positive."""
    i, j = np.unravel_index(np.argmax(np.abs(u)), u.shape)
    return u * (abs(u[i, j]) / u[i, j])


@dataclass(frozen=True)
class CliffordGate:
    index: int
    unitary: np.ndarray = field(repr=False)
    # compilation: virtual-z angles interleaved with pi/2 pulses at phase 0,
    # executed as z0 [X90 z1 [X90 z2]] in time order
    z_angles: tuple = ()
    n_pulses: int = 0


def _x90() -> np.ndarray:
    return rotation(np.pi / 2, 0.0)


def _compile_table():
    """Enumerate Z(a) X90 Z(b) X90 Z(c) products over quarter-turn angles."""
    x90 = _x90()
    entries = []
    for n_pulses in (0, 1, 2):
        grids = [PHASE_GRID] * (n_pulses + 1)
        idx = np.zeros(n_pulses + 1, dtype=int)
        while True:
            angles = tuple(PHASE_GRID[k] for k in idx)
            u = virtual_z_equivalent(angles[0])
            for a in angles[1:]:
                u = virtual_z_equivalent(a) @ x90 @ u
            entries.append((angles, n_pulses, u))
            pos = 0
            while pos <= n_pulses:
                idx[pos] += 1
                if idx[pos] < len(PHASE_GRID):
                    break
                idx[pos] = 0
                pos += 1
            if pos > n_pulses:
                break
    return entries


@lru_cache(maxsize=1)
def clifford_group() -> tuple:
    """Canonically ordered 24-element single-qubit Clifford group."""
    uniques = []
    for angles, n_pulses, u in _compile_table():
        if not any(equal_up_to_phase(u, v) for _, _, v in uniques):
            uniques.append((angles, n_pulses, u))
    assert len(uniques) == 24, f"expected 24 Cliffords, built {len(uniques)}"
    # deterministic order independent of enumeration details
    keyed = sorted(
        uniques,
        key=lambda e: tuple(np.round(_canonical(e[2]).view(float).ravel(), 9)),
    )
    return tuple(
        CliffordGate(index=i, unitary=_canonical(u), z_angles=angles, n_pulses=n)
        for i, (angles, n, u) in enumerate(keyed)
    )


def find_index(u: np.ndarray) -> int:
    for g in clifford_group():
        if equal_up_to_phase(u, g.unitary):
            return g.index
    raise LookupError("matrix is not a Clifford group element (up to phase)")


def compose(a: CliffordGate, b: CliffordGate) -> CliffordGate:
    """Group element equal to applying ``b`` first, then ``a``."""
    return clifford_group()[find_index(a.unitary @ b.unitary)]


def invert(a: CliffordGate) -> CliffordGate:
    return clifford_group()[find_index(a.unitary.conj().T)]


def average_pulse_count() -> float:
    return float(np.mean([g.n_pulses for g in clifford_group()]))
