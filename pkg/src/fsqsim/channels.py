"""Superoperators, Choi matrices and process fidelities.

Vectorization is column-stacking throughout: vec(M)[i + d*j] = M[i, j], so a
map rho -> A rho B has superoperator B^T (x) A and a unitary conjugation
rho -> U rho U^dag becomes conj(U) (x) U.
"""

from dataclasses import dataclass, field

import numpy as np

from .levels import DIM, Q0, Q1
from .lindblad import evolve_rho

TP_TOL = 1e-8
CHOI_TOL = 1e-7


def vec(m: np.ndarray) -> np.ndarray:
    return np.asarray(m).flatten(order="F")


def unvec(v: np.ndarray) -> np.ndarray:
    d = int(round(np.sqrt(v.size)))
    return np.asarray(v).reshape((d, d), order="F")


@dataclass(frozen=True)
class Superoperator:
    """Column-stacking superoperator matrix acting on vec(rho)."""

    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        d = int(round(np.sqrt(m.shape[0])))
        if m.shape != (d * d, d * d):
            raise ValueError("superoperator must be d^2 x d^2")
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return int(round(np.sqrt(self.matrix.shape[0])))

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return unvec(self.matrix @ vec(rho))

    @classmethod
    def from_unitary(cls, u: np.ndarray) -> "Superoperator":
        u = np.asarray(u, dtype=complex)
        return cls(np.kron(u.conj(), u))

    @classmethod
    def identity(cls, dim: int) -> "Superoperator":
        return cls(np.eye(dim * dim, dtype=complex))


def compose(second: Superoperator, first: Superoperator) -> Superoperator:
    """Channel that applies ``first`` then ``second``."""
    return Superoperator(second.matrix @ first.matrix)


def trace_preservation_defect(s: Superoperator) -> float:
    """Max deviation of the left trace eigenvector, tr(S rho) vs tr(rho)."""
    d = s.dim
    vid = vec(np.eye(d))
    return float(np.max(np.abs(vid @ s.matrix - vid)))


def choi_matrix(s: Superoperator) -> np.ndarray:
    """Unnormalized Choi matrix C = sum_ab |a><b| (x) Lambda(|a><b|)."""
    d = s.dim
    s4 = s.matrix.reshape(d, d, d, d)  # axes (j, i, b, a) from (i+dj, a+db)
    return s4.transpose(3, 1, 2, 0).reshape(d * d, d * d)


def min_choi_eigenvalue(s: Superoperator) -> float:
    c = choi_matrix(s)
    return float(np.linalg.eigvalsh(0.5 * (c + c.conj().T)).min())


def is_cptp(s: Superoperator, tp_tol=TP_TOL, choi_tol=CHOI_TOL) -> bool:
    return (
        trace_preservation_defect(s) <= tp_tol
        and min_choi_eigenvalue(s) >= -choi_tol
    )


def channel_superoperator(
    hamiltonian,
    collapses,
    duration: float,
    n_atoms: int,
    rtol: float = 1e-8,
    atol: float = 1e-10,
) -> Superoperator:
    """Lindblad channel as a superoperator, by propagating all matrix units.

    Exact but O(d^2) propagations; for the two-atom gate channels used in the
    error budget prefer :func:`channel_on_pairs`, which exploits the closed
    operator subspace.
    """
    d = DIM**n_atoms
    basis = np.zeros((d * d, d, d), dtype=complex)
    for b in range(d):
        for a in range(d):
            basis[a + d * b, a, b] = 1.0
    out = evolve_rho(basis, hamiltonian, collapses, duration, n_atoms, rtol, atol)
    return Superoperator(np.stack([vec(out[j]) for j in range(d * d)], axis=1))


def channel_on_pairs(
    hamiltonian,
    collapses,
    duration: float,
    n_atoms: int,
    pairs,
    rtol: float = 1e-8,
    atol: float = 1e-10,
    leak_tol: float = 1e-9,
):
    """Channel restricted to the operator subspace spanned by matrix units.

    ``pairs`` is a list of (row, col) full-space indices whose span must be
    closed under the dynamics; the residual outside the span is returned so
    callers can assert exactness. Returns (matrix, leak) where matrix[p, q]
    is the coefficient of E_pairs[p] in Lambda(E_pairs[q]).
    """
    d = DIM**n_atoms
    npairs = len(pairs)
    basis = np.zeros((npairs, d, d), dtype=complex)
    for k, (i, j) in enumerate(pairs):
        basis[k, i, j] = 1.0
    out = evolve_rho(basis, hamiltonian, collapses, duration, n_atoms, rtol, atol)
    rows = np.array([p[0] for p in pairs])
    cols = np.array([p[1] for p in pairs])
    m = out[:, rows, cols].T.copy()
    residual = out.copy()
    residual[:, rows, cols] = 0.0
    leak = float(np.max(np.abs(residual)))
    if leak > leak_tol:
        raise ValueError(
            f"operator subspace is not closed (leak {leak:.2e}); "
            "pass the full pair set for these collapse channels"
        )
    return m, leak


def gate_pair_basis(n_atoms: int = 2):
    """Matrix-unit pairs spanning the operator subspace closed under a
    Rydberg gate with decay, dephasing and ionization channels.

    Per atom: all (row, col) pairs over {q0, q1, r} plus the sink diagonals
    (g,g), (x,x), (B,B) -- jumps only ever populate sink populations, never
    sink coherences, so this 12-pair local set (144 pairs for two atoms) is
    exactly closed. Closure is asserted by channel_on_pairs at use time.
    """
    from .levels import B, G, R, X

    active = (Q0, Q1, R)
    local = [(a, b) for a in active for b in active]
    local += [(G, G), (X, X), (B, B)]
    if n_atoms == 1:
        return local
    pairs = []
    for (r1, c1) in local:
        for (r2, c2) in local:
            pairs.append((r1 * DIM + r2, c1 * DIM + c2))
    return pairs


def qubit_pairs(n_atoms: int, levels=(Q0, Q1)):
    """Matrix-unit index pairs spanning the computational operator space."""
    singles = [(a, b) for a in levels for b in levels]
    if n_atoms == 1:
        return singles
    pairs = []
    for (a1, b1) in singles:
        for (a2, b2) in singles:
            pairs.append((a1 * DIM + a2, b1 * DIM + b2))
    return pairs


def subspace_entanglement_fidelity(
    s: Superoperator, s_ideal: Superoperator, subspace_levels
) -> float:
    """Entanglement fidelity of s composed with the inverse ideal map,
    restricted to the product subspace spanned by ``subspace_levels``."""
    d = s.dim
    if s_ideal.dim != d:
        raise ValueError("superoperator dimensions differ")
    n_atoms = 1 if d == DIM else 2
    if DIM**n_atoms != d:
        raise ValueError("dimension is not a power of the local dimension")
    try:
        inv = np.linalg.inv(s_ideal.matrix)
    except np.linalg.LinAlgError as exc:
        raise ValueError("ideal superoperator is not invertible") from exc
    if np.linalg.cond(s_ideal.matrix) > 1e10:
        raise ValueError("ideal superoperator is numerically singular")
    lam = s.matrix @ inv

    if n_atoms == 1:
        sub = list(subspace_levels)
    else:
        sub = [
            a * DIM + b for a in subspace_levels for b in subspace_levels
        ]
    ds = len(sub)
    fe = 0.0 + 0.0j
    for i in sub:
        for j in sub:
            e = np.zeros((d, d), dtype=complex)
            e[i, j] = 1.0
            out = unvec(lam @ vec(e))
            fe += out[i, j]
    return float((fe / ds**2).real)


def process_fidelity(
    s: Superoperator, s_ideal: Superoperator, subspace_levels=(Q0, Q1)
) -> float:
    """Average gate fidelity of ``s`` against ``s_ideal`` on a level subspace.

    F_avg = (d F_e + 1) / (d + 1) with d the subspace dimension.
    """
    if not subspace_levels:
        raise ValueError("subspace must be nonempty")
    d = s.dim
    n_atoms = 1 if d == DIM else 2
    ds = len(subspace_levels) ** n_atoms
    fe = subspace_entanglement_fidelity(s, s_ideal, subspace_levels)
    return (ds * fe + 1.0) / (ds + 1.0)
