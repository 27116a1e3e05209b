"""Reference eigensolver and dense propagator used as ground truth.

``fci_solve`` diagonalizes a sector Hamiltonian exactly: dense for small
sectors, Lanczos with full reorthogonalization above ``DENSE_CUTOFF``.
Both paths fix the eigenvector phase deterministically so repeated runs
and golden files compare bit-for-bit.

``dense_expm_apply`` is an intentionally naive propagator (full matrix
exponential) kept as an independent cross-check for the package's own
scaled Taylor applier.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .fock import SparseOperator, StateVector

__all__ = ["fci_solve", "dense_expm_apply", "DENSE_CUTOFF"]

DENSE_CUTOFF = 512


def _fix_phase(vec: np.ndarray) -> np.ndarray:
    """Rotate so the largest-magnitude amplitude is real positive.

    Ties in magnitude (to 12 decimals) resolve to the lowest index, which
    keeps the choice stable under round-off reshuffling.
    """
    mags = np.round(np.abs(vec), 12)
    k = int(np.argmax(mags))
    pivot = vec[k]
    if pivot == 0:
        return vec
    return vec * (np.conj(pivot) / abs(pivot))


def _lanczos_lowest(matrix, n_states: int, tol: float) -> tuple[np.ndarray, np.ndarray]:
    """Lowest Ritz pairs by Lanczos with full reorthogonalization.

    The Krylov basis is re-orthogonalized against itself twice per step, so
    the usual ghost-eigenvalue pathology of bare Lanczos cannot appear; the
    tradeoff (O(dim * m^2) work) is irrelevant at the sizes involved.
    """
    dim = matrix.shape[0]
    max_steps = min(dim, 600)
    v = np.full(dim, 1.0 / np.sqrt(dim), dtype=complex)
    basis = [v]
    alphas: list[float] = []
    betas: list[float] = []
    for step in range(max_steps):
        w = matrix @ basis[-1]
        alphas.append(float(np.real(np.vdot(basis[-1], w))))
        # Full reorthogonalization, twice for numerical safety.
        for _ in range(2):
            for u in basis:
                w = w - np.vdot(u, w) * u
        beta = float(np.linalg.norm(w))
        n_have = len(alphas)
        if n_have >= max(2 * n_states, 8) or beta < 1e-14:
            theta, s = scipy.linalg.eigh_tridiagonal(
                np.array(alphas), np.array(betas) if betas else np.zeros(0)
            )
            residuals = beta * np.abs(s[-1, :n_states]) if n_have >= n_states else [np.inf]
            if (n_have >= n_states and np.max(residuals) < tol) or beta < 1e-14:
                v_mat = np.column_stack(basis)
                vecs = v_mat @ s[:, :n_states]
                return theta[:n_states], vecs
        if beta < 1e-14:
            break
        betas.append(beta)
        basis.append(w / beta)
    raise RuntimeError(f"Lanczos failed to converge {n_states} states in {max_steps} steps")


def fci_solve(
    hamiltonian: SparseOperator, n_states: int = 1, tol: float = 1e-10
) -> tuple[np.ndarray, list[StateVector]]:
    """Exact lowest eigenpairs of a sector Hamiltonian.

    Returns ``(energies, states)`` with ``energies`` ascending and each
    state normalized with a deterministic global phase.  Every returned
    pair is verified against ``|H v - E v| <= 100 * tol * max(1, |E|)``.
    """
    dim = len(hamiltonian.basis)
    if not 1 <= n_states <= dim:
        raise ValueError(f"n_states {n_states} outside [1, {dim}]")
    if not hamiltonian.is_hermitian(1e-10):
        raise ValueError("fci_solve expects a Hermitian operator")
    if dim <= DENSE_CUTOFF:
        energies, vectors = np.linalg.eigh(hamiltonian.dense())
        energies = energies[:n_states]
        vectors = vectors[:, :n_states]
    else:
        energies, vectors = _lanczos_lowest(hamiltonian.matrix, n_states, tol)
    states = []
    for col in range(n_states):
        vec = _fix_phase(vectors[:, col].astype(complex))
        vec /= np.linalg.norm(vec)
        resid = np.linalg.norm(hamiltonian.matrix @ vec - energies[col] * vec)
        if resid > 100 * tol * max(1.0, abs(energies[col])):
            raise RuntimeError(f"eigenpair {col} residual {resid:.2e} exceeds tolerance")
        states.append(StateVector(hamiltonian.basis, vec))
    return np.asarray(energies, dtype=float), states


def dense_expm_apply(op: SparseOperator, psi: StateVector, scale: complex = 1.0) -> StateVector:
    """Apply ``exp(scale * op)`` by forming the full matrix exponential."""
    if op.basis != psi.basis:
        raise ValueError("operator and state use different bases")
    if psi.n_ancilla != 0:
        raise ValueError("dense_expm_apply expects an ancilla-free state")
    mat = scipy.linalg.expm(scale * op.dense())
    return StateVector(psi.basis, mat @ psi.amplitudes, 0, psi.success_prob)
