"""Hermitian-matrix primitives shared by every learner in the package."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
import numpy.linalg as npl


@dataclass(frozen=True)
class Tolerances:
    """Numerical tolerances used by validators and invariant checks.

    sym_tol and recon_tol are relative to the matrix scale; the rest are
    absolute. eval_floor is the threshold below which an eigenvalue is
    treated as an exact zero inside entropy computations.
    """

    sym_tol: float = 1e-12
    psd_tol: float = 1e-10
    trace_tol: float = 1e-9
    recon_tol: float = 1e-10
    ent_tol: float = 1e-9
    eval_floor: float = 1e-300


DEFAULT_TOLS = Tolerances()


class ValidationError(ValueError):
    """An input fails a structural invariant (shape, hermiticity, trace...)."""


class DomainError(ValueError):
    """A value is outside the mathematical domain of the requested operation."""


class SpectralDecomposition(NamedTuple):
    eigenvalues: np.ndarray   # ascending, real
    eigenvectors: np.ndarray  # columns, unitary


def hermitianize(M: np.ndarray) -> np.ndarray:
    """Return the Hermitian part (M + M^dagger) / 2."""
    return (M + M.conj().T) / 2


def spectral(H: np.ndarray) -> SpectralDecomposition:
    """Eigendecomposition of the Hermitian part of H, eigenvalues ascending."""
    try:
        w, V = npl.eigh(hermitianize(np.asarray(H)))
    except npl.LinAlgError as exc:
        raise DomainError(f"eigendecomposition failed: {exc}") from exc
    return SpectralDecomposition(w, V)


def matrix_fn(H: np.ndarray, f: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """Apply a scalar function to a Hermitian matrix through its eigenvalues."""
    w, V = spectral(H)
    with np.errstate(all="ignore"):
        fw = f(w)
    if not np.all(np.isfinite(fw)):
        bad = w[~np.isfinite(fw)][0]
        raise DomainError(f"eigenvalue {bad!r} is outside the domain of {f}")
    return hermitianize((V * fw) @ V.conj().T)


def herm_exp(H: np.ndarray) -> np.ndarray:
    """exp(H) for Hermitian H. No internal shift; the caller owns the scale."""
    return matrix_fn(H, np.exp)


def herm_log(H: np.ndarray, floor: float = DEFAULT_TOLS.eval_floor) -> np.ndarray:
    """log(H) for Hermitian positive-definite H.

    Eigenvalues at or below `floor` are rejected rather than clipped: the
    learners only ever take logs of matrices that are provably bounded away
    from singular, so hitting the floor means something upstream went wrong.
    """
    w, V = spectral(H)
    if w[0] <= floor:
        raise DomainError(f"eigenvalue {w[0]!r} is outside the domain of log")
    return hermitianize((V * np.log(w)) @ V.conj().T)


def hs_inner(A: np.ndarray, B: np.ndarray) -> float:
    """Hilbert-Schmidt inner product tr(A B) for Hermitian A and B.

    Computed as Re vdot(A, B) = Re tr(A^dagger B), which equals tr(A B) when
    A is Hermitian. The products and summation order are identical for
    hs_inner(A, B) and hs_inner(B, A), so the result is bitwise symmetric.
    """
    A = np.asarray(A)
    B = np.asarray(B)
    if A.shape != B.shape or A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValidationError(f"shape mismatch: {A.shape} vs {B.shape}")
    return float(np.vdot(A, B).real)


def quantum_relative_entropy(
    rho: np.ndarray, sigma: np.ndarray, tol: Tolerances = DEFAULT_TOLS
) -> float:
    """Relative entropy tr(rho log rho) - tr(rho log sigma) of density matrices.

    Eigenvalues at or below tol.eval_floor count as exact zeros: they are
    excluded from x log x terms (0 log 0 := 0), and a zero eigendirection of
    sigma is only tolerated where rho carries no weight. If rho puts more
    than tol.psd_tol of weight on the null space of sigma the entropy is
    +infinity mathematically and a DomainError here.
    """
    rho = np.asarray(rho)
    sigma = np.asarray(sigma)
    if rho.shape != sigma.shape:
        raise ValidationError(f"shape mismatch: {rho.shape} vs {sigma.shape}")
    lam, _ = spectral(rho)
    live = lam > tol.eval_floor
    term1 = float(np.sum(lam[live] * np.log(lam[live])))

    mu, V = spectral(sigma)
    # weight of rho along each eigendirection of sigma
    w = np.einsum("ji,jk,ki->i", V.conj(), rho, V).real
    null = mu <= tol.eval_floor
    if np.any(w[null] > tol.psd_tol):
        k = int(np.argmax(np.where(null, w, -np.inf)))
        raise DomainError(
            f"support violation: weight {w[k]:.3e} on a null eigendirection of sigma"
        )
    keep = ~null
    term2 = float(np.sum(w[keep] * np.log(mu[keep])))
    return term1 - term2


def validate_density(M: np.ndarray, tol: Tolerances = DEFAULT_TOLS) -> np.ndarray:
    """Check that M is a density matrix; return its hermitianized copy.

    Raises ValidationError naming the violated invariant and by how much.
    """
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {M.shape}")
    scale = max(1.0, float(npl.norm(M)))
    dev = float(npl.norm(M - M.conj().T))
    if dev > tol.sym_tol * scale:
        raise ValidationError(
            f"not Hermitian: ||M - M^dagger|| = {dev:.3e} exceeds {tol.sym_tol:.1e} relative"
        )
    H = hermitianize(M)
    w = npl.eigvalsh(H)
    if w[0] < -tol.psd_tol:
        raise ValidationError(
            f"not positive semidefinite: min eigenvalue {w[0]:.3e} below -{tol.psd_tol:.1e}"
        )
    tr_dev = abs(float(np.trace(H).real) - 1.0)
    if tr_dev > tol.trace_tol:
        raise ValidationError(
            f"trace deviates from 1 by {tr_dev:.3e}, tolerance {tol.trace_tol:.1e}"
        )
    return H


def validate_observation(A: np.ndarray, tol: Tolerances = DEFAULT_TOLS) -> np.ndarray:
    """Check that A is a nonzero PSD Hermitian matrix; return it hermitianized."""
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {A.shape}")
    if not np.any(A):
        raise ValidationError("observation matrix is exactly zero")
    scale = max(1.0, float(npl.norm(A)))
    dev = float(npl.norm(A - A.conj().T))
    if dev > tol.sym_tol * scale:
        raise ValidationError(
            f"not Hermitian: ||A - A^dagger|| = {dev:.3e} exceeds {tol.sym_tol:.1e} relative"
        )
    H = hermitianize(A)
    w = npl.eigvalsh(H)
    if w[0] < -tol.psd_tol:
        raise ValidationError(
            f"not positive semidefinite: min eigenvalue {w[0]:.3e} below -{tol.psd_tol:.1e}"
        )
    return H


def golden_thompson_gap(A: np.ndarray, B: np.ndarray) -> float:
    """tr(exp(A) exp(B)) - tr(exp(A + B)) for Hermitian A, B. Nonnegative."""
    A = hermitianize(np.asarray(A))
    B = hermitianize(np.asarray(B))
    if A.shape != B.shape:
        raise ValidationError(f"shape mismatch: {A.shape} vs {B.shape}")
    product_side = hs_inner(herm_exp(A), herm_exp(B))
    sum_side = float(np.sum(np.exp(npl.eigvalsh(A + B))))
    return product_side - sum_side
