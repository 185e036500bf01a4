"""Maximum-likelihood quantum state tomography.

Provides the measurement side of the problem (POVMs, synthetic datasets
sampled from a true state), the negative average log-likelihood objective,
the stochastic online-to-batch estimator built on the Q-Soft-Bayes learner,
and an independent batch solver used as the optimization-error oracle.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .ensembles import make_rng
from .linalg import (
    DEFAULT_TOLS,
    DomainError,
    Tolerances,
    ValidationError,
    hermitianize,
    spectral,
    validate_density,
    validate_observation,
)
from .portfolio import SolverError, learning_rate
from .qsb import qsb_init, qsb_step


@dataclass(frozen=True)
class Dataset:
    """A stack of measurement-outcome matrices, optionally with provenance."""

    matrices: np.ndarray                 # (N, D, D)
    povm_indices: np.ndarray | None = None
    outcome_indices: np.ndarray | None = None

    def __len__(self) -> int:
        return self.matrices.shape[0]

    @property
    def dim(self) -> int:
        return self.matrices.shape[1]

    @property
    def has_provenance(self) -> bool:
        return self.povm_indices is not None and self.outcome_indices is not None


@dataclass(frozen=True)
class MlResult:
    """Output of one stochastic estimation run."""

    rho_bar: np.ndarray
    checkpoints: np.ndarray       # rounds at which the objective was evaluated
    objective_values: np.ndarray  # f of the running average at each checkpoint
    eta: float
    seed: int
    rounds: int

    @property
    def final_objective(self) -> float:
        if len(self.objective_values) == 0:
            raise ValueError("no checkpoints were recorded")
        return float(self.objective_values[-1])


def validate_povm(elements: np.ndarray, tol: Tolerances = DEFAULT_TOLS) -> np.ndarray:
    """Check PSD elements summing to the identity; return a (J, D, D) stack."""
    M = np.asarray(elements, dtype=complex)
    if M.ndim != 3 or M.shape[1] != M.shape[2] or M.shape[0] < 1:
        raise ValidationError(f"expected a (J, D, D) stack of elements, got shape {M.shape}")
    for j in range(M.shape[0]):
        try:
            validate_observation(M[j], tol)
        except ValidationError as exc:
            raise ValidationError(f"element {j}: {exc}") from exc
    dev = float(np.abs(M.sum(axis=0) - np.eye(M.shape[1])).max())
    if dev > tol.trace_tol:
        raise ValidationError(f"elements sum to identity only within {dev:.3e}")
    return M


def validate_dataset(data: Dataset, tol: Tolerances = DEFAULT_TOLS) -> Dataset:
    """Check every record is a valid observation; return the dataset."""
    M = np.asarray(data.matrices)
    if M.ndim != 3 or M.shape[1] != M.shape[2] or M.shape[0] < 1:
        raise ValidationError(f"expected a nonempty (N, D, D) stack, got shape {M.shape}")
    for n in range(M.shape[0]):
        try:
            validate_observation(M[n], tol)
        except ValidationError as exc:
            raise ValidationError(f"record {n}: {exc}") from exc
    for name, idx in (("povm_indices", data.povm_indices), ("outcome_indices", data.outcome_indices)):
        if idx is not None and len(idx) != M.shape[0]:
            raise ValidationError(f"{name} has length {len(idx)}, expected {M.shape[0]}")
    return data


def _overlaps(matrices: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """tr(A_n rho) for every record, as a real vector."""
    return np.einsum("nij,ji->n", matrices, rho).real


def ml_objective(rho: np.ndarray, data: Dataset) -> float:
    """Negative mean log-likelihood (1/N) sum_n -log tr(A_n rho)."""
    p = _overlaps(data.matrices, np.asarray(rho))
    if p.min() <= 0.0:
        n = int(np.argmin(p))
        raise DomainError(f"tr(A_n rho) = {p[n]!r} is not positive at record n={n}")
    return float(-np.log(p).mean())


def sample_outcome(
    rho: np.ndarray,
    povm: np.ndarray,
    rng: np.random.Generator,
    tol: Tolerances = DEFAULT_TOLS,
) -> tuple[int, np.ndarray]:
    """Draw one measurement outcome j with probability tr(M_j rho).

    Probabilities are clipped to [0, 1] and renormalized, but only when they
    deviate from the simplex by at most trace_tol; larger deviations mean the
    inputs were not a POVM and a density matrix. Sampling inverts the CDF on
    a single uniform draw, so the outcome stream is a pure function of the
    generator state.
    """
    M = np.asarray(povm, dtype=complex)
    p = _overlaps(M, np.asarray(rho))
    if p.min() < -tol.trace_tol or p.max() > 1.0 + tol.trace_tol or abs(p.sum() - 1.0) > tol.trace_tol:
        raise DomainError(
            f"outcome probabilities deviate from the simplex beyond {tol.trace_tol:.1e}: "
            f"min {p.min():.3e}, max {p.max():.3e}, sum {p.sum():.12f}"
        )
    p = np.clip(p, 0.0, 1.0)
    cdf = np.cumsum(p / p.sum())
    j = min(int(np.searchsorted(cdf, rng.random(), side="right")), len(p) - 1)
    return j, M[j]


def generate_dataset(
    rho_true: np.ndarray,
    povms: list[np.ndarray],
    shots: int,
    rng: np.random.Generator,
) -> Dataset:
    """Simulate `shots` measurements of rho_true, cycling through the POVMs.

    Shot n uses POVM n mod len(povms), so multi-POVM experiments are balanced
    and the record order is deterministic given the generator.
    """
    if shots < 1:
        raise ValidationError(f"shots must be positive, got {shots}")
    if len(povms) < 1:
        raise ValidationError("at least one POVM is required")
    rho_true = validate_density(rho_true)
    stacks = [validate_povm(p) for p in povms]
    dim = rho_true.shape[0]
    matrices = np.empty((shots, dim, dim), dtype=complex)
    povm_idx = np.empty(shots, dtype=np.int64)
    out_idx = np.empty(shots, dtype=np.int64)
    for n in range(shots):
        k = n % len(stacks)
        j, M = sample_outcome(rho_true, stacks[k], rng)
        matrices[n] = M
        povm_idx[n] = k
        out_idx[n] = j
    return Dataset(matrices=matrices, povm_indices=povm_idx, outcome_indices=out_idx)


_QUBIT_BASES = {
    "X": np.array([[1, 1], [1, -1]], dtype=complex).T / math.sqrt(2),
    "Y": np.array([[1, 1j], [1, -1j]], dtype=complex).T / math.sqrt(2),
    "Z": np.eye(2, dtype=complex),
}


def pauli_basis_povms(qubits: int) -> list[np.ndarray]:
    """Rank-one projective POVMs for every Pauli string in {X, Y, Z}^q.

    Returns 3^q stacks of 2^q projectors; outcome j of a POVM projects onto
    the tensor product of single-qubit eigenvectors selected by the bits of
    j, with bit 0 addressing the first qubit.
    """
    if qubits < 1:
        raise ValidationError(f"qubits must be positive, got {qubits}")
    dim = 2 ** qubits
    povms = []
    for string in itertools.product("XYZ", repeat=qubits):
        elements = np.empty((dim, dim, dim), dtype=complex)
        for j, bits in enumerate(itertools.product((0, 1), repeat=qubits)):
            v = np.ones(1, dtype=complex)
            for s, b in zip(string, bits):
                v = np.kron(v, _QUBIT_BASES[s][:, b])
            elements[j] = np.outer(v, v.conj())
        povms.append(elements)
    return povms


def _normalize_checkpoints(checkpoints, rounds: int) -> np.ndarray:
    if checkpoints is None:
        cps = []
        k = 1
        while k < rounds:
            cps.append(k)
            k *= 2
        cps.append(rounds)
        return np.array(sorted(set(cps)), dtype=np.int64)
    cps = np.array(sorted(set(int(c) for c in checkpoints)), dtype=np.int64)
    if len(cps) and (cps[0] < 1 or cps[-1] > rounds):
        raise ValidationError(f"checkpoints must lie in [1, {rounds}]")
    return cps


def stochastic_qsb(
    data: Dataset,
    rounds: int,
    eta: float | None = None,
    seed: int = 0,
    checkpoints=None,
) -> MlResult:
    """Estimate the ML state by running the learner on resampled records.

    Each round draws one record index uniformly (exactly one generator call,
    so runs can be randomness-coupled with the classical learner), feeds it
    to the online update, and accumulates the announced state. The returned
    estimate is the average of all announced states; the objective of the
    running average is evaluated at the requested checkpoints (default: a
    geometric schedule plus the final round).
    """
    validate_dataset(data)
    if rounds < 1:
        raise ValidationError(f"rounds must be at least 1, got {rounds}")
    dim = data.dim
    n_records = len(data)
    if eta is None:
        eta = learning_rate(dim, rounds)
    cps = _normalize_checkpoints(checkpoints, rounds)

    rng = make_rng(seed)
    state = qsb_init(dim)
    rho_sum = np.zeros((dim, dim), dtype=complex)
    values = np.empty(len(cps))
    cp_pos = 0
    for t in range(1, rounds + 1):
        rho_sum += state.rho
        if cp_pos < len(cps) and t == cps[cp_pos]:
            values[cp_pos] = ml_objective(hermitianize(rho_sum / t), data)
            cp_pos += 1
        idx = int(rng.integers(n_records))
        state = qsb_step(state, data.matrices[idx], eta)
    return MlResult(
        rho_bar=hermitianize(rho_sum / rounds),
        checkpoints=cps,
        objective_values=values,
        eta=eta,
        seed=seed,
        rounds=rounds,
    )


def stationarity_operator(rho: np.ndarray, data: Dataset) -> np.ndarray:
    """R(rho) = (1/N) sum_n A_n / tr(A_n rho).

    At an interior ML optimum R(rho) = I; in general the largest eigenvalue
    of R minus one is a duality gap for the ML problem, and tr(R(rho) rho)
    is identically one.
    """
    M = data.matrices
    p = _overlaps(M, np.asarray(rho))
    if p.min() <= 0.0:
        n = int(np.argmin(p))
        raise DomainError(f"tr(A_n rho) = {p[n]!r} is not positive at record n={n}")
    return hermitianize(np.einsum("n,nij->ij", 1.0 / p, M) / len(data))


def batch_ml_solve(
    data: Dataset, tol: float = 1e-7, max_iters: int = 100_000
) -> tuple[np.ndarray, float]:
    """Minimize the ML objective over density matrices; certified by duality gap.

    Iterates a monotone-guarded multiplicative fixed-point step (conjugation
    by R with trace renormalization, accepted only when the objective drops)
    and falls back to a line-searched step toward the top eigenvector of R
    otherwise. Terminates when lambda_max(R(rho)) - 1 <= tol, which certifies
    rho within tol of stationarity regardless of the path taken.
    """
    validate_dataset(data)
    M = data.matrices
    n_records, dim = M.shape[0], M.shape[1]
    rho = np.eye(dim, dtype=complex) / dim
    p = _overlaps(M, rho)
    if p.min() <= 0.0:
        raise DomainError("ML objective is infinite at the maximally mixed state")
    f = float(-np.log(p).mean())
    best_gap = math.inf

    for _ in range(max_iters):
        R = hermitianize(np.einsum("n,nij->ij", 1.0 / p, M) / n_records)
        lam, V = spectral(R)
        gap = float(lam[-1]) - 1.0
        best_gap = min(best_gap, gap)
        if gap <= tol:
            return hermitianize(rho / np.trace(rho).real), f

        # multiplicative step; monotone because acceptance is guarded
        cand = R @ rho @ R
        cand = hermitianize(cand / np.trace(cand).real)
        p_cand = _overlaps(M, cand)
        if p_cand.min() > 0.0:
            f_cand = float(-np.log(p_cand).mean())
            if f_cand < f:
                rho, p, f = cand, p_cand, f_cand
                continue

        # line-searched move toward the top eigenvector of R
        v = V[:, -1]
        q = np.einsum("i,nij,j->n", v.conj(), M, v).real
        step = _line_search(p, q)
        rho = hermitianize((1.0 - step) * rho + step * np.outer(v, v.conj()))
        p = (1.0 - step) * p + step * q
        f = float(-np.log(p).mean())

    raise SolverError(
        f"ML solver gap {best_gap:.3e} above tolerance {tol:.1e} after {max_iters} iterations",
        gap=best_gap,
        iterations=max_iters,
    )


def _line_search(p: np.ndarray, q: np.ndarray, iters: int = 80) -> float:
    """Step size minimizing -mean log((1-s) p + s q) over s in (0, 1).

    The derivative at 0 is negative whenever q comes from the top eigenvector
    of R, so a sign change (or the right endpoint) brackets the minimum; the
    objective is convex in s, making bisection on the derivative exact.
    """
    def deriv(s: float) -> float:
        return float(-np.mean((q - p) / ((1.0 - s) * p + s * q)))

    hi = 1.0 if q.min() > 0.0 else 1.0 - 1e-12
    if deriv(hi) <= 0.0 and q.min() > 0.0:
        return hi
    lo = 0.0
    for _ in range(iters):
        mid = (lo + hi) / 2.0
        if deriv(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2.0
