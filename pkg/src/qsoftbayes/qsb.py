"""Online quantum state tomography with the matrix Soft-Bayes learner.

Each round the learner announces a density matrix rho_t, an opponent reveals
a nonzero PSD observation A_t, and the learner pays -log tr(A_t rho_t). The
update multiplies unnormalized weights W_t by (1 - eta) I + eta A_t / tr(A_t rho_t)
inside a matrix exponential/logarithm sandwich.

The state keeps log W_t as a running Hermitian accumulator: each step adds
one matrix logarithm, which is exact (exp and log of Hermitian matrices
invert each other) and avoids re-taking logs of stored exponentials. The
accumulator's top eigenvalue is folded into a scalar `shift` every step so
that taking exp never over- or underflows, even over 10^5-round runs where
the unnormalized trace drops below double-precision range. The trace of the
true weights, exp(shift) * tr(exp(logW)), is tracked per step because the
theory guarantees it never exceeds 1 and never increases.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .linalg import (
    DomainError,
    ValidationError,
    herm_log,
    hermitianize,
    hs_inner,
    spectral,
    validate_observation,
)
from .portfolio import learning_rate


@dataclass(frozen=True)
class QsbState:
    """Immutable per-round state of the learner.

    log_weights carries log W_t minus shift * I; its largest eigenvalue is
    zero after the first update, so exp(log_weights) is always representable.
    true_trace and rho_min_eig are cached from the eigendecomposition that
    produced rho, since transcripts report both every round.
    """

    log_weights: np.ndarray
    shift: float
    rho: np.ndarray
    round: int
    true_trace: float
    rho_min_eig: float

    @property
    def dim(self) -> int:
        return self.rho.shape[0]


@dataclass(frozen=True)
class QstTranscript:
    """Per-round record of one online tomography game."""

    eta: float
    losses: np.ndarray         # (T,)
    true_traces: np.ndarray    # (T,), trace of the announced state's weights
    min_eigs: np.ndarray       # (T,), smallest eigenvalue of announced rho
    step_times_ns: np.ndarray  # (T,), update cost on a monotonic clock
    average_state: np.ndarray  # mean of the announced density matrices
    final_state: QsbState

    @property
    def cumulative_losses(self) -> np.ndarray:
        return np.cumsum(self.losses)

    @property
    def total_loss(self) -> float:
        return float(np.sum(self.losses))


def qsb_init(dim: int) -> QsbState:
    """Start at the maximally mixed state with unit weight trace."""
    if dim < 1:
        raise ValidationError(f"dim must be positive, got {dim}")
    return QsbState(
        log_weights=-math.log(dim) * np.eye(dim, dtype=complex),
        shift=0.0,
        rho=np.eye(dim, dtype=complex) / dim,
        round=1,
        true_trace=1.0,
        rho_min_eig=1.0 / dim,
    )


def qsb_step(state: QsbState, A: np.ndarray, eta: float) -> QsbState:
    """One update of the weights by (1 - eta) I + eta A / tr(A rho)."""
    if not 0.0 < eta < 1.0:
        raise DomainError(f"eta must be in (0, 1), got {eta!r}")
    A = np.asarray(A)
    if not np.any(A):
        raise ValidationError("observation matrix is exactly zero")
    overlap = float(np.vdot(A, state.rho).real)
    if overlap <= 0.0:
        raise DomainError(f"tr(A rho) = {overlap!r} is not positive")

    dim = state.dim
    G = (1.0 - eta) * np.eye(dim) + (eta / overlap) * A
    log_G = herm_log(G)
    L = hermitianize(state.log_weights + log_G)
    lam, V = spectral(L)

    # fold the top eigenvalue into the scalar shift so exp stays in range
    top = float(lam[-1])
    p = np.exp(lam - top)
    total = float(p.sum())
    rho = hermitianize((V * (p / total)) @ V.conj().T)
    shift = state.shift + top
    return QsbState(
        log_weights=L - top * np.eye(dim),
        shift=shift,
        rho=rho,
        round=state.round + 1,
        true_trace=math.exp(shift + math.log(total)),
        rho_min_eig=float(p[0]) / total,
    )


def qsb_regret_bound(dim: int, rounds: float) -> float:
    """Regret guarantee 2 sqrt(T D log D) + log D, the same form as the
    classical game's bound."""
    if dim < 2:
        raise DomainError(f"dim must be at least 2, got {dim}")
    if rounds < 1:
        raise DomainError(f"rounds must be at least 1, got {rounds}")
    return 2.0 * math.sqrt(rounds * dim * math.log(dim)) + math.log(dim)


def run_qst_game(stream: np.ndarray, eta: float | None = None) -> QstTranscript:
    """Play the tomography game against a (T, D, D) stream of observations.

    Validation happens up front; the recorded per-step times cover only the
    state update.
    """
    stream = np.asarray(stream, dtype=complex)
    if stream.ndim != 3 or stream.shape[0] < 1:
        raise ValidationError(f"expected a nonempty (T, D, D) stream, got shape {stream.shape}")
    rounds, dim = stream.shape[0], stream.shape[1]
    validated = np.empty_like(stream)
    for t in range(rounds):
        try:
            validated[t] = validate_observation(stream[t])
        except ValidationError as exc:
            raise ValidationError(f"round {t + 1}: {exc}") from exc
    if eta is None:
        eta = learning_rate(dim, rounds)

    state = qsb_init(dim)
    losses = np.empty(rounds)
    true_traces = np.empty(rounds)
    min_eigs = np.empty(rounds)
    step_times = np.empty(rounds, dtype=np.int64)
    rho_sum = np.zeros((dim, dim), dtype=complex)
    for t in range(rounds):
        A = validated[t]
        value = float(np.vdot(A, state.rho).real)
        if value <= 0.0:
            raise DomainError(f"round {t + 1}: tr(A rho) = {value!r} is not positive")
        losses[t] = -math.log(value)
        true_traces[t] = state.true_trace
        min_eigs[t] = state.rho_min_eig
        rho_sum += state.rho
        t0 = time.perf_counter_ns()
        state = qsb_step(state, A, eta)
        step_times[t] = time.perf_counter_ns() - t0
    return QstTranscript(
        eta=eta,
        losses=losses,
        true_traces=true_traces,
        min_eigs=min_eigs,
        step_times_ns=step_times,
        average_state=hermitianize(rho_sum / rounds),
        final_state=state,
    )


def eta_bar(eta: float) -> float:
    """The rate eta / (1 - eta) that the regret analysis is written in."""
    if not 0.0 < eta < 1.0:
        raise DomainError(f"eta must be in (0, 1), got {eta!r}")
    return eta / (1.0 - eta)


def reverse_jensen_gap(X: np.ndarray, rho: np.ndarray, eta: float) -> float:
    """Slack of the reverse Jensen inequality for the matrix logarithm.

    Returns (1/eta) <log((1-eta) I + eta X), rho> + tr log(I + eta/(1-eta) X)
    minus log <X, rho>, which is nonnegative for PSD X and density rho.
    """
    if not 0.0 < eta < 1.0:
        raise DomainError(f"eta must be in (0, 1), got {eta!r}")
    X = np.asarray(X)
    rho = np.asarray(rho)
    overlap = hs_inner(X, rho)
    if overlap <= 0.0:
        raise DomainError(f"tr(X rho) = {overlap!r} is not positive")
    mu, V = spectral(X)
    if (1.0 - eta) + eta * mu[0] <= 0.0:
        raise DomainError(f"X eigenvalue {mu[0]!r} makes the mixed matrix singular")
    log_mix = hermitianize((V * np.log((1.0 - eta) + eta * mu)) @ V.conj().T)
    term1 = hs_inner(log_mix, rho) / eta
    term2 = float(np.sum(np.log1p(eta_bar(eta) * mu)))
    return term1 + term2 - math.log(overlap)
