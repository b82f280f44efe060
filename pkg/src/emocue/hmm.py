"""Continuous-density left-to-right HMMs with diagonal-covariance GMM emissions.

States are indexed 0..N-1. The topology is strictly left-to-right: a state
may loop on itself or advance by one, the last state is absorbing, and all
probability starts in state 0. Scoring and training run entirely in natural
log space.

Conventions:

* forward_log_likelihood sums over all paths regardless of the final state,
* viterbi decodes the best path that ends in the last state, so a decodable
  sequence must be at least num_states frames long.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import (
    DimensionMismatchError,
    EmptySequenceError,
    EmptyTrainingSetError,
    NoLegalPathError,
    NumericalUnderflowError,
    SequenceTooShortError,
    UnsupportedFormatError,
)

VARIANCE_FLOOR = 1e-4
EM_TOL = 1e-5
EM_MAX_ITERS = 40

_LOG_2PI = np.log(2.0 * np.pi)
_ROW_SUM_TOL = 1e-9


def _readonly(a: np.ndarray, dtype=np.float64) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class GaussianMixture:
    """Diagonal-covariance Gaussian mixture over one emission state."""

    weights: np.ndarray    # (M,)
    means: np.ndarray      # (M, D)
    variances: np.ndarray  # (M, D)

    def __post_init__(self):
        weights = np.asarray(self.weights, dtype=np.float64)
        means = np.asarray(self.means, dtype=np.float64)
        variances = np.asarray(self.variances, dtype=np.float64)
        if weights.ndim != 1 or means.ndim != 2 or variances.shape != means.shape:
            raise ValueError("expected weights (M,), means and variances (M, D)")
        if weights.size != means.shape[0]:
            raise ValueError("one weight per component required")
        if np.any(weights < 0.0) or abs(weights.sum() - 1.0) > _ROW_SUM_TOL:
            raise ValueError("weights must be non-negative and sum to 1")
        if np.any(variances <= 0.0):
            raise ValueError("variances must be strictly positive")
        object.__setattr__(self, "weights", _readonly(weights))
        object.__setattr__(self, "means", _readonly(means))
        object.__setattr__(self, "variances", _readonly(variances))

    @property
    def num_components(self) -> int:
        return self.weights.size

    @property
    def dim(self) -> int:
        return self.means.shape[1]


@dataclass(frozen=True)
class AcousticModel:
    """Left-to-right GMM-HMM. All initial probability sits on state 0."""

    num_states: int
    feature_dim: int
    transitions: np.ndarray                 # (N, N), banded row-stochastic
    mixtures: tuple[GaussianMixture, ...]   # one per state

    def __post_init__(self):
        n = self.num_states
        transitions = np.asarray(self.transitions, dtype=np.float64)
        mixtures = tuple(self.mixtures)
        if n < 1:
            raise ValueError("num_states must be >= 1")
        if transitions.shape != (n, n):
            raise ValueError(f"transitions must be ({n}, {n})")
        if len(mixtures) != n:
            raise ValueError("one mixture per state required")
        band = np.triu(np.tril(np.ones((n, n), dtype=bool), 1))
        if np.any(transitions[~band] != 0.0):
            raise ValueError("only self and single-step transitions may be nonzero")
        if np.any(transitions < 0.0):
            raise ValueError("transition probabilities must be non-negative")
        if np.any(np.abs(transitions.sum(axis=1) - 1.0) > _ROW_SUM_TOL):
            raise ValueError("transition rows must sum to 1")
        for mix in mixtures:
            if mix.dim != self.feature_dim:
                raise ValueError("mixture dimension must match feature_dim")
        object.__setattr__(self, "transitions", _readonly(transitions))
        object.__setattr__(self, "mixtures", mixtures)


@dataclass(frozen=True)
class TrainingReport:
    """Per-iteration log-likelihoods of a Baum-Welch run.

    Each entry is the total training-set log-likelihood evaluated before the
    corresponding parameter update; EM makes the list non-decreasing.
    """

    log_likelihood_per_iteration: tuple[float, ...]
    iterations_run: int
    converged: bool


def _as_observations(model: AcousticModel, seq) -> np.ndarray:
    obs = np.asarray(seq, dtype=np.float64)
    if obs.ndim != 2:
        raise DimensionMismatchError(f"observations must be 2-D, got shape {obs.shape}")
    if obs.shape[0] == 0:
        raise EmptySequenceError("empty observation sequence")
    if obs.shape[1] != model.feature_dim:
        raise DimensionMismatchError(
            f"model expects dimension {model.feature_dim}, got {obs.shape[1]}")
    return obs


def _mixture_log_densities(mix: GaussianMixture, obs: np.ndarray) -> np.ndarray:
    """Per-component log densities, shape (T, M), weights not applied."""
    diff = obs[:, None, :] - mix.means[None, :, :]
    # an extreme outlier may overflow the squared distance; the resulting
    # -inf log density is the correct saturation
    with np.errstate(over="ignore"):
        quad = np.sum(diff * diff / mix.variances[None, :, :], axis=2)
    log_norm = np.sum(np.log(mix.variances), axis=1) + mix.dim * _LOG_2PI
    return -0.5 * (quad + log_norm[None, :])


def _log_weights(weights: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(weights)


def state_log_densities(model: AcousticModel, obs: np.ndarray) -> np.ndarray:
    """log b_j(o_t) for every frame and state, shape (T, N)."""
    cols = [logsumexp(_mixture_log_densities(mix, obs) + _log_weights(mix.weights),
                      axis=1)
            for mix in model.mixtures]
    return np.stack(cols, axis=1)


def _log_band(model: AcousticModel):
    """Log self-loop and advance probabilities of the transition band."""
    with np.errstate(divide="ignore"):
        la_self = np.log(np.diag(model.transitions))
        la_next = np.log(np.diag(model.transitions, 1))
    return la_self, la_next


def _forward_matrix(model: AcousticModel, logb: np.ndarray) -> np.ndarray:
    la_self, la_next = _log_band(model)
    t_len, n = logb.shape
    alpha = np.full((t_len, n), -np.inf)
    alpha[0, 0] = logb[0, 0]
    for t in range(1, t_len):
        stay = alpha[t - 1] + la_self
        move = np.full(n, -np.inf)
        move[1:] = alpha[t - 1, :-1] + la_next
        alpha[t] = np.logaddexp(stay, move) + logb[t]
    return alpha


def _backward_matrix(model: AcousticModel, logb: np.ndarray) -> np.ndarray:
    la_self, la_next = _log_band(model)
    t_len, n = logb.shape
    beta = np.full((t_len, n), -np.inf)
    beta[t_len - 1] = 0.0
    for t in range(t_len - 2, -1, -1):
        stay = la_self + logb[t + 1] + beta[t + 1]
        move = np.full(n, -np.inf)
        move[:-1] = la_next + logb[t + 1, 1:] + beta[t + 1, 1:]
        beta[t] = np.logaddexp(stay, move)
    return beta


def forward_log_likelihood(model: AcousticModel, seq) -> float:
    """Total log-likelihood of the sequence, summed over all state paths."""
    obs = _as_observations(model, seq)
    alpha = _forward_matrix(model, state_log_densities(model, obs))
    return float(logsumexp(alpha[-1]))


def forward_backward(model: AcousticModel, seq):
    """Log-space forward and backward matrices, each of shape (T, N).

    For every t, logsumexp(alpha[t] + beta[t]) equals the total
    log-likelihood of the sequence.
    """
    obs = _as_observations(model, seq)
    logb = state_log_densities(model, obs)
    return _forward_matrix(model, logb), _backward_matrix(model, logb)


def viterbi(model: AcousticModel, seq):
    """Best state path that starts in state 0 and ends in state N-1.

    Returns (path, log_probability) where path is an int array of state
    indices. Ties between looping and advancing resolve to looping.
    """
    obs = _as_observations(model, seq)
    logb = state_log_densities(model, obs)
    la_self, la_next = _log_band(model)
    t_len, n = logb.shape

    delta = np.full((t_len, n), -np.inf)
    prev = np.zeros((t_len, n), dtype=np.int64)
    delta[0, 0] = logb[0, 0]
    for t in range(1, t_len):
        stay = delta[t - 1] + la_self
        move = np.full(n, -np.inf)
        move[1:] = delta[t - 1, :-1] + la_next
        take_stay = stay >= move
        delta[t] = np.where(take_stay, stay, move) + logb[t]
        prev[t] = np.where(take_stay, np.arange(n), np.arange(n) - 1)

    log_prob = delta[t_len - 1, n - 1]
    if not np.isfinite(log_prob):
        raise NoLegalPathError(
            f"no left-to-right path through {n} states fits {t_len} frames")
    path = np.empty(t_len, dtype=np.int64)
    path[-1] = n - 1
    for t in range(t_len - 1, 0, -1):
        path[t - 1] = prev[t, path[t]]
    return path, float(log_prob)


# --- initialization ----------------------------------------------------------

def _kmeans(frames: np.ndarray, k: int) -> np.ndarray:
    """Deterministic k-means labels for the given frames.

    Centers are seeded at evenly spaced quantiles along the highest-variance
    dimension, then refined by Lloyd iterations. The procedure depends only
    on the multiset of frames, so duplicating the data leaves it unchanged.
    """
    n = frames.shape[0]
    spread_dim = int(np.argmax(frames.var(axis=0)))
    order = np.argsort(frames[:, spread_dim], kind="stable")
    seed_positions = ((np.arange(k) + 0.5) * n / k).astype(np.int64)
    centers = frames[order[seed_positions]].copy()

    labels = None
    for _ in range(100):
        dist = np.sum((frames[:, None, :] - centers[None, :, :]) ** 2, axis=2)
        new_labels = np.argmin(dist, axis=1)
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for j in range(k):
            members = frames[labels == j]
            if members.shape[0] > 0:
                centers[j] = members.mean(axis=0)
    return labels


def _mixture_from_frames(frames: np.ndarray, num_mixtures: int,
                         variance_floor: float) -> GaussianMixture:
    labels = _kmeans(frames, num_mixtures)
    n, dim = frames.shape
    weights = np.zeros(num_mixtures)
    means = np.zeros((num_mixtures, dim))
    variances = np.full((num_mixtures, dim), variance_floor)
    overall_mean = frames.mean(axis=0)
    for j in range(num_mixtures):
        members = frames[labels == j]
        weights[j] = members.shape[0] / n
        if members.shape[0] > 0:
            means[j] = members.mean(axis=0)
            variances[j] = np.maximum(members.var(axis=0), variance_floor)
        else:
            # Empty cluster: park a zero-weight component at the chunk mean.
            means[j] = overall_mean
    return GaussianMixture(weights=weights, means=means, variances=variances)


def init_model(sequences, num_states: int, num_mixtures: int,
               variance_floor: float = VARIANCE_FLOOR,
               seed: int | None = None) -> AcousticModel:
    """Segmental initialization: uniform chunking plus per-state k-means.

    Each sequence is cut into num_states contiguous chunks; the pooled
    frames of chunk i seed state i's mixture. Transitions start at 0.5 for
    looping and advancing (the last state is absorbing). The k-means stage
    is deterministic, so the seed only fixes the contract for callers.
    """
    if num_states < 1 or num_mixtures < 1:
        raise ValueError("num_states and num_mixtures must be >= 1")
    del seed
    arrays = [np.asarray(s, dtype=np.float64) for s in sequences]
    if not arrays:
        raise EmptyTrainingSetError("no training sequences")
    dim = arrays[0].shape[1] if arrays[0].ndim == 2 else -1
    for a in arrays:
        if a.ndim != 2 or a.shape[1] != dim:
            raise DimensionMismatchError("sequences must share one feature dimension")
        if a.shape[0] < num_states:
            raise SequenceTooShortError(
                f"sequence of {a.shape[0]} frames cannot seed {num_states} states")

    chunks = [np.array_split(a, num_states) for a in arrays]
    mixtures = tuple(
        _mixture_from_frames(
            np.concatenate([c[i] for c in chunks]), num_mixtures, variance_floor)
        for i in range(num_states))

    transitions = np.zeros((num_states, num_states))
    for i in range(num_states - 1):
        transitions[i, i] = 0.5
        transitions[i, i + 1] = 0.5
    transitions[num_states - 1, num_states - 1] = 1.0
    return AcousticModel(num_states=num_states, feature_dim=dim,
                         transitions=transitions, mixtures=mixtures)


# --- training ----------------------------------------------------------------

def _accumulate(model: AcousticModel, obs: np.ndarray, stats: dict) -> float:
    """One E-step over a single sequence; returns its log-likelihood."""
    n = model.num_states
    comp_ld = [_mixture_log_densities(mix, obs) + _log_weights(mix.weights)
               for mix in model.mixtures]                    # N x (T, M)
    logb = np.stack([logsumexp(c, axis=1) for c in comp_ld], axis=1)
    alpha = _forward_matrix(model, logb)
    beta = _backward_matrix(model, logb)
    ll = float(logsumexp(alpha[-1]))
    if not np.isfinite(ll):
        raise NumericalUnderflowError("sequence has zero likelihood under the model")

    gamma = np.exp(alpha + beta - ll)                        # (T, N)
    la_self, la_next = _log_band(model)
    if obs.shape[0] > 1:
        # Band transition counts: xi over t for i->i and i->i+1.
        stay = alpha[:-1] + la_self + logb[1:] + beta[1:] - ll
        move = alpha[:-1, :-1] + la_next + logb[1:, 1:] + beta[1:, 1:] - ll
        stats["stay"] += np.exp(logsumexp(stay, axis=0))
        stats["move"] += np.exp(logsumexp(move, axis=0))

    for j in range(n):
        # Responsibilities split each state's occupancy across components.
        resp = gamma[:, j, None] * np.exp(comp_ld[j] - logb[:, j, None])
        stats["resp"][j] += resp.sum(axis=0)
        stats["obs_sum"][j] += resp.T @ obs
        stats["sq_sum"][j] += resp.T @ (obs * obs)
    return ll


def _reestimate(model: AcousticModel, stats: dict,
                variance_floor: float) -> AcousticModel:
    n = model.num_states
    transitions = np.zeros((n, n))
    for i in range(n - 1):
        out = stats["stay"][i] + stats["move"][i]
        if out > 0.0:
            transitions[i, i] = stats["stay"][i] / out
            transitions[i, i + 1] = stats["move"][i] / out
        else:
            # State never left during training data: keep its previous row.
            transitions[i, i] = model.transitions[i, i]
            transitions[i, i + 1] = model.transitions[i, i + 1]
    transitions[n - 1, n - 1] = 1.0

    mixtures = []
    for j in range(n):
        resp = stats["resp"][j]
        total = resp.sum()
        old = model.mixtures[j]
        if total <= 0.0:
            mixtures.append(old)
            continue
        weights = resp / total
        means = np.where(resp[:, None] > 0.0,
                         stats["obs_sum"][j] / np.maximum(resp[:, None], 1e-300),
                         old.means)
        second = np.where(resp[:, None] > 0.0,
                          stats["sq_sum"][j] / np.maximum(resp[:, None], 1e-300),
                          old.variances + old.means ** 2)
        variances = np.maximum(second - means ** 2, variance_floor)
        mixtures.append(GaussianMixture(weights=weights, means=means,
                                        variances=variances))
    return AcousticModel(num_states=n, feature_dim=model.feature_dim,
                         transitions=transitions, mixtures=tuple(mixtures))


def baum_welch(model: AcousticModel, sequences, max_iters: int = EM_MAX_ITERS,
               tol: float = EM_TOL,
               variance_floor: float = VARIANCE_FLOOR):
    """Multi-sequence EM refinement of an acoustic model.

    Stops once the relative log-likelihood improvement falls below tol or
    after max_iters expectation passes. Returns the refined model and a
    TrainingReport; the report's likelihood list is non-decreasing.
    """
    arrays = [np.asarray(s, dtype=np.float64) for s in sequences]
    if not arrays:
        raise EmptyTrainingSetError("no training sequences")
    for a in arrays:
        _as_observations(model, a)
        if a.shape[0] < model.num_states:
            raise SequenceTooShortError(
                f"sequence of {a.shape[0]} frames is shorter than "
                f"{model.num_states} states")

    current = model
    lls: list[float] = []
    converged = False
    for _ in range(max_iters):
        n = current.num_states
        stats = {
            "stay": np.zeros(n), "move": np.zeros(n - 1),
            "resp": [np.zeros(mix.num_components) for mix in current.mixtures],
            "obs_sum": [np.zeros((mix.num_components, current.feature_dim))
                        for mix in current.mixtures],
            "sq_sum": [np.zeros((mix.num_components, current.feature_dim))
                       for mix in current.mixtures],
        }
        ll = sum(_accumulate(current, a, stats) for a in arrays)
        lls.append(ll)
        if len(lls) > 1:
            gain = lls[-1] - lls[-2]
            if gain < tol * max(1.0, abs(lls[-2])):
                converged = True
                break
        current = _reestimate(current, stats, variance_floor)
    return current, TrainingReport(log_likelihood_per_iteration=tuple(lls),
                                   iterations_run=len(lls),
                                   converged=converged)


# --- persistence -------------------------------------------------------------

FILE_FORMAT = "emocue-model"
FILE_VERSION = 1


def model_to_dict(model: AcousticModel) -> dict:
    return {
        "num_states": model.num_states,
        "feature_dim": model.feature_dim,
        "transitions": model.transitions.tolist(),
        "states": [{"weights": mix.weights.tolist(),
                    "means": mix.means.tolist(),
                    "variances": mix.variances.tolist()}
                   for mix in model.mixtures],
    }


def model_from_dict(payload: dict) -> AcousticModel:
    mixtures = tuple(
        GaussianMixture(weights=np.array(s["weights"]),
                        means=np.array(s["means"]),
                        variances=np.array(s["variances"]))
        for s in payload["states"])
    return AcousticModel(num_states=payload["num_states"],
                         feature_dim=payload["feature_dim"],
                         transitions=np.array(payload["transitions"]),
                         mixtures=mixtures)


def save_model(model: AcousticModel, path) -> None:
    """Write the model as versioned JSON; parameters round-trip bit-exactly."""
    payload = {"format": FILE_FORMAT, "version": FILE_VERSION,
               "kind": "acoustic", **model_to_dict(model)}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)
        fh.write("\n")


def load_model(path) -> AcousticModel:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("format") != FILE_FORMAT or payload.get("version") != FILE_VERSION:
        raise UnsupportedFormatError(f"{path}: not a recognized model file")
    if payload.get("kind") != "acoustic":
        raise UnsupportedFormatError(
            f"{path}: expected an acoustic model, got {payload.get('kind')!r}")
    return model_from_dict(payload)
