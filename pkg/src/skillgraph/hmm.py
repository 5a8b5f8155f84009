"""Left-to-right hidden Markov model with diagonal Gaussian emissions.

The policy model for one skill: hidden states play the role of underlying
keyframes, so the topology is a forward chain with self-loops and single-state
skips (no revisits).  Training is expectation-maximization with a deterministic
temporal-chunk initialization; covariances are floored so every density stays
proper on near-duplicate keyframes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError

COV_FLOOR = 1e-4
EM_TOL = 1e-4
EM_MAX_ITER = 100
EM_SLACK = 1e-8
TRANS_SMOOTH = 1e-3
MAX_STATES = 10
MIN_STATES = 2
DISTANCE_SEQUENCES = 32


def _logsumexp(a: np.ndarray, axis=None):
    m = np.max(a, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(a - m), axis=axis, keepdims=True)) + m
    if axis is None:
        return float(out)
    return np.squeeze(out, axis=axis)


def _topology_mask(k: int) -> np.ndarray:
    """Allowed transitions: stay, advance one, or skip one state."""
    mask = np.zeros((k, k), dtype=bool)
    for i in range(k):
        for j in (i, i + 1, i + 2):
            if j < k:
                mask[i, j] = True
    return mask


@dataclass
class GaussianHMM:
    initial: np.ndarray
    transitions: np.ndarray
    means: np.ndarray
    covariances: np.ndarray  # per-state diagonal variance vectors
    history: list = field(default_factory=list, repr=False, compare=False)

    def __post_init__(self):
        self.initial = np.asarray(self.initial, dtype=float)
        self.transitions = np.asarray(self.transitions, dtype=float)
        self.means = np.asarray(self.means, dtype=float)
        self.covariances = np.asarray(self.covariances, dtype=float)

    @property
    def n_states(self) -> int:
        return self.means.shape[0]

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def validate(self) -> None:
        k = self.n_states
        if self.initial.shape != (k,) or self.transitions.shape != (k, k):
            raise InvalidInputError("hmm parameter shapes disagree")
        if abs(float(self.initial.sum()) - 1.0) > 1e-9:
            raise InvalidInputError("initial distribution must sum to 1")
        if np.any(np.abs(self.transitions.sum(axis=1) - 1.0) > 1e-9):
            raise InvalidInputError("transition rows must sum to 1")
        if np.any(np.tril(self.transitions, k=-1) != 0.0):
            raise InvalidInputError("transitions below the diagonal must be zero")
        if np.any(self.covariances < COV_FLOOR - 1e-15):
            raise InvalidInputError("covariance entries below floor")

    def equals(self, other: "GaussianHMM") -> bool:
        return (
            self.initial.shape == other.initial.shape
            and self.means.shape == other.means.shape
            and np.array_equal(self.initial, other.initial)
            and np.array_equal(self.transitions, other.transitions)
            and np.array_equal(self.means, other.means)
            and np.array_equal(self.covariances, other.covariances)
        )

    def to_dict(self) -> dict:
        return {
            "initial": [float(v) for v in self.initial],
            "transitions": [[float(v) for v in row] for row in self.transitions],
            "means": [[float(v) for v in row] for row in self.means],
            "covariances": [[float(v) for v in row] for row in self.covariances],
        }

    @staticmethod
    def from_dict(d: dict) -> "GaussianHMM":
        return GaussianHMM(
            initial=np.array(d["initial"], dtype=float),
            transitions=np.array(d["transitions"], dtype=float),
            means=np.array(d["means"], dtype=float),
            covariances=np.array(d["covariances"], dtype=float),
        )


def _emission_logprob(hmm: GaussianHMM, x: np.ndarray) -> np.ndarray:
    """(T, K) matrix of per-state log densities."""
    diff = x[:, None, :] - hmm.means[None, :, :]
    var = hmm.covariances[None, :, :]
    return -0.5 * np.sum(diff * diff / var + np.log(2.0 * math.pi * var), axis=2)


def _check_trajectory(hmm: GaussianHMM, trajectory) -> np.ndarray:
    x = np.asarray(trajectory, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != hmm.dim:
        raise InvalidInputError(
            f"trajectory dimension {x.shape[-1] if x.ndim else '?'} does not match model dim {hmm.dim}"
        )
    return x


def _forward_log(hmm: GaussianHMM, log_b: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        log_init = np.log(hmm.initial)
        log_a = np.log(hmm.transitions)
    t_len = log_b.shape[0]
    alpha = np.empty_like(log_b)
    alpha[0] = log_init + log_b[0]
    for t in range(1, t_len):
        alpha[t] = _logsumexp(alpha[t - 1][:, None] + log_a, axis=0) + log_b[t]
    return alpha


def _backward_log(hmm: GaussianHMM, log_b: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        log_a = np.log(hmm.transitions)
    t_len, k = log_b.shape
    beta = np.zeros((t_len, k))
    for t in range(t_len - 2, -1, -1):
        beta[t] = _logsumexp(log_a + (log_b[t + 1] + beta[t + 1])[None, :], axis=1)
    return beta


def log_likelihood(hmm: GaussianHMM, trajectory) -> float:
    """log p(trajectory | hmm) by the forward recursion in log space."""
    x = _check_trajectory(hmm, trajectory)
    alpha = _forward_log(hmm, _emission_logprob(hmm, x))
    return float(_logsumexp(alpha[-1], axis=0))


def _select_n_states(trajectories, n_states, keyframe_counts) -> int:
    total_points = sum(len(t) for t in trajectories)
    if n_states is None:
        counts = keyframe_counts if keyframe_counts else [len(t) for t in trajectories]
        median = float(np.median(np.asarray(counts, dtype=float)))
        n_states = int(math.floor(median + 0.5))
        n_states = max(MIN_STATES, min(MAX_STATES, n_states))
    if n_states < 1:
        raise InvalidInputError("state count must be positive")
    return min(n_states, total_points)


def _chunk_initialization(xs: list, k: int):
    dim = xs[0].shape[1]
    sums = np.zeros((k, dim))
    sqsums = np.zeros((k, dim))
    counts = np.zeros(k)
    for x in xs:
        t_len = len(x)
        for state in range(k):
            lo = (state * t_len) // k
            hi = ((state + 1) * t_len) // k
            if hi > lo:
                chunk = x[lo:hi]
                sums[state] += chunk.sum(axis=0)
                sqsums[state] += (chunk * chunk).sum(axis=0)
                counts[state] += len(chunk)
    means = np.zeros((k, dim))
    covs = np.full((k, dim), COV_FLOOR)
    filled = [s for s in range(k) if counts[s] > 0]
    for state in range(k):
        src = state
        if counts[state] == 0:
            src = min(filled, key=lambda f: (abs(f - state), f))
        means[state] = sums[src] / counts[src]
        var = sqsums[src] / counts[src] - means[state] ** 2
        covs[state] = np.maximum(var, COV_FLOOR)
    return means, covs


def _initial_transitions(k: int) -> np.ndarray:
    a = np.zeros((k, k))
    for i in range(k):
        if i == k - 1:
            a[i, i] = 1.0
            continue
        weights = {i: 0.5, i + 1: 0.4}
        if i + 2 < k:
            weights[i + 2] = 0.1
        total = sum(weights.values())
        for j, w in weights.items():
            a[i, j] = w / total
    return a


def _smooth_transitions(a: np.ndarray) -> np.ndarray:
    """Put a small floor on every allowed transition so off-length sequences
    keep finite likelihood; the banded zero pattern is untouched."""
    k = a.shape[0]
    mask = _topology_mask(k)
    out = np.where(mask, np.maximum(a, TRANS_SMOOTH), 0.0)
    return out / out.sum(axis=1, keepdims=True)


def fit_policy(trajectories, n_states=None, keyframe_counts=None) -> GaussianHMM:
    """Train a left-to-right HMM on relative-feature trajectories.

    When ``n_states`` is omitted it defaults to the median keyframe count of
    the source segments (pass ``keyframe_counts``) clamped to [2, 10], and is
    always capped at the total number of points.  The returned model carries
    the per-iteration training log-likelihood in ``history``.
    """
    xs = [np.asarray(t, dtype=float) for t in trajectories]
    xs = [x[None, :] if x.ndim == 1 else x for x in xs]
    if not xs or any(x.size == 0 for x in xs):
        raise InvalidInputError("fit requires at least one non-empty trajectory")
    dim = xs[0].shape[1]
    if any(x.shape[1] != dim for x in xs):
        raise InvalidInputError("trajectories must share one feature dimension")

    k = _select_n_states(xs, n_states, keyframe_counts)
    means, covs = _chunk_initialization(xs, k)
    initial = np.zeros(k)
    initial[0] = 1.0
    transitions = _initial_transitions(k)
    hmm = GaussianHMM(initial, transitions, means, covs)

    history = []
    prev = -np.inf
    for _ in range(EM_MAX_ITER):
        init_acc = np.zeros(k)
        trans_acc = np.zeros((k, k))
        occ = np.zeros(k)
        mean_acc = np.zeros((k, dim))
        sq_acc = np.zeros((k, dim))
        total_ll = 0.0
        with np.errstate(divide="ignore"):
            log_a = np.log(hmm.transitions)
        for x in xs:
            log_b = _emission_logprob(hmm, x)
            alpha = _forward_log(hmm, log_b)
            beta = _backward_log(hmm, log_b)
            seq_ll = float(_logsumexp(alpha[-1], axis=0))
            total_ll += seq_ll
            log_gamma = alpha + beta - seq_ll
            gamma = np.exp(log_gamma)
            init_acc += gamma[0]
            occ += gamma.sum(axis=0)
            mean_acc += gamma.T @ x
            sq_acc += gamma.T @ (x * x)
            for t in range(len(x) - 1):
                log_xi = (
                    alpha[t][:, None]
                    + log_a
                    + (log_b[t + 1] + beta[t + 1])[None, :]
                    - seq_ll
                )
                trans_acc += np.exp(log_xi)
        history.append(total_ll)
        if total_ll - prev < EM_TOL:
            break
        prev = total_ll

        new_means = hmm.means.copy()
        new_covs = hmm.covariances.copy()
        visited = occ > 1e-12
        new_means[visited] = mean_acc[visited] / occ[visited, None]
        ex2 = np.zeros_like(new_covs)
        ex2[visited] = sq_acc[visited] / occ[visited, None]
        new_covs[visited] = np.maximum(ex2[visited] - new_means[visited] ** 2, COV_FLOOR)

        new_trans = hmm.transitions.copy()
        row_mass = trans_acc.sum(axis=1)
        rows = row_mass > 1e-12
        new_trans[rows] = trans_acc[rows] / row_mass[rows, None]

        new_init = init_acc / len(xs)
        hmm = GaussianHMM(new_init, new_trans, new_means, new_covs)

    hmm.transitions = _smooth_transitions(hmm.transitions)
    hmm.history = history
    hmm.validate()
    return hmm


def sample_keyframes(hmm: GaussianHMM, rng_seed) -> np.ndarray:
    """Draw one keyframe per visited hidden state along a forward path.

    The path starts from the initial distribution and advances strictly
    (each state is entered at most once); it ends after emitting from the
    last state.  Deterministic for a fixed seed.
    """
    rng = np.random.default_rng(rng_seed)
    k = hmm.n_states
    state = int(rng.choice(k, p=hmm.initial))
    points = []
    while True:
        std = np.sqrt(hmm.covariances[state])
        points.append(hmm.means[state] + rng.standard_normal(hmm.dim) * std)
        if state == k - 1:
            break
        forward = hmm.transitions[state, state + 1 :].copy()
        total = forward.sum()
        if total <= 0:
            state += 1
            continue
        state = state + 1 + int(rng.choice(k - state - 1, p=forward / total))
    return np.array(points)


def _as_seed_sequence(seed) -> np.random.SeedSequence:
    # Rebuild from entropy so repeated use spawns the same children
    # (SeedSequence.spawn advances internal state otherwise).
    if isinstance(seed, np.random.SeedSequence):
        return np.random.SeedSequence(entropy=seed.entropy, spawn_key=seed.spawn_key)
    return np.random.SeedSequence(seed)


def kl_rate(a: GaussianHMM, b: GaussianHMM, num_sequences: int, seed) -> float:
    """Monte-Carlo estimate of the per-step divergence rate from a to b."""
    if a.dim != b.dim:
        raise InvalidInputError("models must share the emission dimension")
    total = 0.0
    for child in _as_seed_sequence(seed).spawn(num_sequences):
        seq = sample_keyframes(a, child)
        total += (log_likelihood(a, seq) - log_likelihood(b, seq)) / len(seq)
    return total / num_sequences


def hmm_distance(
    a: GaussianHMM,
    b: GaussianHMM,
    num_sequences: int = DISTANCE_SEQUENCES,
    rng_seed=0,
    seq_len: int | None = None,
) -> float:
    """Symmetrized Monte-Carlo divergence rate between two policies.

    Sequences come from each model's own sampler; the first argument draws
    from the first spawned seed stream, so exchanging the models with the
    matching seed exchange reproduces the same value.  Never negative.
    """
    if a.dim != b.dim:
        raise InvalidInputError("models must share the emission dimension")
    s_a, s_b = _as_seed_sequence(rng_seed).spawn(2)
    if seq_len is not None:
        d_ab = _kl_rate_truncated(a, b, num_sequences, s_a, seq_len)
        d_ba = _kl_rate_truncated(b, a, num_sequences, s_b, seq_len)
    else:
        d_ab = kl_rate(a, b, num_sequences, s_a)
        d_ba = kl_rate(b, a, num_sequences, s_b)
    return max(0.0, 0.5 * (d_ab + d_ba))


def _kl_rate_truncated(a, b, num_sequences, seed, seq_len):
    root = _as_seed_sequence(seed)
    total = 0.0
    for child in root.spawn(num_sequences):
        seq = sample_keyframes(a, child)[:seq_len]
        total += (log_likelihood(a, seq) - log_likelihood(b, seq)) / len(seq)
    return total / num_sequences
