"""Behavior abstraction of ego traces and the behavior distance between runs.

Pipeline: per-frame ego attributes -> resampling to a uniform time step ->
sliding-window statistics (one merged state per frame) -> standardized
K-means cluster IDs. Two runs are compared by a length-aware Hamming distance
on their cluster-ID sequences.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .simulator import ObservationTrace

FEATURE_NAMES = (
    "mean", "minimum", "maximum", "mean_change", "mean_abs_change",
    "variance", "non_linearity", "complexity",
)
DEFAULT_CHANNELS = ("speed", "heading", "acceleration")


@dataclass(frozen=True, eq=False)
class AttributeTrace:
    values: np.ndarray            # (M, N)
    channels: tuple[str, ...]
    timestamps: np.ndarray        # (N,)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        t = np.asarray(self.timestamps, dtype=float)
        if v.ndim != 2 or v.shape[1] != len(t):
            raise ValueError("values must be (channels, frames) matching timestamps")
        if len(t) < 2:
            raise ValueError("attribute trace needs at least 2 frames")
        if np.any(np.diff(t) <= 0):
            raise ValueError("timestamps must be strictly increasing")
        if not np.all(np.isfinite(v)):
            raise ValueError("attribute values must be finite")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "timestamps", t)


@dataclass(frozen=True, eq=False)
class MergedStateTrace:
    """One feature vector per merged state; ``states`` is (N', 8 * M), channel-major."""

    states: np.ndarray
    window: int
    channels: tuple[str, ...]

    @property
    def matrix(self) -> np.ndarray:
        """Features as rows, merged states as columns."""
        return self.states.T

    def __len__(self):
        return len(self.states)


def extract_attributes(trace: ObservationTrace, channels=DEFAULT_CHANNELS) -> AttributeTrace:
    """Project the ego vehicle's per-frame state onto the requested channels."""
    if len(trace.frames) < 2:
        raise ValueError("trace needs at least 2 frames")
    ego = trace.ego_array()
    cols = {
        "speed": ego[:, 3],
        "heading": np.unwrap(ego[:, 2]),
        "acceleration": ego[:, 4],
        "x": ego[:, 0],
        "y": ego[:, 1],
    }
    try:
        values = np.stack([cols[c] for c in channels])
    except KeyError as exc:
        raise ValueError(f"unknown attribute channel {exc.args[0]!r}") from None
    return AttributeTrace(values, tuple(channels), trace.timestamps)


def interpolate(a: AttributeTrace, step: float = 0.1) -> AttributeTrace:
    """Resample every channel piecewise-linearly on a uniform grid from the first timestamp."""
    if step <= 0:
        raise ValueError("step must be positive")
    t = a.timestamps
    if np.all(np.abs(np.diff(t) - step) <= 1e-9):
        return AttributeTrace(a.values.copy(), a.channels, t.copy())
    n = int(np.floor((t[-1] - t[0]) / step + 1e-9)) + 1
    if n < 2:
        raise ValueError("trace spans less than one interpolation step")
    grid = t[0] + step * np.arange(n)
    values = np.stack([np.interp(grid, t, row) for row in a.values])
    return AttributeTrace(values, a.channels, grid)


def window_features(windows: np.ndarray) -> np.ndarray:
    """The eight statistics over the last axis of ``windows``; returns shape (..., 8)."""
    w = windows.shape[-1]
    lo = windows.min(axis=-1)
    hi = windows.max(axis=-1)
    # shifting by the minimum keeps constant windows exact
    mean = lo + (windows - lo[..., None]).mean(axis=-1)
    centered = windows - mean[..., None]
    var = (centered ** 2).mean(axis=-1)
    zeros = np.zeros_like(mean)
    if w > 1:
        diffs = np.diff(windows, axis=-1)
        mean_change = diffs.mean(axis=-1)
        mean_abs_change = np.abs(diffs).mean(axis=-1)
        complexity = np.sqrt((diffs ** 2).sum(axis=-1))
    else:
        mean_change = mean_abs_change = complexity = zeros
    if w > 2:
        nonlin = (centered[..., 2:] * centered[..., 1:-1] * centered[..., :-2]).mean(axis=-1)
    else:
        nonlin = zeros
    return np.stack([mean, lo, hi, mean_change, mean_abs_change, var, nonlin, complexity], axis=-1)


def merge_states(a: AttributeTrace, w: int = 10) -> MergedStateTrace:
    """Slide a length-``w`` window (stride 1) over the trace, padding with the last state."""
    if w < 1:
        raise ValueError("window size must be >= 1")
    x = a.values
    if x.shape[1] == 0:
        raise ValueError("empty attribute trace")
    padded = np.concatenate([x, np.repeat(x[:, -1:], w - 1, axis=1)], axis=1)
    windows = sliding_window_view(padded, w, axis=1)            # (M, N, w)
    feats = window_features(windows)                            # (M, N, 8)
    states = np.ascontiguousarray(feats.transpose(1, 0, 2).reshape(x.shape[1], -1))
    return MergedStateTrace(states, w, a.channels)


# -- clustering --------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ClusterModel:
    centroids: np.ndarray   # (K, T) in standardized space
    mean: np.ndarray        # (T,)
    std: np.ndarray         # (T,)
    n_iter: int
    inertia: float
    inertia_history: tuple = field(default=(), repr=False)

    @property
    def k(self) -> int:
        return len(self.centroids)

    def standardize(self, x: np.ndarray) -> np.ndarray:
        return (x - self.mean) / self.std

    def predict(self, states: np.ndarray) -> np.ndarray:
        states = np.asarray(states, dtype=float)
        if states.ndim != 2 or states.shape[1] != self.centroids.shape[1]:
            raise ValueError(
                f"feature dimension mismatch: model has {self.centroids.shape[1]}, got {states.shape[-1]}")
        return _assign(self.standardize(states), self.centroids)[0]

    def to_dict(self) -> dict:
        return {"centroids": self.centroids.tolist(), "mean": self.mean.tolist(), "std": self.std.tolist(),
                "n_iter": self.n_iter, "inertia": self.inertia}

    @classmethod
    def from_dict(cls, d: dict) -> "ClusterModel":
        return cls(np.array(d["centroids"]), np.array(d["mean"]), np.array(d["std"]), d["n_iter"], d["inertia"])


def _assign(x: np.ndarray, centroids: np.ndarray, chunk: int = 4096):
    """Nearest centroid (lowest index on ties) and squared distance per row."""
    labels = np.empty(len(x), dtype=np.int64)
    d2 = np.empty(len(x))
    for i in range(0, len(x), chunk):
        diff = x[i:i + chunk, None, :] - centroids[None, :, :]
        dist = np.einsum("nkt,nkt->nk", diff, diff)
        lab = np.argmin(dist, axis=1)
        labels[i:i + chunk] = lab
        d2[i:i + chunk] = dist[np.arange(len(lab)), lab]
    return labels, d2


def _kmeanspp(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    centers = [x[rng.integers(len(x))]]
    d2 = np.sum((x - centers[0]) ** 2, axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            raise ValueError(f"fewer than {k} distinct states to cluster")
        idx = int(rng.choice(len(x), p=d2 / total))
        centers.append(x[idx])
        d2 = np.minimum(d2, np.sum((x - x[idx]) ** 2, axis=1))
    return np.array(centers)


def kmeans(x: np.ndarray, k: int, rng: np.random.Generator, max_iter: int = 300, tol: float = 1e-4):
    """Lloyd's algorithm with k-means++ seeding. Returns centroids, labels, inertia history."""
    centroids = _kmeanspp(x, k, rng)
    labels, d2 = _assign(x, centroids)
    history = [float(d2.sum())]
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        counts = np.bincount(labels, minlength=k)
        sums = np.stack([np.bincount(labels, weights=x[:, j], minlength=k) for j in range(x.shape[1])], axis=1)
        new = centroids.copy()
        filled = counts > 0
        new[filled] = sums[filled] / counts[filled, None]
        for c in np.flatnonzero(~filled):
            far = int(np.argmax(d2))
            new[c] = x[far]
            d2[far] = 0.0
        shift = float(np.sqrt(np.max(np.sum((new - centroids) ** 2, axis=1))))
        centroids = new
        labels, d2 = _assign(x, centroids)
        inertia = float(d2.sum())
        assert inertia <= history[-1] * (1 + 1e-9) + 1e-9, "k-means inertia increased"
        history.append(inertia)
        if shift <= tol:
            break
    return centroids, labels, history, n_iter


def fit_clusters(corpus: list, k: int = 10, rng_seed=0, max_iter: int = 300, tol: float = 1e-4) -> ClusterModel:
    """Standardize the pooled merged states of ``corpus`` and cluster them into ``k`` groups."""
    arrays = [c.states if isinstance(c, MergedStateTrace) else np.asarray(c, dtype=float) for c in corpus]
    x = np.concatenate(arrays, axis=0)
    if len(x) < k:
        raise ValueError(f"need at least {k} merged states to fit {k} clusters, got {len(x)}")
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    std = np.where(std > 1e-12, std, 1.0)
    z = (x - mean) / std
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    centroids, _, history, n_iter = kmeans(z, k, rng, max_iter, tol)
    return ClusterModel(centroids, mean, std, n_iter, history[-1], tuple(history))


def abstract(m: MergedStateTrace, model: ClusterModel) -> np.ndarray:
    """Map each merged state to its nearest cluster ID."""
    states = m.states if isinstance(m, MergedStateTrace) else m
    return model.predict(states)


# -- distance ----------------------------------------------------------------

def trace_distance(a, b) -> float:
    """Prefix Hamming distance plus length gap, normalized by the longer trace."""
    a = np.asarray(a)
    b = np.asarray(b)
    if len(a) == 0 or len(b) == 0:
        raise ValueError("abstract traces must be non-empty")
    n = min(len(a), len(b))
    mismatches = int(np.count_nonzero(a[:n] != b[:n]))
    return (mismatches + abs(len(a) - len(b))) / max(len(a), len(b))


def min_corpus_distance(candidate, corpus) -> float:
    """Smallest distance from ``candidate`` to any trace in ``corpus``; 1.0 for an empty corpus."""
    best = 1.0
    seen = False
    for other in corpus:
        d = trace_distance(candidate, other)
        if not seen or d < best:
            best, seen = d, True
        if best == 0.0:
            break
    return best


@dataclass(frozen=True)
class MinerConfig:
    channels: tuple[str, ...] = DEFAULT_CHANNELS
    step: float = 0.1
    window: int = 10
    k: int = 10


def trace_features(trace: ObservationTrace, cfg: MinerConfig = MinerConfig()) -> MergedStateTrace:
    """Attributes -> uniform resampling -> merged states, for one run."""
    return merge_states(interpolate(extract_attributes(trace, cfg.channels), cfg.step), cfg.window)
