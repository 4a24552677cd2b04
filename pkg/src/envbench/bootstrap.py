"""Percentile bootstrap for all leaderboard metrics in one resampling pass.

Replicate ``b`` draws its ``N`` indices from xoshiro256** stream ``b`` of the
configured seed (see :mod:`envbench.rng`). Streams are independent, so
replicates are generated in fixed blocks of lanes that may run on any
number of threads without changing a single bit of the result.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .exceptions import EvaluationError
from .metrics import HIGHER_IS_BETTER, METRIC_NAMES, check_prediction_pair, metrics_from_sums
from .rng import XoshiroLanes

LANE_BLOCK = 1024
COLUMN_CHUNK = 512


@dataclass(frozen=True)
class BootstrapConfig:
    n_resamples: int = 2000
    alpha: float = 0.05
    seed: int = 42

    def __post_init__(self):
        if self.n_resamples < 2:
            raise ValueError("n_resamples must be >= 2")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")


@dataclass(frozen=True)
class MetricCI:
    mean: float
    std: float
    lo: float
    hi: float


def resample_indices(n, n_resamples, seed):
    """Full ``(n_resamples, n)`` index matrix; only sensible for small problems."""
    blocks = []
    for start in range(0, n_resamples, LANE_BLOCK):
        lanes = XoshiroLanes(seed, min(LANE_BLOCK, n_resamples - start), first_stream=start)
        cols = [lanes.integers(n, min(COLUMN_CHUNK, n - c)) for c in range(0, n, COLUMN_CHUNK)]
        blocks.append(np.hstack(cols))
    return np.vstack(blocks).astype(np.intp)


def _block_sums(start, n_lanes, seed, parts):
    n = parts["abs"].size
    lanes = XoshiroLanes(seed, n_lanes, first_stream=start)
    acc = {k: np.zeros(n_lanes) for k in ("abs", "sq", "yc", "yc2", "y2", "rel")}
    zero_y = np.zeros(n_lanes, dtype=np.int64)
    max_abs = np.full(n_lanes, -np.inf)
    y_min = np.full(n_lanes, np.inf)
    y_max = np.full(n_lanes, -np.inf)
    for col in range(0, n, COLUMN_CHUNK):
        idx = lanes.integers(n, min(COLUMN_CHUNK, n - col)).astype(np.intp)
        for key in acc:
            acc[key] += parts[key][idx].sum(axis=1)
        a = parts["abs"][idx]
        np.maximum(max_abs, a.max(axis=1), out=max_abs)
        yy = parts["y"][idx]
        np.minimum(y_min, yy.min(axis=1), out=y_min)
        np.maximum(y_max, yy.max(axis=1), out=y_max)
        if parts["any_zero"]:
            zero_y += parts["zero"][idx].sum(axis=1)
    return acc, zero_y, max_abs, y_max - y_min


def bootstrap_replicates(y, y_hat, config=BootstrapConfig(), threads=1):
    """Per-replicate metric values as ``{metric: array(B)}`` (NaN where undefined)."""
    y, y_hat = check_prediction_pair(y, y_hat)
    n = y.size
    resid = y_hat - y
    abs_err = np.abs(resid)
    shift = float(np.mean(y))
    yc = y - shift
    abs_y = np.abs(y)
    zero = abs_y == 0
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        rel = np.where(zero, 0.0, abs_err / np.where(zero, 1.0, abs_y))
    parts = {
        "abs": abs_err,
        "sq": resid * resid,
        "yc": yc,
        "yc2": yc * yc,
        "y2": y * y,
        "rel": rel,
        "y": y,
        "zero": zero.astype(np.int64),
        "any_zero": bool(zero.any()),
    }
    starts = list(range(0, config.n_resamples, LANE_BLOCK))
    sizes = [min(LANE_BLOCK, config.n_resamples - s) for s in starts]
    if threads > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(
                pool.map(lambda a: _block_sums(a[0], a[1], config.seed, parts), zip(starts, sizes))
            )
    else:
        results = [_block_sums(s, k, config.seed, parts) for s, k in zip(starts, sizes)]

    def cat(i, key=None):
        return np.concatenate([r[i][key] if key else r[i] for r in results])

    return metrics_from_sums(
        n,
        cat(0, "abs"),
        cat(0, "sq"),
        cat(0, "yc"),
        cat(0, "yc2"),
        cat(0, "y2"),
        cat(0, "rel"),
        cat(2),
        cat(1),
        cat(3),
    )


def summarize(values, alpha):
    """Bootstrap mean, std (ddof=1) and linear-interpolation percentile CI; None if any NaN."""
    if np.any(np.isnan(values)):
        return None
    lo, hi = np.percentile(values, [100 * alpha / 2, 100 * (1 - alpha / 2)], method="linear")
    return MetricCI(
        mean=float(np.mean(values)),
        std=float(np.std(values, ddof=1)),
        lo=float(lo),
        hi=float(hi),
    )


def bootstrap_metrics(y, y_hat, config=BootstrapConfig(), threads=1):
    """Bootstrap summary for every metric; ``None`` flags a metric undefined on some replicate."""
    reps = bootstrap_replicates(y, y_hat, config, threads=threads)
    return {name: summarize(reps[name], config.alpha) for name in METRIC_NAMES}


def ci_overlap(a, b):
    """``"disjoint"`` iff one interval ends strictly before the other starts."""
    if a is None or b is None:
        raise EvaluationError("cannot compare an undefined confidence interval")
    if a.hi < b.lo or b.hi < a.lo:
        return "disjoint"
    return "overlapping"


def compare(a, b, metric="rel_l2"):
    """Verdict for two models' CIs on one metric: ``"a"``, ``"b"`` or ``"not distinguishable"``."""
    if ci_overlap(a, b) == "overlapping":
        return "not distinguishable"
    a_higher = a.lo > b.hi
    if metric in HIGHER_IS_BETTER:
        return "a" if a_higher else "b"
    return "b" if a_higher else "a"
