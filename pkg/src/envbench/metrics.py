"""The seven regression metrics used on every leaderboard."""

from dataclasses import asdict, dataclass

import numpy as np

METRIC_NAMES = ("mae", "mse", "rmse", "r2", "rel_l2", "mre", "max_err")

# lower is better for every metric except r2
HIGHER_IS_BETTER = frozenset({"r2"})


@dataclass(frozen=True)
class MetricVector:
    """Metric values; ``None`` marks a metric that is undefined for the data."""

    mae: float
    mse: float
    rmse: float
    r2: float | None
    rel_l2: float | None
    mre: float | None
    max_err: float

    def as_dict(self):
        return asdict(self)

    def __getitem__(self, name):
        return getattr(self, name)


def check_prediction_pair(y, y_hat):
    y = np.asarray(y, dtype=np.float64).ravel()
    y_hat = np.asarray(y_hat, dtype=np.float64).ravel()
    if y.shape != y_hat.shape:
        raise ValueError(f"length mismatch: {y.size} ground-truth vs {y_hat.size} predictions")
    if y.size == 0:
        raise ValueError("empty prediction set")
    if not (np.all(np.isfinite(y)) and np.all(np.isfinite(y_hat))):
        raise ValueError("prediction set contains non-finite values")
    return y, y_hat


def compute_metrics(y, y_hat):
    """All seven metrics from one residual vector.

    R2 is undefined for constant ground truth, MRE when any ground-truth value
    is zero, and relative L2 when the ground-truth norm is zero.
    """
    y, y_hat = check_prediction_pair(y, y_hat)
    n = y.size
    resid = y_hat - y
    abs_err = np.abs(resid)
    sq_sum = float(np.dot(resid, resid))
    mse = sq_sum / n

    centered = y - y.mean()
    ss_tot = float(np.dot(centered, centered))
    y_norm2 = float(np.dot(y, y))
    abs_y = np.abs(y)

    with np.errstate(over="ignore"):
        # subnormal ground truth can push a relative error to inf
        mre = float(np.sum(abs_err / abs_y) / n) if np.all(abs_y > 0) else None

    return MetricVector(
        mae=float(abs_err.sum() / n),
        mse=mse,
        rmse=float(np.sqrt(mse)),
        r2=1.0 - sq_sum / ss_tot if (ss_tot > 0 and y.max() > y.min()) else None,
        rel_l2=float(np.sqrt(sq_sum) / np.sqrt(y_norm2)) if y_norm2 > 0 else None,
        mre=mre,
        max_err=float(abs_err.max()),
    )


def metrics_from_sums(
    n, sum_abs, sum_sq, sum_yc, sum_yc2, sum_y2, sum_rel, max_abs, zero_y, y_spread
):
    """Vectorized metric assembly from per-replicate running sums.

    ``sum_yc``/``sum_yc2`` are sums of ground truth shifted by a fixed constant,
    which keeps the total sum of squares well conditioned. Undefined entries
    come back as NaN; callers map them to ``None``. ``y_spread`` is
    ``max(y) - min(y)`` per replicate and decides R2 definedness exactly.
    """
    mse = sum_sq / n
    ss_tot = sum_yc2 - sum_yc * sum_yc / n
    with np.errstate(divide="ignore", invalid="ignore"):
        r2 = np.where((y_spread > 0) & (ss_tot > 0), 1.0 - sum_sq / ss_tot, np.nan)
        rel = np.where(sum_y2 > 0, np.sqrt(sum_sq) / np.sqrt(sum_y2), np.nan)
    mre = np.where(zero_y == 0, sum_rel / n, np.nan)
    return {
        "mae": sum_abs / n,
        "mse": mse,
        "rmse": np.sqrt(mse),
        "r2": r2,
        "rel_l2": rel,
        "mre": mre,
        "max_err": max_abs,
    }
