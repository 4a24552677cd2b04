"""Grid-based train/test splits and distance + alpha-shape regime labeling."""

from dataclasses import dataclass

import numpy as np
import pandas as pd
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._checks import check_points_2d, unique_rows
from .dataio import JOINT_COLUMN, JOINT_REGIMES, TRAIN_LABEL
from .exceptions import GeometryError, SplitError
from .geometry import ALPHA_CONVENTIONS, AlphaShape, Standardizer
from .rng import Xoshiro256

WIND_AXES = ("mean_wind_speed", "std_wind_speed")
WAVE_AXES = ("wave_hs", "wave_tp")


def _parse_ids(text):
    """``"2-7,9-14"`` -> ``{2, ..., 7, 9, ..., 14}``."""
    ids = set()
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part:
            lo, hi = (int(v) for v in part.split("-", 1))
            ids.update(range(lo, hi + 1))
        else:
            ids.add(int(part))
    return frozenset(ids)


@dataclass(frozen=True)
class SplitSpec:
    """Training IDs per grid axis; every other ID in the axis range is test."""

    wind_train: frozenset
    hs_train: frozenset
    tp_train: frozenset
    n_wind: int = 22
    n_hs: int = 7
    n_tp: int = 7

    def __post_init__(self):
        for name, ids, n in (
            ("wind", self.wind_train, self.n_wind),
            ("hs", self.hs_train, self.n_hs),
            ("tp", self.tp_train, self.n_tp),
        ):
            object.__setattr__(self, f"{name}_train", frozenset(int(i) for i in ids))
            bad = [i for i in ids if not 1 <= i <= n]
            if bad:
                raise SplitError(f"{name} train IDs {sorted(bad)} outside 1..{n}")
            if not ids:
                raise SplitError(f"{name} axis has no training IDs")

    @classmethod
    def default(cls):
        """Extreme and middle indices held out on every axis of the 22x7x7 grid."""
        return cls(
            wind_train=_parse_ids("2-7,9-14,16-21"),
            hs_train=_parse_ids("2,3,5,6"),
            tp_train=_parse_ids("2,3,5,6"),
        )

    @classmethod
    def from_strings(cls, wind, hs, tp, n_wind=22, n_hs=7, n_tp=7):
        return cls(_parse_ids(wind), _parse_ids(hs), _parse_ids(tp), n_wind, n_hs, n_tp)

    @property
    def wind_test(self):
        return frozenset(range(1, self.n_wind + 1)) - self.wind_train

    @property
    def hs_test(self):
        return frozenset(range(1, self.n_hs + 1)) - self.hs_train

    @property
    def tp_test(self):
        return frozenset(range(1, self.n_tp + 1)) - self.tp_train


@dataclass(frozen=True)
class RegimeConfig:
    tau: float = 0.5
    alpha: float = 0.1
    epsilon: float = 1e-6
    alpha_convention: str = "inverse"

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("tau must be > 0")
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        if self.alpha_convention not in ALPHA_CONVENTIONS:
            raise ValueError(f"alpha_convention must be one of {ALPHA_CONVENTIONS}")


@dataclass(frozen=True)
class SpacingScale:
    scale: float
    distances: np.ndarray
    unique_points: np.ndarray


def is_train_row(df, spec):
    return (
        df["wind_speed_id"].isin(spec.wind_train)
        & df["wave_hs_id"].isin(spec.hs_train)
        & df["wave_tp_id"].isin(spec.tp_train)
    ).to_numpy()


def apply_split(df, spec=None):
    """Rows whose three grid IDs are all training IDs go to train, the rest to test."""
    spec = spec or SplitSpec.default()
    mask = is_train_row(df, spec)
    return df[mask].reset_index(drop=True), df[~mask].reset_index(drop=True)


def _grouped_pick(df, n_rows, seed, group="sim_id"):
    sims = np.unique(df[group].to_numpy())
    sizes = df.groupby(group).size().reindex(sims).to_numpy()
    order = Xoshiro256(seed).shuffle_indices(len(sims))
    cumulative = np.cumsum(sizes[order])
    hit = np.flatnonzero(cumulative == n_rows)
    if n_rows == 0:
        return set()
    if hit.size == 0:
        raise SplitError(
            f"cannot reach exactly {n_rows} rows with whole {group} groups "
            f"(group sizes {sorted(set(sizes.tolist()))})"
        )
    return set(sims[np.asarray(order[: hit[0] + 1])].tolist())


def random_split(df, train_fraction=None, seed=0, n_train_rows=None):
    """Simulation-grouped random split with an exact train row count.

    Give either ``train_fraction`` (rounded to the nearest row) or
    ``n_train_rows``. All sections of a ``sim_id`` land in the same fold.
    """
    if n_train_rows is None:
        if train_fraction is None or not 0 < train_fraction < 1:
            raise SplitError("train_fraction must lie strictly between 0 and 1")
        n_train_rows = int(round(train_fraction * len(df)))
    if not 0 < n_train_rows < len(df):
        raise SplitError(f"train row count {n_train_rows} infeasible for {len(df)} rows")
    chosen = _grouped_pick(df, n_train_rows, seed)
    mask = df["sim_id"].isin(chosen).to_numpy()
    return df[mask].reset_index(drop=True), df[~mask].reset_index(drop=True)


def grouped_holdout(df, fraction=0.2, seed=0):
    """Simulation-grouped internal validation split for users fitting their own surrogates.

    Holds out whole simulations until at least ``fraction`` of the rows are
    in the holdout; returns ``(fit_rows, holdout_rows)``.
    """
    if not 0 < fraction < 1:
        raise SplitError("fraction must lie strictly between 0 and 1")
    sims = np.unique(df["sim_id"].to_numpy())
    sizes = df.groupby("sim_id").size().reindex(sims).to_numpy()
    order = np.asarray(Xoshiro256(seed).shuffle_indices(len(sims)))
    cut = int(np.searchsorted(np.cumsum(sizes[order]), fraction * len(df))) + 1
    held = set(sims[order[:cut]].tolist())
    mask = df["sim_id"].isin(held).to_numpy()
    return df[~mask].reset_index(drop=True), df[mask].reset_index(drop=True)


def _nn_distance(query, reference, exclude_self=False, chunk=1024):
    """Exact nearest-neighbor Euclidean distance from each query row to ``reference``."""
    out = np.empty(len(query))
    for start in range(0, len(query), chunk):
        q = query[start : start + chunk]
        d2 = np.sum((q[:, None, :] - reference[None, :, :]) ** 2, axis=2)
        if exclude_self:
            d2[d2 == 0] = np.inf
        out[start : start + chunk] = np.sqrt(d2.min(axis=1))
    return out


def spacing_scale(train_points):
    """Mean distance from each unique training point to its nearest distinct neighbor."""
    X = check_points_2d(train_points, name="train points")
    uniq, _ = unique_rows(X)
    if len(uniq) < 2:
        raise GeometryError("spacing scale needs at least 2 distinct training points")
    d = _nn_distance(uniq, uniq, exclude_self=True)
    return SpacingScale(scale=float(d.mean()), distances=d, unique_points=uniq)


class RegimeLabeler(BaseEstimator):
    """Label points as In-train (IT), Interpolation (IP) or Extrapolation (EX).

    ``fit`` takes the raw (unstandardized) training cloud of one 2-D
    subspace. ``predict`` labels query points: IT when the nearest training
    point is within ``tau`` spacing units, IP otherwise, and EX when the point
    is outside the training alpha shape by at least ``epsilon`` (standardized
    units).
    """

    def __init__(self, tau=0.5, alpha=0.1, epsilon=1e-6, alpha_convention="inverse"):
        self.tau = tau
        self.alpha = alpha
        self.epsilon = epsilon
        self.alpha_convention = alpha_convention

    @classmethod
    def from_config(cls, config):
        return cls(config.tau, config.alpha, config.epsilon, config.alpha_convention)

    def fit(self, X, y=None):
        RegimeConfig(self.tau, self.alpha, self.epsilon, self.alpha_convention)
        X = check_points_2d(X, name="train points", min_points=2)
        self.standardizer_ = Standardizer().fit(X)
        Z = self.standardizer_.transform(X)
        self.spacing_ = spacing_scale(Z)
        self.hull_ = AlphaShape(alpha=self.alpha, convention=self.alpha_convention).fit(
            self.spacing_.unique_points
        )
        return self

    def _unique_query(self, X):
        check_is_fitted(self, "hull_")
        Z = self.standardizer_.transform(check_points_2d(X, name="query points"))
        return unique_rows(Z)

    def normalized_distance(self, X):
        uq, inverse = self._unique_query(X)
        d = _nn_distance(uq, self.spacing_.unique_points) / self.spacing_.scale
        return d[inverse]

    def predict(self, X):
        uq, inverse = self._unique_query(X)
        d = _nn_distance(uq, self.spacing_.unique_points) / self.spacing_.scale
        labels = np.where(d <= self.tau, "IT", "IP").astype("<U2")
        outside = ~self.hull_.contains(uq)
        if outside.any():
            far = self.hull_.boundary_distance(uq[outside]) >= self.epsilon
            idx = np.flatnonzero(outside)[far]
            labels[idx] = "EX"
        return labels[inverse]


def label_axis(train_points, test_points, config=RegimeConfig()):
    return RegimeLabeler.from_config(config).fit(train_points).predict(test_points)


def _axis_points(df, axes):
    return df[list(axes)].to_numpy(dtype=np.float64)


def label_records(train, test, config=RegimeConfig()):
    """Per-axis and joint labels for every test row, as a DataFrame aligned to ``test``."""
    wind = label_axis(_axis_points(train, WIND_AXES), _axis_points(test, WIND_AXES), config)
    wave = label_axis(_axis_points(train, WAVE_AXES), _axis_points(test, WAVE_AXES), config)
    joint = np.char.add(np.char.add(wind, "_"), wave)
    return pd.DataFrame({"wind_group": wind, "wave_group": wave, JOINT_COLUMN: joint})


def attach_labels(train, test, config=RegimeConfig()):
    """Copies of ``train``/``test`` carrying regime-label columns (train rows are In-train)."""
    labels = label_records(train, test, config)
    train = train.copy()
    test = test.copy()
    train["wind_group"] = TRAIN_LABEL
    train["wave_group"] = TRAIN_LABEL
    for col in labels.columns:
        test[col] = labels[col].to_numpy()
    return train, test


def regime_composition(test):
    """Row count and percentage of the test set in each of the nine joint cells."""
    joint = test[JOINT_COLUMN]
    counts = joint.value_counts().reindex(list(JOINT_REGIMES), fill_value=0)
    total = int(counts.sum())
    return pd.DataFrame(
        {
            "regime": list(JOINT_REGIMES),
            "rows": counts.to_numpy(dtype=np.int64),
            "percent": 100.0 * counts.to_numpy() / total if total else 0.0,
        }
    )


def composition_sweep(
    train, test, alphas=(0.1,), epsilons=(1e-6,), conventions=ALPHA_CONVENTIONS, tau=0.5
):
    """Regime composition over a grid of (alpha convention, alpha, epsilon) settings."""
    rows = []
    for conv in conventions:
        for alpha in alphas:
            for eps in epsilons:
                cfg = RegimeConfig(tau=tau, alpha=alpha, epsilon=eps, alpha_convention=conv)
                comp = regime_composition(label_records(train, test, cfg))
                for cell, n in zip(comp["regime"], comp["rows"]):
                    rows.append(
                        {
                            "convention": conv,
                            "alpha": alpha,
                            "epsilon": eps,
                            "regime": cell,
                            "rows": int(n),
                        }
                    )
    return pd.DataFrame(rows)


def size_matched_random_split(df, spec=None, seed=0):
    """Random split with the same train row count as the grid split (the E1 baseline)."""
    spec = spec or SplitSpec.default()
    n_train = int(is_train_row(df, spec).sum())
    return random_split(df, n_train_rows=n_train, seed=seed)

