"""Desk-scale synthetic fixtures and a k-nearest-neighbor reference surrogate.

The generator mimics the released table layout: a wind x Hs x Tp grid, several
turbulence seeds per condition and a fixed number of tower sections, with a
smooth positive damage function. Realized mean/std wind speed vary per
(wind level, seed); sea states follow a ladder that slides upward with wind
speed in coarse bands, so neighboring wind bands share some sea states.
"""

from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy.spatial import cKDTree
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .dataio import FEATURE_COLUMNS, RAW_COLUMNS, GridShape
from .fatigue import damage_to_del
from .rng import Xoshiro256

TOWER_HEIGHT = 148.385

# (base radius, top radius, base thickness, top thickness) in metres
TOWERS = {
    "ref": (5.0, 3.25, 0.040, 0.020),
    "opt1": (5.5, 3.30, 0.066, 0.024),
    "opt2": (5.6, 3.40, 0.068, 0.028),
}


@dataclass(frozen=True)
class SynthConfig:
    n_wind: int = 22
    n_hs: int = 7
    n_tp: int = 7
    n_seeds: int = 6
    n_sections: int = 30
    tower: str = "ref"
    wind_jitter: float = 0.35
    std_jitter: float = 0.12
    damage_noise: float = 0.05
    wave_bands: int = 5
    seed: int = 0

    def __post_init__(self):
        for name in ("n_wind", "n_hs", "n_tp", "n_seeds", "n_sections", "wave_bands"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        for name in ("wind_jitter", "std_jitter", "damage_noise"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.tower not in TOWERS:
            raise ValueError(f"unknown tower {self.tower!r}; choose from {sorted(TOWERS)}")

    @property
    def grid(self):
        return GridShape(self.n_wind, self.n_hs, self.n_tp, self.n_seeds, self.n_sections)


def _softplus(x):
    return np.logaddexp(0.0, x)


def section_profile(tower, n_sections):
    """Midpoint height, outer radius and wall thickness of each section (linear taper)."""
    r0, r1, t0, t1 = TOWERS[tower]
    frac = (np.arange(n_sections) + 0.5) / n_sections
    return frac * TOWER_HEIGHT, r0 + (r1 - r0) * frac, t0 + (t1 - t0) * frac


def damage_model(mean_v, std_v, hs, tp, height, radius, thickness):
    """Smooth positive damage; convex in mean wind speed above a 14 m/s knee."""
    aero = (mean_v / 12.0 + 0.04 * _softplus(mean_v - 14.0) ** 2) * (1.0 + 0.25 * std_v)
    hydro = 0.35 * hs * np.exp(-(((tp - 8.0) / 7.0) ** 2))
    lever = 1.0 - height / TOWER_HEIGHT
    moment = aero * (0.1 + lever) + 0.8 * hydro * lever**1.5 + 0.05
    stress = moment / (np.pi * radius**2 * thickness)
    return (stress / 40.0) ** 3


def generate_dataset(cfg=SynthConfig()):
    """Raw table (16 columns) for one synthetic tower; deterministic given ``cfg``."""
    nw, nh, nt, ns, nsec = cfg.n_wind, cfg.n_hs, cfg.n_tp, cfg.n_seeds, cfg.n_sections
    rng = Xoshiro256(cfg.seed)
    wind_noise = np.array([[rng.normal(), rng.normal()] for _ in range(nw * ns)]).reshape(nw, ns, 2)
    n_sims = nw * nh * nt * ns
    sim_noise = np.array([rng.normal() for _ in range(n_sims)])

    wid, hid, tid, sid = (
        a.ravel() for a in np.meshgrid(
            np.arange(1, nw + 1), np.arange(1, nh + 1), np.arange(1, nt + 1),
            np.arange(1, ns + 1), indexing="ij",
        )
    )
    sim_id = np.arange(1, n_sims + 1)

    wind_speed = 3.5 + (wid - 1) * (21.0 / max(nw - 1, 1))
    jit = wind_noise[wid - 1, sid - 1]
    mean_v = wind_speed + cfg.wind_jitter * jit[:, 0]
    turbulence = 0.14 * (0.75 * wind_speed + 5.6)
    std_v = np.maximum(turbulence + cfg.std_jitter * jit[:, 1], 0.05)

    band = ((wid - 1) * cfg.wave_bands) // nw
    ladder = (hid - 1) + band
    hs = 0.6 + 0.55 * ladder
    tp = 1.5 + 3.0 * np.sqrt(hs) + 1.1 * (tid - (nt + 1) / 2.0)

    p_wind = (wind_speed / 10.0) * np.exp(-((wind_speed / 10.0) ** 2))
    p_hs = np.exp(-(((hid - 1) - (nh - 1) / 2.0) ** 2) / 4.0)
    p_tp = np.exp(-(((tid - 1) - (nt - 1) / 2.0) ** 2) / 4.0)
    weight = p_wind * p_hs * p_tp
    weight = weight / weight.sum()

    height, radius, thickness = section_profile(cfg.tower, nsec)
    rep = np.repeat(np.arange(n_sims), nsec)
    sec = np.tile(np.arange(nsec), n_sims)

    damage = damage_model(
        mean_v[rep], std_v[rep], hs[rep], tp[rep], height[sec], radius[sec], thickness[sec]
    ) * np.exp(cfg.damage_noise * sim_noise[rep])

    df = pd.DataFrame(
        {
            "sim_id": sim_id[rep],
            "section_id": sec + 1,
            "wind_speed_id": wid[rep],
            "wave_hs_id": hid[rep],
            "wave_tp_id": tid[rep],
            "wind_seed_id": sid[rep],
            "wind_speed": wind_speed[rep],
            "mean_wind_speed": mean_v[rep],
            "std_wind_speed": std_v[rep],
            "wave_hs": hs[rep],
            "wave_tp": tp[rep],
            "section_height_m": height[sec],
            "section_radius_m": radius[sec],
            "section_thickness_m": thickness[sec],
            "damage": damage,
            "damage_weight": weight[rep],
        }
    )
    return df[RAW_COLUMNS]


class KNNSurrogate(RegressorMixin, BaseEstimator):
    """Exact k-nearest-neighbor regressor on standardized features.

    Distance ties are broken by ``tiebreak`` keys passed to :meth:`fit`
    (ascending, compared lexicographically), so predictions do not depend on
    training-row order.
    """

    def __init__(self, k=5):
        self.k = k

    def fit(self, X, y, tiebreak=None):
        X = check_array(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64).ravel()
        if len(y) != len(X):
            raise ValueError("X and y lengths differ")
        if not 1 <= self.k <= len(X):
            raise ValueError(f"k={self.k} must lie in 1..{len(X)} (training size)")
        self.mean_ = X.mean(axis=0)
        scale = X.std(axis=0)
        self.scale_ = np.where(scale > 0, scale, 1.0)
        self.X_ = (X - self.mean_) / self.scale_
        if tiebreak is None:
            rank = np.arange(len(X))
        else:
            keys = np.asarray(tiebreak)
            keys = keys.reshape(len(X), -1)
            order = np.lexsort(keys.T[::-1])
            rank = np.empty(len(X), dtype=np.int64)
            rank[order] = np.arange(len(X))
        self.rank_ = rank
        self.y_ = y
        self.tree_ = cKDTree(self.X_)
        return self

    def _neighbors(self, Q):
        n = len(self.X_)
        k = self.k
        kq = min(n, k + 8)
        _, idx = self.tree_.query(Q, k=kq)
        idx = idx.reshape(len(Q), kq)
        d2 = np.sum((self.X_[idx] - Q[:, None, :]) ** 2, axis=2)
        order = np.lexsort((self.rank_[idx], d2), axis=1)
        idx = np.take_along_axis(idx, order, axis=1)
        d2 = np.take_along_axis(d2, order, axis=1)
        if kq < n:
            # the candidate list may cut a tie group at the k-th distance
            unsafe = np.flatnonzero(d2[:, k - 1] >= d2[:, -1])
            for i in unsafe:
                radius = np.sqrt(d2[i, k - 1]) * (1 + 1e-9) + 1e-12
                cand = np.asarray(self.tree_.query_ball_point(Q[i], radius))
                cd2 = np.sum((self.X_[cand] - Q[i]) ** 2, axis=1)
                o = np.lexsort((self.rank_[cand], cd2))
                idx[i, :k] = cand[o][:k]
        return idx[:, :k]

    def predict(self, X):
        check_is_fitted(self, "tree_")
        X = check_array(X, dtype=np.float64)
        Q = (X - self.mean_) / self.scale_
        out = np.empty(len(Q))
        for start in range(0, len(Q), 8192):
            nb = self._neighbors(Q[start : start + 8192])
            out[start : start + 8192] = self.y_[nb].mean(axis=1)
        return out


def knn_predict(train, query, k=5, m=3.0):
    """DEL predictions for ``query`` rows from the ``k`` nearest ``train`` rows."""
    model = KNNSurrogate(k=k).fit(
        train[FEATURE_COLUMNS].to_numpy(np.float64),
        damage_to_del(train["damage"].to_numpy(), m),
        tiebreak=train[["sim_id", "section_id"]].to_numpy(),
    )
    return model.predict(query[FEATURE_COLUMNS].to_numpy(np.float64))
