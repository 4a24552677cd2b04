"""Protocol runner and leaderboard builder.

Three protocols are supported:

* ``E1`` random split grouped by simulation, size-matched to the grid split;
* ``E2`` within-tower grid split with regime labels;
* ``E3`` leave-one-tower-out transfer, scored on the held-out tower's full table.

Predictions are in DEL format; the ground truth is ``damage ** (1/m)``.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .bootstrap import BootstrapConfig, bootstrap_metrics
from .dataio import (
    JOINT_COLUMN,
    JOINT_REGIMES,
    align_predictions,
    load_dataset,
    read_predictions,
    write_leaderboard,
    write_table,
)
from .exceptions import EvaluationError
from .fatigue import damage_to_del
from .metrics import METRIC_NAMES, compute_metrics
from .partition import (
    RegimeConfig,
    SplitSpec,
    apply_split,
    attach_labels,
    size_matched_random_split,
)

PROTOCOLS = ("E1", "E2", "E3")
TOWER_IDS = ("ref", "opt1", "opt2")
EXEX = "EX_EX"
PARTITION_RTOL = 1e-9


@dataclass
class EvaluationRequest:
    """What to score and how.

    ``test`` is a test table (DataFrame, or path to a test CSV; a raw CSV for E3) and
    ``predictions`` maps model name to a prediction file path, a DataFrame
    with ``sim_id, section_id, prediction`` or an array already aligned with
    ``test``.
    """

    protocol: str
    test: object
    predictions: dict
    tower: str = "ref"
    regime: RegimeConfig = field(default_factory=RegimeConfig)
    bootstrap: BootstrapConfig = field(default_factory=BootstrapConfig)
    sections: tuple = (1, 30)
    m: float = 3.0

    def __post_init__(self):
        self.protocol = str(self.protocol).upper()
        if self.protocol not in PROTOCOLS:
            raise EvaluationError(f"unknown protocol {self.protocol!r}; choose from {PROTOCOLS}")
        if not self.predictions:
            raise EvaluationError("no prediction sets supplied")
        if not self.sections:
            raise EvaluationError("at least one section must be reported")


@dataclass
class LeaderboardRow:
    model: str
    metrics: object
    cis: dict
    regime_mre: dict  # None for an empty cell; empty dict when the test table is unlabeled
    section_rel_l2: dict  # every section present in the test table
    rank: int = 0
    exex_rank: int | None = None
    section_ranks: dict = field(default_factory=dict)

    def section_rank(self, section):
        return self.section_ranks.get(section)


def _load_test(test, protocol):
    if isinstance(test, pd.DataFrame):
        return test
    # E3 scores a tower's full (unlabeled) table
    return load_dataset(test, "raw" if protocol == "E3" else "test")


def _prediction_values(test, pred):
    if isinstance(pred, (str, Path)):
        pred = read_predictions(pred)
    if isinstance(pred, pd.DataFrame):
        return align_predictions(test, pred)
    values = np.asarray(pred, dtype=np.float64).ravel()
    if values.size != len(test):
        raise EvaluationError(f"{values.size} predictions for {len(test)} test rows")
    return values


def check_error_partition(y, y_hat, cells):
    """Verify the per-cell squared errors add up to the global total.

    Returns the relative discrepancy; raises when it exceeds 1e-9 or when a
    row carries a label outside the nine joint cells.
    """
    cells = np.asarray(cells)
    unknown = set(np.unique(cells).tolist()) - set(JOINT_REGIMES)
    if unknown:
        raise EvaluationError(f"rows carry unknown joint regimes {sorted(unknown)}")
    sq = (np.asarray(y_hat) - np.asarray(y)) ** 2
    total = len(sq) * compute_metrics(y, y_hat).mse
    parts = 0.0
    for cell in JOINT_REGIMES:
        mask = cells == cell
        if mask.any():
            parts += mask.sum() * float(np.mean(sq[mask]))
    scale = max(abs(total), np.finfo(float).tiny)
    err = abs(parts - total) / scale
    if err > PARTITION_RTOL:
        raise EvaluationError(f"error partition violated: relative gap {err:.3g}")
    return err


def _score_model(name, y, y_hat, test, config, threads):
    metrics = compute_metrics(y, y_hat)
    cis = bootstrap_metrics(y, y_hat, config, threads=threads)
    regime = {}
    if JOINT_COLUMN in test.columns:
        cells = test[JOINT_COLUMN].to_numpy()
        check_error_partition(y, y_hat, cells)
        for cell in JOINT_REGIMES:
            mask = cells == cell
            regime[cell] = compute_metrics(y[mask], y_hat[mask]).mre if mask.any() else None
    sections = {}
    sec = test["section_id"].to_numpy()
    for s in np.unique(sec).tolist():
        mask = sec == s
        sections[int(s)] = compute_metrics(y[mask], y_hat[mask]).rel_l2
    return LeaderboardRow(name, metrics, cis, regime, sections)


def rank_models(values, higher_is_better=False):
    """1-based ranks, ties broken by model name; undefined values rank last.

    ``values`` maps model name to a number or ``None``. When every value is
    ``None`` no ranking exists and every model gets ``None``.
    """
    if all(v is None for v in values.values()):
        return {name: None for name in values}

    def key(name):
        v = values[name]
        if v is None:
            return (1, 0.0, name)
        return (0, -v if higher_is_better else v, name)

    return {name: i + 1 for i, name in enumerate(sorted(values, key=key))}


def assign_ranks(rows, sections=(1, 30)):
    """Fill global, EX_EX and per-section ranks in place; returns rows in global order."""
    by_name = {r.model: r for r in rows}
    if len(by_name) != len(rows):
        raise EvaluationError("model names must be unique")
    glob = rank_models({r.model: r.metrics.rel_l2 for r in rows})
    exex = rank_models({r.model: r.regime_mre.get(EXEX) for r in rows})
    for r in rows:
        r.rank = glob[r.model]
        r.exex_rank = exex[r.model]
        r.section_ranks = {}
    for s in sections:
        ranks = rank_models({r.model: r.section_rel_l2.get(s) for r in rows})
        for r in rows:
            r.section_ranks[s] = ranks[r.model]
    return sorted(rows, key=lambda r: r.rank)


def evaluate_models(req, threads=1):
    """Score every model in ``req`` and return leaderboard rows in global-rank order."""
    test = _load_test(req.test, req.protocol)
    if "damage" not in test.columns:
        raise EvaluationError("test table lacks the damage column")
    y = damage_to_del(test["damage"].to_numpy(dtype=np.float64), req.m)
    missing = [s for s in req.sections if s not in set(test["section_id"].tolist())]
    if missing:
        raise EvaluationError(f"requested sections {missing} are absent from the test table")
    names = sorted(req.predictions)
    preds = {name: _prediction_values(test, req.predictions[name]) for name in names}

    if threads > 1 and len(names) > 1:
        # one model per worker; each bootstrap is itself deterministic
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(
                pool.map(
                    lambda n: _score_model(n, y, preds[n], test, req.bootstrap, 1),
                    names,
                )
            )
    else:
        rows = [_score_model(n, y, preds[n], test, req.bootstrap, threads) for n in names]
    return assign_ranks(rows, req.sections)


def rank_shift_report(rows, threshold=0, sections=None):
    """One line per model with its global, EX_EX and section ranks.

    A model is flagged when its global and EX_EX ranks differ by more than
    ``threshold``. Empty EX_EX cells never flag.
    """
    if sections is None:
        sections = sorted(rows[0].section_ranks) if rows else [1, 30]
    out = []
    for r in sorted(rows, key=lambda r: (r.rank, r.model)):
        shift = None if r.exex_rank is None else r.exex_rank - r.rank
        rec = {"model": r.model, "global_rank": r.rank, "exex_rank": r.exex_rank}
        for s in sections:
            rec[f"sec{s}_rank"] = r.section_ranks.get(s)
        rec["shift"] = shift
        rec["flagged"] = bool(shift is not None and len(rows) > 1 and abs(shift) > threshold)
        out.append(rec)
    cols = ["model", "global_rank", "exex_rank"] + [f"sec{s}_rank" for s in sections]
    return pd.DataFrame(out, columns=cols + ["shift", "flagged"], dtype=object)


def cross_tower_folds(towers=TOWER_IDS):
    """Leave-one-tower-out folds as ``(train_towers, test_tower)`` pairs."""
    return [(frozenset(t for t in towers if t != held), held) for held in towers]


def check_fold(train_towers, test_tower, available=TOWER_IDS):
    train_towers = frozenset(train_towers)
    if not train_towers:
        raise EvaluationError("a fold needs at least one training tower")
    if test_tower in train_towers:
        raise EvaluationError(f"test tower {test_tower!r} is also a training tower")
    unknown = sorted((train_towers | {test_tower}) - set(available))
    if unknown:
        raise EvaluationError(f"unknown tower(s) {unknown}; available: {sorted(available)}")
    return train_towers


def fold_tables(tables, train_towers, test_tower):
    """Training table (stacked, with a ``tower`` column) and the held-out tower's full table."""
    train_towers = check_fold(train_towers, test_tower, tables)
    parts = [tables[t].assign(tower=t) for t in sorted(train_towers)]
    return pd.concat(parts, ignore_index=True), tables[test_tower].reset_index(drop=True)


def cross_tower_fold(
    train_towers, test_tower, tables, predictions,
    bootstrap=BootstrapConfig(), sections=(1, 30), m=3.0, threads=1,
):
    """Leaderboard for one E3 fold, scored on every row of ``tables[test_tower]``."""
    _, test = fold_tables(tables, train_towers, test_tower)
    req = EvaluationRequest(
        "E3", test.drop(columns=[JOINT_COLUMN], errors="ignore"), predictions,
        tower=test_tower, bootstrap=bootstrap, sections=sections, m=m,
    )
    return evaluate_models(req, threads=threads)


def prepare_protocol(df, protocol, spec=None, regime=RegimeConfig(), seed=0):
    """Labeled ``(train, test)`` tables for E1 or E2 from one tower's raw table."""
    protocol = str(protocol).upper()
    spec = spec or SplitSpec.default()
    if protocol == "E1":
        train, test = size_matched_random_split(df, spec, seed=seed)
    elif protocol == "E2":
        train, test = apply_split(df, spec)
    else:
        raise EvaluationError("prepare_protocol handles E1 and E2; use fold_tables for E3")
    return attach_labels(train, test, regime)


def leaderboard_records(rows, metadata=None):
    """Flat dict records for the leaderboard CSV (global-rank order).

    ``metadata`` maps model name to extra pass-through columns (latency, training
    time and the like). They are appended verbatim; models without an entry get
    undefined cells.
    """
    sections = sorted(rows[0].section_ranks) if rows else []
    records = []
    for r in sorted(rows, key=lambda r: r.rank):
        rec = {"rank": r.rank, "model": r.model}
        rec.update(r.metrics.as_dict())
        for name in METRIC_NAMES:
            ci = r.cis.get(name)
            rec[f"{name}_lo"] = ci.lo if ci else None
            rec[f"{name}_hi"] = ci.hi if ci else None
        for name in METRIC_NAMES:
            ci = r.cis.get(name)
            rec[f"{name}_boot_mean"] = ci.mean if ci else None
            rec[f"{name}_boot_std"] = ci.std if ci else None
        rec["exex_mre"] = r.regime_mre.get(EXEX) if r.regime_mre else None
        rec["exex_rank"] = r.exex_rank
        for s in sections:
            rec[f"sec{s}_rel_l2"] = r.section_rel_l2.get(s)
            rec[f"sec{s}_rank"] = r.section_ranks.get(s)
        records.append(rec)
    if metadata and records:
        extra = []
        for cols in metadata.values():
            extra += [c for c in cols if c not in extra]
        clash = [c for c in extra if c in records[0]]
        if clash:
            raise EvaluationError(f"metadata columns clash with computed ones: {clash}")
        for rec in records:
            cols = metadata.get(rec["model"], {})
            rec.update({c: cols.get(c) for c in extra})
    return records


def write_leaderboard_csv(rows, path, metadata=None):
    write_leaderboard(leaderboard_records(rows, metadata), path)


def load_model_metadata(path, models=None):
    """Read a sidecar CSV keyed by ``model``; values are kept as strings."""
    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False)
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise EvaluationError(f"{path}: malformed metadata CSV ({exc})") from None
    if "model" not in df.columns:
        raise EvaluationError(f"{path}: metadata needs a 'model' column")
    if df["model"].duplicated().any():
        raise EvaluationError(f"{path}: duplicate model names {sorted(set(df['model'][df['model'].duplicated()]))}")
    if models is not None:
        unknown = sorted(set(df["model"]) - set(models))
        if unknown:
            raise EvaluationError(f"{path}: metadata for models without predictions: {unknown}")
    return {r.pop("model"): r for r in df.to_dict("records")}


def write_regime_matrix(rows, path):
    """Model x nine-cell MRE matrix; empty cells are written as ``empty``."""
    header = ["model"] + list(JOINT_REGIMES)
    records = []
    for r in sorted(rows, key=lambda r: r.rank):
        rec = {"model": r.model}
        rec.update({c: r.regime_mre.get(c) for c in JOINT_REGIMES})
        records.append(rec)
    write_table(header, records, path, missing="empty")


def write_section_table(rows, path):
    """Long-format per-section Rel L2 for every model and section."""
    records = [
        {"model": r.model, "section_id": s, "rel_l2": v}
        for r in sorted(rows, key=lambda r: r.rank)
        for s, v in sorted(r.section_rel_l2.items())
    ]
    write_table(["model", "section_id", "rel_l2"], records, path)


def write_rank_shift(report, path):
    write_table(list(report.columns), report.to_dict("records"), path, missing="empty")
