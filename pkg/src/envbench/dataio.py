"""Reading, validating and writing the benchmark's CSV tables.

Three table kinds share one column layout: ``raw`` (16 columns, no regime
labels), and ``train``/``test`` (18 columns, with ``wind_group`` and
``wave_group``). Tables are held as pandas DataFrames; the joint regime
label ``wind_wave_group`` is derived on load and never written.
"""

import io
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .exceptions import SchemaError

ID_COLUMNS = [
    "sim_id",
    "section_id",
    "wind_speed_id",
    "wave_hs_id",
    "wave_tp_id",
    "wind_seed_id",
]
ENV_COLUMNS = ["wind_speed", "mean_wind_speed", "std_wind_speed", "wave_hs", "wave_tp"]
GEOMETRY_COLUMNS = ["section_height_m", "section_radius_m", "section_thickness_m"]
LABEL_COLUMNS = ["wind_group", "wave_group"]
TARGET_COLUMNS = ["damage", "damage_weight"]

RAW_COLUMNS = ID_COLUMNS + ENV_COLUMNS + GEOMETRY_COLUMNS + TARGET_COLUMNS
LABELED_COLUMNS = ID_COLUMNS + ENV_COLUMNS + GEOMETRY_COLUMNS + LABEL_COLUMNS + TARGET_COLUMNS
FLOAT_COLUMNS = ENV_COLUMNS + GEOMETRY_COLUMNS + TARGET_COLUMNS
JOINT_COLUMN = "wind_wave_group"

# input features of a surrogate: four environmental conditions + section geometry
FEATURE_COLUMNS = ["mean_wind_speed", "std_wind_speed", "wave_hs", "wave_tp"] + GEOMETRY_COLUMNS

# columns that must agree across all sections of one simulation
SIM_CONSTANT_COLUMNS = ["wind_speed_id", "wave_hs_id", "wave_tp_id", "wind_seed_id"] + ENV_COLUMNS

TRAIN_LABEL = "In-train"
REGIMES = ("IT", "IP", "EX")
JOINT_REGIMES = tuple(f"{w}_{v}" for w in REGIMES for v in REGIMES)
_LABEL_ALIASES = {
    "IT": "IT",
    "IP": "IP",
    "EX": "EX",
    "In-train": "IT",
    "Interpolation": "IP",
    "Extrapolation": "EX",
}

PREDICTION_COLUMNS = ["sim_id", "section_id", "prediction"]
LEADERBOARD_COLUMNS = [
    "rank", "model", "rel_l2", "rel_l2_lo", "rel_l2_hi",
    "mre", "mae", "mse", "rmse", "r2", "max_err",
]


@dataclass(frozen=True)
class GridShape:
    """Declared index ranges (all 1-based, inclusive)."""

    n_wind: int = 22
    n_hs: int = 7
    n_tp: int = 7
    n_seeds: int = 6
    n_sections: int = 30

    @property
    def id_ranges(self):
        return {
            "section_id": self.n_sections,
            "wind_speed_id": self.n_wind,
            "wave_hs_id": self.n_hs,
            "wave_tp_id": self.n_tp,
            "wind_seed_id": self.n_seeds,
        }

    @property
    def n_simulations(self):
        return self.n_wind * self.n_hs * self.n_tp * self.n_seeds


DEFAULT_GRID = GridShape()


@dataclass
class ValidationReport:
    kind: str
    n_rows: int
    n_simulations: int
    weight_sum_by_section: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    def summary(self):
        lines = [f"kind={self.kind} rows={self.n_rows} simulations={self.n_simulations}"]
        if self.weight_sum_by_section:
            sums = np.array(list(self.weight_sum_by_section.values()))
            lines.append(
                f"damage_weight sum per section: min={float(sums.min())!r} max={float(sums.max())!r}"
            )
        lines.extend(f"warning: {w}" for w in self.warnings)
        return "\n".join(lines)


def columns_for(kind):
    if kind == "raw":
        return RAW_COLUMNS
    if kind in ("train", "test"):
        return LABELED_COLUMNS
    raise ValueError(f"unknown table kind {kind!r}; expected raw, train or test")


def _line(i):
    # header is line 1
    return f"line {i + 2}"


def _parse(text_or_path, kind):
    expected = columns_for(kind)
    try:
        raw = pd.read_csv(text_or_path, dtype=str, keep_default_na=False)
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise SchemaError(f"malformed CSV: {exc}") from None
    header = raw.columns.tolist()
    problems = []
    missing = [c for c in expected if c not in header]
    extra = [c for c in header if c not in expected]
    if missing:
        problems.append(f"missing column(s): {', '.join(missing)}")
    if extra:
        problems.append(f"unexpected column(s): {', '.join(extra)}")
    if not problems and header != expected:
        problems.append(f"columns out of order: expected {','.join(expected)}")
    if problems:
        raise SchemaError(problems)

    df = pd.DataFrame(index=raw.index)
    for col in ID_COLUMNS:
        values = pd.to_numeric(raw[col], errors="coerce")
        bad = values.isna() | (values != np.floor(values))
        for i in np.flatnonzero(bad.to_numpy()):
            problems.append(f"{_line(i)}: {col}={raw[col].iat[i]!r} is not an integer")
        df[col] = values.fillna(0).astype(np.int64)
    for col in FLOAT_COLUMNS:
        # str -> float64 goes through correctly rounded conversion, so
        # write/read round trips are exact
        try:
            parsed = raw[col].to_numpy(dtype=str).astype(np.float64)
        except ValueError:
            parsed = np.empty(len(raw))
            for i, text in enumerate(raw[col].tolist()):
                try:
                    parsed[i] = float(text)
                except ValueError:
                    parsed[i] = np.nan
                    problems.append(f"{_line(i)}: {col}={text!r} is not a number")
        df[col] = parsed
    if kind != "raw":
        for col in LABEL_COLUMNS:
            df[col] = raw[col].astype(str)
    if problems:
        raise SchemaError(problems)
    return df[expected]


def validate_frame(df, kind, grid=DEFAULT_GRID, permissive=False):
    """Check every row invariant; raise :class:`SchemaError` listing offending lines."""
    expected = columns_for(kind)
    missing = [c for c in expected if c not in df.columns]
    if missing:
        raise SchemaError(f"missing column(s): {', '.join(missing)}")
    problems = []

    sim = df["sim_id"].to_numpy()
    for i in np.flatnonzero(sim < 1):
        problems.append(f"{_line(i)}: sim_id={sim[i]} must be >= 1")
    for col, hi in grid.id_ranges.items():
        v = df[col].to_numpy()
        for i in np.flatnonzero((v < 1) | (v > hi)):
            problems.append(f"{_line(i)}: {col}={v[i]} outside 1..{hi}")
    for col in FLOAT_COLUMNS:
        v = df[col].to_numpy(dtype=np.float64)
        for i in np.flatnonzero(~np.isfinite(v)):
            problems.append(f"{_line(i)}: {col}={float(v[i])!r} is not finite")
    for col in TARGET_COLUMNS:
        v = df[col].to_numpy(dtype=np.float64)
        for i in np.flatnonzero(v < 0):
            problems.append(f"{_line(i)}: {col}={float(v[i])!r} is negative")

    keys = df[["sim_id", "section_id"]]
    for i in np.flatnonzero(keys.duplicated().to_numpy()):
        problems.append(
            f"{_line(i)}: duplicate (sim_id, section_id) = ({sim[i]}, {df['section_id'].iat[i]})"
        )

    if kind != "raw":
        for col in LABEL_COLUMNS:
            v = df[col].to_numpy()
            allowed = {TRAIN_LABEL} if kind == "train" else set(_LABEL_ALIASES)
            for i in np.flatnonzero(~np.isin(v, list(allowed))):
                problems.append(f"{_line(i)}: {col}={v[i]!r} not one of {sorted(allowed)}")
    if problems:
        raise SchemaError(problems)

    warn = []
    grouped = df.groupby("sim_id", sort=False)
    for col in SIM_CONSTANT_COLUMNS:
        first = grouped[col].transform("first").to_numpy()
        bad = np.flatnonzero(first != df[col].to_numpy())
        for i in bad:
            warn.append(f"{_line(i)}: {col} differs from other rows of sim_id {sim[i]}")
    if warn and not permissive:
        raise SchemaError(warn)

    weights = df.groupby("section_id")["damage_weight"].sum()
    report = ValidationReport(
        kind=kind,
        n_rows=len(df),
        n_simulations=int(df["sim_id"].nunique()),
        weight_sum_by_section={int(k): float(v) for k, v in weights.items()},
        warnings=warn,
    )
    for w in warn:
        warnings.warn(w, stacklevel=2)
    return report


def _finalize(df, kind):
    if kind == "test":
        for col in LABEL_COLUMNS:
            df[col] = df[col].map(_LABEL_ALIASES)
        df[JOINT_COLUMN] = df["wind_group"] + "_" + df["wave_group"]
    return df


def load_dataset(path, kind, grid=DEFAULT_GRID, permissive=False, return_report=False):
    """Load and validate one table; row order is preserved.

    Test tables get their labels normalized to IT/IP/EX plus the derived
    ``wind_wave_group`` column.
    """
    df = _parse(path, kind)
    report = validate_frame(df, kind, grid=grid, permissive=permissive)
    df = _finalize(df, kind)
    return (df, report) if return_report else df


def read_dataset_text(text, kind, grid=DEFAULT_GRID, permissive=False):
    return load_dataset(io.StringIO(text), kind, grid=grid, permissive=permissive)


def lifetime_damage(df, section_id):
    """Sum of damage * damage_weight over all rows of one section."""
    rows = df[df["section_id"] == section_id]
    if rows.empty:
        raise SchemaError(f"no rows for section_id {section_id}")
    return float(np.sum(rows["damage"].to_numpy() * rows["damage_weight"].to_numpy()))


def format_float(x):
    """Shortest round-trip decimal form; blank cells are the caller's business."""
    return repr(float(x))


def _format_column(values):
    if values.dtype.kind in "iu":
        return [str(v) for v in values.tolist()]
    if values.dtype.kind == "f":
        return [repr(v) for v in values.tolist()]
    return [str(v) for v in values.tolist()]


def _write_lines(lines, path):
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def write_columns(header, columns, path):
    """Write already-ordered columns (sequences of equal length) as CSV."""
    cells = [_format_column(np.asarray(c)) for c in columns]
    lines = [",".join(header)]
    lines.extend(",".join(row) for row in zip(*cells))
    _write_lines(lines, path)


def write_dataset(df, path, kind):
    """Write a table in the exact column order for ``kind`` (LF, shortest floats)."""
    cols = columns_for(kind)
    columns = []
    for c in cols:
        values = df[c].to_numpy()
        if c in FLOAT_COLUMNS:
            values = values.astype(np.float64)
        elif c in ID_COLUMNS:
            values = values.astype(np.int64)
        columns.append(values)
    write_columns(cols, columns, path)


def read_predictions(path):
    """Load a ``sim_id,section_id,prediction`` file."""
    raw = pd.read_csv(path, dtype=str, keep_default_na=False)
    header = raw.columns.tolist()
    if header != PREDICTION_COLUMNS:
        raise SchemaError(
            f"{path}: header must be {','.join(PREDICTION_COLUMNS)}, got {','.join(header)}"
        )
    problems = []
    out = {}
    for col in ("sim_id", "section_id"):
        v = pd.to_numeric(raw[col], errors="coerce")
        for i in np.flatnonzero((v.isna() | (v != np.floor(v))).to_numpy()):
            problems.append(f"{_line(i)}: {col}={raw[col].iat[i]!r} is not an integer")
        out[col] = v.fillna(0).astype(np.int64).to_numpy()
    pred = np.empty(len(raw))
    for i, text in enumerate(raw["prediction"].tolist()):
        try:
            pred[i] = float(text)
        except ValueError:
            pred[i] = np.nan
        if not math.isfinite(pred[i]):
            problems.append(f"{_line(i)}: prediction={text!r} is not a finite number")
    out["prediction"] = pred
    df = pd.DataFrame(out)
    for i in np.flatnonzero(df.duplicated(["sim_id", "section_id"]).to_numpy()):
        problems.append(f"{_line(i)}: duplicate prediction for ({df['sim_id'].iat[i]}, {df['section_id'].iat[i]})")
    if problems:
        raise SchemaError(problems)
    return df


def align_predictions(target, predictions):
    """Predictions reordered to ``target``'s rows; exactly one per (sim_id, section_id)."""
    keys = target[["sim_id", "section_id"]].reset_index(drop=True)
    merged = keys.merge(predictions, on=["sim_id", "section_id"], how="left", validate="one_to_one")
    problems = []
    missing = merged["prediction"].isna().to_numpy()
    if missing.any():
        first = keys[missing].head(5).itertuples(index=False)
        problems.append(
            f"{int(missing.sum())} target row(s) lack a prediction, e.g. "
            + ", ".join(f"({s}, {c})" for s, c in first)
        )
    extra = len(predictions) - int((~missing).sum())
    if extra:
        problems.append(f"{extra} prediction(s) do not match any target row")
    if problems:
        raise SchemaError(problems)
    return merged["prediction"].to_numpy(dtype=np.float64)


def write_predictions(target, values, path):
    """Write predictions for ``target`` rows in target order."""
    values = np.asarray(values, dtype=np.float64)
    if len(values) != len(target):
        raise SchemaError(f"{len(values)} predictions for {len(target)} target rows")
    if not np.all(np.isfinite(values)):
        raise SchemaError("predictions must be finite")
    write_columns(
        PREDICTION_COLUMNS,
        [target["sim_id"].to_numpy(np.int64), target["section_id"].to_numpy(np.int64), values],
        path,
    )


def _cell(value, missing="undefined"):
    if value is None:
        return missing
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format_float(value)
    return str(value)


def write_table(header, records, path, missing="undefined"):
    """CSV from dict records in ``header`` order; ``None`` cells become ``missing``."""
    lines = [",".join(header)]
    for rec in records:
        lines.append(",".join(_cell(rec.get(h), missing) for h in header))
    _write_lines(lines, path)


def write_leaderboard(records, path):
    """Leaderboard CSV: the fixed leading columns, then any extra keys in first-row order.

    An empty leaderboard produces a header-only file.
    """
    header = list(LEADERBOARD_COLUMNS)
    if records:
        header += [k for k in records[0] if k not in LEADERBOARD_COLUMNS]
    write_table(header, records, path)
