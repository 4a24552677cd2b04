"""Command-line front end.

Exit codes: 0 success, 1 domain or I/O error, 2 usage error. Output files
default to ``$ENVBENCH_OUT_DIR`` (or the working directory) when no explicit
path is given.
"""

import argparse
import os
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from . import dataio
from .bootstrap import BootstrapConfig
from .evaluate import (
    EvaluationRequest,
    check_fold,
    evaluate_models,
    load_model_metadata,
    rank_shift_report,
    write_leaderboard_csv,
    write_rank_shift,
    write_regime_matrix,
    write_section_table,
)
from .exceptions import EnvBenchError
from .fatigue import (
    SectionGeometry,
    SNCurve,
    label_run,
    load_series_binary,
    load_series_csv,
    moment_to_stress,
    rainflow,
)
from .geometry import ALPHA_CONVENTIONS, write_boundary_csv
from .partition import (
    WAVE_AXES,
    WIND_AXES,
    RegimeConfig,
    RegimeLabeler,
    SplitSpec,
    apply_split,
    attach_labels,
    composition_sweep,
    random_split,
    regime_composition,
    size_matched_random_split,
)
from .synth import TOWERS, SynthConfig, generate_dataset, knn_predict

EXIT_OK, EXIT_DOMAIN, EXIT_USAGE = 0, 1, 2
OUT_DIR_ENV = "ENVBENCH_OUT_DIR"


class UsageError(Exception):
    pass


def _out_dir():
    return Path(os.environ.get(OUT_DIR_ENV) or ".")


def _out_path(value, default_name):
    if value:
        return Path(value)
    d = _out_dir()
    d.mkdir(parents=True, exist_ok=True)
    return d / default_name


def _grid(text):
    parts = [int(v) for v in text.split(",")]
    if len(parts) != 5:
        raise argparse.ArgumentTypeError("grid must be 5 integers: wind,hs,tp,seeds,sections")
    return dataio.GridShape(*parts)


def _floats(text):
    return tuple(float(v) for v in text.split(",") if v.strip())


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _regime_args(p):
    p.add_argument("--tau", type=float, default=0.5, help="IT threshold in spacing units")
    p.add_argument("--alpha", type=float, default=0.1, help="alpha-shape parameter")
    p.add_argument("--alpha-convention", choices=ALPHA_CONVENTIONS, default="inverse")
    p.add_argument("--epsilon", type=float, default=1e-6, help="EX boundary-distance tolerance")


def _split_args(p):
    p.add_argument("--wind-train", default="2-7,9-14,16-21")
    p.add_argument("--hs-train", default="2,3,5,6")
    p.add_argument("--tp-train", default="2,3,5,6")
    p.add_argument("--grid", type=_grid, default=dataio.DEFAULT_GRID)


def _spec(args):
    g = args.grid
    return SplitSpec.from_strings(
        args.wind_train, args.hs_train, args.tp_train, g.n_wind, g.n_hs, g.n_tp
    )


def _regime_config(args):
    return RegimeConfig(args.tau, args.alpha, args.epsilon, args.alpha_convention)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="envbench", description="Regime-aware evaluation of tabular surrogates."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic raw table")
    p.add_argument("-o", "--out")
    p.add_argument("--tower", choices=sorted(TOWERS), default="ref")
    p.add_argument("--grid", type=_grid, default=dataio.DEFAULT_GRID)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--wind-jitter", type=float, default=0.35)
    p.add_argument("--damage-noise", type=float, default=0.05)

    p = sub.add_parser("split", help="grid or random train/test split of a raw table")
    p.add_argument("raw")
    p.add_argument("--mode", choices=("grid", "random"), default="grid")
    _split_args(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--train-fraction", type=float)
    p.add_argument("--train-out")
    p.add_argument("--test-out")

    p = sub.add_parser("regimes", help="label test rows IT/IP/EX; write labeled train/test")
    p.add_argument("train")
    p.add_argument("test")
    _regime_args(p)
    p.add_argument("--grid", type=_grid, default=dataio.DEFAULT_GRID)
    p.add_argument("--train-out")
    p.add_argument("--test-out")
    p.add_argument("--composition", help="write the nine-cell composition CSV here")
    p.add_argument("--boundary-dir", help="write alpha-shape boundaries for both subspaces")
    p.add_argument("--sweep-alphas", type=_floats, help="comma list; writes composition_sweep.csv")
    p.add_argument("--sweep-epsilons", type=_floats, default=(1e-6,))

    p = sub.add_parser("damage", help="bending-moment series -> damage and DEL")
    p.add_argument("series", nargs="+")
    p.add_argument("--format", choices=("csv", "binary"), default="csv")
    p.add_argument("--sample-rate", type=float, help="Hz; required for binary input")
    p.add_argument("--window-start", type=float, help="discard samples before this time (s)")
    p.add_argument("--radius", type=float, required=True, help="section outer radius (m)")
    p.add_argument("--thickness", type=float, required=True, help="wall thickness (m)")
    p.add_argument("--sn-a", type=float, required=True, help="S-N intercept a_bar")
    p.add_argument("--sn-m", type=float, default=3.0, help="S-N slope m")
    p.add_argument("-o", "--out")
    p.add_argument("--cycles-out", help="also write the rainflow cycles of every series")

    p = sub.add_parser("eval", help="score prediction files and build leaderboards")
    p.add_argument("--protocol", type=str.upper, choices=("E1", "E2", "E3"), required=True)
    p.add_argument("--test", required=True, help="labeled test CSV (E1/E2) or raw tower CSV (E3)")
    p.add_argument("--pred", action="append", required=True, metavar="NAME=PATH")
    p.add_argument("--train-towers", help="E3: comma list of training towers")
    p.add_argument("--test-tower", help="E3: held-out tower")
    p.add_argument("--bootstrap-b", type=int, default=2000)
    p.add_argument("--bootstrap-alpha", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=42, help="bootstrap seed")
    p.add_argument("--sn-m", type=float, default=3.0, help="DEL exponent")
    p.add_argument("--sections", default="1,30", help="comma list or 'all'")
    p.add_argument("--shift-threshold", type=int, default=0)
    p.add_argument("--metadata", help="CSV keyed by model; extra columns copied into the leaderboard")
    p.add_argument("--grid", type=_grid, default=dataio.DEFAULT_GRID)
    p.add_argument("--out-dir")

    p = sub.add_parser("rankshift", help="rank-shift table from a leaderboard CSV")
    p.add_argument("leaderboard")
    p.add_argument("--threshold", type=int, default=0)
    p.add_argument("-o", "--out")

    p = sub.add_parser("validate", help="schema-check a table")
    p.add_argument("path")
    p.add_argument("--kind", choices=("raw", "train", "test"), default="raw")
    p.add_argument("--grid", type=_grid, default=dataio.DEFAULT_GRID)
    p.add_argument("--permissive", action="store_true")

    p = sub.add_parser("knn", help="k-nearest-neighbor reference predictions")
    p.add_argument("train")
    p.add_argument("query")
    p.add_argument("--k", type=_positive_int, default=5)
    p.add_argument("--sn-m", type=float, default=3.0, help="DEL exponent")
    p.add_argument("--kind", choices=("labeled", "raw"), default="labeled",
                   help="labeled train/test files or raw-schema split files")
    p.add_argument("--grid", type=_grid, default=dataio.DEFAULT_GRID)
    p.add_argument("-o", "--out")

    for p in sub.choices.values():
        p.add_argument("--threads", type=_positive_int, default=os.cpu_count() or 1)
    return parser


def cmd_synth(args):
    g = args.grid
    cfg = SynthConfig(
        g.n_wind, g.n_hs, g.n_tp, g.n_seeds, g.n_sections, tower=args.tower,
        wind_jitter=args.wind_jitter, damage_noise=args.damage_noise, seed=args.seed,
    )
    df = generate_dataset(cfg)
    dataio.validate_frame(df, "raw", grid=g)
    out = _out_path(args.out, f"{args.tower}_raw.csv")
    dataio.write_dataset(df, out, "raw")
    print(f"wrote {len(df)} rows to {out}")


def cmd_split(args):
    df = dataio.load_dataset(args.raw, "raw", grid=args.grid)
    if args.mode == "grid":
        train, test = apply_split(df, _spec(args))
    elif args.train_fraction is not None:
        train, test = random_split(df, train_fraction=args.train_fraction, seed=args.seed)
    else:
        train, test = size_matched_random_split(df, _spec(args), seed=args.seed)
    train_out = _out_path(args.train_out, "train_split.csv")
    test_out = _out_path(args.test_out, "test_split.csv")
    dataio.write_dataset(train, train_out, "raw")
    dataio.write_dataset(test, test_out, "raw")
    print(f"train {len(train)} rows -> {train_out}")
    print(f"test {len(test)} rows -> {test_out}")


def cmd_regimes(args):
    train = dataio.load_dataset(args.train, "raw", grid=args.grid)
    test = dataio.load_dataset(args.test, "raw", grid=args.grid)
    cfg = _regime_config(args)
    train_l, test_l = attach_labels(train, test, cfg)
    train_out = _out_path(args.train_out, "train_damage.csv")
    test_out = _out_path(args.test_out, "test_damage.csv")
    dataio.write_dataset(train_l, train_out, "train")
    dataio.write_dataset(test_l, test_out, "test")
    comp = regime_composition(test_l)
    for rec in comp.itertuples(index=False):
        print(f"{rec.regime}\t{rec.rows}\t{rec.percent:.2f}%")
    if args.composition:
        dataio.write_table(["regime", "rows", "percent"], comp.to_dict("records"), args.composition)
    if args.boundary_dir:
        d = Path(args.boundary_dir)
        d.mkdir(parents=True, exist_ok=True)
        for name, axes in (("wind", WIND_AXES), ("wave", WAVE_AXES)):
            lab = RegimeLabeler.from_config(cfg).fit(train[list(axes)].to_numpy(np.float64))
            write_boundary_csv(
                lab.hull_, d / f"{name}_boundary.csv", lab.standardizer_.inverse_transform
            )
    if args.sweep_alphas:
        sweep = composition_sweep(
            train, test, args.sweep_alphas, args.sweep_epsilons, ALPHA_CONVENTIONS, args.tau
        )
        out = _out_path(None, "composition_sweep.csv")
        dataio.write_table(list(sweep.columns), sweep.to_dict("records"), out)
        print(f"sweep -> {out}")


def cmd_damage(args):
    if args.format == "binary" and not args.sample_rate:
        raise UsageError("--sample-rate is required with --format binary")
    geom = SectionGeometry(args.radius, args.thickness)
    curve = SNCurve(args.sn_a, args.sn_m)
    records, cycles = [], []
    for path in args.series:
        if args.format == "csv":
            moment = load_series_csv(path, args.window_start)
        else:
            moment = load_series_binary(path, args.sample_rate, args.window_start)
        if len(moment) < 2:
            raise EnvBenchError(f"{path}: fewer than 2 samples in the analysis window")
        res = label_run(moment, geom, curve)
        records.append({"series": Path(path).name, "damage": res.damage, "del": res.del_})
        if args.cycles_out:
            hist = rainflow(moment_to_stress(moment, geom))
            for r, m, c in hist.as_tuples():
                cycles.append({"series": Path(path).name, "range": r, "mean": m, "count": c})
    out = _out_path(args.out, "damage.csv")
    dataio.write_table(["series", "damage", "del"], records, out)
    if args.cycles_out:
        dataio.write_table(["series", "range", "mean", "count"], cycles, args.cycles_out)
    print(f"wrote {len(records)} damage label(s) to {out}")


def _parse_preds(items):
    preds = {}
    for item in items:
        if "=" not in item:
            raise UsageError(f"--pred expects NAME=PATH, got {item!r}")
        name, path = item.split("=", 1)
        if not name or name in preds:
            raise UsageError(f"empty or duplicate model name in --pred {item!r}")
        preds[name] = dataio.read_predictions(path)
    return preds


def cmd_eval(args):
    preds = _parse_preds(args.pred)
    boot = BootstrapConfig(args.bootstrap_b, args.bootstrap_alpha, args.seed)
    if args.protocol == "E3":
        if not (args.train_towers and args.test_tower):
            raise UsageError("E3 needs --train-towers and --test-tower")
        check_fold(args.train_towers.split(","), args.test_tower)
        test = dataio.load_dataset(args.test, "raw", grid=args.grid)
    else:
        test = dataio.load_dataset(args.test, "test", grid=args.grid)
    if args.sections == "all":
        sections = tuple(sorted(set(test["section_id"].tolist())))
    else:
        sections = tuple(int(s) for s in args.sections.split(","))
    req = EvaluationRequest(
        args.protocol, test, preds, tower=args.test_tower or "ref",
        bootstrap=boot, sections=sections, m=args.sn_m,
    )
    metadata = load_model_metadata(args.metadata, preds) if args.metadata else None
    rows = evaluate_models(req, threads=args.threads)
    out_dir = Path(args.out_dir) if args.out_dir else _out_dir()
    out_dir.mkdir(parents=True, exist_ok=True)
    write_leaderboard_csv(rows, out_dir / "leaderboard.csv", metadata)
    write_section_table(rows, out_dir / "sections.csv")
    if args.protocol != "E3":
        write_regime_matrix(rows, out_dir / "regime_mre.csv")
    report = rank_shift_report(rows, args.shift_threshold, sections)
    write_rank_shift(report, out_dir / "rankshift.csv")
    for r in rows:
        print(f"{r.rank}\t{r.model}\trel_l2={r.metrics.rel_l2!r}\texex_rank={r.exex_rank}")
    print(f"outputs in {out_dir}")


def cmd_rankshift(args):
    lb = pd.read_csv(args.leaderboard, dtype=str, keep_default_na=False)
    need = {"rank", "model", "exex_rank"}
    if not need <= set(lb.columns):
        raise EnvBenchError(f"{args.leaderboard}: leaderboard lacks {sorted(need - set(lb.columns))}")
    sec_cols = [c for c in lb.columns if c.startswith("sec") and c.endswith("_rank")]

    def as_int(v):
        return int(v) if v.lstrip("-").isdigit() else None

    records = []
    for _, row in lb.iterrows():
        g, e = as_int(row["rank"]), as_int(row["exex_rank"])
        shift = None if (g is None or e is None) else e - g
        rec = {"model": row["model"], "global_rank": g, "exex_rank": e}
        rec.update({c: as_int(row[c]) for c in sec_cols})
        rec["shift"] = shift
        rec["flagged"] = bool(shift is not None and len(lb) > 1 and abs(shift) > args.threshold)
        records.append(rec)
    header = ["model", "global_rank", "exex_rank"] + sec_cols + ["shift", "flagged"]
    out = _out_path(args.out, "rankshift.csv")
    dataio.write_table(header, records, out, missing="empty")
    for rec in records:
        if rec["flagged"]:
            print(f"flagged: {rec['model']} global {rec['global_rank']} -> EX_EX {rec['exex_rank']}")
    print(f"wrote {out}")


def cmd_validate(args):
    _, report = dataio.load_dataset(
        args.path, args.kind, grid=args.grid, permissive=args.permissive, return_report=True
    )
    print(report.summary())


def cmd_knn(args):
    labeled = args.kind == "labeled"
    train = dataio.load_dataset(args.train, "train" if labeled else "raw", grid=args.grid)
    query = dataio.load_dataset(args.query, "test" if labeled else "raw", grid=args.grid)
    pred = knn_predict(train, query, k=args.k, m=args.sn_m)
    out = _out_path(args.out, f"knn{args.k}_predictions.csv")
    dataio.write_predictions(query, pred, out)
    print(f"wrote {len(pred)} predictions to {out}")


COMMANDS = {
    "synth": cmd_synth,
    "split": cmd_split,
    "regimes": cmd_regimes,
    "damage": cmd_damage,
    "eval": cmd_eval,
    "rankshift": cmd_rankshift,
    "validate": cmd_validate,
    "knn": cmd_knn,
}


def run(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (EnvBenchError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
