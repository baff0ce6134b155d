"""Command-line pipeline: ingest, summarize, simulate, impute, roll, backtest, report.

Exit status is 0 on success, 2 for invalid input or configuration and 3
when a numerical routine fails.
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys
import warnings
from collections import defaultdict
from typing import Optional, Sequence

import numpy as np

from . import __version__
from . import io as aio
from .breach_data import (MetricPoint, SyntheticConfig, derive_itn, derive_series,
                          generate_synthetic, read_breach_csv, summarize)
from .copula import ALL_FAMILIES, CopulaSpec, Family
from .errors import DomainError, NumericalError, ValidationError
from .imputation import ImputationResult, impute
from .risk_eval import backtest_table, backtest_var, mae
from .rolling import QUANTILES, STEP_COLUMNS, quantile_column, roll, step_row

logger = logging.getLogger("breachrisk")

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 2, 3
DEFAULT_ALPHAS = (0.9, 0.95, 0.99)
METRICS = ("ttn", "tti")

IMPUTED_COLUMNS = ("index", "ttn", "tti", "ttn_imputed", "tti_imputed")
SAMPLE_COLUMNS = ("step_index", "k", "ttn", "tti")


@dataclasses.dataclass
class RunConfig:
    command: str
    input: Optional[str] = None
    output_dir: str = "."
    window: int = 500
    n_sim: int = 5000
    alphas: tuple = DEFAULT_ALPHAS
    families: tuple = tuple(f.value for f in ALL_FAMILIES)
    seed: int = 42
    split_index: Optional[int] = None
    emit_samples: bool = False
    jobs: int = 1
    extra: dict = dataclasses.field(default_factory=dict)

    def validate(self):
        if self.window < 50:
            raise ValidationError(f"--window must be >= 50, got {self.window}")
        if self.n_sim < 100:
            raise ValidationError(f"--n-sim must be >= 100, got {self.n_sim}")
        for a in self.alphas:
            if not 0 < a < 1:
                raise ValidationError(f"--alpha must lie in (0, 1), got {a}")
        if self.jobs < 1:
            raise ValidationError("--jobs must be >= 1")
        return self

    def hashable(self) -> dict:
        d = dataclasses.asdict(self)
        d.update(d.pop("extra"))
        d.pop("jobs")   # thread count never changes results
        return d

    def meta(self) -> dict:
        return aio.metadata(self.seed, self.hashable())

    def path(self, name: str) -> str:
        return os.path.join(self.output_dir, name)


def _families(text: Optional[str]) -> tuple:
    if not text:
        return tuple(f.value for f in ALL_FAMILIES)
    out = []
    for name in text.split(","):
        try:
            out.append(Family.parse(name.strip()).value)
        except ValueError:
            raise ValidationError(f"--families: unknown copula family {name.strip()!r}") from None
    return tuple(out)


def _check_split(split: Optional[int], n: int, window: Optional[int] = None) -> int:
    if split is None:
        raise ValidationError("--split-index is required")
    if not 0 < split < n:
        raise ValidationError(f"--split-index must lie in (0, {n}), got {split}")
    if window is not None and split < window:
        raise ValidationError(f"--split-index {split} is smaller than --window {window}")
    return split


def _input(cfg: RunConfig, default: Optional[str] = None) -> str:
    path = cfg.input or (default and cfg.path(default))
    if not path:
        raise ValidationError("--input is required")
    return path


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_ingest(cfg: RunConfig):
    records = read_breach_csv(_input(cfg))
    points = derive_series(records)
    aio.write_csv(cfg.path("points.csv"), aio.POINT_COLUMNS, aio.point_rows(points), cfg.meta())
    return [cfg.path("points.csv")]


def cmd_summarize(cfg: RunConfig):
    path = _input(cfg)
    _, rows = aio.read_csv(path)
    fields = list(rows[0].keys()) if rows else []
    if "breach_dates" in fields:
        records = read_breach_csv(path)
        points = derive_series(records)
        itn = [derive_itn(r) for r in records]
    else:
        points = aio.read_points(path)
        itn = [None if p.tti is None else p.ttn - p.tti for p in points]
    out = {"n": len(points),
           "ttn": summarize([p.ttn for p in points]).to_dict(),
           "tti": _maybe_summary([p.tti for p in points]),
           "itn": _maybe_summary(itn)}
    aio.write_json(cfg.path("summary.json"), out, cfg.meta())
    return [cfg.path("summary.json")]


def _maybe_summary(values):
    if all(v is None for v in values):
        return None
    return summarize(values).to_dict()


def cmd_simulate(cfg: RunConfig):
    ex = cfg.extra
    scfg = SyntheticConfig(length=ex["length"], tti_missing_rate=ex["tti_missing_rate"],
                           both_missing_rate=ex["both_missing_rate"],
                           integer_days=not ex["continuous"])
    data = generate_synthetic(scfg, cfg.seed)
    rows = ({"index": p.index, "ttn": p.ttn, "tti": p.tti, "pattern": p.pattern.value,
             "ttn_true": float(a), "tti_true": float(b)}
            for p, a, b in zip(data.points, data.ttn_true, data.tti_true))
    aio.write_csv(cfg.path("points.csv"), aio.POINT_COLUMNS + ("ttn_true", "tti_true"),
                  rows, cfg.meta())
    return [cfg.path("points.csv")]


def cmd_impute(cfg: RunConfig):
    points = aio.read_points(_input(cfg, "points.csv"))
    if cfg.split_index is not None:
        points = points[:_check_split(cfg.split_index, len(points))]
    res = impute(points, cfg.n_sim, cfg.seed, candidates=cfg.families, workers=cfg.jobs)
    write_imputation(cfg, res)
    return [cfg.path("imputed.csv"), cfg.path("imputed.json")]


def write_imputation(cfg: RunConfig, res: ImputationResult):
    rows = ({"index": p.index, "ttn": p.ttn, "tti": p.tti,
             "ttn_imputed": bool(f[0]), "tti_imputed": bool(f[1])}
            for p, f in zip(res.points, res.imputed_flags))
    meta = cfg.meta()
    aio.write_csv(cfg.path("imputed.csv"), IMPUTED_COLUMNS, rows, meta)
    aio.write_json(cfg.path("imputed.json"), res.sidecar(), meta)


def read_imputation(csv_path, json_path) -> ImputationResult:
    _, rows = aio.read_csv(csv_path)
    if not rows:
        raise ValidationError(f"{csv_path}: no data rows")
    aio.require_columns(list(rows[0].keys()), IMPUTED_COLUMNS, str(csv_path))
    points, flags = [], []
    for r, row in enumerate(rows, start=2):
        ttn = aio.parse_float(row["ttn"], "ttn", r)
        tti = aio.parse_float(row["tti"], "tti", r)
        if ttn is None or tti is None:
            raise ValidationError(f"row {r}: imputed data may not contain missing values")
        points.append(MetricPoint(int(row["index"]), ttn, tti))
        flags.append((row["ttn_imputed"] == "1", row["tti_imputed"] == "1"))
    side = aio.read_json(json_path) if os.path.exists(json_path) else {}
    copula = CopulaSpec.from_dict(side["copula"]) if "copula" in side else CopulaSpec("Independence")
    return ImputationResult(points, copula, np.array(flags, dtype=bool),
                            int(side.get("clamp_count", 0)), int(side.get("n_sim", 0)),
                            int(side.get("seed", 0)))


def cmd_roll(cfg: RunConfig):
    points = aio.read_points(_input(cfg, "points.csv"))
    split = _check_split(cfg.split_index, len(points), cfg.window)
    imputed_csv = cfg.extra.get("imputed") or cfg.path("imputed.csv")
    if os.path.exists(imputed_csv):
        res = read_imputation(imputed_csv, os.path.splitext(imputed_csv)[0] + ".json")
        if len(res.points) != split:
            raise ValidationError(
                f"--split-index {split} does not match the {len(res.points)} imputed in-sample points")
    else:
        res = impute(points[:split], cfg.n_sim, cfg.seed, candidates=cfg.families,
                     workers=cfg.jobs)
        write_imputation(cfg, res)
    steps = roll(res, points[split:], cfg.window, cfg.n_sim, cfg.seed,
                 candidates=cfg.families, workers=cfg.jobs)
    meta = cfg.meta()
    aio.write_csv(cfg.path("steps.csv"), STEP_COLUMNS, (step_row(s) for s in steps), meta)
    written = [cfg.path("steps.csv")]
    if cfg.emit_samples:
        rows = ((s.step_index, k, a, b) for s in steps
                for k, (a, b) in enumerate(zip(s.ttn_samples, s.tti_samples)))
        aio.write_csv(cfg.path("samples.csv"), SAMPLE_COLUMNS, rows, meta)
        written.append(cfg.path("samples.csv"))
    return written


# --- evaluation -------------------------------------------------------------

def _load_steps(cfg: RunConfig):
    path = _input(cfg, "steps.csv")
    _, rows = aio.read_csv(path)
    if not rows:
        raise ValidationError(f"{path}: no data rows")
    aio.require_columns(list(rows[0].keys()), STEP_COLUMNS, str(path))
    table = {c: [aio.parse_float(row[c], c, r) for r, row in enumerate(rows, start=2)]
             for c in STEP_COLUMNS if c != "copula"}
    samples = None
    spath = cfg.extra.get("samples") or cfg.path("samples.csv")
    if os.path.exists(spath):
        _, srows = aio.read_csv(spath)
        grouped = defaultdict(lambda: ([], []))
        for row in srows:
            a, b = grouped[int(row["step_index"])]
            a.append(float(row["ttn"]))
            b.append(float(row["tti"]))
        samples = {m: [np.array(grouped[int(i)][j]) for i in table["step_index"]]
                   for j, m in enumerate(METRICS)}
    return table, samples


def _var_series(table, samples, metric, alpha):
    from .risk_eval import var_estimate

    if samples is not None:
        return [var_estimate(s, alpha) for s in samples[metric]]
    col = quantile_column(metric, alpha)
    if alpha not in QUANTILES or col not in table:
        raise ValidationError(
            f"--alpha {alpha}: steps.csv only stores quantiles {QUANTILES}; "
            "re-run roll with --emit-samples for other levels")
    return table[col]


def _backtests(cfg, table, samples):
    out = {}
    for m in METRICS:
        obs = table[f"{m}_obs"]
        if all(o is None for o in obs):
            continue
        out[m] = [backtest_var(_var_series(table, samples, m, a), obs, a) for a in cfg.alphas]
    return out


def cmd_backtest(cfg: RunConfig):
    table, samples = _load_steps(cfg)
    results = _backtests(cfg, table, samples)
    meta = cfg.meta()
    written = [cfg.path("backtest.json")]
    aio.write_json(written[0], {m: [r.to_dict() for r in reps] for m, reps in results.items()}, meta)
    for m, reps in results.items():
        path = cfg.path(f"backtest_{m}.csv")
        aio.write_csv_text(path, backtest_table(reps), meta)
        written.append(path)
    return written


def cmd_report(cfg: RunConfig):
    table, samples = _load_steps(cfg)
    results = _backtests(cfg, table, samples)
    meta = cfg.meta()
    report = {"n_steps": len(table["step_index"]), "metrics": {}}
    written = [cfg.path("report.json")]
    for m in METRICS:
        obs = table[f"{m}_obs"]
        keep = [i for i, o in enumerate(obs) if o is not None]
        entry = {"n_scored": len(keep)}
        if keep:
            entry["crps_mean"] = float(np.mean([table[f"{m}_crps"][i] for i in keep]))
            entry["mae"] = mae([table[f"{m}_mean"][i] for i in keep], [obs[i] for i in keep])
            entry["backtests"] = [r.to_dict() for r in results.get(m, [])]
        report["metrics"][m] = entry

        levels = DEFAULT_ALPHAS
        cols = ["time", "observation"] + [f"var_{a:g}" for a in levels]
        var = {a: _var_series(table, samples, m, a) for a in levels}
        rows = [[int(t), obs[i]] + [var[a][i] for a in levels]
                for i, t in enumerate(table["step_index"])]
        path = cfg.path(f"var_plot_{m}.csv")
        aio.write_csv(path, cols, rows, meta)
        written.append(path)
        if cfg.extra.get("svg"):
            path = cfg.path(f"var_plot_{m}.svg")
            aio.atomic_write_text(path, svg_chart(rows, cols[1:], f"{m.upper()} and VaR"))
            written.append(path)
    aio.write_json(written[0], report, meta)
    return written


def svg_chart(rows, names, title, width=800, height=300) -> str:
    """Minimal SVG line chart; ``rows`` are ``[x, y1, y2, ...]``."""
    xs = [r[0] for r in rows]
    series = [[r[j + 1] for r in rows] for j in range(len(names))]
    ys = [v for s in series for v in s if v is not None]
    if not xs or not ys:
        return f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}"></svg>\n'
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    pad = 30

    def sx(x):
        return pad + (x - x0) / ((x1 - x0) or 1) * (width - 2 * pad)

    def sy(y):
        return height - pad - (y - y0) / ((y1 - y0) or 1) * (height - 2 * pad)

    colors = ["#444444", "#1f77b4", "#ff7f0e", "#d62728", "#2ca02c"]
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
             f'<text x="{pad}" y="18" font-size="13">{title}</text>']
    for j, (name, s) in enumerate(zip(names, series)):
        pts = " ".join(f"{sx(x):.1f},{sy(y):.1f}" for x, y in zip(xs, s) if y is not None)
        parts.append(f'<polyline fill="none" stroke="{colors[j % len(colors)]}" '
                     f'stroke-width="1" points="{pts}"><title>{name}</title></polyline>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


COMMANDS = {
    "ingest": cmd_ingest,
    "summarize": cmd_summarize,
    "simulate": cmd_simulate,
    "impute": cmd_impute,
    "roll": cmd_roll,
    "backtest": cmd_backtest,
    "report": cmd_report,
}


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input", help="input file")
    common.add_argument("--output-dir", default=".", help="directory for artifacts")
    common.add_argument("--seed", type=int, default=42)
    common.add_argument("--window", type=int, default=500)
    common.add_argument("--n-sim", type=int, default=5000)
    common.add_argument("--alpha", type=float, action="append",
                        help="VaR level; repeatable (default 0.9, 0.95, 0.99)")
    common.add_argument("--split-index", type=int,
                        help="first out-of-sample index; earlier points are in-sample")
    common.add_argument("--families", help="comma-separated copula families (default: all)")
    common.add_argument("--emit-samples", action="store_true",
                        help="also write raw predictive samples")
    common.add_argument("--jobs", type=int, default=1)
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = _Parser(prog="breachrisk", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name == "simulate":
            p.add_argument("--length", type=int, default=SyntheticConfig.length)
            p.add_argument("--tti-missing-rate", type=float, default=SyntheticConfig.tti_missing_rate)
            p.add_argument("--both-missing-rate", type=float, default=SyntheticConfig.both_missing_rate)
            p.add_argument("--continuous", action="store_true",
                           help="keep day counts unrounded")
        if name == "roll":
            p.add_argument("--imputed", help="imputed in-sample CSV (default OUTPUT_DIR/imputed.csv)")
        if name in ("backtest", "report"):
            p.add_argument("--samples", help="raw samples CSV (default OUTPUT_DIR/samples.csv if present)")
        if name == "report":
            p.add_argument("--svg", action="store_true", help="also write SVG charts")
    return parser


_EXTRA = ("length", "tti_missing_rate", "both_missing_rate", "continuous", "imputed",
          "samples", "svg")


def config_from_args(args) -> RunConfig:
    extra = {k: getattr(args, k) for k in _EXTRA if hasattr(args, k)}
    return RunConfig(
        command=args.command, input=args.input, output_dir=args.output_dir,
        window=args.window, n_sim=args.n_sim,
        alphas=tuple(args.alpha) if args.alpha else DEFAULT_ALPHAS,
        families=_families(args.families), seed=args.seed, split_index=args.split_index,
        emit_samples=args.emit_samples, jobs=args.jobs, extra=extra,
    ).validate()


def run(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
        with warnings.catch_warnings():
            if not args.verbose:
                warnings.simplefilter("ignore", RuntimeWarning)
            written = COMMANDS[cfg.command](cfg)
    except (ValidationError, DomainError) as exc:
        print(f"breachrisk {args.command}: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NumericalError as exc:
        print(f"breachrisk {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"breachrisk {args.command}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    for path in written:
        print(path)
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
