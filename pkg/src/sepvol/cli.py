"""Command line front end: ``run``, ``report``, ``verify`` and ``exact``.

Exit codes: 0 success, 1 failure (run error, failed check, interruption),
2 configuration or usage error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import dataclass

import numpy as np
import sympy as sp

from . import config as cfg
from . import estimator, exact, kernels, metrics, param, septest
from .config import ConfigError, RunConfig
from .estimator import POOLED

THREADS_ENV = cfg.WORKERS_ENV

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2

TABLE_CLASSES = ("all", "sep_A", "sep_B", POOLED, "sep_either", "sep_both")


def fmt(x) -> str:
    """Single number format shared by the text and CSV renderings."""
    if x is None:
        return "undefined"
    if isinstance(x, bool):
        return "yes" if x else "no"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        return f"{x:.8g}"
    return str(x)


@dataclass
class Table:
    title: str
    headers: list
    rows: list

    def cells(self) -> list:
        return [[fmt(v) for v in row] for row in self.rows]

    def text(self) -> str:
        cells = self.cells()
        widths = [max(len(h), *(len(r[i]) for r in cells)) if cells else len(h)
                  for i, h in enumerate(self.headers)]
        line = "  ".join(h.ljust(w) for h, w in zip(self.headers, widths))
        out = [self.title, "-" * len(self.title), line]
        for r in cells:
            out.append("  ".join(c.rjust(w) if i else c.ljust(w)
                                 for i, (c, w) in enumerate(zip(r, widths))))
        return "\n".join(out)


# --------------------------------------------------------------------------
# report tables


def _bures_scaled(est: dict, bures: dict, cls: str):
    a, b = est.get(cls), bures.get(cls)
    if a is None or not b:
        return None
    return a / b


def report_tables(rep: estimator.EstimateReport) -> list[Table]:
    tables = []
    for n, st in sorted(rep.strata.items()):
        what = "volume" if n == 0 else f"rank-{st.N - n} hyperarea"
        tag = f"N={st.N}, n={n} ({what}), M={st.M}"
        rows = [[m] + [me.estimates[c] for c in TABLE_CLASSES] for m, me in st.metrics.items()]
        tables.append(Table(f"Estimates, absolute units [{tag}]", ["metric", *TABLE_CLASSES], rows))
        if "bures" in st.metrics:
            b = st.metrics["bures"].estimates
            rows = []
            for m, me in st.metrics.items():
                row = [m] + [_bures_scaled(me.estimates, b, c) for c in TABLE_CLASSES]
                conj = None
                if m == "km" and n == 0:
                    q = exact.km_volume_ratio(st.N)
                    conj = (float(q), q.status.value)
                row += [conj[0] if conj else None, conj[1] if conj else ""]
                rows.append(row)
            tables.append(Table(f"Bures-scaled estimates [{tag}]",
                                ["metric", *TABLE_CLASSES, "conjecture", "status"], rows))
        rows = [[m] + [me.probabilities[c] for c in estimator.SEP_CLASSES]
                for m, me in st.metrics.items()]
        tables.append(Table(f"Separability probabilities [{tag}]",
                            ["metric", *estimator.SEP_CLASSES], rows))
        rows = []
        for m, me in st.metrics.items():
            for c, o in me.oracles.items():
                rows.append([m, c, me.estimates[c], o.name, o.value, o.ratio, o.status])
            if me.divergent or me.floor is not None:
                rows.append([m, "all", me.estimates["all"], "divergent" if me.divergent else "",
                             None, None, f"floor={fmt(me.floor)}" if me.floor else ""])
        tables.append(Table(f"Oracle comparison [{tag}]",
                            ["metric", "class", "estimate", "oracle", "value", "ratio", "status"],
                            rows))
        rows = [[c, st.counts[c], st.fractions.get(c)] for c in estimator.SEP_CLASSES]
        rows.insert(0, ["all", st.counts["all"], 1.0])
        tables.append(Table(f"Raw hypercube counts [{tag}]", ["class", "count", "fraction"], rows))
    if rep.ratios:
        rows = []
        for m, e in rep.ratios.items():
            g = e.gamma_exact
            rows.append([m, e.R_all, g.value if g else None, g.ratio if g else None,
                         g.status if g else ""])
        tables.append(Table("Hyperarea-to-volume ratio gamma", ["metric", "R_sep+nonsep",
                                                                "exact", "ratio", "status"], rows))
        rows = [[m, e.R_all, e.R_sep, e.omega, e.P_N, e.P_N1, e.omega_from_p, e.omega_minus_2]
                for m, e in rep.ratios.items()]
        tables.append(Table(f"Omega = R_sep+nonsep / R_sep ({rep.pooled_class})",
                            ["metric", "R_sep+nonsep", "R_sep", "Omega", "P_rankN", "P_rankN-1",
                             "P_rankN/P_rankN-1", "Omega-2"], rows))
    if rep.probability_ratios:
        keys = sorted({k for row in rep.probability_ratios.values() for k in row})
        rows = [[m] + [row.get(k) for k in keys] for m, row in rep.probability_ratios.items()]
        tables.append(Table("Separability probability ratios between strata",
                            ["metric", *[f"P{k}" for k in keys]], rows))
    return tables


def render(tables: list[Table], form: str) -> str:
    if form == "text":
        return "\n\n".join(t.text() for t in tables) + "\n"
    if form == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        for t in tables:
            w.writerow([f"# {t.title}"])
            w.writerow(t.headers)
            w.writerows(t.cells())
            w.writerow([])
        return buf.getvalue()
    raise ValueError(f"unknown format {form!r}")


# --------------------------------------------------------------------------
# charts


def svg_chart(series: estimator.ConvergenceSeries, metric: str, classes=("all", POOLED),
              width: int = 640, height: int = 360) -> str | None:
    """Static line chart of ratio-to-oracle against samples; ``None`` without oracles."""
    lines = {}
    for c in classes:
        pts = [(r[1], r[5]) for r in series.series(metric, c) if r[5] is not None]
        if pts:
            lines[c] = pts
    if not lines:
        return None
    xs = [p[0] for v in lines.values() for p in v]
    ys = [p[1] for v in lines.values() for p in v] + [1.0]
    x0, x1 = min(xs), max(xs)
    lo, hi = min(ys), max(ys)
    pad = max(hi - lo, 1e-3) * 0.1
    lo, hi = lo - pad, hi + pad
    L, R, T, B = 60, 20, 30, 40

    def X(x):
        return L + (x - x0) / ((x1 - x0) or 1) * (width - L - R)

    def Y(y):
        return T + (hi - y) / (hi - lo) * (height - T - B)

    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
           f'<text x="{L}" y="18" font-size="13">{metric}: estimate / oracle</text>',
           f'<line x1="{L}" y1="{Y(1.0):.1f}" x2="{width - R}" y2="{Y(1.0):.1f}" '
           'stroke="#999" stroke-dasharray="4"/>',
           f'<text x="4" y="{Y(hi) + 10:.1f}" font-size="10">{hi:.4f}</text>',
           f'<text x="4" y="{Y(lo):.1f}" font-size="10">{lo:.4f}</text>',
           f'<text x="{L}" y="{height - 8}" font-size="10">{x0}</text>',
           f'<text x="{width - R - 60}" y="{height - 8}" font-size="10">{x1} samples</text>']
    for i, (c, pts) in enumerate(lines.items()):
        col = colors[i % len(colors)]
        path = " ".join(f"{X(x):.1f},{Y(y):.1f}" for x, y in pts)
        out.append(f'<polyline fill="none" stroke="{col}" stroke-width="1.5" points="{path}"/>')
        out.append(f'<text x="{width - R - 120}" y="{T + 14 * (i + 1)}" font-size="11" '
                   f'fill="{col}">{c}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


# --------------------------------------------------------------------------
# verify


def verify_checks(seed: int = 2024) -> list[tuple[str, bool, str]]:
    """The non-stochastic invariant suite as ``(name, ok, detail)`` triples."""
    out = []
    for name, ok in septest.fixture_checks().items():
        out.append((f"fixture: {name}", bool(ok), ""))
    rng = np.random.default_rng(seed)
    for k in range(3):
        rep = septest.grouping_algebra_check(septest.random_rational_matrix(rng), 0.0,
                                             fixtures=False)
        for name in ("a2^2 = I", "a3^2 = I", "(a2 a3)^12 = I", "a2 = P a3(P^T . P)^T P^T"):
            out.append((f"algebra #{k}: {name}", rep.checks[name], ""))
        out.append((f"algebra #{k}: order of a2 a3", rep.order == 12, f"order {rep.order}"))
    bad = [(N, n) for N in range(2, 9) for n in range(N)
           if sp.simplify(exact.general_product(N, n) - exact.rectified_product(N, n)) != 0]
    out.append(("exact: rectified product = general form, N<=8", not bad, f"mismatches {bad}"))
    out.append(("exact: binomial form differs at (6,2)",
                exact.bures_binomial_form(6, 2) != exact.bures_rank_volume(6, 2).expr, ""))
    checks = [("bures_volume_6_0", 7.27075e-17), ("bures_volume_6_1", 2.04457e-15),
              ("hs_volume_6", 7.69334e-24), ("hs_hyperarea_6", 1.47483e-21),
              ("gamma_bures_6", 28.1205), ("gamma_hs_6", 191.703),
              ("gamma_bures_4", 12.1566), ("gamma_hs_4", 51.9615)]
    for name, want in checks:
        got = float(exact.lookup(name))
        out.append((f"exact: {name}", abs(got / want - 1) < 5e-6, f"{got:.6g}"))
    for N in (2, 3, 4):
        ok = exact.bures_rank_volume(N, N - 1).expr == exact.projective_volume(N)
        out.append((f"exact: pure-state stratum N={N} is CP^{N - 1}", bool(ok), ""))
    worst = 0.0
    for N in (2, 3, 4):
        for n in (0, 1):
            for kind in metrics.ALL_METRICS:
                s = metrics.interior_sample(rng, N, n)
                worst = max(worst, metrics.tensor_mismatch(kind, s))
    out.append(("metrics: weight = sqrt det g (N<=4, n<=1)", worst < 1e-4, f"worst {worst:.2e}"))
    out.append(("kernels: numba and numpy paths agree", *_kernel_agreement()))
    return out


def _kernel_agreement() -> tuple[bool, str]:
    if not kernels.HAVE_NUMBA:
        return True, "numba unavailable; numpy path only"
    N, n = 6, 0
    pts = np.random.default_rng(7).uniform(0.02, 0.98, (256, param.stratum_dim(N, n)))
    codes = np.array([m.code for m in metrics.ALL_METRICS], dtype=np.int64)
    flagged = np.array([m.divergent_volume for m in metrics.ALL_METRICS])
    ranges = param.angle_ranges(N, n, "haar")
    res = []
    for fn in (kernels.accumulate_numba, kernels.accumulate_numpy):
        arr = kernels.new_arrays(len(codes))
        fn(pts, N, n, ranges, True, 3, 2, codes, flagged, 0.0, metrics.DEFAULT_FLOOR, *arr)
        res.append(arr)
    a, b = res[0][0] + res[0][1], res[1][0] + res[1][1]
    rel = float(np.max(np.abs(a - b) / np.maximum(np.abs(a), 1e-300)))
    same = bool(np.array_equal(res[0][3], res[1][3]))
    return rel < 1e-10 and same, f"max rel {rel:.1e}, counts equal {same}"


# --------------------------------------------------------------------------
# argument handling


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("run configuration (override preset/config file)")
    g.add_argument("--N", type=int)
    g.add_argument("--dims", help="bipartition d1,d2")
    g.add_argument("--strata", help="rank defects to run, e.g. 0,1")
    g.add_argument("--metrics", help=f"comma list from {','.join(cfg.METRIC_TAGS)}")
    g.add_argument("--points", type=float, help="point budget M")
    g.add_argument("--block", type=float, help="convergence block size B")
    g.add_argument("--kind", choices=["faure", "pseudorandom"])
    g.add_argument("--base", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--scramble", choices=["faure-tezuka", "none"])
    g.add_argument("--angle-map", dest="angle_map", choices=list(param.ANGLE_MAPS))
    g.add_argument("--hyperarea-mode", dest="hyperarea_mode", choices=list(cfg.HYPERAREA_MODES))
    g.add_argument("--eps", type=float, help="PPT tolerance")
    g.add_argument("--floor", type=float, help="KM/geometric boundary floor")
    g.add_argument("--shards", type=int)
    g.add_argument("--workers", type=int, help=f"worker processes (default ${THREADS_ENV} or 1)")


def config_from_args(args) -> RunConfig:
    if args.preset and args.config:
        raise ConfigError("give either --preset or --config, not both")
    if args.preset:
        base = cfg.preset(args.preset)
    elif args.config:
        base = cfg.load(args.config)
    else:
        base = RunConfig()
    over = {}
    for key in ("N", "base", "seed", "kind", "scramble", "angle_map", "hyperarea_mode", "eps",
                "floor", "shards", "workers"):
        v = getattr(args, key)
        if v is not None:
            over[key] = v
    for key in ("points", "block"):
        v = getattr(args, key)
        if v is not None:
            if v != int(v):
                raise ConfigError(f"{key} must be an integer")
            over[key] = int(v)
    try:
        if args.dims:
            over["dims"] = tuple(int(x) for x in args.dims.split(","))
        if args.strata:
            over["strata"] = tuple(int(x) for x in args.strata.split(","))
    except ValueError:
        raise ConfigError("dims and strata take comma-separated integers") from None
    if args.metrics:
        over["metrics"] = tuple(x.strip() for x in args.metrics.split(",") if x.strip())
    if "N" in over and "dims" not in over:
        over["dims"] = septest.default_dims(over["N"]) if over["N"] in (4, 6) else base.dims
    if args.out:
        over["out_dir"] = args.out
    try:
        return base.with_(**over)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None


def _err(msg: str) -> None:
    print(f"sepvol: {msg}", file=sys.stderr)


def cmd_run(args) -> int:
    conf = config_from_args(args)
    out = conf.out_dir or "."
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "config.ini"), "w", encoding="utf-8") as fh:
        fh.write(conf.to_ini())
    accs = {}
    with estimator.StopFlag() as stop:
        for n in sorted(conf.strata):
            path = os.path.join(out, f"checkpoint_n{n}.bin")
            acc = None
            if args.resume and os.path.exists(path):
                acc = estimator.load_checkpoint(path)
            if not args.quiet:
                print(f"stratum n={n}: {conf.points} points"
                      + (f" (resuming at {acc.next_index})" if acc else ""), file=sys.stderr)
            accs[n] = estimator.run_stratum(conf, n, acc=acc, checkpoint_path=path,
                                            should_stop=stop)
    rep = estimator.build_report(accs, conf.to_dict())
    with open(os.path.join(out, "report.json"), "w", encoding="utf-8") as fh:
        fh.write(rep.to_json())
    for n, acc in accs.items():
        series = estimator.convergence(acc)
        with open(os.path.join(out, f"convergence_n{n}.csv"), "w", encoding="utf-8") as fh:
            fh.write(series.to_csv())
        if args.svg:
            for m in acc.metrics:
                svg = svg_chart(series, m)
                if svg:
                    with open(os.path.join(out, f"convergence_n{n}_{m}.svg"), "w") as fh:
                        fh.write(svg)
    if not args.quiet:
        print(render(report_tables(rep), "text"))
    return EXIT_OK


def load_report(paths: list[str]) -> estimator.EstimateReport:
    accs = {}
    for p in paths:
        with open(p, "rb") as fh:
            head = fh.read(8)
        if head == estimator.MAGIC:
            acc = estimator.load_checkpoint(p)
            if acc.n in accs:
                raise ConfigError(f"two checkpoints for stratum n={acc.n}")
            accs[acc.n] = acc
        else:
            if len(paths) != 1:
                raise ConfigError("give a single report file or any number of checkpoints")
            with open(p, encoding="utf-8") as fh:
                return estimator.EstimateReport.from_dict(json.load(fh))
    return estimator.build_report(accs)


def cmd_report(args) -> int:
    rep = load_report(args.inputs)
    if args.format == "json":
        sys.stdout.write(rep.to_json() + "\n")
    else:
        sys.stdout.write(render(report_tables(rep), args.format))
    return EXIT_OK


def cmd_verify(args) -> int:
    checks = verify_checks()
    failed = [c for c in checks if not c[1]]
    for name, ok, detail in checks:
        if ok and args.quiet:
            continue
        print(f"{'PASS' if ok else 'FAIL'}  {name}" + (f"  ({detail})" if detail else ""))
    print(f"{len(checks) - len(failed)}/{len(checks)} checks passed")
    return EXIT_FAIL if failed else EXIT_OK


def cmd_exact(args) -> int:
    if args.list:
        for name in exact.names():
            print(name)
        return EXIT_OK
    names = args.names or ["bures_volume_6_0", "bures_volume_6_1", "hs_volume_6",
                           "hs_hyperarea_6", "gamma_bures_6", "gamma_hs_6"]
    rows = []
    for name in names:
        try:
            q = exact.lookup(name)
        except exact.ExactError as exc:
            raise ConfigError(str(exc)) from None
        rows.append([q.name, q.decimal(args.digits), q.symbolic(), q.status.value])
    sys.stdout.write(render([Table("Exact quantities", ["name", "value", "exact", "status"],
                                   rows)], args.format))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sepvol", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run or resume an estimation")
    r.add_argument("--preset", choices=sorted(cfg.PRESETS))
    r.add_argument("--config", help="key=value or JSON config file")
    r.add_argument("--out", help="output directory (default .)")
    r.add_argument("--resume", action="store_true", help="continue from checkpoints in --out")
    r.add_argument("--svg", action="store_true", help="also write convergence charts")
    r.add_argument("--quiet", action="store_true")
    _add_config_flags(r)
    r.set_defaults(func=cmd_run)
    rp = sub.add_parser("report", help="render a report.json or checkpoint files")
    rp.add_argument("inputs", nargs="+")
    rp.add_argument("--format", default="text", choices=["text", "csv", "json"])
    rp.set_defaults(func=cmd_report)
    v = sub.add_parser("verify", help="run the deterministic invariant suite")
    v.add_argument("--quiet", action="store_true", help="print failures only")
    v.set_defaults(func=cmd_verify)
    e = sub.add_parser("exact", help="print exact and conjectured quantities")
    e.add_argument("names", nargs="*")
    e.add_argument("--list", action="store_true")
    e.add_argument("--digits", type=int, default=12)
    e.add_argument("--format", default="text", choices=["text", "csv"])
    e.set_defaults(func=cmd_exact)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        return args.func(args)
    except ConfigError as exc:
        _err(f"config error: {exc}")
        return EXIT_CONFIG
    except estimator.Interrupted as exc:
        _err(f"interrupted, checkpoint saved: {exc}")
        return EXIT_FAIL
    except (OSError, estimator.EstimatorError, exact.ExactError) as exc:
        _err(str(exc))
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
