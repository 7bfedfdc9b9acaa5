"""Command-line interface: ``binscore <command> [options]``.

Tables go to stdout (or ``--out``) as CSV; ``--json`` switches report
commands to JSON. The resolved configuration of every run is echoed to
stderr as one JSON line. Exit codes: 0 success, 2 usage, 3 data, 4 numeric.
"""

from __future__ import annotations

import argparse
import json
import sys
from contextlib import contextmanager
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import comparison as cmp
from . import experiments as exp
from .errors import DataError, DegeneratePanelError, DomainError, NumericError
from .forecast import (
    BinaryForecast,
    aggregate_magnitudes,
    align,
    align_observations,
    load_binary_forecast,
    load_observations,
    load_rate_forecast,
    simulate_observations,
    synthetic_truth,
    write_binary_forecast,
    write_observations,
)
from .numerics import UINT64_MAX
from .scores import RuleKind, ScoreRule, score_panel

EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

RULE_CHOICES = [k.value for k in RuleKind]


class UsageError(Exception):
    pass


def _seed(text: str) -> int:
    try:
        value = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid seed {text!r}") from None
    if not 0 <= value <= UINT64_MAX:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _grid(text: str) -> np.ndarray:
    """``low:high:count`` (log-spaced) or a comma-separated list."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise argparse.ArgumentTypeError("grid must look like low:high:count")
        try:
            low, high, count = float(parts[0]), float(parts[1]), int(parts[2])
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad grid {text!r}") from None
        return exp.default_omega_grid(count, low, high)
    return np.asarray(_floats(text))


# ------------------------------------------------------------------ parser


def _common(p: argparse.ArgumentParser, rules_many: bool = False) -> None:
    p.add_argument("--alpha", type=float, default=cmp.DEFAULT_ALPHA, help="1 - confidence level (default 0.05)")
    if rules_many:
        p.add_argument("--rule", action="append", choices=RULE_CHOICES, help="repeat to select several (default: all)")
    else:
        p.add_argument("--rule", choices=RULE_CHOICES, default="brier")
    p.add_argument("--reference-scale", type=float, default=5.0,
                   help="pairwise gambling reference p0 = scale * first forecast (default 5)")
    p.add_argument("--out", type=Path, help="write the table here instead of stdout")
    p.add_argument("--json", action="store_true", help="emit JSON instead of CSV")


def _truth_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("truth field")
    g.add_argument("--truth", type=Path, help="binary forecast CSV used as p*; default is synthetic")
    g.add_argument("--n-bins", type=int, default=8993)
    g.add_argument("--low", type=float, default=1e-6)
    g.add_argument("--high", type=float, default=2e-2)
    g.add_argument("--truth-seed", type=_seed, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="binscore", description="Score and compare binary-event forecasts.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("score", help="per-bin and average scores of one or more forecasts")
    p.add_argument("forecasts", nargs="+", type=Path)
    p.add_argument("--obs", type=Path, required=True)
    p.add_argument("--reference", type=Path, help="pairwise gambling reference forecast CSV")
    p.add_argument("--reference-prob", type=float, help="constant pairwise gambling reference")
    _common(p)

    p = sub.add_parser("compare", help="interval and decision for the average score difference")
    p.add_argument("forecasts", nargs="*", type=Path, help="two binary forecast CSVs")
    p.add_argument("--obs", type=Path)
    p.add_argument("--p1", type=float)
    p.add_argument("--p2", type=float)
    p.add_argument("--n", type=int)
    p.add_argument("--xs", type=int, help="number of active bins")
    p.add_argument("--method", choices=["exact", "gaussian"], default="exact")
    p.add_argument("--reference", type=Path)
    p.add_argument("--reference-prob", type=float)
    _common(p)

    for name, helptext in (("bounds", "no-preference region of x_S"),
                           ("prefprob", "probabilities of each decision")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--p1", type=float, default=1e-3)
        p.add_argument("--p2", type=float, help="default p1/3")
        p.add_argument("--p0", type=float, help="pairwise gambling reference; default reference-scale * p1")
        p.add_argument("--n", type=int, default=10_000)
        if name == "prefprob":
            p.add_argument("--p-star", type=_floats, help="comma list; default p1,p2")
        _common(p, rules_many=True)

    p = sub.add_parser("sweep", help="omega sweeps, power curves and Monte Carlo preference frequencies")
    p.add_argument("--kind", choices=["expected", "k3", "power", "power-omega", "mc"], default="expected")
    p.add_argument("--omega", type=_grid, help="low:high:count or comma list (default 1e-3:7:50)")
    p.add_argument("--p1", type=float, default=1e-3)
    p.add_argument("--p2", type=float)
    p.add_argument("--p0", type=float)
    p.add_argument("--n-list", type=_ints, default=[2000, 5000, 10000, 20000])
    p.add_argument("--p-star-grid", type=_grid, help="default 1e-6:2e-2:100")
    p.add_argument("--seed", type=_seed)
    p.add_argument("--sims", type=int, default=exp.DEFAULT_SIMS)
    p.add_argument("--workers", type=int, default=1)
    _truth_args(p)
    _common(p, rules_many=True)

    p = sub.add_parser("coverage", help="Monte Carlo coverage of the Gaussian interval")
    p.add_argument("--omega", type=_grid)
    p.add_argument("--seed", type=_seed, required=True)
    p.add_argument("--sims", type=int, default=exp.DEFAULT_SIMS)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--histograms", type=Path, help="also write replicate histograms here")
    p.add_argument("--bins", type=int, default=40)
    _truth_args(p)
    _common(p, rules_many=True)

    p = sub.add_parser("simulate", help="draw one observation field from a truth field")
    p.add_argument("--seed", type=_seed, required=True)
    p.add_argument("--replicate", type=int, default=0)
    p.add_argument("--write-truth", type=Path, help="also save the truth field")
    p.add_argument("--out", type=Path)
    _truth_args(p)

    p = sub.add_parser("aggregate", help="sum rate forecasts over magnitudes into bin probabilities")
    p.add_argument("rates", type=Path)
    p.add_argument("--out", type=Path)
    return parser


# ----------------------------------------------------------------- helpers


@contextmanager
def _sink(path: Optional[Path]):
    if path is None:
        yield sys.stdout
    else:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            yield fh


def _echo(args: argparse.Namespace) -> dict:
    def plain(v):
        if isinstance(v, Path):
            return str(v)
        if isinstance(v, np.ndarray):
            return v.tolist()
        if isinstance(v, list):
            return [plain(x) for x in v]
        return v

    config = {k: plain(v) for k, v in sorted(vars(args).items())}
    print(json.dumps({"config": config}), file=sys.stderr)
    return config


def _emit(args, rows: list[dict], config: dict, extra: Optional[dict] = None) -> None:
    with _sink(args.out) as fh:
        if getattr(args, "json", False):
            payload = {"config": config, "rows": rows}
            if extra:
                payload.update(extra)
            json.dump(payload, fh, indent=2, default=str)
            fh.write("\n")
        else:
            exp.write_rows(rows, fh)


def _rules(args) -> list[RuleKind]:
    return [RuleKind.parse(r) for r in (args.rule or RULE_CHOICES)]


def _check_reference_flags(args, kind: RuleKind) -> None:
    if args.reference is not None and args.reference_prob is not None:
        raise UsageError("--reference and --reference-prob are mutually exclusive")
    if kind is not RuleKind.PAIRWISE_GAMBLING and (args.reference is not None or args.reference_prob is not None):
        raise UsageError("a reference forecast only applies to --rule pg")


def _truth(args) -> BinaryForecast:
    if args.truth is not None:
        return load_binary_forecast(args.truth, name="truth")
    return synthetic_truth(args.n_bins, args.low, args.high, seed=args.truth_seed)


def _spec(args, rules=None) -> exp.SweepSpec:
    grid = args.omega if args.omega is not None else exp.default_omega_grid()
    return exp.SweepSpec(_truth(args), grid, rules or _rules(args), args.reference_scale)


# ---------------------------------------------------------------- commands


def cmd_score(args, config) -> None:
    kind = RuleKind.parse(args.rule)
    _check_reference_flags(args, kind)
    forecasts = [load_binary_forecast(f) for f in args.forecasts]
    if kind is RuleKind.FULL_GAMBLING and len(forecasts) < 2:
        raise UsageError("the full gambling score needs at least two forecasts")
    members = list(forecasts)
    if isinstance(args.reference, Path):
        members.append(load_binary_forecast(args.reference, name="reference"))
    ids, arrays = align(*members)
    obs = load_observations(args.obs)
    x = align_observations(ids, obs)
    panel = np.stack(arrays[: len(forecasts)])
    reference = None
    if kind is RuleKind.PAIRWISE_GAMBLING:
        if args.reference is not None:
            reference = arrays[-1]
        elif args.reference_prob is not None:
            reference = np.full(len(ids), args.reference_prob)
        else:
            reference = args.reference_scale * panel[0]
    values = score_panel(kind, panel, x, reference=reference)
    names = [f.name or f"forecast{i}" for i, f in enumerate(forecasts)]
    if len(set(names)) != len(names):
        names = [f"{n}_{i}" for i, n in enumerate(names)]
    rows = [{"bin_id": b, "observed": int(o), **{n: float(v) for n, v in zip(names, col)}}
            for b, o, col in zip(ids, x, values.T)]
    with np.errstate(invalid="ignore"):
        means = values.mean(axis=1)
    rows.append({"bin_id": "mean", "observed": int(x.sum()), **{n: float(m) for n, m in zip(names, means)}})
    diagnostics = {
        "scored_bins": len(ids),
        "masked_bins": {n: int((~f.mask).sum()) for n, f in zip(names, forecasts)},
        "skipped_bins": {n: f.n - len(ids) for n, f in zip(names, forecasts)},
    }
    print(json.dumps({"diagnostics": diagnostics}), file=sys.stderr)
    _emit(args, rows, config, {"diagnostics": diagnostics, "mean": dict(zip(names, map(float, means)))})


def _scalar_rule(kind: RuleKind, p0: Optional[float]) -> ScoreRule:
    if kind is RuleKind.PAIRWISE_GAMBLING:
        return ScoreRule.pairwise(p0)
    return ScoreRule(kind)


def cmd_compare(args, config) -> None:
    kind = RuleKind.parse(args.rule)
    _check_reference_flags(args, kind)
    scalar = any(v is not None for v in (args.p1, args.p2, args.n, args.xs))
    if scalar and args.forecasts:
        raise UsageError("give either forecast files or --p1/--p2/--n/--xs, not both")
    if scalar:
        if args.method != "exact":
            raise UsageError("--p1/--p2/--n/--xs describe a single-probability setting; use --method exact")
        if None in (args.p1, args.p2, args.n, args.xs):
            raise UsageError("--p1, --p2, --n and --xs are all required")
        if isinstance(args.reference, Path):
            raise UsageError("use --reference-prob with --p1/--p2")
        p0 = args.reference_prob if args.reference_prob is not None else args.reference_scale * args.p1
        d = cmp.delta_summary(_scalar_rule(kind, p0), args.p1, args.p2)
        report = cmp.delta_ci_exact(d, args.xs, args.n, args.alpha)
    else:
        if len(args.forecasts) != 2 or args.obs is None:
            raise UsageError("compare needs two forecast files and --obs (or --p1/--p2/--n/--xs)")
        f1, f2 = (load_binary_forecast(f) for f in args.forecasts)
        members = [f1, f2]
        if isinstance(args.reference, Path):
            members.append(load_binary_forecast(args.reference, name="reference"))
        ids, arrays = align(*members)
        x = align_observations(ids, load_observations(args.obs))
        p1, p2 = arrays[0], arrays[1]
        reference = None
        if kind is RuleKind.PAIRWISE_GAMBLING:
            if args.reference is not None:
                reference = arrays[2]
            elif args.reference_prob is not None:
                reference = np.full(len(ids), args.reference_prob)
            else:
                reference = args.reference_scale * p1
        if args.method == "exact":
            if np.ptp(p1) != 0.0 or np.ptp(p2) != 0.0 or (reference is not None and np.ptp(reference) != 0.0):
                raise DataError("the exact method needs forecasts that are constant over the bins; use --method gaussian")
            p0 = None if reference is None else float(reference[0])
            d = cmp.delta_summary(_scalar_rule(kind, p0), float(p1[0]), float(p2[0]))
            report = cmp.delta_ci_exact(d, int(x.sum()), len(ids), args.alpha)
        else:
            field = cmp.delta_field(kind, p1, p2, reference=reference)
            report = cmp.delta_ci_gaussian(field.realized(x), args.alpha)
            report = cmp.PreferenceReport(report.point_estimate, report.interval, report.decision,
                                          n=report.n, x_s=int(x.sum()), method=report.method)
    row = {"rule": kind.value, **report.to_dict()}
    if args.json:
        with _sink(args.out) as fh:
            json.dump({"config": config, "report": row}, fh, indent=2)
            fh.write("\n")
    else:
        _emit(args, [row], config)


def _mbsp_args(args):
    p2 = args.p2 if args.p2 is not None else args.p1 / 3.0
    p0 = args.p0 if args.p0 is not None else args.reference_scale * args.p1
    return args.p1, p2, p0


def cmd_bounds(args, config) -> None:
    p1, p2, p0 = _mbsp_args(args)
    rows = exp.mbsp_bounds_table(p1, p2, p0, args.n, args.alpha, _rules(args))
    _emit(args, rows, config)


def cmd_prefprob(args, config) -> None:
    p1, p2, p0 = _mbsp_args(args)
    p_stars = args.p_star or [p1, p2]
    rows = exp.mbsp_preference_table(p1, p2, p0, args.n, p_stars, args.alpha, _rules(args))
    _emit(args, rows, config)


def cmd_sweep(args, config) -> None:
    if args.kind in ("expected", "k3"):
        spec = _spec(args)
        rows = exp.expected_diff_sweep(spec) if args.kind == "expected" else exp.k3_diff_sweep(spec)
    elif args.kind == "mc":
        if args.seed is None:
            raise UsageError("--seed is required for --kind mc")
        rows = exp.mbmp_preference_mc(_spec(args), args.sims, args.alpha, args.seed, args.workers)
    else:
        p1, p2, p0 = _mbsp_args(args)
        if args.kind == "power":
            grid = args.p_star_grid if args.p_star_grid is not None else exp.default_omega_grid(100, 1e-6, 2e-2)
            rows = exp.mbsp_power_curves(p1, p2, p0, args.n_list, grid, _rules(args), args.alpha)
        else:
            grid = args.omega if args.omega is not None else exp.default_omega_grid(50, 0.1, 4.0)
            rows = exp.mbsp_power_vs_omega(p1, grid, p0, args.n_list, _rules(args), args.alpha)
    _emit(args, rows, config)


def cmd_coverage(args, config) -> None:
    study = exp.coverage_study(_spec(args), args.sims, args.alpha, args.seed, args.workers)
    _emit(args, study.rows(), config)
    if args.histograms is not None:
        with open(args.histograms, "w", newline="", encoding="utf-8") as fh:
            exp.write_rows(study.histogram_rows(args.bins), fh)


def cmd_simulate(args, config) -> None:
    truth = _truth(args)
    obs = simulate_observations(truth, args.seed, args.replicate)
    if args.write_truth is not None:
        write_binary_forecast(truth, args.write_truth)
    if args.out is None:
        exp.write_rows([{"bin_id": b, "observed": int(v)} for b, v in zip(obs.bin_ids, obs.values)], sys.stdout)
    else:
        write_observations(obs, args.out)


def cmd_aggregate(args, config) -> None:
    f = aggregate_magnitudes(load_rate_forecast(args.rates))
    if args.out is None:
        exp.write_rows(
            [{"bin_id": b, "prob": float(p), "mask": int(m)} for b, p, m in zip(f.bin_ids, f.probs, f.mask)],
            sys.stdout,
        )
    else:
        write_binary_forecast(f, args.out)


COMMANDS = {
    "score": cmd_score,
    "compare": cmd_compare,
    "bounds": cmd_bounds,
    "prefprob": cmd_prefprob,
    "sweep": cmd_sweep,
    "coverage": cmd_coverage,
    "simulate": cmd_simulate,
    "aggregate": cmd_aggregate,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    config = _echo(args)
    try:
        COMMANDS[args.command](args, config)
    except UsageError as exc:
        print(f"binscore {args.command}: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"binscore {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericError, DegeneratePanelError) as exc:
        print(f"binscore {args.command}: numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except DomainError as exc:
        print(f"binscore {args.command}: invalid argument: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return 0


if __name__ == "__main__":
    sys.exit(main())
