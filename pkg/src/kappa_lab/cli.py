"""Command-line front end.

Usage examples::

    kappa-lab kappa --alpha 1.1 --q 0.01
    kappa-lab bias-table --alpha 1.1 --n 1000 --n 10000 --runs 10000 --seed 7 --format csv
    kappa-lab superadd --n 500 --n 500 --runs 10000
    kappa-lab scaling-fit --reference
    kappa-lab corr --config experiment.conf --runs 2000

Options may also come from a ``--config`` file of ``key = value`` lines
(``#`` starts a comment, list values are comma separated). Flags given on
the command line override the file. Results go to stdout or ``--out``;
diagnostics go to stderr. Usage and precondition errors exit with status 2.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Callable, Sequence

from . import __version__
from .distributions import (
    LognormalParams,
    MixtureSpec,
    ParetoParams,
    kappa_pareto,
    sample,
    theoretical_threshold,
)
from .estimators import min_alpha_kappa, stochastic_alpha_kappa
from .montecarlo import (
    bias_table,
    fit_bias_scaling,
    mc_kappa_sum_dependence,
    mc_mixture_bias,
    mc_monotone_convergence,
    mc_superadditivity,
    reference_bias_points,
)
from .report import (
    ExperimentReport,
    bias_table_report,
    convergence_report,
    correlation_report,
    default_filename,
    mixture_bias_report,
    scaling_fit_report,
    superadd_report,
    to_csv,
    to_json,
)

THREADS_ENV = "KAPPA_LAB_THREADS"
SUBCOMMANDS = (
    "kappa", "sample", "bias-table", "superadd", "converge", "mixture", "corr", "scaling-fit", "stochalpha",
)


class UsageError(Exception):
    pass


# value converters shared by flags and the config file -------------------


def _probability(s: str) -> float:
    try:
        v = float(s)
    except ValueError:
        raise ValueError(f"q must be a number in (0, 1), got {s!r}") from None
    if not 0.0 < v < 1.0:
        raise ValueError(f"q must lie in the open interval (0, 1), got {s}")
    return v


def _positive_float(name: str) -> Callable[[str], float]:
    def conv(s: str) -> float:
        try:
            v = float(s)
        except ValueError:
            raise ValueError(f"{name} must be a number, got {s!r}") from None
        if not v > 0.0:
            raise ValueError(f"{name} must be positive, got {s}")
        return v

    return conv


def _float(name: str) -> Callable[[str], float]:
    def conv(s: str) -> float:
        try:
            return float(s)
        except ValueError:
            raise ValueError(f"{name} must be a number, got {s!r}") from None

    return conv


def _count(name: str, minimum: int = 1) -> Callable[[str], int]:
    def conv(s: str) -> int:
        try:
            v = int(float(s)) if ("e" in s.lower() and float(s).is_integer()) else int(s)
        except ValueError:
            raise ValueError(f"{name} must be an integer, got {s!r}") from None
        if v < minimum:
            raise ValueError(f"{name} must be >= {minimum}, got {v}")
        return v

    return conv


def _seed(s: str) -> int:
    try:
        v = int(s, 0)
    except ValueError:
        raise ValueError(f"seed must be an integer, got {s!r}") from None
    if not 0 <= v < 2**64:
        raise ValueError(f"seed must lie in [0, 2**64), got {v}")
    return v


def _choice(name: str, options: Sequence[str]) -> Callable[[str], str]:
    def conv(s: str) -> str:
        if s not in options:
            raise ValueError(f"{name} must be one of {', '.join(options)}, got {s!r}")
        return s

    return conv


def _point(s: str) -> tuple[float, float]:
    try:
        n, b = s.split(":")
        return float(n), float(b)
    except ValueError:
        raise ValueError(f"point must look like N:BIAS, got {s!r}") from None


# (converter, is_list) per option; keys match CliConfig field names
OPTIONS: dict[str, tuple[Callable[[str], Any], bool]] = {
    "seed": (_seed, False),
    "runs": (_count("runs", 2), False),
    "n": (_count("n"), True),
    "q": (_probability, False),
    "alpha": (_float("alpha"), True),
    "weight": (_float("weight"), True),
    "x_min": (_positive_float("x-min"), False),
    "h": (_positive_float("h"), False),
    "law": (_choice("law", ("pareto", "lognormal")), False),
    "mu": (_float("mu"), False),
    "sigma": (_positive_float("sigma"), False),
    "point": (_point, True),
    "reference": (lambda s: {"true": True, "false": False}[s.lower()], False),
    "out": (str, False),
    "format": (_choice("format", ("csv", "json", "table")), False),
    "threads": (_count("threads", 0), False),
}


@dataclass
class CliConfig:
    """Resolved options; ``None`` means "not given" until defaults apply."""

    subcommand: str | None = None
    seed: int | None = None
    runs: int | None = None
    n: list[int] | None = None
    q: float | None = None
    alpha: list[float] | None = None
    weight: list[float] | None = None
    x_min: float | None = None
    h: float | None = None
    law: str | None = None
    mu: float | None = None
    sigma: float | None = None
    point: list[tuple[float, float]] | None = None
    reference: bool | None = None
    out: str | None = None
    format: str | None = None
    threads: int | None = None
    config: str | None = field(default=None, repr=False)

    def merged_over(self, base: "CliConfig") -> "CliConfig":
        vals = {f.name: getattr(self, f.name) for f in fields(self)}
        for k, v in vals.items():
            if v is None:
                vals[k] = getattr(base, k)
        return CliConfig(**vals)


def parse_config_file(path: str | Path) -> CliConfig:
    """Read ``key = value`` lines into a partial :class:`CliConfig`.

    Keys are option names with ``-`` or ``_``. Raises :class:`UsageError`
    naming the line for unknown keys or malformed values.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc.strerror}") from None
    cfg = CliConfig()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (p.strip() for p in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in OPTIONS:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        conv, is_list = OPTIONS[key]
        try:
            if is_list:
                parsed = [conv(v.strip()) for v in value.split(",") if v.strip()]
            else:
                parsed = conv(value)
        except (ValueError, KeyError) as exc:
            msg = exc.args[0] if isinstance(exc, ValueError) else f"bad value {value!r}"
            raise UsageError(f"{path}:{lineno}: {msg}") from None
        setattr(cfg, key, parsed)
    return cfg


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _argparse_type(conv):
    def wrapped(s):
        try:
            return conv(s)
        except ValueError as exc:
            raise argparse.ArgumentTypeError(exc.args[0]) from None

    wrapped.__name__ = getattr(conv, "__name__", "value")
    return wrapped


HELP = {
    "seed": "master seed (unsigned 64-bit)",
    "runs": "Monte Carlo runs per sample size",
    "n": "sample size; repeat for a grid",
    "q": "top fraction, in (0, 1)",
    "alpha": "tail exponent; repeat for mixtures",
    "weight": "mixture weight, one per --alpha",
    "x_min": "Pareto scale",
    "h": "fixed threshold for converge",
    "law": "pareto or lognormal",
    "mu": "lognormal location",
    "sigma": "lognormal scale",
    "point": "scaling-fit data point N:BIAS; repeatable",
    "out": "output file or directory",
    "format": "table, csv or json",
    "threads": f"worker threads, 0 = all cores (env {THREADS_ENV})",
}


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    g = common.add_argument_group("common options")
    for name, (conv, is_list) in OPTIONS.items():
        flag = "--" + name.replace("_", "-")
        if name == "reference":
            g.add_argument(flag, action="store_const", const=True, default=None,
                           help="scaling-fit: use the built-in reference bias table")
            continue
        g.add_argument(flag, dest=name, type=_argparse_type(conv),
                       action="append" if is_list else "store", default=None,
                       help=HELP.get(name))
    g.add_argument("--config", default=None, help="key = value file; flags override it")

    parser = _Parser(prog="kappa-lab", description="Top-share estimation under heavy tails.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="subcommand", metavar="COMMAND")
    sub.required = True
    helps = {
        "kappa": "population top-q share of a Pareto law",
        "sample": "draw a sample",
        "bias-table": "Monte Carlo mean/median/std of the naive estimator over an n grid",
        "superadd": "full-sample estimate vs weighted average of part estimates",
        "converge": "fixed-threshold estimator mean against sample size",
        "mixture": "naive estimator on a Pareto mixture next to population values",
        "corr": "dependence between the naive estimate and the sample total",
        "scaling-fit": "log-log fit of bias against sample size",
        "stochalpha": "share averaged over uncertain exponents",
    }
    for name in SUBCOMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


DEFAULTS = CliConfig(seed=0, q=0.01, x_min=1.0, format="table", law="pareto", mu=0.0, sigma=1.0, reference=False)
COMMAND_DEFAULTS: dict[str, dict[str, Any]] = {
    "kappa": {"alpha": [1.1]},
    "sample": {"alpha": [1.1], "n": [10]},
    "bias-table": {"alpha": [1.1], "n": [1000, 10000], "runs": 10000},
    "superadd": {"alpha": [1.1], "n": [500, 500], "runs": 10000},
    "converge": {"alpha": [1.1], "n": [1000, 10000, 100000], "runs": 1000},
    "mixture": {"alpha": [1.2, 1.8], "n": [1000], "runs": 10000},
    "corr": {"alpha": [1.1], "n": [10000], "runs": 10000},
    "scaling-fit": {"alpha": [1.1], "n": [1000, 10000, 100000], "runs": 2000},
    "stochalpha": {"alpha": [1.2, 1.8]},
}


def resolve_config(argv: Sequence[str]) -> CliConfig:
    ns = build_parser().parse_args(list(argv))
    given = CliConfig(**{f.name: getattr(ns, f.name, None) for f in fields(CliConfig)})
    if given.config:
        given = given.merged_over(parse_config_file(given.config))
    cmd_defaults = CliConfig(**COMMAND_DEFAULTS[given.subcommand])
    cfg = given.merged_over(cmd_defaults).merged_over(DEFAULTS)
    if cfg.threads is None:
        env = os.environ.get(THREADS_ENV)
        try:
            cfg.threads = OPTIONS["threads"][0](env) if env else 0
        except ValueError as exc:
            raise UsageError(f"{THREADS_ENV}: {exc.args[0]}") from None
    return cfg


# rendering ----------------------------------------------------------------


def _fmt(v: Any) -> str:
    if isinstance(v, float):
        return f"{v:.6g}"
    if isinstance(v, (list, tuple)):
        return ",".join(_fmt(x) for x in v)
    return "" if v is None else str(v)


def render_table(columns: Sequence[str], rows: Sequence[dict]) -> str:
    cells = [[_fmt(r.get(c)) for c in columns] for r in rows]
    widths = [max(len(c), *(len(row[i]) for row in cells)) for i, c in enumerate(columns)]
    lines = ["  ".join(c.rjust(w) for c, w in zip(columns, widths))]
    lines.append("  ".join("-" * w for w in widths))
    lines += ["  ".join(v.rjust(w) for v, w in zip(row, widths)) for row in cells]
    return "\n".join(lines) + "\n"


def _emit(text: str, cfg: CliConfig, default_name: str | None = None) -> None:
    if cfg.out is None:
        sys.stdout.write(text)
        return
    path = Path(cfg.out)
    if path.is_dir() and default_name:
        path = path / default_name
    path.write_text(text, encoding="utf-8")
    print(f"wrote {path}", file=sys.stderr)


def _emit_report(report: ExperimentReport, cfg: CliConfig) -> None:
    if cfg.format == "csv":
        text = to_csv(report)
    elif cfg.format == "json":
        text = to_json(report)
    else:
        text = render_table(report.columns, report.rows)
    ext = "txt" if cfg.format == "table" else cfg.format
    _emit(text, cfg, default_filename(report, ext))


def _emit_values(values: dict[str, Any], cfg: CliConfig, headline: str) -> None:
    if cfg.format == "json":
        _emit(json.dumps(values, sort_keys=True) + "\n", cfg)
    elif cfg.format == "csv":
        cols = list(values)
        _emit(",".join(cols) + "\n" + ",".join(_fmt(values[c]) for c in cols) + "\n", cfg)
    else:
        _emit(headline, cfg)


def _one(values: list, name: str):
    if len(values) != 1:
        raise UsageError(f"this command takes a single --{name}, got {len(values)}")
    return values[0]


def _pareto(cfg: CliConfig) -> ParetoParams:
    return ParetoParams(_one(cfg.alpha, "alpha"), cfg.x_min)


def _weights(cfg: CliConfig) -> list[float]:
    if cfg.weight is None:
        return [1.0 / len(cfg.alpha)] * len(cfg.alpha)
    if len(cfg.weight) != len(cfg.alpha):
        raise UsageError(f"{len(cfg.weight)} --weight values for {len(cfg.alpha)} --alpha values")
    return cfg.weight


def _echo(cfg: CliConfig, **extra) -> dict[str, Any]:
    echo = {"command": cfg.subcommand, "master_seed": cfg.seed, "q": cfg.q, "runs": cfg.runs, "n": cfg.n}
    echo.update(extra)
    return echo


# subcommands --------------------------------------------------------------


def cmd_kappa(cfg: CliConfig) -> None:
    alpha = _one(cfg.alpha, "alpha")
    value = kappa_pareto(alpha, cfg.q)
    _emit_values({"alpha": alpha, "q": cfg.q, "kappa": value}, cfg, f"{value:.6f}\n")


def cmd_sample(cfg: CliConfig) -> None:
    spec = LognormalParams(cfg.mu, cfg.sigma) if cfg.law == "lognormal" else _pareto(cfg)
    s = sample(spec, _one(cfg.n, "n"), cfg.seed)
    if cfg.format == "json":
        doc = {"seed": s.seed, "spec": spec.to_dict(), "values": s.values.tolist()}
        _emit(json.dumps(doc, sort_keys=True) + "\n", cfg)
    else:
        header = "value\n" if cfg.format == "csv" else ""
        _emit(header + "".join(f"{v!r}\n" for v in s.values.tolist()), cfg)


def cmd_bias_table(cfg: CliConfig) -> None:
    spec = _pareto(cfg)
    rows = bias_table(spec, cfg.q, cfg.n, cfg.runs, cfg.seed, cfg.threads)
    report = bias_table_report(rows, _echo(cfg, spec=spec.to_dict()), kappa_pareto(spec.alpha, cfg.q))
    _emit_report(report, cfg)


def cmd_superadd(cfg: CliConfig) -> None:
    if len(cfg.alpha) not in (1, len(cfg.n)):
        raise UsageError(f"give one --alpha or one per part ({len(cfg.n)} parts)")
    alphas = cfg.alpha * len(cfg.n) if len(cfg.alpha) == 1 else cfg.alpha
    specs = [ParetoParams(a, cfg.x_min) for a in alphas]
    rec = mc_superadditivity(specs, cfg.n, cfg.q, cfg.runs, cfg.seed, cfg.threads)
    _emit_report(superadd_report(rec, _echo(cfg, specs=[s.to_dict() for s in specs])), cfg)


def cmd_converge(cfg: CliConfig) -> None:
    spec = _pareto(cfg)
    h = cfg.h if cfg.h is not None else theoretical_threshold(spec, cfg.q)
    rec = mc_monotone_convergence(spec, h, cfg.n, cfg.runs, cfg.seed, cfg.threads)
    _emit_report(convergence_report(rec, _echo(cfg, spec=spec.to_dict(), h=h)), cfg)


def cmd_mixture(cfg: CliConfig) -> None:
    mix = MixtureSpec.unit_mean(_weights(cfg), cfg.alpha)
    n = _one(cfg.n, "n")
    rec = mc_mixture_bias(mix, cfg.q, n, cfg.runs, cfg.seed, cfg.threads)
    _emit_report(mixture_bias_report(rec, _echo(cfg, spec=mix.to_dict())), cfg)


def cmd_corr(cfg: CliConfig) -> None:
    spec = _pareto(cfg)
    rec = mc_kappa_sum_dependence(spec, cfg.q, _one(cfg.n, "n"), cfg.runs, cfg.seed, cfg.threads)
    _emit_report(correlation_report(rec, _echo(cfg, spec=spec.to_dict())), cfg)


def cmd_scaling_fit(cfg: CliConfig) -> None:
    if cfg.point:
        points, echo = cfg.point, {"command": cfg.subcommand, "source": "points", "points": cfg.point,
                                   "master_seed": cfg.seed}
    elif cfg.reference:
        points = reference_bias_points()
        echo = {"command": cfg.subcommand, "source": "reference", "master_seed": cfg.seed}
    else:
        spec = _pareto(cfg)
        kappa = kappa_pareto(spec.alpha, cfg.q)
        rows = bias_table(spec, cfg.q, cfg.n, cfg.runs, cfg.seed, cfg.threads)
        points = [(r.n, kappa - r.mean) for r in rows]
        echo = _echo(cfg, source="simulation", spec=spec.to_dict())
    fit = fit_bias_scaling(points)
    _emit_report(scaling_fit_report(fit, echo), cfg)


def cmd_stochalpha(cfg: CliConfig) -> None:
    weights = _weights(cfg)
    stoch = stochastic_alpha_kappa(cfg.alpha, weights, cfg.q).value
    low = min_alpha_kappa(cfg.alpha, cfg.q).value
    mean_alpha = sum(w * a for w, a in zip(weights, cfg.alpha))
    at_mean = kappa_pareto(mean_alpha, cfg.q)
    values = {"q": cfg.q, "mean_alpha": mean_alpha, "kappa_at_mean_alpha": at_mean,
              "stochastic_alpha_kappa": stoch, "min_alpha_kappa": low}
    table = render_table(list(values), [values])
    _emit_values(values, cfg, table)


COMMANDS: dict[str, Callable[[CliConfig], None]] = {
    "kappa": cmd_kappa,
    "sample": cmd_sample,
    "bias-table": cmd_bias_table,
    "superadd": cmd_superadd,
    "converge": cmd_converge,
    "mixture": cmd_mixture,
    "corr": cmd_corr,
    "scaling-fit": cmd_scaling_fit,
    "stochalpha": cmd_stochalpha,
}


def run_cli(argv: Sequence[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = resolve_config(argv)
        COMMANDS[cfg.subcommand](cfg)
    except (UsageError, ValueError) as exc:
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        print(f"kappa-lab: error: {msg}", file=sys.stderr)
        return 2
    return 0


main = run_cli
