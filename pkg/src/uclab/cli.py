"""Command-line front end: ``uclab <subcommand> [--config PATH] [--set key=value ...]``.

Each run resolves a configuration (built-in defaults, then the JSON file,
then ``--set`` overrides, then ``--seed``/``--threads``), validates it
against a JSON schema, runs the experiment and writes its artifacts to
``<out>/<subcommand>-<timestamp>/``. Exit status: 0 when every verification
passes, 2 when one fails, 1 on any error.
"""

from __future__ import annotations

import argparse
import copy
import datetime
import json
import os
import sys
from pathlib import Path

import jsonschema

from . import __version__, bounds, plotting, reporting
from .errors import UclabError
from .experiments import (ExperimentConfig, estimate_uniform_convergence_ncc,
                          estimate_uniform_convergence_ncsc, fit_rate, run_decomposition,
                          subgaussian_tail_check, verify_mapping_ordering, verify_prox_reg_lemma,
                          verify_rate, verify_stability)
from .selftest import run_selftest

EXIT_OK, EXIT_ERROR, EXIT_FAIL = 0, 1, 2

NCSC_FAMILY = {"family": "sin_bilinear_ncsc", "d": 2, "d_prime": 2, "mu": 1.0,
               "radius_x": 1.0, "radius_y": 2.0, "seed": 7}
NCC_FAMILY = {"family": "sin_bilinear_ncc", "d": 1, "d_prime": 1, "radius_x": 2.0,
              "radius_y": 1.0, "seed": 3}
SCSC_FAMILY = {"family": "quadratic_scsc", "d": 2, "rho": 1.0, "mu": 1.0, "radius_x": 1.0,
               "radius_y": 3.0, "seed": 5}

DEFAULTS = {
    "uc-ncsc": {"family": NCSC_FAMILY, "net_radius": 0.125,
                "n_schedule": [64, 256, 1024, 4096], "replications": 50,
                "rate_band": [-0.65, -0.35], "max_slope_std_error": 0.08},
    "uc-ncc": {"family": NCC_FAMILY, "net_radius": 0.05, "n_schedule": [64, 256, 1024, 4096],
               "replications": 30, "rate_band": [None, -0.2], "monotone_sigmas": 2.0},
    "stability": {"family": SCSC_FAMILY, "n_schedule": [10, 100, 1000], "trials": 1000},
    "lemma-prox": {"family": NCC_FAMILY, "points": 20, "point_spread": 0.25,
                   "nu_grid": [1e-1, 1e-2, 1e-3], "grid_resolution": 1e-3},
    "decompose": {"family": NCSC_FAMILY, "net_radius": 0.125, "n_schedule": [256, 1024, 4096],
                  "replications": 50, "solver_steps": 300},
    "tails": {"family": NCSC_FAMILY, "n_schedule": [64, 256], "draws": 1000},
    "selftest": {},
    "calc": {"regime": "ncsc", "d": 1, "eps": 1.0, "L": 1.0, "mu": 1.0, "G": 1.0},
}

SUBCOMMANDS = tuple(DEFAULTS)

# --- schemas ----------------------------------------------------------------

_POS = {"type": "number", "exclusiveMinimum": 0}
_POS_OR_NULL = {"type": ["number", "null"], "exclusiveMinimum": 0}
_COUNT = {"type": "integer", "minimum": 1}
_SOLVER = {"type": "object", "additionalProperties": False,
           "properties": {"tolerance": _POS, "max_iterations": _COUNT,
                          "step_rule": {"enum": ["fixed", "backtracking"]}}}

FAMILY_SCHEMA = {
    "type": "object", "additionalProperties": False,
    "required": ["family", "d", "radius_x", "radius_y"],
    "properties": {
        "family": {"enum": ["sin_bilinear_ncsc", "sin_bilinear_ncc", "quadratic_scsc"]},
        "d": _COUNT, "d_prime": _COUNT, "mu": {"type": "number", "minimum": 0},
        "radius_x": _POS, "radius_y": _POS, "rho": _POS,
        "seed": {"type": "integer", "minimum": 0},
        "a_range": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
        "b_radius": {"type": "number", "minimum": 0},
        "w": {"type": "array", "items": {"type": "number"}},
        "B": {"type": "array", "items": {"type": "array", "items": {"type": "number"}}},
    },
}

EXPERIMENT_SCHEMA = {
    "type": "object", "additionalProperties": False, "required": ["family"],
    "properties": {
        "family": FAMILY_SCHEMA,
        "net_radius": _POS_OR_NULL,
        "net_subsample": {"type": ["integer", "null"], "minimum": 1},
        "n_schedule": {"type": "array", "items": _COUNT, "minItems": 1},
        "replications": {"type": "integer", "minimum": 2},
        "base_seed": {"type": "integer", "minimum": 0},
        "inner": _SOLVER, "prox": _SOLVER,
        "lam": _POS_OR_NULL,
        "nu_grid": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
        "slack": {"type": "number", "minimum": 1},
        "threads": _COUNT,
        "oracle": {"enum": ["closed_form", "iterative"]},
        "target_eps": _POS_OR_NULL,
        "trials": _COUNT, "points": _COUNT, "draws": _COUNT, "solver_steps": _COUNT,
        "grid_resolution": _POS_OR_NULL,
        "point_spread": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "x_point": {"type": ["array", "null"], "items": {"type": "number"}},
        "rate_band": {"type": ["array", "null"], "items": {"type": ["number", "null"]},
                      "minItems": 2, "maxItems": 2},
        "max_slope_std_error": _POS_OR_NULL,
        "monotone_sigmas": {"type": ["number", "null"], "minimum": 0},
    },
}

CALC_SCHEMA = {
    "type": "object", "additionalProperties": False,
    "required": ["regime", "d", "eps", "L", "G"],
    "properties": {
        "regime": {"enum": ["ncsc", "ncc"]}, "d": _COUNT, "eps": _POS, "L": _POS, "G": _POS,
        "mu": _POS, "D_X": _POS, "D_Y": _POS, "width": _POS,
        "template": {"enum": sorted(bounds.TEMPLATES)},
    },
}

SELFTEST_SCHEMA = {"type": "object", "additionalProperties": False, "properties": {}}


def schema_for(subcommand: str) -> dict:
    if subcommand == "calc":
        return CALC_SCHEMA
    if subcommand == "selftest":
        return SELFTEST_SCHEMA
    return EXPERIMENT_SCHEMA


# --- configuration resolution ------------------------------------------------


class CliError(Exception):
    """A user-facing error; the message is printed as-is."""


def _deep_merge(base: dict, extra: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k != "family":
            out[k] = _deep_merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_override(config: dict, assignment: str) -> None:
    """Apply one ``dotted.key=value`` override; ``value`` is parsed as JSON when possible."""
    if "=" not in assignment:
        raise CliError(f"--set expects key=value, got {assignment!r}")
    key, text = assignment.split("=", 1)
    parts = key.strip().split(".")
    if not all(parts):
        raise CliError(f"--set has an empty key segment in {key!r}")
    node = config
    for p in parts[:-1]:
        if not isinstance(node.get(p), dict):
            node[p] = {}
        node = node[p]
    node[parts[-1]] = _parse_value(text)


def _line_of(text: str, key: str):
    needle = json.dumps(key)
    for lineno, line in enumerate(text.splitlines(), 1):
        if needle in line:
            return lineno
    return None


def load_config_file(path: str) -> tuple:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise CliError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CliError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from None
    if not isinstance(data, dict):
        raise CliError(f"{path}:1: the configuration must be a JSON object")
    return data, text


def validate(config: dict, subcommand: str, source: str = None, text: str = None) -> None:
    """Schema check with one diagnostic line per violation (field path, line if known)."""
    validator = jsonschema.Draft7Validator(schema_for(subcommand))
    problems = []
    for err in sorted(validator.iter_errors(config), key=lambda e: list(map(str, e.path))):
        field = ".".join(str(p) for p in err.path) or "<root>"
        where = ""
        if text is not None:
            names = [p for p in err.path if isinstance(p, str)]
            if err.validator == "additionalProperties":
                extra = sorted(set(err.instance) - set(err.schema.get("properties", {})))
                names = names + extra[:1]
            line = _line_of(text, names[-1]) if names else None
            where = f"{source}:{line}: " if line else f"{source}: "
        problems.append(f"{where}field '{field}': {err.message}")
    if problems:
        raise CliError("invalid configuration\n" + "\n".join(problems))


def resolve_config(subcommand: str, config_path=None, overrides=(), seed=None,
                   threads=None) -> dict:
    config = copy.deepcopy(DEFAULTS[subcommand])
    text = source = None
    if config_path:
        data, text = load_config_file(config_path)
        source = config_path
        config = _deep_merge(config, data)
    for assignment in overrides:
        apply_override(config, assignment)
    if subcommand not in ("calc", "selftest"):
        if seed is not None:
            config["base_seed"] = seed
        if threads is not None:
            config["threads"] = threads
    validate(config, subcommand, source, text)
    return config


def _threads_from_env():
    raw = os.environ.get("UCLAB_THREADS")
    if raw is None or raw == "":
        return None
    try:
        value = int(raw)
    except ValueError:
        raise CliError(f"UCLAB_THREADS must be a positive integer, got {raw!r}") from None
    if value < 1:
        raise CliError(f"UCLAB_THREADS must be a positive integer, got {raw!r}")
    return value


# --- runners ------------------------------------------------------------------


def _public_config(config: dict) -> dict:
    """The configuration as recorded in artifacts; thread count never affects results."""
    return {k: v for k, v in config.items() if k != "threads"}


def _emit(out: Path, name: str, payload: dict, config: dict) -> None:
    payload = dict(payload)
    payload["provenance"] = reporting.provenance(_public_config(config))
    reporting.write_json(out / name, payload)


def _experiment(config: dict) -> ExperimentConfig:
    return ExperimentConfig.from_dict(config)


def run_uc(subcommand, config, out: Path) -> list:
    cfg = _experiment(config)
    ncsc = subcommand == "uc-ncsc"
    curve = (estimate_uniform_convergence_ncsc if ncsc else estimate_uniform_convergence_ncc)(cfg)
    fit = fit_rate(curve)
    reporting.write_curve_csv(out / "curve.csv", curve)
    _emit(out, "ratefit.json", {"fit": fit.to_dict(), "curve": reporting.curve_payload(curve)},
          config)
    verdicts = [verify_rate(curve, fit, cfg.rate_band, cfg.max_slope_std_error,
                            cfg.monotone_sigmas)]
    _emit(out, "verify_rate.json", verdicts[0].to_dict(), config)
    if ncsc:
        mapping = verify_mapping_ordering(cfg)
        _emit(out, "verify_mapping.json", mapping.to_dict(), config)
        verdicts.append(mapping)
    plotting.plot_curve(curve, fit, out / "curve.png")
    rows = [{"n": r.n, "mean": r.mean, "std_error": r.std_error} for r in curve.rows]
    summary = (f"Net points: {curve.net_count} (radius {curve.net_radius:g}); "
               f"correction {curve.correction:.6g}. Fitted slope {fit.slope:.4f} "
               f"(std error {fit.slope_std_error:.4f}).")
    sections = [("Curve", rows), ("Fit", summary)]
    (out / "report.md").write_text(reporting.markdown_report(
        subcommand, _public_config(config), sections, verdicts))
    return verdicts


def run_stability(config, out: Path) -> list:
    cfg = _experiment(config)
    inst = cfg.instance()
    x = cfg.probe_point(inst)
    reports = [verify_stability(inst, x, n, cfg.trials, cfg.base_seed, cfg.slack, cfg.oracle,
                                cfg.inner) for n in cfg.n_schedule]
    _emit(out, "verify_stability.json",
          {"x": x.tolist(), "checks": [r.to_dict() for r in reports]}, config)
    plotting.plot_ratio_bars([f"n={r.details['n']}" for r in reports],
                             [r.worst_ratio for r in reports], cfg.slack, out / "stability.png")
    rows = [{"n": r.details["n"], "bound": r.details["bound"],
             "max_deviation": r.details["max_deviation"], "worst_ratio": r.worst_ratio}
            for r in reports]
    (out / "report.md").write_text(reporting.markdown_report(
        "stability", _public_config(config), [("Per sample size", rows)], reports))
    return reports


def run_lemma_prox(config, out: Path) -> list:
    cfg = _experiment(config)
    inst = cfg.instance()
    lam = cfg.lam if cfg.lam is not None else 1.0 / (2.0 * inst.constants.L)
    grid = cfg.grid_resolution if inst.d <= 3 else None
    report = verify_prox_reg_lemma(inst, cfg.probe_points(inst), cfg.nu_grid, lam, cfg.prox,
                                   cfg.slack, grid)
    _emit(out, "verify_prox_reg.json", report.to_dict(), config)
    per_nu = report.details["per_nu"]
    plotting.plot_ratio_bars([f"nu={r['nu']:g}" for r in per_nu],
                             [r["worst_ratio"] for r in per_nu], cfg.slack, out / "prox_reg.png")
    (out / "report.md").write_text(reporting.markdown_report(
        "lemma-prox", _public_config(config), [("Per regularization level", per_nu)], [report]))
    return [report]


def run_decompose(config, out: Path) -> list:
    cfg = _experiment(config)
    result = run_decomposition(cfg)
    report = result["report"]
    rows = result["rows"]
    reporting.write_rows_csv(out / "decomposition.csv", rows, list(rows[0]))
    _emit(out, "verify_decomposition.json", report.to_dict(), config)
    plotting.plot_decomposition(rows, out / "decomposition.png")
    (out / "report.md").write_text(reporting.markdown_report(
        "decompose", _public_config(config), [("Means per sample size", rows)], [report]))
    return [report]


def run_tails(config, out: Path) -> list:
    cfg = _experiment(config)
    inst = cfg.instance()
    x = cfg.probe_point(inst)
    reports = [subgaussian_tail_check(inst, x, n, cfg.draws, cfg.base_seed, cfg.oracle,
                                      cfg.inner) for n in cfg.n_schedule]
    _emit(out, "verify_tails.json", {"x": x.tolist(), "checks": [r.to_dict() for r in reports]},
          config)
    for r in reports:
        plotting.plot_tails(r.details["levels"], out / f"tails_n{r.details['n']}.png")
    rows = [dict(n=r.details["n"], **lv) for r in reports for lv in r.details["levels"]]
    (out / "report.md").write_text(reporting.markdown_report(
        "tails", _public_config(config), [("Tail frequencies", rows)], reports))
    return reports


def run_selftest_cmd(config, out: Path) -> bool:
    results = run_selftest()
    _emit(out, "selftest.json", {"checks": results}, config)
    rows = [{"check": r["name"], "verdict": "PASS" if r["passed"] else "FAIL"} for r in results]
    (out / "report.md").write_text(reporting.markdown_report(
        "selftest", config, [("Checks", rows)], []))
    for r in results:
        print(f"{'PASS' if r['passed'] else 'FAIL'}  {r['name']}")
    return all(r["passed"] for r in results)


def calc(config: dict) -> dict:
    """Sample-size calculator payload for the ``calc`` subcommand."""
    config = {k: float(v) if k in ("eps", "L", "G", "mu", "D_X", "D_Y", "width") else v
              for k, v in config.items()}
    d, eps, L, G = config["d"], config["eps"], config["L"], config["G"]
    if config["regime"] == "ncsc":
        if "mu" not in config:
            raise CliError("calc with regime 'ncsc' needs mu")
        mu = config["mu"]
        n_star = bounds.sample_size_ncsc(d, eps, L, mu, G)
        out = {"n_star": n_star, "nu": None,
               "constants_used": {"d": d, "eps": eps, "L": L, "mu": mu, "G": G,
                                  "kappa": L / mu},
               "formula_citation": "n = ceil(2 d eps^-2 (2 L G / mu + G)^2 "
                                   "ln(4 L (1 + kappa) / eps)), kappa = L / mu"}
        template = config.get("template", "sreda_finite_sum")
        out["gradient_complexity"] = {
            "template": template,
            "value": bounds.induced_gradient_complexity(n_star, eps / 2, template, 4.0, L / mu),
            "rule": "template evaluated at n = 4 n_star, accuracy eps / 2"}
        return out
    missing = [k for k in ("D_X", "D_Y") if k not in config]
    if missing:
        raise CliError(f"calc with regime 'ncc' needs {', '.join(missing)}")
    plan = bounds.ncc_sample_plan(d, eps, L, G, config["D_X"], config["D_Y"],
                                  config.get("width"))
    template = config.get("template", "catalyst_svrg_ncc")
    return {
        "n_star": plan.n, "nu": plan.nu,
        "constants_used": {"d": d, "eps": eps, "L": L, "G": G, "D_X": config["D_X"],
                           "D_Y": config["D_Y"], "lambda": plan.lam, "upsilon": plan.upsilon,
                           "Q": plan.Q, "L_hat_x": plan.L_hat_x, "L_hat_y": plan.L_hat_y},
        "formula_citation": (
            "lambda = 1/(2L), upsilon = eps/(32L), nu = eps^2/(64 L D_Y); n is the least "
            "integer with 4L sqrt(log(Q)/(2n) (Lx^2/L^2 + Ly^2/(nu L))) <= eps/8 and "
            "2L sqrt(4 sqrt(2)/(L n) (Lx^2/L + Ly^2/nu)) <= eps/8, Lx = G + 4 L sqrt(D_X), "
            "Ly = G + nu sqrt(D_Y)"),
        "budget": plan.budget,
        "gradient_complexity": {
            "template": template,
            "value": bounds.induced_gradient_complexity(plan.n, eps / 2, template, 16.0),
            "rule": "template evaluated at n = 16 n_star, accuracy eps / 2"},
    }


# --- entry point --------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # usage errors share exit status 1 with every other error; 2 means a failed check
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="uclab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"uclab {__version__}")
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--config", metavar="PATH", help="JSON configuration file")
    parser.add_argument("--out", metavar="DIR", default="runs",
                        help="parent directory for artifacts (default: runs)")
    parser.add_argument("--seed", type=int, metavar="U64", help="overrides base_seed")
    parser.add_argument("--threads", type=int, metavar="N",
                        help="worker threads (fallback: UCLAB_THREADS)")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        dest="overrides", help="override a field; dotted keys, JSON values")
    return parser


def _run_dir(parent: Path, subcommand: str) -> Path:
    parent.mkdir(parents=True, exist_ok=True)
    while True:
        stamp = datetime.datetime.now().strftime("%Y%m%d-%H%M%S-%f")
        path = parent / f"{subcommand}-{stamp}"
        try:
            path.mkdir()
            return path
        except FileExistsError:
            continue


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.seed is not None and not 0 <= args.seed < 2**64:
            raise CliError("--seed must be an unsigned 64-bit integer")
        if args.threads is not None and args.threads < 1:
            raise CliError("--threads must be at least 1")
        threads = args.threads if args.threads is not None else _threads_from_env()
        config = resolve_config(args.subcommand, args.config, args.overrides, args.seed, threads)
        out = _run_dir(Path(args.out), args.subcommand)
        reporting.write_json(out / "config.json", _public_config(config))
        if args.subcommand == "calc":
            payload = calc(config)
            _emit(out, "calc.json", payload, config)
            sys.stdout.write(reporting.dumps(payload))
            return EXIT_OK
        if args.subcommand == "selftest":
            return EXIT_OK if run_selftest_cmd(config, out) else EXIT_FAIL
        runners = {"uc-ncsc": lambda c, o: run_uc("uc-ncsc", c, o),
                   "uc-ncc": lambda c, o: run_uc("uc-ncc", c, o),
                   "stability": run_stability, "lemma-prox": run_lemma_prox,
                   "decompose": run_decompose, "tails": run_tails}
        verdicts = runners[args.subcommand](config, out)
        for v in verdicts:
            print(f"{'PASS' if v.passed else 'FAIL'}  {v.name}  worst_ratio={v.worst_ratio:.6g}"
                  f"  slack={v.slack:g}")
        print(f"artifacts: {out}")
        return EXIT_OK if all(v.passed for v in verdicts) else EXIT_FAIL
    except (CliError, UclabError, OSError) as exc:
        # capacity and solver errors carry their own complete message
        print(f"uclab: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


def main() -> None:
    sys.exit(run())
