"""Batch front-end: scenario ingestion, experiment orchestration, CSV reports.

Config files are strict JSON (unknown keys rejected, precise field-path
diagnostics).  Modes:

* ``simulate``       -> ensemble.csv (threshold, count, N); with a
                        ``truncation`` key also exact.csv from the DP oracle.
* ``predict``        -> prediction.csv (provenance, base, coefficient) and
                        prediction_values.csv (threshold, predicted).
* ``verify``         -> the above plus report.csv and a PASS/FAIL verdict line.
* ``check-appendix`` -> one random-sum report per proposition id.

Exit codes: 0 success/PASS, 2 verification FAIL, 1 usage or config error.
CSV output uses '.' decimals and LF line endings, and is byte-identical for a
fixed config and master seed regardless of worker count.
"""

import argparse
import json
import os
import sys
from dataclasses import dataclass, field

from . import asymptotics, process, tailstats
from .errors import ConfigError, GW2Error
from .laws import LawSpec
from .process import BASES, ScenarioSpec

MODES = ("simulate", "predict", "verify", "check-appendix")
MAX_HORIZON = 20
DEFAULT_THRESHOLDS = tuple(10.0 * 2 ** j for j in range(15))
DEFAULT_REPLICATES = 1_000_000


@dataclass
class WindowSpec:
    min_exceedances: int = 50
    x_floor: float = 0.0
    tolerance: float = 0.2


@dataclass
class RandomSumSpec:
    count_law: LawSpec
    summand_law: LawSpec
    replicates: int
    thresholds: tuple
    propositions: tuple
    master_seed: int = 0
    window: WindowSpec = field(default_factory=WindowSpec)


@dataclass
class ExperimentConfig:
    mode: str
    output_dir: str
    scenario: ScenarioSpec = None
    profile: asymptotics.HeavyProfile = None
    rveps_variant: str = "consistent"
    truncation: int = None
    window: WindowSpec = field(default_factory=WindowSpec)
    random_sum: RandomSumSpec = None


def _require(d, key, path, typ=None):
    if key not in d:
        raise ConfigError(path, f"missing required field '{key}'")
    v = d[key]
    if typ is not None and not isinstance(v, typ):
        raise ConfigError(f"{path}.{key}", f"expected {typ.__name__}, got {type(v).__name__}")
    return v


def _reject_unknown(d, allowed, path):
    unknown = set(d) - set(allowed)
    if unknown:
        raise ConfigError(path, f"unknown field(s): {', '.join(sorted(unknown))}")


def _parse_law(d, path):
    if not isinstance(d, dict):
        raise ConfigError(path, "law descriptor must be an object")
    _reject_unknown(d, ("kind", "params"), path)
    try:
        return LawSpec.from_dict({"kind": _require(d, "kind", path, str),
                                  "params": _require(d, "params", path, dict)})
    except GW2Error as exc:
        raise ConfigError(path, str(exc)) from exc


def _parse_number(v, path, minimum=None):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(path, f"expected a number, got {type(v).__name__}")
    if minimum is not None and v < minimum:
        raise ConfigError(path, f"must be >= {minimum}")
    return v


def _parse_scenario(d, path="scenario"):
    if not isinstance(d, dict):
        raise ConfigError(path, "expected an object")
    _reject_unknown(d, ("laws", "horizon", "master_seed", "replicates", "thresholds"), path)
    laws_d = _require(d, "laws", path, dict)
    _reject_unknown(laws_d, BASES, f"{path}.laws")
    laws = {}
    for base in BASES:
        laws[base] = _parse_law(_require(laws_d, base, f"{path}.laws"),
                                f"{path}.laws.{base}")
    horizon = int(_parse_number(_require(d, "horizon", path), f"{path}.horizon", 1))
    master_seed = int(_parse_number(d.get("master_seed", 0), f"{path}.master_seed", 0))
    replicates = int(_parse_number(d.get("replicates", DEFAULT_REPLICATES),
                                   f"{path}.replicates", 1))
    thresholds = d.get("thresholds", list(DEFAULT_THRESHOLDS))
    if not isinstance(thresholds, list) or not thresholds:
        raise ConfigError(f"{path}.thresholds", "expected a non-empty list of numbers")
    thresholds = [_parse_number(t, f"{path}.thresholds[{i}]") for i, t in enumerate(thresholds)]
    try:
        return ScenarioSpec(horizon=horizon, master_seed=master_seed,
                            replicates=replicates, thresholds=tuple(thresholds), **laws)
    except GW2Error as exc:
        raise ConfigError(path, str(exc)) from exc


def _parse_profile(d, path="profile"):
    if not isinstance(d, dict):
        raise ConfigError(path, "expected an object")
    _reject_unknown(d, ("heavy", "index", "light_moment_order"), path)
    heavy = _require(d, "heavy", path, list)
    for i, name in enumerate(heavy):
        if name not in BASES:
            raise ConfigError(f"{path}.heavy[{i}]",
                              f"unknown component {name!r}; expected one of {', '.join(BASES)}")
    index = _parse_number(_require(d, "index", path), f"{path}.index")
    order = _parse_number(_require(d, "light_moment_order", path),
                          f"{path}.light_moment_order")
    try:
        return asymptotics.HeavyProfile(heavy=heavy, index=index, light_moment_order=order)
    except GW2Error as exc:
        raise ConfigError(path, str(exc)) from exc


def _parse_window(d, path="window"):
    if not isinstance(d, dict):
        raise ConfigError(path, "expected an object")
    _reject_unknown(d, ("min_exceedances", "x_floor", "tolerance"), path)
    return WindowSpec(
        min_exceedances=int(_parse_number(d.get("min_exceedances", 50),
                                          f"{path}.min_exceedances", 1)),
        x_floor=float(_parse_number(d.get("x_floor", 0.0), f"{path}.x_floor", 0.0)),
        tolerance=float(_parse_number(d.get("tolerance", 0.2), f"{path}.tolerance", 0.0)),
    )


def _parse_random_sum(d, path="random_sum"):
    if not isinstance(d, dict):
        raise ConfigError(path, "expected an object")
    _reject_unknown(d, ("count", "summand", "replicates", "thresholds",
                        "propositions", "master_seed", "window"), path)
    props = d.get("propositions", list(asymptotics.RANDOM_SUM_PROPOSITIONS))
    if not isinstance(props, list) or not props:
        raise ConfigError(f"{path}.propositions", "expected a non-empty list")
    for i, p in enumerate(props):
        if p not in asymptotics.RANDOM_SUM_PROPOSITIONS:
            raise ConfigError(f"{path}.propositions[{i}]",
                              f"unknown proposition {p!r}")
    thresholds = _require(d, "thresholds", path, list)
    thresholds = [_parse_number(t, f"{path}.thresholds[{i}]") for i, t in enumerate(thresholds)]
    return RandomSumSpec(
        count_law=_parse_law(_require(d, "count", path), f"{path}.count"),
        summand_law=_parse_law(_require(d, "summand", path), f"{path}.summand"),
        replicates=int(_parse_number(_require(d, "replicates", path),
                                     f"{path}.replicates", 1)),
        thresholds=tuple(thresholds),
        propositions=tuple(props),
        master_seed=int(_parse_number(d.get("master_seed", 0), f"{path}.master_seed", 0)),
        window=_parse_window(d.get("window", {}), f"{path}.window"),
    )


def parse_config(text):
    """Parse and validate a config document; raises ConfigError with paths."""
    try:
        raw = json.loads(text) if text.strip() else {}
    except json.JSONDecodeError as exc:
        raise ConfigError("<config>", f"invalid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("<config>", "top level must be an object")
    _reject_unknown(raw, ("scenario", "profile", "mode", "output_dir",
                          "rveps_variant", "truncation", "window", "random_sum"),
                    "<config>")
    if "mode" not in raw and "scenario" not in raw and "random_sum" not in raw:
        raise ConfigError("<config>", "missing scenario")
    mode = _require(raw, "mode", "<config>", str)
    if mode not in MODES:
        raise ConfigError("mode", f"must be one of {', '.join(MODES)}")
    output_dir = _require(raw, "output_dir", "<config>", str)
    variant = raw.get("rveps_variant", "consistent")
    if variant not in ("consistent", "verbatim"):
        raise ConfigError("rveps_variant", "must be 'consistent' or 'verbatim'")

    cfg = ExperimentConfig(mode=mode, output_dir=output_dir, rveps_variant=variant,
                           window=_parse_window(raw.get("window", {})))
    if "truncation" in raw:
        cfg.truncation = int(_parse_number(raw["truncation"], "truncation", 1))

    if mode in ("simulate", "predict", "verify"):
        if "scenario" not in raw:
            raise ConfigError("<config>", "missing scenario")
        cfg.scenario = _parse_scenario(raw["scenario"])
        if mode in ("predict", "verify"):
            if "profile" not in raw:
                raise ConfigError("<config>", f"mode {mode} requires a profile")
            cfg.profile = _parse_profile(raw["profile"])
            if cfg.scenario.horizon > MAX_HORIZON:
                raise ConfigError("scenario.horizon",
                                  f"predictions support horizon <= {MAX_HORIZON}")
    else:  # check-appendix
        if "random_sum" not in raw:
            raise ConfigError("<config>", "mode check-appendix requires random_sum")
        cfg.random_sum = _parse_random_sum(raw["random_sum"])
    return cfg


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_csv(path, header, rows):
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _write_ensemble(cfg, summary):
    _write_csv(os.path.join(cfg.output_dir, "ensemble.csv"),
               ("threshold", "count", "N"),
               [(x, c, summary.replicates)
                for x, c in zip(summary.thresholds, summary.counts)])


def _write_prediction(cfg, prediction, suffix=""):
    merged = prediction.merged()
    _write_csv(os.path.join(cfg.output_dir, f"prediction{suffix}.csv"),
               ("provenance", "base", "coefficient"),
               [(merged.provenance, b, c) for b, c in merged.terms])
    law_map = cfg.scenario.base_laws()
    _write_csv(os.path.join(cfg.output_dir, f"prediction_values{suffix}.csv"),
               ("threshold", "predicted"),
               [(x, merged.evaluate(law_map, x)) for x in cfg.scenario.thresholds])
    return merged


def _report_rows(diag):
    return [(r.threshold, r.estimate, r.ci_low, r.ci_high, r.predicted,
             r.ratio, int(r.in_window)) for r in diag.rows]


_REPORT_HEADER = ("x", "empirical", "ci_lo", "ci_hi", "predicted", "ratio", "in_window")


def _verdict_line(label, diag, tolerance):
    if diag.insufficient_data:
        return f"{label}FAIL insufficient-data"
    status = "PASS" if diag.passes(tolerance) else "FAIL"
    lo, hi = diag.window
    return (f"{label}{status} window=[{_fmt(float(lo))},{_fmt(float(hi))}] "
            f"max|ratio-1|={diag.max_abs_deviation():.6g}")


def run(cfg, workers=None):
    """Execute one experiment; returns the process exit status."""
    os.makedirs(cfg.output_dir, exist_ok=True)

    if cfg.mode == "simulate":
        summary = process.simulate_ensemble(cfg.scenario, workers=workers)
        _write_ensemble(cfg, summary)
        if cfg.truncation is not None:
            exact = process.exact_distribution(cfg.scenario, cfg.truncation)
            marginal = exact.marginal()
            _write_csv(os.path.join(cfg.output_dir, "exact.csv"),
                       ("value", "pmf"),
                       [(k, float(p)) for k, p in enumerate(marginal) if p > 0.0])
            print(f"exact oracle mass_deficit={exact.mass_deficit!r}"
                  + (" (above tolerance)" if exact.deficit_warning else ""))
        return 0

    if cfg.mode == "predict":
        prediction = asymptotics.predict_tail(
            cfg.scenario, cfg.profile, rveps_variant=cfg.rveps_variant)
        _write_prediction(cfg, prediction)
        return 0

    if cfg.mode == "verify":
        prediction = asymptotics.predict_tail(
            cfg.scenario, cfg.profile, rveps_variant=cfg.rveps_variant)
        merged = _write_prediction(cfg, prediction)
        summary = process.simulate_ensemble(cfg.scenario, workers=workers)
        _write_ensemble(cfg, summary)
        estimates = tailstats.empirical_survival(summary)
        diag = tailstats.ratio_diagnostic(
            estimates, merged, cfg.scenario.base_laws(),
            min_exceedances=cfg.window.min_exceedances, x_floor=cfg.window.x_floor)
        _write_csv(os.path.join(cfg.output_dir, "report.csv"),
                   _REPORT_HEADER, _report_rows(diag))
        print(_verdict_line("", diag, cfg.window.tolerance))
        return 0 if diag.passes(cfg.window.tolerance) else 2

    # check-appendix
    rs = cfg.random_sum
    status = 0
    for prop in rs.propositions:
        diag, _ = tailstats.check_random_sum(
            rs.count_law, rs.summand_law, prop, rs.replicates, rs.thresholds,
            master_seed=rs.master_seed, min_exceedances=rs.window.min_exceedances,
            x_floor=rs.window.x_floor, workers=workers)
        _write_csv(os.path.join(cfg.output_dir, f"report_{prop}.csv"),
                   _REPORT_HEADER, _report_rows(diag))
        print(_verdict_line(f"{prop}: ", diag, rs.window.tolerance))
        if not diag.passes(rs.window.tolerance):
            status = 2
    return status


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="gw2",
        description="Simulation and tail-asymptotic verification for second-order "
                    "branching processes with immigration.")
    parser.add_argument("--config", required=True, help="path to the JSON experiment config")
    parser.add_argument("--mode", choices=MODES, help="override the config's mode")
    parser.add_argument("--seed", type=int, help="override the scenario master seed")
    parser.add_argument("--workers", type=int,
                        default=None, help="simulation threads (performance only; "
                        "never affects results; falls back to $GW2_WORKERS)")
    parser.add_argument("--rveps-variant", choices=("consistent", "verbatim"),
                        help="override the immigrant-clan exponent convention")
    args = parser.parse_args(argv)

    workers = args.workers
    if workers is None and os.environ.get("GW2_WORKERS"):
        try:
            workers = int(os.environ["GW2_WORKERS"])
        except ValueError:
            print("error: GW2_WORKERS must be an integer", file=sys.stderr)
            return 1

    try:
        with open(args.config) as fh:
            text = fh.read()
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 1

    try:
        cfg = parse_config(text)
        if args.mode and args.mode != cfg.mode:
            raw = json.loads(text)
            raw["mode"] = args.mode
            cfg = parse_config(json.dumps(raw))
        if args.rveps_variant:
            cfg.rveps_variant = args.rveps_variant
        if args.seed is not None and cfg.scenario is not None:
            cfg.scenario = ScenarioSpec(
                **{name: law for name, law in cfg.scenario.base_laws().items()},
                horizon=cfg.scenario.horizon, master_seed=args.seed,
                replicates=cfg.scenario.replicates, thresholds=cfg.scenario.thresholds)
        return run(cfg, workers=workers)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except GW2Error as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
