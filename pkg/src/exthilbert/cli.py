"""Command-line experiment runner.

Every run writes one JSON document {verb, version, config, status, result}
(or a CSV table plus a sidecar JSON holding the same document without the
table). Exit codes: 0 success, 1 a checked inequality or identity failed,
2 bad input, 3 a precondition certificate failed.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import warnings
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .analysis import PreconditionError, criterion_integral, orlicz_integral, rate_factorization
from .orfun import (
    DslError,
    GridSpec,
    HypothesisViolation,
    LogStar,
    interpolation_membership,
    make_interpolation_parameter,
    matuszewska_indices,
    parse,
    parse_psi,
)
from .report import to_json
from .spectral import (
    DEFAULT_SEED,
    CoeffVector,
    DiagonalMap,
    SpectralOperator,
    interpolation_norm_identity,
    model_from_json,
    operator_norm_interpolation,
    self_tuned_inequalities,
    spectral_kappa,
    tau_inequality_check,
)
from .torus import (
    ae_diagnostics,
    rate_experiment,
    synthesize_field,
    unconditional_probe,
)

EXIT_OK, EXIT_VIOLATION, EXIT_CONFIG, EXIT_PRECONDITION = 0, 1, 2, 3
OUT_DIR_ENV = "EXTHILBERT_OUT_DIR"
log = logging.getLogger("exthilbert")

COMMON = {"seed": DEFAULT_SEED, "grid_tmax": 1e6, "tolerance": None, "format": "json", "out": None}

# verb -> {option: default}; None marks a required option
VERBS = {
    "criterion": {"phi": None, "q": 0, "n": 1, "integral": "criterion"},
    "factorize": {"phi": None, "q": 0, "n": 1, "epsilon": 0.25},
    "indices": {"phi": None, "s0": None, "s1": None},
    "interp-identity": {"phi0": None, "phi1": None, "psi": None, "psi_from": None, "N": 1000,
                        "lam_max": 1e4, "samples": 100, "model": None, "lambda": None},
    "inequalities": {"phi0": None, "phi1": None, "psi": None, "psi_from": None, "N": 200,
                     "lam_max": 1e4, "samples": 100, "taus": 8, "model": None, "lambda": None},
    "opnorm": {"phi0": None, "phi1": None, "eta0": None, "eta1": None, "psi": None, "psi_from": None,
               "N": 200, "lam_max": 1e4, "samples": 100, "model": None, "lambda": None},
    "rate": {"phi": None, "q": 0, "n": 1, "M": 256, "epsilon": 0.25, "delta": 0.5, "ks": None},
    "unconditional": {"phi": None, "q": 0, "n": 1, "M": 256, "delta": 2.0, "perms": 20,
                      "eps": "1e-1,1e-2,1e-3", "inner": None},
    "ae": {"phi": "logstar", "n": 1, "M": 256, "samples": 20, "terms": 10 ** 6},
}
OPTIONAL = {"psi", "psi_from", "s0", "s1", "model", "lambda", "ks", "inner", "out", "tolerance"}
DEFAULT_TOLERANCE = {"interp-identity": 1e-12}
SLACK_TOLERANCE = 1e-10


class ConfigError(ValueError):
    pass


class Violation(Exception):
    """Raised with a result when a checked property fails."""

    def __init__(self, result):
        super().__init__("invariant violation")
        self.result = result


def _int(text):
    return int(str(text), 0)


TYPES = {"seed": _int, "q": int, "n": int, "N": int, "M": int, "samples": int, "taus": int,
         "perms": int, "terms": int, "inner": int, "grid_tmax": float, "tolerance": float,
         "epsilon": float, "delta": float, "lam_max": float, "s0": float, "s1": float}
CHOICES = {"format": ("json", "csv"), "integral": ("criterion", "orlicz")}


def _flag(name):
    return "--" + name.replace("_", "-")


def build_parser():
    parser = argparse.ArgumentParser(prog="exthilbert", description="Hilbert-scale interpolation and spectral-expansion experiments.")
    parser.add_argument("--version", action="version", version=f"exthilbert {__version__}")
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb, opts in VERBS.items():
        p = sub.add_parser(verb)
        p.add_argument("--config", default=None, help="JSON or YAML file; its values win over flags")
        for name in {**COMMON, **opts}:
            # defaults are applied after merging with the config file
            kwargs = {"default": None, "dest": name}
            if name in TYPES:
                kwargs["type"] = TYPES[name]
            if name in CHOICES:
                kwargs["choices"] = CHOICES[name]
            p.add_argument(_flag(name), **kwargs)
    return parser


def _read_config(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    try:
        if str(path).endswith(".json"):
            doc = json.loads(text)
        else:
            doc = yaml.safe_load(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"line {mark.line + 1}, column {mark.column + 1}" if mark else "?"
        raise ConfigError(f"{path}: {where}: {getattr(exc, 'problem', exc)}") from exc
    if doc is None:
        return {}
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return {str(k).replace("-", "_"): v for k, v in doc.items()}


def resolve_config(args):
    """Merge defaults, explicit flags and the config file (file wins, with a warning)."""
    verb = args.verb
    allowed = {**COMMON, **VERBS[verb]}
    explicit = {k: v for k, v in vars(args).items() if k in allowed and v is not None}
    from_file = _read_config(args.config) if args.config else {}
    file_verb = from_file.pop("verb", verb)
    if file_verb != verb:
        raise ConfigError(f"config file is for verb {file_verb!r}, not {verb!r}")
    cfg = dict(allowed)
    cfg.update(explicit)
    for key, value in from_file.items():
        if key not in allowed:
            raise ConfigError(f"config field {key!r} is not an option of {verb}")
        if key in explicit and explicit[key] != value:
            log.warning("config file overrides %s=%r with %r", _flag(key), explicit[key], value)
        try:
            cfg[key] = TYPES[key](value) if key in TYPES and value is not None else value
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"config field {key!r}: {exc}") from exc
        if key in CHOICES and cfg[key] not in CHOICES[key]:
            raise ConfigError(f"config field {key!r} must be one of {CHOICES[key]}")
    if cfg["tolerance"] is None:
        cfg["tolerance"] = DEFAULT_TOLERANCE.get(verb, SLACK_TOLERANCE)
    missing = [k for k, v in cfg.items() if v is None and k not in OPTIONAL]
    if missing:
        raise ConfigError(f"missing required option(s) for {verb}: {', '.join(_flag(k) for k in missing)}")
    if cfg["format"] == "csv" and verb != "rate":
        raise ConfigError("--format csv is only available for rate")
    return cfg


def _fn(cfg, key):
    try:
        return parse(str(cfg[key]))
    except DslError as exc:
        raise ConfigError(f"{_flag(key)}: {exc}") from exc


def _psi(cfg):
    if cfg.get("psi") and cfg.get("psi_from"):
        raise ConfigError("give only one of --psi and --psi-from")
    if cfg.get("psi"):
        try:
            return parse_psi(str(cfg["psi"]))
        except DslError as exc:
            raise ConfigError(f"--psi: {exc}") from exc
    if cfg.get("psi_from"):
        parts = str(cfg["psi_from"]).rsplit(",", 2)
        if len(parts) != 3:
            raise ConfigError("--psi-from must be 'function,s0,s1'")
        try:
            f = parse(parts[0])
            s0, s1 = float(parts[1]), float(parts[2])
        except (DslError, ValueError) as exc:
            raise ConfigError(f"--psi-from: {exc}") from exc
        try:
            return make_interpolation_parameter(f, s0, s1)
        except ValueError as exc:
            if isinstance(exc, HypothesisViolation):
                raise
            raise ConfigError(f"--psi-from: {exc}") from exc
    raise ConfigError("one of --psi or --psi-from is required")


def _grid(cfg):
    if not cfg["grid_tmax"] > 1:
        raise ConfigError("--grid-tmax must exceed 1")
    return GridSpec(t_max=float(cfg["grid_tmax"]))


def _spectrum(cfg, rng):
    if cfg.get("model") and cfg.get("lambda") is not None:
        raise ConfigError("give only one of --model and --lambda")
    try:
        if cfg.get("model"):
            try:
                doc = json.loads(Path(cfg["model"]).read_text())
            except OSError as exc:
                raise ConfigError(f"cannot read model {cfg['model']}: {exc.strerror}") from exc
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{cfg['model']}: line {exc.lineno}: {exc.msg}") from exc
            return model_from_json(doc)[0]
        if cfg.get("lambda") is not None:
            text = cfg["lambda"]
            values = text if isinstance(text, list) else [x for x in str(text).split(",") if x.strip()]
            return SpectralOperator([float(x) for x in values])
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"spectral model: {exc}") from exc
    if cfg["N"] < 1 or not cfg["lam_max"] >= 1:
        raise ConfigError("--N must be positive and --lam-max >= 1")
    return SpectralOperator.log_uniform(cfg["N"], cfg["lam_max"], seed=int(rng.integers(2 ** 32)))


def random_vector(rng, size):
    """Complex Gaussian coefficients with a random exponential decay profile."""
    decay = np.exp(-rng.uniform(0.0, 10.0) * np.arange(size) / size)
    return CoeffVector((rng.standard_normal(size) + 1j * rng.standard_normal(size)) * decay)


def run_criterion(cfg, rng):
    phi = _fn(cfg, "phi")
    try:
        if cfg["integral"] == "orlicz":
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always")
                verdict = orlicz_integral(phi)
            notes = [str(w.message) for w in caught]
        else:
            verdict = criterion_integral(phi, cfg["q"], cfg["n"])
            notes = []
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return {"verdict": verdict.as_dict(), "warnings": notes}


def run_factorize(cfg, rng):
    phi = _fn(cfg, "phi")
    try:
        fac = rate_factorization(phi, cfg["q"], cfg["n"], cfg["epsilon"])
    except (ValueError, OverflowError) as exc:
        if isinstance(exc, PreconditionError):
            raise
        raise ConfigError(str(exc)) from exc
    result = {
        "epsilon": fac.epsilon,
        "checks": fac.checks,
        "log_t": list(fac.phi1.log_grid),
        "log_phi1": list(fac.phi1.log_values),
        "log_phi2": list(fac.phi2.log_values),
        "verified": fac.verified,
    }
    if not fac.verified:
        raise Violation(result)
    return result


def run_indices(cfg, rng):
    phi = _fn(cfg, "phi")
    est = matuszewska_indices(phi, _grid(cfg))
    result = {"sigma0": est.sigma0, "sigma1": est.sigma1, "residual": est.residual,
              "inconclusive": est.inconclusive, "drift": est.drift, "grid": est.grid_spec.as_dict()}
    if (cfg.get("s0") is None) != (cfg.get("s1") is None):
        raise ConfigError("--s0 and --s1 go together")
    if cfg.get("s0") is not None:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            result["membership"] = interpolation_membership(phi, cfg["s0"], cfg["s1"], grid=_grid(cfg))
        result["warnings"] = [str(w.message) for w in caught]
    return result


def _pair(cfg):
    return _fn(cfg, "phi0"), _fn(cfg, "phi1"), _psi(cfg)


def run_interp_identity(cfg, rng):
    phi0, phi1, psi = _pair(cfg)
    A = _spectrum(cfg, rng)
    gaps = []
    for _ in range(cfg["samples"]):
        u = random_vector(rng, len(A))
        lhs, rhs = interpolation_norm_identity(phi0, phi1, psi, A, u)
        gaps.append(abs(lhs - rhs) / rhs if rhs > 0 else abs(lhs))
    result = {"size": len(A), "samples": cfg["samples"], "max_relative_gap": max(gaps),
              "tolerance": cfg["tolerance"], "passed": max(gaps) <= cfg["tolerance"]}
    if not result["passed"]:
        raise Violation(result)
    return result


def run_inequalities(cfg, rng):
    phi0, phi1, psi = _pair(cfg)
    A = _spectrum(cfg, rng)
    kappa = spectral_kappa(phi0, phi1, A)
    taus = kappa * np.geomspace(1.0, 1e6, cfg["taus"])
    worst = {}
    concave_count = 0
    for _ in range(cfg["samples"]):
        u = random_vector(rng, len(A))
        records = list(tau_inequality_check(phi0, phi1, psi, A, u, taus))
        tuned = self_tuned_inequalities(phi0, phi1, psi, A, u)
        concave_count += tuned.concave
        for r in records + tuned.records:
            worst[r.inequality] = min(worst.get(r.inequality, np.inf), r.slack)
    passed = all(v >= -cfg["tolerance"] for v in worst.values())
    result = {"size": len(A), "samples": cfg["samples"], "kappa": kappa,
              "min_slack": dict(sorted(worst.items())), "concave_samples": concave_count,
              "tolerance": cfg["tolerance"], "passed": passed}
    if not passed:
        raise Violation(result)
    return result


def run_opnorm(cfg, rng):
    phi0, phi1, psi = _pair(cfg)
    eta0, eta1 = _fn(cfg, "eta0"), _fn(cfg, "eta1")
    A = _spectrum(cfg, rng)
    lam = A.eigenvalues
    worst = np.inf
    for _ in range(cfg["samples"]):
        scale = phi0(lam) / eta0(lam) * np.exp(rng.uniform(-3.0, 3.0, len(A)))
        T = DiagonalMap((rng.standard_normal(len(A)) + 1j * rng.standard_normal(len(A))) * scale)
        rec = operator_norm_interpolation(T, phi0, phi1, eta0, eta1, psi, A)
        worst = min(worst, rec.slack.slack)
    passed = worst >= -cfg["tolerance"]
    result = {"size": len(A), "samples": cfg["samples"], "min_slack": worst,
              "tolerance": cfg["tolerance"], "passed": bool(passed)}
    if not passed:
        raise Violation(result)
    return result


def _ks(cfg, total):
    if cfg.get("ks"):
        try:
            return [int(x) for x in str(cfg["ks"]).split(",")]
        except ValueError as exc:
            raise ConfigError(f"--ks: {exc}") from exc
    ks = [16]
    while ks[-1] * 2 < total:
        ks.append(ks[-1] * 2)
    return ks


def run_rate(cfg, rng):
    phi = _fn(cfg, "phi")
    try:
        fac = rate_factorization(phi, cfg["q"], cfg["n"], cfg["epsilon"])
        f = synthesize_field(cfg["n"], cfg["M"], "radial_decay", phi=phi, delta=cfg["delta"])
    except ValueError as exc:
        if isinstance(exc, PreconditionError):
            raise
        raise ConfigError(str(exc)) from exc
    if not fac.verified:
        failed = [k for k, v in fac.checks.items() if not v["passed"]]
        raise PreconditionError(f"factorization checks failed: {', '.join(failed)}")
    try:
        table = rate_experiment(fac.phi1, fac.phi2, f, cfg["q"], _ks(cfg, (2 * cfg["M"] + 1) ** cfg["n"]))
    except ValueError as exc:
        if isinstance(exc, PreconditionError):
            raise
        raise ConfigError(str(exc)) from exc
    return {"rows": table.rows, "c_star": table.c_star, "norm": table.norm,
            "grid_per_axis": table.grid_per_axis, "_table": table}


def run_unconditional(cfg, rng):
    phi = _fn(cfg, "phi")
    try:
        eps = [float(x) for x in str(cfg["eps"]).split(",")]
        f = synthesize_field(cfg["n"], cfg["M"], "radial_decay", phi=phi, delta=cfg["delta"])
        report = unconditional_probe(f, phi, cfg["q"], cfg["perms"], int(rng.integers(2 ** 32)), eps,
                                     inner=cfg.get("inner"))
    except ValueError as exc:
        if isinstance(exc, PreconditionError):
            raise
        raise ConfigError(str(exc)) from exc
    report["orders"] = [{**r, "k_needed": {str(k): v for k, v in r["k_needed"].items()}}
                        for r in report["orders"]]
    if not report["all_reached"]:
        raise Violation(report)
    return report


def run_ae(cfg, rng):
    phi = _fn(cfg, "phi")
    samples = []
    try:
        for _ in range(cfg["samples"]):
            f = synthesize_field(cfg["n"], cfg["M"], "random_in_ball", phi=LogStar(),
                                 seed=int(rng.integers(2 ** 32)), radius=1.0)
            samples.append(ae_diagnostics(f, phi, weight_terms=cfg["terms"]))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    fitted = [s["fitted_c"] for s in samples]
    return {"fitted_c_max": max(fitted), "fitted_c": fitted,
            "orlicz_weight_partial_sums": samples[0]["orlicz_weight_partial_sums"],
            "orlicz_weight_plateau": samples[0]["orlicz_weight_plateau"],
            "samples": [{k: v for k, v in s.items() if not k.startswith("orlicz_weight")} for s in samples]}


RUNNERS = {
    "criterion": run_criterion, "factorize": run_factorize, "indices": run_indices,
    "interp-identity": run_interp_identity, "inequalities": run_inequalities, "opnorm": run_opnorm,
    "rate": run_rate, "unconditional": run_unconditional, "ae": run_ae,
}


def run_experiment(verb, cfg):
    """Run one verb; return (exit code, document, rate table or None)."""
    rng = np.random.default_rng(cfg["seed"])
    doc = {"verb": verb, "version": __version__, "config": dict(cfg)}
    table = None
    try:
        result = RUNNERS[verb](cfg, rng)
        table = result.pop("_table", None)
        status, code = "ok", EXIT_OK
    except Violation as exc:
        result, status, code = exc.result, "invariant-violation", EXIT_VIOLATION
    except (PreconditionError, HypothesisViolation) as exc:
        result, status, code = {"error": str(exc)}, "precondition-failure", EXIT_PRECONDITION
    doc["status"] = status
    doc["result"] = result
    return code, doc, table


def _destination(verb, cfg):
    if cfg.get("out"):
        return Path(cfg["out"])
    env = os.environ.get(OUT_DIR_ENV)
    if env:
        return Path(env) / f"{verb}.{cfg['format']}"
    return None


def emit_report(doc, table, path, fmt):
    """Write the document (JSON) or table (CSV, with a sidecar .json) to path or stdout."""
    if fmt == "csv" and table is not None:
        body = table.to_csv()
        sidecar = {**doc, "result": {k: v for k, v in doc["result"].items() if k != "rows"}}
    else:
        body, sidecar = to_json(doc), None
    if path is None:
        sys.stdout.write(body)
        return
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(body, newline="")
        if sidecar is not None:
            path.with_suffix(path.suffix + ".json").write_text(to_json(sidecar))
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc


def main(argv=None):
    logging.basicConfig(format="%(levelname)s: %(message)s", level=logging.WARNING)
    logging.captureWarnings(True)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        code, doc, table = run_experiment(args.verb, cfg)
        fmt = cfg["format"]
        if fmt == "csv" and table is None:
            fmt = "json"
        emit_report(doc, table, _destination(args.verb, cfg), fmt)
    except (OSError, ValueError) as exc:
        print(f"exthilbert {args.verb}: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return code


if __name__ == "__main__":
    sys.exit(main())
