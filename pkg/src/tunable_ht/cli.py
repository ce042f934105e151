"""Command-line front end.

Every subcommand writes one artifact (JSON or CSV) to ``--out`` or standard
output. Failures print a JSON object on standard error and exit with

    1  invalid input (or a numerical routine that failed to converge)
    2  an exact computation would exceed the enumeration cap
    3  an oracle comparison failed
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
import warnings
from pathlib import Path

from .errors import NumericError, OracleMismatch, ResourceError, ValidationError
from .explab import (
    bayes_exponent_trace,
    default_nu_grid,
    np_exponent_trace,
    sweep_csv,
    sweep_d_b_nu,
)
from .exponents import exponent_report
from .logspace import LN2
from .nu_loss import as_nu, loss_curve, loss_curve_csv
from .oracle import run_verification
from .prob_core import HypothesisPair, make_distribution
from .randomized import bayes_risk, bayes_test, calibrate_lambda, error_pair

COMMANDS = ("exponents", "mp-test", "bayes", "trace-np", "trace-bayes",
            "sweep-nu", "loss-curve", "verify")

NORMALIZE_WARN_TOL = 1e-9

EXIT_OK, EXIT_VALIDATION, EXIT_RESOURCE, EXIT_ORACLE = 0, 1, 2, 3


# ---------------------------------------------------------------------------
# input parsing


def parse_vector(text, name: str) -> list[float]:
    if isinstance(text, (list, tuple)):
        values = list(text)
    else:
        parts = [t for t in str(text).replace(" ", "").split(",") if t]
        try:
            values = [float(t) for t in parts]
        except ValueError:
            raise ValidationError(f"{name}: cannot parse {text!r} as numbers") from None
    try:
        return [float(v) for v in values]
    except (TypeError, ValueError):
        raise ValidationError(f"{name}: entries must be numbers") from None


def parse_distribution(text, name: str):
    weights = parse_vector(text, name)
    total = math.fsum(weights)
    if all(math.isfinite(w) for w in weights) and abs(total - 1.0) > NORMALIZE_WARN_TOL:
        warnings.warn(f"{name} sums to {total!r}; normalizing", stacklevel=2)
    return make_distribution(weights)


def parse_n_list(text) -> list[int]:
    if isinstance(text, (list, tuple)):
        items = [str(v) for v in text]
    else:
        items = [t for t in str(text).replace(" ", "").split(",") if t]
    out: list[int] = []
    for item in items:
        try:
            if ":" in item:
                # start:stop:step, stop inclusive
                start, stop, *step = (int(v) for v in item.split(":"))
                out.extend(range(start, stop + 1, step[0] if step else 1))
            else:
                out.append(int(item))
        except ValueError:
            raise ValidationError(f"cannot parse sample sizes from {item!r}") from None
    if not out:
        raise ValidationError("empty --n-list")
    return out


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        payload = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ValidationError(f"cannot read config {path!r}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config {path!r} is not valid JSON: {exc.msg}") from None
    if not isinstance(payload, dict):
        raise ValidationError("config JSON must be an object")
    return {k.replace("-", "_"): v for k, v in payload.items()}


def _merged(args: argparse.Namespace) -> dict:
    """Command-line values override the JSON config, which overrides defaults."""
    opts = _load_config(args.config)
    for key, value in vars(args).items():
        if value is not None or key not in opts:
            opts[key] = value
    return opts


def _dist_from(value, name):
    if isinstance(value, dict):
        value = value.get("probs")
    if value is None:
        raise ValidationError(f"--{name} is required")
    return parse_distribution(value, name)


def _pair(opts: dict, need_prior: bool = False) -> HypothesisPair:
    p0 = _dist_from(opts.get("p0"), "p0")
    p1 = _dist_from(opts.get("p1"), "p1")
    prior = opts.get("prior")
    if prior is None and need_prior:
        prior = [0.5, 0.5]
    if prior is not None:
        values = parse_vector(prior, "prior")
        if len(values) == 1:
            values = [values[0], 1.0 - values[0]]
        if len(values) != 2:
            raise ValidationError("--prior takes pi0 or pi0,pi1")
        prior = tuple(values)
    return HypothesisPair(p0, p1, prior)


def _require(opts: dict, key: str):
    if opts.get(key) is None:
        raise ValidationError(f"--{key.replace('_', '-')} is required")
    return opts[key]


# ---------------------------------------------------------------------------
# output


def _jsonable(obj):
    """Replace non-finite floats by strings so the output is strict JSON."""
    if isinstance(obj, float):
        if math.isnan(obj):
            return None
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        return obj
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if hasattr(obj, "item"):
        return _jsonable(obj.item())
    return obj


def dumps(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_atomic(path: str, text: str) -> None:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{target.name}.", dir=target.parent)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(opts: dict, text: str) -> None:
    out = opts.get("out")
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        write_atomic(out, text)


def _loss_scale(nu, base: str) -> float:
    # only the log-loss carries a unit; the other losses are pure numbers
    return LN2 if (base == "nats" and as_nu(nu).is_log_loss) else 1.0


def _test_payload(test) -> dict:
    out = test.to_dict()
    out["reject_probs"] = {
        ",".join(str(c) for c in row): float(r)
        for row, r in zip(test.types.counts.tolist(), test.reject_probs())
    }
    return out


# ---------------------------------------------------------------------------
# commands


def cmd_exponents(opts: dict) -> str:
    pair = _pair(opts)
    nus = opts.get("nu_list") or ["1", "1.5", "2"]
    if isinstance(nus, str):
        nus = [t for t in nus.split(",") if t]
    report = exponent_report(pair, nus).converted(opts["base"])
    return dumps(report.to_dict())


def cmd_mp_test(opts: dict) -> str:
    pair = _pair(opts)
    nu = as_nu(_require(opts, "nu"))
    n = int(_require(opts, "n"))
    eps = float(_require(opts, "epsilon"))
    # the size constraint is stated in bits for nu = 1
    eps_bits = eps / _loss_scale(nu, opts["base"])
    cal = calibrate_lambda(nu, eps_bits, pair, n)
    errs = error_pair(cal.test, pair, nu)
    scale = _loss_scale(nu, opts["base"])
    return dumps({
        "base": opts["base"],
        "test": _test_payload(cal.test),
        "calibration": {"lambda": cal.lam, "log2_lambda": cal.log2_lam,
                        "achieved_alpha": cal.achieved_alpha * scale, "epsilon": eps},
        "errors": {**errs.to_dict(), "alpha": errs.alpha * scale,
                   "beta_bar": errs.beta_bar * scale},
    })


def cmd_bayes(opts: dict) -> str:
    pair = _pair(opts, need_prior=True)
    nu = as_nu(_require(opts, "nu"))
    n = int(_require(opts, "n"))
    test = bayes_test(nu, pair, n)
    report = bayes_risk(nu, test, pair)
    scale = _loss_scale(nu, opts["base"])
    risk = report.to_dict()
    for key in ("risk", "alpha", "beta_bar"):
        risk[key] *= scale
    return dumps({"base": opts["base"], "test": _test_payload(test), "risk": risk})


def _trace_out(opts: dict, trace) -> str:
    out = opts.get("out")
    if out not in (None, "-"):
        write_atomic(f"{out}.json", trace.metadata_json(opts["base"]) + "\n")
    return trace.to_csv(opts["base"])


def cmd_trace_np(opts: dict) -> str:
    pair = _pair(opts)
    trace = np_exponent_trace(_require(opts, "nu"), float(_require(opts, "epsilon")), pair,
                              parse_n_list(_require(opts, "n_list")),
                              objective=opts.get("objective") or "nu")
    return _trace_out(opts, trace)


def cmd_trace_bayes(opts: dict) -> str:
    pair = _pair(opts, need_prior=True)
    trace = bayes_exponent_trace(_require(opts, "nu"), pair,
                                 parse_n_list(_require(opts, "n_list")))
    return _trace_out(opts, trace)


def cmd_sweep_nu(opts: dict) -> str:
    pair = _pair(opts)
    grid = default_nu_grid(float(opts.get("nu_min") or 1.0), float(opts.get("nu_max") or 2.0),
                           int(opts.get("steps") or 101))
    return sweep_csv(sweep_d_b_nu(pair, grid), opts["base"])


def cmd_loss_curve(opts: dict) -> str:
    nus = opts.get("nu_list") or ["1", "1.5", "2", "inf"]
    if isinstance(nus, str):
        nus = [t for t in nus.split(",") if t]
    rows = loss_curve(nus, int(opts.get("steps") or 200))
    return loss_curve_csv(rows, opts["base"])


def cmd_verify(opts: dict) -> str:
    seed = int(opts.get("seed") if opts.get("seed") is not None else 7)
    count = int(opts.get("instances") or 20)
    results = run_verification(seed, count)
    payload = {"seed": seed, "instances": count,
               "passed": all(r.passed for r in results),
               "checks": [r.to_dict() for r in results]}
    text = dumps(payload)
    if not payload["passed"]:
        failed = [r.to_dict() for r in results if not r.passed]
        _emit(opts, text)
        raise OracleMismatch(json.dumps(_jsonable(failed)))
    return text


HANDLERS = {
    "exponents": cmd_exponents,
    "mp-test": cmd_mp_test,
    "bayes": cmd_bayes,
    "trace-np": cmd_trace_np,
    "trace-bayes": cmd_trace_bayes,
    "sweep-nu": cmd_sweep_nu,
    "loss-curve": cmd_loss_curve,
    "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file whose keys mirror the long flags")
    common.add_argument("--p0", help="null distribution, e.g. 0.5,0.5")
    common.add_argument("--p1", help="alternative distribution, e.g. 0.7,0.3")
    common.add_argument("--prior", help="pi0 or pi0,pi1 (default 0.5,0.5 where needed)")
    common.add_argument("--nu", help="loss parameter in [1, inf]; spell infinity as inf")
    common.add_argument("--nu-list", help="comma-separated nu values")
    common.add_argument("--epsilon", type=float, help="size constraint")
    common.add_argument("--n", type=int, help="sample length")
    common.add_argument("--n-list", help="sample lengths: 10,20,50 or 100:800:50")
    common.add_argument("--nu-min", type=float)
    common.add_argument("--nu-max", type=float)
    common.add_argument("--steps", type=int, help="grid points for sweeps and loss curves")
    common.add_argument("--objective", choices=("nu", "classical"))
    common.add_argument("--base", choices=("bits", "nats"))
    common.add_argument("--seed", type=int)
    common.add_argument("--instances", type=int)
    common.add_argument("--out", help="output path (default: standard output)")

    parser = argparse.ArgumentParser(
        prog="tunable-ht",
        description="Hypothesis testing under the tunable nu-loss: exact tests, "
                    "errors and exponents.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "exponents": "KL divergence, Chernoff information and skewed Bhattacharyya terms",
        "mp-test": "calibrated most powerful test and its errors",
        "bayes": "minimum nu-Bayesian-error test and its risk",
        "trace-np": "exact Neyman-Pearson exponent trace (CSV)",
        "trace-bayes": "exact Bayesian exponent trace (CSV)",
        "sweep-nu": "D_B,nu over a nu grid (CSV)",
        "loss-curve": "nu-loss against the correct-action probability (CSV)",
        "verify": "closed forms against brute-force oracles",
    }
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def _fail(code: int, kind: str, exc: BaseException, extra: dict | None = None) -> int:
    payload = {"error": kind, "message": str(exc), "exit_code": code}
    payload.update(extra or {})
    sys.stderr.write(json.dumps(_jsonable(payload), sort_keys=True) + "\n")
    return code


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        if exc.code in (0, None):
            return 0
        return _fail(EXIT_VALIDATION, "usage", ValueError("invalid command line"))
    try:
        opts = _merged(args)
        opts["base"] = opts.get("base") or "bits"
        if opts["base"] not in ("bits", "nats"):
            raise ValidationError(f"unknown base {opts['base']!r}")
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            text = HANDLERS[args.command](opts)
        for w in caught:
            sys.stderr.write(json.dumps({"warning": str(w.message)}) + "\n")
        _emit(opts, text)
    except ResourceError as exc:
        return _fail(EXIT_RESOURCE, "resource", exc, {"count": exc.count})
    except OracleMismatch as exc:
        return _fail(EXIT_ORACLE, "oracle_mismatch", exc)
    except NumericError as exc:
        return _fail(EXIT_VALIDATION, "numeric", exc, {"state": exc.state})
    except ValueError as exc:
        return _fail(EXIT_VALIDATION, "validation", exc)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
