"""Command line front door: ``lovelock-fg <command> --config run.json``.

Exit codes: 0 all checks pass, 1 a check failed, 2 usage or config error,
3 unsupported regime.
"""
from __future__ import annotations

import argparse
import json
import random
import re
import sys
from typing import Any

import jsonschema

from .couplings import CouplingError, Couplings, KappaRoot, coeff_functions, limsec
from .curvature import SymTensor2
from .double_forms import MetricForm
from .fg_expansion import (
    Expansion, SolveError, UnsupportedRegime, closed_forms, expand, tensor_to_json,
)
from .models import (
    flat_matrix, product_matrix, round_sphere_matrix, conformally_flat_matrix, hyperbolic_ball_matrix,
)
from .randomgen import random_metric_matrix, random_symmetric_matrix
from .ring_jets import FLOAT, DegreeError, Jet, Q, format_rational, parse_rational
from .verify import LIN_VARIANTS, lin_check, residual_report

SCHEMA = "lovelock-fg/1"
COMMANDS = ("expand", "limsec", "closed-form", "verify", "linearize", "identities")

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_UNSUPPORTED = 0, 1, 2, 3

_RATIONAL = {"oneOf": [{"type": "string", "pattern": r"^\s*-?\d+(\s*/\s*\d+)?\s*$"}, {"type": "integer"}]}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "n": {"type": "integer", "minimum": 3},
        "alpha": {"type": "array", "items": _RATIONAL, "minItems": 1},
        "beta": {"oneOf": [{"const": "lovelock"}, {"type": "array", "items": _RATIONAL}]},
        "kappa": {"oneOf": [{"const": "auto"}, _RATIONAL,
                            {"type": "object", "required": ["root"], "additionalProperties": False,
                             "properties": {"root": {"type": "integer", "minimum": 0}}}]},
        "order_N": {"type": "integer", "minimum": 0},
        "mode": {"enum": ["exact", "float"]},
        "boundary_metric": {"oneOf": [
            {"type": "string"},
            {"type": "object", "required": ["matrix"], "properties": {"matrix": {"type": "array"}},
             "additionalProperties": False},
        ]},
        "degree": {"type": "integer", "minimum": 2},
        "phi": {"type": "object", "additionalProperties": _RATIONAL},
        "seed": {"type": "integer"},
        "directions": {"type": "integer", "minimum": 1},
        "expansion": {"type": "object"},
        "hn_tf": {"type": "array"},
    },
}

REQUIRED = {
    "expand": ["n", "alpha", "kappa", "order_N", "boundary_metric"],
    "limsec": ["n", "alpha"],
    "closed-form": ["n", "alpha", "kappa", "boundary_metric"],
    "verify": ["expansion"],
    "linearize": ["n", "alpha"],
    "identities": [],
}


class ConfigError(ValueError):
    """Invalid config; exit code 2."""


# ------------------------------------------------------------------ config

def load_config(source: str | None) -> dict:
    if source is None:
        return {}
    try:
        text = sys.stdin.read() if source == "-" else open(source, encoding="utf-8").read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    return doc


def validate_config(command: str, cfg: dict) -> None:
    schema = dict(CONFIG_SCHEMA, required=REQUIRED[command])
    try:
        jsonschema.validate(cfg, schema)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {where}: {exc.message}") from exc


def _rat(v: Any) -> Any:
    return Q(v) if isinstance(v, int) else parse_rational(v)


def couplings_from(cfg: dict) -> Couplings:
    beta = cfg.get("beta", [])
    beta = beta if beta == "lovelock" else [_rat(v) for v in beta]
    try:
        return Couplings.make(cfg["n"], [_rat(v) for v in cfg["alpha"]], beta)
    except CouplingError as exc:
        raise ConfigError(f"couplings: {exc}") from exc


def resolve_kappa(cfg: dict, c: Couplings) -> Any:
    """``"auto"`` picks the smallest LimSec root, ``{"root": i}`` the i-th in increasing
    order; irrational roots need float mode."""
    k = cfg.get("kappa", "auto")
    if k != "auto" and not isinstance(k, dict):
        return _rat(k)
    roots = limsec(c)
    if not roots:
        raise UnsupportedRegime(_empty_limsec_message(c))
    i = k["root"] if isinstance(k, dict) else 0
    if i >= len(roots):
        raise ConfigError(f"kappa root index {i} out of range: LimSec has {len(roots)} root(s)")
    root = roots[i]
    if root.exact is None and cfg.get("mode", "exact") != "float":
        raise UnsupportedRegime(f"LimSec root near {root.value():.12g} is irrational: rerun with mode float")
    return root.exact if root.exact is not None else root


def _empty_limsec_message(c: Couplings) -> str:
    msg = "LimSec empty: no positive root of the kappa polynomial with A1 != 0"
    family = c.alpha[1:2] == (1,) and all(v == 0 for v in c.alpha[2:]) and c.lovelock
    if family and c.n > 3:
        a = c.alpha[0] / (6 * (c.n - 2) * (c.n - 3))
        if a == 1:
            msg = "LimSec empty: a=1 degenerate (roots 1 and 2a-1 coincide where A1 vanishes)"
    return msg


_PRESET = re.compile(r"^\s*(\w+)\s*(?:\((.*)\))?\s*$")


def boundary_metric(cfg: dict, degree: int) -> MetricForm:
    """Presets ``flat``, ``round_sphere``, ``conformally_flat(phi)``, ``product_torus(k)``,
    ``random(seed, degree)``, or ``{"matrix": [[entry]]}`` with rational or jet entries."""
    n = cfg["n"]
    spec = cfg["boundary_metric"]
    if isinstance(spec, dict):
        return _explicit_metric(spec["matrix"], n, degree)
    m = _PRESET.match(spec)
    if not m:
        raise ConfigError(f"unrecognized boundary_metric {spec!r}")
    name, args = m.group(1), [a.strip() for a in (m.group(2) or "").split(",") if a.strip()]
    if name == "flat" and not args:
        return MetricForm(flat_matrix(n, degree))
    if name == "round_sphere" and not args:
        return MetricForm(round_sphere_matrix(n, degree))
    if name == "conformally_flat":
        if "phi" not in cfg:
            raise ConfigError("conformally_flat(phi) needs a 'phi' object mapping \"i,j,..\" exponents to rationals")
        return MetricForm(conformally_flat_matrix(_phi_jet(cfg["phi"], n, degree), n))
    if name == "product_torus" and len(args) == 1 and args[0].isdigit():
        k = int(args[0])
        if not 0 <= k <= n or n - k == 1:
            raise ConfigError(f"product_torus(k) needs 0 <= k <= n and n - k != 1, got k={k}")
        if k == n:
            return MetricForm(flat_matrix(n, degree))
        return MetricForm(product_matrix(round_sphere_matrix(n - k, degree), k))
    if name == "random" and len(args) == 2 and all(re.fullmatch(r"-?\d+", a) for a in args):
        seed, deg = int(args[0]), int(args[1])
        if deg < 2:
            raise ConfigError("random(seed, degree) needs degree >= 2")
        return MetricForm(random_metric_matrix(random.Random(seed), n, deg))
    raise ConfigError(f"unrecognized boundary_metric {spec!r}")


def _phi_jet(terms: dict, n: int, degree: int) -> Jet:
    out = {}
    for key, v in terms.items():
        try:
            e = tuple(int(t) for t in key.split(","))
        except ValueError as exc:
            raise ConfigError(f"phi exponent {key!r} is not a comma separated integer list") from exc
        if len(e) != n:
            raise ConfigError(f"phi exponent {key!r} needs {n} entries")
        out[e] = _rat(v)
    if out.pop((0,) * n, 0):
        raise ConfigError("phi must vanish at the base point")
    return Jet.from_terms(n, degree, out)


def _explicit_metric(rows: list, n: int, degree: int) -> MetricForm:
    try:
        return MetricForm(_explicit_matrix(rows, n, degree))
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"boundary_metric: {exc}") from exc


def _explicit_matrix(rows: list, n: int, degree: int) -> list[list[Jet]]:
    if len(rows) != n or any(not isinstance(r, list) or len(r) != n for r in rows):
        raise ConfigError(f"explicit tensors must be {n} x {n} matrices")

    def entry(v: Any) -> Jet:
        if isinstance(v, (str, int)):
            return Jet.const(n, degree, _rat(v))
        try:
            return Jet.from_json(v)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad jet entry: {exc}") from exc
    return [[entry(v) for v in r] for r in rows]


# ---------------------------------------------------------------- commands

def _float_render(doc: Any) -> Any:
    """Replace every "p/q" string by its decimal value (display only)."""
    if isinstance(doc, dict):
        return {k: _float_render(v) for k, v in doc.items()}
    if isinstance(doc, list):
        return [_float_render(v) for v in doc]
    if isinstance(doc, str) and re.fullmatch(r"-?\d+/\d+", doc):
        return float(parse_rational(doc))
    return doc


def _kappa_json(k: Any) -> Any:
    if isinstance(k, KappaRoot):
        return k.to_json()
    return float(k) if isinstance(k, FLOAT) else format_rational(k)


def cmd_expand(cfg: dict) -> tuple[int, dict]:
    c = couplings_from(cfg)
    kappa = resolve_kappa(cfg, c)
    N = cfg["order_N"]
    h0 = boundary_metric(cfg, cfg.get("degree", max(N, 2)))
    if cfg.get("mode") == "float" and not isinstance(kappa, KappaRoot):
        kappa = float(kappa)
    hn_tf = None
    if "hn_tf" in cfg:
        hn_tf = SymTensor2(_explicit_matrix(cfg["hn_tf"], cfg["n"], h0.mat[0][0].deg))
    try:
        e = expand(h0, c, kappa, N, hn_tf=hn_tf)
    except ValueError as exc:
        if isinstance(exc, (DegreeError, CouplingError)):
            raise
        raise ConfigError(str(exc)) from exc
    rep = residual_report(e)
    e.residual_report = rep
    doc = {"schema": SCHEMA, "command": "expand", "status": "pass" if rep.passed else "fail",
           "expansion": e.to_json()}
    return (EXIT_OK if rep.passed else EXIT_FAIL), doc


def cmd_limsec(cfg: dict) -> tuple[int, dict]:
    c = couplings_from(cfg)
    roots = limsec(c)
    entries = []
    for r in roots:
        d = coeff_functions(c, r.exact if r.exact is not None else r.value())
        entries.append({"root": r.to_json(), "derived": _derived_json(d)})
    doc = {"schema": SCHEMA, "command": "limsec", "couplings": c.to_json(), "roots": entries}
    if not roots:
        doc["note"] = _empty_limsec_message(c)
    return EXIT_OK, doc


def _derived_json(d: Any) -> dict:
    if isinstance(d.A1(), FLOAT):
        return {k: (v if not isinstance(v, FLOAT) else float(v)) for k, v in _float_derived(d).items()}
    return d.to_json()


def _float_derived(d: Any) -> dict:
    f = float
    return {"kappa": f(d.kappa), "lambda": [f(v) for v in d.lam], "lambda_alpha": f(d.lambda_alpha),
            "A_alpha": {str(i): f(v) for i, v in d.A_alpha.items()},
            "A_beta": {str(i): f(v) for i, v in d.A_beta.items()},
            "B": {f"{i},{j}": f(v) for (i, j), v in d.B.items()}}


def cmd_closed_form(cfg: dict) -> tuple[int, dict]:
    c = couplings_from(cfg)
    kappa = resolve_kappa(cfg, c)
    h0 = boundary_metric(cfg, cfg.get("degree", 4))
    if cfg.get("mode") == "float" and not isinstance(kappa, KappaRoot):
        kappa = float(kappa)
    try:
        cf = closed_forms(h0, c, kappa)
    except ZeroDivisionError as exc:
        raise UnsupportedRegime(f"closed forms are singular for these couplings: {exc}") from exc
    ok = _close_scalar(cf["trace_h2"], cf["trace_h2_formula"])
    checks = [{"name": "closed_form.trace_h2", "status": "pass" if ok else "fail"}]
    doc = {"schema": SCHEMA, "command": "closed-form", "n": c.n, "kappa": _kappa_json(kappa),
           "status": "pass" if ok else "fail", "checks": checks,
           "h2": tensor_to_json(cf["h2"]), "trace_h2": tensor_to_json(cf["trace_h2"])}
    if "h4" in cf:
        doc["h4"] = tensor_to_json(cf["h4"])
        doc["trace_h4"] = tensor_to_json(cf["trace_h4"])
    return (EXIT_OK if ok else EXIT_FAIL), doc


def _close_scalar(a: Any, b: Any) -> bool:
    d = a - b
    if isinstance(d, Jet):
        return d.is_zero() if d.exact else float(d.max_abs()) <= 1e-9
    return d == 0 if not isinstance(d, FLOAT) else abs(d) <= 1e-9


def cmd_verify(cfg: dict) -> tuple[int, dict]:
    try:
        e = Expansion.from_json(cfg["expansion"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"expansion document: {exc}") from exc
    rep = residual_report(e)
    doc = {"schema": SCHEMA, "command": "verify", "status": "pass" if rep.passed else "fail",
           "residual_report": rep.to_json()}
    return (EXIT_OK if rep.passed else EXIT_FAIL), doc


def cmd_linearize(cfg: dict) -> tuple[int, dict]:
    """lin_check battery at the hyperbolic jet for the configured couplings."""
    c = couplings_from(cfg)
    n = c.n
    deg = cfg.get("degree", 4)
    rng = random.Random(cfg.get("seed", 0))
    g0 = MetricForm(hyperbolic_ball_matrix(n + 1, deg))
    checks = []
    for i in range(cfg.get("directions", 5)):
        r = SymTensor2(random_symmetric_matrix(rng, n + 1, n + 1, deg))
        for which in LIN_VARIANTS:
            if which == "q_mixed" and not c.lovelock:
                continue
            res = lin_check(g0, r, c, which)
            entry = {"name": f"lin_check.{which}", "direction": i, "status": "pass" if res.passed else "fail"}
            if res.diagnostic:
                entry["diagnostic"] = res.diagnostic
            checks.append(entry)
    ok = all(ch["status"] == "pass" for ch in checks)
    doc = {"schema": SCHEMA, "command": "linearize", "couplings": c.to_json(),
           "status": "pass" if ok else "fail", "checks": checks}
    return (EXIT_OK if ok else EXIT_FAIL), doc


def cmd_identities(cfg: dict) -> tuple[int, dict]:
    from .suite import run_suite
    results = run_suite(cfg.get("seed", 0))
    ok = all(r.passed for r in results)
    doc = {"schema": SCHEMA, "command": "identities", "seed": cfg.get("seed", 0),
           "status": "pass" if ok else "fail", "checks": [r.to_json() for r in results]}
    return (EXIT_OK if ok else EXIT_FAIL), doc


HANDLERS = {"expand": cmd_expand, "limsec": cmd_limsec, "closed-form": cmd_closed_form,
            "verify": cmd_verify, "linearize": cmd_linearize, "identities": cmd_identities}


def run(command: str, cfg: dict) -> tuple[int, dict]:
    """Validate ``cfg`` and dispatch; errors become ``(exit code, error document)``."""
    def error(code: int, kind: str, msg: str) -> tuple[int, dict]:
        return code, {"schema": SCHEMA, "command": command, "status": "error", "error": kind, "message": msg}
    if command not in HANDLERS:
        return error(EXIT_USAGE, "usage", f"unknown command {command!r}; expected one of {COMMANDS}")
    try:
        validate_config(command, cfg)
        return HANDLERS[command](cfg)
    except ConfigError as exc:
        return error(EXIT_USAGE, "config", str(exc))
    except DegreeError as exc:
        return error(EXIT_USAGE, "config", f"boundary jet degree too low: {exc}")
    except (UnsupportedRegime, SolveError) as exc:
        return error(EXIT_UNSUPPORTED, "unsupported", str(exc))
    except CouplingError as exc:
        return error(EXIT_USAGE, "config", str(exc))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lovelock-fg", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="JSON config file, or - for stdin")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--mode", choices=("exact", "float"), help="override the config mode")
    p.add_argument("--out", help="write the report here instead of stdout")
    p.add_argument("--float-render", action="store_true", help="print rationals as decimals (display only)")
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        cfg = None
        code, doc = EXIT_USAGE, {"schema": SCHEMA, "command": args.command, "status": "error",
                                 "error": "config", "message": str(exc)}
    if cfg is not None:
        if args.seed is not None:
            cfg["seed"] = args.seed
        if args.mode is not None:
            cfg["mode"] = args.mode
        code, doc = run(args.command, cfg)
    if args.float_render:
        doc = _float_render(doc)
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        try:
            sys.stdout.write(text)
            sys.stdout.flush()
        except BrokenPipeError:
            pass
    if doc.get("status") == "error":
        print(f"lovelock-fg: {doc['message']}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
