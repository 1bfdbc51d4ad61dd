"""Command-line interface: JSON in, JSON out.

Exit codes: 0 success, 1 usage error, 2 refused (divergent or not locally
finite) configuration, 3 quadrature failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import testfn
from .errors import DivergentConfiguration, NotLocallyFinite, QuadratureFailure
from .extend import (ProbeConfig, RenormalizedDistribution, ScalingConfig, default_order,
                     extend_positive_measure, fit_growth, moderate_from_scaling, renormalized_product,
                     scaling_degree)
from .geometry import set_from_json
from .kernel import FeynmanGraph, kernel_from_json
from .qft import RenormMapTower, renormalize_graph, tempered_partition, verify_axioms
from .quad import QuadConfig
from .scheme import RenormScheme

EXIT_OK, EXIT_USAGE, EXIT_REFUSED, EXIT_QUADRATURE = 0, 1, 2, 3


class UsageError(Exception):
    pass


# JSON with 17 significant digits ------------------------------------------------

def _encode(obj):
    if isinstance(obj, (bool, np.bool_)) or obj is None:
        return json.dumps(bool(obj) if obj is not None else None)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return "null"
        text = format(x, ".17g")
        return text if any(c in text for c in ".en") else text + ".0"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_encode(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_encode(v) for v in obj) + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj):
    """JSON text with every float written to 17 significant digits."""
    return _encode(obj)


def load_json(arg):
    """Parse an inline JSON string or read a JSON file."""
    if arg is None:
        return None
    text = arg.strip()
    if text[:1] in "{[" or text[:1].isdigit() or text[:1] == "-":
        try:
            return json.loads(text)
        except json.JSONDecodeError as exc:
            raise UsageError(f"invalid inline JSON: {exc}") from None
    try:
        with open(arg) as fh:
            return json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read {arg}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"invalid JSON in {arg}: {exc}") from None


# run specs --------------------------------------------------------------------

@dataclass
class RunSpec:
    command: str
    inputs: dict = field(default_factory=dict)
    output: str | None = None
    seed: int = 0
    csv: str | None = None
    strict: bool = False


def _quad(spec, default=None):
    base = (default or QuadConfig()).to_json()
    base.update(spec.inputs.get("quad") or {})
    base["seed"] = spec.seed
    return QuadConfig.from_json(base)


def _set(spec, required=True):
    desc = spec.inputs.get("set")
    if desc is None:
        if required:
            raise UsageError("--set is required")
        return None
    return set_from_json(desc)


def _kernel(spec, key="kernel"):
    desc = spec.inputs.get(key)
    if desc is None:
        raise UsageError(f"--{key} is required")
    k = kernel_from_json(desc, _set(spec, required="set" not in desc))
    if k.set is None:
        raise UsageError("kernel has no singular set")
    return k


def _phi(spec):
    desc = spec.inputs.get("phi")
    if desc is None:
        raise UsageError("--phi is required")
    return testfn.from_json(desc)


def _scheme(spec, kernel):
    s = kernel.set
    order = spec.inputs.get("order")
    order = default_order(kernel.growth, s.codim) if order is None else int(order)
    return RenormScheme(s, order, base_scale=float(spec.inputs.get("base_scale", 1.0)))


def _write_terms(path, result):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["j", "term", "term_error"])
        for j, (t, e) in enumerate(zip(result.terms, result.term_errors)):
            w.writerow([j, format(t, ".17g"), format(e, ".17g")])


def _pair_report(spec, rd, phi):
    res = rd.pair(phi)
    if spec.csv:
        _write_terms(spec.csv, res)
    out = res.to_json()
    out["diagnostics"] = {"converged": res.converged, "ratio": res.ratio, "outer": res.outer,
                          "order": res.order, "excess": rd.excess}
    out["scheme"] = rd.scheme.to_json()
    return out, res.converged


def cmd_pair(spec):
    kernel = _kernel(spec)
    rd = RenormalizedDistribution(kernel, _scheme(spec, kernel), _quad(spec))
    out, ok = _pair_report(spec, rd, _phi(spec))
    out["kernel"] = kernel.to_json()
    return out, ok


def cmd_product(spec):
    f = _kernel(spec, "factor")
    t = _kernel(spec)
    order = spec.inputs.get("order")
    rd = RenormalizedDistribution(t, RenormScheme(t.set, default_order(t.growth, t.set.codim),
                                                  base_scale=float(spec.inputs.get("base_scale", 1.0))),
                                  _quad(spec))
    prod = renormalized_product(f, rd, order)
    out, ok = _pair_report(spec, prod, _phi(spec))
    out["kernel"] = prod.kernel.to_json()
    return out, ok


def cmd_fit_growth(spec):
    kernel = _kernel(spec)
    fit = fit_growth(kernel, kernel.set, ProbeConfig.from_json(spec.inputs.get("probe")),
                     _quad(spec, QuadConfig(rel_tol=1e-9, max_subdivisions=20000)))
    out = fit.to_json()
    out["diagnostics"] = {"flagged": fit.flagged}
    return out, True


def cmd_scaling_degree(spec):
    kernel = _kernel(spec)
    probe = spec.inputs.get("probe") or {}
    cfg = ScalingConfig(**{k: v for k, v in probe.items() if k in ScalingConfig.__dataclass_fields__})
    deg = scaling_degree(kernel, kernel.set, cfg, _quad(spec, QuadConfig(rel_tol=1e-11, abs_tol=1e-300)))
    codim = kernel.set.codim
    return {"value": deg, "codim": codim, "moderate_growth_bound": moderate_from_scaling(deg, codim)}, True


def cmd_measure_extend(spec):
    kernel = _kernel(spec)
    mass = spec.inputs.get("mass_bound")
    res = extend_positive_measure(kernel, kernel.set, _phi(spec), _quad(spec, QuadConfig(rel_tol=1e-11)),
                                  mass_bound=mass)
    out = res.to_json()
    out["diagnostics"] = {"converged": res.converged}
    return out, res.converged


def _tower(spec):
    orders = spec.inputs.get("orders")
    if isinstance(orders, list):
        orders = {k + 2: int(m) for k, m in enumerate(orders) if m is not None}
    elif isinstance(orders, dict):
        orders = {int(k): int(m) for k, m in orders.items()}
    else:
        orders = {}
    scales = spec.inputs.get("base_scales") or {}
    if isinstance(scales, list):
        scales = {k + 2: float(s) for k, s in enumerate(scales)}
    elif isinstance(scales, dict):
        scales = {int(k): float(s) for k, s in scales.items()}
    default = RenormMapTower().quad
    return RenormMapTower(orders=orders, base_scales=scales, quad=_quad(spec, default))


def _suite(spec):
    desc = spec.inputs.get("phi")
    if desc is None:
        raise UsageError("--phi is required")
    entries = desc if isinstance(desc, list) else [desc]
    suite = []
    for e in entries:
        if "phi" in e:
            split = e.get("split")
            suite.append((testfn.from_json(e["phi"]), (tuple(split[0]), tuple(split[1])) if split else None))
        else:
            suite.append((testfn.from_json(e), None))
    return suite


def cmd_qft(spec, verify=None):
    desc = spec.inputs.get("graph")
    if desc is None:
        raise UsageError("--graph is required")
    graph = FeynmanGraph.from_json(desc)
    tower = _tower(spec)
    suite = _suite(spec)
    verify = spec.inputs.get("verify_axioms", False) if verify is None else verify
    rd = renormalize_graph(tower, graph)
    out = {"graph": graph.to_json(), "orders": {str(k): v for k, v in tower.orders.items()},
           "scheme": rd.scheme.to_json()}
    if verify:
        report = verify_axioms(tower, graph, suite)
        out["pairings"] = report.pairings
        out["axiom_residuals"] = {"linearity": report.linearity, "restriction": report.restriction,
                                  "factorization": report.factorization}
        out["details"] = report.details
        return out, True
    results = [rd.pair(phi) for phi, _ in suite]
    out["pairings"] = [r.value for r in results]
    out["errors"] = [r.error for r in results]
    return out, all(r.converged for r in results)


def cmd_verify_axioms(spec):
    return cmd_qft(spec, verify=True)


def selftest_checks(seed=0):
    """A quick invariant suite: (name, passed, measured value)."""
    rng = np.random.default_rng(seed)
    checks = []
    for n in (2, 3, 4):
        x = rng.normal(size=(2000, n))
        w = tempered_partition(n, 1, x)
        err = float(np.max(np.abs(sum(w.values()) - 1)))
        checks.append((f"partition of unity n={n}", err <= 1e-12, err))
    x = rng.normal(size=(500, 3))
    xbar = x.mean(axis=1, keepdims=True)
    w1 = tempered_partition(3, 1, x)
    w2 = tempered_partition(3, 1, xbar + 0.25 * (x - xbar))
    err = max(float(np.max(np.abs(w1[c] - w2[c]))) for c in w1)
    checks.append(("partition 0-homogeneity", err <= 1e-12, err))

    from .geometry import Point
    from .kernel import power_log_kernel
    from .testfn import standard_bump
    from .extend import direct_pairing
    s = Point([0.0])
    kernel = power_log_kernel(s, 1.0, half_line=True)
    rd = RenormalizedDistribution(kernel, RenormScheme(s, 1))
    off = standard_bump([0.7], 0.2)
    a, b = rd.pair(off).value, direct_pairing(kernel, off).value
    err = abs(a - b) / abs(b)
    checks.append(("extension property off X", err <= 1e-8, err))
    f, g = standard_bump([0.1], 0.6), standard_bump([0.3], 0.5)
    lhs = rd.pair(f.scaled(0.7) + g.scaled(-1.3)).value
    rhs = 0.7 * rd.pair(f).value - 1.3 * rd.pair(g).value
    err = abs(lhs - rhs) / max(abs(rhs), 1e-300)
    checks.append(("linearity of pairings", err <= 1e-8, err))
    return checks


def cmd_selftest(spec):
    checks = selftest_checks(spec.seed)
    out = {"checks": [{"name": n, "passed": bool(p), "value": v} for n, p, v in checks],
           "passed": all(p for _, p, _ in checks)}
    return out, out["passed"]


COMMANDS = {
    "pair": cmd_pair,
    "product": cmd_product,
    "fit-growth": cmd_fit_growth,
    "scaling-degree": cmd_scaling_degree,
    "measure-extend": cmd_measure_extend,
    "qft": cmd_qft,
    "verify-axioms": cmd_verify_axioms,
    "selftest": cmd_selftest,
}


def run(spec):
    """Execute ``spec``; returns (exit code, JSON-ready dict)."""
    try:
        out, ok = COMMANDS[spec.command](spec)
    except UsageError as exc:
        return EXIT_USAGE, {"error": str(exc), "kind": "usage"}
    except DivergentConfiguration as exc:
        msg = str(exc)
        if exc.required_order is not None and "required order" not in msg:
            msg += f" (required order {exc.required_order})"
        return EXIT_REFUSED, {"error": msg, "kind": "divergent", "required_order": exc.required_order}
    except NotLocallyFinite as exc:
        return EXIT_REFUSED, {"error": str(exc), "kind": "not locally finite",
                              "diagnostic": "not locally finite", "partial_sums": exc.partial_sums}
    except QuadratureFailure as exc:
        return EXIT_QUADRATURE, {"error": str(exc), "kind": "quadrature", "value": exc.value, "err": exc.error}
    except (ValueError, KeyError, TypeError) as exc:
        return EXIT_USAGE, {"error": f"{type(exc).__name__}: {exc}", "kind": "usage"}
    if spec.command == "selftest" and not ok:
        return EXIT_USAGE, out
    if spec.strict and not ok:
        return EXIT_QUADRATURE, out
    return EXIT_OK, out


# argument parsing ---------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser():
    parser = _Parser(prog="renorm", description="Extension of distributions and configuration-space renormalization.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--quad", help="quadrature config (JSON or path)")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", help="write JSON here instead of stdout")
        p.add_argument("--threads", type=int, help="cap internal parallelism (sets RENORM_THREADS)")
        p.add_argument("--strict", action="store_true", help="exit 3 when quadrature did not converge")
        return p

    def kernel_args(p):
        p.add_argument("--kernel", required=True, help="kernel descriptor (JSON or path)")
        p.add_argument("--set", help="singular set descriptor (JSON or path)")

    p = common(sub.add_parser("pair", help="renormalized pairing <R t, phi>"))
    kernel_args(p)
    p.add_argument("--phi", required=True)
    p.add_argument("--order", type=int)
    p.add_argument("--base-scale", type=float, default=1.0)
    p.add_argument("--csv", help="write the dyadic terms as CSV columns")

    p = common(sub.add_parser("product", help="pairing of a renormalized product f * t"))
    kernel_args(p)
    p.add_argument("--factor", required=True, help="tempered factor f (kernel descriptor)")
    p.add_argument("--phi", required=True)
    p.add_argument("--order", type=int)
    p.add_argument("--base-scale", type=float, default=1.0)
    p.add_argument("--csv")

    p = common(sub.add_parser("fit-growth", help="fit the moderate-growth exponent"))
    kernel_args(p)
    p.add_argument("--probe", help="probe config (JSON or path)")

    p = common(sub.add_parser("scaling-degree", help="estimate the scaling degree"))
    kernel_args(p)
    p.add_argument("--probe", help="scaling config {k_min, k_max, fit_from}")

    p = common(sub.add_parser("measure-extend", help="monotone extension of a positive measure"))
    kernel_args(p)
    p.add_argument("--phi", required=True)
    p.add_argument("--mass-bound", type=float)

    for name, helptext in (("qft", "renormalize a Feynman graph and pair it"),
                           ("verify-axioms", "axiom residuals for a Feynman graph")):
        p = common(sub.add_parser(name, help=helptext))
        p.add_argument("--graph", required=True)
        p.add_argument("--orders", help='per-level orders "[m2, m3, ...]"')
        p.add_argument("--base-scales", help='per-level base scales "[l2, l3, ...]"')
        p.add_argument("--phi", required=True, help="test function or suite [{phi, split}, ...]")
        if name == "qft":
            p.add_argument("--verify-axioms", action="store_true")

    common(sub.add_parser("selftest", help="run a quick invariant suite"))
    return parser


_JSON_ARGS = ("kernel", "set", "phi", "quad", "probe", "factor", "graph", "orders", "base_scales")


def spec_from_args(args):
    inputs = {}
    for key, val in vars(args).items():
        if key in ("command", "out", "seed", "csv", "strict", "threads") or val is None:
            continue
        inputs[key] = load_json(val) if key in _JSON_ARGS else val
    return RunSpec(args.command, inputs, args.out, args.seed, getattr(args, "csv", None), args.strict)


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.threads:
        os.environ["RENORM_THREADS"] = str(args.threads)
    try:
        spec = spec_from_args(args)
    except UsageError as exc:
        print(f"renorm: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    code, out = run(spec)
    text = dumps(out) + "\n"
    if spec.output:
        with open(spec.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if code != EXIT_OK and "error" in out:
        print(f"renorm: {out['error']}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
