"""Command-line front end.

Every subcommand prints one JSON document to stdout (traces go to CSV).
Exit status: 0 on success, 2 when a verification fails, 1 on bad input.
"""

from __future__ import annotations

import argparse
import cmath
import io
import json
import math
import os
import sys

import numpy as np

from . import divisor_forms as dv
from . import elliptic, foliation, moduli, projective
from .elliptic import Lattice, TorusPoint

DEFAULT_TOL = 1e-9


class UsageError(Exception):
    pass


class VerificationFailed(Exception):
    def __init__(self, payload):
        super().__init__("verification failed")
        self.payload = payload


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# ---------------------------------------------------------------------------
# deterministic JSON


def _encode(obj):
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return json.dumps("inf" if x > 0 else "-inf" if x < 0 else "nan")
        return format(x, ".17g")
    if isinstance(obj, (complex, np.complexfloating)):
        z = complex(obj)
        if not cmath.isfinite(z):
            return json.dumps("inf")
        return _encode([z.real, z.imag])
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_encode(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_encode(v) for v in obj) + "]"
    if isinstance(obj, TorusPoint):
        return _encode([obj.a, obj.b])
    raise TypeError(f"cannot encode {type(obj).__name__}")


def dumps(obj):
    """JSON with fixed field order and 17 significant digits for floats."""
    return _encode(obj)


# ---------------------------------------------------------------------------
# argument parsing helpers


def _complex_arg(text):
    try:
        parts = [float(p) for p in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 're,im', got {text!r}")
    if len(parts) == 1:
        return complex(parts[0], 0.0)
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected 're,im', got {text!r}")
    return complex(*parts)


def _point_arg(text):
    z = _complex_arg(text)
    return TorusPoint.wrap(z.real, z.imag)


def _path_arg(text):
    return [_complex_arg(p) for p in text.split(";") if p.strip()]


def _default_tol():
    raw = os.environ.get("TURBULENT_DEFAULT_TOL")
    if raw is None:
        return DEFAULT_TOL
    try:
        return float(raw)
    except ValueError:
        raise UsageError(f"TURBULENT_DEFAULT_TOL is not a number: {raw!r}")


def _load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise UsageError(f"malformed JSON in {path}: {exc}")
    except OSError as exc:
        raise UsageError(str(exc))


def _scenario(args):
    """Divisor pair plus scale/beta/tau_x from a file or from --d/--seed (exactly one)."""
    has_file = getattr(args, "file", None) is not None
    has_sample = args.d is not None
    if has_file == has_sample:
        raise UsageError("give exactly one of a scenario file or --d (with --seed)")
    if has_file:
        doc = _load_json(args.file)
        explicit = "x" in doc or "y" in doc
        sampled = "d" in doc
        if explicit == sampled:
            raise UsageError("scenario must contain exactly one of an explicit pair (x, y) or d/seed")
        tau = complex(*doc.get("tau", doc.get("tau_c", [0.0, 1.0])))
        if explicit:
            pair = dv.DivisorPair(
                tuple(TorusPoint.wrap(a, b) for a, b in doc["x"]),
                tuple(TorusPoint.wrap(a, b) for a, b in doc["y"]),
                Lattice(tau),
            )
        else:
            pair = dv.sample_divisor_pair(int(doc["d"]), Lattice(tau), int(doc.get("seed", 0)))
        scale = complex(*doc.get("scale", [1.0, 0.0]))
        beta = complex(*doc.get("beta", [1.0, 0.0]))
        tau_x = complex(*doc.get("tau_x", [0.0, 1.0]))
    else:
        pair = dv.sample_divisor_pair(args.d, Lattice(args.tau), args.seed)
        scale, beta, tau_x = args.scale, 1.0 + 0j, args.tau_x
    return pair, scale, beta, tau_x


def _form(args, check=True):
    pair, scale, beta, tau_x = _scenario(args)
    return dv.build_one_form(pair, scale, check_abel=check, tol=args.tol or _default_tol()), beta, tau_x


def _foliation(args):
    w, beta, tau_x = _form(args)
    if args.beta_override is not None:
        beta = args.beta_override
    return foliation.build_turbulent(w, beta, Lattice(tau_x))


# ---------------------------------------------------------------------------
# commands


def cmd_elliptic_check(args):
    taus = args.tau or [1j, 2j, complex(0.3, 1.1)]
    results = []
    ok = True
    for tau in taus:
        res = elliptic.identity_residuals(Lattice(tau), n=args.n, seed=args.seed)
        passed = all(res[k] < elliptic.IDENTITY_THRESHOLDS[k] for k in res)
        ok &= passed
        results.append({"tau": tau, "residuals": res, "pass": passed})
    out = {"results": results, "pass": ok}
    if not ok:
        raise VerificationFailed(out)
    return out


def cmd_form_build(args):
    w, _, _ = _form(args)
    doc = dv.pair_to_dict(w.pair, w.scale)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(dumps(doc) + "\n")
    return doc


def cmd_form_verify(args):
    pair, scale, _, _ = _scenario(args)
    tol = args.tol or _default_tol()
    ok, defect = dv.abel_check(pair.x, pair.y, pair.lattice, tol)
    out = {"abel_defect": abs(defect), "tol": tol, "abel": ok}
    if ok:
        w = dv.build_one_form(pair, scale, check_abel=False)
        res = w.periodicity_residual(seed=args.seed)
        out["periodicity_residual"] = res
        ok = res < tol
    out["valid"] = ok
    if not ok:
        raise VerificationFailed(out)
    return out


def cmd_form_residues(args):
    w, _, _ = _form(args)
    res = dv.residues(w)
    total = sum(r for _, r in res)
    return {"residues": [{"pole": p, "residue": r} for p, r in res], "sum": total, "sum_abs": abs(total)}


def cmd_form_count(args):
    w, _, _ = _form(args)
    zeros, poles = dv.count_divisor(w, grid=args.grid, seed=args.seed)
    out = {"zeros": zeros, "poles": poles, "d": w.pair.d}
    if (zeros, poles) != (w.pair.d, w.pair.d):
        raise VerificationFailed(out)
    return out


def cmd_foliation_field(args):
    F = _foliation(args)
    v = foliation.line_field(F, args.c, args.x)
    return {
        "direction": list(v),
        "chart": foliation.chart_at(F, args.c),
        "tangency": foliation.tangency(F, args.c, args.x),
        "kernel_residual": foliation.kernel_residual(F, args.c, v),
    }


def cmd_foliation_trace(args):
    F = _foliation(args)
    tr = foliation.trace_leaf(F, args.c, args.x, horizon=args.horizon, step_tol=args.tol or 1e-10)
    buf = io.StringIO()
    foliation.write_trace_csv(tr, buf)
    summary = {
        "steps": tr.steps,
        "drift": tr.drift,
        "chart_switches": tr.chart_switches,
        "max_residual": tr.max_residual,
        "absorbed": tr.absorbed,
        "min_pole_distance": [tr.c_distance(F.lattice_c, p) for p in foliation.compact_leaves(F)],
    }
    summary["near"] = args.near
    summary["approaches_all_compact_leaves"] = all(dist < args.near for dist in summary["min_pole_distance"])
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(buf.getvalue())
        return summary
    return buf.getvalue()


def cmd_foliation_leaves(args):
    F = _foliation(args)
    return {"compact_leaves": foliation.compact_leaves(F)}


def cmd_foliation_degree(args):
    F = _foliation(args)
    z = args.z if args.z is not None else TorusPoint(0.0, 0.0)
    return {"degree": foliation.normal_bundle_degree(F, z, grid=args.grid)}


def cmd_moduli_report(args):
    return moduli.obstruction_report(args.d).to_dict()


def cmd_moduli_rank(args):
    pair = dv.sample_divisor_pair(args.d, Lattice(args.tau), args.seed)
    rank = moduli.abel_constraint_rank(pair, h=args.h)
    out = {"d": args.d, "seed": args.seed, "rank": rank}
    if rank != 1:
        raise VerificationFailed(out)
    return out


def _triple(args):
    doc = _load_json(args.file)
    return projective.triple_from_dict(doc)


def cmd_bundle_transport(args):
    triple, _ = _triple(args)
    w = projective.riccati_transport(triple.bundle, args.path, args.w0, tol=args.tol or 1e-10)
    return {"w": w}


def cmd_bundle_sff(args):
    triple, lattice = _triple(args)
    out = {}
    if args.z is not None:
        out["sff"] = projective.second_fundamental_form(triple, args.z)
    out["vanishing_count"] = projective.sff_vanishing_count(triple, lattice, grid=args.grid, seed=args.seed)
    return out


def cmd_bundle_develop(args):
    triple, _ = _triple(args)
    return {"gamma": projective.develop(triple, args.path, tol=args.tol or 1e-10)}


# ---------------------------------------------------------------------------


def _common(p):
    p.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    p.add_argument("--tol", type=float, default=None, help="tolerance override")


def _scenario_args(p):
    p.add_argument("file", nargs="?", help="scenario JSON (divisor pair, scale, beta, tau_x)")
    p.add_argument("--d", type=int, default=None, help="sample a pair of this degree instead of reading a file")
    p.add_argument("--tau", type=_complex_arg, default=1j, help="modulus of C as 're,im' (default 0,1)")
    p.add_argument("--tau-x", dest="tau_x", type=_complex_arg, default=1j, help="modulus of X (default 0,1)")
    p.add_argument("--scale", type=_complex_arg, default=1.0 + 0j)
    p.add_argument("--beta", dest="beta_override", type=_complex_arg, default=None)
    _common(p)


def build_parser():
    parser = _Parser(prog="turbulent", description="Elliptic divisors, turbulent foliations and flat P^1-bundles.")
    groups = parser.add_subparsers(dest="group", required=True, parser_class=_Parser)

    g = groups.add_parser("elliptic", help="Weierstrass function checks").add_subparsers(dest="cmd", required=True, parser_class=_Parser)
    p = g.add_parser("check", help="identity suite at one or more moduli")
    p.add_argument("--tau", type=_complex_arg, action="append", help="modulus 're,im' (repeatable)")
    p.add_argument("--n", type=int, default=100, help="random points per modulus")
    _common(p)
    p.set_defaults(func=cmd_elliptic_check)

    g = groups.add_parser("form", help="meromorphic one-forms from divisor pairs").add_subparsers(dest="cmd", required=True, parser_class=_Parser)
    for name, func in (("build", cmd_form_build), ("verify", cmd_form_verify), ("residues", cmd_form_residues), ("count", cmd_form_count)):
        p = g.add_parser(name)
        _scenario_args(p)
        if name == "build":
            p.add_argument("--out", help="write the pair document here as well")
        if name == "count":
            p.add_argument("--grid", type=int, default=8)
        p.set_defaults(func=func)

    g = groups.add_parser("foliation", help="turbulent foliations on C x X").add_subparsers(dest="cmd", required=True, parser_class=_Parser)
    for name, func in (("field", cmd_foliation_field), ("trace", cmd_foliation_trace), ("leaves", cmd_foliation_leaves), ("degree", cmd_foliation_degree)):
        p = g.add_parser(name)
        _scenario_args(p)
        if name in ("field", "trace"):
            p.add_argument("--c", type=_point_arg, required=True, help="point on C as 'a,b' lattice coordinates")
            p.add_argument("--x", type=_point_arg, required=True, help="point on X as 'a,b'")
        if name == "trace":
            p.add_argument("--horizon", type=float, default=200.0)
            p.add_argument("--near", type=float, default=0.05, help="distance counted as reaching a compact leaf")
            p.add_argument("--out", help="CSV destination (stdout if omitted)")
        if name == "degree":
            p.add_argument("--z", type=_point_arg, default=None, help="point on X as 'a,b'")
            p.add_argument("--grid", type=int, default=8)
        p.set_defaults(func=func)

    g = groups.add_parser("moduli", help="dimension counts").add_subparsers(dest="cmd", required=True, parser_class=_Parser)
    p = g.add_parser("report")
    p.add_argument("--d", type=int, required=True)
    p.set_defaults(func=cmd_moduli_report)
    p = g.add_parser("rank")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--tau", type=_complex_arg, default=1j)
    p.add_argument("--h", type=float, default=1e-5)
    _common(p)
    p.set_defaults(func=cmd_moduli_rank)

    g = groups.add_parser("bundle", help="flat P^1-bundles").add_subparsers(dest="cmd", required=True, parser_class=_Parser)
    for name, func in (("transport", cmd_bundle_transport), ("sff", cmd_bundle_sff), ("develop", cmd_bundle_develop)):
        p = g.add_parser(name)
        p.add_argument("file", help="bundle JSON")
        _common(p)
        if name in ("transport", "develop"):
            p.add_argument("--path", type=_path_arg, required=True, help="polyline 're,im;re,im;...'")
        if name == "transport":
            p.add_argument("--w0", type=_complex_arg, default=0j)
        if name == "sff":
            p.add_argument("--z", type=_complex_arg, default=None)
            p.add_argument("--grid", type=int, default=8)
        p.set_defaults(func=func)
    return parser


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        out = args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except VerificationFailed as exc:
        print(dumps(exc.payload))
        return 2
    except (ValueError, KeyError, TypeError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if isinstance(out, str):
        sys.stdout.write(out)
    else:
        print(dumps(out))
    return 0


if __name__ == "__main__":
    sys.exit(main())
