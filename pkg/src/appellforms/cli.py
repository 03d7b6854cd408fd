"""Command-line front end.

Every subcommand reads an optional YAML spec file, runs one computation and
writes a report (JSON or text) that starts with a provenance header.  Exit
status: 0 on success, 1 when a mathematical check fails, 2 on invalid input.
"""

import argparse
import hashlib
import json
import os
import platform
import sys
import tempfile
import time
from fractions import Fraction as F

import numpy as np
import scipy
import yaml

from . import __version__
from . import _exact as ex
from .appell import (IDENTITIES, AffineForm, AppellSpec, GenericityError, phi, phi_plus, psi_build, psi_spec,
                     s_func, theta_series, verify_identity)
from .completion import (NumericPoint, a3_decomposition_check, completion_terms, level, modular_residual,
                         numeric_arguments, phi_plus_value, r_direct)
from .errfun import ErrSpec, QuadratureError, e_p_estimate, m_p_estimate
from .fseries import series_compare
from .lattice import DVectorSet, Lattice, cartan_an, conjugacy_classes, glue_vectors, lattice_info

COMMANDS = ("expand", "theta", "psi", "identities", "lattice-info", "glue", "errfun-eval", "complete-eval",
            "modular-check", "a3-check")
SPEC_KEYS = {"lattice", "dvectors", "mu", "nu", "u", "v", "z_im", "psi", "errfun"}
SIG_DIGITS = 15


class InputError(Exception):
    """Malformed configuration or spec file (exit status 2)."""


class CheckFailed(Exception):
    """A mathematical check did not hold (exit status 1); carries the report."""

    def __init__(self, report):
        super().__init__("check failed")
        self.report = report


# -- value formatting -------------------------------------------------------

def _num(x):
    return float(f"{float(x):.{SIG_DIGITS}g}")


def _complex(z):
    z = complex(z)
    return {"re": _num(z.real), "im": _num(z.imag)}


def _rational(x):
    x = F(x)
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def _jsonable(obj):
    if isinstance(obj, F):
        return _rational(obj)
    if isinstance(obj, bool) or obj is None or isinstance(obj, (int, str)):
        return obj
    if isinstance(obj, (float, np.floating)):
        return _num(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return _complex(obj)
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in obj]
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _text(obj, indent=0):
    pad = "  " * indent
    if isinstance(obj, dict):
        lines = []
        for k, v in obj.items():
            if isinstance(v, (dict, list)) and v and not _flat(v):
                lines.append(f"{pad}{k}:")
                lines.append(_text(v, indent + 1))
            else:
                lines.append(f"{pad}{k}: {_inline(v)}")
        return "\n".join(lines)
    if isinstance(obj, list):
        items = []
        for v in obj:
            if _flat(v):
                items.append(f"{pad}- {_inline(v)}")
            else:
                block = _text(v, indent + 1)
                items.append(pad + "- " + block[len(pad) + 2:])
        return "\n".join(items)
    return pad + _inline(obj)


def _flat(v):
    if isinstance(v, dict):
        return set(v) == {"re", "im"}
    if isinstance(v, list):
        # strings with spaces (series terms, messages) read better one per line
        return all((not isinstance(x, (dict, list)) or _flat(x)) and not (isinstance(x, str) and " " in x) for x in v)
    return True


def _inline(v):
    if isinstance(v, dict) and set(v) == {"re", "im"}:
        return f"{v['re']:+.{SIG_DIGITS}g}{v['im']:+.{SIG_DIGITS}g}j"
    if isinstance(v, list):
        return "[" + ", ".join(_inline(x) for x in v) + "]"
    return str(v)


# -- spec parsing --------------------------------------------------------------

def _rationals(values, what):
    if not isinstance(values, (list, tuple)):
        raise InputError(f"{what} must be a list")
    try:
        return tuple(ex.parse_rational(x) for x in values)
    except (ValueError, ZeroDivisionError) as err:
        raise InputError(f"{what}: {err} (use integers or 'p/q' strings)") from None


def _lattice(doc):
    if isinstance(doc, dict):
        unknown = set(doc) - {"gram", "an", "label"}
        if unknown:
            raise InputError(f"unknown lattice keys: {sorted(unknown)}")
        if "an" in doc:
            return cartan_an(int(doc["an"]))
        if "gram" in doc:
            gram = [_rationals(row, "lattice.gram row") for row in doc["gram"]]
            if any(x.denominator != 1 for row in gram for x in row):
                raise InputError("gram entries must be integers")
            try:
                return Lattice(tuple(tuple(int(x) for x in row) for row in gram), doc.get("label"))
            except ValueError as err:
                raise InputError(str(err)) from None
    raise InputError("lattice needs 'gram' or 'an'")


def _affine(doc, n, nvars, what):
    if doc is None:
        return AffineForm.zero(n, nvars)
    if isinstance(doc, list):
        # shorthand: direction * z_1
        direction = _rationals(doc, what)
        if len(direction) != n:
            raise InputError(f"{what} must have {n} entries")
        return AffineForm.linear(direction, 0, max(nvars, 1))
    if not isinstance(doc, dict) or set(doc) - {"lin", "tau", "const"}:
        raise InputError(f"{what} must be a list or a mapping with keys lin, tau, const")
    lin = tuple(_rationals(row, f"{what}.lin row") for row in doc.get("lin", [[0] * nvars] * n))
    tau = _rationals(doc.get("tau", [0] * n), f"{what}.tau")
    const = _rationals(doc.get("const", [0] * n), f"{what}.const")
    if len(lin) != n or len(tau) != n or len(const) != n or any(len(r) != nvars for r in lin):
        raise InputError(f"{what} has the wrong shape")
    return AffineForm(lin, tau, const)


def load_spec(path):
    """Parse a YAML spec file into a plain dict; syntax errors report line and column."""
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as err:
        raise InputError(f"cannot read spec file: {err}") from None
    try:
        doc = yaml.safe_load(text)
    except yaml.MarkedYAMLError as err:
        mark = err.problem_mark
        where = f"line {mark.line + 1}, column {mark.column + 1}" if mark else "unknown position"
        raise InputError(f"{path}: {where}: {err.problem}") from None
    if doc is None:
        return {}
    if not isinstance(doc, dict):
        raise InputError("the YAML document must be a mapping")
    unknown = set(doc) - SPEC_KEYS
    if unknown:
        raise InputError(f"unknown spec keys: {sorted(unknown)}")
    return doc


def build_spec(doc):
    """AppellSpec from a parsed spec dict."""
    if "psi" in doc:
        p = doc["psi"]
        if not isinstance(p, dict) or set(p) - {"n", "a", "b", "chamber"}:
            raise InputError("psi must be a mapping with keys n, a, b, chamber")
        chamber = ex.parse_rational(p["chamber"]) if "chamber" in p else None
        return psi_spec(int(p["n"]), int(p.get("a", 0)), int(p.get("b", 0)), chamber)
    if "lattice" not in doc:
        raise InputError("spec needs a 'lattice' (or a 'psi') entry")
    lat = _lattice(doc["lattice"])
    n = lat.rank
    dvecs = [_rationals(d, "dvectors entry") for d in doc.get("dvectors", [])]
    if any(x.denominator != 1 for d in dvecs for x in d):
        raise InputError("d-vectors must be integral")
    try:
        ds = DVectorSet(lat, tuple(tuple(int(x) for x in d) for d in dvecs))
    except ValueError as err:
        raise InputError(str(err)) from None
    z_im = _rationals(doc.get("z_im", []), "z_im")
    nvars = len(z_im)
    mu = _rationals(doc.get("mu", [0] * n), "mu")
    nu = _rationals(doc.get("nu", [0] * ds.depth), "nu")
    u = _affine(doc.get("u"), n, nvars, "u")
    v = _affine(doc.get("v"), n, nvars, "v")
    try:
        return AppellSpec(ds, mu, nu, u, v, z_im)
    except ValueError as err:
        raise InputError(str(err)) from None


def _dvector_set(doc):
    if "psi" in doc:
        return build_spec(doc).ds
    if "lattice" not in doc:
        raise InputError("spec needs a 'lattice' entry")
    lat = _lattice(doc["lattice"])
    dvecs = [tuple(int(x) for x in _rationals(d, "dvectors entry")) for d in doc.get("dvectors", [])]
    try:
        return DVectorSet(lat, tuple(dvecs))
    except ValueError as err:
        raise InputError(str(err)) from None


def _point(args):
    if args.tau is None:
        raise InputError("--tau RE IM is required")
    tau = complex(*args.tau)
    zs = tuple(complex(re, im) for re, im in args.z)
    try:
        return NumericPoint(tau, zs, args.tol)
    except ValueError as err:
        raise InputError(str(err)) from None


def _spec_point(spec, args):
    point = _point(args)
    if len(point.zs) != spec.nvars:
        raise InputError(f"this input has {spec.nvars} elliptic variable(s); give that many --z values")
    return point


# -- commands ------------------------------------------------------------------

def _series_report(series, fmt):
    if fmt == "text":
        return {"series": series.to_text().splitlines()}
    return {"series": series.to_json()}


def cmd_expand(args, doc):
    spec = build_spec(doc)
    fn = {"phi": phi, "phi-plus": phi_plus, "s": s_func}[args.kind]
    series = fn(spec, F(args.q_cutoff), args.w_window)
    return {"kind": args.kind, "terms": len(series.terms), **_series_report(series, args.format)}


def cmd_theta(args, doc):
    if "lattice" not in doc:
        raise InputError("theta needs a 'lattice' entry")
    lat = _lattice(doc["lattice"])
    z_im = _rationals(doc.get("z_im", []), "z_im")
    mu = _rationals(doc.get("mu", [0] * lat.rank), "mu")
    v = _affine(doc.get("v"), lat.rank, len(z_im), "v")
    series = theta_series(lat, mu, F(args.q_cutoff), v, z_im)
    return {"terms": len(series.terms), **_series_report(series, args.format)}


def cmd_psi(args, doc):
    p = doc.get("psi", {})
    n = args.n if args.n is not None else int(p.get("n", 3))
    a = args.a if args.a is not None else int(p.get("a", 0))
    b = args.b if args.b is not None else int(p.get("b", 0))
    if n < 1:
        raise InputError("n must be at least 1")
    direct, form, spec = psi_build(n, a, b, F(args.q_cutoff), args.w_window)
    ok, diff = series_compare(direct, form, F(args.q_cutoff))
    report = {"n": n, "a": a, "b": b, "equal": ok, "first_difference": diff,
              "d_vectors": [list(d) for d in spec.ds.vectors], "mu": list(spec.mu), "nu": list(spec.nu),
              **_series_report(form, args.format)}
    if not ok:
        raise CheckFailed(report)
    return report


def cmd_identities(args, doc):
    spec = build_spec(doc)
    names = args.only or list(IDENTITIES) + ["phi_mu0"]
    results = []
    for name in names:
        try:
            rep = verify_identity(name, spec, None, F(args.q_cutoff), args.w_window)
        except ValueError as err:
            results.append({"name": name, "passed": False, "error": str(err)})
            continue
        results.append({"name": name, "passed": rep.passed, "first_difference": rep.first_difference})
    report = {"results": results, "all_passed": all(r["passed"] for r in results)}
    if not report["all_passed"]:
        raise CheckFailed(report)
    return report


def cmd_lattice_info(args, doc):
    if args.an is not None:
        ds = DVectorSet(cartan_an(args.an), ())
    else:
        ds = _dvector_set(doc)
    info = dict(lattice_info(ds))
    report = {k: info[k] for k in ("rank", "det", "even", "depth")}
    for key in ("d_matrix", "det_d", "duals", "level"):
        if key in info:
            report[key] = info[key]
    n = ds.lattice.rank
    if ds.lattice.gram == cartan_an(n).gram:
        report["conjugacy_classes"] = [list(c) for c in conjugacy_classes(n)]
    return report


def cmd_glue(args, doc):
    ds = _dvector_set(doc)
    subset = tuple(s - 1 for s in (args.subset or ()))
    if any(not 0 <= s < ds.depth for s in subset):
        raise InputError(f"--subset indices must lie in 1..{ds.depth}")
    try:
        data = glue_vectors(ds, subset)
    except ValueError as err:
        raise InputError(str(err)) from None
    reps = [{"d_coords": list(r.d_coords), "vector": list(r.vector), "parallel": list(r.parallel),
             "perp": list(r.perp)} for r in data.representatives]
    return {"s_subset": [s + 1 for s in data.s_subset], "v_subset": [v + 1 for v in data.v_subset],
            "count": data.count, "representatives": reps}


def cmd_errfun(args, doc):
    e = doc.get("errfun")
    if not isinstance(e, dict) or set(e) - {"gram", "c_vectors", "x"} or not {"gram", "c_vectors", "x"} <= set(e):
        raise InputError("errfun-eval needs an 'errfun' mapping with keys gram, c_vectors, x")
    gram = tuple(tuple(float(v) for v in _rationals(row, "errfun.gram row")) for row in e["gram"])
    cvecs = tuple(tuple(float(v) for v in _rationals(c, "errfun.c_vectors entry")) for c in e["c_vectors"])
    x = tuple(float(v) for v in _rationals(e["x"], "errfun.x"))
    try:
        spec = ErrSpec(cvecs, gram, x)
        spec.frame()
    except ValueError as err:
        raise InputError(str(err)) from None
    e_val, e_err = e_p_estimate(spec)
    report = {"depth": spec.depth, "E": e_val, "E_error": e_err}
    try:
        m_val, m_err = m_p_estimate(spec)
        report.update({"M": m_val, "M_error": m_err})
    except ValueError as err:
        report["M_unavailable"] = str(err)
    return report


def cmd_complete_eval(args, doc):
    spec = build_spec(doc)
    point = _spec_point(spec, args)
    tau, u, v = numeric_arguments(spec, point)
    base = phi_plus_value(spec.ds, spec.mu, spec.nu, u, v, tau, point.tol)
    terms = completion_terms(spec.ds, spec.mu, spec.nu, u, v, tau, point.tol)
    terms.sort(key=lambda t: (t.size, t.v_subset, t.glue))
    structural = sum((t.value for t in terms), 0j)
    report = {"phi_plus": base,
              "terms": [{"L": t.size, "subset": [i + 1 for i in t.v_subset], "glue": list(t.glue),
                         "value": t.value, "bound": point.tol} for t in terms],
              "total": base + structural, "residuals": {}}
    if args.route == "both":
        direct = r_direct(spec.ds, spec.mu, spec.nu, u, v, tau, point.tol)
        diff = abs(direct - structural)
        report["residuals"]["two_route"] = diff
        if diff > args.check_tol:
            raise CheckFailed(report)
    return report


def cmd_modular_check(args, doc):
    spec = build_spec(doc)
    point = _spec_point(spec, args)
    gamma = args.gamma
    if gamma is None:
        gamma = (1, 0, 4 * level(spec.ds), 1)
    a, b, c, d = gamma
    if a * d - b * c != 1:
        raise InputError("gamma must have determinant 1")
    identity = ((1, 0), (0, 1))
    rep = modular_residual(spec, point, ((a, b), (c, d)))
    ident = modular_residual(spec, point, identity)
    report = {"gamma": [[a, b], [c, d]], "level": level(spec.ds), "weight": rep.weight, "value": rep.value,
              "image_value": rep.image_value, "predicted": rep.predicted,
              "residuals": {"gamma": rep.residual, "identity": ident.residual}}
    if rep.residual > args.check_tol or ident.residual != 0:
        raise CheckFailed(report)
    return report


def cmd_a3_check(args, doc):
    point = _point(args) if args.tau is not None else NumericPoint(1j, (complex(0.1, -0.06),), args.tol)
    if len(point.zs) != 1:
        raise InputError("a3-check takes exactly one --z value")
    result = a3_decomposition_check(point, F(args.q_cutoff), args.w_window or 12, args.check_tol,
                                    numeric=not args.exact_only)
    cases = []
    for index, case in enumerate(result.cases, 1):
        entry = {"case": index, "L": case.size, "subset": [i + 1 for i in case.v_subset],
                 "glue_count": case.glue_count, "nu_tilde": [list(t) for t in case.nu_tilde],
                 "series_equal": case.series_equal}
        if not args.exact_only:
            entry.update({"kernel_sum": case.direct, "factorized": case.structural,
                          "residual": abs(case.direct - case.structural)})
        cases.append(entry)
    report = {"cases": cases, "failures": result.failures, "passed": result.passed}
    if not result.passed:
        raise CheckFailed(report)
    return report


HANDLERS = {
    "expand": cmd_expand, "theta": cmd_theta, "psi": cmd_psi, "identities": cmd_identities,
    "lattice-info": cmd_lattice_info, "glue": cmd_glue, "errfun-eval": cmd_errfun,
    "complete-eval": cmd_complete_eval, "modular-check": cmd_modular_check, "a3-check": cmd_a3_check,
}


# -- argument parsing ----------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InputError(message)


def _common(p, q_cutoff=6, w_window=None):
    p.add_argument("--spec", help="YAML spec file")
    p.add_argument("--out", help="write the report here (atomically) instead of stdout")
    p.add_argument("--format", choices=("json", "text"), default="json")
    p.add_argument("--q-cutoff", type=F, default=F(q_cutoff), help="largest q-exponent kept")
    p.add_argument("--w-window", type=int, default=w_window, help="keep |w-exponents| <= this")
    p.add_argument("--tau", type=float, nargs=2, metavar=("RE", "IM"))
    p.add_argument("--z", type=float, nargs=2, metavar=("RE", "IM"), action="append", default=[])
    p.add_argument("--tol", type=float, default=1e-10, help="truncation tolerance of numerical sums")


def build_parser():
    parser = _Parser(prog="appellforms", description="Generalized Appell functions and their completions.")
    parser.add_argument("--version", action="version", version=f"appellforms {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("expand", help="q,w-expansion of Phi, Phi^+ or S")
    _common(p)
    p.add_argument("--kind", choices=("phi", "phi-plus", "s"), default="phi")
    p = sub.add_parser("theta", help="theta series of a lattice coset")
    _common(p)
    p = sub.add_parser("psi", help="Psi on A_n: direct expansion against the Phi-form")
    _common(p, q_cutoff=5, w_window=30)
    p.add_argument("--n", type=int)
    p.add_argument("--a", type=int)
    p.add_argument("--b", type=int)
    p = sub.add_parser("identities", help="exact transformation identities of Phi")
    _common(p, w_window=8)
    p.add_argument("--only", nargs="+", choices=list(IDENTITIES) + ["phi_mu0"])
    p = sub.add_parser("lattice-info", help="determinants, duals and conjugacy classes")
    _common(p)
    p.add_argument("--an", type=int, help="use the A_N root lattice instead of a spec file")
    p = sub.add_parser("glue", help="glue vectors for a subset S of the d-vectors")
    _common(p)
    p.add_argument("--subset", type=int, nargs="*", help="1-based indices of S")
    p = sub.add_parser("errfun-eval", help="generalized error functions E_P and M_P")
    _common(p)
    p = sub.add_parser("complete-eval", help="completed function at a numerical point")
    _common(p)
    p.add_argument("--route", choices=("structural", "both"), default="structural")
    p.add_argument("--check-tol", type=float, default=1e-5)
    p = sub.add_parser("modular-check", help="residual of the modular transformation")
    _common(p)
    p.add_argument("--gamma", type=int, nargs=4, metavar=("A", "B", "C", "D"))
    p.add_argument("--check-tol", type=float, default=1e-3)
    p = sub.add_parser("a3-check", help="case-by-case check of the A_3 decomposition")
    _common(p, q_cutoff=4)
    p.add_argument("--exact-only", action="store_true", help="skip the numerical kernel sums")
    p.add_argument("--check-tol", type=float, default=1e-5)
    return parser


def _provenance(args, spec_bytes):
    config = {k: v for k, v in sorted(vars(args).items()) if k not in ("out",)}
    return {
        "tool": "appellforms",
        "version": __version__,
        "command": args.command,
        "spec_sha256": hashlib.sha256(spec_bytes).hexdigest() if spec_bytes is not None else None,
        "config": config,
        "versions": {"python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__},
    }


def render(report, fmt):
    data = _jsonable(report)
    if fmt == "json":
        return json.dumps(data, indent=2) + "\n"
    return _text(data) + "\n"


def write_atomic(path, text):
    folder = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=folder, prefix=".appellforms-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except InputError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    start = time.perf_counter()
    status = 0
    try:
        spec_bytes = None
        if args.spec:
            with open(args.spec, "rb") as fh:
                spec_bytes = fh.read()
        doc = load_spec(args.spec)
        try:
            body = HANDLERS[args.command](args, doc)
        except CheckFailed as failed:
            body, status = failed.report, 1
    except (InputError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except (GenericityError, QuadratureError, ArithmeticError) as err:
        print(f"math error: {err}", file=sys.stderr)
        return 1
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    report = {"provenance": _provenance(args, spec_bytes), "result": body, "ok": status == 0}
    text = render(report, args.format)
    if args.out:
        write_atomic(args.out, text)
    else:
        sys.stdout.write(text)
    print(f"{args.command}: {'ok' if status == 0 else 'FAILED'} in {time.perf_counter() - start:.2f} s",
          file=sys.stderr)
    return status
