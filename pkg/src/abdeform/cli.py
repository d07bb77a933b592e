"""``abdeform`` command-line front end.

Exit status: 0 when every asserted check passes, 1 when a check fails,
2 for usage or parameter errors.  Reports are JSON with ``"schema": 1``;
CSV files hold bare columns and no metadata.  Wall-clock time only ever
appears in the optional run manifest.
"""
from __future__ import annotations

import argparse
import enum
import io
import json
import math
import os
import sys
import tempfile
import time
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from . import laxcurv, loopalgebra as la, nhd, qid, solutions
from .errors import AbDeformError, DomainError, ParameterError, SolverError
from .numerics import ComplexField, Grid, field_csv, parity_split

SCHEMA = 1
DEFAULT_GRID = "10,5,2001,1001"
FIGURES = ("f1sol", "f1", "f2", "f3", "f4")

# base tolerances; every one of them is multiplied by --tol-scale
TOL = {
    "ab_residual": 1e-6,
    "ab_residual_two_soliton": 1e-4,
    "normalization": 1e-6,
    "curvature": 1e-5,
    "image": 1e-4,
    "kernel": 1e-4,
    "nhd_closed_form": 1e-4,
    "plug_back": 1e-3,
    "drift": 1e-6,
    "figure_parity": 0.1,
}


class UsageError(Exception):
    pass


class Status(enum.Enum):
    PASS = "pass"
    FAIL = "fail"


@dataclass
class RunManifest:
    command: str
    parameters: dict
    grid: str
    tool_version: str = __version__
    wall_time: float = 0.0
    verdicts: dict = field(default_factory=dict)


# -----------------------------------------------------------------------------
# Output helpers
# -----------------------------------------------------------------------------

def _plain(obj):
    """Convert numpy scalars, complex numbers, enums and non-finite floats for JSON."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [_plain(float(obj.real)), _plain(float(obj.imag))]
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    return obj


def dumps(report: dict) -> str:
    return json.dumps(_plain({"schema": SCHEMA, **report}), indent=2, sort_keys=True) + "\n"


def atomic_write(path: str, text: str) -> None:
    """Write through a temporary file in the target directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        umask = os.umask(0)
        os.umask(umask)
        os.chmod(tmp, 0o666 & ~umask)
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def table_csv(columns: dict) -> str:
    """CSV from equally long 1-D columns, ``%.17g`` throughout."""
    names = list(columns)
    data = np.column_stack([np.asarray(columns[n], dtype=float) for n in names])
    buf = io.StringIO()
    buf.write(",".join(names) + "\n")
    np.savetxt(buf, data, fmt="%.17g", delimiter=",")
    return buf.getvalue()


def parse_params(text: str | None) -> dict:
    """``"a1=1.1,a2=1"`` -> ``{"a1": 1.1, "a2": 1.0}``."""
    out = {}
    if not text:
        return out
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        key, sep, val = item.partition("=")
        if not sep:
            raise ParameterError(f"parameter {item!r} is not key=value")
        try:
            out[key.strip()] = float(val)
        except ValueError:
            raise ParameterError(f"parameter {key!r} needs a real value, got {val!r}") from None
    return out


def parse_solution(text: str) -> tuple:
    """``"one_soliton:g=1.5,d=0"`` -> ``("one_soliton", {...})``."""
    name, _, rest = text.partition(":")
    return name.strip(), parse_params(rest)


def parse_lambda(text: str) -> complex:
    parts = text.split(",")
    try:
        if len(parts) == 1:
            return complex(parts[0].replace("i", "j"))
        if len(parts) == 2:
            return complex(float(parts[0]), float(parts[1]))
    except ValueError:
        pass
    raise ParameterError(f"spectral parameter must be 're,im', got {text!r}")


def parse_ns(text: str) -> list:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ParameterError(f"charge list must be integers, got {text!r}") from None


class Checks:
    """Named pass/fail verdicts collected during one run."""

    def __init__(self, scale: float):
        self.scale = scale
        self.items = {}

    def at_most(self, name: str, value: float, tol_key: str) -> bool:
        tol = TOL[tol_key] * self.scale
        ok = bool(np.isfinite(value) and value <= tol)
        self.items[name] = {"value": value, "tolerance": tol,
                            "status": (Status.PASS if ok else Status.FAIL).value}
        return ok

    def flag(self, name: str, ok: bool, detail=None) -> bool:
        self.items[name] = {"status": (Status.PASS if ok else Status.FAIL).value}
        if detail is not None:
            self.items[name]["detail"] = detail
        return ok

    @property
    def passed(self) -> bool:
        return all(v["status"] == Status.PASS.value for v in self.items.values())


# -----------------------------------------------------------------------------
# Subcommands
# -----------------------------------------------------------------------------

def cmd_solution(args, grid, checks) -> dict:
    params = parse_params(args.params)
    built = solutions.build(args.name, params, grid)
    report = {"command": "solution", "name": args.name, "params": params, "grid": grid.spec()}
    if isinstance(built, ComplexField):
        report["kind"] = "ansatz"
        report["max_abs"] = built.max_abs()
        field_ = built
    else:
        report["kind"] = "solution"
        res = solutions.ab_residuals(built)
        report["residuals"] = res.to_dict()
        key = "ab_residual_two_soliton" if args.name == "two_soliton" else "ab_residual"
        checks.at_most("r1", res.r1_norm, key)
        checks.at_most("r2", res.r2_norm, key)
        if args.name == "one_soliton":
            checks.at_most("normalization", res.norm_residual, "normalization")
        field_ = built.A if args.field == "A" else built.B
    if args.csv:
        atomic_write(args.csv, field_csv(field_))
    return report


def cmd_verify(args, grid, checks) -> dict:
    name, params = parse_solution(args.solution)
    s = solutions.build(name, params, grid)
    if isinstance(s, ComplexField):
        raise ParameterError(f"{name} is an ansatz, not an AB solution")
    lams = ([parse_lambda(v) for group in args.lam for v in group.split(";") if v.strip()]
            if args.lam else list(laxcurv.DEFAULT_LAMBDAS))
    report = {"command": "verify", "solution": name, "params": params, "grid": grid.spec()}
    suite = args.suite
    if suite in ("curvature", "all"):
        rows = []
        for lam in lams:
            norms = laxcurv.curvature_channels(s, lam).norms()
            rows.append({"lambda": lam, **norms})
            checks.at_most(f"curvature[{lam.real:g},{lam.imag:g}]", max(norms.values()), "curvature")
        report["curvature"] = rows
    if suite in ("residuals", "all"):
        res = solutions.ab_residuals(s)
        report["residuals"] = res.to_dict()
        key = "ab_residual_two_soliton" if name == "two_soliton" else "ab_residual"
        checks.at_most("r1", res.r1_norm, key)
        checks.at_most("r2", res.r2_norm, key)
    if suite in ("abelianization", "all"):
        ab = la.verify_abelianization(s, args.kappa)
        report["abelianization"] = ab.to_dict()
        img, ker = ab.asserted_max()
        checks.at_most("image", img, "image")
        checks.at_most("kernel", ker, "kernel")
    return report


def cmd_nhd(args, grid, checks) -> dict:
    params = parse_params(args.params)
    built = solutions.build(args.ansatz, params, grid)
    A_d = built if isinstance(built, ComplexField) else built.A
    r = nhd.nhd_from_ansatz(A_d)
    nhd.nhd_constraint_residuals(r, A_d)
    report = {"command": "nhd", "ansatz": args.ansatz, "params": params, "grid": grid.spec(),
              **r.summary()}
    if args.ansatz in ("one_soliton", "kink"):
        if args.ansatz == "one_soliton":
            cf = nhd.nhd_closed_forms("one_soliton", grid, g_hat=params.get("g", params.get("g_hat", 1.5)),
                                      delta=params.get("d", params.get("delta", 0.0)))
        else:
            cf = nhd.nhd_closed_forms("kink", grid, a=params.get("a", 1.5),
                                      delta=params.get("d", params.get("delta", 0.0)))
        dev = nhd.compare(r, cf)
        report["closed_form_deviation"] = dev
        if cf.printed:
            report["printed_form_deviation"] = nhd.compare(r, cf, printed=True)
        for k, v in dev.items():
            checks.at_most(f"closed_form[{k}]", v, "nhd_closed_form")
    if args.csv:
        X, T = grid.mesh()
        cols = {"x": X.T.ravel(), "t": T.T.ravel()}
        for name, f in (("v2", r.v2), ("u2", r.u2), ("beta", r.beta_d)):
            vals = _masked(f.values, f.singular).T.ravel()
            cols[f"re_{name}"] = vals.real
            cols[f"im_{name}"] = vals.imag
        atomic_write(args.csv, table_csv(cols))
    return report


def _masked(values, mask):
    """Singular nodes become NaN in CSV output (both parts for complex data)."""
    if mask is None:
        return values
    fill = complex(np.nan, np.nan) if np.iscomplexobj(values) else np.nan
    return np.where(mask, fill, values)


def _quiet_qid(base, cfg, a1=None):
    """``qid_solution`` with the perturbative-sanity warning kept in ``run.status`` only."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return qid.qid_solution(base, cfg, a1=a1)


def _qid_base(name: str, params: dict, grid: Grid):
    if name not in ("one_soliton", "two_soliton"):
        raise ParameterError("qid base must be one_soliton or two_soliton")
    return solutions.build(name, params, grid)


def cmd_qid(args, grid, checks) -> dict:
    params = parse_params(args.params)
    base = _qid_base(args.base, params, grid)
    cfg = qid.QidConfig(epsilon=args.epsilon, boundary=args.boundary)
    report = {"command": "qid", "base": args.base, "params": params, "grid": grid.spec()}
    try:
        a1, info = qid.solve_first_order(base, cfg, return_info=True)
    except SolverError as exc:
        checks.flag("solver", False, {"message": str(exc), **exc.diagnostics})
        return report
    run = _quiet_qid(base, cfg, a1)
    run.info["solver"] = info.__dict__
    pb = qid.plug_back_residual(base, a1)
    report["plug_back"] = pb
    checks.at_most("plug_back", pb["relative"], "plug_back")
    report.update(qid.qid_report(run, kappa=args.kappa))
    if args.csv:
        X, T = grid.mesh()
        atomic_write(args.csv, table_csv({
            "x": X.T.ravel(), "t": T.T.ravel(),
            "A_re": run.A.values.real.T.ravel(), "A_im": run.A.values.imag.T.ravel(),
            "B": run.B.values.real.T.ravel(),
            "A1_re": a1.values.real.T.ravel(), "A1_im": a1.values.imag.T.ravel(),
            "X1_im": run.anomaly1.values.imag.T.ravel(),
        }))
    return report


def cmd_charges(args, grid, checks) -> dict:
    name, params = parse_solution(args.solution)
    s = solutions.build(name, params, grid)
    if isinstance(s, ComplexField):
        raise ParameterError(f"{name} is an ansatz, not an AB solution")
    ns = parse_ns(args.n)
    report = {"command": "charges", "solution": name, "params": params, "grid": grid.spec()}
    if args.epsilon is not None:
        base = _qid_base(name, params, grid)
        run = _quiet_qid(base, qid.QidConfig(epsilon=args.epsilon))
        s = run.solution
        report["status"] = run.status
        report["epsilon"] = args.epsilon
    series = la.charges(s, ns, args.kappa)
    report["charges"] = {str(c.n): {"q_at_t0": c.q_of_t[int(np.argmin(np.abs(c.t)))],
                                    "drift": c.drift()} for c in series}
    balance_ns = [n for n in ns if n != 2]
    if balance_ns:
        report["balance"] = {str(b.n): b.to_dict() for b in
                             la.charge_balance(s, balance_ns, args.kappa,
                                               series=[c for c in series if c.n != 2])}
    if args.epsilon is None:
        for c in series:
            checks.at_most(f"drift[{c.n}]", c.drift(), "drift")
    if args.csv:
        cols = {k: [] for k in ("t", "n", "re_q", "im_q", "re_flux", "im_flux")}
        for c in series:
            cols["t"].append(grid.t)
            cols["n"].append(np.full(grid.nt, c.n))
            cols["re_q"].append(c.q_of_t.real)
            cols["im_q"].append(c.q_of_t.imag)
            cols["re_flux"].append(c.flux_of_t.real)
            cols["im_flux"].append(c.flux_of_t.imag)
        atomic_write(args.csv, table_csv({k: np.concatenate(v) for k, v in cols.items()}))
    return report


# --- figures ------------------------------------------------------------------

def _stride(n: int, target: int) -> int:
    return max(1, (n - 1) // (target - 1))


def _surface(grid: Grid, fields: dict, target=(201, 101)) -> dict:
    sx, st = _stride(grid.nx, target[0]), _stride(grid.nt, target[1])
    X, T = grid.mesh()
    pick = (slice(None, None, sx), slice(None, None, st))
    cols = {"x": X[pick].T.ravel(), "t": T[pick].T.ravel()}
    for k, v in fields.items():
        cols[k] = np.asarray(v)[pick].T.ravel()
    return cols


def _profiles(grid: Grid, fields: dict, times, target=401) -> dict:
    sx = _stride(grid.nx, target)
    xs = grid.x[::sx]
    cols = {"x": [], "t": []}
    for k in fields:
        cols[k] = []
    for t in times:
        j = grid.t_index(t)
        cols["x"].append(xs)
        cols["t"].append(np.full(xs.shape, grid.t[j]))
        for k, v in fields.items():
            cols[k].append(np.asarray(v)[::sx, j])
    return {k: np.concatenate(v) for k, v in cols.items()}


def _nhd_figure(grid: Grid, name: str, params: dict) -> dict:
    built = solutions.build(name, params, grid)
    A_d = built if isinstance(built, ComplexField) else built.A
    r = nhd.nhd_from_ansatz(A_d)
    cols = _surface(grid, {
        "A_abs": np.abs(A_d.values),
        "v2_abs": np.abs(r.v2.values),
        "u2_abs": _masked(np.abs(r.u2.values), r.u2.singular),
        "beta_re": _masked(r.beta_d.values.real, r.beta_d.singular),
    })
    return cols, {"classification": r.classification.value, **r.diagnostics}


def _qid_figure(grid: Grid, name: str, params: dict, epsilon: float, times, checks,
                anomaly_check: bool, parity_check: bool) -> tuple:
    base = solutions.build(name, params, grid)
    cfg = qid.QidConfig(epsilon=epsilon)
    a1 = qid.solve_first_order(base, cfg)
    run = _quiet_qid(base, cfg, a1)
    X1 = run.anomaly1.values
    info = {"epsilon": epsilon, "status": run.status}
    amp = float(np.max(np.abs(epsilon * X1)))
    a0 = base.A.max_abs()
    info["max_eps_anomaly1"] = amp
    info["max_abs_A0"] = a0
    if anomaly_check:
        checks.flag("anomaly_below_A0", amp < a0, {"max_eps_anomaly1": amp, "max_abs_A0": a0})
    rep = parity_split(a1, "space_time")[2]
    info["A1_parity"] = rep.to_dict()
    if parity_check:
        even_ratio = rep.odd_norm / rep.even_norm if rep.even_norm > 0 else float("inf")
        checks.at_most("A1_even_parity_ratio", even_ratio, "figure_parity")
    cols = _profiles(grid, {
        "A0_abs": np.abs(base.A.values), "B0": base.B.values.real, "X1_im": X1.imag,
        "A1_abs": np.abs(a1.values), "A_abs": np.abs(run.A.values), "B": run.B.values.real,
    }, times)
    return cols, info


_PLOT_HEAD = 'set datafile separator ","\nset key autotitle columnhead\nset terminal pngcairo size 1200,900\n'


def _plot_script(which: str, csv_name: str, kind: str) -> str:
    out = [_PLOT_HEAD, f'set output "{which}.png"\n']
    if kind == "surface":
        out.append("set multiplot layout 2,2\nset xlabel \"x\"\nset ylabel \"t\"\n")
        for i, col in enumerate(("A_abs", "v2_abs", "u2_abs", "beta_re")):
            out.append(f'set title "{col}"\nsplot "{csv_name}" using 1:2:{i + 3} with dots notitle\n')
        out.append("unset multiplot\n")
    else:
        out.append("set multiplot layout 1,2\nset xlabel \"x\"\n")
        out.append('set title "undeformed fields and first-order anomaly"\n')
        out.append(f'plot "{csv_name}" using 1:(abs($2-T0)<1e-9 ? $3 : 1/0) with lines title "|A0|", \\\n'
                   f'     "" using 1:(abs($2-T0)<1e-9 ? $4 : 1/0) with lines title "B0", \\\n'
                   f'     "" using 1:(abs($2-T0)<1e-9 ? $5 : 1/0) with lines title "Im X1"\n')
        out.append('set title "deformed fields"\n')
        out.append(f'plot "{csv_name}" using 1:(abs($2-T0)<1e-9 ? $6 : 1/0) with lines title "|A1|", \\\n'
                   f'     "" using 1:(abs($2-T0)<1e-9 ? $7 : 1/0) with lines title "|A|", \\\n'
                   f'     "" using 1:(abs($2-T0)<1e-9 ? $8 : 1/0) with lines title "B"\n')
        out.append("unset multiplot\n")
        out.insert(1, "T0 = 0\n")
    return "".join(out)


def cmd_figures(args, grid, checks) -> dict:
    which = args.which
    info = {}
    if which == "f1sol":
        cols, info = _nhd_figure(grid, "one_soliton", {"g": 1.5, "d": 0.0})
        kind = "surface"
    elif which == "f1":
        cols, info = _nhd_figure(grid, "two_soliton", {"a1": 1.1, "a2": 1.0})
        kind = "surface"
    elif which == "f3":
        cols, info = _nhd_figure(grid, "kink", {"a": 1.5, "d": 0.0})
        kind = "surface"
    elif which == "f2":
        cols, info = _qid_figure(grid, "one_soliton", {"g": 1.5, "d": 0.0}, 0.5,
                                 (0.0, 0.5, 1.0, 1.5), checks, anomaly_check=True, parity_check=False)
        kind = "profile"
    else:
        cols, info = _qid_figure(grid, "two_soliton", {"a1": 1.1, "a2": 1.0}, 0.1,
                                 (0.0,), checks, anomaly_check=False, parity_check=True)
        kind = "profile"
    os.makedirs(args.out, exist_ok=True)
    csv_name = f"{which}.csv"
    atomic_write(os.path.join(args.out, csv_name), table_csv(cols))
    atomic_write(os.path.join(args.out, f"{which}.plot"), _plot_script(which, csv_name, kind))
    return {"command": "figures", "which": which, "grid": grid.spec(), "out": [csv_name, f"{which}.plot"],
            "rows": int(len(cols["x"])), "info": info}


# -----------------------------------------------------------------------------
# Parser and dispatch
# -----------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _global_options(suppress: bool) -> argparse.ArgumentParser:
    """Options accepted before or after the subcommand.

    The subcommand copy carries no defaults, so a flag given before the
    subcommand is not reset when the subparser runs.
    """
    def dflt(value):
        return argparse.SUPPRESS if suppress else value

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--grid", default=dflt(DEFAULT_GRID),
                        help=f"X,T,nx,nt half-widths and node counts (default {DEFAULT_GRID})")
    common.add_argument("--kappa", type=int, choices=(1, -1), default=dflt(1),
                        help="sign of the loop-algebra normalization (default 1)")
    common.add_argument("--tol-scale", type=float, default=dflt(1.0),
                        help="multiply every asserted tolerance by this factor (default 1)")
    common.add_argument("--json", default=dflt(None),
                        help="write the JSON report here instead of stdout")
    common.add_argument("--manifest", default=dflt(None),
                        help="write a run manifest (includes wall time) here")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _global_options(suppress=True)

    p = _Parser(prog="abdeform", description="AB system solutions, deformations and checks.",
                parents=[_global_options(suppress=False)])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("solution", parents=[common], help="evaluate a catalog solution or ansatz")
    s.add_argument("--name", required=True, choices=solutions.CATALOG)
    s.add_argument("--params", default="", help="key=value list, e.g. g=1.5,d=0")
    s.add_argument("--field", choices=("A", "B"), default="A")
    s.add_argument("--out", "--csv", dest="csv", help="write the field as x,t,re,im")
    s.set_defaults(func=cmd_solution)

    v = sub.add_parser("verify", parents=[common], help="zero-curvature and related checks")
    v.add_argument("--solution", default="one_soliton:g=1.5,d=0", help="name:key=value,...")
    v.add_argument("--lambda", dest="lam", action="append",
                   help="spectral parameters re,im[;re,im...] (repeatable; default 1;i;0.5+0.5i;2)")
    v.add_argument("--suite", choices=("curvature", "residuals", "abelianization", "all"),
                   default="curvature")
    v.set_defaults(func=cmd_verify)

    n = sub.add_parser("nhd", parents=[common], help="non-holonomic deformation of an ansatz")
    n.add_argument("--ansatz", required=True, choices=("one_soliton", "two_soliton", "kink", "kk", "kak"))
    n.add_argument("--params", default="")
    n.add_argument("--csv", help="write |A_d|, |v2|, |u2|, beta_d on the grid")
    n.set_defaults(func=cmd_nhd)

    q = sub.add_parser("qid", parents=[common], help="first-order quasi-integrable deformation")
    q.add_argument("--base", required=True, choices=("one_soliton", "two_soliton"))
    q.add_argument("--params", default="")
    q.add_argument("--epsilon", type=float, default=0.1, help="deformation parameter (default 0.1)")
    q.add_argument("--boundary", choices=qid.BOUNDARIES, default="upwind",
                   help="edge where the x-antiderivative is anchored (default upwind)")
    q.add_argument("--csv", help="write A, B, A1 and X1 on the grid")
    q.set_defaults(func=cmd_qid)

    c = sub.add_parser("charges", parents=[common], help="charge series and balance")
    c.add_argument("--solution", default="one_soliton:g=1.5,d=0")
    c.add_argument("--n", default="1,2,3,4", help="charge indices (default 1,2,3,4)")
    c.add_argument("--epsilon", type=float, help="evaluate on the first-order deformed pair")
    c.add_argument("--csv", help="write Q(t) and flux(t) per charge")
    c.set_defaults(func=cmd_charges)

    f = sub.add_parser("figures", parents=[common], help="figure data and gnuplot scripts")
    f.add_argument("--which", required=True, choices=FIGURES)
    f.add_argument("--out", required=True, help="output directory")
    f.set_defaults(func=cmd_figures)
    return p


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not (args.tol_scale > 0 and math.isfinite(args.tol_scale)):
            raise ParameterError("--tol-scale must be a positive real")
        grid = Grid.parse(args.grid)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 2
    except ParameterError as exc:
        print(f"abdeform: error: {exc}", file=sys.stderr)
        return 2
    checks = Checks(args.tol_scale)
    start = time.perf_counter()
    try:
        report = args.func(args, grid, checks)
    except (ParameterError, DomainError) as exc:
        print(f"abdeform: error: {exc}", file=sys.stderr)
        return 2
    except AbDeformError as exc:
        checks.flag("run", False, str(exc))
        report = {"command": args.command, "error": str(exc)}
    report["kappa"] = args.kappa
    report["tol_scale"] = args.tol_scale
    report["checks"] = checks.items
    report["passed"] = checks.passed
    text = dumps(report)
    if args.json:
        atomic_write(args.json, text)
    else:
        sys.stdout.write(text)
    if args.manifest:
        manifest = RunManifest(args.command, {"argv": argv}, grid.spec(),
                               wall_time=time.perf_counter() - start,
                               verdicts={k: v["status"] for k, v in checks.items.items()})
        atomic_write(args.manifest, dumps({"manifest": asdict(manifest)}))
    return 0 if checks.passed else 1


if __name__ == "__main__":
    sys.exit(main())
