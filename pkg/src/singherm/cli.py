"""Command line front end: ``singherm analyze|regularize|verify-counterexample|psh-test|nakano-test|export``.

Exit codes: 0 when every verdict passes, 1 on an analytic failure, 2 on a
usage or configuration error.  Reports are JSON (structured verdicts) or CSV
(one table per command); both carry ``schema_version`` and contain nothing
that depends on the wall clock, so identical configurations give
byte-identical files.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from dataclasses import asdict, dataclass

import numpy as np

from . import catalog, chern, psh
from . import regularize as reg
from . import symbolic
from .grid import GridError, GridSpec, annular_bump, radial_bump, volume_form_density
from .hermitian import SingularMetricError
from .metric import MetricField, SectionField, det_field, log_det_field

SCHEMA_VERSION = 1
EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    """Everything a command needs; the seed has no default on purpose."""

    seed: int
    metric: str = "identity"
    params: tuple = ()
    rank: int | None = None
    dim: int | None = None
    grid: int = 128
    radius: float = 0.5
    nu_start: float = 4.0
    nu_steps: int = 4
    delta: float = 0.0
    p: tuple = (1.0,)
    tol: float | None = None
    floor: float = 1e-6
    annuli: int = 8
    out: str | None = None
    fmt: str = "json"

    def __post_init__(self):
        if not isinstance(self.seed, (int, np.integer)):
            raise UsageError("seed must be an integer")
        if self.tol is not None and not self.tol > 0:
            raise UsageError("tolerances must be positive")
        if not self.floor > 0:
            raise UsageError("floor must be positive")
        if self.grid < 8 or self.grid % 2:
            raise UsageError("--grid must be an even integer >= 8")
        if not self.radius > 0:
            raise UsageError("--radius must be positive")
        if not self.nu_start > 0 or self.nu_steps < 1:
            raise UsageError("nu schedule must be positive and nonempty")
        if self.delta < 0:
            raise UsageError("--delta must be nonnegative")
        if self.fmt not in ("json", "csv"):
            raise UsageError("--format must be json or csv")
        if any(not 0 < q for q in self.p):
            raise UsageError("--p exponents must be positive")

    @property
    def nu_schedule(self) -> list[float]:
        return reg.geometric_schedule(self.nu_start, self.nu_steps)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["params"] = dict(self.params)
        d.pop("out")
        return d


# ------------------------------------------------------------------ helpers


def _entry(cfg: RunConfig) -> catalog.CatalogEntry:
    key = catalog.ALIASES.get(cfg.metric, cfg.metric)
    if key not in catalog._BUILDERS:
        raise UsageError(f"unknown metric {cfg.metric!r}; choose from {', '.join(catalog.names())}")
    builder = catalog._BUILDERS[key]
    params = dict(cfg.params)
    sig = _SIGNATURES[key]
    if cfg.rank is not None:
        if "r" not in sig:
            raise UsageError(f"metric {key} has a fixed rank")
        params["r"] = cfg.rank
    if cfg.dim is not None:
        if "n" not in sig:
            raise UsageError(f"metric {key} has a fixed dimension")
        params["n"] = cfg.dim
    unknown = set(params) - set(sig)
    if unknown:
        raise UsageError(f"metric {key} does not take {sorted(unknown)}")
    try:
        return builder(**params)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from exc


_SIGNATURES = {
    "identity": ("r", "n"), "paper-counterexample": (), "lelong": ("a", "r", "n"),
    "fubini+": ("r", "n"), "fubini-": ("r", "n"), "gauss+": ("r", "n"), "gauss-": ("r", "n"),
    "diag-psh": ("profiles", "a", "n"), "cont-nakano": ("r", "n"),
}


def _parse_param(text: str):
    if "=" not in text:
        raise argparse.ArgumentTypeError("expected key=value")
    k, v = text.split("=", 1)
    k = k.strip()
    for cast in (int, float):
        try:
            return k, cast(v)
        except ValueError:
            pass
    return k, v.strip()


def _spec(cfg: RunConfig, entry) -> GridSpec:
    return GridSpec(entry.dim, 0.0, cfg.radius, cfg.grid)


def _clean(obj):
    """JSON-safe copy: numpy scalars to python, complex to ``[re, im]``, non-finite to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [_clean(float(obj.real)), _clean(float(obj.imag))]
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    if isinstance(v, (tuple, list)):
        return " ".join(_fmt(x) for x in v)
    return str(v)


def render(report: dict, table: list[dict], fmt: str) -> str:
    if fmt == "json":
        body = dict(report, schema_version=SCHEMA_VERSION)
        return json.dumps(_clean(body), sort_keys=True, indent=2) + "\n"
    buf = io.StringIO()
    if table:
        cols = ["schema_version"] + list(table[0].keys())
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for row in table:
            w.writerow([str(SCHEMA_VERSION)] + [_fmt(row[c]) for c in cols[1:]])
    return buf.getvalue()


def write_atomic(path: str, text: str) -> None:
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".singherm-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(cfg: RunConfig, report: dict, table: list[dict], stream=None) -> None:
    report = dict(report, config=cfg.to_dict())
    text = render(report, table, cfg.fmt)
    if cfg.out:
        write_atomic(cfg.out, text)
    else:
        (stream or sys.stdout).write(text)


def _loc(spec: GridSpec, idx) -> str:
    if idx is None:
        return ""
    zs = [spec.coordinate(j)[tuple(idx)].item() for j in range(spec.dim)]
    return ";".join("%.6g%+.6gj" % (z.real, z.imag) for z in zs)


def _row(test, spec, points, margin, loc, verdict):
    return {"test": test, "point_count": int(points), "worst_margin": float(margin),
            "worst_location": _loc(spec, loc), "verdict": verdict}


# ------------------------------------------------------------------ commands


def _testable(h: MetricField, cfg: RunConfig):
    """Metric to run pointwise curvature tests on: ``h`` itself if smooth, else ``h_nu`` at the last ``nu``."""
    if h.smoothness == "smooth":
        return h, None
    nu = cfg.nu_schedule[-1]
    return reg.mollify(h, nu), nu


def _bochner_rows(h: MetricField, spec: GridSpec, cfg: RunConfig, theta) -> list[dict]:
    rows = []
    n, r = spec.dim, h.rank
    xi = np.ones(n) / np.sqrt(n)
    sections = [SectionField.monomial((0,) * n, a, r) for a in range(r)]
    sections += [SectionField.monomial(tuple(1 if i == 0 else 0 for i in range(n)), a, r) for a in range(r)]
    d2 = spec.max_spacing ** 2
    for i, u in enumerate(sections):
        res = chern.bochner_residual(h, u, xi, theta)
        vals = np.abs(res.values[res.mask])
        sup = float(vals.max())
        k = int(np.flatnonzero(res.mask)[int(np.argmax(vals))])
        loc = np.unravel_index(k, res.mask.shape)
        tol = 10 * d2 * (1 + float(np.abs(h.values[h.mask]).max()))
        rows.append(_row(f"bochner[{i}]", spec, res.mask.sum(), -sup, loc, psh.PASS if sup <= tol else psh.FAIL))
    return rows


def _log_det_psh(h: MetricField, cfg: RunConfig) -> psh.PshReport:
    """``log det h`` on ``{det h > floor}``; sub-mean test unless the field is C^2 on the whole grid."""
    ld = log_det_field(h)
    keep = ld.mask & (det_field(h).values.real > cfg.floor)
    smooth = h.smoothness == "smooth" and bool(np.all(keep[h.mask]))
    return psh.is_psh(ld.with_mask(keep), "hessian" if smooth else "submean", cfg.tol)


def cmd_analyze(cfg: RunConfig, stream=None) -> int:
    """Griffiths, Nakano, log det psh and Bochner residual verdicts for one metric."""
    entry = _entry(cfg)
    spec = _spec(cfg, entry)
    h = MetricField.from_catalog(entry, spec)
    tol = cfg.tol if cfg.tol is not None else 1e-9
    hs, nu = _testable(h, cfg)
    region = None
    theta = chern.curvature(hs, cfg.floor, region)
    g = chern.griffiths_test(hs, theta, cfg.delta, tol=tol, seed=cfg.seed)
    nk = chern.nakano_test(hs, theta, cfg.delta, tol=tol)
    rows = [
        _row("griffiths", spec, g.point_count, g.worst_margin, g.worst_location, psh.PASS if g.passed else psh.FAIL),
        _row("nakano", spec, nk.point_count, nk.worst_margin, nk.worst_location, psh.PASS if nk.passed else psh.FAIL),
    ]
    lp = _log_det_psh(h, cfg)
    rows.append(_row("log_det_psh", spec, lp.point_count, lp.worst_margin, lp.worst_location, lp.verdict))
    if hs.smoothness == "smooth" and entry.smoothness == "smooth":
        rows += _bochner_rows(hs, spec, cfg, theta)
    verdicts = [r["verdict"] for r in rows]
    report = {
        "command": "analyze", "metric": entry.describe(), "grid": spec.to_dict(),
        "mollified_nu": nu, "griffiths": g.to_dict(), "nakano": nk.to_dict(),
        "log_det_psh": lp.to_dict(), "tests": rows,
        "passed": psh.FAIL not in verdicts,
    }
    _emit(cfg, report, rows, stream)
    return EXIT_OK if report["passed"] else EXIT_FAIL


def cmd_psh_test(cfg: RunConfig, stream=None) -> int:
    """psh tests of |u|_h^2 over a seeded section corpus, plus log det h."""
    entry = _entry(cfg)
    spec = _spec(cfg, entry)
    h = MetricField.from_catalog(entry, spec)
    method = "hessian" if h.smoothness == "smooth" else "submean"
    g = psh.griffiths_negative_test(h, method=method, tol=cfg.tol, seed=cfg.seed)
    lp = _log_det_psh(h, cfg)
    rows = [_row("griffiths_corpus", spec, g.point_count, g.worst_margin, g.worst_location, g.verdict),
            _row("log_det_psh", spec, lp.point_count, lp.worst_margin, lp.worst_location, lp.verdict)]
    report = {"command": "psh-test", "metric": entry.describe(), "grid": spec.to_dict(),
              "griffiths_corpus": g.to_dict(), "log_det_psh": lp.to_dict(), "tests": rows,
              "passed": all(r["verdict"] != psh.FAIL for r in rows)}
    _emit(cfg, report, rows, stream)
    return EXIT_OK if report["passed"] else EXIT_FAIL


def cmd_nakano_test(cfg: RunConfig, stream=None) -> int:
    """Nakano form test along a mollification schedule."""
    entry = _entry(cfg)
    spec = _spec(cfg, entry)
    h = MetricField.from_catalog(entry, spec)
    rep = psh.nakano_negative_test(h, delta=cfg.delta, tol=cfg.tol, floor=cfg.floor,
                                   nu_schedule=cfg.nu_schedule, seed=cfg.seed)
    p1 = rep.part_i
    rows = [_row("nakano_form", spec, p1.point_count, p1.worst_margin, p1.worst_location, p1.verdict)]
    for nu, r in rep.part_ii:
        name = "nakano_pencil" if nu is None else f"nakano_pencil[nu={nu:g}]"
        rows.append(_row(name, spec, r.point_count, r.worst_margin, r.worst_location,
                         psh.PASS if r.passed else psh.FAIL))
    report = {"command": "nakano-test", "metric": entry.describe(), "grid": spec.to_dict(),
              "result": rep.to_dict(), "tests": rows, "passed": rep.verdict != psh.FAIL}
    _emit(cfg, report, rows, stream)
    return EXIT_OK if report["passed"] else EXIT_FAIL


def _trace_pairing(h: MetricField, phi, floor):
    p = reg.curvature_pairings(h, np.ones(h.spec.dim) / np.sqrt(h.spec.dim), [phi], floor)
    return complex(np.trace(p[0]))


def cmd_regularize(cfg: RunConfig, stream=None) -> int:
    """Mollify along a geometric schedule and report convergence diagnostics per step."""
    entry = _entry(cfg)
    spec = _spec(cfg, entry)
    h = MetricField.from_catalog(entry, spec)
    nus = cfg.nu_schedule
    ms = [reg.mollify(h, nu) for nu in nus]
    R = cfg.radius
    mono = reg.monotonicity_check(h, nus, metrics=ms)
    uniform = None
    if h.smoothness != "measurable":
        uniform = reg.uniform_convergence_check(h, nus, cfg.tol or 1.0, metrics=ms)
    region = spec.ball_mask(0, 0.5 * R) & spec.interior_mask()
    l2 = reg.l2_bound_check(h, nus, region, metrics=ms)
    # test functions: an annulus kept inside {det h > floor} and a centered bump
    r_out = min(0.9 * R, R - (spec.halo + 2) * spec.max_spacing)
    phi_in = annular_bump(spec, 0.55 * R, r_out)
    phi_c = radial_bump(spec, 0.5 * R)
    det = det_field(h).values.real
    in_hyp = bool(np.all(det[phi_in != 0] > cfg.floor))
    c_hyp = bool(np.all(det[phi_c != 0] > cfg.floor))
    rows = []
    prev = None
    prev_demo = None
    tol = cfg.tol if cfg.tol is not None else 1e-9
    for i, (nu, m) in enumerate(zip(nus, ms)):
        theta = chern.curvature(m, np.finfo(float).tiny)
        g = chern.griffiths_test(m, theta, 0.0, tol=tol, seed=cfg.seed)
        pin = _trace_pairing(m, phi_in, np.finfo(float).tiny) if in_hyp else complex("nan+nanj")
        pdemo = _trace_pairing(m, phi_c, np.finfo(float).tiny)
        inc = abs(pin - prev) if prev is not None and in_hyp else float("nan")
        rows.append({
            "nu": nu,
            "sup_err": uniform.sup_errors[i] if uniform else float("nan"),
            "monotone": True if i == 0 else mono.violations[i - 1] == 0,
            "delta_emp": g.empirical_delta,
            "l2_dh": l2.l2[i],
            "pairing_re": pin.real, "pairing_im": pin.imag,
            "cauchy_increment": inc,
            "demo_re": pdemo.real, "demo_im": pdemo.imag,
            "demo_increment": abs(pdemo - prev_demo) if prev_demo is not None else float("nan"),
        })
        prev, prev_demo = pin, pdemo
    report = {
        "command": "regularize", "metric": entry.describe(), "grid": spec.to_dict(), "nus": nus,
        "monotonicity": mono.to_dict(), "uniform": uniform.to_dict() if uniform else None,
        "l2": l2.to_dict(), "rows": rows,
        "pairing_test_function": {"kind": "annulus", "r_in": 0.55 * R, "r_out": r_out,
                                  "in_hypothesis": in_hyp, "floor": cfg.floor,
                                  "volume_density": volume_form_density(spec)},
        "demo_test_function": {"kind": "centered bump", "radius": 0.5 * R, "peak": 1.0,
                               "in_hypothesis": c_hyp,
                               "label": "in hypothesis" if c_hyp else "out of hypothesis (det h <= floor on support)"},
    }
    ok = mono.passed and (uniform is None or uniform.decreasing)
    report["passed"] = bool(ok)
    _emit(cfg, report, rows, stream)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_verify_counterexample(cfg: RunConfig, stream=None, h=None) -> int:
    """Exact identities of the rank-2 counterexample plus the dyadic L^p profile of its connection.

    ``h`` replaces the exact metric (used to check that corruption is caught).
    """
    sym = symbolic.verify_counterexample(h)
    rows = []
    growth_ok = True
    lp_tables = {}
    threshold = None
    for p in cfg.p:
        prof = reg.dyadic_lp_profile("paper-counterexample", p, cfg.annuli, points=cfg.grid)
        lp_tables[str(p)] = [asdict(r) for r in prof]
        for r in prof:
            k = int(round(-math.log2(r.r_out)))
            rows.append({"p": p, "k": k, "r_in": r.r_in, "r_out": r.r_out,
                         "entry": f"{r.entry[0] + 1}{r.entry[1] + 1}", "value": r.value, "cumulative": r.cumulative})
        if p == 1.0:
            final = [r for r in prof if r.entry == (1, 0)][-1].cumulative
            threshold = 0.95 * 2 * math.pi * math.log(2) * (cfg.annuli - 1)
            growth_ok = final >= threshold
    exact = bool(sym["all_exact"])
    report = {"command": "verify-counterexample", "symbolic": sym, "lp": lp_tables,
              "growth_threshold": threshold, "growth_ok": growth_ok, "exact": exact,
              "passed": exact and growth_ok}
    _emit(cfg, report, rows, stream)
    return EXIT_OK if report["passed"] else EXIT_FAIL


def cmd_export(cfg: RunConfig, stream=None) -> int:
    """Sampled metric on the configured grid."""
    entry = _entry(cfg)
    spec = _spec(cfg, entry)
    h = MetricField.from_catalog(entry, spec)
    zs = spec.coordinates()
    rows = []
    r = h.rank
    flat = h.values.reshape(-1, r, r)
    for i, idx in enumerate(np.ndindex(*spec.shape)):
        row = {"index": " ".join(str(v) for v in idx)}
        for j in range(spec.dim):
            z = zs[j][idx]
            row[f"z{j + 1}_re"], row[f"z{j + 1}_im"] = float(z.real), float(z.imag)
        for a in range(r):
            for b in range(r):
                v = flat[i, a, b]
                row[f"h{a + 1}{b + 1}_re"], row[f"h{a + 1}{b + 1}_im"] = float(v.real), float(v.imag)
        rows.append(row)
    report = {"command": "export", "metric": entry.describe(), "grid": spec.to_dict(),
              "values": h.values, "passed": True}
    _emit(cfg, report, rows, stream)
    return EXIT_OK


COMMANDS = {
    "analyze": cmd_analyze,
    "regularize": cmd_regularize,
    "verify-counterexample": cmd_verify_counterexample,
    "psh-test": cmd_psh_test,
    "nakano-test": cmd_nakano_test,
    "export": cmd_export,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--metric", default="identity", help="catalog name (" + ", ".join(catalog.names()) + ")")
    common.add_argument("--param", action="append", type=_parse_param, default=[], metavar="KEY=VALUE",
                        help="catalog parameter, e.g. a=0.5 or profiles=abs2,relu")
    common.add_argument("--rank", type=int, help="bundle rank for catalog entries that take one")
    common.add_argument("--dim", type=int, help="complex dimension of the base")
    common.add_argument("--grid", type=int, default=128, help="points per real axis")
    common.add_argument("--radius", type=float, default=0.5, help="polyradius of the sampled domain")
    common.add_argument("--nu-start", type=float, default=4.0, help="first mollification index")
    common.add_argument("--nu-steps", type=int, default=4, help="number of doublings of nu")
    common.add_argument("--delta", type=float, default=0.0, help="required strictness constant")
    common.add_argument("--p", type=float, action="append", help="L^p exponent (repeatable)")
    common.add_argument("--tol", type=float, help="margin tolerance (default scales with the grid step)")
    common.add_argument("--floor", type=float, default=1e-6, help="determinant floor for curvature masks")
    common.add_argument("--annuli", type=int, default=8, help="dyadic annuli for L^p profiles")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", help="output file (default stdout)")
    common.add_argument("--format", dest="fmt", choices=("json", "csv"), default="json")
    parser = _Parser(prog="singherm", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, fn in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=(fn.__doc__ or "").strip().split("\n")[0])
    return parser


def config_from_args(ns) -> RunConfig:
    return RunConfig(
        seed=ns.seed, metric=ns.metric, params=tuple(ns.param), rank=ns.rank, dim=ns.dim,
        grid=ns.grid, radius=ns.radius, nu_start=ns.nu_start, nu_steps=ns.nu_steps,
        delta=ns.delta, p=tuple(ns.p) if ns.p else (1.0,), tol=ns.tol, floor=ns.floor,
        annuli=ns.annuli, out=ns.out, fmt=ns.fmt,
    )


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else EXIT_OK
    try:
        cfg = config_from_args(ns)
        return COMMANDS[ns.command](cfg)
    except (UsageError, catalog.UnknownMetricError, GridError) as exc:
        print(f"singherm: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SingularMetricError as exc:
        print(f"singherm: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
