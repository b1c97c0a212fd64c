"""Command line runner: ``voldisc run | verify | report``.

A scenario file (see :mod:`voldisc.scenario`) names a problem and a pipeline
of steps.  Running it produces CSV tables (the contract for downstream
tools) and a plain-text report rendered from ``checks.csv`` alone, so that
``voldisc report <dir>`` regenerates a byte-identical ``report.txt``.

Exit status: 0 when every check passes, 1 when a check fails or a step
raises, 2 for unreadable scenarios or bad usage.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import os
import sys
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import PreconditionError, ScenarioError, VoldiscError
from .mlcontinuous import MLFamily
from .poisson import ContinuousFamily, QuadratureSpec, poisson_family_with_errors
from .resolvent import (ExistenceFamily, build_family, build_family_shifted, matrix_kernel,
                        seed_residual, summability_check, verify_existence,
                        verify_resolvent_eqs)
from .scenario import Scenario, parse_scenario
from .seqkernel import BiSequence, KernelSpec
from .solver import (APDecomposition, SolutionBundle, _family_parts, ap_decomposition,
                     exp_weighted_solution, solve, verify_bundle, verify_fractional_equation)

__all__ = ["CheckRow", "RunResult", "run_scenario", "write_outputs", "render_report",
           "read_checks", "main", "parse_scenario"]

CHECK_COLUMNS = ("step", "command", "check", "value", "tolerance", "tail", "status", "note")


def fmt(x: float | None) -> str:
    """Full precision scientific notation (17 significant digits)."""
    if x is None:
        return ""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.16e}"


@dataclass(frozen=True)
class CheckRow:
    """One line of ``checks.csv``.

    ``status`` is ``PASS``, ``FAIL``, ``ERROR`` (the step raised) or
    ``INFO`` (a recorded quantity without a verdict).
    """

    step: int
    command: str
    check: str
    value: float | None = None
    tolerance: float | None = None
    tail: float | None = None
    status: str = "INFO"
    note: str = ""

    def cells(self) -> list[str]:
        return [str(self.step), self.command, self.check, fmt(self.value), fmt(self.tolerance),
                fmt(self.tail), self.status, self.note]


@dataclass
class RunResult:
    name: str
    rows: list[CheckRow] = field(default_factory=list)
    tables: dict[str, tuple[list[str], list[list[str]]]] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(r.status in ("PASS", "INFO") for r in self.rows)


# {{{ steps


@dataclass
class _State:
    sc: Scenario
    family: ExistenceFamily | None = None
    bundle: SolutionBundle | None = None
    ap: APDecomposition | None = None


def _verdict(ok: bool) -> str:
    return "PASS" if ok else "FAIL"


def _continuous_family(sc: Scenario) -> ContinuousFamily:
    c = sc.continuous
    assert c is not None
    if c.family == "samples":
        path = c.file if os.path.isabs(c.file) else os.path.join(sc.base_dir, c.file)
        return ContinuousFamily.from_file(path, c.delimiter, c.growth)
    alpha = 1.0 if c.family == "semigroup" else c.alpha
    kind = "resolvent" if c.family == "ml-resolvent" else "solution"
    ml = MLFamily(c.A, alpha, kind)
    singular = kind == "resolvent" and alpha < 1
    return ContinuousFamily(ml, sc.dim, c.growth, "ml_resolvent" if alpha != 1 else "semigroup",
                            singular=singular)


def _family_table(fam: ExistenceFamily) -> tuple[list[str], list[list[str]]]:
    d = fam.dim
    header = ["v"] + [f"S_{i + 1}_{j + 1}" for i in range(d) for j in range(d)] + ["norm"]
    norms = fam.norms()
    rows = [[str(v)] + [fmt(x) for x in np.real(fam.S.values[v]).ravel()] + [fmt(norms[v])]
            for v in range(fam.horizon + 1)]
    return header, rows


def _solution_table(b: SolutionBundle) -> tuple[list[str], list[list[str]]]:
    d = b.u.elem_shape[0]
    res = next(iter(b.residual_report.values()))
    header = (["v"] + [f"u_{i + 1}" for i in range(d)] + [f"g_{i + 1}" for i in range(d)]
              + ["residual", "tail"])
    rows = []
    for v in range(b.u.lo, b.u.hi + 1):
        u = np.real(b.u.at(v))
        g = [fmt(x) for x in np.real(b.g.at(v))] if b.g.lo <= v <= b.g.hi else [""] * d
        i = v - res.start
        r = [fmt(res.absolute[i]), fmt(res.tail[i] if res.tail is not None else 0.0)] \
            if 0 <= i < res.absolute.size else ["", ""]
        rows.append([str(v)] + [fmt(x) for x in u] + g + r)
    return header, rows


def _ap_table(ap: APDecomposition) -> tuple[list[str], list[list[str]]]:
    d = ap.H.elem_shape[0]
    header = (["v"] + [f"u_{i + 1}" for i in range(d)] + [f"H_{i + 1}" for i in range(d)]
              + [f"Q_{i + 1}" for i in range(d)])
    rows = [[str(v)] + [fmt(x) for x in np.concatenate([ap.u[v], ap.H[v], ap.Q[v]])]
            for v in range(ap.H.horizon + 1)]
    return header, rows


def _fractional_terms(sc: Scenario) -> list[tuple[np.ndarray, float, int]]:
    spec = sc.spec
    if np.any(spec.B.matrix) or np.any(spec.C.matrix):
        raise PreconditionError("the fractional form is checked for B = 0 and C = 0 only")
    terms = []
    for i, (A, a, lag) in enumerate(zip(spec.As, spec.kernels, spec.lags)):
        order = sc.orders[i]
        if order is None:
            if isinstance(a, KernelSpec) and a.kind == "fdiff" and not a.omega:
                order = a.params[0]
            elif isinstance(a, KernelSpec) and not a.omega and (
                    a.kind == "delta" or (a.kind == "cesaro" and a.params[0] == 0)):
                order = 0.0
            else:
                raise PreconditionError(
                    f"term {i + 1}: give 'order' or use an fdiff or delta kernel")
        terms.append((A.matrix, float(order), lag - math.ceil(order)))
    return terms


def _run_step(st: _State, idx: int, step: str, res: RunResult) -> None:
    sc = st.sc
    spec = sc.spec
    tols = sc.tolerances
    add = res.rows.append
    if step == "build-family":
        fam = build_family(spec, sc.horizon, tol=tols["construction"])
        st.family = fam
        add(CheckRow(idx, step, "construction residual", fam.residuals.max_rel,
                     tols["construction"], None, _verdict(fam.residuals.passed)))
        add(CheckRow(idx, step, "pencil condition number", fam.condition))
        res.tables["family.csv"] = _family_table(fam)
    elif step == "build-shifted":
        fam = build_family_shifted(spec, sc.horizon, sc.seed, tol=tols["construction"],
                                   seed_tol=tols["seed"])
        st.family = fam
        add(CheckRow(idx, step, "construction residual", fam.residuals.max_rel,
                     tols["construction"], None, _verdict(fam.residuals.passed)))
        add(CheckRow(idx, step, "leading pencil condition number", fam.condition,
                     note="given seed" if sc.seed is not None else "least-norm seed"))
        res.tables["family.csv"] = _family_table(fam)
    elif step == "poissonize":
        c = sc.continuous
        T = _continuous_family(sc)
        q = QuadratureSpec(c.scheme, c.nodes, c.quad_tol)
        S, err = poisson_family_with_errors(T, c.a, c.omega, sc.horizon, q)
        fam = _family_parts(S, spec)
        st.family = fam
        add(CheckRow(idx, step, "largest quadrature error estimate", float(np.max(err)),
                     note=f"{c.family} a={c.a!r} omega={c.omega!r} scheme={c.scheme}"))
        res.tables["family.csv"] = _family_table(fam)
    elif step in ("solve", "exp-solve"):
        f = sc.forcing.sequence()
        if step == "solve":
            b = solve(st.family, f, sc.solve.window, growth=sc.solve.growth, tol=tols["verify"])
        else:
            b = exp_weighted_solution(spec, st.family, f, sc.solve.omega, sc.solve.window,
                                      growth=sc.solve.growth, tol=tols["verify"])
        st.bundle = b
        add(CheckRow(idx, step, "family tail bound", b.tail.decay.sum_from(1),
                     note=b.tail.source + ("" if b.tail.rigorous else "; not rigorous")))
        add(CheckRow(idx, step, "largest solution tail", float(np.max(b.u.tail)),
                     note=f"window [{b.u.lo}, {b.u.hi}]"))
        res.tables["solution.csv"] = _solution_table(b)
    elif step == "ap-decompose":
        fc = sc.forcing
        h = fc.params if fc.kind == "periodic" else fc.params[:1]
        ap = ap_decomposition(st.family, h, fc.x, sc.ap.horizon, fc.vanishing, sc.ap.start,
                              growth=sc.solve.growth)
        st.ap = ap
        add(CheckRow(idx, step, "periodicity defect of H", ap.periodicity_defect, tols["ap"],
                     ap.certificate, _verdict(ap.periodicity_defect <= tols["ap"]),
                     f"period {ap.period}"))
        add(CheckRow(idx, step, "fitted decay rate of Q", ap.rate, 1.0, None,
                     _verdict(ap.rate < 1.0), f"C = {fmt(ap.constant)}"))
        add(CheckRow(idx, step, f"sup |Q(v)| for v >= {ap.V0}", ap.sup_Q))
        res.tables["ap.csv"] = _ap_table(ap)
    elif step == "report":
        pass
    elif step.startswith("verify:"):
        _verify(st, idx, step, step.split(":", 1)[1], res)
    else:  # pragma: no cover - rejected by the parser
        raise ScenarioError(f"unknown step {step!r}")


def _verify(st: _State, idx: int, step: str, what: str, res: RunResult) -> None:
    sc = st.sc
    spec = sc.spec
    tol = sc.tolerances["verify"]
    add = res.rows.append
    fam = st.family
    if what == "existence":
        r = verify_existence(spec, fam, tol)
        add(CheckRow(idx, step, "existence identity", r.max_rel, tol, None, _verdict(r.passed),
                     f"worst v = {r.worst_index}"))
    elif what == "summability":
        cert = summability_check(spec, fam)
        note = f"criterion {cert.criterion or 'none'}"
        if math.isfinite(cert.tail_bound):
            note += f"; tail bound {fmt(cert.tail_bound)}"
        add(CheckRow(idx, step, "summability criterion", cert.lhs, 1.0,
                     cert.tail_bound if math.isfinite(cert.tail_bound) else None,
                     _verdict(cert.holds), note))
        add(CheckRow(idx, step, "partial sum of norms", cert.partial_sum))
    elif what == "resolvent":
        first, second = verify_resolvent_eqs(spec.B, fam, matrix_kernel(spec, fam.horizon),
                                             spec.k, spec.C, tol)
        add(CheckRow(idx, step, "first resolvent equation", first.max_rel, tol, None,
                     _verdict(first.passed)))
        add(CheckRow(idx, step, "second resolvent equation", second.max_rel, tol, None,
                     _verdict(second.passed)))
    elif what == "seed":
        r = seed_residual(spec, fam.S.values[: spec.vmax + 1])
        add(CheckRow(idx, step, "seed consistency", r, sc.tolerances["seed"], None,
                     _verdict(r <= sc.tolerances["seed"])))
    elif what == "multiterm":
        for name, r in verify_bundle(st.bundle, tol).items():
            add(CheckRow(idx, step, f"{name} identity", r.max_rel, tol, r.max_tail,
                         _verdict(r.passed), f"window [{r.start}, {r.start + r.absolute.size - 1}]"))
    elif what == "fractional":
        b = st.bundle
        terms = _fractional_terms(sc)
        g = b.g_weighted if b.omega is not None else b.g
        rhs = BiSequence(-g.values, g.lo, None, g.tail)
        ftol = sc.tolerances["fractional"]
        r = verify_fractional_equation(terms, b.u, rhs, b.omega or 0.0, ftol)
        add(CheckRow(idx, step, "fractional equation", r.max_abs, ftol, r.max_tail,
                     _verdict(r.passed), f"window [{r.start}, {r.start + r.absolute.size - 1}]"))
    elif what == "ap":
        ap = st.ap
        add(CheckRow(idx, step, "u = H + Q consistency", ap.consistency,
                     sc.tolerances["ap"] * max(1.0, ap.scale), None,
                     _verdict(ap.consistency <= sc.tolerances["ap"] * max(1.0, ap.scale))))


def run_scenario(sc: Scenario) -> RunResult:
    """Execute the pipeline.  Errors are recorded, later steps are skipped."""
    res = RunResult(sc.name)
    res.rows.append(CheckRow(0, "scenario", "name", note=sc.name))
    st = _State(sc)
    failed_at = None
    for idx, step in enumerate(sc.pipeline, start=1):
        if failed_at is not None:
            res.rows.append(CheckRow(idx, step, "skipped", status="ERROR",
                                     note=f"step {failed_at} raised"))
            continue
        try:
            _run_step(st, idx, step, res)
        except (VoldiscError, ArithmeticError) as exc:
            failed_at = idx
            res.rows.append(CheckRow(idx, step, "error", status="ERROR",
                                     note=f"{type(exc).__name__}: {exc}"))
    return res


# }}}


# {{{ outputs


def _csv_text(header: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def read_checks(path: str) -> list[list[str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != CHECK_COLUMNS:
        raise ScenarioError("not a checks table (unexpected header)", path=path)
    return rows[1:]


def render_report(rows: Sequence[Sequence[str]]) -> str:
    """Plain-text report from the cells of ``checks.csv``."""
    name = next((r[7] for r in rows if r[1] == "scenario"), "")
    out = [f"scenario: {name}", ""]
    head = f"{'step':>4}  {'command':<18} {'check':<36} {'value':<24} {'tolerance':<24} " \
           f"{'tail':<24} status"
    out.append(head)
    out.append("-" * len(head))
    n_pass = n_fail = 0
    for step, command, check, value, tol, tail, status, note in rows:
        if command == "scenario":
            continue
        out.append(f"{step:>4}  {command:<18} {check:<36} {value:<24} {tol:<24} {tail:<24} "
                   f"{status}")
        if note:
            out.append(f"{'':>6}{note}")
        if status == "PASS":
            n_pass += 1
        elif status in ("FAIL", "ERROR"):
            n_fail += 1
    out.append("")
    verdict = "PASS" if n_fail == 0 else "FAIL"
    out.append(f"overall: {verdict} ({n_pass} passed, {n_fail} failed)")
    return "\n".join(out) + "\n"


def write_outputs(res: RunResult, outdir: str) -> list[str]:
    os.makedirs(outdir, exist_ok=True)
    written = []
    for name, (header, rows) in sorted(res.tables.items()):
        path = os.path.join(outdir, name)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(_csv_text(header, rows))
        written.append(path)
    cells = [r.cells() for r in res.rows]
    path = os.path.join(outdir, "checks.csv")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(_csv_text(CHECK_COLUMNS, cells))
    written.append(path)
    # render from the file just written so that `report` reproduces it exactly
    text = render_report(read_checks(path))
    path = os.path.join(outdir, "report.txt")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    written.append(path)
    return written


# }}}


# {{{ argument handling


def _window_arg(text: str) -> tuple[int, int]:
    try:
        lo, hi = (int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("expected LO,HI") from None
    if hi < lo:
        raise argparse.ArgumentTypeError("expected LO <= HI")
    return lo, hi


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="voldisc",
                                description="Discrete multi-term Volterra problems: build "
                                            "families, solve and verify scenarios.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, helptext in (("run", "execute a scenario and write CSV tables and a report"),
                           ("verify", "execute a scenario and print the report; files are "
                                      "written only with --out")):
        q = sub.add_parser(name, help=helptext)
        q.add_argument("scenario", help="scenario file")
        q.add_argument("--tol", type=float, help="override the verification tolerance")
        q.add_argument("--horizon", type=int, help="override the family horizon")
        q.add_argument("--window", type=_window_arg, metavar="LO,HI",
                       help="override the forcing window")
        q.add_argument("--out", help="output directory (run: defaults to ./<name>-out)")
        q.add_argument("--figures", action="store_true",
                       help="also render PNG figures next to the CSV tables (needs matplotlib)")
        q.add_argument("--quiet", action="store_true", help="do not print the report")
    q = sub.add_parser("report", help="re-render report.txt from a run directory")
    q.add_argument("directory")
    q.add_argument("--figures", action="store_true", help="also (re)render PNG figures")
    q.add_argument("--quiet", action="store_true", help="do not print the report")
    return p


def _figures(outdir: str, err: Callable[[str], None]) -> bool:
    try:
        from .figures import render_figures
    except ImportError:  # pragma: no cover - depends on the environment
        err("--figures needs matplotlib (pip install 'artifact[figures]')")
        return False
    render_figures(outdir)
    return True


def main(argv: Sequence[str] | None = None) -> int:
    args = _parser().parse_args(argv)

    def err(msg: str) -> None:
        print(f"voldisc: {msg}", file=sys.stderr)

    if args.command == "report":
        path = os.path.join(args.directory, "checks.csv")
        try:
            rows = read_checks(path)
        except (OSError, ScenarioError) as exc:
            err(str(exc))
            return 2
        text = render_report(rows)
        with open(os.path.join(args.directory, "report.txt"), "w", encoding="utf-8",
                  newline="") as fh:
            fh.write(text)
        if not args.quiet:
            sys.stdout.write(text)
        if args.figures and not _figures(args.directory, err):
            return 2
        return 0 if text.rstrip().splitlines()[-1].startswith("overall: PASS") else 1

    try:
        sc = parse_scenario(args.scenario).with_overrides(args.tol, args.horizon, args.window)
    except ScenarioError as exc:
        err(str(exc))
        return 2
    res = run_scenario(sc)
    outdir = args.out
    if args.command == "run" and outdir is None:
        outdir = f"{sc.name}-out"
    if outdir is not None:
        write_outputs(res, outdir)
        text = open(os.path.join(outdir, "report.txt"), encoding="utf-8").read()
        if args.figures and not _figures(outdir, err):
            return 2
    else:
        text = render_report([r.cells() for r in res.rows])
        if args.figures:
            err("--figures needs --out when verifying")
            return 2
    if not args.quiet:
        sys.stdout.write(text)
    return 0 if res.passed else 1


# }}}
