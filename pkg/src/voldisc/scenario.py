"""Line-oriented scenario files for the command line runner.

A scenario is a sequence of sections.  Each section starts with a header in
brackets and holds ``key = value`` lines; ``#`` starts a comment.  Example::

    [scenario]
    name = scalar-geometric
    dim = 1
    horizon = 200

    [operators]
    B = [[1.0]]
    C = [[1.0]]

    [term 1]
    A = [[0.3]]
    kernel = geometric:1,0.5
    lag = 0

    [kernel]
    k = delta

    [forcing]
    f = geometric2:1,0.5
    window = -100, 100
    x = [1.0]

    [pipeline]
    steps = build-family, verify:existence, solve, verify:multiterm

Matrices are written row-major as nested lists, or as a single number meaning
that multiple of the identity.  Kernels use the textual form of
:class:`~voldisc.seqkernel.KernelSpec` (``cesaro:0.5``, ``geometric:1,0.3``,
``delta``, ``explicit:[1,0.5]``, ``fdiff:0.5``, ``caputo:0.5,1``,
``caputo-multi:...``), optionally weighted by a suffix ``@omega,shift``.
The full grammar is documented in the README.
"""

from __future__ import annotations

import ast
import math
import os
import re
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from numpy.typing import NDArray

from .errors import DomainError, PreconditionError, ScenarioError, ShapeError, VoldiscError
from .linopspace import LinOp
from .resolvent import ProblemSpec, kernel_values
from .seqkernel import BiSequence, Decay, KernelSpec

__all__ = [
    "Scenario",
    "ForcingSpec",
    "ContinuousSpec",
    "SolveSpec",
    "APSpec",
    "STEP_KINDS",
    "VERIFY_KINDS",
    "parse_scenario",
    "parse_scenario_text",
    "parse_kernel",
]

#: Pipeline commands, in the order they are usually given.
STEP_KINDS = ("build-family", "build-shifted", "poissonize", "solve", "exp-solve",
              "ap-decompose", "report")
#: Identities a ``verify:<identity>`` step can check.
VERIFY_KINDS = ("existence", "summability", "resolvent", "seed", "multiterm", "fractional",
                "ap")

_SECTION_KEYS: dict[str, tuple[str, ...]] = {
    "scenario": ("name", "dim", "horizon"),
    "operators": ("B", "C"),
    "term": ("A", "kernel", "lag", "order"),
    "kernel": ("k",),
    "forcing": ("f", "window", "x", "start", "vanishing"),
    "continuous": ("family", "A", "alpha", "growth", "a", "omega", "scheme", "nodes",
                   "quad_tol", "file", "delimiter"),
    "solve": ("omega", "growth", "window"),
    "ap": ("horizon", "start"),
    "pipeline": ("steps",),
    "tolerances": ("construction", "verify", "seed", "quadrature", "fractional", "ap"),
    "seed": (),
}

_DEFAULT_TOLS = {"construction": 1e-10, "verify": 1e-8, "seed": 1e-10, "quadrature": 1e-12,
                 "fractional": 1e-6, "ap": 1e-10}


@dataclass(frozen=True)
class _Entry:
    text: str
    line: int
    column: int


@dataclass(frozen=True)
class ForcingSpec:
    """Scalar profile ``phi`` on a window times a fixed vector ``x``.

    ``kind`` is ``delta``, ``geometric2`` (``c * rho^|l|``), ``periodic``,
    ``explicit`` (values from ``start`` on, zero elsewhere) or ``constant``.
    """

    kind: str
    params: tuple[float, ...]
    window: tuple[int, int]
    x: NDArray
    start: int = 0
    vanishing: KernelSpec | None = None

    def profile(self, l: int) -> float:
        if self.kind == "delta":
            return 1.0 if l == 0 else 0.0
        if self.kind == "geometric2":
            c, rho = self.params
            return c * rho ** abs(l)
        if self.kind == "periodic":
            return self.params[l % len(self.params)]
        if self.kind == "explicit":
            i = l - self.start
            return self.params[i] if 0 <= i < len(self.params) else 0.0
        return self.params[0]

    def decay(self) -> Decay | None:
        """Bound on the profile left of the window, times ``||x||``."""
        lo = self.window[0]
        xn = float(np.linalg.norm(self.x))
        if self.kind == "delta":
            return Decay.zero() if lo <= 0 else Decay.bounded(xn)
        if self.kind == "explicit":
            return Decay.zero() if lo <= self.start else \
                Decay.bounded(xn * max(abs(p) for p in self.params))
        if self.kind == "geometric2":
            c, rho = self.params
            if lo <= 0 and rho < 1:
                return Decay.geometric(rho, abs(c) * rho ** abs(lo) * xn)
            # growing profiles have no usable bound left of the window
            return Decay.bounded(abs(c) * xn) if rho <= 1 else None
        if self.kind == "periodic":
            return Decay.bounded(xn * max(abs(p) for p in self.params))
        return Decay.constant(abs(self.params[0]) * xn)

    def sequence(self) -> BiSequence:
        lo, hi = self.window
        phi = np.array([self.profile(l) for l in range(lo, hi + 1)])
        return BiSequence(np.multiply.outer(phi, self.x), lo, self.decay())

    def text(self) -> str:
        if self.kind == "delta":
            return "delta"
        if self.kind in ("periodic", "explicit"):
            return f"{self.kind}:[" + ",".join(repr(p) for p in self.params) + "]"
        return f"{self.kind}:" + ",".join(repr(p) for p in self.params)


@dataclass(frozen=True)
class ContinuousSpec:
    """Continuous family to be Poisson transformed."""

    family: str
    A: NDArray | None
    alpha: float
    growth: tuple[float, float] | None
    a: float
    omega: float
    scheme: str
    nodes: int
    quad_tol: float
    file: str | None
    delimiter: str | None


@dataclass(frozen=True)
class SolveSpec:
    omega: float = 0.0
    growth: tuple[float, float] | None = None
    window: tuple[int, int] | None = None


@dataclass(frozen=True)
class APSpec:
    horizon: int
    start: int | None = None


@dataclass(frozen=True, eq=False)
class Scenario:
    """A fully resolved scenario."""

    name: str
    dim: int
    horizon: int
    spec: ProblemSpec
    forcing: ForcingSpec | None
    continuous: ContinuousSpec | None
    solve: SolveSpec
    ap: APSpec | None
    pipeline: tuple[str, ...]
    tolerances: dict[str, float]
    seed: NDArray | None
    orders: tuple[float | None, ...]
    source: str | None = None
    base_dir: str = "."
    lines: dict[str, int] = field(default_factory=dict)

    def with_overrides(self, tol: float | None = None, horizon: int | None = None,
                       window: tuple[int, int] | None = None) -> Scenario:
        """Copy with command line overrides applied."""
        tols = dict(self.tolerances)
        if tol is not None:
            tols["verify"] = float(tol)
        forcing = self.forcing
        if window is not None:
            if forcing is None:
                raise ScenarioError("--window needs a [forcing] section", field="forcing.window")
            forcing = ForcingSpec(forcing.kind, forcing.params, window, forcing.x,
                                  forcing.start, forcing.vanishing)
        return Scenario(self.name, self.dim, int(horizon) if horizon is not None else self.horizon,
                        self.spec, forcing, self.continuous, self.solve, self.ap, self.pipeline,
                        tols, self.seed, self.orders, self.source, self.base_dir, self.lines)


# {{{ lexical layer


_HEADER = re.compile(r"^\[\s*([A-Za-z][A-Za-z_-]*)(?:\s+(\d+))?\s*\]$")


def _split(text: str, path: str | None) -> dict[str, dict[str, _Entry]]:
    sections: dict[str, dict[str, _Entry]] = {}
    header_lines: dict[str, int] = {}
    current: str | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        stripped = line.strip()
        if not stripped:
            continue
        indent = len(line) - len(line.lstrip())
        if stripped.startswith("["):
            m = _HEADER.match(stripped)
            if not m:
                raise ScenarioError(f"malformed section header {stripped!r}", lineno,
                                    indent + 1, path=path)
            kind, num = m.group(1), m.group(2)
            if kind not in _SECTION_KEYS:
                raise ScenarioError(f"unknown section {kind!r}", lineno, indent + 2, path=path)
            if (kind == "term") != (num is not None):
                raise ScenarioError("only [term N] sections take a number", lineno,
                                    indent + 1, path=path)
            current = f"term {int(num)}" if num is not None else kind
            if current in sections:
                raise ScenarioError(f"section [{current}] given twice (first on line "
                                    f"{header_lines[current]})", lineno, indent + 1, path=path)
            sections[current] = {}
            header_lines[current] = lineno
            continue
        if current is None:
            raise ScenarioError("key outside of any section", lineno, indent + 1, path=path)
        if "=" not in line:
            raise ScenarioError("expected 'key = value'", lineno, len(line) + 1, path=path)
        key_part, value_part = line.split("=", 1)
        key = key_part.strip()
        key_col = len(key_part) - len(key_part.lstrip()) + 1
        base = current.split()[0]
        allowed = _SECTION_KEYS[base]
        if base == "seed":
            if not re.fullmatch(r"S\d+", key):
                raise ScenarioError(f"seed keys are S0, S1, ...; got {key!r}", lineno, key_col,
                                    path=path)
        elif key not in allowed:
            raise ScenarioError(f"unknown key {key!r} in [{current}] (expected one of "
                                f"{', '.join(allowed)})", lineno, key_col, path=path)
        if key in sections[current]:
            raise ScenarioError(f"key {key!r} given twice in [{current}]", lineno, key_col,
                                path=path)
        value = value_part.strip()
        value_col = len(key_part) + 2 + (len(value_part) - len(value_part.lstrip()))
        if not value:
            raise ScenarioError(f"missing value for {key!r}", lineno, value_col, path=path)
        sections[current][key] = _Entry(value, lineno, value_col)
    return sections


# }}}


# {{{ value parsers


class _Reader:
    def __init__(self, path: str | None) -> None:
        self.path = path

    def fail(self, entry: _Entry, msg: str, offset: int = 0) -> ScenarioError:
        return ScenarioError(msg, entry.line, entry.column + offset, path=self.path)

    def literal(self, entry: _Entry) -> Any:
        try:
            return ast.literal_eval(entry.text)
        except (SyntaxError, ValueError) as exc:
            off = (getattr(exc, "offset", None) or 1) - 1
            raise self.fail(entry, f"cannot read value {entry.text!r}", off) from None

    def number(self, entry: _Entry) -> float:
        try:
            x = float(entry.text)
        except ValueError:
            raise self.fail(entry, f"expected a number, got {entry.text!r}") from None
        if not math.isfinite(x):
            raise self.fail(entry, "numbers must be finite")
        return x

    def integer(self, entry: _Entry) -> int:
        try:
            return int(entry.text)
        except ValueError:
            raise self.fail(entry, f"expected an integer, got {entry.text!r}") from None

    def numbers(self, entry: _Entry, count: int | None = None) -> tuple[float, ...]:
        parts = [p.strip() for p in entry.text.split(",")]
        out = []
        pos = 0
        for p in parts:
            try:
                out.append(float(p))
            except ValueError:
                raise self.fail(entry, f"expected a number, got {p!r}",
                                entry.text.find(p, pos)) from None
            pos = entry.text.find(p, pos) + len(p)
        if count is not None and len(out) != count:
            raise self.fail(entry, f"expected {count} comma separated numbers")
        return tuple(out)

    def vector(self, entry: _Entry, dim: int, fld: str) -> NDArray:
        v = self.literal(entry)
        if isinstance(v, (int, float)):
            v = [v]
        arr = np.asarray(v, dtype=float) if _is_flat(v) else None
        if arr is None or arr.ndim != 1:
            raise self.fail(entry, "expected a vector such as [1.0, 0.0]")
        if arr.size != dim:
            raise ScenarioError(f"vector has length {arr.size}, the scenario has dim {dim}",
                                entry.line, entry.column, fld, self.path)
        return arr

    def matrix(self, entry: _Entry, dim: int, fld: str) -> NDArray:
        v = self.literal(entry)
        if isinstance(v, (int, float)) and not isinstance(v, bool):
            return float(v) * np.eye(dim)
        try:
            arr = np.asarray(v, dtype=float)
        except (TypeError, ValueError):
            raise self.fail(entry, "rows of a matrix must have equal length") from None
        if arr.ndim != 2:
            raise self.fail(entry, "expected a matrix such as [[1, 0], [0, 1]]")
        if arr.shape != (dim, dim):
            raise ScenarioError(f"matrix has shape {arr.shape[0]}x{arr.shape[1]}, the scenario "
                                f"has dim {dim}", entry.line, entry.column, fld, self.path)
        return arr


def _is_flat(v: Any) -> bool:
    return isinstance(v, (list, tuple)) and all(isinstance(x, (int, float)) for x in v)


_KERNEL_RE = re.compile(r"^([A-Za-z][A-Za-z0-9_-]*)(?::([^@]*))?(?:@(.*))?$")


def parse_kernel(text: str) -> KernelSpec:
    """Read the textual form produced by :meth:`KernelSpec.text`.

    Raises :class:`ValueError` subclasses with a column offset in the message
    attribute ``offset`` (0-based) when the text is malformed.
    """
    text = text.strip()
    m = _KERNEL_RE.match(text)
    if not m:
        raise _KernelTextError("malformed kernel", 0)
    kind, body, weight = m.group(1), m.group(2), m.group(3)
    params: tuple[float, ...] = ()
    if body is not None:
        body = body.strip()
        try:
            if body.startswith("["):
                params = tuple(float(x) for x in ast.literal_eval(body))
            else:
                params = tuple(float(x) for x in body.split(",")) if body else ()
        except (SyntaxError, ValueError, TypeError):
            raise _KernelTextError(f"cannot read kernel parameters {body!r}",
                                   len(kind) + 1) from None
    try:
        spec = KernelSpec(kind, params)
    except DomainError as exc:
        raise _KernelTextError(str(exc), 0) from None
    if weight is not None:
        try:
            omega, shift = (float(x) for x in weight.split(","))
        except ValueError:
            raise _KernelTextError("weight suffix must read @omega,shift",
                                   text.index("@") + 1) from None
        spec = spec.weighted(omega, int(shift))
    return spec


class _KernelTextError(ValueError):
    def __init__(self, msg: str, offset: int) -> None:
        super().__init__(msg)
        self.offset = offset


_FORCING_KINDS = ("delta", "geometric2", "periodic", "explicit", "constant")


# }}}


# {{{ semantic layer


def parse_scenario_text(text: str, path: str | None = None,
                        base_dir: str = ".") -> Scenario:
    """Parse scenario text; *path* only labels error messages."""
    sections = _split(text, path)
    rd = _Reader(path)

    def need(sec: str, key: str) -> _Entry:
        if sec not in sections:
            raise ScenarioError(f"missing section [{sec}]", field=f"{sec}.{key}", path=path)
        if key not in sections[sec]:
            raise ScenarioError(f"missing key {key!r}", field=f"{sec}.{key}", path=path)
        return sections[sec][key]

    def opt(sec: str, key: str) -> _Entry | None:
        return sections.get(sec, {}).get(key)

    name = need("scenario", "name").text
    dim_e = need("scenario", "dim")
    dim = rd.integer(dim_e)
    if not 1 <= dim <= 64:
        raise rd.fail(dim_e, f"dim must lie in 1..64, got {dim}")
    hz_e = need("scenario", "horizon")
    horizon = rd.integer(hz_e)
    if horizon < 1:
        raise rd.fail(hz_e, "horizon must be positive")

    B = rd.matrix(need("operators", "B"), dim, "operators.B")
    C = rd.matrix(need("operators", "C"), dim, "operators.C")

    term_names = sorted((s for s in sections if s.startswith("term ")),
                        key=lambda s: int(s.split()[1]))
    if not term_names:
        raise ScenarioError("at least one [term N] section is required", field="term",
                            path=path)
    numbers = [int(s.split()[1]) for s in term_names]
    if numbers != list(range(1, len(numbers) + 1)):
        raise ScenarioError(f"terms must be numbered 1..n without gaps, got {numbers}",
                            field="term", path=path)
    As, kernels, lags, orders = [], [], [], []
    for t in term_names:
        As.append(rd.matrix(need(t, "A"), dim, f"{t}.A"))
        kernels.append(_kernel_entry(rd, need(t, "kernel")))
        lag_e = opt(t, "lag")
        lag = rd.integer(lag_e) if lag_e else 0
        if lag < 0:
            raise rd.fail(lag_e, "lags must be nonnegative")
        lags.append(lag)
        oe = opt(t, "order")
        orders.append(rd.number(oe) if oe else None)
    k = _kernel_entry(rd, need("kernel", "k"))

    try:
        spec = ProblemSpec(LinOp(B, "B"), LinOp(C, "C"), tuple(As), tuple(kernels),
                           tuple(lags), k)
    except PreconditionError as exc:
        vm = max(lags)
        bad = [i for i, (a, v) in enumerate(zip(kernels, lags))
               if v == vm and kernel_values(a, 0)[0] == 0]
        fld = f"term {bad[0] + 1}.kernel" if bad else "term"
        e = sections[f"term {bad[0] + 1}"]["kernel"] if bad else None
        msg = (f"term {bad[0] + 1} has the maximal lag {vm} but a vanishing leading kernel "
               "value; every term of maximal lag needs a_i(0) != 0") if bad else str(exc)
        raise ScenarioError(msg, e.line if e else None, e.column if e else None, fld,
                            path) from None
    except (ShapeError, VoldiscError) as exc:
        raise ScenarioError(str(exc), field="term", path=path) from None

    forcing = None
    if "forcing" in sections:
        forcing = _forcing(rd, sections["forcing"], dim, need)

    continuous = None
    if "continuous" in sections:
        continuous = _continuous(rd, sections["continuous"], dim)

    solve = SolveSpec()
    if "solve" in sections:
        s = sections["solve"]
        om = rd.number(s["omega"]) if "omega" in s else 0.0
        if om < 0:
            raise rd.fail(s["omega"], "omega must be nonnegative")
        gr = rd.numbers(s["growth"], 2) if "growth" in s else None
        win = _window(rd, s["window"]) if "window" in s else None
        solve = SolveSpec(om, gr, win)

    ap = None
    if "ap" in sections:
        a_s = sections["ap"]
        ap = APSpec(rd.integer(need("ap", "horizon")),
                    rd.integer(a_s["start"]) if "start" in a_s else None)

    tolerances = dict(_DEFAULT_TOLS)
    for key, e in sections.get("tolerances", {}).items():
        val = rd.number(e)
        if val <= 0:
            raise rd.fail(e, "tolerances must be positive")
        tolerances[key] = val

    seed = None
    if "seed" in sections and sections["seed"]:
        entries = sections["seed"]
        idx = sorted(int(k[1:]) for k in entries)
        if idx != list(range(len(idx))):
            raise ScenarioError(f"seed keys must be S0..S{len(idx) - 1}", field="seed", path=path)
        if len(idx) != spec.vmax + 1:
            raise ScenarioError(f"a seed needs S0..S{spec.vmax} for maximal lag {spec.vmax}",
                                field="seed", path=path)
        seed = np.stack([rd.matrix(entries[f"S{i}"], dim, f"seed.S{i}") for i in idx])

    steps_e = need("pipeline", "steps")
    steps = tuple(s.strip() for s in steps_e.text.split(",") if s.strip())
    _check_pipeline(steps, steps_e, rd, spec, forcing, continuous, ap)

    lines = {f"{sec}.{key}": e.line for sec, d in sections.items() for key, e in d.items()}
    return Scenario(name, dim, horizon, spec, forcing, continuous, solve, ap, steps,
                    tolerances, seed, tuple(orders), path, base_dir, lines)


def parse_scenario(path: str) -> Scenario:
    """Read and resolve a scenario file."""
    if not os.path.isfile(path):
        raise ScenarioError("no such scenario file", path=path)
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return parse_scenario_text(text, path, os.path.dirname(os.path.abspath(path)))


def _kernel_entry(rd: _Reader, e: _Entry) -> KernelSpec:
    try:
        return parse_kernel(e.text)
    except _KernelTextError as exc:
        raise rd.fail(e, str(exc), exc.offset) from None


def _window(rd: _Reader, e: _Entry) -> tuple[int, int]:
    vals = rd.numbers(e, 2)
    lo, hi = vals
    if lo != int(lo) or hi != int(hi) or hi < lo:
        raise rd.fail(e, "a window is two integers lo, hi with lo <= hi")
    return int(lo), int(hi)


def _forcing(rd: _Reader, sec: dict[str, _Entry], dim: int, need) -> ForcingSpec:
    e = need("forcing", "f")
    m = re.match(r"^([A-Za-z0-9]+)(?::(.*))?$", e.text)
    if not m or m.group(1) not in _FORCING_KINDS:
        raise rd.fail(e, f"unknown forcing {e.text!r} (expected one of "
                         f"{', '.join(_FORCING_KINDS)})")
    kind, body = m.group(1), m.group(2)
    params: tuple[float, ...] = ()
    if kind != "delta":
        if body is None:
            raise rd.fail(e, f"forcing {kind} needs parameters", len(kind))
        sub = _Entry(body.strip(), e.line, e.column + len(kind) + 1)
        if kind in ("periodic", "explicit"):
            vals = rd.literal(sub)
            if not _is_flat(vals) or not vals:
                raise rd.fail(sub, "expected a nonempty list of numbers")
            params = tuple(float(v) for v in vals)
        else:
            params = rd.numbers(sub, 2 if kind == "geometric2" else 1)
            if kind == "geometric2" and not params[1] > 0:
                raise rd.fail(sub, "the ratio of a geometric forcing must be positive")
    window = _window(rd, need("forcing", "window"))
    x = rd.vector(sec["x"], dim, "forcing.x") if "x" in sec else np.ones(dim)
    start = rd.integer(sec["start"]) if "start" in sec else 0
    vanishing = _kernel_entry(rd, sec["vanishing"]) if "vanishing" in sec else None
    return ForcingSpec(kind, params, window, x, start, vanishing)


_CONT_FAMILIES = ("semigroup", "ml-solution", "ml-resolvent", "samples")


def _continuous(rd: _Reader, sec: dict[str, _Entry], dim: int) -> ContinuousSpec:
    if "family" not in sec:
        raise ScenarioError("missing key 'family'", field="continuous.family", path=rd.path)
    fam_e = sec["family"]
    fam = fam_e.text
    if fam not in _CONT_FAMILIES:
        raise rd.fail(fam_e, f"unknown continuous family {fam!r} (expected one of "
                             f"{', '.join(_CONT_FAMILIES)})")
    A = None
    if fam != "samples":
        if "A" not in sec:
            raise ScenarioError("missing key 'A'", field="continuous.A", path=rd.path)
        A = rd.matrix(sec["A"], dim, "continuous.A")
    elif "file" not in sec:
        raise ScenarioError("sampled families need a file", field="continuous.file",
                            path=rd.path)
    alpha = rd.number(sec["alpha"]) if "alpha" in sec else 1.0
    if not alpha > 0:
        raise rd.fail(sec["alpha"], "alpha must be positive")
    growth = rd.numbers(sec["growth"], 2) if "growth" in sec else None
    a = rd.number(sec["a"]) if "a" in sec else 1.0
    omega = rd.number(sec["omega"]) if "omega" in sec else a
    scheme = sec["scheme"].text if "scheme" in sec else "generalized-laguerre"
    if scheme not in ("generalized-laguerre", "composite-adaptive"):
        raise rd.fail(sec["scheme"], f"unknown quadrature scheme {scheme!r}")
    nodes = rd.integer(sec["nodes"]) if "nodes" in sec else 32
    quad_tol = rd.number(sec["quad_tol"]) if "quad_tol" in sec else 1e-12
    file = sec["file"].text if "file" in sec else None
    delim = sec["delimiter"].text if "delimiter" in sec else None
    return ContinuousSpec(fam, A, alpha, growth, a, omega, scheme, nodes, quad_tol, file, delim)


def _check_pipeline(steps: tuple[str, ...], e: _Entry, rd: _Reader, spec: ProblemSpec,
                    forcing: ForcingSpec | None, continuous: ContinuousSpec | None,
                    ap: APSpec | None) -> None:
    if not steps:
        raise rd.fail(e, "the pipeline is empty")
    have: set[str] = set()
    pos = 0
    for s in steps:
        col = e.text.find(s, pos)
        pos = col + len(s)

        def bad(msg: str) -> ScenarioError:
            return ScenarioError(msg, e.line, e.column + col, "pipeline.steps", rd.path)

        if s.startswith("verify:"):
            what = s.split(":", 1)[1]
            if what not in VERIFY_KINDS:
                raise bad(f"unknown identity {what!r} (expected one of {', '.join(VERIFY_KINDS)})")
            needs = {"existence": "family", "summability": "family", "resolvent": "family",
                     "seed": "family", "multiterm": "solution", "fractional": "solution",
                     "ap": "ap"}[what]
            if needs not in have:
                raise bad(f"{s} needs a {needs} produced by an earlier step")
            if what == "resolvent" and spec.vmax:
                raise bad("the resolvent equations are checked only without lags")
            if what == "seed" and not spec.vmax:
                raise bad("verify:seed needs a positive maximal lag")
            continue
        if s not in STEP_KINDS:
            raise bad(f"unknown step {s!r}")
        if s == "build-family":
            if spec.vmax:
                raise bad("build-family needs all lags zero; use build-shifted")
            have.add("family")
        elif s == "build-shifted":
            if not spec.vmax:
                raise bad("build-shifted needs a positive maximal lag")
            have.add("family")
        elif s == "poissonize":
            if continuous is None:
                raise bad("poissonize needs a [continuous] section")
            have.add("family")
        elif s in ("solve", "exp-solve"):
            if "family" not in have:
                raise bad(f"{s} needs a family from an earlier step")
            if forcing is None:
                raise bad(f"{s} needs a [forcing] section")
            have.add("solution")
        elif s == "ap-decompose":
            if "family" not in have:
                raise bad("ap-decompose needs a family from an earlier step")
            if forcing is None or forcing.kind not in ("periodic", "constant"):
                raise bad("ap-decompose needs a periodic or constant forcing")
            if ap is None:
                raise bad("ap-decompose needs an [ap] section")
            have.add("ap")


# }}}
