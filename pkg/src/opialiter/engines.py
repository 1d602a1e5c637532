"""Picard, Mann (modified successive) and eps-regularised iteration engines.

Dense runs (points with ``dim``) iterate on numpy arrays; affine maps go
through the compiled ``linear_iterate`` kernel.  Sparse runs iterate on
:class:`Point` values directly.  Either way the result is a :class:`Trace`.
"""

import csv
import io
import json
import math
import os
import tempfile
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import DimensionMismatchError, DomainEscapeError, NonConvergenceError, ValidationError
from .operators import Anchored
from .space import Point, combine, distance, stack, unstack_row
from .verdict import Status, Verdict

ESCAPE_TOL = 1e-9


@dataclass(frozen=True)
class EpsSchedule:
    """eps_n = eps0 * rho**n for n < count."""

    eps0: float
    rho: float
    count: int

    def __post_init__(self):
        if not 0.0 < self.eps0 < 1.0:
            raise ValidationError(f"eps0 {self.eps0} outside (0, 1)", "eps0")
        if not 0.0 < self.rho < 1.0:
            raise ValidationError(f"rho {self.rho} outside (0, 1)", "rho")
        if int(self.count) < 1:
            raise ValidationError("count must be >= 1", "count")

    def values(self):
        return [self.eps0 * self.rho**n for n in range(self.count)]

    def check_delta(self, delta):
        bad = [e for e in self.values() if not 0.0 < e < delta]
        if bad:
            raise ValidationError(f"eps_n {bad[0]} not in (0, delta={delta})", "eps0")


@dataclass(frozen=True)
class Scheme:
    kind: str
    tau: float = None
    schedule: EpsSchedule = None

    def to_json(self):
        doc = {"kind": self.kind}
        if self.tau is not None:
            doc["tau"] = self.tau
        if self.schedule is not None:
            doc.update(eps0=self.schedule.eps0, rho=self.schedule.rho, count=self.schedule.count)
        return doc


PICARD = Scheme("picard")


class Trace:
    """An orbit x_0..x_N with cached images f(x_0)..f(x_N).

    Stored as two ``(N+1, k)`` arrays over a shared coordinate index
    ``columns``; ``points`` / ``images`` materialise Points on demand.
    """

    def __init__(self, xs, fs, columns, dim, scheme=PICARD, domain=None,
                 declared_weak_limit=None, stop_reason=None, operator=None):
        xs = np.asarray(xs, dtype=float)
        fs = np.asarray(fs, dtype=float)
        if xs.ndim != 2 or xs.shape != fs.shape or xs.shape[0] < 1:
            raise ValidationError("points and images must be equal-shape, non-empty", "points")
        xs.setflags(write=False)
        fs.setflags(write=False)
        self.xs = xs
        self.fs = fs
        self.columns = tuple(columns)
        self.dim = dim
        self.scheme = scheme
        self.domain = domain
        self.declared_weak_limit = declared_weak_limit
        self.stop_reason = stop_reason
        self.operator = operator
        self._points = None
        self._images = None

    @classmethod
    def from_points(cls, points, images=None, operator=None, **kw):
        """Wrap an explicit sequence; images default to ``operator`` applied pointwise."""
        points = list(points)
        if images is None:
            if operator is None:
                raise ValidationError("need images or an operator", "images")
            images = [operator(p) for p in points]
        images = list(images)
        if len(images) != len(points):
            raise ValidationError("points and images differ in length", "images")
        both, columns = stack(points + images)
        dims = {p.dim for p in points}
        dim = dims.pop() if len(dims) == 1 else None
        n = len(points)
        return cls(both[:n], both[n:], columns, dim, operator=operator, **kw)

    def __len__(self):
        return self.xs.shape[0]

    @property
    def points(self):
        if self._points is None:
            self._points = [unstack_row(r, self.columns, self.dim) for r in self.xs]
        return self._points

    @property
    def images(self):
        if self._images is None:
            self._images = [unstack_row(r, self.columns, self.dim) for r in self.fs]
        return self._images

    @property
    def final_point(self):
        return unstack_row(self.xs[-1], self.columns, self.dim)

    def final_residual(self):
        d = self.fs[-1] - self.xs[-1]
        return float(math.sqrt(d @ d))

    def step_norms(self):
        return _kernels.step_norms(self.xs)

    def residuals(self):
        return _kernels.diff_norms(self.fs, self.xs)

    def embed(self, z):
        """``z`` restricted to the trace columns, plus the squared norm of the rest."""
        pos = {c: i for i, c in enumerate(self.columns)}
        v = np.zeros(len(self.columns))
        rest = 0.0
        for k, c in z.coords.items():
            if k in pos:
                v[pos[k]] = c
            elif self.dim is not None:
                raise DimensionMismatchError(f"index {k} outside dimension {self.dim}")
            else:
                rest += c * c
        return v, rest

    def distances_to(self, z):
        v, rest = self.embed(z)
        d = _kernels.dist_to_point(self.xs, v)
        if rest:
            d = np.sqrt(d * d + rest)
        return d

    def summary(self):
        return {
            "length": len(self),
            "stop_reason": self.stop_reason,
            "final_residual": self.final_residual(),
            "final_point": _point_doc(self.final_point),
        }


def _point_doc(p):
    return p.to_array().tolist() if p.dim is not None else p.to_json()


# --------------------------------------------------------------------- engines


def picard_run(f, x0, domain, max_iter, stop_tol=0.0):
    """Iterate x_{n+1} = f(x_n).  ``stop_tol = 0`` runs the full ``max_iter`` steps."""
    return _run(f, x0, domain, max_iter, stop_tol, PICARD)


def mann_run(f, tau, x0, domain, max_iter, stop_tol=0.0):
    """Iterate x_{n+1} = tau x_n + (1 - tau) f(x_n); images hold f(x_n)."""
    tau = float(tau)
    if not 0.0 < tau < 1.0:
        raise ValidationError(f"tau {tau} outside (0, 1)", "tau")
    return _run(f, x0, domain, max_iter, stop_tol, Scheme("mann", tau=tau))


def _run(f, x0, domain, max_iter, stop_tol, scheme):
    if int(max_iter) < 1:
        raise ValidationError("max_iter must be >= 1", "max_iter")
    if not stop_tol >= 0:
        raise ValidationError("stop_tol must be >= 0", "stop_tol")
    max_iter = int(max_iter)
    gap = domain.gap(x0)
    if gap > ESCAPE_TOL:
        raise DomainEscapeError(0, gap)
    if x0.dim is not None:
        xs, fs, hit = _run_dense(f, x0, domain, max_iter, stop_tol, scheme)
        columns, dim = range(x0.dim), x0.dim
    else:
        xs, fs, hit, columns = _run_sparse(f, x0, domain, max_iter, stop_tol, scheme)
        dim = None
    return Trace(xs, fs, columns, dim, scheme=scheme, domain=domain,
                 stop_reason="tolerance" if hit else "max_iter", operator=f)


def _run_dense(f, x0, domain, max_iter, stop_tol, scheme):
    v0 = x0.to_array()
    tau = scheme.tau if scheme.kind == "mann" else -1.0
    form = f.linear_form(v0.size)
    if form is not None:
        m, b = form
        with np.errstate(over="ignore", invalid="ignore"):
            xs, fs, hit = _kernels.linear_iterate(
                np.ascontiguousarray(m), np.ascontiguousarray(b), v0, tau, max_iter, float(stop_tol)
            )
        gaps = domain.gap_rows(xs)
        bad = np.flatnonzero(~(gaps <= ESCAPE_TOL))
        if bad.size:
            raise DomainEscapeError(int(bad[0]), float(gaps[bad[0]]))
        return xs, fs, bool(hit)

    d = v0.size
    xs = np.empty((max_iter + 1, d))
    fs = np.empty((max_iter + 1, d))
    xs[0] = v0
    fs[0] = f.apply_array(v0)
    n = 0
    hit = False
    while n < max_iter:
        nxt = fs[n] if tau < 0.0 else tau * xs[n] + (1.0 - tau) * fs[n]
        gap = domain.gap_array(nxt)
        if not gap <= ESCAPE_TOL:
            raise DomainEscapeError(n + 1, gap)
        xs[n + 1] = nxt
        fs[n + 1] = f.apply_array(nxt)
        n += 1
        if stop_tol > 0.0:
            step = xs[n] - xs[n - 1]
            if math.sqrt(step @ step) <= stop_tol:
                hit = True
                break
    return xs[: n + 1], fs[: n + 1], hit


def _run_sparse(f, x0, domain, max_iter, stop_tol, scheme):
    tau = scheme.tau if scheme.kind == "mann" else None
    points = [x0]
    images = [f(x0)]
    hit = False
    for n in range(max_iter):
        x, fx = points[-1], images[-1]
        nxt = fx if tau is None else combine(tau, x, 1.0 - tau, fx)
        gap = domain.gap(nxt)
        if gap > ESCAPE_TOL:
            raise DomainEscapeError(n + 1, gap)
        points.append(nxt)
        images.append(f(nxt))
        if stop_tol > 0.0 and distance(nxt, x) <= stop_tol:
            hit = True
            break
    both, columns = stack(points + images)
    k = len(points)
    return both[:k], both[k:], hit, columns


def regularized_solve(f, z, domain, schedule, inner_max=10_000, inner_tol=1e-12):
    """Existence iteration: fixed points xi_n of phi_n(x) = (1 - eps_n) f(x) + eps_n z.

    Each phi_n is solved by Picard iteration warm-started at xi_{n-1}
    (xi_{-1} = z).  Returns ``([(xi_n, ||f(xi_n) - xi_n||), ...], verdict)``;
    the verdict holds iff every residual is at most eps_n * diam + 10 * inner_tol.
    """
    if not inner_tol > 0:
        raise ValidationError("inner_tol must be > 0", "inner_tol")
    gap = domain.gap(z)
    if gap > ESCAPE_TOL:
        raise DomainEscapeError(0, gap)
    d_m = domain.diameter()
    xi = z
    results = []
    witnesses = []
    ok = True
    unconverged = 0
    for n, eps in enumerate(schedule.values()):
        phi = Anchored(f, eps, z)
        tr = picard_run(phi, xi, domain, inner_max, inner_tol)
        if tr.stop_reason != "tolerance":
            if f.nonexpansive:
                raise NonConvergenceError(
                    "inner iteration missed inner_tol",
                    outer_index=n,
                    eps=eps,
                    inner_max=inner_max,
                    last_step=float(tr.step_norms()[-1]),
                )
            unconverged += 1
        xi = tr.final_point
        residual = distance(f(xi), xi)
        bound = eps * d_m + 10.0 * inner_tol
        ok = ok and residual <= bound
        results.append((xi, residual))
        witnesses += [
            (f"residual[{n}]", residual),
            (f"bound[{n}]", bound),
            (f"inner_steps[{n}]", float(len(tr) - 1)),
        ]
    witnesses += [("warm_start", 1.0), ("unconverged", float(unconverged))]
    if unconverged:
        status = Status.INCONCLUSIVE if ok else Status.FAILS
    else:
        status = Status.HOLDS if ok else Status.FAILS
    return results, Verdict("regularized_bound", status, 10.0 * inner_tol, None, witnesses)


# ---------------------------------------------------------------- trace files


def _atomic_write(path, text):
    path = os.fspath(path)
    folder = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=folder, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(x):
    return format(float(x), ".17g")


def trace_to_text(trace):
    """CSV for dense traces, JSON lines for sparse ones."""
    steps = trace.step_norms()
    res = trace.residuals()
    n = len(trace)
    if trace.dim is not None:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        d = trace.dim
        w.writerow(["step"] + [f"x_{i}" for i in range(d)] + [f"f_{i}" for i in range(d)]
                   + ["step_norm", "residual_norm"])
        for k in range(n):
            w.writerow([k] + [_fmt(v) for v in trace.xs[k]] + [_fmt(v) for v in trace.fs[k]]
                       + [_fmt(steps[k]) if k < n - 1 else "", _fmt(res[k])])
        return buf.getvalue()
    lines = []
    for k, (p, q) in enumerate(zip(trace.points, trace.images)):
        rec = {
            "step": k,
            "x": p.to_json()["coords"],
            "f": q.to_json()["coords"],
            "step_norm": float(steps[k]) if k < n - 1 else None,
            "residual_norm": float(res[k]),
        }
        lines.append(json.dumps(rec))
    return "\n".join(lines) + "\n"


def write_trace(trace, path):
    _atomic_write(path, trace_to_text(trace))
    return path


def read_trace(path):
    """Load a trace written by :func:`write_trace` (``.csv`` dense, ``.jsonl`` sparse)."""
    path = os.fspath(path)
    with open(path, newline="") as fh:
        text = fh.read()
    if path.endswith(".jsonl"):
        pts, imgs = [], []
        for lineno, line in enumerate(text.splitlines(), 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                pts.append(Point({int(k): v for k, v in rec["x"].items()}))
                imgs.append(Point({int(k): v for k, v in rec["f"].items()}))
            except (ValueError, KeyError, AttributeError) as exc:
                raise ValidationError(f"line {lineno}: bad trace record ({exc})", "trace") from None
        if not pts:
            raise ValidationError("empty trace file", "trace")
        return Trace.from_points(pts, imgs, stop_reason="loaded")
    rows = list(csv.reader(text.splitlines()))
    if len(rows) < 2:
        raise ValidationError("empty trace file", "trace")
    header = rows[0]
    xcols = [i for i, h in enumerate(header) if h.startswith("x_")]
    fcols = [i for i, h in enumerate(header) if h.startswith("f_")]
    if not xcols or len(xcols) != len(fcols):
        raise ValidationError("header needs matching x_i and f_i columns", "trace")
    try:
        body = [r for r in rows[1:] if r]
        xs = np.array([[float(r[i]) for i in xcols] for r in body])
        fs = np.array([[float(r[i]) for i in fcols] for r in body])
    except (ValueError, IndexError) as exc:
        raise ValidationError(f"bad numeric field ({exc})", "trace") from None
    return Trace(xs, fs, range(len(xcols)), len(xcols), stop_reason="loaded")


__all__ = [
    "EpsSchedule",
    "Scheme",
    "Trace",
    "picard_run",
    "mann_run",
    "regularized_solve",
    "write_trace",
    "read_trace",
    "trace_to_text",
]
