"""Catalog of concrete mappings and sampling probes on them.

Operators evaluate on :class:`~opialiter.space.Point` (the public surface) and
on dense numpy vectors (``apply_array`` / ``apply_rows``, used by the
engines).  Linear-affine members expose ``linear_form`` so the engines can
hand the whole iteration to a compiled kernel.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .domains import ConvexDomain, make_domain
from .errors import DimensionMismatchError, ValidationError
from .space import Point, combine, norm, scale, zero
from .verdict import Status, Verdict

_METADATA = {"lipschitz", "fixed_points"}


class Operator:
    kind = None
    #: fixed ambient dimension, if the map only makes sense in one
    arity = None

    def __init__(self, lipschitz=None, fixed_points=None):
        if lipschitz is not None:
            lipschitz = float(lipschitz)
            if not (math.isfinite(lipschitz) and lipschitz >= 0):
                raise ValidationError("must be a finite non-negative number", "lipschitz")
        self.declared_lipschitz = lipschitz
        self.declared_fixed_points = tuple(fixed_points) if fixed_points is not None else None

    # -- evaluation ---------------------------------------------------------

    def __call__(self, x):
        if x.dim is not None:
            return Point.from_array(self.apply_array(x.to_array()))
        return self._apply_sparse(x)

    def _apply_sparse(self, x):
        raise DimensionMismatchError(f"{self.kind} acts on dense points only")

    def apply_array(self, v):
        raise NotImplementedError

    def apply_rows(self, rows):
        form = self.linear_form(rows.shape[1])
        if form is not None:
            m, b = form
            return rows @ m.T + b
        return np.array([self.apply_array(r) for r in rows]).reshape(rows.shape)

    def linear_form(self, dim):
        """``(M, b)`` with ``f(x) = M x + b`` on R^dim, or None for nonlinear maps."""
        return None

    # -- metadata -------------------------------------------------------------

    @property
    def nonexpansive(self):
        lip = self.lipschitz
        return lip is not None and lip <= 1.0

    @property
    def lipschitz(self):
        if self.declared_lipschitz is not None:
            return self.declared_lipschitz
        return self._lipschitz()

    def _lipschitz(self):
        return None

    def fixed_points(self, domain=None, count=4, seed=0):
        """A finite list of known fixed points (representatives when the set is infinite)."""
        if self.declared_fixed_points is not None:
            return list(self.declared_fixed_points)
        return self._fixed_points(domain, count, seed)

    def _fixed_points(self, domain, count, seed):
        return []

    def params(self):
        return {}

    def to_spec(self):
        doc = {"kind": self.kind, **self.params()}
        if self.declared_lipschitz is not None:
            doc["lipschitz"] = self.declared_lipschitz
        if self.declared_fixed_points is not None:
            doc["fixed_points"] = [_point_doc(p) for p in self.declared_fixed_points]
        return doc

    def __repr__(self):
        inner = ", ".join(f"{k}={v!r}" for k, v in self.params().items())
        return f"{self.kind}({inner})"

    def _check_dim(self, v):
        if self.arity is not None and v.size != self.arity:
            raise DimensionMismatchError(f"{self.kind} acts on R^{self.arity}, got R^{v.size}")


def _point_doc(p):
    return p.to_array().tolist() if p.dim is not None else p.to_json()


def _solve_affine_fixed_point(m, b):
    a = np.eye(m.shape[0]) - m
    sol, *_ = np.linalg.lstsq(a, b, rcond=None)
    if np.linalg.norm(a @ sol - b) > 1e-10 * max(1.0, np.linalg.norm(b)):
        return []
    return [Point.from_array(sol)]


def _domain_representatives(domain, count, seed, within=None):
    if domain is None:
        return []
    pts = [domain.centre_point()]
    try:
        rows = domain.sample_rows(np.random.default_rng(seed), count)
    except NotImplementedError:
        rows = []
    pts.extend(Point.from_array(r) for r in rows)
    if within is not None:
        pts = [p for p in pts if within.contains(p, 1e-12)]
    return pts


class Identity(Operator):
    kind = "identity"

    def __call__(self, x):
        return x

    def _apply_sparse(self, x):
        return x

    def apply_array(self, v):
        return v

    def linear_form(self, dim):
        return np.eye(dim), np.zeros(dim)

    def _lipschitz(self):
        return 1.0

    def _fixed_points(self, domain, count, seed):
        return _domain_representatives(domain, count, seed)


class Scaling(Operator):
    kind = "scaling"

    def __init__(self, c, **meta):
        super().__init__(**meta)
        self.c = float(c)
        if not math.isfinite(self.c):
            raise ValidationError("must be finite", "c")

    def _apply_sparse(self, x):
        return scale(self.c, x)

    def apply_array(self, v):
        return self.c * v

    def linear_form(self, dim):
        return self.c * np.eye(dim), np.zeros(dim)

    def _lipschitz(self):
        return abs(self.c)

    def _fixed_points(self, domain, count, seed):
        if self.c == 1.0:
            return _domain_representatives(domain, count, seed)
        return [zero(domain.ambient_dim if domain is not None else None)]

    def params(self):
        return {"c": self.c}


class Rotation(Operator):
    kind = "rotation"
    arity = 2

    def __init__(self, theta, **meta):
        super().__init__(**meta)
        self.theta = float(theta)
        if not math.isfinite(self.theta):
            raise ValidationError("must be finite", "theta")
        c, s = math.cos(self.theta), math.sin(self.theta)
        self._m = np.array([[c, -s], [s, c]])

    def apply_array(self, v):
        self._check_dim(v)
        return self._m @ v

    def linear_form(self, dim):
        if dim != 2:
            raise DimensionMismatchError(f"rotation acts on R^2, got R^{dim}")
        return self._m.copy(), np.zeros(2)

    def _lipschitz(self):
        return 1.0

    def _fixed_points(self, domain, count, seed):
        if math.remainder(self.theta, 2 * math.pi) == 0.0:
            return _domain_representatives(domain, count, seed)
        return [zero(2)]

    def params(self):
        return {"theta": self.theta}


class AffineContraction(Operator):
    """x -> A x + b with ||A|| < 1, given as a matrix or as a scale factor."""

    kind = "affine_contraction"

    def __init__(self, scale=None, matrix=None, shift=None, **meta):
        super().__init__(**meta)
        if (scale is None) == (matrix is None):
            raise ValidationError("give exactly one of 'scale' or 'matrix'", "scale")
        self.scale = None if scale is None else float(scale)
        self.matrix = None
        if self.scale is not None:
            if not 0.0 < self.scale < 1.0:
                raise ValidationError(f"scale {self.scale} outside (0, 1)", "scale")
            kappa = self.scale
        else:
            m = np.array(matrix, dtype=float)
            if m.ndim != 2 or m.shape[0] != m.shape[1] or not np.all(np.isfinite(m)):
                raise ValidationError("matrix must be square and finite", "matrix")
            m.setflags(write=False)
            self.matrix = m
            kappa = float(np.linalg.norm(m, 2))
            if not kappa < 1.0:
                raise ValidationError(f"spectral norm {kappa:.6g} is not < 1", "matrix")
        if self.declared_lipschitz is not None and kappa > self.declared_lipschitz + 1e-10:
            raise ValidationError(
                f"declared bound {self.declared_lipschitz} below actual factor {kappa}", "lipschitz"
            )
        self.kappa = kappa
        if shift is None:
            shift = zero(self.matrix.shape[0] if self.matrix is not None else None)
        elif not isinstance(shift, Point):
            shift = Point.from_json(shift)
        if self.matrix is not None and shift.dim not in (None, self.matrix.shape[0]):
            raise ValidationError("shift length does not match the matrix", "shift")
        self.shift = shift
        if self.matrix is not None:
            self.arity = self.matrix.shape[0]

    def _apply_sparse(self, x):
        if self.matrix is not None:
            return super()._apply_sparse(x)
        return combine(self.scale, x, 1.0, self.shift)

    def linear_form(self, dim):
        if self.matrix is not None:
            if dim != self.matrix.shape[0]:
                raise DimensionMismatchError(f"matrix acts on R^{self.matrix.shape[0]}, got R^{dim}")
            m = self.matrix.copy()
        else:
            m = self.scale * np.eye(dim)
        return m, self.shift.to_array(dim)

    def apply_array(self, v):
        m, b = self.linear_form(v.size)
        return m @ v + b

    def _lipschitz(self):
        return self.kappa

    def _fixed_points(self, domain, count, seed):
        if self.matrix is None and self.shift.dim is None:
            return [scale(1.0 / (1.0 - self.scale), self.shift)]
        dim = self.matrix.shape[0] if self.matrix is not None else self.shift.dim
        return _solve_affine_fixed_point(*self.linear_form(dim))

    def params(self):
        doc = {}
        if self.scale is not None:
            doc["scale"] = self.scale
        else:
            doc["matrix"] = self.matrix.tolist()
        if self.shift.dim is not None or not self.shift.is_zero():
            doc["shift"] = _point_doc(self.shift)
        return doc


class Projection(Operator):
    kind = "projection"

    def __init__(self, domain, **meta):
        super().__init__(**meta)
        if not isinstance(domain, ConvexDomain):
            domain = make_domain(domain)
        if domain.kind == "sparse":
            raise ValidationError("projection needs a ball, box or simplex", "domain")
        self.domain = domain

    def _apply_sparse(self, x):
        return self.domain.project(x)

    def apply_array(self, v):
        return self.domain.project_array(v)

    def apply_rows(self, rows):
        d = self.domain
        if d.kind == "box":
            return np.minimum(np.maximum(rows, d.lower), d.upper)
        if d.kind == "ball":
            c = d.center.to_array(rows.shape[1])
            off = rows - c
            r = np.sqrt(np.einsum("ij,ij->i", off, off))
            out = rows.copy()
            far = r > d.radius
            out[far] = c + (d.radius / r[far])[:, None] * off[far]
            e = out - c
            bad = np.flatnonzero(np.sqrt(np.einsum("ij,ij->i", e, e)) > d.radius)
            for i in bad:
                out[i] = d.project_array(rows[i])
            return out
        return super().apply_rows(rows)

    def _lipschitz(self):
        return 1.0

    def _fixed_points(self, domain, count, seed):
        reps = _domain_representatives(self.domain, count, seed)
        if domain is not None:
            reps = [p for p in reps if domain.contains(p, 1e-12)]
        return reps

    def params(self):
        return {"domain": self.domain.to_spec()}


class HalfRadial(Operator):
    """0 -> 0, x -> x / (2 ||x||): bounded, discontinuous at the origin."""

    kind = "half_radial"

    def _apply_sparse(self, x):
        if x.is_zero():
            return x
        # rescale first so that subnormal inputs do not overflow 0.5 / ||x||
        m = max(abs(c) for c in x.coords.values())
        u = Point({k: c / m for k, c in x.coords.items()}, x.dim)
        return scale(0.5 / norm(u), u)

    def apply_array(self, v):
        m = np.max(np.abs(v)) if v.size else 0.0
        if m == 0.0:
            return np.zeros_like(v)
        u = v / m
        return (0.5 / np.linalg.norm(u)) * u

    def _fixed_points(self, domain, count, seed):
        dim = domain.ambient_dim if domain is not None else None
        first = 0 if dim is not None else 1
        return [zero(dim), Point({first: 0.5}, dim)]


class Averaged(Operator):
    """x -> alpha x + (1 - alpha) inner(x); the relaxation used by the Mann scheme."""

    kind = "averaged"

    def __init__(self, inner, alpha, **meta):
        super().__init__(**meta)
        if not isinstance(inner, Operator):
            inner = make_operator(inner)
        self.inner = inner
        self.alpha = float(alpha)
        if not 0.0 < self.alpha < 1.0:
            raise ValidationError(f"alpha {self.alpha} outside (0, 1)", "alpha")
        self.arity = inner.arity

    def _apply_sparse(self, x):
        return combine(self.alpha, x, 1.0 - self.alpha, self.inner(x))

    def apply_array(self, v):
        return self.alpha * v + (1.0 - self.alpha) * self.inner.apply_array(v)

    def apply_rows(self, rows):
        return self.alpha * rows + (1.0 - self.alpha) * self.inner.apply_rows(rows)

    def linear_form(self, dim):
        form = self.inner.linear_form(dim)
        if form is None:
            return None
        m, b = form
        return self.alpha * np.eye(dim) + (1.0 - self.alpha) * m, (1.0 - self.alpha) * b

    def _lipschitz(self):
        lip = self.inner.lipschitz
        return None if lip is None else self.alpha + (1.0 - self.alpha) * lip

    def _fixed_points(self, domain, count, seed):
        return self.inner.fixed_points(domain, count, seed)

    def params(self):
        return {"inner": self.inner.to_spec(), "alpha": self.alpha}


class Composed(Operator):
    """Left-to-right composition: the first listed map is applied first."""

    kind = "composed"

    def __init__(self, ops, **meta):
        super().__init__(**meta)
        ops = [op if isinstance(op, Operator) else make_operator(op) for op in ops]
        if not ops:
            raise ValidationError("needs at least one operator", "ops")
        self.ops = tuple(ops)
        arities = {op.arity for op in ops} - {None}
        if len(arities) > 1:
            raise ValidationError("members act on different dimensions", "ops")
        self.arity = arities.pop() if arities else None

    def __call__(self, x):
        for op in self.ops:
            x = op(x)
        return x

    def apply_array(self, v):
        for op in self.ops:
            v = op.apply_array(v)
        return v

    def apply_rows(self, rows):
        for op in self.ops:
            rows = op.apply_rows(rows)
        return rows

    def linear_form(self, dim):
        m, b = np.eye(dim), np.zeros(dim)
        for op in self.ops:
            form = op.linear_form(dim)
            if form is None:
                return None
            m2, b2 = form
            m, b = m2 @ m, m2 @ b + b2
        return m, b

    def _lipschitz(self):
        out = 1.0
        for op in self.ops:
            lip = op.lipschitz
            if lip is None:
                return None
            out *= lip
        return out

    def _fixed_points(self, domain, count, seed):
        dim = self.arity or (domain.ambient_dim if domain is not None else None)
        if dim is None:
            return []
        form = self.linear_form(dim)
        return _solve_affine_fixed_point(*form) if form is not None else []

    def params(self):
        return {"ops": [op.to_spec() for op in self.ops]}


class Anchored(Operator):
    """x -> (1 - eps) inner(x) + eps z: the eps-regularised map of the existence iteration."""

    kind = "anchored"

    def __init__(self, inner, eps, anchor, **meta):
        super().__init__(**meta)
        self.inner = inner
        self.eps = float(eps)
        if not 0.0 < self.eps < 1.0:
            raise ValidationError(f"eps {self.eps} outside (0, 1)", "eps")
        self.anchor = anchor
        self.arity = inner.arity

    def _apply_sparse(self, x):
        return combine(1.0 - self.eps, self.inner(x), self.eps, self.anchor)

    def apply_array(self, v):
        return (1.0 - self.eps) * self.inner.apply_array(v) + self.eps * self.anchor.to_array(v.size)

    def linear_form(self, dim):
        form = self.inner.linear_form(dim)
        if form is None:
            return None
        m, b = form
        return (1.0 - self.eps) * m, (1.0 - self.eps) * b + self.eps * self.anchor.to_array(dim)

    def _lipschitz(self):
        lip = self.inner.lipschitz
        return None if lip is None else (1.0 - self.eps) * lip

    def _fixed_points(self, domain, count, seed):
        dim = self.arity or (domain.ambient_dim if domain is not None else None)
        form = self.linear_form(dim) if dim is not None else None
        return _solve_affine_fixed_point(*form) if form is not None else []

    def params(self):
        return {"inner": self.inner.to_spec(), "eps": self.eps, "anchor": _point_doc(self.anchor)}


def relaxed(f, tau):
    """The map g_tau(x) = tau x + (1 - tau) f(x)."""
    return Averaged(f, tau)


# ------------------------------------------------------------------- catalog

CATALOG = {
    "identity": (Identity, (), "x -> x"),
    "scaling": (Scaling, ("c",), "x -> c x"),
    "rotation": (Rotation, ("theta",), "planar rotation by theta radians"),
    "affine_contraction": (
        AffineContraction,
        ("scale", "matrix", "shift"),
        "x -> A x + b with ||A|| < 1 (A = scale * I or a matrix, row-major)",
    ),
    "projection": (Projection, ("domain",), "metric projection onto a ball, box or simplex"),
    "half_radial": (HalfRadial, (), "0 -> 0, x -> x / (2||x||); discontinuous at 0"),
    "averaged": (Averaged, ("inner", "alpha"), "x -> alpha x + (1 - alpha) inner(x)"),
    "composed": (Composed, ("ops",), "apply 'ops' left to right"),
}

_REQUIRED = {
    "scaling": ("c",),
    "rotation": ("theta",),
    "projection": ("domain",),
    "averaged": ("inner", "alpha"),
    "composed": ("ops",),
}


def make_operator(spec, dim=None):
    """Build an operator from its spec document, validating every field."""
    if isinstance(spec, Operator):
        return spec
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ValidationError("operator spec needs a 'kind'", "kind")
    kind = spec["kind"]
    if kind not in CATALOG:
        raise ValidationError(f"unknown operator kind {kind!r}; expected one of {sorted(CATALOG)}", "kind")
    cls, fields, _ = CATALOG[kind]
    extra = set(spec) - {"kind"} - set(fields) - _METADATA
    if extra:
        raise ValidationError(f"unknown {kind} fields {sorted(extra)}", sorted(extra)[0])
    for f in _REQUIRED.get(kind, ()):
        if f not in spec:
            raise ValidationError(f"{kind} needs {f!r}", f)
    kwargs = {f: spec[f] for f in fields if f in spec}
    if "fixed_points" in spec:
        try:
            kwargs["fixed_points"] = [Point.from_json(p, dim) for p in spec["fixed_points"]]
        except TypeError:
            raise ValidationError("must be a list of points", "fixed_points") from None
    if "lipschitz" in spec:
        kwargs["lipschitz"] = spec["lipschitz"]
    if kind == "projection":
        kwargs["domain"] = make_domain(spec["domain"], dim)
    if kind == "averaged":
        kwargs["inner"] = make_operator(spec["inner"], dim)
    if kind == "composed":
        if not isinstance(spec["ops"], list):
            raise ValidationError("must be a list of operator specs", "ops")
        kwargs["ops"] = [make_operator(s, dim) for s in spec["ops"]]
    if kind == "affine_contraction" and "shift" in spec:
        kwargs["shift"] = Point.from_json(spec["shift"])
    try:
        op = cls(**kwargs)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(f"bad {kind} parameters ({exc})", kind) from None
    for p in op.declared_fixed_points or ():
        try:
            gap = norm(combine(1.0, op(p), -1.0, p))
        except DimensionMismatchError:
            continue
        if gap > 1e-9:
            raise ValidationError(f"declared fixed point {p!r} moves by {gap:.3e}", "fixed_points")
    return op


def evaluate(f, x):
    return f(x)


def zoo():
    """Catalog listing: ``[(kind, parameters, description)]``."""
    return [(k, fields, desc) for k, (_, fields, desc) in CATALOG.items()]


# -------------------------------------------------------------------- probes


@dataclass(frozen=True)
class EpsilonBand:
    """The pair set {(x, y) in D x D : ||y - f(x)|| <= epsilon}."""

    epsilon: float

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValidationError("epsilon must be > 0", "epsilon")


def local_nonexpansiveness_probe(f, domain, band, samples, seed, slack=1e-12):
    """Rejection-sample pairs from the band and test ||f(x) - f(y)|| <= ||x - y||.

    At most ``100 * samples`` candidate pairs are drawn, in batches of
    ``samples``; an empty band yields ``not_triggered``.
    """
    if samples < 1:
        raise ValidationError("samples must be >= 1", "samples")
    rng = np.random.default_rng(seed)
    xs, ys = [], []
    accepted = 0
    attempts = 0
    while accepted < samples and attempts < 100 * samples:
        x = domain.sample_rows(rng, samples)
        y = domain.sample_rows(rng, samples)
        attempts += samples
        fx = f.apply_rows(x)
        keep = np.flatnonzero(_kernels.diff_norms(y, fx) <= band.epsilon)
        keep = keep[: samples - accepted]
        xs.append(x[keep])
        ys.append(y[keep])
        accepted += keep.size
    witnesses = [("accepted", float(accepted)), ("attempts", float(attempts))]
    if accepted == 0:
        return Verdict("local_nonexpansive", Status.NOT_TRIGGERED, band.epsilon, None, witnesses)
    x = np.concatenate(xs)
    y = np.concatenate(ys)
    worst, bad = _kernels.max_ratio(x, y, f.apply_rows(x), f.apply_rows(y), slack)
    witnesses = [("max_ratio", float(worst)), ("violations", float(bad))] + witnesses
    status = Status.HOLDS if bad == 0 else Status.FAILS
    return Verdict("local_nonexpansive", status, band.epsilon, None, witnesses)


def sampled_nonexpansiveness(f, domain, pairs=10_000, seed=0, slack=1e-12):
    """Test ||f(x) - f(y)|| <= ||x - y|| + slack on ``pairs`` seeded pairs from ``domain``."""
    rng = np.random.default_rng(seed)
    x = domain.sample_rows(rng, pairs)
    y = domain.sample_rows(rng, pairs)
    worst, bad = _kernels.max_ratio(x, y, f.apply_rows(x), f.apply_rows(y), slack)
    status = Status.HOLDS if bad == 0 else Status.FAILS
    witnesses = [("max_ratio", float(worst)), ("violations", float(bad)), ("pairs", float(pairs))]
    return Verdict("nonexpansive", status, slack, None, witnesses)
