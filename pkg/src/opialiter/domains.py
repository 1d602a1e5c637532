"""Bounded closed convex sets: ball, box, probability simplex, sparse ball.

Each domain knows membership, the Euclidean metric projection and its exact
diameter.  Array methods (``*_array`` / ``*_rows``) serve the dense engines;
the Point methods are the public surface.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, ValidationError
from .space import Point, combine, distance, norm, zero

KINDS = ("ball", "box", "simplex", "sparse")


@dataclass(frozen=True)
class ConvexDomain:
    kind: str
    center: Point = None
    radius: float = None
    lower: np.ndarray = None
    upper: np.ndarray = None
    dim: int = None

    # -- construction ---------------------------------------------------

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown domain kind {self.kind!r}", "kind")
        if self.kind in ("ball", "sparse"):
            if self.radius is None or not self.radius > 0 or not math.isfinite(self.radius):
                raise ValidationError("radius must be a positive finite number", "radius")
        if self.kind == "box":
            lo, up = self.lower, self.upper
            if lo.shape != up.shape or lo.ndim != 1 or lo.size < 1:
                raise ValidationError("lower/upper must be equal-length vectors", "lower")
            if not np.all(lo < up):
                raise ValidationError("lower must be < upper componentwise", "upper")
        if self.kind == "simplex" and (self.dim is None or self.dim < 1):
            raise ValidationError("simplex dimension must be >= 1", "dim")
        if self.kind == "simplex" and self.dim == 1:
            # a single vertex has zero diameter
            raise ValidationError("simplex(1) is a point; diameter must be > 0", "dim")

    def __eq__(self, other):
        if not isinstance(other, ConvexDomain):
            return NotImplemented
        return self.to_spec() == other.to_spec()

    def __hash__(self):
        return hash(repr(self.to_spec()))

    # -- Point interface ------------------------------------------------

    @property
    def ambient_dim(self):
        if self.kind == "ball":
            return self.center.dim
        if self.kind == "box":
            return self.lower.size
        if self.kind == "simplex":
            return self.dim
        return None

    def centre_point(self):
        if self.kind == "ball":
            return self.center
        if self.kind == "box":
            return Point.from_array(0.5 * (self.lower + self.upper))
        if self.kind == "simplex":
            return Point.from_array(np.full(self.dim, 1.0 / self.dim))
        return zero()

    def contains(self, x, tol=0.0):
        if tol < 0:
            raise ValidationError("tol must be >= 0", "tol")
        return self.gap(x) <= tol

    def gap(self, x):
        """Distance from ``x`` to the domain."""
        if self.kind == "sparse":
            return max(norm(x) - self.radius, 0.0)
        if self.kind == "ball" and (x.dim is None or self.center.dim is None):
            return max(distance(x, self.center) - self.radius, 0.0)
        return self.gap_array(self._as_array(x))

    def project(self, x):
        if self.kind == "sparse":
            raise NotImplementedError("projection onto the sparse norm ball is not supported")
        if self.kind == "ball" and (x.dim is None or self.center.dim is None):
            d = combine(1.0, x, -1.0, self.center)
            r = norm(d)
            if r <= self.radius:
                return x
            t = self.radius / r
            p = combine(1.0, self.center, t, d)
            # shrink by ulps until the rounded result passes the membership test
            while distance(p, self.center) > self.radius:
                t = math.nextafter(t, 0.0)
                p = combine(1.0, self.center, t, d)
            return p
        return Point.from_array(self.project_array(self._as_array(x)))

    def diameter(self):
        if self.kind in ("ball", "sparse"):
            return 2.0 * self.radius
        if self.kind == "box":
            return float(np.linalg.norm(self.upper - self.lower))
        return math.sqrt(2.0)

    # -- array interface --------------------------------------------------

    def _as_array(self, x):
        n = self.ambient_dim
        if x.dim is not None and x.dim != n:
            raise DimensionMismatchError(f"point of dimension {x.dim} in domain of dimension {n}")
        return x.to_array(n)

    def project_array(self, v):
        if self.kind == "ball":
            c = self.center.to_array()
            d = v - c
            r = math.sqrt(d @ d)
            if r <= self.radius:
                return v
            return _radial_array(c, d, self.radius / r, self.radius)
        if self.kind == "box":
            return np.minimum(np.maximum(v, self.lower), self.upper)
        if self.kind == "simplex":
            return _project_simplex(v)
        raise NotImplementedError("projection onto the sparse norm ball is not supported")

    def gap_array(self, v):
        """Distance from the dense vector ``v`` to the domain."""
        if self.kind in ("ball", "sparse"):
            c = self.center.to_array(v.size) if self.kind == "ball" else 0.0
            d = v - c
            return max(math.sqrt(d @ d) - self.radius, 0.0)
        p = self.project_array(v)
        d = v - p
        return math.sqrt(d @ d)

    def gap_rows(self, rows):
        if self.kind in ("ball", "sparse"):
            c = self.center.to_array(rows.shape[1]) if self.kind == "ball" else 0.0
            d = rows - c
            return np.maximum(np.sqrt(np.einsum("ij,ij->i", d, d)) - self.radius, 0.0)
        if self.kind == "box":
            p = np.minimum(np.maximum(rows, self.lower), self.upper)
        else:
            p = np.array([_project_simplex(r) for r in rows])
        d = rows - p
        return np.sqrt(np.einsum("ij,ij->i", d, d))

    def sample_rows(self, rng, n):
        """Draw ``n`` points of the domain (uniform for ball/box, flat Dirichlet on the simplex)."""
        if self.kind == "ball":
            d = self.center.dim
            if d is None:
                raise NotImplementedError("sampling needs a dense ball")
            g = rng.standard_normal((n, d))
            g /= np.linalg.norm(g, axis=1, keepdims=True)
            r = self.radius * rng.random(n) ** (1.0 / d)
            return self.center.to_array() + g * r[:, None]
        if self.kind == "box":
            return self.lower + (self.upper - self.lower) * rng.random((n, self.lower.size))
        if self.kind == "simplex":
            return rng.dirichlet(np.ones(self.dim), size=n)
        raise NotImplementedError("sampling from the sparse norm ball is not supported")

    def sample(self, rng, n):
        return [Point.from_array(r) for r in self.sample_rows(rng, n)]

    # -- spec documents -----------------------------------------------------

    def to_spec(self):
        if self.kind == "ball":
            return {"kind": "ball", "center": _point_doc(self.center), "radius": self.radius}
        if self.kind == "box":
            return {"kind": "box", "lower": self.lower.tolist(), "upper": self.upper.tolist()}
        if self.kind == "simplex":
            return {"kind": "simplex", "dim": self.dim}
        return {"kind": "sparse", "radius": self.radius}


def _point_doc(p):
    if p.dim is not None:
        return p.to_array().tolist()
    return p.to_json()


def _radial_array(c, d, t, radius):
    # c + t d, with t shrunk by ulps so that the result lies in the ball
    # after rounding; this makes projection exactly idempotent
    while True:
        p = c + t * d
        e = p - c
        if math.sqrt(e @ e) <= radius:
            return p
        t = math.nextafter(t, 0.0)


def _project_simplex(v):
    # sort-and-threshold; the stable sort keeps ties in index order
    n = v.size
    u = -np.sort(-v, kind="stable")
    css = np.cumsum(u) - 1.0
    k = np.arange(1, n + 1)
    rho = np.flatnonzero(u - css / k > 0)[-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def ball(center, radius):
    if not isinstance(center, Point):
        center = Point.from_array(center)
    return ConvexDomain("ball", center=center, radius=float(radius))


def box(lower, upper):
    lo = np.asarray(lower.to_array() if isinstance(lower, Point) else lower, dtype=float)
    up = np.asarray(upper.to_array() if isinstance(upper, Point) else upper, dtype=float)
    lo.setflags(write=False)
    up.setflags(write=False)
    return ConvexDomain("box", lower=lo, upper=up, dim=lo.size)


def simplex(dim):
    return ConvexDomain("simplex", dim=int(dim))


def sparse_ball(radius_bound):
    return ConvexDomain("sparse", radius=float(radius_bound), center=zero())


def make_domain(spec, dim=None):
    """Build a domain from ``{"kind": ..., ...parameters}``."""
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ValidationError("domain spec needs a 'kind'", "kind")
    kind = spec["kind"]
    allowed = {
        "ball": {"kind", "center", "radius"},
        "box": {"kind", "lower", "upper"},
        "simplex": {"kind", "dim"},
        "sparse": {"kind", "radius", "radius_bound"},
    }
    if kind not in allowed:
        raise ValidationError(f"unknown domain kind {kind!r}; expected one of {list(allowed)}", "kind")
    extra = set(spec) - allowed[kind]
    if extra:
        raise ValidationError(f"unknown domain fields {sorted(extra)}", sorted(extra)[0])
    try:
        if kind == "ball":
            if "radius" not in spec:
                raise ValidationError("missing 'radius'", "radius")
            if "center" in spec:
                c = Point.from_json(spec["center"], dim)
            else:
                c = zero(dim)
            return ball(c, spec["radius"])
        if kind == "box":
            for f in ("lower", "upper"):
                if f not in spec:
                    raise ValidationError(f"missing {f!r}", f)
            return box(spec["lower"], spec["upper"])
        if kind == "simplex":
            return simplex(spec.get("dim", dim))
        r = spec.get("radius", spec.get("radius_bound"))
        if r is None:
            raise ValidationError("missing 'radius'", "radius")
        return sparse_ball(r)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(f"bad {kind} parameters ({exc})", "domain") from None


__all__ = [
    "ConvexDomain",
    "ball",
    "box",
    "simplex",
    "sparse_ball",
    "make_domain",
]
