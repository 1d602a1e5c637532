"""Points of R^d and of finite-support l2, with Hilbert-space arithmetic.

A :class:`Point` is a sparse map ``index -> coefficient`` kept in canonical
form (no stored zeros).  Dense points carry ``dim``; sparse points leave it
``None`` and may use any non-negative index.
"""

import math
from types import MappingProxyType

import numpy as np

from .errors import DimensionMismatchError, ValidationError


class Point:
    __slots__ = ("_coords", "dim", "_hash")

    def __init__(self, coords=None, dim=None):
        clean = {}
        if coords:
            items = coords.items() if hasattr(coords, "items") else coords
            for k, v in items:
                k = int(k)
                v = float(v)
                if k < 0:
                    raise ValidationError(f"negative index {k}", "coords")
                if not math.isfinite(v):
                    raise ValidationError(f"non-finite coefficient at index {k}", "coords")
                if v != 0.0:
                    clean[k] = v
        if dim is not None:
            dim = int(dim)
            if dim < 1:
                raise ValidationError("dim must be positive", "dim")
            bad = [k for k in clean if k >= dim]
            if bad:
                raise DimensionMismatchError(f"index {max(bad)} outside dimension {dim}")
        self._coords = clean
        self.dim = dim
        self._hash = None

    @classmethod
    def _trusted(cls, coords, dim):
        # caller guarantees canonical form
        p = cls.__new__(cls)
        p._coords = coords
        p.dim = dim
        p._hash = None
        return p

    @classmethod
    def from_array(cls, values, dense=True):
        arr = np.asarray(values, dtype=float).ravel()
        idx = np.flatnonzero(arr)
        coords = dict(zip(idx.tolist(), arr[idx].tolist()))
        if not all(math.isfinite(v) for v in coords.values()):
            raise ValidationError("non-finite coefficient", "coords")
        return cls._trusted(coords, arr.size if dense else None)

    @classmethod
    def dense(cls, *values):
        return cls.from_array(values)

    @property
    def coords(self):
        return MappingProxyType(self._coords)

    @property
    def is_dense(self):
        return self.dim is not None

    def __getitem__(self, index):
        return self._coords.get(index, 0.0)

    def support(self):
        return sorted(self._coords)

    def to_array(self, dim=None):
        n = dim if dim is not None else self.dim
        if n is None:
            n = max(self._coords, default=-1) + 1
        out = np.zeros(n)
        for k, v in self._coords.items():
            if k >= n:
                raise DimensionMismatchError(f"index {k} outside dimension {n}")
            out[k] = v
        return out

    def is_zero(self):
        return not self._coords

    def __eq__(self, other):
        if not isinstance(other, Point):
            return NotImplemented
        return self._coords == other._coords

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self._coords.items()))
        return self._hash

    def __add__(self, other):
        return combine(1.0, self, 1.0, other)

    def __sub__(self, other):
        return combine(1.0, self, -1.0, other)

    def __mul__(self, a):
        return scale(a, self)

    __rmul__ = __mul__

    def __neg__(self):
        return scale(-1.0, self)

    def __repr__(self):
        if self.dim is not None and self.dim <= 8:
            return f"Point({self.to_array().tolist()})"
        body = ", ".join(f"{k}: {v!r}" for k, v in sorted(self._coords.items()))
        return f"Point({{{body}}}, dim={self.dim})"

    def to_json(self):
        return {
            "coords": {str(k): v for k, v in sorted(self._coords.items())},
            "dim": self.dim,
        }

    @classmethod
    def from_json(cls, doc, dim=None):
        """Accept ``{"coords": {...}, "dim": n}`` or a plain list (dense)."""
        if isinstance(doc, Point):
            return doc
        if isinstance(doc, (list, tuple)):
            p = cls.from_array(doc)
            if dim is not None and p.dim != dim:
                raise DimensionMismatchError(f"expected {dim} coordinates, got {p.dim}")
            return p
        if not isinstance(doc, dict):
            raise ValidationError("point must be a list or an object with 'coords'", "coords")
        extra = set(doc) - {"coords", "dim"}
        if extra:
            raise ValidationError(f"unknown point fields {sorted(extra)}", sorted(extra)[0])
        if "coords" not in doc:
            raise ValidationError("missing 'coords'", "coords")
        try:
            coords = {int(k): v for k, v in doc["coords"].items()}
        except (AttributeError, ValueError) as exc:
            raise ValidationError(f"bad coords ({exc})", "coords") from None
        return cls(coords, doc.get("dim", dim))


def zero(dim=None):
    return Point._trusted({}, dim)


def basis(n, dim=None):
    """The canonical unit vector e_n."""
    return Point({n: 1.0}, dim)


def _result_dim(x, y):
    if x.dim is not None and y.dim is not None:
        if x.dim != y.dim:
            raise DimensionMismatchError(f"dimensions {x.dim} and {y.dim} differ")
        return x.dim
    dim = x.dim if x.dim is not None else y.dim
    if dim is not None:
        other = y if x.dim is not None else x
        if other._coords and max(other._coords) >= dim:
            raise DimensionMismatchError(
                f"sparse index {max(other._coords)} outside dimension {dim}"
            )
    return dim


def scale(a, x):
    a = float(a)
    if a == 0.0:
        return Point._trusted({}, x.dim)
    out = {}
    for k, v in x._coords.items():
        w = a * v
        if w != 0.0:
            out[k] = w
    return Point._trusted(out, x.dim)


def combine(a, x, b, y):
    """Return ``a*x + b*y`` in canonical form."""
    dim = _result_dim(x, y)
    a = float(a)
    b = float(b)
    out = {}
    yc = y._coords
    for k, v in x._coords.items():
        w = a * v + b * yc[k] if k in yc else a * v
        if w != 0.0:
            out[k] = w
    xc = x._coords
    for k, v in yc.items():
        if k not in xc:
            w = b * v
            if w != 0.0:
                out[k] = w
    return Point._trusted(out, dim)


def inner_product(x, y):
    if len(x._coords) > len(y._coords):
        x, y = y, x
    yc = y._coords
    return math.fsum(v * yc[k] for k, v in x._coords.items() if k in yc)


def norm(x):
    return math.hypot(*x._coords.values())


def distance(x, y):
    return norm(combine(1.0, x, -1.0, y))


def stack(points, columns=None):
    """Stack points into a dense array over a shared column index.

    Returns ``(array, columns)``; when ``columns`` is None the sorted union
    of supports is used (or ``range(dim)`` for dense points).
    """
    points = list(points)
    if columns is None:
        dims = {p.dim for p in points}
        if len(dims) == 1 and None not in dims:
            columns = tuple(range(dims.pop()))
        else:
            cols = set()
            for p in points:
                cols.update(p._coords)
            columns = tuple(sorted(cols))
    columns = tuple(columns)
    pos = {c: i for i, c in enumerate(columns)}
    out = np.zeros((len(points), len(columns)))
    for r, p in enumerate(points):
        for k, v in p._coords.items():
            try:
                out[r, pos[k]] = v
            except KeyError:
                raise DimensionMismatchError(f"index {k} not in column set") from None
    return out, columns


def unstack_row(row, columns, dim):
    row = np.asarray(row)
    if dim is not None and len(columns) == dim:
        return Point.from_array(row)
    nz = np.flatnonzero(row)
    return Point._trusted({columns[i]: float(row[i]) for i in nz}, dim)
