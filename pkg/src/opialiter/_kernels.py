"""Hot numeric loops, compiled with numba when available.

Every kernel exists twice: a numba ``@njit`` version and a pure-numpy
fallback with identical semantics.  Set ``OPIALITER_DISABLE_NUMBA=1`` to
force the numpy path (the module-level names then bind to the fallbacks).
Both sets stay reachable through :data:`NUMBA_KERNELS` and
:data:`NUMPY_KERNELS` so the benchmark and the tests can compare them.
"""

import os

import numpy as np

_FLAG = os.environ.get("OPIALITER_DISABLE_NUMBA", "").strip().lower()
DISABLED = _FLAG in {"1", "true", "yes", "on"}

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a declared dependency
    njit = None


# ---------------------------------------------------------------- numpy path

def _np_diff_norms(a, b):
    d = a - b
    return np.sqrt(np.einsum("ij,ij->i", d, d))


def _np_dist_to_point(a, z):
    d = a - z[None, :]
    return np.sqrt(np.einsum("ij,ij->i", d, d))


def _np_step_norms(a):
    return _np_diff_norms(a[1:], a[:-1])


def _np_fejer_first_violation(dist, eta, tol):
    bad = np.flatnonzero(dist[1:] > dist[:-1] + eta[: dist.size - 1] + tol)
    return int(bad[0]) if bad.size else -1


def _np_max_ratio(x, y, fx, fy, slack):
    dx = _np_diff_norms(x, y)
    df = _np_diff_norms(fx, fy)
    ok = dx > 0.0
    worst = float(np.max(df[ok] / dx[ok])) if ok.any() else 0.0
    violations = int(np.count_nonzero(df > dx + slack))
    return worst, violations


def _np_linear_iterate(m, b, x0, tau, max_iter, stop_tol):
    # tau < 0 selects the plain Picard update x_{n+1} = f(x_n)
    d = x0.size
    xs = np.empty((max_iter + 1, d))
    fs = np.empty((max_iter + 1, d))
    xs[0] = x0
    fs[0] = m @ x0 + b
    picard = tau < 0.0
    n = 0
    hit = False
    while n < max_iter:
        if picard:
            xs[n + 1] = fs[n]
        else:
            xs[n + 1] = tau * xs[n] + (1.0 - tau) * fs[n]
        fs[n + 1] = m @ xs[n + 1] + b
        n += 1
        if stop_tol > 0.0:
            diff = xs[n] - xs[n - 1]
            if np.sqrt(diff @ diff) <= stop_tol:
                hit = True
                break
    return xs[: n + 1], fs[: n + 1], hit


# ---------------------------------------------------------------- numba path

def _nb_diff_norms(a, b):
    n, d = a.shape
    out = np.empty(n)
    for i in range(n):
        s = 0.0
        for j in range(d):
            t = a[i, j] - b[i, j]
            s += t * t
        out[i] = np.sqrt(s)
    return out


def _nb_dist_to_point(a, z):
    n, d = a.shape
    out = np.empty(n)
    for i in range(n):
        s = 0.0
        for j in range(d):
            t = a[i, j] - z[j]
            s += t * t
        out[i] = np.sqrt(s)
    return out


def _nb_step_norms(a):
    n, d = a.shape
    out = np.empty(max(n - 1, 0))
    for i in range(n - 1):
        s = 0.0
        for j in range(d):
            t = a[i + 1, j] - a[i, j]
            s += t * t
        out[i] = np.sqrt(s)
    return out


def _nb_fejer_first_violation(dist, eta, tol):
    for i in range(dist.size - 1):
        if dist[i + 1] > dist[i] + eta[i] + tol:
            return i
    return -1


def _nb_max_ratio(x, y, fx, fy, slack):
    n, d = x.shape
    worst = 0.0
    violations = 0
    for i in range(n):
        sx = 0.0
        sf = 0.0
        for j in range(d):
            t = x[i, j] - y[i, j]
            sx += t * t
            u = fx[i, j] - fy[i, j]
            sf += u * u
        dx = np.sqrt(sx)
        df = np.sqrt(sf)
        if dx > 0.0 and df / dx > worst:
            worst = df / dx
        if df > dx + slack:
            violations += 1
    return worst, violations


def _nb_linear_iterate(m, b, x0, tau, max_iter, stop_tol):
    d = x0.size
    xs = np.empty((max_iter + 1, d))
    fs = np.empty((max_iter + 1, d))
    for i in range(d):
        xs[0, i] = x0[i]
    for i in range(d):
        s = b[i]
        for j in range(d):
            s += m[i, j] * xs[0, j]
        fs[0, i] = s
    picard = tau < 0.0
    n = 0
    hit = False
    while n < max_iter:
        for i in range(d):
            if picard:
                xs[n + 1, i] = fs[n, i]
            else:
                xs[n + 1, i] = tau * xs[n, i] + (1.0 - tau) * fs[n, i]
        for i in range(d):
            s = b[i]
            for j in range(d):
                s += m[i, j] * xs[n + 1, j]
            fs[n + 1, i] = s
        n += 1
        if stop_tol > 0.0:
            acc = 0.0
            for i in range(d):
                t = xs[n, i] - xs[n - 1, i]
                acc += t * t
            if np.sqrt(acc) <= stop_tol:
                hit = True
                break
    return xs[: n + 1], fs[: n + 1], hit


_NAMES = (
    "diff_norms",
    "dist_to_point",
    "step_norms",
    "fejer_first_violation",
    "max_ratio",
    "linear_iterate",
)

NUMPY_KERNELS = {name: globals()["_np_" + name] for name in _NAMES}

if njit is not None:
    NUMBA_KERNELS = {
        name: njit(cache=True, nogil=True)(globals()["_nb_" + name]) for name in _NAMES
    }
else:  # pragma: no cover
    NUMBA_KERNELS = {}

BACKEND = "numba" if NUMBA_KERNELS and not DISABLED else "numpy"
_ACTIVE = NUMBA_KERNELS if BACKEND == "numba" else NUMPY_KERNELS

diff_norms = _ACTIVE["diff_norms"]
dist_to_point = _ACTIVE["dist_to_point"]
step_norms = _ACTIVE["step_norms"]
fejer_first_violation = _ACTIVE["fejer_first_violation"]
max_ratio = _ACTIVE["max_ratio"]
linear_iterate = _ACTIVE["linear_iterate"]


def warmup(kernels=None):
    """Trigger compilation of every kernel in ``kernels`` (default: the active set) on tiny inputs."""
    k = _ACTIVE if kernels is None else kernels
    a = np.zeros((3, 2))
    z = np.zeros(2)
    k["diff_norms"](a, a)
    k["dist_to_point"](a, z)
    k["step_norms"](a)
    k["fejer_first_violation"](np.zeros(3), np.zeros(3), 0.0)
    k["max_ratio"](a, a, a, a, 0.0)
    k["linear_iterate"](np.eye(2), z, z, 0.5, 2, 0.0)
    k["linear_iterate"](np.eye(2), z, z, -1.0, 2, 1e-3)
