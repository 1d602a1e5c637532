"""Tail-window estimators and checkers for the asymptotic conditions.

Every lim inf / lim sup is replaced by the min / max over a fixed
:class:`TailWindow` of the sequence; verdicts carry the estimates they rest
on.  Strict inequalities are tested with a positive margin and ties inside
the margin come back ``inconclusive``.
"""

import math

import numpy as np

from . import _kernels
from .errors import InsufficientDataError, NotInLambdaError, ValidationError
from .space import stack
from .verdict import Status, TailWindow, Verdict

DEFAULT_AR_TOL = 1e-8
DEFAULT_LAMBDA_TOL = 1e-9
DEFAULT_MARGIN = 1e-9
FEJER_SLACK = 1e-12
DEFAULT_LIMIT_TOL = 1e-6


def _window(seq_len, w):
    return w if w is not None else TailWindow.default(seq_len)


def _tail(seq, w):
    seq = np.asarray(seq, dtype=float)
    if seq.size < w.burn_in + w.window:
        raise InsufficientDataError(
            f"sequence of length {seq.size} is shorter than burn_in + window = {w.burn_in + w.window}"
        )
    return seq[seq.size - w.window:]


def tail_bounds(seq, w=None):
    """(lo, hi) = (min, max) of the final ``window`` entries; estimates of lim inf / lim sup."""
    w = _window(len(seq), w)
    t = _tail(seq, w)
    return float(t.min()), float(t.max())


def tail_mean(seq, w=None):
    w = _window(len(seq), w)
    t = _tail(seq, w)
    return math.fsum(t) / t.size


# ---------------------------------------------------------------- profiles


def ar_profile(trace):
    """Step norms ||x_{n+1} - x_n||."""
    if len(trace) < 2:
        raise InsufficientDataError("asymptotic regularity needs at least two points")
    return trace.step_norms()


def ar_check(trace, w=None, tol=DEFAULT_AR_TOL):
    steps = ar_profile(trace)
    w = _window(steps.size, w)
    lo, hi = tail_bounds(steps, w)
    status = Status.HOLDS if hi <= tol else Status.FAILS
    return Verdict("ar", status, tol, w, [("step_lo", lo), ("step_hi", hi)])


def residual_profile(trace):
    """Residual norms ||f(x_n) - x_n||."""
    return trace.residuals()


def residual_check(trace, w=None, tol=DEFAULT_AR_TOL):
    res = residual_profile(trace)
    w = _window(res.size, w)
    lo, hi = tail_bounds(res, w)
    status = Status.HOLDS if hi <= tol else Status.FAILS
    return Verdict("residual", status, tol, w, [("residual_lo", lo), ("residual_hi", hi),
                                                ("final_residual", float(res[-1]))])


# ------------------------------------------------------------ Lambda and psi


def lambda_membership(trace, z, w=None, tol=DEFAULT_LAMBDA_TOL):
    """Does lim ||x_n - z|| exist?  Holds iff the tail spread hi - lo is at most ``tol``."""
    d = trace.distances_to(z)
    w = _window(d.size, w)
    lo, hi = tail_bounds(d, w)
    status = Status.HOLDS if hi - lo <= tol else Status.FAILS
    return Verdict("lambda", status, tol, w, [("dist_lo", lo), ("dist_hi", hi), ("spread", hi - lo)])


def psi_estimate(trace, z, w=None, tol=DEFAULT_LAMBDA_TOL):
    """lim ||x_n - z||, estimated by the tail mean; ``z`` must pass :func:`lambda_membership`."""
    v = lambda_membership(trace, z, w, tol)
    if not v.holds:
        raise NotInLambdaError(
            f"distance to z does not settle: spread {v.witness('spread'):.3e} > {tol:.1e}"
        )
    d = trace.distances_to(z)
    # rounding in the mean must not leave the [lo, hi] bracket
    return min(max(tail_mean(d, v.window), v.witness("dist_lo")), v.witness("dist_hi"))


# ------------------------------------------------------------------- limits


def detect_limit(trace, tol=DEFAULT_AR_TOL):
    """Strong limit of a settled trace (last point), or None if the steps have not died out."""
    if len(trace) < 2:
        return None
    steps = trace.step_norms()
    w = TailWindow.default(steps.size)
    if tail_bounds(steps, w)[1] > tol:
        return None
    return trace.final_point


def weak_limit_evidence(trace, limit, coords, w=None):
    """Necessary conditions for x_n -> limit weakly: bounded norms and coordinate convergence.

    Returns ``(sup_norm, worst_coordinate_gap)`` over the tail window, the
    gap taken on ``coords`` (indices) only.
    """
    norms = _kernels.dist_to_point(trace.xs, np.zeros(trace.xs.shape[1]))
    w = _window(norms.size, w)
    sup_norm = float(_tail(norms, w).max())
    pos = {c: i for i, c in enumerate(trace.columns)}
    worst = 0.0
    for k in sorted(set(coords)):
        col = trace.xs[:, pos[k]] if k in pos else np.zeros(len(trace))
        gap = np.abs(_tail(col, w) - limit[k])
        worst = max(worst, float(gap.max()))
    return sup_norm, worst


def opial_probe(trace, limit, probes, w=None, margin=DEFAULT_MARGIN,
                lambda_tol=DEFAULT_LAMBDA_TOL, limit_tol=DEFAULT_LIMIT_TOL):
    """lim inf ||x_n - w|| < lim inf ||x_n - z|| for every probe z != w.

    Also checks psi(w) < psi(z) whenever both w and z are in Lambda.
    Probes equal to the limit are skipped (counted in ``skipped``).  A limit
    whose coordinates are not matched by the tail within ``limit_tol`` is
    rejected and the verdict is inconclusive.
    """
    dw = trace.distances_to(limit)
    w = _window(dw.size, w)
    lo_w, _ = tail_bounds(dw, w)
    w_in_lambda = lambda_membership(trace, limit, w, lambda_tol).holds
    psi_w = tail_mean(dw, w) if w_in_lambda else None

    coords = set(limit.coords)
    for z in probes:
        coords.update(z.coords)
    sup_norm, coord_gap = weak_limit_evidence(trace, limit, coords, w)
    witnesses = [("liminf_limit", lo_w), ("sup_norm", sup_norm), ("coord_gap", coord_gap)]
    if coord_gap > limit_tol:
        # the declared limit is not even a coordinatewise limit
        witnesses.append(("limit_rejected", 1.0))
        return Verdict("opial", Status.INCONCLUSIVE, margin, w, witnesses)

    failed = tied = skipped = 0
    for i, z in enumerate(probes):
        if z == limit:
            skipped += 1
            continue
        dz = trace.distances_to(z)
        lo_z, hi_z = tail_bounds(dz, w)
        gap = lo_z - lo_w
        witnesses.append((f"liminf_probe[{i}]", lo_z))
        if gap > margin:
            pass
        elif gap < -margin:
            failed += 1
        else:
            tied += 1
        if psi_w is not None and hi_z - lo_z <= lambda_tol:
            psi_z = tail_mean(dz, w)
            witnesses.append((f"psi_probe[{i}]", psi_z))
            if not psi_w + margin < psi_z:
                if psi_z < psi_w - margin:
                    failed += 1
                else:
                    tied += 1
    if psi_w is not None:
        witnesses.append(("psi_limit", psi_w))
    witnesses += [("failed", float(failed)), ("tied", float(tied)), ("skipped", float(skipped))]
    if failed:
        status = Status.FAILS
    elif tied:
        status = Status.INCONCLUSIVE
    else:
        status = Status.HOLDS
    return Verdict("opial", status, margin, w, witnesses)


# ------------------------------------------------------------ (sharp), (flat)


def sharp_check(f, y_seq, y, w=None, tol=DEFAULT_MARGIN):
    """lim inf ||f(y_n) - f(y)|| <= lim inf ||y_n - y|| along a sequence y_n -> y (weakly)."""
    y_seq = list(y_seq)
    fy = f(y)
    images = [f(p) for p in y_seq]
    arr, cols = stack(y_seq + images + [y, fy])
    n = len(y_seq)
    dy = _kernels.dist_to_point(arr[:n], arr[2 * n])
    df = _kernels.dist_to_point(arr[n: 2 * n], arr[2 * n + 1])
    w = _window(n, w)
    lhs, _ = tail_bounds(df, w)
    rhs, _ = tail_bounds(dy, w)
    status = Status.HOLDS if lhs <= rhs + tol else Status.FAILS
    return Verdict("sharp", status, tol, w, [("liminf_image_gap", lhs), ("liminf_gap", rhs)])


def _flat_arrays(f, trace):
    if f is None or f is trace.operator:
        return trace.xs, trace.fs
    if trace.dim is not None:
        return trace.xs, f.apply_rows(np.asarray(trace.xs))
    pts = trace.points
    both, _ = stack(pts + [f(p) for p in pts])
    return both[: len(pts)], both[len(pts):]


def flat_check(f, trace, delta, d_m, w=None, margin=DEFAULT_MARGIN):
    """Expansion premise 0 < A < B, then C > delta * d_M, with

    A = lim sup ||y_{n+1} - y_n||, B = lim sup ||f(y_{n+1}) - f(y_n)||,
    C = lim sup ||y_{n+1} - f(y_n)||.  Evaluated along ``trace`` only.
    """
    if not 0.0 < delta < 1.0:
        raise ValidationError(f"delta {delta} outside (0, 1)", "delta")
    if not d_m > 0:
        raise ValidationError("diameter must be > 0", "d_m")
    if len(trace) < 3:
        raise InsufficientDataError("flat_check needs at least three points")
    xs, fs = _flat_arrays(f, trace)
    a_seq = _kernels.step_norms(xs)
    b_seq = _kernels.step_norms(np.ascontiguousarray(fs))
    c_seq = _kernels.diff_norms(xs[1:], np.ascontiguousarray(fs[:-1]))
    w = _window(a_seq.size, w)
    a = tail_bounds(a_seq, w)[1]
    b = tail_bounds(b_seq, w)[1]
    c = tail_bounds(c_seq, w)[1]
    threshold = delta * d_m
    witnesses = [("A", a), ("B", b), ("C", c), ("delta_dM", threshold)]
    if not (a > margin and b > a + margin):
        return Verdict("flat", Status.NOT_TRIGGERED, threshold, w, witnesses)
    if c > threshold + margin:
        status = Status.HOLDS
    elif c < threshold - margin:
        status = Status.FAILS
    else:
        status = Status.INCONCLUSIVE
    return Verdict("flat", status, threshold, w, witnesses)


# -------------------------------------------------------------------- Fejer


def fejer_monitor(trace, y, eta=None, slack=FEJER_SLACK):
    """||x_{n+1} - y|| <= ||x_n - y|| + eta_n for every n (missing eta_n count as 0)."""
    n = len(trace)
    eta_arr = np.zeros(max(n - 1, 1))
    if eta is not None:
        eta = np.asarray(eta, dtype=float)
        if eta.size and (not np.all(np.isfinite(eta)) or eta.min() < 0):
            raise ValidationError("eta entries must be finite and >= 0", "eta")
        k = min(eta.size, eta_arr.size)
        eta_arr[:k] = eta[:k]
    d = trace.distances_to(y)
    first = int(_kernels.fejer_first_violation(d, eta_arr, float(slack)))
    witnesses = [("eta_sum", float(eta_arr.sum())), ("dist_first", float(d[0])), ("dist_last", float(d[-1]))]
    if first >= 0:
        excess = float(d[first + 1] - d[first] - eta_arr[first])
        witnesses = [("first_violation", float(first)), ("excess", excess)] + witnesses
        return Verdict("fejer", Status.FAILS, slack, None, witnesses)
    return Verdict("fejer", Status.HOLDS, slack, None, witnesses)
