"""Escape-rate Green function estimators with certified error bounds.

For each system the estimate at depth n is ``deg**-n * log ||orbit_n||``
(max norm) once the orbit has left the derived escape region, with the
geometric tail bound ``K * deg**-n`` described in ``cdyn._kernels``.  The
per-system constants are derived here:

* escape radius ``R0`` large enough that the norm at least doubles each
  step and the step slack ``log(||next|| / ||cur||**deg)`` stays inside
  ``[-E, E]``;
* growth constant ``beta`` with ``log+ ||map(z)|| <= deg*log+ ||z|| + beta``,
  giving the non-escape bound ``deg**-N * (log R0 + beta/(deg-1))`` after N
  bounded steps (the true value then satisfies
  ``G(z0) = deg**-N G(z_N) <= deg**-N (log+||z_N|| + beta/(deg-1))``).

For endomorphisms the lower growth constant is the certified minimum of
``max(|P_D|, |Q_D|)`` on the unit max-sphere (grid minimum minus a
Lipschitz slack), so a failed certification rejects the system rather than
producing unsound bounds.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .systems import (
    DegreeDFamilyParam,
    HenonMap,
    MalformedSystemError,
    Point2,
    RegularEndo,
    endo_regularity_check,
    endo_top_coefficients,
    family_coefficients,
)

__all__ = [
    "GreenEstimate",
    "EscapeConfig",
    "NumericalError",
    "green_endo",
    "green_endo_batch",
    "green_henon",
    "green_henon_batch",
    "green_henon_max",
    "green_activity",
    "green_activity_batch",
    "green_bif",
    "green_bif_batch",
    "green_poly1d",
    "green_poly1d_batch",
    "green_endo_trace",
    "green_henon_trace",
    "green_poly1d_trace",
]


class NumericalError(RuntimeError):
    """A computation could not produce a certified result."""


@dataclass(frozen=True)
class GreenEstimate:
    """An escape-rate value (natural-log units) with a certified bound."""

    value: float
    error_bound: float
    iterations_used: int
    escaped: bool

    def __post_init__(self):
        if not (self.value >= 0.0 and self.error_bound >= 0.0):
            raise ValueError("green estimates are nonnegative with nonnegative bounds")


@dataclass(frozen=True)
class EscapeConfig:
    """Iteration budget and accuracy target for escape estimates.

    ``escape_radius`` is a floor; the effective radius is never below the
    coefficient-derived bound of the system at hand.
    """

    escape_radius: float = 2.0
    max_iters: int = 120
    target_error: float = 1e-9

    def __post_init__(self):
        if not self.escape_radius > 1:
            raise ValueError("escape_radius must exceed 1")
        if not (1 <= self.max_iters <= 2000):
            raise ValueError("max_iters must be in [1, 2000]")
        if not self.target_error > 0:
            raise ValueError("target_error must be positive")


DEFAULT_CONFIG = EscapeConfig()


def _log_thresh(deg: int) -> float:
    # one more double-precision step from below this norm cannot overflow
    return 10.0 ** (250.0 / (deg + 1))


# ---------------------------------------------------------------------------
# univariate polynomials (family activity greens, 1d dynamical greens)
# ---------------------------------------------------------------------------

def _poly1d_constants(coeffs_cols: np.ndarray, floor_radius: float):
    """Per-point escape constants for ascending coefficient columns (d+1, N)."""
    d = coeffs_cols.shape[0] - 1
    lead = np.abs(coeffs_cols[d])
    if np.any(lead == 0):
        raise MalformedSystemError("leading coefficient vanished")
    low = np.sum(np.abs(coeffs_cols[:d]), axis=0)
    total = low + lead
    R0 = np.maximum(2.0, 2.0 * low / lead)
    R0 = np.maximum(R0, (4.0 / lead) ** (1.0 / (d - 1)))
    R0 = np.maximum(R0, floor_radius)
    E = np.maximum(np.abs(np.log(lead / 2.0)), np.abs(np.log(total))) + 1e-12
    beta_over = np.maximum(np.log(total), 0.0) / (d - 1)
    return R0, E, beta_over, lead, low


def green_poly1d_batch(coeffs, z0, cfg: EscapeConfig = DEFAULT_CONFIG, *,
                       trace=None, force_python: bool = False):
    """Batch dynamical Green estimates for one or many univariate polynomials.

    ``coeffs`` is either a single ascending coefficient sequence (shared by
    all points) or an array of shape (d+1, N) with one column per point.
    """
    z0 = np.asarray(z0, dtype=complex).ravel()
    coeffs = np.asarray(coeffs, dtype=complex)
    if coeffs.ndim == 1:
        coeffs = np.repeat(coeffs[:, None], z0.shape[0], axis=1)
    d = coeffs.shape[0] - 1
    if d < 2:
        raise MalformedSystemError("polynomial degree must be >= 2")
    R0, E, beta_over, lead, low = _poly1d_constants(coeffs, cfg.escape_radius)
    thresh = _log_thresh(d)
    if np.any(R0 > thresh / 2):
        raise MalformedSystemError("coefficients too extreme for double-precision escape analysis")
    if np.any(np.abs(z0) > thresh / 2):
        raise NumericalError("start point too large for double-precision escape analysis")
    kern = _kernels.green_poly1d_batch_py if (trace is not None or force_python) \
        else _kernels.green_poly1d_batch
    return kern(coeffs, z0, d, R0, E, beta_over, lead, low, thresh,
                cfg.max_iters, cfg.target_error, trace=trace)


def green_poly1d(coeffs, z: complex, cfg: EscapeConfig = DEFAULT_CONFIG) -> GreenEstimate:
    value, bound, iters, escaped, _ = green_poly1d_batch(coeffs, [z], cfg)
    return GreenEstimate(float(value[0]), float(bound[0]), int(iters[0]), bool(escaped[0]))


# ---------------------------------------------------------------------------
# critically marked family: activity greens and the bifurcation green
# ---------------------------------------------------------------------------

def _family_coeff_columns(d: int, coords, ys) -> np.ndarray:
    """Vectorized family coefficients; coords (d-2, N), ys (N,)."""
    coords = np.asarray(coords, dtype=complex)
    ys = np.asarray(ys, dtype=complex).ravel()
    if coords.ndim == 1:
        coords = coords[None, :]
    n = ys.shape[0]
    cols = np.zeros((d + 1, n), dtype=complex)
    sig = np.zeros((d - 1, n), dtype=complex)
    sig[0] = 1.0
    for v in coords:
        for j in range(min(d - 2, coords.shape[0]), 0, -1):
            sig[j] = sig[j] + v * sig[j - 1]
    cols[0] = ys
    for j in range(2, d):
        cols[j] = (-1) ** (d - j) * sig[d - j] / j
    cols[d] = 1.0 / d
    return cols


def green_activity_batch(d: int, coords, ys, i: int,
                         cfg: EscapeConfig = DEFAULT_CONFIG, *, trace=None):
    """Activity Green of the i-th marked critical point over parameter arrays."""
    if not 1 <= i <= d - 1:
        raise IndexError(f"critical index {i} out of range 1..{d - 1}")
    coords = np.asarray(coords, dtype=complex)
    if coords.ndim == 1:
        coords = coords[None, :]
    cols = _family_coeff_columns(d, coords, ys)
    c0 = np.zeros(cols.shape[1], dtype=complex) if i == 1 else coords[i - 2]
    return green_poly1d_batch(cols, c0, cfg, trace=trace)


def green_activity(param: DegreeDFamilyParam, i: int,
                   cfg: EscapeConfig = DEFAULT_CONFIG) -> GreenEstimate:
    coords = np.array(param.coords, dtype=complex)[:, None]
    value, bound, iters, escaped, _ = green_activity_batch(
        param.d, coords, [param.y], i, cfg)
    return GreenEstimate(float(value[0]), float(bound[0]), int(iters[0]), bool(escaped[0]))


def green_bif_batch(d: int, coords, ys, cfg: EscapeConfig = DEFAULT_CONFIG):
    """max(d*G_1, G_2, ..., G_{d-1}) over parameter arrays, bounds combined by max."""
    vals = []
    bnds = []
    iters = None
    esc = None
    for i in range(1, d):
        v, b, it, e, _ = green_activity_batch(d, coords, ys, i, cfg)
        scale = d if i == 1 else 1
        vals.append(scale * v)
        bnds.append(scale * b)
        iters = it if iters is None else np.maximum(iters, it)
        esc = e if esc is None else (esc | e)
    value = np.max(vals, axis=0)
    bound = np.max(bnds, axis=0)
    return value, bound, iters, esc


def green_bif(param: DegreeDFamilyParam, cfg: EscapeConfig = DEFAULT_CONFIG) -> GreenEstimate:
    coords = np.array(param.coords, dtype=complex)[:, None]
    value, bound, iters, esc = green_bif_batch(param.d, coords, [param.y], cfg)
    return GreenEstimate(float(value[0]), float(bound[0]), int(iters[0]), bool(esc[0]))


# ---------------------------------------------------------------------------
# regular endomorphisms
# ---------------------------------------------------------------------------

@functools.lru_cache(maxsize=64)
def _endo_constants(h: RegularEndo):
    if not endo_regularity_check(h):
        raise MalformedSystemError("green_endo requires a regular endomorphism")
    D = h.D
    pa, qa = endo_top_coefficients(h)
    S_top = max(float(np.sum(np.abs(pa))), float(np.sum(np.abs(qa))))
    S_all = max(float(np.sum(np.abs(h.p_array()))), float(np.sum(np.abs(h.q_array()))))
    B_low = max(float(np.sum(np.abs(h.p_array())) - np.sum(np.abs(pa))),
                float(np.sum(np.abs(h.q_array())) - np.sum(np.abs(qa))))
    c_min = _certified_top_minimum(h)
    if c_min <= 0:
        raise NumericalError(
            "could not certify a positive lower growth constant; the map is "
            "regular but too close to degenerate for double-precision bounds")
    L_dir = 2.0 * D * S_top
    R0 = max(2.0, 2.0 * S_all, 2.0 * B_low / c_min, (4.0 / c_min) ** (1.0 / (D - 1)))
    E = max(abs(math.log(c_min / 2.0)), abs(math.log(S_all))) + 1e-12
    beta_over = max(math.log(S_all), 0.0) / (D - 1)
    return dict(D=D, hom_p=pa, hom_q=qa, c_min=c_min, B_low=B_low, L_dir=L_dir,
                R0=R0, E=E, beta_over=beta_over)


def _eval_hom_grid(hom: np.ndarray, xs: np.ndarray, ys: np.ndarray, D: int) -> np.ndarray:
    acc = np.full(xs.shape, hom[D], dtype=complex)
    for k in range(D - 1, -1, -1):
        acc = acc * xs + hom[k] * ys ** (D - k)
    return acc


@functools.lru_cache(maxsize=64)
def _certified_top_minimum(h: RegularEndo, n_ang: int = 192, n_rad: int = 17) -> float:
    """Certified lower bound for min of max(|P_D|,|Q_D|) on the unit max-sphere.

    Samples both charts {|x|=1,|y|<=1} and {|y|=1,|x|<=1} on an angular/radial
    grid and subtracts the Lipschitz slack 2*D*S_top * (cell half-diameter in
    the max norm), so the returned value is a true lower bound.  Refines the
    grid once if the first pass fails to certify positivity.
    """
    pa, qa = endo_top_coefficients(h)
    D = h.D
    S_top = max(float(np.sum(np.abs(pa))), float(np.sum(np.abs(qa))))
    L = 2.0 * D * S_top

    def _pass(na: int, nr: int) -> float:
        one = np.exp(1j * np.linspace(0.0, 2.0 * np.pi, na, endpoint=False))
        small = (np.linspace(0.0, 1.0, nr)[:, None]
                 * np.exp(1j * np.linspace(0.0, 2.0 * np.pi, na, endpoint=False))[None, :]).ravel()
        xs = np.repeat(one, small.shape[0])
        ys = np.tile(small, one.shape[0])
        best = np.inf
        for cx, cy in ((xs, ys), (ys, xs)):
            fp = _eval_hom_grid(pa, cx, cy, D)
            fq = _eval_hom_grid(qa, cx, cy, D)
            best = min(best, float(np.min(np.maximum(np.abs(fp), np.abs(fq)))))
        half = np.pi / na + 0.5 / (nr - 1)
        return best - L * half

    c = _pass(n_ang, n_rad)
    if c <= 0:
        c = _pass(4 * n_ang, 4 * n_rad)
    return c


def green_endo_batch(h: RegularEndo, pts, cfg: EscapeConfig = DEFAULT_CONFIG, *,
                     trace=None, force_python: bool = False):
    """Batch Green estimates for a regular endomorphism; pts (N, 2) complex."""
    k = _endo_constants(h)
    pts = np.asarray(pts, dtype=complex).reshape(-1, 2)
    thresh = _log_thresh(k["D"])
    R0 = max(k["R0"], cfg.escape_radius)
    if R0 > thresh / 2:
        raise MalformedSystemError("coefficients too extreme for double-precision escape analysis")
    if np.any(np.abs(pts) > thresh / 2):
        raise NumericalError("start point too large for double-precision escape analysis")
    kern = _kernels.green_endo_batch_py if (trace is not None or force_python) \
        else _kernels.green_endo_batch
    return kern(h.p_array(), h.q_array(), k["hom_p"], k["hom_q"], pts, k["D"],
                R0, k["E"], k["beta_over"], k["c_min"], k["B_low"], k["L_dir"],
                thresh, cfg.max_iters, cfg.target_error, trace=trace)


def green_endo(h: RegularEndo, p: Point2, cfg: EscapeConfig = DEFAULT_CONFIG) -> GreenEstimate:
    value, bound, iters, escaped, _ = green_endo_batch(h, [tuple(p)], cfg)
    return GreenEstimate(float(value[0]), float(bound[0]), int(iters[0]), bool(escaped[0]))


# ---------------------------------------------------------------------------
# Henon maps
# ---------------------------------------------------------------------------

def _henon_factor_arrays(f: HenonMap, direction: str):
    """Forward-normal-form factor data for the requested direction.

    Backward iteration is conjugated by the coordinate swap: each inverse
    factor (u,v) -> ((p(u)-v)/delta, u) becomes the forward-form factor with
    polynomial p/delta and multiplier 1/delta, applied in reverse order, on
    swapped coordinates.
    """
    if direction == "forward":
        facs = [(np.array(fac.coeffs, dtype=complex), complex(fac.delta))
                for fac in f.factors]
    elif direction == "backward":
        facs = [(np.array(fac.coeffs, dtype=complex) / fac.delta, 1.0 / complex(fac.delta))
                for fac in reversed(f.factors)]
    else:
        raise ValueError(f"direction must be 'forward' or 'backward', got {direction!r}")
    kmax = max(len(c) - 1 for c, _ in facs)
    degs = np.array([len(c) - 1 for c, _ in facs], dtype=np.int64)
    coeffs = np.zeros((len(facs), kmax + 1), dtype=complex)
    for j, (c, _) in enumerate(facs):
        coeffs[j, :len(c)] = c
    deltas = np.array([dl for _, dl in facs], dtype=complex)
    return degs, coeffs, deltas


@functools.lru_cache(maxsize=64)
def _henon_constants(f: HenonMap, direction: str):
    degs, coeffs, deltas = _henon_factor_arrays(f, direction)
    m = len(degs)
    lead = np.array([abs(coeffs[j, degs[j]]) for j in range(m)])
    low = np.array([float(np.sum(np.abs(coeffs[j, :degs[j]]))) for j in range(m)])
    dabs = np.abs(deltas)
    R0 = 2.0
    E = 0.0
    beta = 0.0
    tail_scale = 1.0  # prod of degrees of the *later* factors
    # later factors amplify earlier slack; accumulate from the last factor back
    for j in range(m - 1, -1, -1):
        k = int(degs[j])
        Rj = max(2.0, 2.0 * (low[j] + dabs[j]) / lead[j], (4.0 / lead[j]) ** (1.0 / (k - 1)))
        R0 = max(R0, Rj)
        Ej = max(abs(math.log(lead[j] / 2.0)), abs(math.log(lead[j] + low[j] + dabs[j])))
        betaj = max(math.log(lead[j] + low[j] + dabs[j]), 0.0)
        E += tail_scale * Ej
        beta += tail_scale * betaj
        tail_scale *= k
    d = int(np.prod([int(k) for k in degs]))
    E += 1e-12
    return dict(degs=degs, coeffs=coeffs, deltas=deltas, d=d, R0=R0, E=E,
                beta_over=beta / (d - 1))


def green_henon_batch(f: HenonMap, pts, direction: str,
                      cfg: EscapeConfig = DEFAULT_CONFIG, *, trace=None,
                      force_python: bool = False):
    """Batch directional Green estimates for a Henon map; pts (N, 2) complex."""
    k = _henon_constants(f, direction)
    pts = np.asarray(pts, dtype=complex).reshape(-1, 2)
    if direction == "backward":
        pts = pts[:, ::-1]
    kmax = int(np.max(k["degs"]))
    thresh = _log_thresh(kmax)
    R0 = max(k["R0"], cfg.escape_radius)
    if R0 > thresh / 2:
        raise MalformedSystemError("coefficients too extreme for double-precision escape analysis")
    if np.any(np.abs(pts) > thresh / 2):
        raise NumericalError("start point too large for double-precision escape analysis")
    kern = _kernels.green_henon_batch_py if (trace is not None or force_python) \
        else _kernels.green_henon_batch
    return kern(k["degs"], k["coeffs"], k["deltas"], pts, k["d"], R0, k["E"],
                k["beta_over"], thresh, cfg.max_iters, cfg.target_error, trace=trace)


def green_henon(f: HenonMap, p: Point2, direction: str,
                cfg: EscapeConfig = DEFAULT_CONFIG) -> GreenEstimate:
    value, bound, iters, escaped, _ = green_henon_batch(f, [tuple(p)], direction, cfg)
    return GreenEstimate(float(value[0]), float(bound[0]), int(iters[0]), bool(escaped[0]))


def green_henon_max(f: HenonMap, p: Point2, cfg: EscapeConfig = DEFAULT_CONFIG) -> GreenEstimate:
    """G = max(G+, G-); the bound of a max is the max of the bounds."""
    gp = green_henon(f, p, "forward", cfg)
    gm = green_henon(f, p, "backward", cfg)
    return GreenEstimate(max(gp.value, gm.value), max(gp.error_bound, gm.error_bound),
                         max(gp.iterations_used, gm.iterations_used),
                         gp.escaped or gm.escaped)


def green_henon_max_batch(f: HenonMap, pts, cfg: EscapeConfig = DEFAULT_CONFIG):
    vp, bp, ip_, ep, _ = green_henon_batch(f, pts, "forward", cfg)
    vm, bm, im_, em, _ = green_henon_batch(f, pts, "backward", cfg)
    return (np.maximum(vp, vm), np.maximum(bp, bm),
            np.maximum(ip_, im_), ep | em)


# ---------------------------------------------------------------------------
# refinement traces (diagnostics; python backend)
# ---------------------------------------------------------------------------

def _materialize_trace(trace, index: int, deg: int, K: float):
    """Per-depth (n, value, bound) for one point, bounds exactly geometric.

    Bounds start at K*deg**-n0 and divide by deg with downward rounding, so
    the reported contraction factor is never below deg; the 1-ulp shaving is
    covered by the roundoff pad inside K.
    """
    out = []
    b = None
    for n, value, escaped, done in trace:
        if not escaped[index]:
            continue
        if b is None:
            b = K * float(deg) ** (-n)
        out.append((n, float(value[index]), b))
        if done[index]:
            break
        b = math.nextafter(b / deg, 0.0)
    return out


def green_endo_trace(h: RegularEndo, p: Point2, cfg: EscapeConfig = DEFAULT_CONFIG):
    trace: list = []
    value, bound, iters, escaped, K = green_endo_batch(h, [tuple(p)], cfg, trace=trace)
    if not escaped[0]:
        return []
    return _materialize_trace(trace, 0, h.D, float(K[0]))


def green_henon_trace(f: HenonMap, p: Point2, direction: str,
                      cfg: EscapeConfig = DEFAULT_CONFIG):
    trace: list = []
    value, bound, iters, escaped, K = green_henon_batch(f, [tuple(p)], direction,
                                                        cfg, trace=trace)
    if not escaped[0]:
        return []
    return _materialize_trace(trace, 0, f.degree, float(K[0]))


def green_poly1d_trace(coeffs, z: complex, cfg: EscapeConfig = DEFAULT_CONFIG):
    trace: list = []
    coeffs = np.asarray(coeffs, dtype=complex)
    value, bound, iters, escaped, K = green_poly1d_batch(coeffs, [z], cfg, trace=trace)
    if not escaped[0]:
        return []
    return _materialize_trace(trace, 0, coeffs.shape[0] - 1, float(K[0]))


def family_green_estimate(param: DegreeDFamilyParam, z: complex,
                          cfg: EscapeConfig = DEFAULT_CONFIG) -> GreenEstimate:
    """Dynamical Green of the family member P_{x,y} at z."""
    return green_poly1d(family_coefficients(param), z, cfg)
