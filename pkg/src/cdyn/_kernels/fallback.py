"""Pure-numpy escape-time kernels (fallback backend).

Each kernel iterates a batch of points until the orbit certifiably escapes
(norm beyond the system's derived radius ``R0``, after which the norm at
least doubles every step) or a non-escape cap is hit.  For escaped points
the estimate ``deg**-n * log(norm)`` carries the geometric tail bound

    bound(n) = K * deg**-n,   K = E/(deg-1) + W + roundoff pad,

where ``E`` bounds the per-step slack ``log(norm' / norm**deg)`` inside the
escape region and ``W`` accumulates the interval slack of the log-scale
continuation (entered once the norm passes ``log_thresh``; there the
dominant term is iterated exactly and the lower-order terms contribute a
relative interval of width ``~B*exp(-u)``).  If that relative width would
ever reach O(1) the point stops refining at its current depth instead of
taking a step whose interval could not be bounded.  Non-escaped points
after ``max_iters`` steps return value 0 with the documented bound
``deg**-N * (log(max(norm_N, R0)) + beta_over)``, since the true value is at
most ``log+ norm + beta_over`` pulled back N times.

All loops are mask-vectorized; the compiled backend mirrors this algorithm
point by point.
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"

# per log-scale step absolute pad on the accumulated interval halfwidth
_PAD = 8e-16
# per-step relative roundoff allowance folded into the provisional constant
_RND = 4e-16
# relative interval width beyond which a log-scale step is refused
_R_STUCK = 0.25


def _kprov(Ktail, W, n, value):
    return Ktail + W + n * _RND * np.maximum(np.abs(value), 1.0)


def green_poly1d_batch(coeffs, z0, d, R0, E, beta_over, lead_abs, low_sum,
                       log_thresh, max_iters, target_error, trace=None):
    """Escape-rate estimates for per-point univariate polynomials.

    coeffs: (d+1, N) ascending complex columns; z0: (N,) start points;
    R0/E/beta_over/lead_abs/low_sum: (N,) per-point constants.
    Returns (value, bound, iters, escaped, K).
    """
    z0 = np.asarray(z0, dtype=complex)
    N = z0.shape[0]
    z = z0.copy()
    u = np.zeros(N)
    W = np.zeros(N)
    logmode = np.zeros(N, dtype=bool)
    escaped = np.zeros(N, dtype=bool)
    done = np.zeros(N, dtype=bool)
    value = np.zeros(N)
    bound = np.zeros(N)
    iters = np.zeros(N, dtype=np.int64)
    Kout = np.zeros(N)
    Ktail = E / (d - 1.0)
    dinv = 1.0

    def _finalize(mask, n):
        Kf = _kprov(Ktail, W, n, value)
        value[mask] = np.maximum(value[mask], 0.0)
        Kout[mask] = Kf[mask]
        bound[mask] = Kf[mask] * dinv
        iters[mask] = n
        done[mask] = True

    for n in range(max_iters + 1):
        az = np.abs(z)
        newesc = ~done & ~logmode & ~escaped & (az > R0)
        escaped |= newesc
        sw = ~done & ~logmode & escaped & (az > log_thresh)
        if sw.any():
            u[sw] = np.log(az[sw])
            logmode[sw] = True
        live = ~done & escaped
        if live.any():
            cur_u = np.where(logmode, u, np.log(np.maximum(az, 1e-300)))
            value[live] = dinv * cur_u[live]
            hit = _kprov(Ktail, W, n, value) * dinv <= target_error
            capped = (n == max_iters) | (np.where(logmode, u, 0.0) > 1e200)
            fin = live & (hit | capped)
            if fin.any():
                _finalize(fin, n)
        if trace is not None:
            trace.append((n, value.copy(), escaped.copy(), done.copy()))
        if n == max_iters or done.all():
            break

        lg = ~done & logmode
        if lg.any():
            r = np.zeros(N)
            r[lg] = (low_sum[lg] / lead_abs[lg]) * np.exp(-np.maximum(u[lg] - W[lg], 0.0))
            stuck = lg & (r > _R_STUCK)
            if stuck.any():
                _finalize(stuck, n)
                lg &= ~stuck
            W[lg] = d * W[lg] + r[lg] * (1.0 + r[lg]) + _PAD
            u[lg] = d * u[lg] + np.log(lead_abs[lg])
        step = ~done & ~logmode
        if step.any():
            zz = z[step]
            acc = coeffs[d][step].copy()
            for k in range(d - 1, -1, -1):
                acc = acc * zz + coeffs[k][step]
            z[step] = acc
        dinv /= d

    ne = ~escaped
    if ne.any():
        az = np.abs(z)
        bound[ne] = dinv * (np.log(np.maximum(az[ne], R0[ne])) + beta_over[ne])
        value[ne] = 0.0
        iters[ne] = max_iters
        Kout[ne] = 0.0
    return value, bound, iters, escaped, Kout


def green_henon_batch(fac_degs, fac_coeffs, fac_deltas, pts, d, R0, E, beta_over,
                      log_thresh, max_iters, target_error, trace=None):
    """Forward escape-rate estimates for a composition of elementary factors.

    fac_degs: (m,) int degrees; fac_coeffs: (m, kmax+1) ascending complex;
    fac_deltas: (m,) complex; pts: (N, 2) complex.  Backward estimates are
    produced by the caller through the swap conjugacy, which turns inverse
    factors back into this forward normal form.
    """
    pts = np.asarray(pts, dtype=complex)
    N = pts.shape[0]
    x = pts[:, 0].copy()
    y = pts[:, 1].copy()
    m = len(fac_degs)
    uy = np.zeros(N)
    ux = np.zeros(N)
    W = np.zeros(N)
    logmode = np.zeros(N, dtype=bool)
    escaped = np.zeros(N, dtype=bool)
    done = np.zeros(N, dtype=bool)
    value = np.zeros(N)
    bound = np.zeros(N)
    iters = np.zeros(N, dtype=np.int64)
    Kout = np.zeros(N)
    Ktail = E / (d - 1.0)
    dinv = 1.0
    lead_abs = np.array([abs(fac_coeffs[j, fac_degs[j]]) for j in range(m)])
    low_sum = np.array([np.sum(np.abs(fac_coeffs[j, :fac_degs[j]])) for j in range(m)])
    dabs = np.abs(np.asarray(fac_deltas))

    def _finalize(mask, n):
        Kf = _kprov(Ktail, W, n, value)
        value[mask] = np.maximum(value[mask], 0.0)
        Kout[mask] = Kf[mask]
        bound[mask] = Kf[mask] * dinv
        iters[mask] = n
        done[mask] = True

    for n in range(max_iters + 1):
        ay = np.abs(y)
        ax = np.abs(x)
        newesc = ~done & ~logmode & ~escaped & (ay >= ax) & (ay > R0)
        escaped |= newesc
        sw = ~done & ~logmode & escaped & (ay > log_thresh)
        if sw.any():
            uy[sw] = np.log(ay[sw])
            ux[sw] = np.log(np.maximum(ax[sw], 1e-300))
            logmode[sw] = True
        live = ~done & escaped
        if live.any():
            cur_u = np.where(logmode, uy, np.log(np.maximum(ay, 1e-300)))
            value[live] = dinv * cur_u[live]
            hit = _kprov(Ktail, W, n, value) * dinv <= target_error
            capped = (n == max_iters) | (np.where(logmode, uy, 0.0) > 1e200)
            fin = live & (hit | capped)
            if fin.any():
                _finalize(fin, n)
        if trace is not None:
            trace.append((n, value.copy(), escaped.copy(), done.copy()))
        if n == max_iters or done.all():
            break

        lg = ~done & logmode
        if lg.any():
            idx = np.flatnonzero(lg)
            uyl = uy[idx].copy()
            uxl = ux[idx].copy()
            Wl = W[idx].copy()
            stuck_l = np.zeros(idx.shape, dtype=bool)
            for j in range(m):
                kj = int(fac_degs[j])
                lo = np.maximum(uyl - Wl, 0.0)
                xo = np.minimum(uxl - kj * uyl + (kj + 1) * Wl, 0.0)
                r = (low_sum[j] * np.exp(-lo) + dabs[j] * np.exp(xo)) / lead_abs[j]
                stuck_l |= r > _R_STUCK
                ok = ~stuck_l
                new_W = kj * Wl + r * (1.0 + r) + _PAD
                new_uy = kj * uyl + np.log(lead_abs[j])
                Wl = np.where(ok, new_W, Wl)
                uxl, uyl = np.where(ok, uyl, uxl), np.where(ok, new_uy, uyl)
            if stuck_l.any():
                _finalize(_scatter(stuck_l, idx, N), n)
            keep = ~stuck_l
            uy[idx[keep]] = uyl[keep]
            ux[idx[keep]] = uxl[keep]
            W[idx[keep]] = Wl[keep]
        step = ~done & ~logmode
        if step.any():
            xs = x[step]
            ys = y[step]
            for j in range(m):
                kj = int(fac_degs[j])
                acc = np.full(ys.shape, fac_coeffs[j, kj])
                for k in range(kj - 1, -1, -1):
                    acc = acc * ys + fac_coeffs[j, k]
                xs, ys = ys, acc - fac_deltas[j] * xs
            x[step] = xs
            y[step] = ys
        dinv /= d

    ne = ~escaped
    if ne.any():
        nrm = np.maximum(np.abs(x[ne]), np.abs(y[ne]))
        bound[ne] = dinv * (np.log(np.maximum(nrm, R0)) + beta_over)
        value[ne] = 0.0
        iters[ne] = max_iters
        Kout[ne] = 0.0
    return value, bound, iters, escaped, Kout


def _scatter(local_mask, idx, n):
    out = np.zeros(n, dtype=bool)
    out[idx[local_mask]] = True
    return out


def green_endo_batch(p_table, q_table, hom_p, hom_q, pts, D, R0, E, beta_over,
                     c_min, B_low, L_dir, log_thresh, max_iters, target_error,
                     trace=None):
    """Escape-rate estimates for a regular polynomial endomorphism of C^2.

    p_table/q_table: (D+1, D+1) dense coefficient tables; hom_p/hom_q: (D+1,)
    top homogeneous coefficients (index k multiplies x^k y^(D-k)).  The
    log-scale phase tracks the unit direction w = z/|z| so the dominant term
    H(w) stays evaluable in doubles; the accumulated direction error feeds
    the interval slack through the Lipschitz constant ``L_dir``.
    """
    pts = np.asarray(pts, dtype=complex)
    N = pts.shape[0]
    x = pts[:, 0].copy()
    y = pts[:, 1].copy()
    wx = np.zeros(N, dtype=complex)
    wy = np.zeros(N, dtype=complex)
    eps_w = np.zeros(N)
    u = np.zeros(N)
    W = np.zeros(N)
    logmode = np.zeros(N, dtype=bool)
    escaped = np.zeros(N, dtype=bool)
    done = np.zeros(N, dtype=bool)
    value = np.zeros(N)
    bound = np.zeros(N)
    iters = np.zeros(N, dtype=np.int64)
    Kout = np.zeros(N)
    Ktail = E / (D - 1.0)
    dinv = 1.0

    def _eval_table(table, xs, ys):
        acc = np.zeros(xs.shape, dtype=complex)
        for row in table[::-1]:
            inner = np.zeros(xs.shape, dtype=complex)
            for c in row[::-1]:
                inner = inner * ys + c
            acc = acc * xs + inner
        return acc

    def _eval_hom(hom, xs, ys):
        acc = np.full(xs.shape, hom[D], dtype=complex)
        for k in range(D - 1, -1, -1):
            acc = acc * xs + hom[k] * ys ** (D - k)
        return acc

    def _finalize(mask, n):
        Kf = _kprov(Ktail, W, n, value)
        value[mask] = np.maximum(value[mask], 0.0)
        Kout[mask] = Kf[mask]
        bound[mask] = Kf[mask] * dinv
        iters[mask] = n
        done[mask] = True

    for n in range(max_iters + 1):
        nrm = np.maximum(np.abs(x), np.abs(y))
        newesc = ~done & ~logmode & ~escaped & (nrm > R0)
        escaped |= newesc
        sw = ~done & ~logmode & escaped & (nrm > log_thresh)
        if sw.any():
            u[sw] = np.log(nrm[sw])
            wx[sw] = x[sw] / nrm[sw]
            wy[sw] = y[sw] / nrm[sw]
            eps_w[sw] = 0.0
            logmode[sw] = True
        live = ~done & escaped
        if live.any():
            cur_u = np.where(logmode, u, np.log(np.maximum(nrm, 1e-300)))
            value[live] = dinv * cur_u[live]
            hit = _kprov(Ktail, W, n, value) * dinv <= target_error
            capped = (n == max_iters) | (np.where(logmode, u, 0.0) > 1e200)
            fin = live & (hit | capped)
            if fin.any():
                _finalize(fin, n)
        if trace is not None:
            trace.append((n, value.copy(), escaped.copy(), done.copy()))
        if n == max_iters or done.all():
            break

        lg = ~done & logmode
        if lg.any():
            idx = np.flatnonzero(lg)
            vx = _eval_hom(hom_p, wx[idx], wy[idx])
            vy = _eval_hom(hom_q, wx[idx], wy[idx])
            vn = np.maximum(np.maximum(np.abs(vx), np.abs(vy)), 1e-300)
            r = (B_low * np.exp(-np.maximum(u[idx] - W[idx], 0.0))
                 + L_dir * eps_w[idx]) / vn
            stuck_l = r > _R_STUCK
            if stuck_l.any():
                _finalize(_scatter(stuck_l, idx, N), n)
            keep = idx[~stuck_l]
            rk = r[~stuck_l]
            vnk = vn[~stuck_l]
            W[keep] = D * W[keep] + rk * (1.0 + rk) + _PAD
            u[keep] = D * u[keep] + np.log(vnk)
            eps_w[keep] = 2.0 * rk
            wx[keep] = vx[~stuck_l] / vnk
            wy[keep] = vy[~stuck_l] / vnk
        step = ~done & ~logmode
        if step.any():
            xs = x[step]
            ys = y[step]
            x[step] = _eval_table(p_table, xs, ys)
            y[step] = _eval_table(q_table, xs, ys)
        dinv /= D

    ne = ~escaped
    if ne.any():
        nrm = np.maximum(np.abs(x[ne]), np.abs(y[ne]))
        bound[ne] = dinv * (np.log(np.maximum(nrm, R0)) + beta_over)
        value[ne] = 0.0
        iters[ne] = max_iters
        Kout[ne] = 0.0
    return value, bound, iters, escaped, Kout
