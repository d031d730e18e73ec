"""Compiled inner loops shared by the measure, exponent and noise code.

Every kernel takes the map as the flat tuple ``(d, alpha, torus)`` so that
numba sees only scalars. Fiber family: ``h(theta, t) = t + alpha t (1-t)
cos(2 pi theta)`` on [0, 1], mirrored onto [1, 2) for the torus double.
"""

import math

import numpy as np
from numba import njit, prange

TWO_PI = 2.0 * math.pi


@njit(cache=True)
def fiber(c, s, t, alpha, torus):
    """Fiber image and its partials given c = cos(2 pi theta), s = sin(...)."""
    if torus and t >= 1.0:
        u = 2.0 - t
        g = u + alpha * u * (1.0 - u) * c
        dt = 1.0 + alpha * (1.0 - 2.0 * u) * c
        dth = -TWO_PI * alpha * u * (1.0 - u) * s
        out = 2.0 - g
        if out >= 2.0:
            out -= 2.0
        return out, dt, -dth
    g = t + alpha * t * (1.0 - t) * c
    dt = 1.0 + alpha * (1.0 - 2.0 * t) * c
    dth = -TWO_PI * alpha * t * (1.0 - t) * s
    if torus:
        if g < 0.0:
            g += 2.0
        elif g >= 2.0:
            g -= 2.0
    return g, dt, dth


@njit(cache=True)
def fiber_second(c, s, t, alpha, torus):
    """Second partials (h_thth, h_tht, h_tt) of the fiber map."""
    sign = 1.0
    u = t
    if torus and t >= 1.0:
        u = 2.0 - t
        sign = -1.0
    q = u * (1.0 - u)
    h_thth = -TWO_PI * TWO_PI * alpha * q * c
    h_tht = -TWO_PI * alpha * (1.0 - 2.0 * u) * s
    h_tt = -2.0 * alpha * c
    # mirror t -> 2 - t: h~ = 2 - h(2 - t) flips h_thth and h_tt, keeps h_tht
    return sign * h_thth, h_tht, sign * h_tt


@njit(cache=True)
def base_step(theta, d):
    y = d * theta
    return y - math.floor(y)


@njit(cache=True)
def orbit_kernel(theta, t, n, d, alpha, torus):
    ths = np.empty(n + 1)
    ts = np.empty(n + 1)
    ths[0] = theta
    ts[0] = t
    for j in range(n):
        c = math.cos(TWO_PI * theta)
        s = math.sin(TWO_PI * theta)
        t, _, _ = fiber(c, s, t, alpha, torus)
        theta = base_step(theta, d)
        ths[j + 1] = theta
        ts[j + 1] = t
    return ths, ts


@njit(cache=True)
def log_dc_sum_kernel(theta, t, n, d, alpha, torus, n_batches):
    """Sum of log dc along the orbit, plus batch sums for a stderr."""
    batch = np.zeros(n_batches)
    total = 0.0
    size = n // n_batches if n >= n_batches else 1
    for j in range(n):
        c = math.cos(TWO_PI * theta)
        s = math.sin(TWO_PI * theta)
        t_new, dt, _ = fiber(c, s, t, alpha, torus)
        v = math.log(dt)
        total += v
        b = j // size
        if b < n_batches:
            batch[b] += v
        t = t_new
        theta = base_step(theta, d)
    return total, batch


@njit(cache=True, parallel=True)
def block_log_sums(theta0, t0, n_blocks, block, d, alpha, torus):
    """Cumulative log dc at the end of each N-block, for many starting points."""
    m = theta0.shape[0]
    out = np.empty((m, n_blocks))
    for i in prange(m):
        theta = theta0[i]
        t = t0[i]
        acc = 0.0
        for b in range(n_blocks):
            for _ in range(block):
                c = math.cos(TWO_PI * theta)
                s = math.sin(TWO_PI * theta)
                t, dt, _ = fiber(c, s, t, alpha, torus)
                acc += math.log(dt)
                theta = base_step(theta, d)
            out[i, b] = acc
    return out


@njit(cache=True, parallel=True)
def curvature_push(theta0, t0, slope0, kappa0, n, d, alpha, torus):
    """Propagate slope and d(slope)/d(theta) of a graph through n steps.

    Returns the image points, image slopes and image d(slope)/d(theta), all
    with respect to the image base coordinate.
    """
    m = theta0.shape[0]
    th = np.empty(m)
    tt = np.empty(m)
    sl = np.empty(m)
    ka = np.empty(m)
    for i in prange(m):
        theta = theta0[i]
        t = t0[i]
        s_ = slope0[i]
        k_ = kappa0[i]
        for _ in range(n):
            c = math.cos(TWO_PI * theta)
            sn = math.sin(TWO_PI * theta)
            t_new, dt, dth = fiber(c, sn, t, alpha, torus)
            a, b, e = fiber_second(c, sn, t, alpha, torus)
            k_ = (a + 2.0 * b * s_ + e * s_ * s_ + dt * k_) / (d * d)
            s_ = (dth + dt * s_) / d
            t = t_new
            theta = base_step(theta, d)
        th[i] = theta
        tt[i] = t
        sl[i] = s_
        ka[i] = k_
    return th, tt, sl, ka


# ---------------------------------------------------------------------------
# Birkhoff moments against the trig dictionary
# ---------------------------------------------------------------------------
#
# The dictionary is indexed by half-plane pairs (k, l): k > 0, or k == 0 and
# l > 0. Sums of exp(2 pi i (k theta + l t / period)) are accumulated; the
# cos/sin moments are their real/imaginary parts.


@njit(cache=True)
def _pair_terms(z_re, z_im, w_re, w_im, p, ks, ls, acc_re, acc_im, scale):
    # powers z^k, k = 0..p and w^l, l = -p..p
    zr = np.empty(p + 1)
    zi = np.empty(p + 1)
    zr[0] = 1.0
    zi[0] = 0.0
    for k in range(1, p + 1):
        zr[k] = zr[k - 1] * z_re - zi[k - 1] * z_im
        zi[k] = zr[k - 1] * z_im + zi[k - 1] * z_re
    wr = np.empty(2 * p + 1)
    wi = np.empty(2 * p + 1)
    wr[p] = 1.0
    wi[p] = 0.0
    for l in range(1, p + 1):
        wr[p + l] = wr[p + l - 1] * w_re - wi[p + l - 1] * w_im
        wi[p + l] = wr[p + l - 1] * w_im + wi[p + l - 1] * w_re
        wr[p - l] = wr[p + l]
        wi[p - l] = -wi[p + l]
    for q in range(ks.shape[0]):
        a_r = zr[ks[q]]
        a_i = zi[ks[q]]
        b_r = wr[p + ls[q]]
        b_i = wi[p + ls[q]]
        acc_re[q] += scale * (a_r * b_r - a_i * b_i)
        acc_im[q] += scale * (a_r * b_i + a_i * b_r)


@njit(cache=True)
def pair_sums_points(theta, t, weights, p, period, ks, ls):
    """Weighted sums of the dictionary exponentials over a point cloud."""
    n_pairs = ks.shape[0]
    acc_re = np.zeros(n_pairs)
    acc_im = np.zeros(n_pairs)
    for j in range(theta.shape[0]):
        a = TWO_PI * theta[j]
        b = TWO_PI * t[j] / period
        _pair_terms(math.cos(a), math.sin(a), math.cos(b), math.sin(b),
                    p, ks, ls, acc_re, acc_im, weights[j])
    return acc_re, acc_im


@njit(cache=True)
def _base_prefix(theta, n, d, p):
    """Orbit cosines/sines and prefix sums of z^k along the base orbit."""
    cs = np.empty(n)
    sn = np.empty(n)
    pre_re = np.zeros((n + 1, p + 1))
    pre_im = np.zeros((n + 1, p + 1))
    for j in range(n):
        a = TWO_PI * theta
        c = math.cos(a)
        s = math.sin(a)
        cs[j] = c
        sn[j] = s
        zr = 1.0
        zi = 0.0
        for k in range(p + 1):
            pre_re[j + 1, k] = pre_re[j, k] + zr
            pre_im[j + 1, k] = pre_im[j, k] + zi
            nr = zr * c - zi * s
            zi = zr * s + zi * c
            zr = nr
        theta = base_step(theta, d)
    return cs, sn, pre_re, pre_im


@njit(cache=True)
def _circle_dist(t, c, torus):
    x = abs(t - c)
    if torus and x > 1.0:
        x = 2.0 - x
    return x


@njit(cache=True)
def _flush_absorbed(pre_re, pre_im, j0, j1, wc_re, wc_im, ks, ls, p, acc_re, acc_im):
    # sum_{j0 <= j < j1} z_j^k * w_c^l, with w_c^l = exp(i l phi_c)
    for q in range(ks.shape[0]):
        k = ks[q]
        s_r = pre_re[j1, k] - pre_re[j0, k]
        s_i = pre_im[j1, k] - pre_im[j0, k]
        b_r = wc_re[p + ls[q]]
        b_i = wc_im[p + ls[q]]
        acc_re[q] += s_r * b_r - s_i * b_i
        acc_im[q] += s_r * b_i + s_i * b_r


@njit(cache=True, parallel=True)
def birkhoff_grid(theta_cols, t_rows, n, d, alpha, torus, p, period, ks, ls,
                  circles, t_abs):
    """Birkhoff sums for the product grid theta_cols x t_rows.

    Returns (sum at n/2, sum at n) as complex parts with shape
    (n_cols, n_rows, n_pairs), plus the per-point sum of log dc over n steps.

    While the fiber coordinate sits within ``t_abs`` of one of the invariant
    ``circles`` the t-factor is replaced by its value on the circle and the
    base contribution is taken from prefix sums; the error this introduces is
    at most pi * p * t_abs / period per averaged term.
    """
    n_cols = theta_cols.shape[0]
    n_rows = t_rows.shape[0]
    n_pairs = ks.shape[0]
    half = n // 2
    h_re = np.zeros((n_cols, n_rows, n_pairs))
    h_im = np.zeros((n_cols, n_rows, n_pairs))
    f_re = np.zeros((n_cols, n_rows, n_pairs))
    f_im = np.zeros((n_cols, n_rows, n_pairs))
    lyap = np.zeros((n_cols, n_rows))
    n_circ = circles.shape[0]
    # circle factors exp(2 pi i l c / period), l = -p..p
    wc_re = np.empty((n_circ, 2 * p + 1))
    wc_im = np.empty((n_circ, 2 * p + 1))
    for ci in range(n_circ):
        for l in range(-p, p + 1):
            ang = TWO_PI * l * circles[ci] / period
            wc_re[ci, p + l] = math.cos(ang)
            wc_im[ci, p + l] = math.sin(ang)
    for col in prange(n_cols):
        cs, sn, pre_re, pre_im = _base_prefix(theta_cols[col], n, d, p)
        for row in range(n_rows):
            acc_re = np.zeros(n_pairs)
            acc_im = np.zeros(n_pairs)
            t = t_rows[row]
            lsum = 0.0
            absorbed = -1
            start = 0
            for j in range(n):
                if j == half:
                    if absorbed >= 0:
                        _flush_absorbed(pre_re, pre_im, start, j,
                                        wc_re[absorbed], wc_im[absorbed],
                                        ks, ls, p, acc_re, acc_im)
                        start = j
                    for q in range(n_pairs):
                        h_re[col, row, q] = acc_re[q]
                        h_im[col, row, q] = acc_im[q]
                hit = -1
                for ci in range(n_circ):
                    if _circle_dist(t, circles[ci], torus) <= t_abs:
                        hit = ci
                        break
                if hit != absorbed:
                    if absorbed >= 0:
                        _flush_absorbed(pre_re, pre_im, start, j,
                                        wc_re[absorbed], wc_im[absorbed],
                                        ks, ls, p, acc_re, acc_im)
                    absorbed = hit
                    start = j
                c = cs[j]
                s = sn[j]
                if absorbed < 0:
                    b = TWO_PI * t / period
                    _pair_terms(c, s, math.cos(b), math.sin(b), p, ks, ls,
                                acc_re, acc_im, 1.0)
                t, dt, _ = fiber(c, s, t, alpha, torus)
                lsum += math.log(dt)
            if absorbed >= 0:
                _flush_absorbed(pre_re, pre_im, start, n,
                                wc_re[absorbed], wc_im[absorbed],
                                ks, ls, p, acc_re, acc_im)
            for q in range(n_pairs):
                f_re[col, row, q] = acc_re[q]
                f_im[col, row, q] = acc_im[q]
            lyap[col, row] = lsum
    return h_re, h_im, f_re, f_im, lyap


@njit(cache=True, parallel=True)
def noisy_chunk(theta, t, acc_re, acc_im, j0, n_burn, d, alpha, torus, eps, full,
                noise, p, period, ks, ls):
    """Advance noisy chains by one chunk of steps, updating state in place.

    ``noise`` has shape (n_chains, chunk, 2) of U(-1, 1) draws and ``j0`` is
    the global index of the chunk's first step; steps with index >= n_burn
    add to the dictionary sums. Cylinder fibers are reflected at 0 and 1.
    """
    m = theta.shape[0]
    chunk = noise.shape[1]
    for i in prange(m):
        th = theta[i]
        tt = t[i]
        for j in range(chunk):
            c = math.cos(TWO_PI * th)
            s = math.sin(TWO_PI * th)
            tt, _, _ = fiber(c, s, tt, alpha, torus)
            th = base_step(th, d)
            tt = perturb_fiber(tt, eps * noise[i, j, 1], torus)
            if full:
                th += eps * noise[i, j, 0]
                th -= math.floor(th)
            if j0 + j >= n_burn:
                a = TWO_PI * th
                b = TWO_PI * tt / period
                _pair_terms(math.cos(a), math.sin(a), math.cos(b), math.sin(b),
                            p, ks, ls, acc_re[i], acc_im[i], 1.0)
        theta[i] = th
        t[i] = tt


@njit(cache=True)
def perturb_fiber(t, u, torus):
    t = t + u
    if torus:
        return t - 2.0 * math.floor(t / 2.0)
    # reflection keeps the kernel absolutely continuous; |u| <= 1 needs one fold
    if t < 0.0:
        t = -t
    elif t > 1.0:
        t = 2.0 - t
    return t
