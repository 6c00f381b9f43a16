"""Pure NumPy/Python implementations of the hot kernels.

This module is the fallback backend, selected at import time by
``copularank._backend`` when the compiled extension is unavailable (or when
``COPULARANK_BACKEND=py`` is set).  The sequential samplers here are written
as scalar loops that mirror the compiled kernels operation for operation, so
a chain driven by the same pre-drawn random blocks produces bit-identical
trajectories on either backend.  Vectorised kernels (row products, normal
quantiles) may differ from the compiled ones in the last ulp because NumPy's
SIMD transcendentals are not libm.
"""
from __future__ import annotations

import math

import numpy as np

BACKEND_NAME = "python"

# Gaussian-copula arguments are pulled this far inside (0,1) before quantile
# evaluation; simplex prefix sums can round onto the boundary.
UNIT_EPS = 1e-15

# ---------------------------------------------------------------------------
# Alternating coefficient sum (integer numerator of the d_j simplex integral)
# ---------------------------------------------------------------------------


def dj_sum_int(n: int, j: int, idx0) -> int:
    """Integer numerator of the degree-j coefficient integral.

    Sums, over all j-tuples (k_1..k_j) with k in {0..n}, the signed product
    of factorials of the tuple's multiplicities; the sign is (-1) raised to
    the number of positions with k_l > idx0[l].  The caller divides by
    (n+j)!.  Exact integer arithmetic.
    """
    idx = list(idx0)
    counts = [0] * (n + 1)
    total = 0

    def descend(depth: int, sign: int, weight: int) -> None:
        nonlocal total
        if depth == j:
            total += sign * weight
            return
        lim = idx[depth]
        for k in range(n + 1):
            counts[k] += 1
            descend(
                depth + 1,
                -sign if k > lim else sign,
                weight * counts[k],
            )
            counts[k] -= 1

    descend(0, 1, 1)
    return total


# ---------------------------------------------------------------------------
# Normal quantile (Wichura's AS 241, double precision)
# ---------------------------------------------------------------------------

_NDTRI_A = (
    3.3871328727963666080e0, 1.3314166789178437745e2, 1.9715909503065514427e3,
    1.3731693765509461125e4, 4.5921953931549871457e4, 6.7265770927008700853e4,
    3.3430575583588128105e4, 2.5090809287301226727e3,
)
_NDTRI_B = (
    1.0, 4.2313330701600911252e1, 6.8718700749205790830e2,
    5.3941960214247511077e3, 2.1213794301586595867e4, 3.9307895800092710610e4,
    2.8729085735721942674e4, 5.2264952788528545610e3,
)
_NDTRI_C = (
    1.42343711074968357734e0, 4.63033784615654529590e0,
    5.76949722146069140550e0, 3.64784832476320460504e0,
    1.27045825245236838258e0, 2.41780725177450611770e-1,
    2.27238449892691845833e-2, 7.74545014278341407640e-4,
)
_NDTRI_D = (
    1.0, 2.05319162663775882187e0, 1.67638483018380384940e0,
    6.89767334985100004550e-1, 1.48103976427480074590e-1,
    1.51986665636164571966e-2, 5.47593808499534494600e-4,
    1.05075007164441684324e-9,
)
_NDTRI_E = (
    6.65790464350110377720e0, 5.46378491116411436990e0,
    1.78482653991729133580e0, 2.96560571828504891230e-1,
    2.65321895265761230930e-2, 1.24266094738807843860e-3,
    2.71155556874348757815e-5, 2.01033439929228813265e-7,
)
_NDTRI_F = (
    1.0, 5.99832206555887937690e-1, 1.36929880922735805310e-1,
    1.48753612908506148525e-2, 7.86869131145613259100e-4,
    1.84631831751005468180e-5, 1.42151175831644588870e-7,
    2.04426310338993978564e-15,
)


def _poly7(coefs, x):
    # Horner, highest coefficient last in the tuples above.
    r = coefs[7]
    for i in range(6, -1, -1):
        r = r * x + coefs[i]
    return r


def ndtri(p: float) -> float:
    """Standard normal quantile of a scalar p in (0, 1)."""
    q = p - 0.5
    if abs(q) <= 0.425:
        r = 0.180625 - q * q
        return q * _poly7(_NDTRI_A, r) / _poly7(_NDTRI_B, r)
    r = p if q < 0.0 else 1.0 - p
    r = math.sqrt(-math.log(r))
    if r <= 5.0:
        r -= 1.6
        val = _poly7(_NDTRI_C, r) / _poly7(_NDTRI_D, r)
    else:
        r -= 5.0
        val = _poly7(_NDTRI_E, r) / _poly7(_NDTRI_F, r)
    return -val if q < 0.0 else val


def ndtri_vec(p: np.ndarray) -> np.ndarray:
    """Vectorised AS 241 quantile; same rational approximations as ndtri."""
    p = np.asarray(p, dtype=np.float64)
    q = p - 0.5
    out = np.empty_like(q)

    central = np.abs(q) <= 0.425
    r = 0.180625 - q[central] * q[central]
    out[central] = q[central] * _poly7(_NDTRI_A, r) / _poly7(_NDTRI_B, r)

    tail = ~central
    if np.any(tail):
        pt = p[tail]
        r = np.where(q[tail] < 0.0, pt, 1.0 - pt)
        r = np.sqrt(-np.log(r))
        near = r <= 5.0
        vals = np.empty_like(r)
        rn = r[near] - 1.6
        vals[near] = _poly7(_NDTRI_C, rn) / _poly7(_NDTRI_D, rn)
        rf = r[~near] - 5.0
        vals[~near] = _poly7(_NDTRI_E, rf) / _poly7(_NDTRI_F, rf)
        out[tail] = np.where(q[tail] < 0.0, -vals, vals)
    return out


# ---------------------------------------------------------------------------
# Copula density row products
# ---------------------------------------------------------------------------


def fgm_prod_rows(u: np.ndarray, v: np.ndarray, theta) -> np.ndarray:
    """Row-wise product of FGM densities: out[k] = prod_i c_theta(u[k,i], v[k,i]).

    theta may be a scalar or a length-K vector (one parameter per row).
    Columns are multiplied left to right.
    """
    th = np.asarray(theta, dtype=np.float64)
    out = np.ones(u.shape[0], dtype=np.float64)
    for i in range(u.shape[1]):
        out = out * (1.0 + th * (1.0 - 2.0 * u[:, i]) * (1.0 - 2.0 * v[:, i]))
    return out


def gauss_prod_rows(u: np.ndarray, v: np.ndarray, rho) -> np.ndarray:
    """Row-wise product of Gaussian copula densities; boundary-clamped."""
    r = np.asarray(rho, dtype=np.float64)
    if r.ndim == 1:
        r = r[:, None]
    uc = np.clip(u, UNIT_EPS, 1.0 - UNIT_EPS)
    vc = np.clip(v, UNIT_EPS, 1.0 - UNIT_EPS)
    x = ndtri_vec(uc)
    y = ndtri_vec(vc)
    omr2 = 1.0 - r * r
    dens = np.exp((2.0 * r * x * y - r * r * (x * x + y * y)) / (2.0 * omr2)) / np.sqrt(omr2)
    out = np.ones(u.shape[0], dtype=np.float64)
    for i in range(dens.shape[1]):
        out = out * dens[:, i]
    return out


# ---------------------------------------------------------------------------
# Shared scalar helpers for the sequential samplers
# ---------------------------------------------------------------------------


def _lehmer_code(s0) -> int:
    # factorial base, most significant digit first
    n = len(s0)
    code = 0
    for i in range(n):
        c = 0
        for jj in range(i + 1, n):
            if s0[jj] < s0[i]:
                c += 1
        code = code * (n - i) + c
    return code


def lehmer_decode(code: int, n: int) -> np.ndarray:
    digits_rev = []
    for i in range(1, n + 1):
        digits_rev.append(code % i)
        code //= i
    avail = list(range(n))
    out = np.empty(n, dtype=np.int64)
    for i, d in enumerate(reversed(digits_rev)):
        out[i] = avail.pop(d)
    return out


def _apply_compat_move(s0, star_pos, sstar0, free_pos, u_sub, u_i, u_j) -> None:
    """One move of the uniform chain on compatible rankings, in place.

    Swap move exchanges the values at two free positions; swap-and-rearrange
    moves one constrained value out and re-sorts the constrained block to
    keep its pattern.  Equal probability when both are available.
    """
    m = len(star_pos)
    nfree = len(free_pos)
    if m == 0 or (nfree >= 2 and u_sub < 0.5):
        a = int(u_i * nfree)
        if a > nfree - 1:
            a = nfree - 1
        b = int(u_j * (nfree - 1))
        if b > nfree - 2:
            b = nfree - 2
        if b >= a:
            b += 1
        i = free_pos[a]
        jpos = free_pos[b]
        s0[i], s0[jpos] = s0[jpos], s0[i]
    else:
        l = int(u_i * m)
        if l > m - 1:
            l = m - 1
        a = int(u_j * nfree)
        if a > nfree - 1:
            a = nfree - 1
        jpos = free_pos[a]
        moved = s0[star_pos[l]]
        incoming = s0[jpos]
        s0[jpos] = moved
        vals = [s0[star_pos[k]] for k in range(m) if k != l]
        vals.append(incoming)
        vals.sort()
        for k in range(m):
            s0[star_pos[k]] = vals[sstar0[k]]


def _normalize_row(e_row, w_out) -> None:
    # sequential sum so both backends round identically
    tot = 0.0
    for i in range(len(e_row)):
        tot += e_row[i]
    for i in range(len(e_row)):
        w_out[i] = e_row[i] / tot


def _joint_prod(w1, w2, s0, theta, family: int) -> float:
    """prod_i c_theta(U_i, V_{s0[i]}) with U, V the prefix sums of w1, w2."""
    n = len(s0)
    v = [0.0] * n
    acc = 0.0
    for i in range(n):
        acc += w2[i]
        v[i] = acc
    prod = 1.0
    acc = 0.0
    if family == 0:
        for i in range(n):
            acc += w1[i]
            prod *= 1.0 + theta * (1.0 - 2.0 * acc) * (1.0 - 2.0 * v[s0[i]])
    else:
        omr2 = 1.0 - theta * theta
        scale = 1.0 / math.sqrt(omr2)
        for i in range(n):
            acc += w1[i]
            uu = acc
            if uu < UNIT_EPS:
                uu = UNIT_EPS
            elif uu > 1.0 - UNIT_EPS:
                uu = 1.0 - UNIT_EPS
            vv = v[s0[i]]
            if vv < UNIT_EPS:
                vv = UNIT_EPS
            elif vv > 1.0 - UNIT_EPS:
                vv = 1.0 - UNIT_EPS
            x = ndtri(uu)
            y = ndtri(vv)
            prod *= scale * math.exp(
                (2.0 * theta * x * y - theta * theta * (x * x + y * y)) / (2.0 * omr2)
            )
    return prod


def _instr_integral(delta: float, n: int, gtag: int) -> float:
    # integral of lambda^{-n} g(lambda) over (1-delta, 1), up to the n!
    # constant which cancels in Hastings ratios
    if delta >= 1.0:
        return math.inf
    if gtag == 0:
        return ((1.0 - delta) ** (1 - n) - 1.0) / (n - 1)
    return -n * math.log(1.0 - delta)


# ---------------------------------------------------------------------------
# Chunked sequential samplers
# ---------------------------------------------------------------------------


def compat_chain_chunk(s0, star_pos, sstar0, free_pos, u3, codes) -> None:
    """Run len(u3) moves of the uniform compatible-rankings chain.

    s0 is mutated in place; codes[t] receives the Lehmer code of the state
    after step t.
    """
    steps = u3.shape[0]
    code = _lehmer_code(s0)
    for t in range(steps):
        _apply_compat_move(s0, star_pos, sstar0, free_pos, u3[t, 0], u3[t, 1], u3[t, 2])
        code = _lehmer_code(s0)
        codes[t] = code


def gibbs_chunk(
    s0,
    w1,
    w2,
    fstate,
    star_pos,
    sstar0,
    free_pos,
    family: int,
    eps: float,
    variant: int,
    gtag: int,
    prior_pdf,
    u7,
    ex,
    codes,
    thetas,
    acc,
) -> None:
    """Run len(u7) steps of the predictive-distribution Gibbs sampler.

    State (s0, w1, w2, fstate = [theta, current joint product, current prior
    density]) is mutated in place.  Per step one of three moves is chosen
    uniformly: a permutation Metropolis move, a simplex update (variant 0 =
    independent Dirichlet, 1 = convex-combination random walk with its
    Hastings correction), or a windowed random walk on the copula parameter.
    codes[t] and thetas[t] record the state after each step.
    """
    n = len(s0)
    np1 = n + 1
    steps = u7.shape[0]
    theta = fstate[0]
    cur_prod = fstate[1]
    cur_pi = fstate[2]
    code = _lehmer_code(s0)
    s_prop = np.empty(n, dtype=np.int64)
    w_tmp = np.empty(np1, dtype=np.float64)
    w_tmp2 = np.empty(np1, dtype=np.float64)

    for t in range(steps):
        mv = int(u7[t, 0] * 3.0)
        if mv > 2:
            mv = 2
        if mv == 0:
            for i in range(n):
                s_prop[i] = s0[i]
            _apply_compat_move(
                s_prop, star_pos, sstar0, free_pos, u7[t, 1], u7[t, 2], u7[t, 3]
            )
            new_prod = _joint_prod(w1, w2, s_prop, theta, family)
            acc[0] += 1
            if u7[t, 6] * cur_prod < new_prod:
                for i in range(n):
                    s0[i] = s_prop[i]
                cur_prod = new_prod
                code = _lehmer_code(s0)
                acc[1] += 1
        elif mv == 1:
            acc[2] += 1
            if variant == 0:
                _normalize_row(ex[t, 0], w_tmp)
                _normalize_row(ex[t, 1], w_tmp2)
                new_prod = _joint_prod(w_tmp, w_tmp2, s0, theta, family)
                if u7[t, 6] * cur_prod < new_prod:
                    for i in range(np1):
                        w1[i] = w_tmp[i]
                        w2[i] = w_tmp2[i]
                    cur_prod = new_prod
                    acc[3] += 1
            else:
                ell = 0 if u7[t, 5] < 0.5 else 1
                lam = u7[t, 4] if gtag == 0 else u7[t, 4] ** (1.0 / n)
                _normalize_row(ex[t, ell], w_tmp)
                wl = w1 if ell == 0 else w2
                d_fwd = math.inf
                d_bwd = math.inf
                for i in range(np1):
                    w_tmp2[i] = (1.0 - lam) * wl[i] + lam * w_tmp[i]
                    rf = w_tmp2[i] / wl[i]
                    rb = wl[i] / w_tmp2[i]
                    if rf < d_fwd:
                        d_fwd = rf
                    if rb < d_bwd:
                        d_bwd = rb
                if ell == 0:
                    new_prod = _joint_prod(w_tmp2, w2, s0, theta, family)
                else:
                    new_prod = _joint_prod(w1, w_tmp2, s0, theta, family)
                q_fwd = _instr_integral(d_fwd, n, gtag)
                q_bwd = _instr_integral(d_bwd, n, gtag)
                if u7[t, 6] * cur_prod * q_fwd < new_prod * q_bwd:
                    for i in range(np1):
                        wl[i] = w_tmp2[i]
                    cur_prod = new_prod
                    acc[3] += 1
        else:
            lo = theta - eps
            if lo < -1.0:
                lo = -1.0
            hi = theta + eps
            if hi > 1.0:
                hi = 1.0
            width = hi - lo
            thp = lo + u7[t, 4] * width
            lo2 = thp - eps
            if lo2 < -1.0:
                lo2 = -1.0
            hi2 = thp + eps
            if hi2 > 1.0:
                hi2 = 1.0
            width_p = hi2 - lo2
            new_prod = _joint_prod(w1, w2, s0, thp, family)
            new_pi = prior_pdf(thp)
            acc[4] += 1
            if u7[t, 6] * cur_prod * cur_pi * width_p < new_prod * new_pi * width:
                theta = thp
                cur_prod = new_prod
                cur_pi = new_pi
                acc[5] += 1
        codes[t] = code
        thetas[t] = theta

    fstate[0] = theta
    fstate[1] = cur_prod
    fstate[2] = cur_pi
