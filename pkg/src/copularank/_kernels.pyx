# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: coefficient sums, quantiles, density products,
and the sequential chain steppers.

Mirrors copularank._kernels_py operation for operation; the sequential
steppers must round identically so that the same pre-drawn random blocks give
bit-identical trajectories on either backend.
"""
import numpy as np

cimport numpy as cnp
from libc.math cimport exp, log, sqrt, INFINITY

cnp.import_array()

BACKEND_NAME = "compiled"

cdef double UNIT_EPS_C = 1e-15
UNIT_EPS = UNIT_EPS_C


# ---------------------------------------------------------------------------
# Alternating coefficient sum
# ---------------------------------------------------------------------------

cdef long long _dj_descend(long long n, long long j, long long depth,
                           long long sign, long long weight,
                           long long* idx, long long* counts) noexcept nogil:
    cdef long long total = 0
    cdef long long k, lim
    if depth == j:
        return sign * weight
    lim = idx[depth]
    for k in range(n + 1):
        counts[k] += 1
        total += _dj_descend(n, j, depth + 1,
                             -sign if k > lim else sign,
                             weight * counts[k], idx, counts)
        counts[k] -= 1
    return total


def dj_sum_int(n, j, idx0):
    """Integer numerator of the degree-j coefficient integral (see fallback)."""
    cdef cnp.ndarray[cnp.int64_t, ndim=1] idx = np.ascontiguousarray(idx0, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] counts = np.zeros(int(n) + 1, dtype=np.int64)
    cdef long long nn = n, jj = j, total
    with nogil:
        total = _dj_descend(nn, jj, 0, 1, 1,
                            <long long*> idx.data, <long long*> counts.data)
    return int(total)


# ---------------------------------------------------------------------------
# Normal quantile (Wichura's AS 241)
# ---------------------------------------------------------------------------

cdef double[8] NDTRI_A = [
    3.3871328727963666080e0, 1.3314166789178437745e2, 1.9715909503065514427e3,
    1.3731693765509461125e4, 4.5921953931549871457e4, 6.7265770927008700853e4,
    3.3430575583588128105e4, 2.5090809287301226727e3]
cdef double[8] NDTRI_B = [
    1.0, 4.2313330701600911252e1, 6.8718700749205790830e2,
    5.3941960214247511077e3, 2.1213794301586595867e4, 3.9307895800092710610e4,
    2.8729085735721942674e4, 5.2264952788528545610e3]
cdef double[8] NDTRI_C = [
    1.42343711074968357734e0, 4.63033784615654529590e0,
    5.76949722146069140550e0, 3.64784832476320460504e0,
    1.27045825245236838258e0, 2.41780725177450611770e-1,
    2.27238449892691845833e-2, 7.74545014278341407640e-4]
cdef double[8] NDTRI_D = [
    1.0, 2.05319162663775882187e0, 1.67638483018380384940e0,
    6.89767334985100004550e-1, 1.48103976427480074590e-1,
    1.51986665636164571966e-2, 5.47593808499534494600e-4,
    1.05075007164441684324e-9]
cdef double[8] NDTRI_E = [
    6.65790464350110377720e0, 5.46378491116411436990e0,
    1.78482653991729133580e0, 2.96560571828504891230e-1,
    2.65321895265761230930e-2, 1.24266094738807843860e-3,
    2.71155556874348757815e-5, 2.01033439929228813265e-7]
cdef double[8] NDTRI_F = [
    1.0, 5.99832206555887937690e-1, 1.36929880922735805310e-1,
    1.48753612908506148525e-2, 7.86869131145613259100e-4,
    1.84631831751005468180e-5, 1.42151175831644588870e-7,
    2.04426310338993978564e-15]


cdef inline double _poly7(double* c, double x) noexcept nogil:
    cdef double r = c[7]
    cdef int i
    for i in range(6, -1, -1):
        r = r * x + c[i]
    return r


cdef double _ndtri_c(double p) noexcept nogil:
    cdef double q = p - 0.5
    cdef double r, val
    if q <= 0.425 and q >= -0.425:
        r = 0.180625 - q * q
        return q * _poly7(NDTRI_A, r) / _poly7(NDTRI_B, r)
    r = p if q < 0.0 else 1.0 - p
    r = sqrt(-log(r))
    if r <= 5.0:
        r -= 1.6
        val = _poly7(NDTRI_C, r) / _poly7(NDTRI_D, r)
    else:
        r -= 5.0
        val = _poly7(NDTRI_E, r) / _poly7(NDTRI_F, r)
    return -val if q < 0.0 else val


def ndtri(double p):
    """Standard normal quantile of a scalar p in (0, 1)."""
    return _ndtri_c(p)


def ndtri_vec(p):
    """Elementwise AS 241 quantile."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] flat = np.ascontiguousarray(
        np.asarray(p, dtype=np.float64).ravel())
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty_like(flat)
    cdef Py_ssize_t i, nn = flat.shape[0]
    with nogil:
        for i in range(nn):
            out[i] = _ndtri_c(flat[i])
    return out.reshape(np.asarray(p).shape)


# ---------------------------------------------------------------------------
# Copula density row products
# ---------------------------------------------------------------------------


def fgm_prod_rows(u, v, theta):
    """Row-wise FGM density products; theta scalar or per-row vector."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2] uu = np.ascontiguousarray(u, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] vv = np.ascontiguousarray(v, dtype=np.float64)
    cdef Py_ssize_t rows = uu.shape[0], cols = uu.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(rows, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] th
    cdef double tscal
    cdef Py_ssize_t k, i
    cdef double acc
    cdef bint vec = hasattr(theta, "__len__") and np.ndim(theta) == 1
    if vec:
        th = np.ascontiguousarray(theta, dtype=np.float64)
        with nogil:
            for k in range(rows):
                acc = 1.0
                for i in range(cols):
                    acc *= 1.0 + th[k] * (1.0 - 2.0 * uu[k, i]) * (1.0 - 2.0 * vv[k, i])
                out[k] = acc
    else:
        tscal = theta
        with nogil:
            for k in range(rows):
                acc = 1.0
                for i in range(cols):
                    acc *= 1.0 + tscal * (1.0 - 2.0 * uu[k, i]) * (1.0 - 2.0 * vv[k, i])
                out[k] = acc
    return out


cdef inline double _gauss_dens(double u, double v, double rho) noexcept nogil:
    cdef double x, y, omr2
    if u < UNIT_EPS_C:
        u = UNIT_EPS_C
    elif u > 1.0 - UNIT_EPS_C:
        u = 1.0 - UNIT_EPS_C
    if v < UNIT_EPS_C:
        v = UNIT_EPS_C
    elif v > 1.0 - UNIT_EPS_C:
        v = 1.0 - UNIT_EPS_C
    x = _ndtri_c(u)
    y = _ndtri_c(v)
    omr2 = 1.0 - rho * rho
    return exp((2.0 * rho * x * y - rho * rho * (x * x + y * y)) / (2.0 * omr2)) / sqrt(omr2)


def gauss_prod_rows(u, v, rho):
    """Row-wise Gaussian copula density products; boundary-clamped."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2] uu = np.ascontiguousarray(u, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] vv = np.ascontiguousarray(v, dtype=np.float64)
    cdef Py_ssize_t rows = uu.shape[0], cols = uu.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(rows, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] rv
    cdef double rscal, acc
    cdef Py_ssize_t k, i
    cdef bint vec = hasattr(rho, "__len__") and np.ndim(rho) == 1
    if vec:
        rv = np.ascontiguousarray(rho, dtype=np.float64)
        with nogil:
            for k in range(rows):
                acc = 1.0
                for i in range(cols):
                    acc *= _gauss_dens(uu[k, i], vv[k, i], rv[k])
                out[k] = acc
    else:
        rscal = rho
        with nogil:
            for k in range(rows):
                acc = 1.0
                for i in range(cols):
                    acc *= _gauss_dens(uu[k, i], vv[k, i], rscal)
                out[k] = acc
    return out


# ---------------------------------------------------------------------------
# Sequential samplers
# ---------------------------------------------------------------------------


cdef long long _lehmer_code_c(long long* s0, long long n) noexcept nogil:
    cdef long long code = 0
    cdef long long i, jj, c
    for i in range(n):
        c = 0
        for jj in range(i + 1, n):
            if s0[jj] < s0[i]:
                c += 1
        code = code * (n - i) + c
    return code


cdef void _compat_move_c(long long* s0, long long* star_pos, long long* sstar0,
                         long long* free_pos, long long m, long long nfree,
                         double u_sub, double u_i, double u_j,
                         long long* scratch) noexcept nogil:
    cdef long long a, b, i, jpos, l, k, moved, incoming, tmp, kk
    if m == 0 or (nfree >= 2 and u_sub < 0.5):
        a = <long long>(u_i * nfree)
        if a > nfree - 1:
            a = nfree - 1
        b = <long long>(u_j * (nfree - 1))
        if b > nfree - 2:
            b = nfree - 2
        if b >= a:
            b += 1
        i = free_pos[a]
        jpos = free_pos[b]
        tmp = s0[i]
        s0[i] = s0[jpos]
        s0[jpos] = tmp
    else:
        l = <long long>(u_i * m)
        if l > m - 1:
            l = m - 1
        a = <long long>(u_j * nfree)
        if a > nfree - 1:
            a = nfree - 1
        jpos = free_pos[a]
        moved = s0[star_pos[l]]
        incoming = s0[jpos]
        s0[jpos] = moved
        kk = 0
        for k in range(m):
            if k != l:
                scratch[kk] = s0[star_pos[k]]
                kk += 1
        scratch[kk] = incoming
        # insertion sort, m is small
        for k in range(1, m):
            tmp = scratch[k]
            kk = k - 1
            while kk >= 0 and scratch[kk] > tmp:
                scratch[kk + 1] = scratch[kk]
                kk -= 1
            scratch[kk + 1] = tmp
        for k in range(m):
            s0[star_pos[k]] = scratch[sstar0[k]]


def compat_chain_chunk(s0, star_pos, sstar0, free_pos, u3, codes):
    """Chunked uniform chain on compatible rankings (see fallback docstring)."""
    cdef cnp.ndarray[cnp.int64_t, ndim=1] s_ = np.ascontiguousarray(s0, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] sp = np.ascontiguousarray(star_pos, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] ss = np.ascontiguousarray(sstar0, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] fp = np.ascontiguousarray(free_pos, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] u_ = np.ascontiguousarray(u3, dtype=np.float64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] codes_ = codes
    cdef long long n = s_.shape[0], m = sp.shape[0], nfree = fp.shape[0]
    cdef Py_ssize_t t, steps = u_.shape[0]
    cdef cnp.ndarray[cnp.int64_t, ndim=1] scratch = np.empty(max(m, 1), dtype=np.int64)
    with nogil:
        for t in range(steps):
            _compat_move_c(<long long*> s_.data, <long long*> sp.data,
                           <long long*> ss.data, <long long*> fp.data,
                           m, nfree, u_[t, 0], u_[t, 1], u_[t, 2],
                           <long long*> scratch.data)
            codes_[t] = _lehmer_code_c(<long long*> s_.data, n)
    if s0 is not s_:
        np.asarray(s0)[:] = s_


cdef double _joint_prod_c(double* w1, double* w2, long long* s0, long long n,
                          double theta, int family, double* vbuf) noexcept nogil:
    cdef double acc = 0.0, prod = 1.0, uu, vv, x, y, omr2, scale
    cdef long long i
    for i in range(n):
        acc += w2[i]
        vbuf[i] = acc
    acc = 0.0
    if family == 0:
        for i in range(n):
            acc += w1[i]
            prod *= 1.0 + theta * (1.0 - 2.0 * acc) * (1.0 - 2.0 * vbuf[s0[i]])
    else:
        omr2 = 1.0 - theta * theta
        scale = 1.0 / sqrt(omr2)
        for i in range(n):
            acc += w1[i]
            uu = acc
            if uu < UNIT_EPS_C:
                uu = UNIT_EPS_C
            elif uu > 1.0 - UNIT_EPS_C:
                uu = 1.0 - UNIT_EPS_C
            vv = vbuf[s0[i]]
            if vv < UNIT_EPS_C:
                vv = UNIT_EPS_C
            elif vv > 1.0 - UNIT_EPS_C:
                vv = 1.0 - UNIT_EPS_C
            x = _ndtri_c(uu)
            y = _ndtri_c(vv)
            prod *= scale * exp(
                (2.0 * theta * x * y - theta * theta * (x * x + y * y)) / (2.0 * omr2))
    return prod


cdef inline double _instr_integral_c(double delta, long long n, int gtag) noexcept nogil:
    if delta >= 1.0:
        return INFINITY
    if gtag == 0:
        return ((1.0 - delta) ** <double>(1 - n) - 1.0) / <double>(n - 1)
    return -n * log(1.0 - delta)


def gibbs_chunk(s0, w1, w2, fstate, star_pos, sstar0, free_pos,
                int family, double eps, int variant, int gtag, prior_pdf,
                u7, ex, codes, thetas, acc):
    """Chunked predictive-distribution Gibbs sampler (see fallback docstring)."""
    cdef cnp.ndarray[cnp.int64_t, ndim=1] s_ = s0
    cdef cnp.ndarray[cnp.float64_t, ndim=1] w1_ = w1
    cdef cnp.ndarray[cnp.float64_t, ndim=1] w2_ = w2
    cdef cnp.ndarray[cnp.float64_t, ndim=1] fs = fstate
    cdef cnp.ndarray[cnp.int64_t, ndim=1] sp = np.ascontiguousarray(star_pos, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] ss = np.ascontiguousarray(sstar0, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] fp = np.ascontiguousarray(free_pos, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] u_ = np.ascontiguousarray(u7, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=3] e_ = np.ascontiguousarray(ex, dtype=np.float64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] codes_ = codes
    cdef cnp.ndarray[cnp.float64_t, ndim=1] thetas_ = thetas
    cdef cnp.ndarray[cnp.int64_t, ndim=1] acc_ = acc

    cdef long long n = s_.shape[0], m = sp.shape[0], nfree = fp.shape[0]
    cdef long long np1 = n + 1
    cdef Py_ssize_t t, steps = u_.shape[0]
    cdef double theta = fs[0], cur_prod = fs[1], cur_pi = fs[2]
    cdef long long code
    cdef int mv, ell
    cdef long long i
    cdef double new_prod, new_pi, lam, tot
    cdef double d_fwd, d_bwd, rf, rb, q_fwd, q_bwd
    cdef double lo, hi, width, thp, lo2, hi2, width_p

    cdef cnp.ndarray[cnp.int64_t, ndim=1] s_prop = np.empty(n, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] w_tmp = np.empty(np1, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] w_tmp2 = np.empty(np1, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] vbuf = np.empty(n, dtype=np.float64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] scratch = np.empty(max(m, 1), dtype=np.int64)

    cdef long long* s0p = <long long*> s_.data
    cdef double* w1p = <double*> w1_.data
    cdef double* w2p = <double*> w2_.data
    cdef long long* spp = <long long*> sp.data
    cdef long long* ssp = <long long*> ss.data
    cdef long long* fpp = <long long*> fp.data
    cdef long long* spropp = <long long*> s_prop.data
    cdef double* wtp = <double*> w_tmp.data
    cdef double* wt2p = <double*> w_tmp2.data
    cdef double* vbp = <double*> vbuf.data
    cdef double* wl

    code = _lehmer_code_c(s0p, n)

    for t in range(steps):
        mv = <int>(u_[t, 0] * 3.0)
        if mv > 2:
            mv = 2
        if mv == 0:
            for i in range(n):
                spropp[i] = s0p[i]
            _compat_move_c(spropp, spp, ssp, fpp, m, nfree,
                           u_[t, 1], u_[t, 2], u_[t, 3],
                           <long long*> scratch.data)
            new_prod = _joint_prod_c(w1p, w2p, spropp, n, theta, family, vbp)
            acc_[0] += 1
            if u_[t, 6] * cur_prod < new_prod:
                for i in range(n):
                    s0p[i] = spropp[i]
                cur_prod = new_prod
                code = _lehmer_code_c(s0p, n)
                acc_[1] += 1
        elif mv == 1:
            acc_[2] += 1
            if variant == 0:
                tot = 0.0
                for i in range(np1):
                    tot += e_[t, 0, i]
                for i in range(np1):
                    wtp[i] = e_[t, 0, i] / tot
                tot = 0.0
                for i in range(np1):
                    tot += e_[t, 1, i]
                for i in range(np1):
                    wt2p[i] = e_[t, 1, i] / tot
                new_prod = _joint_prod_c(wtp, wt2p, s0p, n, theta, family, vbp)
                if u_[t, 6] * cur_prod < new_prod:
                    for i in range(np1):
                        w1p[i] = wtp[i]
                        w2p[i] = wt2p[i]
                    cur_prod = new_prod
                    acc_[3] += 1
            else:
                ell = 0 if u_[t, 5] < 0.5 else 1
                lam = u_[t, 4] if gtag == 0 else u_[t, 4] ** (1.0 / n)
                tot = 0.0
                for i in range(np1):
                    tot += e_[t, ell, i]
                for i in range(np1):
                    wtp[i] = e_[t, ell, i] / tot
                wl = w1p if ell == 0 else w2p
                d_fwd = INFINITY
                d_bwd = INFINITY
                for i in range(np1):
                    wt2p[i] = (1.0 - lam) * wl[i] + lam * wtp[i]
                    rf = wt2p[i] / wl[i]
                    rb = wl[i] / wt2p[i]
                    if rf < d_fwd:
                        d_fwd = rf
                    if rb < d_bwd:
                        d_bwd = rb
                if ell == 0:
                    new_prod = _joint_prod_c(wt2p, w2p, s0p, n, theta, family, vbp)
                else:
                    new_prod = _joint_prod_c(w1p, wt2p, s0p, n, theta, family, vbp)
                q_fwd = _instr_integral_c(d_fwd, n, gtag)
                q_bwd = _instr_integral_c(d_bwd, n, gtag)
                if u_[t, 6] * cur_prod * q_fwd < new_prod * q_bwd:
                    for i in range(np1):
                        wl[i] = wt2p[i]
                    cur_prod = new_prod
                    acc_[3] += 1
        else:
            lo = theta - eps
            if lo < -1.0:
                lo = -1.0
            hi = theta + eps
            if hi > 1.0:
                hi = 1.0
            width = hi - lo
            thp = lo + u_[t, 4] * width
            lo2 = thp - eps
            if lo2 < -1.0:
                lo2 = -1.0
            hi2 = thp + eps
            if hi2 > 1.0:
                hi2 = 1.0
            width_p = hi2 - lo2
            new_prod = _joint_prod_c(w1p, w2p, s0p, n, thp, family, vbp)
            new_pi = prior_pdf(thp)
            acc_[4] += 1
            if u_[t, 6] * cur_prod * cur_pi * width_p < new_prod * new_pi * width:
                theta = thp
                cur_prod = new_prod
                cur_pi = new_pi
                acc_[5] += 1
        codes_[t] = code
        thetas_[t] = theta

    fs[0] = theta
    fs[1] = cur_prod
    fs[2] = cur_pi
