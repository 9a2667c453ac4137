# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the hot loops in ``_fallback``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY, M_PI, NAN, exp, expm1, fabs, floor, fmax, fmin, log, log1p, pow

cnp.import_array()

# below this interference factor the remaining grid is summed with a 2nd-order series
cdef double SERIES_Z = 1e-5


cdef inline double mgf_complement(double z, int n) nogil:
    cdef double w, p
    cdef int k
    if z < 1e-2:
        return -expm1(-n * log1p(z))
    w = 1.0 / (1.0 + z)
    p = 1.0
    for k in range(n):
        p *= w
    return 1.0 - p


def exclusion_integrals(
    const double[::1] c,
    const double[::1] d,
    int n,
    double alpha,
    double beta,
    bint los,
    double y0,
    double h,
    const double[::1] gl_x,
    const double[::1] gl_w,
    const double[::1] base,
    const double[::1] decay,
    double t_min,
    double t_max,
):
    cdef Py_ssize_t rows = c.shape[0]
    cdef Py_ssize_t m = base.shape[0]
    cdef Py_ssize_t k_nodes = gl_x.shape[0]
    cdef Py_ssize_t n_panels = m // k_nodes
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out_arr = np.zeros(rows)
    cdef double[::1] out = out_arr
    cdef double[::1] s1 = np.zeros(m + 1)
    cdef double[::1] s2 = np.zeros(m + 1)
    cdef Py_ssize_t i, j, panel, start
    cdef double ci, di, yd, total, z, right, half, tp, rho, lo, near, t_far, tail
    cdef double c1 = n, c2 = 0.5 * n * (n + 1.0)

    for j in range(m - 1, -1, -1):
        s1[j] = s1[j + 1] + base[j] * decay[j]
        s2[j] = s2[j + 1] + base[j] * decay[j] * decay[j]

    with nogil:
        for i in range(rows):
            ci = c[i]
            di = d[i]
            if ci <= 0.0:
                continue
            yd = log(di if di > t_min else t_min)
            panel = <Py_ssize_t> floor((yd - y0) / h)
            if panel < 0:
                panel = 0
            if panel > n_panels:
                panel = n_panels
            total = 0.0
            start = (panel + 1) * k_nodes
            j = start
            while j < m:
                z = ci * decay[j]
                if z < SERIES_Z:
                    total += c1 * ci * s1[j] - c2 * ci * ci * s2[j]
                    break
                total += base[j] * mgf_complement(z, n)
                j += 1

            if panel < n_panels:
                right = y0 + h * (panel + 1)
                half = 0.5 * (right - yd)
                for j in range(k_nodes):
                    tp = exp(yd + half * (gl_x[j] + 1.0))
                    rho = exp(-beta * tp) if los else -expm1(-beta * tp)
                    total += half * gl_w[j] * rho * tp * tp * mgf_complement(ci * pow(tp, -alpha), n)

            lo = di if di < t_min else t_min
            if los:
                near = 0.5 * (t_min * t_min - lo * lo)
            else:
                near = beta * (t_min * t_min * t_min - lo * lo * lo) / 3.0
            total += near * mgf_complement(ci * pow(t_min, -alpha), n)

            t_far = di if di > t_max else t_max
            tail = n * ci * pow(t_far, 2.0 - alpha) / (alpha - 2.0)
            if los:
                tail *= exp(-beta * t_far)
            out[i] = total + tail
    return out_arr


cdef inline double h_fun(double z) nogil:
    if z < 1e-3:
        return 0.5 - z / 3.0 + z * z / 8.0 - z * z * z / 30.0
    return -(expm1(-z) + z * exp(-z)) / (z * z)


cdef inline double g_fun(double z) nogil:
    # 1/2 - h_fun(z) without cancellation
    if z < 1e-3:
        return z / 3.0 - z * z / 8.0 + z * z * z / 30.0 - z * z * z * z / 144.0
    return 0.5 - h_fun(z)


cdef double Y_MAX = 700.0


cdef inline double total_at(double y, double lam, double p_bar, double alpha_los, double alpha_nlos,
                            double beta, bint los_only) nogil:
    cdef double xp = exp(y) * p_bar
    cdef double d_l = pow(xp, 1.0 / alpha_los)
    cdef double d_n
    cdef double total = lam * d_l * d_l * h_fun(beta * d_l)
    if not los_only:
        d_n = pow(xp, 1.0 / alpha_nlos)
        total += lam * d_n * d_n * g_fun(beta * d_n)
    return total


def inverse_intensity(
    const double[::1] u,
    double density,
    double p_bar,
    double alpha_los,
    double alpha_nlos,
    double beta,
    bint los_only,
    double tol=1e-13,
    int max_iter=400,
):
    cdef Py_ssize_t size = u.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out_arr = np.zeros(size)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i
    cdef int it
    cdef double cap = INFINITY
    cdef double lam = 2.0 * M_PI * density
    cdef double target, base, y_l, y_n, lo, hi, y, y_new, xp, d_l, d_n, total, slope, g
    cdef bint done
    if los_only and beta > 0:
        cap = lam / (beta * beta)
    # roots beyond Y_MAX would overflow x; those nodes are out of reach
    cap = fmin(cap, total_at(Y_MAX, lam, p_bar, alpha_los, alpha_nlos, beta, los_only))
    with nogil:
        for i in range(size):
            if u[i] <= 0.0:
                out[i] = 0.0
                continue
            if u[i] >= cap:
                out[i] = INFINITY
                continue
            target = log(u[i])
            base = target - log(M_PI * density)
            y_l = 0.5 * alpha_los * base - log(p_bar)
            y_n = 0.5 * alpha_nlos * base - log(p_bar)
            if los_only:
                lo = y_l - 1.0
                hi = INFINITY
            else:
                lo = (y_l if y_l < y_n else y_n) - 1.0
                hi = (y_l if y_l > y_n else y_n) + 1.0
            hi = fmin(hi, Y_MAX)
            y = fmin(y_l, Y_MAX)
            done = False
            for it in range(max_iter):
                xp = exp(y) * p_bar
                d_l = pow(xp, 1.0 / alpha_los)
                total = lam * d_l * d_l * h_fun(beta * d_l)
                slope = lam * d_l * d_l * exp(-beta * d_l) / alpha_los
                if not los_only:
                    d_n = pow(xp, 1.0 / alpha_nlos)
                    total += lam * d_n * d_n * g_fun(beta * d_n)
                    slope += lam * d_n * d_n * -expm1(-beta * d_n) / alpha_nlos
                g = log(total) - target
                if fabs(g) <= tol:
                    done = True
                    break
                if g < 0:
                    lo = y
                else:
                    hi = y
                if hi - lo <= 1e-15 * fmax(1.0, fabs(y)):
                    done = True
                    break
                y_new = y - fmin(fmax(g * total / slope, -20.0), 20.0)
                if not (y_new > lo and y_new < hi) and hi < INFINITY:
                    y_new = 0.5 * (lo + hi)
                y = y_new
            out[i] = exp(y) if done else NAN
    return out_arr
