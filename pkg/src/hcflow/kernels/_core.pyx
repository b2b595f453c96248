# cython: boundscheck=False, wraparound=False, cdivision=True
# cython: language_level=3
"""Compiled kernel lane.

Mirrors the stage evaluations in `kernels/pure.py` (same formulas, same
return tuples, elementwise-identical arithmetic; reductions may differ from
numpy's pairwise summation at the last few ulps).  See pure.py for the
conventions and the meaning of the returned tuples.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport M_PI, NAN, cosh, fabs, isfinite, pow, sinh, sqrt
from libc.stdlib cimport free, malloc

cnp.import_array()

LANE = "cython"


cdef inline double c_comb(int a, int b) noexcept nogil:
    """Binomial coefficient as a double; 0 outside the triangle."""
    cdef double res = 1.0
    cdef int i
    if b < 0 or a < 0 or b > a:
        return 0.0
    if b > a - b:
        b = a - b
    for i in range(1, b + 1):
        res = res * (a - b + i) / i
    return res


cdef inline double e_pair(int m, int n, double x, double y) noexcept nogil:
    """Elementary symmetric e_m of the multiset {x} + (n-1)*{y}."""
    cdef double acc = 0.0
    if m == 0:
        return 1.0
    if m > n:
        return 0.0
    if m <= n - 1:
        acc += c_comb(n - 1, m) * pow(y, m)
    acc += c_comb(n - 1, m - 1) * x * pow(y, m - 1)
    return acc


cdef inline double e_pair_minus_x(int m, int n, double y) noexcept nogil:
    if m < 1 or m - 1 > n - 1:
        return 0.0
    return c_comb(n - 1, m - 1) * pow(y, m - 1)


cdef inline double e_pair_minus_y(int m, int n, double x, double y) noexcept nogil:
    cdef double acc = 0.0
    if 1 <= m <= n - 1:
        acc += c_comb(n - 2, m - 1) * pow(y, m - 1)
    if m >= 2 and m - 2 <= n - 2:
        acc += c_comb(n - 2, m - 2) * x * pow(y, m - 2)
    return acc


cdef inline double fam_value(int fam, double p1, double p2, double c_F,
                             int n, double x, double y,
                             double* hbuf) noexcept nogil:
    """Normalized family value on {x} + (n-1)*{y}; fills hbuf[0..k] for the
    CompletelySymmetric family (fam == 2) so fam_lam can reuse it."""
    cdef int k, l, m, i
    cdef double acc, powx, ek, el, r
    if fam == 0:
        return (x + (n - 1) * y) / n
    if fam == 1:
        return sqrt((x * x + (n - 1) * y * y) / n)
    if fam == 2:
        k = <int> p1
        for m in range(k + 1):
            acc = 0.0
            powx = 1.0
            for i in range(m + 1):
                acc += c_comb(n - 2 + m - i, m - i) * powx * pow(y, m - i)
                powx *= x
            hbuf[m] = acc
        return c_F * pow(hbuf[k], 1.0 / k)
    if fam == 3:
        k = <int> p1
        l = <int> p2
        ek = e_pair(k, n, x, y)
        el = e_pair(l, n, x, y)
        return c_F * pow(ek / el, 1.0 / (k - l))
    r = p1
    if r == 0.0:
        return pow(x * pow(y, n - 1), 1.0 / n)
    return pow((pow(x, r) + (n - 1) * pow(y, r)) / n, 1.0 / r)


cdef inline double fam_lam(int fam, double p1, double p2, double c_F,
                           int n, double x, double y, double* hbuf,
                           double Fval) noexcept nogil:
    """Largest gradient entry max(dF/dx, dF/dy); fam_value must run first so
    hbuf holds the h-table for fam == 2."""
    cdef int k, l, j
    cdef double dhx, dhy, powx, powy, factor, ek, el, relx, rely, r, zm
    if fam == 0:
        return 1.0 / n
    if fam == 1:
        return (x if x > y else y) / (n * Fval)
    if fam == 2:
        k = <int> p1
        dhx = 0.0
        dhy = 0.0
        powx = 1.0
        powy = 1.0
        for j in range(k):
            dhx += powx * hbuf[k - 1 - j]
            dhy += powy * hbuf[k - 1 - j]
            if j < k - 1:
                powx *= x
                powy *= y
        factor = c_F * (1.0 / k) * pow(hbuf[k], 1.0 / k - 1.0)
        return factor * (dhx if dhx > dhy else dhy)
    if fam == 3:
        k = <int> p1
        l = <int> p2
        ek = e_pair(k, n, x, y)
        el = e_pair(l, n, x, y)
        relx = e_pair_minus_x(k, n, y) / ek
        rely = e_pair_minus_y(k, n, x, y) / ek
        if l != 0:
            relx -= e_pair_minus_x(l, n, y) / el
            rely -= e_pair_minus_y(l, n, x, y) / el
        return Fval * (relx if relx > rely else rely) / (k - l)
    r = p1
    if r == 0.0:
        zm = x if x < y else y
        return Fval / (n * zm)
    if r < 1.0:
        zm = x if x < y else y
    else:
        zm = x if x > y else y
    return pow(Fval, 1.0 - r) * pow(zm, r - 1.0) / n


cdef inline double global_weight(int k, int n, double a,
                                 double x, double y) noexcept nogil:
    """Nonlocal-term weight on unshifted curvatures (see pure.py)."""
    if k == 0:
        return 1.0
    if k == 1:
        return e_pair(1, n, x, y)
    return k * e_pair(k, n, x, y) + a * a * (n - k + 2) * e_pair(k - 2, n, x, y)


def stage_fullcircle(const double[::1] u, double a, double alpha, int k, int fam,
                     double p1, double p2, double c_F, const double[::1] W):
    cdef Py_ssize_t N = u.shape[0]
    cdef Py_ssize_t j, jp1, jp2, jm1, jm2
    cdef double h = 2.0 * M_PI / N
    cdef double du, d2u, phi, phip, g, sq, kap, Fj, wm
    cdef double kmin = 1e300, maxgrad = 0.0, minu = 1e300, minsq = 1e300
    cdef double num = 0.0, den = 0.0, margin, f

    for j in range(N):
        if not isfinite(u[j]) or u[j] <= 0.0:
            return (1, NAN) + (None,) * 10

    kappa_arr = np.empty(N)
    v_arr = np.empty(N)
    md_arr = np.empty(N)
    F_arr = np.empty(N)
    rhs_arr = np.empty(N)
    cdef double[::1] kappa = kappa_arr
    cdef double[::1] v = v_arr
    cdef double[::1] md = md_arr
    cdef double[::1] F = F_arr
    cdef double[::1] rhs = rhs_arr

    for j in range(N):
        jp1 = j + 1 if j + 1 < N else 0
        jp2 = j + 2 if j + 2 < N else j + 2 - N
        jm1 = j - 1 if j >= 1 else N - 1
        jm2 = j - 2 if j >= 2 else j - 2 + N
        du = (-u[jp2] + 8.0 * u[jp1] - 8.0 * u[jm1] + u[jm2]) / (12.0 * h)
        d2u = (-u[jp2] + 16.0 * u[jp1] - 30.0 * u[j] + 16.0 * u[jm1]
               - u[jm2]) / (12.0 * h * h)
        phi = sinh(a * u[j]) / a
        phip = cosh(a * u[j])
        g = du * du + phi * phi
        sq = sqrt(g)
        kap = (phip * (2.0 * du * du + phi * phi) - phi * d2u) / (g * sq)
        kappa[j] = kap
        v[j] = sq / phi
        md[j] = sq
        if kap < kmin:
            kmin = kap
        if fabs(du / phi) > maxgrad:
            maxgrad = fabs(du / phi)
        if u[j] < minu:
            minu = u[j]
        if sq < minsq:
            minsq = sq

    margin = kmin - alpha
    if margin <= 0.0:
        return (2, margin, None, None, None, kappa_arr, v_arr, md_arr, None,
                maxgrad, minu, minsq)

    for j in range(N):
        Fj = kappa[j] - alpha
        F[j] = Fj
        wm = W[j] * md[j] * (1.0 if k == 0 else kappa[j])
        num += wm * Fj
        den += wm
    f = num / den
    for j in range(N):
        rhs[j] = -v[j] * (F[j] - f)
    return (0, margin, rhs_arr, F_arr, f, kappa_arr, v_arr, md_arr, 1.0,
            maxgrad, minu, minsq)


def stage_axisym(const double[::1] u, const double[::1] cot_theta, double a, int n,
                 double alpha, int k, int fam, double p1, double p2,
                 double c_F, const double[::1] W):
    cdef Py_ssize_t N = u.shape[0]
    cdef Py_ssize_t j
    cdef double h = M_PI / N
    cdef double um, up, du, d2u, phi, phip, g, sq, kt, kp, kmn
    cdef double x, y, Fj, lamj, wm
    cdef double kmin = 1e300, maxgrad = 0.0, minu = 1e300, minsq = 1e300
    cdef double lam = 0.0, num = 0.0, den = 0.0, margin, f
    cdef int kcs = (<int> p1) if fam == 2 else 0
    cdef double* hbuf

    for j in range(N):
        if not isfinite(u[j]) or u[j] <= 0.0:
            return (1, NAN) + (None,) * 11

    kth_arr = np.empty(N)
    kph_arr = np.empty(N)
    v_arr = np.empty(N)
    md_arr = np.empty(N)
    F_arr = np.empty(N)
    rhs_arr = np.empty(N)
    cdef double[::1] kth = kth_arr
    cdef double[::1] kph = kph_arr
    cdef double[::1] v = v_arr
    cdef double[::1] md = md_arr
    cdef double[::1] F = F_arr
    cdef double[::1] rhs = rhs_arr

    for j in range(N):
        um = u[j - 1] if j >= 1 else u[0]
        up = u[j + 1] if j + 1 < N else u[N - 1]
        du = (up - um) / (2.0 * h)
        d2u = (up - 2.0 * u[j] + um) / (h * h)
        phi = sinh(a * u[j]) / a
        phip = cosh(a * u[j])
        g = du * du + phi * phi
        sq = sqrt(g)
        kt = (phip * (2.0 * du * du + phi * phi) - phi * d2u) / (g * sq)
        kp = (phip - du * cot_theta[j] / phi) / sq
        kth[j] = kt
        kph[j] = kp
        v[j] = sq / phi
        md[j] = sq * pow(phi, n - 1)
        kmn = kt if (n == 1 or kt < kp) else kp
        if kmn < kmin:
            kmin = kmn
        if fabs(du / phi) > maxgrad:
            maxgrad = fabs(du / phi)
        if u[j] < minu:
            minu = u[j]
        if sq < minsq:
            minsq = sq

    margin = kmin - alpha
    if margin <= 0.0:
        return (2, margin, None, None, None, kth_arr, kph_arr, v_arr, md_arr,
                None, maxgrad, minu, minsq)

    hbuf = <double*> malloc((kcs + 2) * sizeof(double))
    if hbuf == NULL:
        raise MemoryError()
    try:
        for j in range(N):
            x = kth[j] - alpha
            y = kph[j] - alpha
            if n == 1:
                Fj = x
                lamj = 1.0
            else:
                Fj = fam_value(fam, p1, p2, c_F, n, x, y, hbuf)
                lamj = fam_lam(fam, p1, p2, c_F, n, x, y, hbuf, Fj)
            F[j] = Fj
            if lamj > lam:
                lam = lamj
            wm = W[j] * md[j] * global_weight(k, n, a, kth[j], kph[j])
            num += wm * Fj
            den += wm
    finally:
        free(hbuf)
    f = num / den
    for j in range(N):
        rhs[j] = -v[j] * (F[j] - f)
    return (0, margin, rhs_arr, F_arr, f, kth_arr, kph_arr, v_arr, md_arr,
            lam, maxgrad, minu, minsq)
