# cython: language_level=3
"""Compiled profile integrator; statement-for-statement port of _pykernels."""
from libc.math cimport sqrt, fabs, cos, sin, pow, NAN, isnan

import numpy as np

cdef enum:
    S_END = 0
    S_ZERO = 1
    S_UNDERFLOW = 2
    S_DEGENERATE = 3
    S_MAX_STEPS = 4

STATUS_END = S_END
STATUS_ZERO = S_ZERO
STATUS_UNDERFLOW = S_UNDERFLOW
STATUS_DEGENERATE = S_DEGENERATE
STATUS_MAX_STEPS = S_MAX_STEPS

BACKEND = "cython"

cdef double C2 = 1.0 / 5.0
cdef double C3 = 3.0 / 10.0
cdef double C4 = 4.0 / 5.0
cdef double C5 = 8.0 / 9.0
cdef double A21 = 1.0 / 5.0
cdef double A31 = 3.0 / 40.0
cdef double A32 = 9.0 / 40.0
cdef double A41 = 44.0 / 45.0
cdef double A42 = -56.0 / 15.0
cdef double A43 = 32.0 / 9.0
cdef double A51 = 19372.0 / 6561.0
cdef double A52 = -25360.0 / 2187.0
cdef double A53 = 64448.0 / 6561.0
cdef double A54 = -212.0 / 729.0
cdef double A61 = 9017.0 / 3168.0
cdef double A62 = -355.0 / 33.0
cdef double A63 = 46732.0 / 5247.0
cdef double A64 = 49.0 / 176.0
cdef double A65 = -5103.0 / 18656.0
cdef double B1 = 35.0 / 384.0
cdef double B3 = 500.0 / 1113.0
cdef double B4 = 125.0 / 192.0
cdef double B5 = -2187.0 / 6784.0
cdef double B6 = 11.0 / 84.0
cdef double E1 = 71.0 / 57600.0
cdef double E3 = -71.0 / 16695.0
cdef double E4 = 71.0 / 1920.0
cdef double E5 = -17253.0 / 339200.0
cdef double E6 = 22.0 / 525.0
cdef double E7 = -1.0 / 40.0

cdef double SAFETY = 0.9
cdef double FAC_MIN = 0.2
cdef double FAC_MAX = 5.0


cdef inline double _rhs(double t, double w, double v, double lam, double n, double p) nogil:
    cdef double q = lam * lam * w * w + v * v
    cdef double num, den
    if q == 0.0 or t <= 0.0:
        return NAN
    num = (p - 2.0) * lam * lam * w * v * v / q + lam * (lam * (p - 1.0) + n - p) * w
    if n != 2.0:
        num += (n - 2.0) * cos(t) / sin(t) * v
    den = 1.0 + (p - 2.0) * v * v / q
    return -num / den


def rhs(double t, double w, double v, double lam, double n, double p):
    """Second derivative of the profile; NaN on a degenerate state or t <= 0."""
    return _rhs(t, w, v, lam, n, p)


cdef struct StepOut:
    double w
    double v
    double f
    double ew
    double ev


cdef inline StepOut _step(double t, double w, double v, double f1, double h,
                          double lam, double n, double p) nogil:
    cdef StepOut o
    cdef double w2, v2, f2, w3, v3, f3, w4, v4, f4, w5, v5, f5, w6, v6, f6
    w2 = w + h * (A21 * v)
    v2 = v + h * (A21 * f1)
    f2 = _rhs(t + C2 * h, w2, v2, lam, n, p)
    w3 = w + h * (A31 * v + A32 * v2)
    v3 = v + h * (A31 * f1 + A32 * f2)
    f3 = _rhs(t + C3 * h, w3, v3, lam, n, p)
    w4 = w + h * (A41 * v + A42 * v2 + A43 * v3)
    v4 = v + h * (A41 * f1 + A42 * f2 + A43 * f3)
    f4 = _rhs(t + C4 * h, w4, v4, lam, n, p)
    w5 = w + h * (A51 * v + A52 * v2 + A53 * v3 + A54 * v4)
    v5 = v + h * (A51 * f1 + A52 * f2 + A53 * f3 + A54 * f4)
    f5 = _rhs(t + C5 * h, w5, v5, lam, n, p)
    w6 = w + h * (A61 * v + A62 * v2 + A63 * v3 + A64 * v4 + A65 * v5)
    v6 = v + h * (A61 * f1 + A62 * f2 + A63 * f3 + A64 * f4 + A65 * f5)
    f6 = _rhs(t + h, w6, v6, lam, n, p)
    o.w = w + h * (B1 * v + B3 * v3 + B4 * v4 + B5 * v5 + B6 * v6)
    o.v = v + h * (B1 * f1 + B3 * f3 + B4 * f4 + B5 * f5 + B6 * f6)
    o.f = _rhs(t + h, o.w, o.v, lam, n, p)
    o.ew = h * (E1 * v + E3 * v3 + E4 * v4 + E5 * v5 + E6 * v6 + E7 * o.v)
    o.ev = h * (E1 * f1 + E3 * f3 + E4 * f4 + E5 * f5 + E6 * f6 + E7 * o.f)
    return o


cdef StepOut _locate_zero(double t, double w, double v, double f, double tn,
                          double wn, double vn, double lam, double n, double p,
                          double *tz_out) nogil:
    cdef double h = tn - t
    cdef double lo = 0.0, hi = 1.0, s, s2, s3, hw
    cdef double tz, hz, dt, tnew
    cdef int i
    cdef bint converged
    cdef StepOut o
    for i in range(60):
        s = 0.5 * (lo + hi)
        s2 = s * s
        s3 = s2 * s
        hw = ((2.0 * s3 - 3.0 * s2 + 1.0) * w + (s3 - 2.0 * s2 + s) * h * v
              + (-2.0 * s3 + 3.0 * s2) * wn + (s3 - s2) * h * vn)
        if hw > 0.0:
            lo = s
        else:
            hi = s
    tz = t + hi * h
    for i in range(8):
        hz = tz - t
        if hz <= 0.0:
            tz = t + 1e-3 * h
            hz = tz - t
        o = _step(t, w, v, f, hz, lam, n, p)
        if o.v == 0.0 or isnan(o.v):
            break
        dt = -o.w / o.v
        tnew = tz + dt
        if tnew <= t:
            tnew = 0.5 * (t + tz)
        elif tnew > tn:
            tnew = 0.5 * (tz + tn)
        converged = fabs(tnew - tz) <= 4e-16 * (fabs(tz) if fabs(tz) > 1.0 else 1.0)
        tz = tnew
        if converged:
            break
    hz = tz - t
    o = _step(t, w, v, f, hz, lam, n, p)
    tz_out[0] = tz
    return o


def integrate_profile(double lam, double n, double p, double t0, double w0, double v0,
                      double t_end, double rtol, double atol, bint stop_at_zero,
                      samples=None, double h_max=0.05, long max_steps=1000000):
    """Integrate the profile ODE from ``t0`` to ``t_end``.

    Returns ``(status, t, w, v, steps, sample_w, sample_v)``; sample arrays
    hold NaN for samples that were not reached.
    """
    cdef Py_ssize_t ns = 0 if samples is None else len(samples)
    sw_arr = np.full(ns, np.nan)
    sv_arr = np.full(ns, np.nan)
    st_arr = np.ascontiguousarray(samples if samples is not None else np.empty(0), dtype=np.float64)
    cdef double[::1] sw = sw_arr
    cdef double[::1] sv = sv_arr
    cdef double[::1] st = st_arr
    cdef double t = t0, w = w0, v = v0
    cdef double f = _rhs(t, w, v, lam, n, p)
    cdef Py_ssize_t k = 0
    cdef double h, h_prop, h_new, target, tn, sc_w, sc_v, err, fac, tz
    cdef long steps = 0
    cdef int status = S_END
    cdef bint hit
    cdef StepOut o
    if isnan(f):
        return S_DEGENERATE, t, w, v, 0, sw_arr, sv_arr
    while k < ns and st[k] <= t:
        k += 1
    h = 1e-3
    if h_max < h:
        h = h_max
    if t_end - t < h:
        h = t_end - t
    with nogil:
        while True:
            if t >= t_end:
                status = S_END
                break
            if steps >= max_steps:
                status = S_MAX_STEPS
                break
            target = t_end
            if k < ns and st[k] < t_end:
                target = st[k]
            h_prop = h
            hit = False
            if t + h >= target:
                h = target - t
                hit = True
            if h <= 1e-15 * (fabs(t) if fabs(t) > 1.0 else 1.0):
                status = S_UNDERFLOW
                break
            o = _step(t, w, v, f, h, lam, n, p)
            sc_w = atol + rtol * (fabs(w) if fabs(w) > fabs(o.w) else fabs(o.w))
            sc_v = atol + rtol * (fabs(v) if fabs(v) > fabs(o.v) else fabs(o.v))
            err = sqrt(0.5 * ((o.ew / sc_w) * (o.ew / sc_w) + (o.ev / sc_v) * (o.ev / sc_v)))
            if isnan(err) or isnan(o.f):
                h = FAC_MIN * h
                continue
            if err > 1.0:
                fac = SAFETY * pow(err, -0.2)
                if fac < FAC_MIN:
                    fac = FAC_MIN
                h = h * fac
                continue
            steps += 1
            tn = target if hit else t + h
            if stop_at_zero and w > 0.0 and o.w <= 0.0:
                o = _locate_zero(t, w, v, f, tn, o.w, o.v, lam, n, p, &tz)
                t = tz
                w = o.w
                v = o.v
                f = o.f
                status = S_ZERO
                break
            t = tn
            w = o.w
            v = o.v
            f = o.f
            while k < ns and st[k] <= t:
                if st[k] == t:
                    sw[k] = w
                    sv[k] = v
                k += 1
            if err == 0.0:
                fac = FAC_MAX
            else:
                fac = SAFETY * pow(err, -0.2)
                if fac > FAC_MAX:
                    fac = FAC_MAX
            h_new = h * fac
            if hit and h_prop > h_new:
                h_new = h_prop
            h = h_new if h_new < h_max else h_max
    return status, t, w, v, steps, sw_arr, sv_arr
