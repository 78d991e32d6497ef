"""Pure-Python profile integrator.

Reference implementation of the hot kernel; ``_ckernels.pyx`` mirrors it
statement for statement. Keep the two in sync.

The state is ``(w, v)`` with ``v = dw/dtheta``; the integrator is the
Dormand-Prince 5(4) pair with FSAL, error-per-step control, clipping of the
step at requested sample angles, and first downward zero location of ``w``
(Hermite bracketing followed by Newton polishing on single RK steps).
"""
import math

STATUS_END = 0
STATUS_ZERO = 1
STATUS_UNDERFLOW = 2
STATUS_DEGENERATE = 3
STATUS_MAX_STEPS = 4

BACKEND = "python"

# Dormand-Prince 5(4) tableau
C2, C3, C4, C5 = 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0
A21 = 1.0 / 5.0
A31, A32 = 3.0 / 40.0, 9.0 / 40.0
A41, A42, A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
A51, A52, A53, A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
A61, A62, A63, A64, A65 = (
    9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0,
)
B1, B3, B4, B5, B6 = 35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0
E1, E3, E4, E5, E6, E7 = (
    71.0 / 57600.0, -71.0 / 16695.0, 71.0 / 1920.0, -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0,
)

SAFETY = 0.9
FAC_MIN = 0.2
FAC_MAX = 5.0


def rhs(t, w, v, lam, n, p):
    """Second derivative of the profile; NaN on a degenerate state or t <= 0."""
    q = lam * lam * w * w + v * v
    if q == 0.0 or t <= 0.0:
        return math.nan
    num = (p - 2.0) * lam * lam * w * v * v / q + lam * (lam * (p - 1.0) + n - p) * w
    if n != 2:
        num += (n - 2.0) * math.cos(t) / math.sin(t) * v
    den = 1.0 + (p - 2.0) * v * v / q
    return -num / den


def _step(t, w, v, f1, h, lam, n, p):
    # stage k_i = (v_i, f_i) for the first-order system (w, v)
    w2 = w + h * (A21 * v)
    v2 = v + h * (A21 * f1)
    f2 = rhs(t + C2 * h, w2, v2, lam, n, p)
    w3 = w + h * (A31 * v + A32 * v2)
    v3 = v + h * (A31 * f1 + A32 * f2)
    f3 = rhs(t + C3 * h, w3, v3, lam, n, p)
    w4 = w + h * (A41 * v + A42 * v2 + A43 * v3)
    v4 = v + h * (A41 * f1 + A42 * f2 + A43 * f3)
    f4 = rhs(t + C4 * h, w4, v4, lam, n, p)
    w5 = w + h * (A51 * v + A52 * v2 + A53 * v3 + A54 * v4)
    v5 = v + h * (A51 * f1 + A52 * f2 + A53 * f3 + A54 * f4)
    f5 = rhs(t + C5 * h, w5, v5, lam, n, p)
    w6 = w + h * (A61 * v + A62 * v2 + A63 * v3 + A64 * v4 + A65 * v5)
    v6 = v + h * (A61 * f1 + A62 * f2 + A63 * f3 + A64 * f4 + A65 * f5)
    f6 = rhs(t + h, w6, v6, lam, n, p)
    wn = w + h * (B1 * v + B3 * v3 + B4 * v4 + B5 * v5 + B6 * v6)
    vn = v + h * (B1 * f1 + B3 * f3 + B4 * f4 + B5 * f5 + B6 * f6)
    f7 = rhs(t + h, wn, vn, lam, n, p)
    ew = h * (E1 * v + E3 * v3 + E4 * v4 + E5 * v5 + E6 * v6 + E7 * vn)
    ev = h * (E1 * f1 + E3 * f3 + E4 * f4 + E5 * f5 + E6 * f6 + E7 * f7)
    return wn, vn, f7, ew, ev


def _locate_zero(t, w, v, f, tn, wn, vn, lam, n, p):
    """Zero of w in (t, tn] given w(t) > 0 >= w(tn); returns (tz, wz, vz, fz)."""
    h = tn - t
    lo, hi = 0.0, 1.0
    # bisection on the cubic Hermite interpolant of w over the step
    for _ in range(60):
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
    wz, vz = wn, vn
    fz = math.nan
    # Newton polish: each iterate re-integrates one RK step of length tz - t
    for _ in range(8):
        hz = tz - t
        if hz <= 0.0:
            tz = t + 1e-3 * h
            hz = tz - t
        wz, vz, fz, _, _ = _step(t, w, v, f, hz, lam, n, p)
        if vz == 0.0 or math.isnan(vz):
            break
        dt = -wz / vz
        tnew = tz + dt
        if tnew <= t:
            tnew = 0.5 * (t + tz)
        elif tnew > tn:
            tnew = 0.5 * (tz + tn)
        converged = abs(tnew - tz) <= 4e-16 * max(1.0, abs(tz))
        tz = tnew
        if converged:
            break
    hz = tz - t
    wz, vz, fz, _, _ = _step(t, w, v, f, hz, lam, n, p)
    return tz, wz, vz, fz


def integrate_profile(lam, n, p, t0, w0, v0, t_end, rtol, atol,
                      stop_at_zero, samples=None, h_max=0.05, max_steps=1000000):
    """Integrate the profile ODE from ``t0`` to ``t_end``.

    Returns ``(status, t, w, v, steps, sample_w, sample_v)``; sample arrays
    hold NaN for samples that were not reached.
    """
    ns = 0 if samples is None else len(samples)
    sw = [math.nan] * ns
    sv = [math.nan] * ns
    t, w, v = float(t0), float(w0), float(v0)
    f = rhs(t, w, v, lam, n, p)
    if math.isnan(f):
        return STATUS_DEGENERATE, t, w, v, 0, sw, sv
    k = 0
    while k < ns and samples[k] <= t:
        k += 1
    h = min(1e-3, h_max, t_end - t)
    steps = 0
    status = STATUS_END
    while True:
        if t >= t_end:
            status = STATUS_END
            break
        if steps >= max_steps:
            status = STATUS_MAX_STEPS
            break
        target = t_end
        if k < ns and samples[k] < t_end:
            target = samples[k]
        h_prop = h
        hit = False
        if t + h >= target:
            h = target - t
            hit = True
        if h <= 1e-15 * max(1.0, abs(t)):
            status = STATUS_UNDERFLOW
            break
        wn, vn, fn, ew, ev = _step(t, w, v, f, h, lam, n, p)
        sc_w = atol + rtol * max(abs(w), abs(wn))
        sc_v = atol + rtol * max(abs(v), abs(vn))
        err = math.sqrt(0.5 * ((ew / sc_w) ** 2 + (ev / sc_v) ** 2))
        if math.isnan(err) or math.isnan(fn):
            h = FAC_MIN * h
            continue
        if err > 1.0:
            h = h * max(FAC_MIN, SAFETY * err ** -0.2)
            continue
        steps += 1
        tn = target if hit else t + h
        if stop_at_zero and w > 0.0 and wn <= 0.0:
            t, w, v, f = _locate_zero(t, w, v, f, tn, wn, vn, lam, n, p)
            status = STATUS_ZERO
            break
        t, w, v, f = tn, wn, vn, fn
        while k < ns and samples[k] <= t:
            if samples[k] == t:
                sw[k] = w
                sv[k] = v
            k += 1
        fac = FAC_MAX if err == 0.0 else min(FAC_MAX, SAFETY * err ** -0.2)
        h_new = h * fac
        if hit:
            h_new = max(h_new, h_prop)
        h = min(h_new, h_max)
    return status, t, w, v, steps, sw, sv
