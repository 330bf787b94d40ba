# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot-loop kernels: control-law algebra, plant integration steps,
closest-point projection and the batch closed-loop simulator.

Keep the arithmetic in lockstep with _kernels_py.py; the pure-Python module is
the importable fallback and the reference for cross-backend tests.
"""

from libc.math cimport atan, atan2, cos, fabs, fmod, hypot, sin, sqrt, tan, INFINITY, pi

import numpy as np

COMPILED = True

cdef double TWO_PI = 2.0 * pi


cdef inline double _sign0_c(double x, double sign_zero) nogil:
    if x > 0.0:
        return 1.0
    if x < 0.0:
        return -1.0
    return sign_zero


cdef inline double _copysign_c(double mag, double s) nogil:
    return mag if s >= 0.0 else -mag


def sigma_sliding(double e, double psi, double kappa_bar, double k_rob):
    """Sliding variable of the bang-bang curvature law."""
    cdef double sp = sin(psi)
    return -e - (1.0 - cos(psi)) / ((1.0 - k_rob) * kappa_bar) * _sign0_c(sp, 0.0)


def kappa_command(double sigma, double kappa_bar, double sign_zero):
    return kappa_bar * _sign0_c(sigma, sign_zero)


def c0_backout(double kappa_f, double delta, double lam):
    """Steering rate that realizes a commanded front-wheel curvature."""
    return kappa_f / cos(delta) - tan(delta) / lam


def lead_angle(double delta, double ddelta, double lam, double lam_l):
    """Fictive lead-wheel steering angle from the front steering state."""
    return atan((tan(delta) / lam + ddelta) * lam_l * cos(delta))


def c1_backout(double kappa_l, double delta, double ddelta, double delta_l,
               double lam, double lam_l):
    """(lead steering rate, steering acceleration) realizing a lead curvature."""
    cdef double cd = cos(delta)
    cdef double cdl = cos(delta_l)
    cdef double ddelta_l = kappa_l / (cd * cdl) - tan(delta) / lam - ddelta
    cdef double dddelta = ddelta_l / (cdl * cdl * cd * lam_l) - ddelta / lam \
        + ddelta * ddelta * tan(delta)
    return ddelta_l, dddelta


def kin_rk4(double x, double y, double psi, double delta, double lam_veh, double ds):
    """One RK4 step of the kinematic single track in the arc-length domain."""
    cdef double kappa = tan(delta) / lam_veh
    cdef double k1x = cos(psi)
    cdef double k1y = sin(psi)
    cdef double p2 = psi + 0.5 * ds * kappa
    cdef double k2x = cos(p2)
    cdef double k2y = sin(p2)
    cdef double p4 = psi + ds * kappa
    cdef double k4x = cos(p4)
    cdef double k4y = sin(p4)
    x += ds * (k1x + 4.0 * k2x + k4x) / 6.0
    y += ds * (k1y + 4.0 * k2y + k4y) / 6.0
    psi += ds * kappa
    return x, y, psi


cdef inline double _pacejka_c(double alpha, double fz, double mu, double b,
                              double c, double e) nogil:
    cdef double ba = b * alpha
    return mu * fz * sin(c * atan(ba - e * (ba - atan(ba))))


cdef void _kinetic_rhs_c(double* s, double delta_cmd, double vx,
                         double* p, double* out) nogil:
    # s: x, y, psi, vy, r, a1, a2, a3
    # p: mass, iz, lf, lr, mu, b, c, e, omega, g
    cdef double mass = p[0], iz = p[1], lf = p[2], lr = p[3], mu = p[4]
    cdef double b = p[5], c = p[6], e = p[7], omega = p[8], g = p[9]
    cdef double fzf = mass * g * lr / (lf + lr)
    cdef double fzr = mass * g * lf / (lf + lr)
    cdef double delta_veh = s[7]
    cdef double alpha_f = delta_veh - atan((s[3] + lf * s[4]) / vx)
    cdef double alpha_r = -atan((s[3] - lr * s[4]) / vx)
    cdef double fyf = _pacejka_c(alpha_f, fzf, mu, b, c, e)
    cdef double fyr = _pacejka_c(alpha_r, fzr, mu, b, c, e)
    cdef double cdv = cos(delta_veh)
    out[0] = vx * cos(s[2]) - s[3] * sin(s[2])
    out[1] = vx * sin(s[2]) + s[3] * cos(s[2])
    out[2] = s[4]
    out[3] = (fyf * cdv + fyr) / mass - vx * s[4]
    out[4] = (lf * fyf * cdv - lr * fyr) / iz
    out[5] = omega * (delta_cmd - s[5])
    out[6] = omega * (s[5] - s[6])
    out[7] = omega * (s[6] - s[7])


def kinetic_rk4(state, double delta_cmd, double vx, double dt, params):
    """One RK4 step of the kinetic single track with the steering filter."""
    cdef double s0[8]
    cdef double p[10]
    cdef double k1[8]
    cdef double k2[8]
    cdef double k3[8]
    cdef double k4[8]
    cdef double tmp[8]
    cdef int i
    for i in range(8):
        s0[i] = state[i]
    for i in range(10):
        p[i] = params[i]
    _kinetic_rhs_c(s0, delta_cmd, vx, p, k1)
    for i in range(8):
        tmp[i] = s0[i] + 0.5 * dt * k1[i]
    _kinetic_rhs_c(tmp, delta_cmd, vx, p, k2)
    for i in range(8):
        tmp[i] = s0[i] + 0.5 * dt * k2[i]
    _kinetic_rhs_c(tmp, delta_cmd, vx, p, k3)
    for i in range(8):
        tmp[i] = s0[i] + dt * k3[i]
    _kinetic_rhs_c(tmp, delta_cmd, vx, p, k4)
    return tuple(
        s0[i] + dt * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) / 6.0
        for i in range(8)
    )


cdef inline double _wrap_02pi_c(double x) nogil:
    cdef double r = fmod(x, TWO_PI)
    if r < 0.0:
        r += TWO_PI
    return r


def project_packed(double[:, ::1] segs, double px, double py):
    """Closest-point projection onto a packed segment array.

    Returns (s_star, e, theta, kappa, dist); ties go to the smaller s_star.
    """
    cdef double best_dist = INFINITY
    cdef double best_s = 0.0, best_e = 0.0, best_t = 0.0, best_k = 0.0
    cdef double c_s, c_e, c_t, c_k, c_d
    cdef double s0, length, x0, y0, h, ch, sh, t, fx, fy, dist, e
    cdef double cx, cy, rad, a0, sweep, vx, vy, r, phi, xi, kappa, theta
    cdef double qx, qy, t_end, phi_end, d_end, e_end
    cdef bint inside
    cdef Py_ssize_t i, j
    cdef Py_ssize_t n = segs.shape[0]
    for i in range(n):
        s0 = segs[i, 1]
        length = segs[i, 2]
        if segs[i, 0] == 0.0:
            x0 = segs[i, 3]; y0 = segs[i, 4]; h = segs[i, 5]
            ch = cos(h)
            sh = sin(h)
            t = (px - x0) * ch + (py - y0) * sh
            if t < 0.0:
                t = 0.0
            elif t > length:
                t = length
            fx = x0 + t * ch
            fy = y0 + t * sh
            dist = hypot(px - fx, py - fy)
            e = -(px - fx) * sh + (py - fy) * ch
            c_s = s0 + t; c_e = e; c_t = h; c_k = 0.0; c_d = dist
        else:
            cx = segs[i, 3]; cy = segs[i, 4]; rad = segs[i, 5]
            a0 = segs[i, 6]; sweep = segs[i, 7]
            vx = px - cx
            vy = py - cy
            r = hypot(vx, vy)
            phi = atan2(vy, vx)
            if sweep > 0.0:
                xi = _wrap_02pi_c(phi - a0)
                inside = xi <= sweep
            else:
                xi = _wrap_02pi_c(a0 - phi)
                inside = xi <= -sweep
            kappa = _copysign_c(1.0 / rad, sweep)
            if inside:
                t = xi * rad
                theta = phi + _copysign_c(0.5 * pi, sweep)
                e = rad - r if sweep > 0.0 else r - rad
                c_s = s0 + t; c_e = e; c_t = theta; c_k = kappa; c_d = fabs(r - rad)
            else:
                c_d = INFINITY
                c_s = 0.0; c_e = 0.0; c_t = 0.0; c_k = kappa
                for j in range(2):
                    if j == 0:
                        t_end = 0.0; phi_end = a0
                    else:
                        t_end = length; phi_end = a0 + sweep
                    qx = cx + rad * cos(phi_end)
                    qy = cy + rad * sin(phi_end)
                    theta = phi_end + _copysign_c(0.5 * pi, sweep)
                    d_end = hypot(px - qx, py - qy)
                    e_end = -(px - qx) * sin(theta) + (py - qy) * cos(theta)
                    if d_end < c_d - 1e-12:
                        c_d = d_end
                        c_s = s0 + t_end; c_e = e_end; c_t = theta
        if c_d < best_dist - 1e-12:
            best_dist = c_d
            best_s = c_s; best_e = c_e; best_t = c_t; best_k = c_k
    return best_s, best_e, best_t, best_k, best_dist


def simulate_reach_profile(double e0, double psi0, double delta0, double lam,
                           values, lengths, double ddelta_bar, double delta_max,
                           double ds, double eps_e, double eps_psi, double eps_delta,
                           double s_max):
    """Integrate (e, psi, delta) under a piecewise-constant steering-rate
    profile until the terminal box or the length budget is hit.

    Returns (reached, s_stop, e, psi, delta). The steering angle saturates at
    +-delta_max; the (e, psi) subsystem advances with a midpoint step.
    """
    cdef double[::1] vals = np.ascontiguousarray(values, dtype=np.float64)
    cdef double[::1] lens = np.ascontiguousarray(lengths, dtype=np.float64)
    cdef double e = e0, psi = psi0, delta = delta0, s = 0.0
    cdef double u, seg_end, h, delta_next, psi_mid, delta_mid
    cdef Py_ssize_t i
    cdef Py_ssize_t m = vals.shape[0]
    cdef bint reached = False
    if fabs(e) <= eps_e and fabs(psi) <= eps_psi and fabs(delta) <= eps_delta:
        return True, 0.0, e, psi, delta
    with nogil:
        for i in range(m):
            u = vals[i] * ddelta_bar
            seg_end = s + lens[i]
            if seg_end > s_max:
                seg_end = s_max
            while s < seg_end - 1e-12:
                h = ds if seg_end - s > ds else seg_end - s
                delta_next = delta + u * h
                if delta_next > delta_max:
                    delta_next = delta_max
                elif delta_next < -delta_max:
                    delta_next = -delta_max
                psi_mid = psi + 0.5 * h * tan(delta) / lam
                delta_mid = 0.5 * (delta + delta_next)
                e += h * sin(psi_mid)
                psi += h * tan(delta_mid) / lam
                delta = delta_next
                s += h
                if fabs(e) <= eps_e and fabs(psi) <= eps_psi and fabs(delta) <= eps_delta:
                    reached = True
                    break
            if reached or s >= s_max:
                break
    return reached, s, e, psi, delta


def simulate_chain_batch(e0, psi0, delta0, ddelta0, int n_steps, double ds,
                         double lam, double lam_l, double kappa_bar, double k_rob,
                         double sign_zero, double kappa_dist, double lam_veh):
    """Closed-loop straight-path runs of the C1-smooth controller.

    Sequential per run; same update order as the vectorized fallback. Returns
    an (N, 6) array: max|delta|, max|delta_l|, max|delta'|, max|delta''|,
    final |e|, final |sigma|.
    """
    cdef double[::1] e0v = np.ascontiguousarray(e0, dtype=np.float64)
    cdef double[::1] psi0v = np.ascontiguousarray(psi0, dtype=np.float64)
    cdef double[::1] d0v = np.ascontiguousarray(delta0, dtype=np.float64)
    cdef double[::1] dd0v = np.ascontiguousarray(ddelta0, dtype=np.float64)
    cdef Py_ssize_t n_runs = e0v.shape[0]
    out_arr = np.empty((n_runs, 6), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double scale = 1.0 / ((1.0 - k_rob) * kappa_bar)
    cdef double y, psi, delta, ddelta, sigma
    cdef double max_d, max_dl, max_dd, max_ddd
    cdef double delta_l, e_f, psi_f, e_l, psi_l, kappa_l, cd, cdl
    cdef double ddelta_l, dddelta, delta_new, kappa_plant, p2, p4
    cdef Py_ssize_t i
    cdef int k
    with nogil:
        for i in range(n_runs):
            y = e0v[i]
            psi = psi0v[i]
            delta = d0v[i]
            ddelta = dd0v[i]
            max_d = fabs(delta)
            max_dl = 0.0
            max_dd = 0.0
            max_ddd = 0.0
            sigma = 0.0
            for k in range(n_steps):
                delta_l = atan((tan(delta) / lam + ddelta) * lam_l * cos(delta))
                e_f = y + sin(psi) * lam
                psi_f = psi + delta
                e_l = e_f + sin(psi_f) * lam_l
                psi_l = psi_f + delta_l
                sigma = -e_l - (1.0 - cos(psi_l)) * scale * _sign0_c(sin(psi_l), 0.0)
                kappa_l = kappa_bar * _sign0_c(sigma, sign_zero) + kappa_dist
                cd = cos(delta)
                cdl = cos(delta_l)
                ddelta_l = kappa_l / (cd * cdl) - tan(delta) / lam - ddelta
                dddelta = ddelta_l / (cdl * cdl * cd * lam_l) - ddelta / lam \
                    + ddelta * ddelta * tan(delta)

                if fabs(delta_l) > max_dl:
                    max_dl = fabs(delta_l)
                if fabs(ddelta) > max_dd:
                    max_dd = fabs(ddelta)
                if fabs(dddelta) > max_ddd:
                    max_ddd = fabs(dddelta)

                delta_new = delta + ddelta * ds
                ddelta = ddelta + dddelta * ds
                delta = delta_new
                if fabs(delta) > max_d:
                    max_d = fabs(delta)

                kappa_plant = tan(delta) / lam_veh
                p2 = psi + 0.5 * ds * kappa_plant
                p4 = psi + ds * kappa_plant
                y = y + ds * (sin(psi) + 4.0 * sin(p2) + sin(p4)) / 6.0
                psi = psi + ds * kappa_plant
            out[i, 0] = max_d
            out[i, 1] = max_dl
            out[i, 2] = max_dd
            out[i, 3] = max_ddd
            out[i, 4] = fabs(y)
            out[i, 5] = fabs(sigma)
    return out_arr
