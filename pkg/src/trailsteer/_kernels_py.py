"""Pure-Python fallback for the compiled kernels in _kernels.pyx.

Scalar functions mirror the Cython implementations operation-for-operation so
both backends produce matching floating-point results (identical libm calls in
identical order). The batch simulator is numpy-vectorized instead of looped.
"""

import math

import numpy as np

TWO_PI = 2.0 * math.pi

COMPILED = False


def _sign0(x, sign_zero):
    if x > 0.0:
        return 1.0
    if x < 0.0:
        return -1.0
    return sign_zero


def sigma_sliding(e, psi, kappa_bar, k_rob):
    """Sliding variable of the bang-bang curvature law."""
    sp = math.sin(psi)
    return -e - (1.0 - math.cos(psi)) / ((1.0 - k_rob) * kappa_bar) * _sign0(sp, 0.0)


def kappa_command(sigma, kappa_bar, sign_zero):
    return kappa_bar * _sign0(sigma, sign_zero)


def c0_backout(kappa_f, delta, lam):
    """Steering rate that realizes a commanded front-wheel curvature."""
    return kappa_f / math.cos(delta) - math.tan(delta) / lam


def lead_angle(delta, ddelta, lam, lam_l):
    """Fictive lead-wheel steering angle from the front steering state."""
    return math.atan((math.tan(delta) / lam + ddelta) * lam_l * math.cos(delta))


def c1_backout(kappa_l, delta, ddelta, delta_l, lam, lam_l):
    """(lead steering rate, steering acceleration) realizing a lead curvature."""
    cd = math.cos(delta)
    cdl = math.cos(delta_l)
    ddelta_l = kappa_l / (cd * cdl) - math.tan(delta) / lam - ddelta
    dddelta = ddelta_l / (cdl * cdl * cd * lam_l) - ddelta / lam + ddelta * ddelta * math.tan(delta)
    return ddelta_l, dddelta


def kin_rk4(x, y, psi, delta, lam_veh, ds):
    """One RK4 step of the kinematic single track in the arc-length domain."""
    kappa = math.tan(delta) / lam_veh
    k1x = math.cos(psi)
    k1y = math.sin(psi)
    p2 = psi + 0.5 * ds * kappa
    k2x = math.cos(p2)
    k2y = math.sin(p2)
    p4 = psi + ds * kappa
    k4x = math.cos(p4)
    k4y = math.sin(p4)
    x += ds * (k1x + 4.0 * k2x + k4x) / 6.0
    y += ds * (k1y + 4.0 * k2y + k4y) / 6.0
    psi += ds * kappa
    return x, y, psi


def _pacejka(alpha, fz, mu, b, c, e):
    ba = b * alpha
    return mu * fz * math.sin(c * math.atan(ba - e * (ba - math.atan(ba))))


def _kinetic_rhs(psi, vy, r, a1, a2, a3, delta_cmd, vx, params):
    mass, iz, lf, lr, mu, b, c, e, omega, g = params
    fzf = mass * g * lr / (lf + lr)
    fzr = mass * g * lf / (lf + lr)
    delta_veh = a3
    alpha_f = delta_veh - math.atan((vy + lf * r) / vx)
    alpha_r = -math.atan((vy - lr * r) / vx)
    fyf = _pacejka(alpha_f, fzf, mu, b, c, e)
    fyr = _pacejka(alpha_r, fzr, mu, b, c, e)
    cdv = math.cos(delta_veh)
    dvy = (fyf * cdv + fyr) / mass - vx * r
    dr = (lf * fyf * cdv - lr * fyr) / iz
    dx = vx * math.cos(psi) - vy * math.sin(psi)
    dy = vx * math.sin(psi) + vy * math.cos(psi)
    da1 = omega * (delta_cmd - a1)
    da2 = omega * (a1 - a2)
    da3 = omega * (a2 - a3)
    return dx, dy, r, dvy, dr, da1, da2, da3


def kinetic_rk4(state, delta_cmd, vx, dt, params):
    """One RK4 step of the kinetic single track with the steering filter.

    state: (x, y, psi, vy, r, a1, a2, a3); vx held constant over the step.
    """
    s0 = state

    def add(s, k, h):
        return tuple(si + h * ki for si, ki in zip(s, k))

    k1 = _kinetic_rhs(s0[2], s0[3], s0[4], s0[5], s0[6], s0[7], delta_cmd, vx, params)
    s1 = add(s0, k1, 0.5 * dt)
    k2 = _kinetic_rhs(s1[2], s1[3], s1[4], s1[5], s1[6], s1[7], delta_cmd, vx, params)
    s2 = add(s0, k2, 0.5 * dt)
    k3 = _kinetic_rhs(s2[2], s2[3], s2[4], s2[5], s2[6], s2[7], delta_cmd, vx, params)
    s3 = add(s0, k3, dt)
    k4 = _kinetic_rhs(s3[2], s3[3], s3[4], s3[5], s3[6], s3[7], delta_cmd, vx, params)
    return tuple(
        si + dt * (k1i + 2.0 * k2i + 2.0 * k3i + k4i) / 6.0
        for si, k1i, k2i, k3i, k4i in zip(s0, k1, k2, k3, k4)
    )


def _wrap_02pi(x):
    r = math.fmod(x, TWO_PI)
    if r < 0.0:
        r += TWO_PI
    return r


def project_packed(segs, px, py):
    """Closest-point projection onto a packed segment array.

    Returns (s_star, e, theta, kappa, dist); ties go to the smaller s_star.
    """
    best_dist = math.inf
    best = (0.0, 0.0, 0.0, 0.0)
    n = segs.shape[0]
    for i in range(n):
        kind = segs[i, 0]
        s0 = segs[i, 1]
        length = segs[i, 2]
        if kind == 0.0:
            x0, y0, h = segs[i, 3], segs[i, 4], segs[i, 5]
            ch = math.cos(h)
            sh = math.sin(h)
            t = (px - x0) * ch + (py - y0) * sh
            if t < 0.0:
                t = 0.0
            elif t > length:
                t = length
            fx = x0 + t * ch
            fy = y0 + t * sh
            dist = math.hypot(px - fx, py - fy)
            e = -(px - fx) * sh + (py - fy) * ch
            cand = (s0 + t, e, h, 0.0, dist)
        else:
            cx, cy, rad, a0, sweep = segs[i, 3], segs[i, 4], segs[i, 5], segs[i, 6], segs[i, 7]
            vx = px - cx
            vy = py - cy
            r = math.hypot(vx, vy)
            phi = math.atan2(vy, vx)
            if sweep > 0.0:
                xi = _wrap_02pi(phi - a0)
                inside = xi <= sweep
            else:
                xi = _wrap_02pi(a0 - phi)
                inside = xi <= -sweep
            kappa = math.copysign(1.0 / rad, sweep)
            if inside:
                t = xi * rad
                theta = phi + math.copysign(0.5 * math.pi, sweep)
                e = rad - r if sweep > 0.0 else r - rad
                cand = (s0 + t, e, theta, kappa, abs(r - rad))
            else:
                cand = None
                for t_end, phi_end in ((0.0, a0), (length, a0 + sweep)):
                    qx = cx + rad * math.cos(phi_end)
                    qy = cy + rad * math.sin(phi_end)
                    theta = phi_end + math.copysign(0.5 * math.pi, sweep)
                    dist = math.hypot(px - qx, py - qy)
                    e = -(px - qx) * math.sin(theta) + (py - qy) * math.cos(theta)
                    c = (s0 + t_end, e, theta, kappa, dist)
                    if cand is None or dist < cand[4] - 1e-12:
                        cand = c
        if cand[4] < best_dist - 1e-12:
            best_dist = cand[4]
            best = cand[:4]
    return best[0], best[1], best[2], best[3], best_dist


def simulate_reach_profile(e0, psi0, delta0, lam, values, lengths,
                           ddelta_bar, delta_max, ds, eps_e, eps_psi, eps_delta,
                           s_max):
    """Integrate (e, psi, delta) under a piecewise-constant steering-rate
    profile until the terminal box or the length budget is hit.

    Returns (reached, s_stop, e, psi, delta). The steering angle saturates at
    +-delta_max; the (e, psi) subsystem advances with a midpoint step.
    """
    e = e0
    psi = psi0
    delta = delta0
    s = 0.0
    m = len(values)
    if abs(e) <= eps_e and abs(psi) <= eps_psi and abs(delta) <= eps_delta:
        return True, 0.0, e, psi, delta
    for i in range(m):
        u = values[i] * ddelta_bar
        seg_end = s + lengths[i]
        if seg_end > s_max:
            seg_end = s_max
        while s < seg_end - 1e-12:
            h = ds if seg_end - s > ds else seg_end - s
            delta_next = delta + u * h
            if delta_next > delta_max:
                delta_next = delta_max
            elif delta_next < -delta_max:
                delta_next = -delta_max
            psi_mid = psi + 0.5 * h * math.tan(delta) / lam
            delta_mid = 0.5 * (delta + delta_next)
            e += h * math.sin(psi_mid)
            psi += h * math.tan(delta_mid) / lam
            delta = delta_next
            s += h
            if abs(e) <= eps_e and abs(psi) <= eps_psi and abs(delta) <= eps_delta:
                return True, s, e, psi, delta
        if s >= s_max:
            break
    return False, s, e, psi, delta


def simulate_chain_batch(e0, psi0, delta0, ddelta0, n_steps, ds,
                         lam, lam_l, kappa_bar, k_rob, sign_zero, kappa_dist,
                         lam_veh):
    """Closed-loop straight-path runs of the C1-smooth controller, vectorized.

    All runs advance in lockstep for n_steps of size ds. Returns an (N, 6)
    array: max|delta|, max|delta_l|, max|delta'|, max|delta''|, final |e|,
    final |sigma|.
    """
    e0 = np.asarray(e0, dtype=np.float64)
    y = e0.copy()
    psi = np.asarray(psi0, dtype=np.float64).copy()
    delta = np.asarray(delta0, dtype=np.float64).copy()
    ddelta = np.asarray(ddelta0, dtype=np.float64).copy()
    scale = 1.0 / ((1.0 - k_rob) * kappa_bar)

    max_d = np.abs(delta)
    max_dl = np.zeros_like(y)
    max_dd = np.zeros_like(y)
    max_ddd = np.zeros_like(y)
    sigma = np.zeros_like(y)

    def sgn(x, at_zero):
        s = np.sign(x)
        if at_zero != 0.0:
            s = np.where(x == 0.0, at_zero, s)
        return s

    for _ in range(n_steps):
        delta_l = np.arctan((np.tan(delta) / lam + ddelta) * lam_l * np.cos(delta))
        e_f = y + np.sin(psi) * lam
        psi_f = psi + delta
        e_l = e_f + np.sin(psi_f) * lam_l
        psi_l = psi_f + delta_l
        sigma = -e_l - (1.0 - np.cos(psi_l)) * scale * sgn(np.sin(psi_l), 0.0)
        kappa_l = kappa_bar * sgn(sigma, sign_zero) + kappa_dist
        cd = np.cos(delta)
        cdl = np.cos(delta_l)
        ddelta_l = kappa_l / (cd * cdl) - np.tan(delta) / lam - ddelta
        dddelta = ddelta_l / (cdl * cdl * cd * lam_l) - ddelta / lam \
            + ddelta * ddelta * np.tan(delta)

        np.maximum(max_dl, np.abs(delta_l), out=max_dl)
        np.maximum(max_dd, np.abs(ddelta), out=max_dd)
        np.maximum(max_ddd, np.abs(dddelta), out=max_ddd)

        # explicit Euler on the internal chain, then the plant follows delta
        delta_new = delta + ddelta * ds
        ddelta = ddelta + dddelta * ds
        delta = delta_new
        np.maximum(max_d, np.abs(delta), out=max_d)

        kappa_plant = np.tan(delta) / lam_veh
        p2 = psi + 0.5 * ds * kappa_plant
        p4 = psi + ds * kappa_plant
        y = y + ds * (np.sin(psi) + 4.0 * np.sin(p2) + np.sin(p4)) / 6.0
        psi = psi + ds * kappa_plant

    out = np.empty((y.shape[0], 6))
    out[:, 0] = max_d
    out[:, 1] = max_dl
    out[:, 2] = max_dd
    out[:, 3] = max_ddd
    out[:, 4] = np.abs(y)
    out[:, 5] = np.abs(sigma)
    return out
