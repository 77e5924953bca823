"""Numeric kernels shared by the physics modules.

Every function here takes and returns plain float64 arrays / scalars so the
same source compiles under ``numba.njit`` or runs as ordinary numpy code.
The metrics reductions additionally have vectorized numpy twins which are
bound when numba is disabled.
"""

from __future__ import annotations

import math

import numpy as np

from ._accel import NUMBA_ENABLED, jit

# Roots closer than this to the start of a flight are treated as "already on the plane".
ROOT_EPS = 1e-9
# A bounce whose hop lasts less than this is converted to resting contact.
HOP_EPS = 1e-9
# Position slack for on-plane tests.
PLANE_TOL = 1e-9
# With restitution below 1, a bounce whose apex stays under this height ends the
# bounce series: the ball is treated as resting on the face.
REST_HEIGHT = 1e-5


@jit
def _quadratic_roots(a, b, c):
    """Real roots of ``a t^2 + b t + c`` in ascending order as ``(count, r0, r1)``."""
    if a == 0.0:
        if b == 0.0:
            return 0, np.nan, np.nan
        return 1, -c / b, np.nan
    disc = b * b - 4.0 * a * c
    if disc < 0.0:
        return 0, np.nan, np.nan
    sq = math.sqrt(disc)
    q = -0.5 * (b + math.copysign(sq, b))
    if q == 0.0:
        return 2, 0.0, 0.0
    r0 = q / a
    r1 = c / q
    if r1 < r0:
        r0, r1 = r1, r0
    return 2, r0, r1


@jit
def _polish(a, b, c, t):
    # Two Newton steps; skipped near a double root where the slope vanishes.
    for _ in range(2):
        slope = 2.0 * a * t + b
        if slope == 0.0:
            break
        step = (a * t * t + b * t + c) / slope
        if not abs(step) < 1e-6 * (1.0 + abs(t)):
            break
        t -= step
    return t


@jit
def first_positive_root(p, v, g, plane):
    """Smallest ``t > ROOT_EPS`` with ``p + v t + g t^2 / 2 == plane``; NaN if none."""
    a = 0.5 * g
    c = p - plane
    n, r0, r1 = _quadratic_roots(a, v, c)
    if n >= 1 and r0 > ROOT_EPS:
        return _polish(a, v, c, r0)
    if n == 2 and r1 > ROOT_EPS:
        return _polish(a, v, c, r1)
    return np.nan


@jit
def _exit_time(p, v, g, plane, sign):
    # Inside the box means sign * (p - plane) >= 0.  Returns the first time the
    # path leaves through this plane, 0.0 if already outside and moving out.
    c = sign * (p - plane)
    b = sign * v
    a = 0.5 * sign * g
    if c <= PLANE_TOL and (b < 0.0 or (b == 0.0 and a < 0.0)):
        return 0.0
    n, r0, r1 = _quadratic_roots(a, b, c)
    if n >= 1 and r0 > ROOT_EPS and 2.0 * a * r0 + b < 0.0:
        return _polish(a, b, c, r0)
    if n == 2 and r1 > ROOT_EPS and 2.0 * a * r1 + b < 0.0:
        return _polish(a, b, c, r1)
    return np.inf


@jit
def _flight(p, v, g, tau, jac):
    for k in range(3):
        p[k] += v[k] * tau + 0.5 * g[k] * tau * tau
        v[k] += g[k] * tau
        # jac[k] <- [[1, tau], [0, 1]] @ jac[k]
        jac[k, 0, 0] += tau * jac[k, 1, 0]
        jac[k, 0, 1] += tau * jac[k, 1, 1]


@jit
def _settle(p, v, g, lo, hi, jac):
    # Resting contact: on (or behind) a face, negligible normal speed, and
    # gravity pressing outward.  The normal force cancels gravity on that axis.
    for k in range(3):
        if g[k] == 0.0 and v[k] == 0.0:
            continue
        for side in range(2):
            plane = lo[k] if side == 0 else hi[k]
            sign = 1.0 if side == 0 else -1.0
            c = sign * (p[k] - plane)
            b = sign * v[k]
            a = 0.5 * sign * g[k]
            if a < 0.0 and c <= PLANE_TOL and abs(b) <= -2.0 * a * HOP_EPS:  # hop <= 2 * HOP_EPS
                v[k] = 0.0
                g[k] = 0.0
                # pinned to the face: no longer depends on the initial state
                jac[k, :, :] = 0.0
                break


@jit
def propagate(p0, v0, dt, gravity, lo, hi, restitution, max_events):
    """Ballistic flight over ``dt`` inside the box ``[lo, hi]`` with restitution bounces.

    Returns ``(p, v, jac, n_events, ev_axis, ev_side, ev_time, ev_point)``.
    ``jac[k]`` is the 2x2 derivative of ``(p_k, v_k)`` at ``dt`` with respect to
    ``(p_k, v_k)`` at 0, including the saltation term at each impact.
    ``ev_side`` is 0 for the ``lo`` face and 1 for the ``hi`` face.
    ``n_events`` is -1 when more than ``max_events`` impacts were needed.
    """
    p = p0.copy()
    v = v0.copy()
    g = gravity.copy()
    jac = np.zeros((3, 2, 2))
    for k in range(3):
        jac[k, 0, 0] = 1.0
        jac[k, 1, 1] = 1.0
    ev_axis = np.full(max_events, -1, dtype=np.int64)
    ev_side = np.zeros(max_events, dtype=np.int64)
    ev_time = np.zeros(max_events)
    ev_point = np.zeros((max_events, 3))
    n = 0
    t = 0.0
    while True:
        _settle(p, v, g, lo, hi, jac)
        remaining = dt - t
        best = np.inf
        best_axis = -1
        best_side = 0
        for k in range(3):
            for side in range(2):
                plane = lo[k] if side == 0 else hi[k]
                sign = 1.0 if side == 0 else -1.0
                tc = _exit_time(p[k], v[k], g[k], plane, sign)
                if tc < best:
                    best = tc
                    best_axis = k
                    best_side = side
        if best_axis < 0 or best > remaining:
            _flight(p, v, g, remaining, jac)
            break
        if n >= max_events:
            return p, v, jac, -1, ev_axis, ev_side, ev_time, ev_point
        _flight(p, v, g, best, jac)
        t += best
        k = best_axis
        vc = v[k]
        e = restitution
        j00 = jac[k, 0, 0]
        j01 = jac[k, 0, 1]
        j10 = jac[k, 1, 0]
        j11 = jac[k, 1, 1]
        if best > 0.0 and vc != 0.0:
            # saltation matrix [[-e, 0], [(1 + e) g / vc, -e]]
            s10 = (1.0 + e) * g[k] / vc
            jac[k, 0, 0] = -e * j00
            jac[k, 0, 1] = -e * j01
            jac[k, 1, 0] = s10 * j00 - e * j10
            jac[k, 1, 1] = s10 * j01 - e * j11
            p[k] = lo[k] if best_side == 0 else hi[k]
        else:
            jac[k, 1, 0] = -e * j10
            jac[k, 1, 1] = -e * j11
        v[k] = -e * vc
        sign = 1.0 if best_side == 0 else -1.0
        pull = -sign * g[k]
        rise = sign * v[k]
        if e < 1.0 and pull > 0.0 and (
            rise * rise <= 2.0 * pull * REST_HEIGHT or t + 2.0 * rise / (pull * (1.0 - e)) <= dt
        ):
            # The remaining hops form a geometric series (infinitely many bounces
            # in finite time).  Once it is negligible or ends inside this step,
            # the ball is taken to be resting on the face.
            p[k] = lo[k] if best_side == 0 else hi[k]
            v[k] = 0.0
            g[k] = 0.0
            jac[k, :, :] = 0.0
        ev_axis[n] = k
        ev_side[n] = best_side
        ev_time[n] = t
        for m in range(3):
            ev_point[n, m] = p[m]
        n += 1
    return p, v, jac, n, ev_axis, ev_side, ev_time, ev_point


@jit
def ballistic_predict_cov(cov, jac, dt, accel_noise):
    """Per-axis ``J P J^T + Q`` with white-noise acceleration density ``accel_noise``."""
    out = np.empty((3, 2, 2))
    q00 = accel_noise * dt * dt * dt / 3.0
    q01 = accel_noise * dt * dt / 2.0
    q11 = accel_noise * dt
    for k in range(3):
        j = jac[k]
        c = cov[k]
        a00 = j[0, 0] * c[0, 0] + j[0, 1] * c[1, 0]
        a01 = j[0, 0] * c[0, 1] + j[0, 1] * c[1, 1]
        a10 = j[1, 0] * c[0, 0] + j[1, 1] * c[1, 0]
        a11 = j[1, 0] * c[0, 1] + j[1, 1] * c[1, 1]
        out[k, 0, 0] = a00 * j[0, 0] + a01 * j[0, 1] + q00
        out[k, 0, 1] = a00 * j[1, 0] + a01 * j[1, 1] + q01
        out[k, 1, 0] = out[k, 0, 1]
        out[k, 1, 1] = a10 * j[1, 0] + a11 * j[1, 1] + q11
    return out


@jit
def ballistic_update(pos, vel, cov, z, r):
    """Position-only Kalman update of independent per-axis (p, v) states, Joseph form.

    Returns ``(pos, vel, cov, gain)`` where ``gain[k]`` in [0, 1] is the weight of
    the measurement in the updated position on axis ``k``.
    """
    pos2 = pos.copy()
    vel2 = vel.copy()
    cov2 = np.empty((3, 2, 2))
    gain = np.empty(3)
    for k in range(3):
        c = cov[k]
        s = c[0, 0] + r
        k0 = c[0, 0] / s
        k1 = c[1, 0] / s
        innov = z[k] - pos[k]
        pos2[k] = pos[k] + k0 * innov
        vel2[k] = vel[k] + k1 * innov
        # (I - K H) P (I - K H)^T + K r K^T with I - K H = [[1 - k0, 0], [-k1, 1]]
        m00 = (1.0 - k0) * c[0, 0]
        m01 = (1.0 - k0) * c[0, 1]
        m10 = -k1 * c[0, 0] + c[1, 0]
        m11 = -k1 * c[0, 1] + c[1, 1]
        cov2[k, 0, 0] = m00 * (1.0 - k0) + r * k0 * k0
        cov2[k, 0, 1] = -m00 * k1 + m01 + r * k0 * k1
        cov2[k, 1, 0] = cov2[k, 0, 1]
        cov2[k, 1, 1] = -m10 * k1 + m11 + r * k1 * k1
        gain[k] = k0
    return pos2, vel2, cov2, gain


@jit
def ca_transition(dt, q):
    """Constant-acceleration transition and white-noise-jerk process noise (9-state)."""
    f = np.eye(9)
    qm = np.zeros((9, 9))
    d2 = dt * dt
    d3 = d2 * dt
    d4 = d3 * dt
    d5 = d4 * dt
    for k in range(3):
        f[k, 3 + k] = dt
        f[k, 6 + k] = 0.5 * d2
        f[3 + k, 6 + k] = dt
        qm[k, k] = q * d5 / 20.0
        qm[k, 3 + k] = q * d4 / 8.0
        qm[k, 6 + k] = q * d3 / 6.0
        qm[3 + k, 3 + k] = q * d3 / 3.0
        qm[3 + k, 6 + k] = q * d2 / 2.0
        qm[6 + k, 6 + k] = q * dt
        qm[3 + k, k] = qm[k, 3 + k]
        qm[6 + k, k] = qm[k, 6 + k]
        qm[6 + k, 3 + k] = qm[3 + k, 6 + k]
    return f, qm


@jit
def kf_predict(mean, cov, dt, q):
    f, qm = ca_transition(dt, q)
    mean2 = f @ mean
    cov2 = f @ cov @ f.T + qm
    return mean2, 0.5 * (cov2 + cov2.T)


@jit
def kf_innovation(mean, cov, z, r):
    """Innovation vector, its covariance, and squared Mahalanobis length."""
    y = z - mean[:3]
    s = cov[:3, :3] + r * np.eye(3)
    d2 = y @ np.linalg.solve(s, y)
    return y, s, d2


@jit
def kf_update(mean, cov, z, r):
    y, s, _ = kf_innovation(mean, cov, z, r)
    # K = P H^T S^-1, computed as solve(S, H P)^T since S is symmetric
    gain = np.linalg.solve(s, np.ascontiguousarray(cov[:3, :])).T
    mean2 = mean + gain @ y
    ikh = np.eye(9)
    ikh[:, :3] -= gain
    cov2 = ikh @ cov @ ikh.T + r * (gain @ gain.T)
    return mean2, 0.5 * (cov2 + cov2.T)


def _norms_loop(a, b):
    n = a.shape[0]
    out = np.empty(n)
    for i in range(n):
        acc = 0.0
        for k in range(a.shape[1]):
            d = a[i, k] - b[i, k]
            acc += d * d
        out[i] = math.sqrt(acc)
    return out


def _norms_numpy(a, b):
    return np.sqrt(np.sum((a - b) ** 2, axis=1))


def _mahalanobis_loop(points, mean, chol):
    # Forward substitution L w = (p - mean) per point; distance is |w|.
    n = points.shape[0]
    dim = points.shape[1]
    out = np.empty(n)
    w = np.empty(dim)
    for i in range(n):
        acc = 0.0
        for r in range(dim):
            s = points[i, r] - mean[r]
            for c in range(r):
                s -= chol[r, c] * w[c]
            w[r] = s / chol[r, r]
            acc += w[r] * w[r]
        out[i] = math.sqrt(acc)
    return out


def _mahalanobis_numpy(points, mean, chol):
    w = np.linalg.solve(chol, (points - mean).T)
    return np.sqrt(np.sum(w * w, axis=0))


if NUMBA_ENABLED:
    displacement_norms = jit(_norms_loop)
    mahalanobis_norms = jit(_mahalanobis_loop)
else:
    displacement_norms = _norms_numpy
    mahalanobis_norms = _mahalanobis_numpy
