"""Hot numerical kernels for the fixed-step closed-loop integrator.

Everything here is plain numpy over float64 arrays and scalars, compiled
with numba when the accelerated backend is active (see ``accel``). Keep
Python objects out of these signatures; the simulator packs scenarios into
flat arrays before calling in.

Packed state layout, ``n`` agents in dimension ``p``::

    y = [ x (n*p) | v (n*p) | theta_hat (n*2) | p (n*p) | q (n*p) ]

Velocity slots of single integrators and the filter block of direct-
algorithm runs stay at their initial values (their derivatives are zero).
Only the built-in mass-damper Euler-Lagrange model is representable here;
its two parameters per agent arrive in ``el_m`` / ``el_c``.
"""

import math

import numpy as np

from . import signum
from .accel import jit

DIRECT = 0
ESTIMATOR = 1

EULER = 0
RK4 = 1

KIND_SINGLE = 0
KIND_DOUBLE = 1
KIND_EL = 2

TERM_POLY = 0
TERM_SIN = 1

DIVERGENCE_LIMIT = 1e9

sgn = jit(signum.sgn_policy)


@jit
def eval_reference_table(table, t, r, vr, ar):
    # One row per term: [agent0, dim0, kind, c0, c1, c2, c3].
    r[:] = 0.0
    vr[:] = 0.0
    ar[:] = 0.0
    for k in range(table.shape[0]):
        i = int(table[k, 0])
        d = int(table[k, 1])
        kind = int(table[k, 2])
        c0 = table[k, 3]
        c1 = table[k, 4]
        c2 = table[k, 5]
        c3 = table[k, 6]
        if kind == TERM_SIN:
            arg = c1 * t + c2
            s = math.sin(arg)
            co = math.cos(arg)
            r[i, d] += c0 * s
            vr[i, d] += c0 * c1 * co
            ar[i, d] += -c0 * c1 * c1 * s
        else:
            r[i, d] += c0 + c1 * t + c2 * t * t + c3 * t * t * t
            vr[i, d] += c1 + 2.0 * c2 * t + 3.0 * c3 * t * t
            ar[i, d] += 2.0 * c2 + 6.0 * c3 * t


@jit
def closed_loop_rhs(
    t, y, dy, u, algo, eps, lap, kinds, el_m, el_c, table,
    beta, alpha, eta, gamma, kappa, mu, r, vr, ar,
):
    """Derivative of the packed state; fills ``dy`` and the controls ``u``.

    ``r``, ``vr``, ``ar`` are (n, p) scratch buffers for the reference
    triple at ``t``.
    """
    n = lap.shape[0]
    p = r.shape[1]
    npx = n * p
    x_blk = y[0:npx].reshape(n, p)
    v_blk = y[npx : 2 * npx].reshape(n, p)
    th_blk = y[2 * npx : 2 * npx + 2 * n].reshape(n, 2)
    dy[:] = 0.0
    dx = dy[0:npx].reshape(n, p)
    dv = dy[npx : 2 * npx].reshape(n, p)
    dth = dy[2 * npx : 2 * npx + 2 * n].reshape(n, 2)

    eval_reference_table(table, t, r, vr, ar)

    if algo == DIRECT:
        dis = np.dot(lap, x_blk)
        sg = sgn(dis, eps)
        for i in range(n):
            if kinds[i] == KIND_SINGLE:
                u_i = -beta[i] * sg[i] - (x_blk[i] - r[i]) + vr[i]
                dx[i] = u_i
            elif kinds[i] == KIND_DOUBLE:
                u_i = (
                    -beta[i] * sg[i]
                    - dis[i]
                    - (x_blk[i] - r[i])
                    - 2.0 * (v_blk[i] - vr[i])
                    + ar[i]
                )
                dx[i] = v_blk[i]
                dv[i] = u_i
            else:
                nu = -beta[i] * sg[i] - (x_blk[i] - r[i]) + vr[i]
                s = v_blk[i] - nu
                ups = -(v_blk[i] - vr[i]) + ar[i]
                # mass-damper regressor [ups | nu]
                u_i = th_blk[i, 0] * ups + th_blk[i, 1] * nu - alpha * s - dis[i]
                dth[i, 0] = -np.dot(ups, s)
                dth[i, 1] = -np.dot(nu, s)
                dx[i] = v_blk[i]
                dv[i] = (u_i - el_c[i] * v_blk[i]) / el_m[i]
            u[i] = u_i
    else:
        p_blk = y[2 * npx + 2 * n : 3 * npx + 2 * n].reshape(n, p)
        q_blk = y[3 * npx + 2 * n : 4 * npx + 2 * n].reshape(n, p)
        dp = dy[2 * npx + 2 * n : 3 * npx + 2 * n].reshape(n, p)
        dq = dy[3 * npx + 2 * n : 4 * npx + 2 * n].reshape(n, p)

        w = np.dot(lap, p_blk + q_blk)
        sw = sgn(w, eps)
        for i in range(n):
            b_i = (
                eta[i] * np.sum(np.abs(r[i]))
                + eta[i] * np.sum(np.abs(vr[i]))
                + np.sum(np.abs(ar[i]))
                + gamma
            )
            dp[i] = q_blk[i]
            dq[i] = (
                -b_i * sw[i]
                - kappa * (p_blk[i] - r[i])
                - kappa * (q_blk[i] - vr[i])
                + ar[i]
            )
        for i in range(n):
            if kinds[i] == KIND_SINGLE:
                u_i = -eta[i] * sgn(x_blk[i] - p_blk[i], eps) + q_blk[i]
                dx[i] = u_i
            elif kinds[i] == KIND_DOUBLE:
                ex = x_blk[i] - p_blk[i]
                ev = v_blk[i] - q_blk[i]
                u_i = -eta[i] * sgn(ex + ev, eps) - eta[i] * ex - eta[i] * ev + dq[i]
                dx[i] = v_blk[i]
                dv[i] = u_i
            else:
                s = mu * (x_blk[i] - p_blk[i]) + (v_blk[i] - q_blk[i])
                chi = mu * (q_blk[i] - v_blk[i]) + dq[i]
                psi = mu * (p_blk[i] - x_blk[i]) + q_blk[i]
                u_i = th_blk[i, 0] * chi + th_blk[i, 1] * psi - alpha * s
                dth[i, 0] = -np.dot(chi, s)
                dth[i, 1] = -np.dot(psi, s)
                dx[i] = v_blk[i]
                dv[i] = (u_i - el_c[i] * v_blk[i]) / el_m[i]
            u[i] = u_i


@jit
def run_closed_loop(
    y0, t0, h, n_steps, stride, scheme, algo, eps, lap, kinds, el_m, el_c,
    table, beta, alpha, eta, gamma, kappa, mu, t_out, y_out, u_out,
):
    """Fixed-step integration writing sampled rows into the out arrays.

    Samples land at every ``stride``-th step and always at the final step.
    Controls are recorded as evaluated at the sampled state itself (the
    first Runge-Kutta stage). Returns ``(status, step, rows)`` where status
    0 means completed and 1 means the divergence guard tripped at ``step``.
    """
    n = lap.shape[0]
    p = u_out.shape[2]
    ny = y0.shape[0]
    y = y0.copy()
    k1 = np.empty(ny)
    k2 = np.empty(ny)
    k3 = np.empty(ny)
    k4 = np.empty(ny)
    yt = np.empty(ny)
    u1 = np.empty((n, p))
    us = np.empty((n, p))
    r = np.empty((n, p))
    vr = np.empty((n, p))
    ar = np.empty((n, p))

    row = 0
    for k in range(n_steps + 1):
        t = t0 + k * h
        closed_loop_rhs(
            t, y, k1, u1, algo, eps, lap, kinds, el_m, el_c, table,
            beta, alpha, eta, gamma, kappa, mu, r, vr, ar,
        )
        if k % stride == 0 or k == n_steps:
            t_out[row] = t
            y_out[row, :] = y
            u_out[row] = u1
            row += 1
        if k == n_steps:
            break
        if scheme == EULER:
            y[:] = y + h * k1
        else:
            yt[:] = y + (0.5 * h) * k1
            closed_loop_rhs(
                t + 0.5 * h, yt, k2, us, algo, eps, lap, kinds, el_m, el_c,
                table, beta, alpha, eta, gamma, kappa, mu, r, vr, ar,
            )
            yt[:] = y + (0.5 * h) * k2
            closed_loop_rhs(
                t + 0.5 * h, yt, k3, us, algo, eps, lap, kinds, el_m, el_c,
                table, beta, alpha, eta, gamma, kappa, mu, r, vr, ar,
            )
            yt[:] = y + h * k3
            closed_loop_rhs(
                t + h, yt, k4, us, algo, eps, lap, kinds, el_m, el_c,
                table, beta, alpha, eta, gamma, kappa, mu, r, vr, ar,
            )
            y[:] = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        m = np.max(np.abs(y))
        if not math.isfinite(m) or m > DIVERGENCE_LIMIT:
            return 1, k + 1, row
    return 0, n_steps, row
