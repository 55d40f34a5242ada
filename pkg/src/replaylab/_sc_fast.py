"""Jitted SGLD harvest chain for GridWorld with a two-hidden-layer Q network.

This is a performance twin of search_control._harvest_core specialised to
the GridWorld dynamics and 3-affine-layer networks; all randomness (restart
states, pre-shaped noise rows) is drawn by the caller, so the jitted and
reference paths follow the same chain decisions.  Agreement is covered by a
differential test.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn
        return wrap if not (args and callable(args[0])) else args[0]

OBJECTIVE_TD = 0
OBJECTIVE_VALUE = 1
ACT_TANH = 0
ACT_RELU = 1


@njit(cache=True)
def _q_forward(w0, b0, w1, b1, w2, b2, act_id, s):
    z0 = w0 @ s + b0
    h0 = np.tanh(z0) if act_id == 0 else np.maximum(z0, 0.0)
    z1 = w1 @ h0 + b1
    h1 = np.tanh(z1) if act_id == 0 else np.maximum(z1, 0.0)
    return w2 @ h1 + b2, z0, h0, z1, h1


@njit(cache=True)
def _gridworld_model(x, y, action, step_size, band_lo, band_hi,
                     hole_lo, hole_hi, goal_lo):
    dx = step_size * (1.0 if action == 2 else -1.0 if action == 3 else 0.0)
    dy = step_size * (1.0 if action == 0 else -1.0 if action == 1 else 0.0)
    nx = min(max(x + dx, 0.0), 1.0)
    ny = min(max(y + dy, 0.0), 1.0)
    in_hole = hole_lo <= x <= hole_hi
    if dy != 0.0 and not in_hole:
        if y <= band_lo < ny:
            ny = band_lo
        elif y >= band_hi > ny:
            ny = band_hi
    if dx != 0.0 and band_lo < y < band_hi and in_hole:
        nx = min(max(nx, hole_lo), hole_hi)
    reward = 1.0 if (nx >= goal_lo and ny >= goal_lo) else 0.0
    return nx, ny, reward


@njit(cache=True)
def q_selected_batch(w0, b0, w1, b1, w2, b2, act_id, states, actions, out):
    """out[i] = Q(states[i])[actions[i]] for a 2-hidden-layer net, fused
    (no intermediate batch arrays; used by the full-priority refresh)."""
    n = states.shape[0]
    h0_n = w0.shape[0]
    h1_n = w1.shape[0]
    d = w0.shape[1]
    h0 = np.empty(h0_n)
    h1 = np.empty(h1_n)
    for i in range(n):
        for j in range(h0_n):
            acc = b0[j]
            for k in range(d):
                acc += w0[j, k] * states[i, k]
            h0[j] = np.tanh(acc) if act_id == 0 else max(acc, 0.0)
        for j in range(h1_n):
            acc = b1[j]
            for k in range(h0_n):
                acc += w1[j, k] * h0[k]
            h1[j] = np.tanh(acc) if act_id == 0 else max(acc, 0.0)
        a = actions[i]
        acc = b2[a]
        for k in range(h1_n):
            acc += w2[a, k] * h1[k]
        out[i] = acc
    return out


@njit(cache=True)
def q_max_batch(w0, b0, w1, b1, w2, b2, act_id, states, out):
    """out[i] = max_a Q(states[i])[a], fused like q_selected_batch."""
    n = states.shape[0]
    h0_n = w0.shape[0]
    h1_n = w1.shape[0]
    n_act = w2.shape[0]
    d = w0.shape[1]
    h0 = np.empty(h0_n)
    h1 = np.empty(h1_n)
    for i in range(n):
        for j in range(h0_n):
            acc = b0[j]
            for k in range(d):
                acc += w0[j, k] * states[i, k]
            h0[j] = np.tanh(acc) if act_id == 0 else max(acc, 0.0)
        for j in range(h1_n):
            acc = b1[j]
            for k in range(h0_n):
                acc += w1[j, k] * h0[k]
            h1[j] = np.tanh(acc) if act_id == 0 else max(acc, 0.0)
        best = -np.inf
        for a in range(n_act):
            acc = b2[a]
            for k in range(h1_n):
                acc += w2[a, k] * h1[k]
            if acc > best:
                best = acc
        out[i] = best
    return out


@njit(cache=True)
def harvest_chain_gridworld(w0, b0, w1, b1, w2, b2, act_id, objective_id,
                            gamma, alpha_h, log_smooth,
                            step_size, band_lo, band_hi, hole_lo, hole_hi,
                            goal_lo, starts, noise, eps_accept, m, out):
    """Run the harvest chain; accepted states go into out (m, 2).

    Returns the number of accepted states.
    """
    k_b = noise.shape[0]
    d = starts.shape[1]
    sqrt_d = np.sqrt(d)
    s = starts[0].copy()
    anchor = s.copy()
    restarts = 0
    count = 0
    for i in range(k_b):
        if count >= m:
            break
        q, z0, h0, z1, h1 = _q_forward(w0, b0, w1, b1, w2, b2, act_id, s)
        a_star = 0
        best = q[0]
        for a in range(1, q.shape[0]):
            if q[a] > best:
                best = q[a]
                a_star = a
        # weight on the input gradient of q[a_star]
        if objective_id == OBJECTIVE_TD:
            nx, ny, reward = _gridworld_model(s[0], s[1], a_star, step_size,
                                              band_lo, band_hi, hole_lo,
                                              hole_hi, goal_lo)
            s2 = np.empty(2)
            s2[0] = nx
            s2[1] = ny
            q2 = _q_forward(w0, b0, w1, b1, w2, b2, act_id, s2)[0]
            y_hat = reward + gamma * np.max(q2)
            u = y_hat - best
            sign = 1.0 if u > 0.0 else (-1.0 if u < 0.0 else 0.0)
            weight = -sign / (abs(u) + log_smooth)
        else:
            weight = 1.0
        # backward: d q[a_star] / d s
        g1 = w2[a_star].copy()
        if act_id == 0:
            for j in range(g1.shape[0]):
                t = np.tanh(z1[j])
                g1[j] *= 1.0 - t * t
        else:
            for j in range(g1.shape[0]):
                if z1[j] <= 0.0:
                    g1[j] = 0.0
        g0 = w1.T @ g1
        if act_id == 0:
            for j in range(g0.shape[0]):
                t = np.tanh(z0[j])
                g0[j] *= 1.0 - t * t
        else:
            for j in range(g0.shape[0]):
                if z0[j] <= 0.0:
                    g0[j] = 0.0
        grad = weight * (w0.T @ g0)
        oob = False
        for j in range(d):
            val = s[j] + alpha_h * grad[j] + noise[i, j]
            if val < 0.0 or val > 1.0:
                oob = True
            s[j] = val
        if oob:
            restarts += 1
            s = starts[restarts].copy()
            anchor = s.copy()
            continue
        dist = 0.0
        for j in range(d):
            dist += (anchor[j] - s[j]) ** 2
        if np.sqrt(dist) / sqrt_d >= eps_accept:
            out[count] = s
            count += 1
            anchor = s.copy()
    return count
