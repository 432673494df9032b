"""Independent reference solvers and helpers used only by the tests.

These deliberately take different routes than the package code: dense
matrices instead of factored operators, Dykstra/exact projections instead
of dual ascent, and brute-force enumeration instead of rounding.
"""
import itertools

import numpy as np

from irsvlc.channel import assemble_h
from irsvlc.objective import mse_matrices


def vec_cm(mat):
    return np.asarray(mat).flatten(order="F")


def dense_dual_pieces(chans, w, q, stats):
    """Dense A (block-diagonal gain matrix), S, Z, and the linear MSE parts."""
    n, p = chans.n_units, chans.n_pairs
    a = np.zeros((n * p, p))
    for j in range(p):
        a[j * n : (j + 1) * n, j] = chans.h_nlos[:, j]
    u = np.kron(stats.sigma_x2 * (w @ w.T), q.T @ q)
    s = u + u.T
    z = a @ s @ a.T
    lin = vec_cm(q.T @ (stats.sigma_x2 * w.T))
    const = stats.sigma_w2 * (q * q).sum() + stats.n_s * stats.sigma_x2
    return a, u, s, z, lin, const


def mse_of_vec_v(vec_v, chans, w, q, stats):
    v = vec_v.reshape(chans.n_pairs, chans.n_units).T
    return mse_matrices(assemble_h(chans, v), w, q, stats)


def project_capped_simplex(x, cap=1.0, total=1.0):
    """Euclidean projection onto {v: 0 <= v <= cap, sum(v) <= total}."""
    y = np.clip(x, 0.0, cap)
    if y.sum() <= total:
        return y
    lo, hi = 0.0, float(np.max(x))
    for _ in range(200):
        tau = 0.5 * (lo + hi)
        s = np.clip(x - tau, 0.0, cap).sum()
        if s > total:
            lo = tau
        else:
            hi = tau
    return np.clip(x - 0.5 * (lo + hi), 0.0, cap)


def project_rows_capped_simplex(vmat):
    return np.vstack([project_capped_simplex(row) for row in vmat]) if vmat.size else vmat


def primal_relaxed_reference(chans, w, q, stats, iters=20000, tol=1e-12, v0=None):
    """Projected-gradient solve of the relaxed allocation problem.

    Gradient assembled from dense matrices; projection is the exact
    per-row capped-simplex projection, so this is a genuine primal route.
    """
    n, p = chans.n_units, chans.n_pairs
    a, u, s, z, lin, const = dense_dual_pieces(chans, w, q, stats)
    h1v = vec_cm(chans.h1)

    def grad(vv):
        hv = h1v + a.T @ vv
        return a @ (s @ hv - 2.0 * lin)

    def value(vv):
        hv = h1v + a.T @ vv
        return float(hv @ u @ hv - 2.0 * lin @ hv + const)

    vv = np.zeros(n * p) if v0 is None else vec_cm(np.asarray(v0)).copy()
    lip = np.linalg.eigvalsh(z)[-1] if z.size else 1.0
    step = 1.0 / max(lip, 1e-300)
    val = value(vv)
    for _ in range(iters):
        g = grad(vv)
        alpha = step * 4
        moved = 0.0
        improved = False
        while alpha > 1e-30:
            cand_rows = (vv - alpha * g).reshape(p, n).T
            cand = vec_cm(project_rows_capped_simplex(cand_rows))
            cval = value(cand)
            if cval <= val - 1e-18:
                moved = np.abs(cand - vv).max()
                vv, val = cand, cval
                improved = True
                break
            alpha *= 0.5
        if not improved or moved < tol:
            break
    return vv.reshape(p, n).T, val


def project_l1_ball(x, radius):
    if radius <= 0:
        return np.zeros_like(x)
    if np.abs(x).sum() <= radius:
        return x
    u = np.sort(np.abs(x))[::-1]
    css = np.cumsum(u)
    ks = np.arange(1, x.size + 1)
    cond = u - (css - radius) / ks > 0
    k = ks[cond][-1]
    tau = (css[cond][-1] - radius) / k
    return np.sign(x) * np.maximum(np.abs(x) - tau, 0.0)


def project_precoder_feasible(wmat, p_sig, row_caps, sigma_x2, iters=400):
    """Dykstra projection onto the Frobenius ball intersected with row l1 balls."""
    x = wmat.copy()
    p_inc = np.zeros_like(x)
    q_inc = np.zeros_like(x)
    for _ in range(iters):
        y = x + p_inc
        pw = sigma_x2 * (y * y).sum()
        y1 = y * min(1.0, np.sqrt(p_sig / pw)) if pw > 0 else y
        p_inc = y - y1
        z = y1 + q_inc
        z1 = np.vstack([project_l1_ball(z[t], row_caps[t]) for t in range(z.shape[0])])
        q_inc = z - z1
        if np.abs(z1 - x).max() < 1e-15:
            x = z1
            break
        x = z1
    return x


def primal_precoder_reference(h, q, stats, budget, iters=20000):
    """Projected-gradient precoder solve with Dykstra feasible-set projection."""
    b = q @ h
    btb = b.T @ b
    sx2 = stats.sigma_x2
    kappa = stats.sigma_x * stats.pam_amp * (stats.m_pam - 1)
    p_sig = max(budget.signal_power, 0.0)
    row_caps = budget.headroom / kappa

    def value(wm):
        return mse_matrices(h, wm, q, stats)

    w = np.zeros((h.shape[1], stats.n_s))
    lip = 2 * sx2 * max(np.linalg.eigvalsh(btb)[-1], 1e-300)
    step = 1.0 / lip
    val = value(w)
    for _ in range(iters):
        g = 2 * sx2 * (btb @ w - b.T)
        alpha = step * 4
        improved = False
        while alpha > 1e-30:
            cand = project_precoder_feasible(w - alpha * g, p_sig, row_caps, sx2)
            cval = value(cand)
            if cval <= val - 1e-18:
                w, val = cand, cval
                improved = True
                break
            alpha *= 0.5
        if not improved:
            break
    return w, val


def enumerate_binary_rows(n_pairs):
    """All one-hot-or-zero rows of width n_pairs (zero row first)."""
    rows = [np.zeros(n_pairs)]
    for j in range(n_pairs):
        r = np.zeros(n_pairs)
        r[j] = 1.0
        rows.append(r)
    return rows


def exhaustive_binary_v_best(chans, w, q, stats):
    """Minimum MSE over all binary allocations with one-hot-or-zero rows."""
    rows = enumerate_binary_rows(chans.n_pairs)
    best = np.inf
    for combo in itertools.product(range(len(rows)), repeat=chans.n_units):
        v = np.vstack([rows[i] for i in combo]) if chans.n_units else np.zeros((0, chans.n_pairs))
        m = mse_matrices(assemble_h(chans, v), w, q, stats)
        if m < best:
            best = m
    return best


def exhaustive_fg_best(chans, w, q, stats):
    """Minimum MSE over all (f, g) assignment pairs, enumerated directly."""
    n, n_r, n_t = chans.n_units, chans.n_pds, chans.n_leds
    f_rows = [np.zeros(n_r)] + [r for r in np.eye(n_r)]
    g_rows = [np.zeros(n_t)] + [r for r in np.eye(n_t)]
    best = np.inf
    for f_combo in itertools.product(range(len(f_rows)), repeat=n):
        f = np.vstack([f_rows[i] for i in f_combo]) if n else np.zeros((0, n_r))
        for g_combo in itertools.product(range(len(g_rows)), repeat=n):
            g = np.vstack([g_rows[i] for i in g_combo]) if n else np.zeros((0, n_t))
            v = (g[:, :, None] * f[:, None, :]).reshape(n, n_t * n_r)
            m = mse_matrices(assemble_h(chans, v), w, q, stats)
            if m < best:
                best = m
    return best


def random_channelset(rng, n_units, n_leds, n_pds, scale=1.0):
    from irsvlc.channel import ChannelSet

    h1 = scale * rng.uniform(0.2, 1.0, size=(n_pds, n_leds))
    bank = scale * rng.uniform(0.2, 1.0, size=(n_units, n_pds * n_leds))
    return ChannelSet(h1=h1, h_nlos=bank)
