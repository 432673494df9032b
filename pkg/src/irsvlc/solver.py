"""Alternating minimization of the demodulation MSE.

Three blocks are cycled: the relaxed unit-to-pair allocation V (solved in
the Lagrangian dual by projected gradient ascent), the precoder W (dual
ascent over one total-power multiplier and one row-headroom multiplier per
LED, with a proximal inner step for the row-l1 terms), and the detector Q
(closed form).  After convergence the relaxed allocation is rounded to a
binary assignment and the transceiver blocks are re-solved once.

The allocation subproblem's Hessian in vec(V) is A S A^T, where A is the
tall block-diagonal matrix of reflected-gain columns and S the (small)
symmetrized Kronecker kernel.  A has orthogonal columns, so the
minimum-norm pseudo-inverse of the Hessian factors through a P x P core
and is never materialized at full size.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .association import Assignment, RelaxedV, distance_greedy, recover_assignment, to_v
from .channel import ChannelSet, assemble_h
from .objective import Design, PowerBudget, SignalStats, mse_matrices, power_residuals

__all__ = [
    "SolverOptions",
    "DualState",
    "DualPrecomp",
    "P1bResult",
    "P2Result",
    "SolverReport",
    "mmse_detector",
    "lagrangian_minimizer",
    "mse_grad_wrt_v",
    "dual_gradients",
    "solve_relaxed_assignment",
    "solve_precoder",
    "alternating_optimize",
    "zero_forcing_design",
    "low_snr_detector",
    "repair_allocation",
    "write_trace_csv",
    "write_summary_json",
]

_STEP_FLOOR = 1e-18


@dataclass
class SolverOptions:
    """Tolerances and iteration caps shared by all solver blocks."""

    epsilon: float = 1e-6
    outer_cap: int = 500
    inner_cap: int = 5000
    prox_cap: int = 400
    armijo_shrink: float = 0.5
    armijo_accept: float = 1e-4
    sv_cutoff: float = 1e-12
    polish_rounding: bool = True


@dataclass
class DualState:
    """Nonnegative multipliers: row-sum, lower-bound, upper-bound."""

    row_sum: np.ndarray  # length n_units
    lower: np.ndarray  # length n_units * n_pairs
    upper: np.ndarray  # length n_units * n_pairs

    def copy(self):
        return DualState(self.row_sum.copy(), self.lower.copy(), self.upper.copy())


class DualPrecomp:
    """Constant quantities of one relaxed-allocation subproblem.

    Built from the current precoder/detector pair; exposes the quadratic
    kernel, the pseudo-inverse of the allocation Hessian (as an operator),
    and the multiplier-independent part of the stationarity right side.
    """

    def __init__(self, chans: ChannelSet, w, q, stats: SignalStats, sv_cutoff=1e-12):
        self.n_units = chans.n_units
        self.n_pairs = chans.n_pairs
        sx2 = stats.sigma_x2
        self.quad_kernel = np.kron(sx2 * (w @ w.T), q.T @ q)
        self.quad_sym = self.quad_kernel + self.quad_kernel.T
        self.gains = chans.h_nlos
        self.h1_vec = chans.h1.flatten(order="F")
        self.lin_vec = (q.T @ (sx2 * w.T)).flatten(order="F")
        self.mse_const = stats.sigma_w2 * (q * q).sum() + stats.n_s * sx2

        col_norm2 = (self.gains * self.gains).sum(axis=0)
        root = np.sqrt(col_norm2)
        core = root[:, None] * self.quad_sym * root[None, :]
        evals, evecs = np.linalg.eigh(core) if core.size else (np.zeros(0), np.zeros((0, 0)))
        cutoff = sv_cutoff * max(evals[-1], 0.0) if evals.size else 0.0
        keep = evals > max(cutoff, 0.0)
        self.grad_lipschitz = float(max(evals[-1], 0.0)) if evals.size else 0.0
        self.rank = int(keep.sum())
        self.null_dim = self.n_units * self.n_pairs - self.rank
        inv_root = np.divide(1.0, root, out=np.zeros_like(root), where=root > 0)
        self.basis_in = evecs[:, keep] * inv_root[:, None]  # P x rank
        self.core_inv = 1.0 / evals[keep]
        self.const_rhs = self.apply_gain(2.0 * self.lin_vec - self.quad_sym @ self.h1_vec)

    # --- operator pieces -------------------------------------------------
    def gain_dot(self, x):
        """A^T x: contract each per-pair block of x with its gain column."""
        if self.n_units == 0:
            return np.zeros(self.n_pairs)
        return np.einsum("pn,np->p", x.reshape(self.n_pairs, self.n_units), self.gains)

    def apply_gain(self, y):
        """A y: scale each gain column by its coefficient and stack."""
        return (self.gains * y[None, :]).T.ravel()

    def z_pinv_apply(self, x):
        """Minimum-norm pseudo-inverse of the allocation Hessian applied to x."""
        t = self.basis_in.T @ self.gain_dot(x)
        return self.apply_gain(self.basis_in @ (self.core_inv * t))

    def z_pinv_dense(self):
        """Materialized pseudo-inverse; only sensible for small problems."""
        size = self.n_units * self.n_pairs
        eye = np.eye(size)
        return np.column_stack([self.z_pinv_apply(eye[:, i]) for i in range(size)]) if size else np.zeros((0, 0))

    # --- objective pieces -------------------------------------------------
    def vec_h_of(self, vec_v):
        return self.h1_vec + self.gain_dot(vec_v)

    def mse_of_vec_h(self, hv):
        return float(hv @ self.quad_kernel @ hv - 2.0 * (self.lin_vec @ hv) + self.mse_const)

    def mse_of_v(self, vec_v):
        return self.mse_of_vec_h(self.vec_h_of(vec_v))

    def lagrangian_value(self, vec_v, state: DualState):
        rows = vec_v.reshape(self.n_pairs, self.n_units).sum(axis=0)
        return (
            self.mse_of_v(vec_v)
            + state.row_sum @ (rows - 1.0)
            - state.lower @ vec_v
            + state.upper @ (vec_v - 1.0)
        )


def lagrangian_minimizer(state: DualState, pre: DualPrecomp):
    """Stationary point of the allocation Lagrangian, minimum-norm solution.

    vec(V*) = Z^+ {A [2 vec(Q^T Rx W^T) - S vec(H1)] - vec(mu_row 1^T)
              + mu_lower - mu_upper}.
    """
    rhs = pre.const_rhs - np.tile(state.row_sum, pre.n_pairs) + state.lower - state.upper
    return pre.z_pinv_apply(rhs)


def mse_grad_wrt_v(vec_v, pre: DualPrecomp):
    """Gradient of the MSE in vec(V): A [S vec(H) - 2 vec(Q^T Rx W^T)]."""
    hv = pre.vec_h_of(vec_v)
    return pre.apply_gain(pre.quad_sym @ hv - 2.0 * pre.lin_vec)


def _stationarity_transport(state: DualState, pre: DualPrecomp, v):
    """Z^+ applied to the Lagrangian gradient at v (zero in exact arithmetic)."""
    bracket = mse_grad_wrt_v(v, pre) + np.tile(state.row_sum, pre.n_pairs) - state.lower + state.upper
    return pre.z_pinv_apply(bracket)


def _dual_gradient_block(state: DualState, pre: DualPrecomp, v, j):
    zb = _stationarity_transport(state, pre, v)
    if j == 0:
        rows = v.reshape(pre.n_pairs, pre.n_units).sum(axis=0)
        zb_rows = zb.reshape(pre.n_pairs, pre.n_units).sum(axis=0)
        return rows - 1.0 - zb_rows
    if j == 1:
        return -v + zb
    return v - 1.0 - zb


def dual_gradients(state: DualState, pre: DualPrecomp):
    """Gradients of the dual function for the three multiplier blocks.

    Each is the constraint residual at the Lagrangian minimizer plus a
    Jacobian-transported stationarity term; the latter vanishes under the
    minimum-norm pseudo-inverse but is kept so the expressions remain the
    exact derivatives of the implemented dual function.
    """
    v = lagrangian_minimizer(state, pre)
    zb = _stationarity_transport(state, pre, v)
    rows = v.reshape(pre.n_pairs, pre.n_units).sum(axis=0)
    zb_rows = zb.reshape(pre.n_pairs, pre.n_units).sum(axis=0)
    g_row = rows - 1.0 - zb_rows
    g_lower = -v + zb
    g_upper = v - 1.0 - zb
    return g_row, g_lower, g_upper


def repair_allocation(vec_v, n_units, n_pairs):
    """Clip into [0, 1], then scale any row whose sum exceeds 1."""
    vm = np.clip(vec_v.reshape(n_pairs, n_units).T, 0.0, 1.0)
    if n_units:
        sums = vm.sum(axis=1)
        over = sums > 1.0
        if over.any():
            vm[over] /= sums[over, None]
    return vm


def project_rows_allocation(vmat):
    """Exact per-row Euclidean projection onto {0 <= v <= 1, row sum <= 1}.

    Rows already inside the cap after clipping are kept; the rest get the
    shift threshold solved by vectorized bisection.
    """
    y = np.clip(vmat, 0.0, 1.0)
    if not vmat.size:
        return y
    over = y.sum(axis=1) > 1.0
    if not over.any():
        return y
    x = vmat[over]
    lo = np.zeros(x.shape[0])
    hi = x.max(axis=1)
    for _ in range(100):
        tau = 0.5 * (lo + hi)
        s = np.clip(x - tau[:, None], 0.0, 1.0).sum(axis=1)
        lo = np.where(s > 1.0, tau, lo)
        hi = np.where(s > 1.0, hi, tau)
    y[over] = np.clip(x - (0.5 * (lo + hi))[:, None], 0.0, 1.0)
    return y


@dataclass
class P1bResult:
    v: RelaxedV
    mse: float
    converged: bool
    iterations: int
    dual_trace: list
    mse_trace: list
    null_dim: int


def solve_relaxed_assignment(chans: ChannelSet, w, q, stats: SignalStats, opts=None, v_ref=None) -> P1bResult:
    """Relaxed allocation solve: dual ascent phase plus primal descent phase.

    The dual phase follows the multiplier recipe exactly: start at epsilon,
    cycle the three blocks with Armijo backtracking ascent and nonnegativity
    projection, repair every Lagrangian minimizer to a feasible allocation,
    and stop when the repaired-candidate MSE change falls below epsilon (or
    the best candidate stalls).  Because the stationary point lives in the
    row space of the rank-deficient Hessian, box-active optima can sit
    outside its reach, so a monotone projected-gradient descent phase then
    refines the best feasible candidate with exact per-row projections.
    The result is never worse than the supplied reference allocation.
    """
    opts = opts or SolverOptions()
    pre = DualPrecomp(chans, np.asarray(w, float), np.asarray(q, float), stats, opts.sv_cutoff)
    n, p = pre.n_units, pre.n_pairs
    eps = opts.epsilon
    state = DualState(
        row_sum=np.full(n, eps),
        lower=np.full(n * p, eps),
        upper=np.full(n * p, eps),
    )

    best_v = None
    best_m = math.inf
    if v_ref is not None:
        ref = np.asarray(v_ref, dtype=float)
        best_v, best_m = ref.copy(), pre.mse_of_v(ref.T.ravel())

    def consider(vec_v):
        nonlocal best_v, best_m
        vm = repair_allocation(vec_v, n, p)
        m = pre.mse_of_v(vm.T.ravel())
        if m < best_m:
            best_v, best_m = vm, m
        return m

    mse_prev = consider(lagrangian_minimizer(state, pre))
    dual_trace = [pre.lagrangian_value(lagrangian_minimizer(state, pre), state)]
    mse_trace = [mse_prev]
    steps = [1.0, 1.0, 1.0]
    converged = False
    iterations = 0
    best_at_stall = best_m
    stall = 0

    for iterations in range(1, opts.inner_cap + 1):
        for j, attr in enumerate(("row_sum", "lower", "upper")):
            v_cur = lagrangian_minimizer(state, pre)
            grad = _dual_gradient_block(state, pre, v_cur, j)
            cur = getattr(state, attr)
            val = pre.lagrangian_value(v_cur, state)
            alpha = steps[j] * 2.0
            while alpha > _STEP_FLOOR:
                trial = np.maximum(cur + alpha * grad, 0.0)
                delta = trial - cur
                ascent = float(grad @ delta)
                if ascent <= 0.0:
                    break
                setattr(state, attr, trial)
                trial_val = pre.lagrangian_value(lagrangian_minimizer(state, pre), state)
                if trial_val >= val + opts.armijo_accept * ascent:
                    steps[j] = alpha
                    break
                setattr(state, attr, cur)
                alpha *= opts.armijo_shrink

        v_star = lagrangian_minimizer(state, pre)
        m = consider(v_star)
        dual_trace.append(pre.lagrangian_value(v_star, state))
        mse_trace.append(m)
        if abs(m - mse_prev) <= eps:
            converged = True
            break
        mse_prev = m
        if best_m < best_at_stall - eps:
            best_at_stall = best_m
            stall = 0
        else:
            stall += 1
            if stall >= 10:  # multipliers keep moving but candidates stopped improving
                converged = True
                break

    if best_v is None:
        best_v = repair_allocation(lagrangian_minimizer(state, pre), n, p)
        best_m = pre.mse_of_v(best_v.T.ravel())

    best_v, best_m, primal_iters = _primal_allocation_descent(pre, best_v, best_m, opts)
    iterations += primal_iters

    return P1bResult(
        v=RelaxedV(v=best_v, n_leds=chans.n_leds, n_pds=chans.n_pds),
        mse=best_m,
        converged=converged,
        iterations=iterations,
        dual_trace=dual_trace,
        mse_trace=mse_trace,
        null_dim=pre.null_dim,
    )


def _primal_allocation_descent(pre: DualPrecomp, v0, m0, opts: SolverOptions):
    """Monotone projected-gradient refinement of a feasible allocation.

    Steps grow after every accepted move and backtrack on any increase, so
    progress is strictly monotone without a fixed worst-case step.
    """
    if pre.grad_lipschitz <= 0 or pre.n_units == 0:
        return v0, m0, 0
    alpha = 1.0 / pre.grad_lipschitz
    v, val = v0, m0
    tol = 0.01 * opts.epsilon
    it = 0
    for it in range(1, opts.inner_cap + 1):
        g = mse_grad_wrt_v(v.T.ravel(), pre).reshape(pre.n_pairs, pre.n_units).T
        alpha *= 2.0
        accepted = False
        while alpha > _STEP_FLOOR:
            v_new = project_rows_allocation(v - alpha * g)
            m_new = pre.mse_of_v(v_new.T.ravel())
            if m_new <= val:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            break
        drop = val - m_new
        v, val = v_new, m_new
        if drop <= tol:
            break
    return v, val, it


@dataclass
class P2Result:
    w: np.ndarray
    mse: float
    converged: bool
    iterations: int
    lambda_power: float
    nu_rows: np.ndarray
    power_residual: float
    headroom_residual: float
    min_curvature: float
    duality_gap: float = math.nan


def solve_precoder(h, q, stats: SignalStats, budget: PowerBudget, opts=None, w_ref=None, dual_warm=None) -> P2Result:
    """Precoder update under the total-power and per-LED headroom caps.

    Two phases.  A monotone projected-gradient descent (exact Dykstra
    projection onto the power ball intersected with the row l1 balls)
    drives the feasible candidate to the optimum; a dual ascent over the
    n_leds + 1 multipliers, whose Lagrangian minimizer is found by
    row-wise soft-threshold sweeps, then certifies the candidate through
    the duality gap and reports the multipliers.  The result satisfies
    both constraints exactly and is never worse than the warm start.
    """
    opts = opts or SolverOptions()
    h = np.asarray(h, float)
    q = np.asarray(q, float)
    n_t = h.shape[1]
    n_s = stats.n_s
    b = q @ h
    btb = b.T @ b
    bt = b.T.copy()
    sx2 = stats.sigma_x2
    kappa = stats.sigma_x * stats.pam_amp * (stats.m_pam - 1)
    d = budget.headroom
    p_sig = budget.signal_power
    if p_sig < -1e-12 * max(budget.p_total, 1.0):
        raise ValueError("infeasible power budget: bias power exceeds the total emission cap")
    p_sig = max(p_sig, 0.0)

    eigs = np.linalg.eigvalsh(btb)
    min_curvature = float(sx2 * eigs[0])
    lip_base = 2.0 * sx2 * max(eigs[-1], 0.0)

    def mse_of(wmat):
        return mse_matrices(h, wmat, q, stats)

    def repair(wmat):
        wr = wmat.copy()
        l1 = np.abs(wr).sum(axis=1)
        tight = kappa * l1 > d
        if tight.any():
            scale = np.zeros(n_t)
            nz = l1 > 0
            scale[nz] = d[nz] / (kappa * l1[nz])
            wr[tight] *= scale[tight, None]
        pw = sx2 * (wr * wr).sum()
        if pw > p_sig:
            wr *= math.sqrt(p_sig / pw) if pw > 0 else 0.0
        return wr

    zero_w = np.zeros((n_t, n_s))
    if p_sig == 0.0 or d.max() == 0.0 or lip_base == 0.0:
        return P2Result(
            w=zero_w, mse=mse_of(zero_w), converged=True, iterations=0,
            lambda_power=0.0, nu_rows=np.zeros(n_t), power_residual=0.0,
            headroom_residual=0.0, min_curvature=min_curvature, duality_gap=0.0,
        )

    w_free = np.linalg.pinv(b)  # minimum-norm unconstrained optimum
    free_pow = sx2 * (w_free * w_free).sum() - p_sig
    free_rows = kappa * np.abs(w_free).sum(axis=1) - d
    if free_pow <= 0 and (free_rows <= 0).all():
        return P2Result(
            w=w_free, mse=mse_of(w_free), converged=True, iterations=0,
            lambda_power=0.0, nu_rows=np.zeros(n_t), power_residual=0.0,
            headroom_residual=0.0, min_curvature=min_curvature, duality_gap=0.0,
        )

    best_w = repair(np.asarray(w_ref, float)) if w_ref is not None else repair(w_free)
    best_m = mse_of(best_w)
    cand = repair(w_free)
    m = mse_of(cand)
    if m < best_m:
        best_w, best_m = cand, m

    # phase 1: monotone projected-gradient descent on the feasible set
    row_caps = d / kappa if kappa > 0 else np.full(n_t, math.inf)
    alpha = 2.0 / max(lip_base, 1e-300)
    primal_iters = 0
    for primal_iters in range(1, opts.inner_cap + 1):
        g = 2.0 * sx2 * (btb @ best_w - bt)
        alpha *= 2.0
        accepted = False
        while alpha > _STEP_FLOOR:
            cand = repair(_project_precoder(best_w - alpha * g, p_sig, row_caps, sx2))
            m = mse_of(cand)
            if m <= best_m:
                accepted = True
                break
            alpha *= opts.armijo_shrink
        if not accepted:
            break
        drop = best_m - m
        best_w, best_m = cand, m
        if drop <= 0.01 * max(opts.epsilon * max(1.0, abs(best_m)), 1e-16):
            break

    # phase 2: dual ascent over (lambda, nu) for multipliers and the gap
    def inner_min(lam, nu, w_start, sweep_cap):
        # exact soft-threshold updates, one LED row at a time (separable
        # across streams within a row); tolerant of the singular smooth part
        a = btb + lam * np.eye(n_t)
        diag = np.diag(a).copy()
        thr = nu * kappa / (2.0 * sx2)
        wmat = w_start.copy()
        aw = a @ wmat
        for _ in range(sweep_cap):
            delta_max = 0.0
            for t in range(n_t):
                resid = bt[t] - aw[t] + diag[t] * wmat[t]
                if diag[t] > 0:
                    new_row = np.sign(resid) * np.maximum(np.abs(resid) - thr[t], 0.0) / diag[t]
                else:
                    new_row = np.zeros(n_s)
                diff = new_row - wmat[t]
                if diff.any():
                    aw += np.outer(a[:, t], diff)
                    wmat[t] = new_row
                    delta_max = max(delta_max, np.abs(diff).max())
            if delta_max <= 1e-13 * (1.0 + np.abs(wmat).max()):
                break
        return wmat

    def dual_eval(lam, nu, w_start, sweep_cap):
        wmat = inner_min(lam, nu, w_start, sweep_cap)
        val = (
            mse_of(wmat)
            + lam * (sx2 * (wmat * wmat).sum() - p_sig)
            + nu @ (kappa * np.abs(wmat).sum(axis=1) - d)
        )
        return val, wmat

    if dual_warm is not None:
        lam = float(max(dual_warm[0], 0.0))
        nu = np.maximum(np.asarray(dual_warm[1], float), 0.0)
    else:
        lam = 0.0
        nu = np.zeros(n_t)
    val, w_in = dual_eval(lam, nu, best_w, opts.prox_cap)
    step = 1.0 / max(lip_base, 1.0)
    dual_iters = 0
    budget_iters = min(opts.inner_cap, 60)
    gap_tol = max(opts.epsilon * max(1.0, abs(best_m)), 1e-14)
    for dual_iters in range(1, budget_iters + 1):
        if best_m - val <= gap_tol:
            break
        g_lam = sx2 * (w_in * w_in).sum() - p_sig
        g_nu = kappa * np.abs(w_in).sum(axis=1) - d
        alpha = step * 2.0
        accepted = False
        trials = 0
        while alpha > _STEP_FLOOR and trials < 30:
            lam_t = max(lam + alpha * g_lam, 0.0)
            nu_t = np.maximum(nu + alpha * g_nu, 0.0)
            ascent = g_lam * (lam_t - lam) + g_nu @ (nu_t - nu)
            if ascent <= 0.0:
                break
            val_t, w_t = dual_eval(lam_t, nu_t, w_in, 40)
            trials += 1
            if val_t >= val + opts.armijo_accept * ascent:
                lam, nu, val, w_in = lam_t, nu_t, val_t, w_t
                step = alpha
                accepted = True
                break
            alpha *= opts.armijo_shrink
        cand = repair(w_in)
        m = mse_of(cand)
        if m < best_m:
            best_w, best_m = cand, m
        if not accepted:
            break

    # tight certificate at the final multipliers
    val, _ = dual_eval(lam, nu, w_in, 5 * opts.prox_cap)
    gap = best_m - val
    gap_tol = max(opts.epsilon * max(1.0, abs(best_m)), 1e-14)
    converged = gap <= 100 * gap_tol

    excess_total, excess_rows = (
        sx2 * (best_w * best_w).sum() - p_sig,
        kappa * np.abs(best_w).sum(axis=1) - d,
    )
    return P2Result(
        w=best_w,
        mse=best_m,
        converged=converged,
        iterations=primal_iters + dual_iters,
        lambda_power=lam,
        nu_rows=nu,
        power_residual=float(max(excess_total, 0.0)),
        headroom_residual=float(max(excess_rows.max(initial=0.0), 0.0)),
        min_curvature=min_curvature,
        duality_gap=float(gap),
    )


def mmse_detector(h, w, stats: SignalStats):
    """Closed-form MSE-optimal detector Rx (HW)^T (HW Rx (HW)^T + Rw)^{-1}."""
    h = np.asarray(h, float)
    g = h @ np.asarray(w, float)
    m = stats.sigma_x2 * (g @ g.T) + stats.sigma_w2 * np.eye(h.shape[0])
    try:
        sol = np.linalg.solve(m, g)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(
            "detector system is singular: zero noise with a rank-deficient effective channel"
        ) from exc
    return stats.sigma_x2 * sol.T


def zero_forcing_design(h, stats: SignalStats, budget: PowerBudget):
    """Scaled pseudo-inverse precoder and matched stream selector.

    W = zeta * H^+ restricted to the first n_s columns and Q = zeta^{-1}
    [I, 0]; zeta is the largest scale satisfying both power constraints,
    the smaller of a Frobenius-budget term and a row-headroom term.  For a
    full-row-rank channel Q H W equals the identity exactly.
    """
    h = np.asarray(h, float)
    n_r, n_t = h.shape
    n_s = stats.n_s
    if n_s > min(n_r, n_t):
        raise ValueError("stream count exceeds min(#LEDs, #PDs)")
    u, s, vt = np.linalg.svd(h, full_matrices=False)
    tol = max(n_r, n_t) * np.finfo(float).eps * (s[0] if s.size else 0.0)
    rank = int((s > tol).sum())
    if rank < n_s:
        raise ValueError(f"channel rank {rank} cannot carry {n_s} streams")
    p_sig = budget.signal_power
    if p_sig <= 0:
        raise ValueError("no signal power left for zero-forcing: bias consumes the emission budget")
    pinv_h = (vt[:rank].T / s[:rank]) @ u[:, :rank].T
    w0 = pinv_h[:, :n_s]
    kappa = stats.sigma_x * stats.pam_amp * (stats.m_pam - 1)
    zeta_pow = math.sqrt(p_sig / (stats.sigma_x2 * float((1.0 / s[:rank] ** 2).sum())))
    row_l1 = np.abs(w0).sum(axis=1).max()
    zeta_row = budget.headroom.min() / (kappa * row_l1) if row_l1 > 0 else math.inf
    zeta = min(zeta_pow, zeta_row)
    if zeta <= 0:
        raise ValueError("zero amplitude headroom leaves no feasible zero-forcing precoder")
    w = zeta * w0
    qz = np.zeros((n_s, n_r))
    qz[:, :n_s] = np.eye(n_s) / zeta
    return w, qz


def low_snr_detector(h, w, stats: SignalStats):
    """Noise-dominated detector limit (sigma_x^2 / sigma_w^2) (HW)^T."""
    return (stats.sigma_x2 / stats.sigma_w2) * (np.asarray(h, float) @ np.asarray(w, float)).T


@dataclass
class SolverReport:
    """Outcome of one alternating optimization run."""

    mse_trace: list
    mse_blocks: list
    final_design: Design
    final_assignment: Assignment
    relaxed_v: np.ndarray
    outer_iterations: int
    assignment_iterations: list
    precoder_iterations: list
    power_residual: float
    headroom_residual: float
    converged: bool
    relaxed_mse: float
    binary_mse: float
    z_null_dim: int | None = None
    precoder_min_curvature: float | None = None


def _identity_detector(n_s, n_r):
    q = np.zeros((n_s, n_r))
    q[:, :n_s] = np.eye(n_s)
    return q


def alternating_optimize(
    scene,
    chans: ChannelSet,
    stats: SignalStats,
    budget: PowerBudget,
    opts=None,
    assignment0=None,
    optimize_assignment=True,
) -> SolverReport:
    """Full joint solve: allocation, precoder, detector, then rounding.

    Starts from the distance-greedy assignment (or a supplied one), a
    feasibility-scaled pseudo-inverse precoder, and a stream-selector
    detector.  Cycles the three block solves until the MSE change falls
    below epsilon, then rounds the allocation and, when polishing is on,
    re-solves precoder and detector on the rounded channel.
    """
    opts = opts or SolverOptions()
    n_t, n_r, n = chans.n_leds, chans.n_pds, chans.n_units
    if stats.n_s > min(n_t, n_r):
        raise ValueError("stream count exceeds min(#LEDs, #PDs)")
    if budget.headroom.shape[0] != n_t:
        raise ValueError("headroom length must match the LED count")

    if assignment0 is None:
        if n > 0:
            assignment0 = distance_greedy(scene)
        else:
            assignment0 = Assignment(f=np.zeros((0, n_r), int), g=np.zeros((0, n_t), int))
    v = to_v(assignment0)
    h = assemble_h(chans, v)
    try:
        w, _ = zero_forcing_design(h, stats, budget)
    except (ValueError, np.linalg.LinAlgError):
        w = np.zeros((n_t, stats.n_s))  # zero-power budgets and degenerate channels
    q = _identity_detector(stats.n_s, n_r)

    trace = [mse_matrices(h, w, q, stats)]
    blocks = []
    i1, i2 = [], []
    null_dim = None
    min_curv = None
    converged = False
    outer = 0
    for outer in range(1, opts.outer_cap + 1):
        if n > 0 and optimize_assignment:
            res_v = solve_relaxed_assignment(chans, w, q, stats, opts, v_ref=v)
            v = res_v.v.v
            h = assemble_h(chans, v)
            i1.append(res_v.iterations)
            null_dim = res_v.null_dim
        m_v = mse_matrices(h, w, q, stats)
        res_w = solve_precoder(h, q, stats, budget, opts, w_ref=w)
        w = res_w.w
        i2.append(res_w.iterations)
        min_curv = res_w.min_curvature
        m_w = mse_matrices(h, w, q, stats)
        q = mmse_detector(h, w, stats)
        m_q = mse_matrices(h, w, q, stats)
        blocks.append((m_v, m_w, m_q))
        trace.append(m_q)
        if abs(trace[-1] - trace[-2]) <= opts.epsilon:
            converged = True
            break

    relaxed_mse = trace[-1]
    if n > 0 and optimize_assignment:
        assignment = recover_assignment(RelaxedV(v=v, n_leds=n_t, n_pds=n_r))
    else:
        assignment = assignment0
    v_bin = to_v(assignment)
    h_bin = assemble_h(chans, v_bin)
    if opts.polish_rounding:
        res_w = solve_precoder(h_bin, q, stats, budget, opts, w_ref=w)
        w = res_w.w
        i2.append(res_w.iterations)
        q = mmse_detector(h_bin, w, stats)
    binary_mse = mse_matrices(h_bin, w, q, stats)

    design = Design(w=w, q=q, r=budget.bias.copy())
    excess_total, excess_rows = power_residuals(design, stats, budget)
    return SolverReport(
        mse_trace=trace,
        mse_blocks=blocks,
        final_design=design,
        final_assignment=assignment,
        relaxed_v=v,
        outer_iterations=outer,
        assignment_iterations=i1,
        precoder_iterations=i2,
        power_residual=float(max(excess_total, 0.0)),
        headroom_residual=float(max(excess_rows.max(initial=0.0), 0.0)),
        converged=converged,
        relaxed_mse=relaxed_mse,
        binary_mse=binary_mse,
        z_null_dim=null_dim,
        precoder_min_curvature=min_curv,
    )


def write_trace_csv(report: SolverReport, path):
    """Per-iteration MSE trace with the terminal constraint residuals."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "mse", "power_residual_watt", "headroom_residual_amp"])
        for i, m in enumerate(report.mse_trace):
            writer.writerow([i, f"{m:.17g}", f"{report.power_residual:.17g}", f"{report.headroom_residual:.17g}"])


def write_summary_json(report: SolverReport, path):
    summary = {
        "converged": report.converged,
        "outer_iterations": report.outer_iterations,
        "relaxed_mse": report.relaxed_mse,
        "binary_mse": report.binary_mse,
        "power_residual": report.power_residual,
        "headroom_residual": report.headroom_residual,
        "assignment_iterations": report.assignment_iterations,
        "precoder_iterations": report.precoder_iterations,
        "z_null_dim": report.z_null_dim,
        "precoder_min_curvature": report.precoder_min_curvature,
    }
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2)
