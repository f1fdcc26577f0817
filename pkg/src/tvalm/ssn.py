"""Semismooth Newton solvers for the penalized subproblem at fixed multiplier.

Three formulations of the same nonlinear optimality system are offered:

* ``ssnpdp_step``: primal-dual Newton eliminating the auxiliary dual field,
  solving a scalar Schur-complement system for u first (BiCGSTAB), then
  recovering and projecting the dual iterate.
* ``ssnpdd_step``: the mirrored order, solving the two-channel system for the
  dual field first (BiCGSTAB, nesting H^{-1} actions), then recovering u.
* ``ssnpt_step``: a primal Newton step through the soft-thresholding operator
  with CG on the self-adjoint generalized derivative and an Armijo
  backtracking line search on the merit function.

Active sets use the tie convention s = 1: a pixel (or channel) counts as
active exactly where |multiplier + sigma * gradient| >= alpha.  Divisions by
vanishing magnitudes are guarded; any term carrying an inactive mask factor is
evaluated as zero there.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .errors import InnerNewtonError, LineSearchError
from .grid import ISO, check_variant, div, grad, inner_x, norm_x, norm_y, pointwise_mag, tv_norm
from .linops import (KrylovConfig, LinearMap, bicgstab_solve, cg_solve,
                     newton_forcing_tol)
from .prox import project_ball, soft_threshold

MAX_NEWTON_STEPS = 50


@dataclass(frozen=True)
class AlmContext:
    """Frozen data of one augmented-Lagrangian subproblem.

    lam is the current multiplier, sigma the penalty, z the observed data,
    K the data operator (None for the identity), f = K* z, and H the
    self-adjoint restoration operator.  ``h_identity`` marks the denoising
    case where H is the identity and nested solves are free.
    """

    lam: np.ndarray
    sigma: float
    alpha: float
    z: np.ndarray
    f: np.ndarray
    H: LinearMap
    variant: str
    K: LinearMap | None = None
    mu: float = 0.0
    h_identity: bool = False
    hinv_cfg: KrylovConfig = field(default_factory=lambda: KrylovConfig(rel_tol=1e-12))

    def __post_init__(self):
        check_variant(self.variant)
        if self.sigma <= 0.0 or self.alpha <= 0.0:
            raise ValueError("sigma and alpha must be positive")

    def solve_h(self, b: np.ndarray) -> np.ndarray:
        if self.h_identity:
            return b.copy()
        x, _ = cg_solve(self.H, b, self.hinv_cfg)
        return x

    def data_term(self, u: np.ndarray) -> float:
        """Quadratic data energy, evaluated cancellation-free."""
        r = (u - self.z) if self.K is None else (self.K.apply(u) - self.z)
        value = 0.5 * float(np.sum(r * r))
        if self.mu > 0.0:
            value += 0.5 * self.mu * norm_y(grad(u)) ** 2
        return value


def make_context(z: np.ndarray, lam: np.ndarray, sigma: float, alpha: float,
                 variant: str, K: LinearMap | None = None, mu: float = 0.0,
                 hinv_tol: float = 1e-12) -> AlmContext:
    """Build an AlmContext from raw data (K = None means the identity)."""
    from .linops import h_map

    f = z.copy() if K is None else K.apply_adjoint(z)
    return AlmContext(
        lam=lam, sigma=sigma, alpha=alpha, z=z, f=f, H=h_map(mu, K),
        variant=variant, K=K, mu=mu, h_identity=(K is None and mu == 0.0),
        hinv_cfg=KrylovConfig(rel_tol=hinv_tol, max_iters=20000),
    )


@dataclass(frozen=True)
class NewtonState:
    """One inner iterate: image, feasible dual field, and progress counters."""

    u: np.ndarray
    h: np.ndarray
    inner_residual: float
    iteration: int = 0
    krylov_iters: int = 0


@dataclass(frozen=True)
class LineSearchParams:
    mu_ls: float = 1e-4
    theta: float = 0.5
    eta0: float = 1.0
    max_backtracks: int = 40

    def __post_init__(self):
        if not (0.0 < self.mu_ls < 0.5):
            raise ValueError("mu_ls must lie in (0, 1/2)")
        if not (0.0 < self.theta < 1.0):
            raise ValueError("theta must lie in (0, 1)")


def active_mask(u: np.ndarray, ctx: AlmContext) -> np.ndarray:
    """Indicator of |lam + sigma grad u| >= alpha (per pixel, or per channel)."""
    w = ctx.lam + ctx.sigma * grad(u)
    if ctx.variant == ISO:
        return (pointwise_mag(w) >= ctx.alpha).astype(np.float64)
    return (np.abs(w) >= ctx.alpha).astype(np.float64)


def _pd_fields(u: np.ndarray, ctx: AlmContext):
    """Shared primal-dual quantities at the current iterate.

    Returns (w, U, coef) where w = lam + sigma grad u, U = max(1, |w|/alpha)
    (scalar per pixel for iso, per channel for aniso) and coef is the guarded
    Newton-derivative weight of the max term.
    """
    w = ctx.lam + ctx.sigma * grad(u)
    if ctx.variant == ISO:
        mag = pointwise_mag(w)
        U = np.maximum(1.0, mag / ctx.alpha)
        chi = mag >= ctx.alpha
        safe = np.where(mag > 0.0, mag, 1.0)
        coef = np.where(chi, (ctx.sigma / ctx.alpha) / safe, 0.0)
    else:
        aw = np.abs(w)
        U = np.maximum(1.0, aw / ctx.alpha)
        chi = aw >= ctx.alpha
        coef = np.where(chi, (ctx.sigma / ctx.alpha) * np.sign(w), 0.0)
    return w, U, coef


def _make_b_action(w, coef, h, variant) -> Callable[[np.ndarray], np.ndarray]:
    """Rank-structured derivative piece B: scalar field -> two-channel field."""
    if variant == ISO:
        def b_action(v):
            g = grad(v)
            return (coef * (w[0] * g[0] + w[1] * g[1])) * h
    else:
        def b_action(v):
            return coef * grad(v) * h
    return b_action


def residual_pd(u: np.ndarray, h: np.ndarray, ctx: AlmContext) -> float:
    """Norm of the dual-row nonlinear residual, evaluated with the
    pre-projection dual field."""
    w, U, _ = _pd_fields(u, ctx)
    return norm_y(U * h - w)


def ssnpdp_step(state: NewtonState, ctx: AlmContext, kcfg: KrylovConfig) -> NewtonState:
    """One u-first primal-dual Newton step (Schur complement in the image).

    The Schur system is solved in increment form (zero Krylov start), so the
    relative tolerance is measured against the nonlinear residual rather than
    the full right-hand side; this is what keeps inexact steps local.
    """
    u, h = state.u, state.h
    w, U, coef = _pd_fields(u, ctx)
    b_action = _make_b_action(w, coef, h, ctx.variant)
    b2 = ctx.lam + b_action(u)

    def system(v):
        return ctx.H.apply(v) - div((ctx.sigma * grad(v) - b_action(v)) / U)

    rhs = ctx.f + div(b2 / U)
    delta_u, kit = bicgstab_solve(LinearMap(system, system), rhs - system(u), kcfg)
    u_new = u + delta_u

    h_pre = (b2 + ctx.sigma * grad(u_new) - b_action(u_new)) / U
    res = residual_pd(u_new, h_pre, ctx)
    h_new = project_ball(h_pre, ctx.alpha, ctx.variant)
    return NewtonState(u_new, h_new, res, state.iteration + 1,
                       state.krylov_iters + kit)


def ssnpdd_step(state: NewtonState, ctx: AlmContext, kcfg: KrylovConfig) -> NewtonState:
    """One h-first primal-dual Newton step (Schur complement in the dual).

    Nested H^{-1} actions come from ctx.solve_h; the two-channel system is
    solved in increment form like ssnpdp_step.
    """
    u, h = state.u, state.h
    w, U, coef = _pd_fields(u, ctx)
    b_action = _make_b_action(w, coef, h, ctx.variant)
    b2 = ctx.lam + b_action(u)
    f_inv = ctx.solve_h(ctx.f)

    def system(q):
        t = ctx.solve_h(div(q))
        return U * q - ctx.sigma * grad(t) + b_action(t)

    rhs = b2 + ctx.sigma * grad(f_inv) - b_action(f_inv)
    delta_h, kit = bicgstab_solve(LinearMap(system, system), rhs - system(h), kcfg)
    h_pre = h + delta_h

    u_new = ctx.solve_h(ctx.f + div(h_pre))
    res = residual_pd(u_new, h_pre, ctx)
    h_new = project_ball(h_pre, ctx.alpha, ctx.variant)
    return NewtonState(u_new, h_new, res, state.iteration + 1,
                       state.krylov_iters + kit)


def merit_phi(u: np.ndarray, ctx: AlmContext) -> float:
    """Value of the reduced augmented Lagrangian at u (dual field eliminated
    through the soft threshold)."""
    q = ctx.lam / ctx.sigma + grad(u)
    s = soft_threshold(q, ctx.alpha / ctx.sigma, ctx.variant)
    return (
        ctx.data_term(u)
        + ctx.alpha * tv_norm(s, ctx.variant)
        + 0.5 * ctx.sigma * norm_y(q - s) ** 2
        - norm_y(ctx.lam) ** 2 / (2.0 * ctx.sigma)
    )


def _pt_residual_field(u: np.ndarray, ctx: AlmContext) -> np.ndarray:
    g = grad(u)
    s = soft_threshold(ctx.lam / ctx.sigma + g, ctx.alpha / ctx.sigma, ctx.variant)
    return ctx.H.apply(u) - ctx.f - div(ctx.lam) - ctx.sigma * div(g - s)


def residual_pt(u: np.ndarray, ctx: AlmContext) -> float:
    """Norm of the primal nonlinear residual through the soft threshold."""
    return norm_x(_pt_residual_field(u, ctx))


def _pt_system(u: np.ndarray, ctx: AlmContext) -> Callable[[np.ndarray], np.ndarray]:
    """Self-adjoint generalized derivative H + sigma grad^* (I - A) grad."""
    tau = ctx.alpha / ctx.sigma
    q = ctx.lam / ctx.sigma + grad(u)
    if ctx.variant == ISO:
        mag = pointwise_mag(q)
        chi = mag >= tau
        safe = np.where(chi, np.where(mag > 0.0, mag, 1.0), 1.0)

        def system(v):
            gd = grad(v)
            dot = q[0] * gd[0] + q[1] * gd[1]
            # Active branch of the shrinkage derivative (rank-1 corrected).
            a_gd = np.where(chi, 1.0 - tau / safe, 0.0) * gd \
                + np.where(chi, tau / safe ** 3, 0.0) * dot * q
            return ctx.H.apply(v) - ctx.sigma * div(gd - a_gd)
    else:
        chi = (np.abs(q) >= tau).astype(np.float64)

        def system(v):
            gd = grad(v)
            return ctx.H.apply(v) - ctx.sigma * div((1.0 - chi) * gd)
    return system


def ssnpt_step(state: NewtonState, ctx: AlmContext, kcfg: KrylovConfig,
               ls: LineSearchParams = LineSearchParams()) -> NewtonState:
    """One primal Newton step with Armijo backtracking on the merit function."""
    u = state.u
    f_res = _pt_residual_field(u, ctx)
    system = _pt_system(u, ctx)
    delta_u, kit = cg_solve(LinearMap(system, system, self_adjoint=True), -f_res, kcfg)

    # The residual field is a generalized gradient of the merit at u.
    slope = inner_x(f_res, delta_u)
    phi0 = merit_phi(u, ctx)
    eta = ls.eta0
    # Near the solution the predicted decrease falls below the merit's
    # floating-point resolution; take the plain Newton step there.
    if abs(ls.mu_ls * slope) <= 64.0 * np.finfo(np.float64).eps * max(1.0, abs(phi0)):
        u_new = u + eta * delta_u
        res = residual_pt(u_new, ctx)
        return NewtonState(u_new, state.h, res, state.iteration + 1,
                           state.krylov_iters + kit)
    phi_trial = merit_phi(u + eta * delta_u, ctx)
    backtracks = 0
    while phi_trial > phi0 + ls.mu_ls * eta * slope:
        backtracks += 1
        eta *= ls.theta
        if backtracks > ls.max_backtracks or eta < 1e-12:
            raise LineSearchError("Armijo backtracking failed",
                                  phi0=phi0, phi_last=phi_trial, eta=eta)
        phi_trial = merit_phi(u + eta * delta_u, ctx)

    u_new = u + eta * delta_u
    res = residual_pt(u_new, ctx)
    return NewtonState(u_new, state.h, res, state.iteration + 1,
                       state.krylov_iters + kit)


@dataclass
class InnerResult:
    """Outcome of one subproblem solve: final state and residual history."""

    state: NewtonState
    residuals: list[float]

    @property
    def newton_steps(self) -> int:
        return self.state.iteration

    @property
    def krylov_iters(self) -> int:
        return self.state.krylov_iters


def solve_subproblem(u0: np.ndarray, h0: np.ndarray, ctx: AlmContext, method: str,
                     delta: float, kcfg: KrylovConfig,
                     ls: LineSearchParams = LineSearchParams(),
                     max_newton: int = MAX_NEWTON_STEPS) -> InnerResult:
    """Run inner Newton steps until the residual drops below delta / sigma.

    The linear-solve tolerance follows the forcing rule from the residual
    history (capped at 0.1); exceeding ``max_newton`` steps raises rather than
    silently continuing.
    """
    if method not in ("pdp", "pdd", "pt"):
        raise ValueError(f"unknown inner method {method!r}")
    if method == "pt":
        res = residual_pt(u0, ctx)
    else:
        res = residual_pd(u0, h0, ctx)
    state = NewtonState(u0.copy(), h0.copy(), res)
    res0 = res
    residuals = [res]
    # The residual is a difference of terms whose size grows with sigma, so
    # delta / sigma is floored at the 64-bit evaluation noise of those terms.
    eps = np.finfo(np.float64).eps
    noise = 64.0 * eps * (norm_y(ctx.lam) + ctx.sigma * norm_y(grad(u0))
                          + norm_x(ctx.f))
    threshold = max(delta / ctx.sigma, noise)
    tight_mode = False
    tight_tol = 1e-10
    while state.inner_residual > threshold:
        if state.iteration >= max_newton:
            raise InnerNewtonError("inner Newton cap exceeded",
                                   iterations=state.iteration,
                                   residual=state.inner_residual)
        tol = min(0.1, newton_forcing_tol(state.inner_residual, res0))
        if method == "pt":
            state = ssnpt_step(state, ctx, replace(kcfg, rel_tol=tol), ls)
        else:
            step_fn = ssnpdp_step if method == "pdp" else ssnpdd_step
            if tight_mode:
                tol = tight_tol
            cand = step_fn(state, ctx, replace(kcfg, rel_tol=tol))
            if cand.inner_residual > state.inner_residual and not tight_mode:
                # The loose solve threw the iterate off; redo near-exactly and
                # keep tight solves for the rest of this subproblem.  The
                # unglobalized primal-dual Newton is only locally robust.
                tight_mode = True
                extra = cand.krylov_iters - state.krylov_iters
                cand = step_fn(state, ctx, replace(kcfg, rel_tol=tight_tol))
                cand = replace(cand, krylov_iters=cand.krylov_iters + extra)
            state = cand
        residuals.append(state.inner_residual)
    return InnerResult(state, residuals)
