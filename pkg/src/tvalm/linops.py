"""Matrix-free linear operators and Krylov solvers.

Provides the data operator K (convolution with replicate boundary extension
and its exact adjoint), the restoration operator H = -mu*Laplacian + K*K, and
unpreconditioned CG / BiCGSTAB with the forcing-term rule used to pick inner
tolerances for Newton steps.  Every solve starts from the zero vector so
iteration counts are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import KrylovError
from .grid import div, grad

FORCING_FLOOR = 1e-13
BREAKDOWN_EPS = 1e-30


@dataclass(frozen=True)
class LinearMap:
    """A matrix-free operator: forward and adjoint actions plus a symmetry flag."""

    apply: Callable[[np.ndarray], np.ndarray]
    apply_adjoint: Callable[[np.ndarray], np.ndarray]
    self_adjoint: bool = False


def identity_map() -> LinearMap:
    return LinearMap(lambda u: u.copy(), lambda u: u.copy(), self_adjoint=True)


@dataclass(frozen=True)
class BlurKernel:
    """Odd-supported 2-D stencil with weights summing to 1."""

    taps: np.ndarray

    def __post_init__(self):
        taps = np.array(self.taps, dtype=np.float64)
        if taps.ndim != 2:
            raise ValueError(f"kernel taps must be 2-D, got shape {taps.shape}")
        if taps.shape[0] % 2 == 0 or taps.shape[1] % 2 == 0:
            raise ValueError(f"kernel support must be odd in both axes, got {taps.shape}")
        if abs(float(taps.sum()) - 1.0) > 1e-12:
            raise ValueError(f"kernel weights must sum to 1, got {taps.sum()!r}")
        object.__setattr__(self, "taps", taps)


def motion_kernel(length: int) -> BlurKernel:
    """Horizontal motion blur: a 1 x length row of uniform weights (odd length)."""
    if length < 1 or length % 2 == 0:
        raise ValueError(f"motion kernel length must be odd and >= 1, got {length}")
    return BlurKernel(np.full((1, length), 1.0 / length))


def gaussian_kernel(radius: int, std: float) -> BlurKernel:
    """Truncated, normalized Gaussian on a (2r+1) x (2r+1) support."""
    if radius < 0 or std <= 0:
        raise ValueError("radius must be >= 0 and std positive")
    ax = np.arange(-radius, radius + 1, dtype=np.float64)
    g1 = np.exp(-0.5 * (ax / std) ** 2)
    taps = np.outer(g1, g1)
    return BlurKernel(taps / taps.sum())


def blur_apply(u: np.ndarray, kernel: BlurKernel) -> np.ndarray:
    """Correlate ``u`` with the kernel taps, replicate boundary extension.

    Implemented as one edge pad plus tap-weighted views of the padded array,
    so the operator is the composition (valid correlation) o (replicate pad).
    """
    kh, kw = kernel.taps.shape
    m, n = u.shape
    if kh > m or kw > n:
        raise ValueError(f"kernel {kernel.taps.shape} larger than image {u.shape}")
    ci, cj = kh // 2, kw // 2
    padded = np.pad(u, ((ci, ci), (cj, cj)), mode="edge")
    out = np.zeros_like(u)
    for a in range(kh):
        for b in range(kw):
            t = kernel.taps[a, b]
            if t != 0.0:
                out += t * padded[a:a + m, b:b + n]
    return out


def blur_adjoint(y: np.ndarray, kernel: BlurKernel) -> np.ndarray:
    """Exact adjoint of blur_apply: scatter the taps into the padded plane,
    then fold the pad borders back (the transpose of replicate padding)."""
    kh, kw = kernel.taps.shape
    m, n = y.shape
    if kh > m or kw > n:
        raise ValueError(f"kernel {kernel.taps.shape} larger than image {y.shape}")
    ci, cj = kh // 2, kw // 2
    plane = np.zeros((m + 2 * ci, n + 2 * cj))
    for a in range(kh):
        for b in range(kw):
            t = kernel.taps[a, b]
            if t != 0.0:
                plane[a:a + m, b:b + n] += t * y
    rows = plane[ci:ci + m, :].copy()
    if ci:
        rows[0, :] += plane[:ci, :].sum(axis=0)
        rows[m - 1, :] += plane[m + ci:, :].sum(axis=0)
    out = rows[:, cj:cj + n].copy()
    if cj:
        out[:, 0] += rows[:, :cj].sum(axis=1)
        out[:, n - 1] += rows[:, n + cj:].sum(axis=1)
    return out


def blur_map(kernel: BlurKernel) -> LinearMap:
    return LinearMap(
        lambda u: blur_apply(u, kernel),
        lambda u: blur_adjoint(u, kernel),
        self_adjoint=False,
    )


def h_apply(u: np.ndarray, mu: float, K: LinearMap | None) -> np.ndarray:
    """Action of H = -mu*Laplacian + K*K; identity when K is None and mu = 0."""
    if mu < 0:
        raise ValueError(f"mu must be >= 0, got {mu}")
    out = u.copy() if K is None else K.apply_adjoint(K.apply(u))
    if mu > 0.0:
        out -= mu * div(grad(u))
    return out


def h_map(mu: float, K: LinearMap | None) -> LinearMap:
    op = lambda u: h_apply(u, mu, K)
    return LinearMap(op, op, self_adjoint=True)


@dataclass(frozen=True)
class KrylovConfig:
    rel_tol: float = 1e-10
    max_iters: int = 10000
    method: str = "cg"

    def __post_init__(self):
        if not (0.0 < self.rel_tol < 1.0):
            raise ValueError(f"rel_tol must lie in (0, 1), got {self.rel_tol}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.method not in ("cg", "bicgstab"):
            raise ValueError(f"unknown method {self.method!r}")


def _dot(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.sum(a * b))


STALL_WINDOW = 400
STALL_ACCEPT = 0.3


class _BestIterate:
    """Tracks the lowest-residual iterate and detects stagnation.

    Finite-precision Krylov solves often bottom out above very tight demanded
    tolerances.  When no 1% improvement happens over a window of iterations,
    the solve is declared stagnated: the best iterate is returned if it
    reduced the residual by at least 10x, otherwise the caller gets an error.
    """

    def __init__(self, b_norm: float):
        self.b_norm = b_norm
        self.best_r = float("inf")
        self.best_x = None
        self.since_improve = 0

    def update(self, x: np.ndarray, r_norm: float) -> None:
        if r_norm < 0.99 * self.best_r:
            self.best_r = r_norm
            self.best_x = x.copy()
            self.since_improve = 0
        else:
            self.since_improve += 1

    def stagnated(self) -> bool:
        return self.since_improve >= STALL_WINDOW

    def accept_or_raise(self, method: str, it: int) -> np.ndarray:
        if self.best_x is not None and self.best_r <= STALL_ACCEPT * self.b_norm:
            return self.best_x
        raise KrylovError("stagnated without sufficient progress", method=method,
                          residual=self.best_r / self.b_norm, iterations=it)


def cg_solve(A: LinearMap, b: np.ndarray, cfg: KrylovConfig) -> tuple[np.ndarray, int]:
    """Conjugate gradients for a self-adjoint positive-definite map.

    Returns (x, iterations) with ||A x - b|| <= rel_tol * ||b|| (or the best
    attainable iterate when finite precision stalls the recurrence).  Raises
    KrylovError if a search direction exposes indefiniteness (p'Ap <= 0) or
    the iteration budget runs out.
    """
    b_norm = np.sqrt(_dot(b, b))
    if b_norm == 0.0:
        return np.zeros_like(b), 0
    tol = cfg.rel_tol * b_norm
    x = np.zeros_like(b)
    r = b.copy()
    p = r.copy()
    rs = _dot(r, r)
    for it in range(1, cfg.max_iters + 1):
        Ap = A.apply(p)
        pAp = _dot(p, Ap)
        if pAp <= 0.0:
            raise KrylovError("indefinite operator detected", method="cg",
                              residual=np.sqrt(rs) / b_norm, iterations=it)
        a = rs / pAp
        x += a * p
        r -= a * Ap
        rs_new = _dot(r, r)
        if np.sqrt(rs_new) <= tol:
            return x, it
        p = r + (rs_new / rs) * p
        rs = rs_new
    raise KrylovError("max iterations exceeded", method="cg",
                      residual=np.sqrt(rs) / b_norm, iterations=cfg.max_iters)


def bicgstab_solve(A: LinearMap, b: np.ndarray, cfg: KrylovConfig) -> tuple[np.ndarray, int]:
    """Unpreconditioned BiCGSTAB; works on scalar or two-channel fields.

    Returns (x, iterations).  Raises KrylovError on breakdown (rho or omega
    vanishing) or when max_iters is exceeded.
    """
    b_norm = np.sqrt(_dot(b, b))
    if b_norm == 0.0:
        return np.zeros_like(b), 0
    tol = cfg.rel_tol * b_norm
    # A recurrence breakdown (rho, r0'v, t, or omega vanishing) ends the
    # iteration; it counts as acceptable when the residual has already been
    # reduced past the stall gate, and as an error otherwise.
    accept_norm = max(tol, STALL_ACCEPT * b_norm)
    x = np.zeros_like(b)
    r = b.copy()
    r0 = r.copy()
    rho = alpha = omega = 1.0
    v = np.zeros_like(b)
    p = np.zeros_like(b)
    best = _BestIterate(b_norm)
    for it in range(1, cfg.max_iters + 1):
        rho_new = _dot(r0, r)
        if abs(rho_new) < BREAKDOWN_EPS:
            r_norm = np.sqrt(_dot(r, r))
            if r_norm <= accept_norm:
                return x, it
            # <r0, r> vanishing while the residual is nonzero stalls the
            # recurrence; re-seed the shadow residual and restart.
            r0 = r.copy()
            rho_new = _dot(r0, r)
            if rho_new < BREAKDOWN_EPS:
                return x, it
            p = r.copy()
            v = np.zeros_like(b)
            alpha = omega = 1.0
        else:
            beta = (rho_new / rho) * (alpha / omega)
            p = r + beta * (p - omega * v)
        v = A.apply(p)
        r0v = _dot(r0, v)
        if abs(r0v) < BREAKDOWN_EPS:
            if np.sqrt(_dot(r, r)) <= accept_norm:
                return x, it
            raise KrylovError("breakdown: r0'v ~ 0", method="bicgstab",
                              residual=np.sqrt(_dot(r, r)) / b_norm, iterations=it)
        alpha = rho_new / r0v
        s = r - alpha * v
        x += alpha * p
        if np.sqrt(_dot(s, s)) <= tol:
            return x, it
        t = A.apply(s)
        tt = _dot(t, t)
        if tt < BREAKDOWN_EPS:
            if np.sqrt(_dot(s, s)) <= accept_norm:
                return x, it
            raise KrylovError("breakdown: t ~ 0", method="bicgstab",
                              residual=np.sqrt(_dot(s, s)) / b_norm, iterations=it)
        omega = _dot(t, s) / tt
        if abs(omega) < BREAKDOWN_EPS:
            if np.sqrt(_dot(s, s)) <= accept_norm:
                return x, it
            raise KrylovError("breakdown: omega ~ 0", method="bicgstab",
                              residual=np.sqrt(_dot(s, s)) / b_norm, iterations=it)
        x += omega * s
        r = s - omega * t
        r_norm = np.sqrt(_dot(r, r))
        if r_norm <= tol:
            return x, it
        best.update(x, r_norm)
        if best.stagnated():
            return best.accept_or_raise("bicgstab", it), it
        rho = rho_new
    raise KrylovError("max iterations exceeded", method="bicgstab",
                      residual=np.sqrt(_dot(r, r)) / b_norm, iterations=cfg.max_iters)


def krylov_solve(A: LinearMap, b: np.ndarray, cfg: KrylovConfig) -> tuple[np.ndarray, int]:
    """Dispatch on cfg.method."""
    if cfg.method == "cg":
        return cg_solve(A, b, cfg)
    return bicgstab_solve(A, b, cfg)


def h_solve(b: np.ndarray, mu: float, K: LinearMap | None, cfg: KrylovConfig) -> np.ndarray:
    """Apply H^{-1} via CG (H is self-adjoint positive definite).

    The denoising case (K = None, mu = 0) short-circuits to the identity.
    """
    if K is None and mu == 0.0:
        return b.copy()
    x, _ = cg_solve(h_map(mu, K), b, cfg)
    return x


def newton_forcing_tol(res_k: float, res_0: float, floor: float = FORCING_FLOOR) -> float:
    """Inner linear-solve tolerance 0.1 * min((r_k/r_0)^1.5, r_k/r_0).

    Clamped below at ``floor`` to avoid demanding sub-machine-precision
    solves; res_0 = 0 (already exact) also yields the floor.
    """
    if res_0 <= 0.0:
        return floor
    ratio = res_k / res_0
    return max(floor, 0.1 * min(ratio ** 1.5, ratio))
