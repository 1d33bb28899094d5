"""Primal, Danskin, gradient-mapping, proximal and Moreau-envelope oracles.

The iterative oracles here only use ``Objective.value_grad`` and the domains;
they never look at an objective's closed forms, so the closed forms remain an
independent check on them. Every solver works on a single point ``(d,)`` or
on a batch ``(k, d)`` of independent points at once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .domains import ConvexDomain
from .errors import ArgumentError, CapacityError, ConvergenceError, UnsupportedSettingError
from .problems import Objective

GRID_CAP = 10**7


@dataclass(frozen=True)
class InnerSolveConfig:
    """Stopping rule for the iterative solvers.

    ``tolerance`` is a distance-to-solution target (a value-gap target for
    merely concave inner problems). ``step_rule`` is ``"fixed"`` (step 1/L)
    or ``"backtracking"`` (Armijo-type, step doubled after each accepted move).
    """

    tolerance: float = 1e-10
    max_iterations: int = 100_000
    step_rule: str = "fixed"

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ArgumentError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ArgumentError("max_iterations must be at least 1")
        if self.step_rule not in ("fixed", "backtracking"):
            raise ArgumentError(f"unknown step rule {self.step_rule!r}")

    def to_dict(self) -> dict:
        return {"tolerance": self.tolerance, "max_iterations": self.max_iterations,
                "step_rule": self.step_rule}


DEFAULT_INNER = InnerSolveConfig()
DEFAULT_PROX = InnerSolveConfig(tolerance=1e-6, max_iterations=200_000)


def _sqnorm(v):
    return np.sum(v * v, axis=-1)


# --- inner maximization ---------------------------------------------------


def _ascend(objective: Objective, x, cfg: InnerSolveConfig, certify: str = "auto", y0=None):
    """Projected gradient ascent on ``y -> F(x, y)`` for a batch of ``x``.

    Certificates (``G`` is the gradient-mapping at the accepted step ``t``):
    ``||y - y*|| <= 2||G||/mu`` when ``mu > 0``; value gap of the returned
    point ``<= ||G|| * min(diam Y, 2||G||/mu)``.

    Returns ``(y, value, residual, iterations)`` with batch shapes.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    k = x.shape[0]
    Y = objective.y_domain
    mu = objective.mu
    diam = Y.diameter()
    t0 = 1.0 / objective.L
    y = Y.project(np.zeros((k, Y.dim)) if y0 is None else np.array(y0, dtype=float))
    t = np.full(k, t0)
    res = np.full(k, np.inf)
    active = np.ones(k, dtype=bool)
    backtrack = cfg.step_rule == "backtracking"
    it = 0
    while active.any():
        it += 1
        if it > cfg.max_iterations:
            raise ConvergenceError("inner maximization did not certify", float(res.max()), it - 1)
        idx = np.flatnonzero(active)
        xa, ya, ta = x[idx], y[idx], t[idx]
        v, _, g = objective.value_grad(xa, ya)
        while True:
            yn = Y.project(ya + ta[:, None] * g)
            if not backtrack:
                break
            step = yn - ya
            vn, _, gn = objective.value_grad(xa, yn)
            # the value test alone is blind below roundoff; the gradient test is not
            ok = (vn >= v + np.sum(g * step, axis=-1) - _sqnorm(step) / (2 * ta)
                  - 1e-13 * (1.0 + np.abs(v))) \
                & (ta * np.sqrt(_sqnorm(gn - g)) <= np.sqrt(_sqnorm(step)) * (1 + 1e-9))
            if ok.all():
                break
            ta = np.where(ok, ta, 0.5 * ta)
        gnorm = np.sqrt(_sqnorm(yn - ya)) / ta
        if certify == "value" or mu == 0:
            dist = np.minimum(diam, 2 * gnorm / mu) if mu > 0 else diam
            cert = gnorm * dist
        else:
            cert = 2 * gnorm / mu
        y[idx] = yn
        if backtrack:
            t[idx] = np.minimum(2 * ta, 1e100 * t0)
        res[idx] = cert
        active[idx[cert <= cfg.tolerance]] = False
    value = objective.value_grad(x, y)[0]
    return y, value, res, it


def inner_max(objective: Objective, x, cfg: Optional[InnerSolveConfig] = None):
    """``(y*, F(x, y*))`` by projected gradient ascent.

    For ``mu > 0`` the returned ``y`` is within ``cfg.tolerance`` of the
    maximizer; for ``mu = 0`` its value is within ``cfg.tolerance`` of the max.

    Raises
    ------
    ConvergenceError
        If ``max_iterations`` runs out first; carries the residual.
    """
    cfg = cfg or DEFAULT_INNER
    x = np.asarray(x, dtype=float)
    y, value, _, _ = _ascend(objective, x, cfg)
    if x.ndim == 1:
        return y[0], float(value[0])
    return y, value


def primal_value(objective: Objective, x, cfg: Optional[InnerSolveConfig] = None):
    """``Phi(x) = max_y F(x, y)``."""
    cfg = cfg or DEFAULT_INNER
    x = np.asarray(x, dtype=float)
    _, value, _, _ = _ascend(objective, x, cfg, certify="value")
    return float(value[0]) if x.ndim == 1 else value


def primal_grad_ncsc(objective: Objective, x, cfg: Optional[InnerSolveConfig] = None,
                     y0=None, return_y: bool = False):
    """Danskin gradient ``grad_x F(x, y*(x))``; needs ``mu > 0``.

    The error is at most ``L * tolerance`` by smoothness of ``F``. ``y0``
    warm-starts the inner ascent; ``return_y`` also returns the maximizer.
    """
    if not objective.mu > 0:
        raise UnsupportedSettingError(
            "the primal is not differentiable when mu = 0; use prox_point / moreau_grad")
    cfg = cfg or DEFAULT_INNER
    x = np.asarray(x, dtype=float)
    y, _, _, _ = _ascend(objective, x, cfg, y0=None if y0 is None else np.atleast_2d(y0))
    gx = objective.value_grad(np.atleast_2d(x), y)[1]
    if x.ndim == 1:
        gx, y = gx[0], y[0]
    return (gx, y) if return_y else gx


def mapping_from_gradient(x, grad, L_tilde: float, domain: ConvexDomain):
    """Gradient mapping ``L~ (x - proj_X(x - grad / L~))``."""
    x = np.asarray(x, dtype=float)
    return L_tilde * (x - domain.project(x - np.asarray(grad, dtype=float) / L_tilde))


def gradient_mapping(objective: Objective, x, cfg: Optional[InnerSolveConfig] = None):
    """Gradient mapping of the primal with the registry's ``L~ = L(1 + kappa)``."""
    g = primal_grad_ncsc(objective, x, cfg)
    return mapping_from_gradient(x, g, objective.constants.L_tilde, objective.x_domain)


# --- proximal point / Moreau envelope -------------------------------------


@dataclass(frozen=True, eq=False)
class ProxResult:
    """Proximal point of ``lam * Phi`` at ``x`` with its solve certificate.

    ``residual`` bounds the distance from ``prox_point`` to the exact
    proximal point (from the duality gap and strong convexity).
    """

    x: np.ndarray
    prox_point: np.ndarray
    lam: float
    residual: float
    iterations: int
    envelope: object

    @property
    def moreau_grad(self) -> np.ndarray:
        return (self.x - self.prox_point) / self.lam

    def to_dict(self) -> dict:
        return {"x": np.asarray(self.x).tolist(), "prox_point": np.asarray(self.prox_point).tolist(),
                "moreau_grad": np.asarray(self.moreau_grad).tolist(), "lambda": self.lam,
                "residual": self.residual, "iterations": self.iterations,
                "envelope": np.asarray(self.envelope).tolist()}


def default_lambda(objective: Objective) -> float:
    return 1.0 / (2.0 * objective.L)


def _min_z(objective, x, y, lam, z, tol, max_iterations):
    """Minimize ``F(z, y) + ||z - x||^2 / (2 lam)`` over X for fixed ``y`` (batched)."""
    X = objective.x_domain
    m = 1.0 / lam - objective.L
    step = 1.0 / (objective.L + 1.0 / lam)
    active = np.ones(len(z), dtype=bool)
    z = z.copy()
    for _ in range(max_iterations):
        idx = np.flatnonzero(active)
        za = z[idx]
        gx = objective.value_grad(za, y[idx])[1] + (za - x[idx]) / lam
        zn = X.project(za - step * gx)
        z[idx] = zn
        cert = 2.0 * np.sqrt(_sqnorm(zn - za)) / step / m
        active[idx[cert <= tol]] = False
        if not active.any():
            return z
    raise ConvergenceError("prox subproblem in z did not converge", float(np.max(cert)),
                           max_iterations)


def prox_point(objective: Objective, x, lam: Optional[float] = None,
               cfg: Optional[InnerSolveConfig] = None,
               primal: Optional[Callable] = None) -> ProxResult:
    """``argmin_{z in X} Phi(z) + ||z - x||^2 / (2 lam)`` with ``Phi(z) = max_y F(z, y)``.

    The prox problem is the saddle problem ``min_z max_y F(z, y) + ||z-x||^2/(2 lam)``,
    strongly convex in ``z`` with modulus ``m = 1/lam - L``. It is solved
    through its dual ``psi(y) = min_z ...``: projected gradient ascent on
    ``psi`` (which is ``L(1 + L/m)``-smooth), each step re-solving the
    strongly convex ``z`` subproblem. This converges even when ``Phi`` has
    kinks (``mu = 0``), where descent on ``z`` with Danskin subgradients stalls.

    Stopping uses the duality gap ``h(z) - psi(y)`` where ``h`` is the prox
    objective: ``||z - prox|| <= sqrt(2 gap / m) <= cfg.tolerance``. ``primal``
    optionally supplies ``Phi`` directly for the gap (else ``inner_max``).
    Roundoff in the gap puts a floor near ``sqrt(eps_mach * |Phi| / m)``, about
    1e-8, on tolerances that can be certified.
    """
    cfg = cfg or DEFAULT_PROX
    L = objective.L
    lam = default_lambda(objective) if lam is None else float(lam)
    if not (lam > 0 and lam * L < 1):
        raise ArgumentError(
            f"lambda={lam} must lie in (0, 1/L) = (0, {1 / L:.6g}) for the primal, which is "
            "only L-weakly convex, to have a well-defined proximal point")
    x_in = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x_in)):
        raise ArgumentError("prox center must be finite")
    x = np.atleast_2d(x_in)
    k = x.shape[0]
    X, Y = objective.x_domain, objective.y_domain
    m = 1.0 / lam - L
    dual_step = 1.0 / (L * (1.0 + L / m))
    tol = cfg.tolerance
    z_tol = 1e-2 * tol
    # the gap must be resolved to m tol^2 / 2; leave two orders of headroom
    phi_cfg = replace(cfg, tolerance=max(1e-2 * 0.5 * m * tol * tol, 1e-15),
                      step_rule="backtracking")

    def phi(zs, ys):
        if primal is not None:
            return np.asarray(primal(zs), dtype=float)
        # at the saddle point the dual iterate maximizes F(z*, .), so warm-start there
        return _ascend(objective, zs, phi_cfg, certify="value", y0=ys)[1]

    z = X.project(x)
    y = Y.project(np.zeros((k, Y.dim)))
    res = np.full(k, np.inf)
    env = np.zeros(k)
    active = np.ones(k, dtype=bool)
    it = 0
    while active.any():
        it += 1
        if it > cfg.max_iterations:
            raise ConvergenceError("prox solve did not certify", float(res.max()), it - 1)
        idx = np.flatnonzero(active)
        xa, ya = x[idx], y[idx]
        za = _min_z(objective, xa, ya, lam, z[idx], z_tol, cfg.max_iterations)
        v, _, gy = objective.value_grad(za, ya)
        phi_z = phi(za, ya)
        gap = np.maximum(phi_z - v, 0.0)
        z[idx] = za
        env[idx] = phi_z + _sqnorm(za - xa) / (2 * lam)
        res[idx] = np.sqrt(2 * gap / m)
        done = res[idx] <= tol
        y[idx] = np.where(done[:, None], ya, Y.project(ya + dual_step * gy))
        active[idx[done]] = False
    if x_in.ndim == 1:
        return ProxResult(x_in, z[0], lam, float(res[0]), it, float(env[0]))
    return ProxResult(x_in, z, lam, float(res.max()), it, env)


def moreau_grad(objective: Objective, x, lam: Optional[float] = None,
                cfg: Optional[InnerSolveConfig] = None, primal: Optional[Callable] = None):
    """``grad Phi^lam(x) = (x - prox_{lam Phi}(x)) / lam``; ``lam`` defaults to ``1/(2L)``."""
    return prox_point(objective, x, lam, cfg, primal).moreau_grad


def regularized_primal(objective: Objective, nu: float) -> Objective:
    """The objective ``F(x, y) - (nu/2)||y||^2``: ``mu -> mu + nu``, ``L -> L + nu``."""
    if not nu > 0:
        raise ArgumentError("regularization nu must be positive")
    return replace(objective, nu=objective.nu + float(nu),
                   label=f"{objective.label}+reg({nu:g})")


# --- exhaustive grid oracles ----------------------------------------------


def _grid(domain: ConvexDomain, resolution: float, cap: int) -> np.ndarray:
    if not resolution > 0:
        raise ArgumentError("grid resolution must be positive")
    if domain.dim > 3:
        raise ArgumentError("grid oracles support dimension <= 3")
    box = domain.bounding_box()
    counts = [int(math.ceil((hi - lo) / resolution - 1e-9)) + 1
              for lo, hi in zip(box.lower, box.upper)]
    total = math.prod(counts)
    if total > cap:
        raise CapacityError(total, cap)
    axes = [np.linspace(lo, hi, c) for lo, hi, c in zip(box.lower, box.upper, counts)]
    pts = np.stack([g.reshape(-1) for g in np.meshgrid(*axes, indexing="ij")], axis=1)
    if domain.kind == "ball":
        pts = pts[domain.contains(pts)]
    return pts


def brute_force_max_grid(domain: ConvexDomain, function: Callable, resolution: float,
                         cap: int = GRID_CAP):
    """Exhaustive maximization of a batched ``function`` on a uniform grid.

    Grid axes run from the lower to the upper bound with spacing at most
    ``resolution``; ties resolve to the first grid point in C order.
    """
    pts = _grid(domain, resolution, cap)
    best_val, best_pt = -np.inf, None
    for start in range(0, len(pts), 1 << 16):
        chunk = pts[start:start + (1 << 16)]
        vals = np.asarray(function(chunk), dtype=float)
        j = int(np.argmax(vals))
        if vals[j] > best_val:
            best_val, best_pt = float(vals[j]), chunk[j]
    return best_pt.copy(), best_val


def brute_force_prox_grid(objective: Objective, x, lam: float, resolution: float,
                          primal: Optional[Callable] = None, cap: int = GRID_CAP):
    """Grid minimizer of ``Phi(z) + ||z - x||^2 / (2 lam)``; ``Phi`` defaults to the closed form."""
    primal = primal or objective.primal
    x = np.asarray(x, dtype=float)

    def neg(z):
        return -(primal(z) + _sqnorm(z - x) / (2 * lam))

    return brute_force_max_grid(objective.x_domain, neg, resolution, cap)[0]


# --- subdifferential for the closed-form concave family -------------------


def subgradient_distance(objective: Objective, z, kink_tol: float = 1e-6) -> float:
    """``dist(0, dPhi(z))`` for a ``mu = 0`` affine-coupled objective with ball ``Y``.

    ``Phi(z) = a s(z) + R ||B z + b||``; within ``kink_tol`` of the kink
    ``B z + b = 0`` the subdifferential is ``a grad s(z) + B^T (R * unit ball)``.
    """
    inst = objective.instance
    if objective.mu != 0 or inst.y_domain.kind != "ball":
        raise UnsupportedSettingError("closed-form subdifferential needs mu = 0 and a ball Y")
    z = np.asarray(z, dtype=float)
    R = inst.y_domain.radius
    g0 = objective.param[0] * inst._s_grad(z)
    v = z @ inst.B.T + objective.param[1:]
    nv = np.linalg.norm(v)
    if nv > kink_tol:
        return float(np.linalg.norm(g0 + R * inst.B.T @ (v / nv)))
    # min over ||u|| <= R of ||g0 + B^T u|| by projected gradient
    B = inst.B
    step = 1.0 / max(np.linalg.norm(B, 2) ** 2, 1e-300)
    u = np.zeros(B.shape[0])
    for _ in range(20_000):
        r = g0 + B.T @ u
        u_new = u - step * (B @ r)
        nu_ = np.linalg.norm(u_new)
        if nu_ > R:
            u_new *= R / nu_
        if np.linalg.norm(u_new - u) < 1e-14:
            u = u_new
            break
        u = u_new
    return float(np.linalg.norm(g0 + B.T @ u))
