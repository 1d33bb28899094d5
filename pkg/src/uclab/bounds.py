"""Closed-form bounds, sample-size calculators and plug-in complexity counts.

Wherever a rate is stated only up to ``O(.)`` around an otherwise explicit
expression, the hidden constant is taken to be 1. Sample sizes are rounded
up to integers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .domains import grid_counts
from .errors import ArgumentError, UnsupportedSettingError

LAMBDA_GUARD = 1e-9


def _need_mu(mu):
    if not mu > 0:
        raise UnsupportedSettingError("this bound requires strong concavity (mu > 0)")


def _need_n(n):
    if n < 1:
        raise ArgumentError(f"sample size must be at least 1, got {n}")


def _need_positive(**kw):
    for name, v in kw.items():
        if not (v > 0 and math.isfinite(v)):
            raise ArgumentError(f"{name} must be positive and finite, got {v}")


def stability_y_bound(G: float, mu: float, n: int) -> float:
    """Replace-one stability of the empirical maximizer: ``4G / (mu n)``."""
    _need_mu(mu)
    _need_n(n)
    return 4.0 * G / (mu * n)


def erm_gap_bound(G: float, mu: float, n: int) -> float:
    """Expected population suboptimality of the empirical maximizer: ``4G^2 / (mu n)``."""
    _need_mu(mu)
    _need_n(n)
    return 4.0 * G * G / (mu * n)


def expected_grad_diff_bound(G: float, L: float, mu: float, n: int) -> float:
    """``E||grad Phi(x) - grad Phi_S(x)|| <= G/sqrt(n) + L sqrt(8 G^2 / (mu^2 n))`` at a fixed x."""
    _need_mu(mu)
    _need_n(n)
    return G / math.sqrt(n) + L * math.sqrt(8.0 * G * G / (mu * mu * n))


def prox_reg_bound(nu: float, D_Y: float, lam: float, L: float) -> float:
    """Distance between proximal points of the primal and its ``nu``-regularized version:
    ``sqrt(nu D_Y lam / (1 - lam (L + nu)))``."""
    if nu < 0:
        raise ArgumentError("nu must be nonnegative")
    if not lam > 0:
        raise ArgumentError("lambda must be positive")
    denom = 1.0 - lam * (L + nu)
    if denom <= LAMBDA_GUARD:
        raise ArgumentError(f"lambda={lam} must satisfy lambda < 1/(L + nu) = {1 / (L + nu):.6g}")
    return math.sqrt(nu * D_Y * lam / denom)


def subgaussian_variance_proxy_ncsc(L: float, G: float, mu: float, n: int) -> float:
    """Variance proxy ``(2 L G / mu + G)^2 / n`` of the centered gradient deviation."""
    _need_mu(mu)
    _need_n(n)
    return (2.0 * L * G / mu + G) ** 2 / n


def sample_size_ncsc(d: int, eps: float, L: float, mu: float, G: float) -> int:
    """``ceil(2 d eps^-2 (2 L G/mu + G)^2 log(4 L (1 + kappa) / eps))``.

    >>> sample_size_ncsc(1, 1.0, 1.0, 1.0, 1.0)
    38
    """
    _need_mu(mu)
    _need_positive(eps=eps, L=L, G=G)
    if d < 1:
        raise ArgumentError("dimension must be positive")
    kappa = L / mu
    log_arg = 4.0 * L * (1.0 + kappa) / eps
    if log_arg <= 1.0:
        raise ArgumentError(
            f"eps={eps} too large: 4 L (1 + kappa) / eps = {log_arg:.4g} must exceed 1")
    return math.ceil(2.0 * d * (2.0 * L * G / mu + G) ** 2 * math.log(log_arg) / eps**2)


@dataclass(frozen=True)
class NccSamplePlan:
    """All quantities behind the concave-case sample size.

    ``budget`` holds the four error terms at the returned ``n``; they sum to
    at most ``eps``.
    """

    n: int
    nu: float
    lam: float
    upsilon: float
    Q: int
    log_Q: float
    L_hat_x: float
    L_hat_y: float
    budget: dict = field(default_factory=dict)


def ncc_sample_plan(d: int, eps: float, L: float, G: float, D_X: float, D_Y: float,
                    width: float | None = None) -> NccSamplePlan:
    """Parameter choice making every term of the concave-case bound small.

    With ``lam = 1/(2L)``, ``upsilon = eps/(32L)`` and ``nu = eps^2/(64 L D_Y)``
    the bound on ``E max_x ||grad Phi_S^lam(x) - grad Phi^lam(x)||`` reads::

        2 sqrt(4 L nu D_Y)                                    (= eps/2)
      + 4 L sqrt(log(Q)/(2n) (Lx^2/L^2 + Ly^2/(nu L)))        (<= eps/8)
      + 2 L sqrt(4 sqrt(2)/(L n) (Lx^2/L + Ly^2/nu))          (<= eps/8)
      + eps/4

    where ``Lx = G + 4 L sqrt(D_X)``, ``Ly = G + nu sqrt(D_Y)``, and ``Q`` is
    the size of the ``upsilon`` grid over the box of side ``width``
    (default ``2 sqrt(D_X)``, which contains any X with ``||x||^2 <= D_X``).
    ``n`` is the smallest integer meeting both middle-term budgets.
    """
    _need_positive(eps=eps, L=L, G=G, D_X=D_X, D_Y=D_Y)
    if d < 1:
        raise ArgumentError("dimension must be positive")
    width = 2.0 * math.sqrt(D_X) if width is None else float(width)
    lam = 1.0 / (2.0 * L)
    upsilon = eps / (32.0 * L)
    nu = eps**2 / (64.0 * L * D_Y)
    per_axis = int(grid_counts([width] * d, upsilon)[0])
    log_Q = d * math.log(per_axis)
    L_hat_x = G + 4.0 * L * math.sqrt(D_X)
    L_hat_y = G + nu * math.sqrt(D_Y)
    a_term = L_hat_x**2 / L**2 + L_hat_y**2 / (nu * L)
    b_term = L_hat_x**2 / L + L_hat_y**2 / nu
    n_net = 512.0 * L**2 * log_Q * a_term / eps**2
    n_exp = 1024.0 * math.sqrt(2.0) * L * b_term / eps**2
    n = max(1, math.ceil(max(n_net, n_exp)))
    budget = {
        "regularization": 2.0 * math.sqrt(4.0 * L * nu * D_Y),
        "net_concentration": 4.0 * L * math.sqrt(log_Q / (2.0 * n) * a_term),
        "expectation": 2.0 * L * math.sqrt(4.0 * math.sqrt(2.0) / (L * n) * b_term),
        "net_discretization": eps / 4.0,
    }
    return NccSamplePlan(n=n, nu=nu, lam=lam, upsilon=upsilon, Q=per_axis**d, log_Q=log_Q,
                         L_hat_x=L_hat_x, L_hat_y=L_hat_y, budget=budget)


def sample_size_ncc(d: int, eps: float, L: float, G: float, D_X: float, D_Y: float,
                    width: float | None = None) -> int:
    """Sample size for eps-uniform convergence of Moreau gradients when ``mu = 0``."""
    return ncc_sample_plan(d, eps, L, G, D_X, D_Y, width).n


# --- plug-in gradient complexity ------------------------------------------


@dataclass(frozen=True)
class ComplexityTemplate:
    """Gradient complexity of a finite-sum solver as a sum of monomials
    ``coef * n^a * eps^b * kappa^c``."""

    name: str
    terms: tuple

    def evaluate(self, n: float, eps: float, kappa: float = 1.0) -> float:
        return sum(c * n**a * eps**b * kappa**k for c, a, b, k in self.terms)


TEMPLATES = {
    "sqrt_n": ComplexityTemplate("sqrt_n", ((1.0, 0.5, -2.0, 0.0),)),
    "sreda_finite_sum": ComplexityTemplate("sreda_finite_sum", ((1.0, 0.5, -2.0, 2.0),)),
    "catalyst_svrg_ncsc": ComplexityTemplate("catalyst_svrg_ncsc", ((1.0, 0.75, -2.0, 0.5),)),
    "catalyst_svrg_ncc": ComplexityTemplate("catalyst_svrg_ncc",
                                            ((1.0, 0.75, -3.0, 0.0), (1.0, 1.0, -2.0, 0.0))),
}


def induced_gradient_complexity(n_star: float, eps: float, template, multiplier: float = 1.0,
                                kappa: float = 1.0) -> float:
    """Evaluate ``template`` at ``n = multiplier * n_star``.

    ``template`` is a :class:`ComplexityTemplate`, a key of :data:`TEMPLATES`,
    or a sequence of ``(coef, n_exp, eps_exp, kappa_exp)`` terms.
    """
    if n_star < 1:
        raise ArgumentError("n_star must be at least 1")
    if isinstance(template, str):
        template = TEMPLATES[template]
    elif not isinstance(template, ComplexityTemplate):
        template = ComplexityTemplate("custom", tuple(tuple(t) for t in template))
    return template.evaluate(multiplier * n_star, eps, kappa)


def ncsc_population_complexity(d, eps, L, mu, G, template="sreda_finite_sum") -> float:
    """Gradient count to reach an eps-stationary population point: solve the
    empirical problem with ``n = 4 n*`` to accuracy ``eps/2``."""
    n_star = sample_size_ncsc(d, eps, L, mu, G)
    return induced_gradient_complexity(n_star, eps / 2.0, template, multiplier=4.0,
                                       kappa=L / mu)


def ncc_population_complexity(d, eps, L, G, D_X, D_Y, template="catalyst_svrg_ncc") -> float:
    """As :func:`ncsc_population_complexity` for ``mu = 0`` with ``n = 16 n*``."""
    n_star = sample_size_ncc(d, eps, L, G, D_X, D_Y)
    return induced_gradient_complexity(n_star, eps / 2.0, template, multiplier=16.0)
