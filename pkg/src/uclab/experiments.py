"""Monte Carlo measurement of uniform convergence and the inequality verifiers.

The expectation over datasets is estimated by a mean over replications and
the supremum over X by a maximum over a covering net. The net maximum is a
lower bound on the true supremum; the additive smoothness correction that
turns it into an upper bound is reported alongside, never added in.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import Callable, Optional

import numpy as np
from scipy import stats

from . import bounds
from .domains import CoveringNet, covering_net, subsampled_net
from .errors import ConfigurationError, ReplicateError, UclabError, UnsupportedSettingError
from .oracles import (DEFAULT_INNER, DEFAULT_PROX, InnerSolveConfig, mapping_from_gradient,
                      primal_grad_ncsc, primal_value, prox_point, regularized_primal,
                      brute_force_prox_grid)
from .problems import Dataset, MinimaxInstance, Objective, derive_seed, make_instance, \
    replicate_seed

ORACLES = ("closed_form", "iterative")

# stream tags for seeds derived from base_seed outside the replicate scheme
_NET_STREAM = 0x4E37
_STABILITY_STREAM = 0x57AB
_TAIL_STREAM = 0x7A11
_POINT_STREAM = 0x9015


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything an experiment needs; a pure function of these fields.

    ``family`` is an instance spec for :func:`~uclab.problems.make_instance`.
    Exactly one of ``net_radius`` (exact covering grid) and ``net_subsample``
    (seeded uniform points, no covering guarantee) is used; ``net_radius``
    wins when both are set. ``lam=None`` means ``1/(2L)``. With ``target_eps``
    set, curve metadata also records the net radius the proof would prescribe
    for that accuracy (``theory_upsilon``); it is informational only.
    """

    family: dict
    net_radius: Optional[float] = None
    net_subsample: Optional[int] = None
    n_schedule: tuple = (64, 256, 1024, 4096)
    replications: int = 50
    base_seed: int = 0
    inner: InnerSolveConfig = DEFAULT_INNER
    prox: InnerSolveConfig = DEFAULT_PROX
    lam: Optional[float] = None
    nu_grid: tuple = (1e-1, 1e-2, 1e-3)
    slack: float = 1.05
    threads: int = 1
    oracle: str = "closed_form"
    target_eps: Optional[float] = None
    trials: int = 1000
    points: int = 20
    draws: int = 1000
    solver_steps: int = 300
    grid_resolution: Optional[float] = 1e-3
    point_spread: float = 1.0
    x_point: Optional[tuple] = None
    rate_band: Optional[tuple] = None
    max_slope_std_error: Optional[float] = None
    monotone_sigmas: Optional[float] = None

    def __post_init__(self):
        sched = tuple(int(n) for n in self.n_schedule)
        object.__setattr__(self, "n_schedule", sched)
        object.__setattr__(self, "nu_grid", tuple(float(v) for v in self.nu_grid))
        if self.x_point is not None:
            object.__setattr__(self, "x_point", tuple(float(v) for v in self.x_point))
        if self.rate_band is not None:
            object.__setattr__(self, "rate_band", tuple(None if v is None else float(v)
                                                        for v in self.rate_band))
        if isinstance(self.inner, dict):
            object.__setattr__(self, "inner", InnerSolveConfig(**self.inner))
        if isinstance(self.prox, dict):
            object.__setattr__(self, "prox", InnerSolveConfig(**self.prox))
        if not sched or sched[0] < 1 or any(b <= a for a, b in zip(sched, sched[1:])):
            raise ConfigurationError(f"n_schedule must be strictly increasing positive integers, "
                                     f"got {list(sched)}")
        if self.replications < 2:
            raise ConfigurationError("replications must be at least 2 for a standard error")
        if not self.slack >= 1:
            raise ConfigurationError(f"slack must be >= 1, got {self.slack}")
        if self.threads < 1:
            raise ConfigurationError("threads must be at least 1")
        if self.oracle not in ORACLES:
            raise ConfigurationError(f"oracle must be one of {ORACLES}")
        if self.net_radius is not None and not self.net_radius > 0:
            raise ConfigurationError("net_radius must be positive")
        if self.lam is not None and not self.lam > 0:
            raise ConfigurationError("lam must be positive")
        for name in ("trials", "points", "draws", "solver_steps"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be at least 1")
        if not 0 < self.point_spread <= 1:
            raise ConfigurationError("point_spread must lie in (0, 1]")
        if self.rate_band is not None:
            if len(self.rate_band) != 2:
                raise ConfigurationError("rate_band must be [low, high]")
            lo, hi = self.rate_band
            if lo is not None and hi is not None and lo > hi:
                raise ConfigurationError("rate_band must be [low, high] with low <= high")

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigurationError(f"unknown configuration field(s): {', '.join(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict:
        out = asdict(self)
        for name in ("n_schedule", "nu_grid", "x_point", "rate_band"):
            if out[name] is not None:
                out[name] = list(out[name])
        return out

    def instance(self) -> MinimaxInstance:
        return make_instance(self.family)

    def probe_points(self, instance: MinimaxInstance) -> np.ndarray:
        """``points`` seeded draws from X shrunk by ``point_spread`` toward its center."""
        return random_interior_points(instance, self.points, self.base_seed, self.point_spread)

    def probe_point(self, instance: MinimaxInstance) -> np.ndarray:
        """``x_point`` if given, else one seeded draw from X (fixed before any data)."""
        if self.x_point is not None:
            x = np.asarray(self.x_point, dtype=float)
            if x.shape != (instance.d,) or not instance.x_domain.contains(x):
                raise ConfigurationError(f"x_point must be a point of X with {instance.d} entries")
            return x
        return random_interior_points(instance, 1, self.base_seed, self.point_spread)[0]

    def net(self, instance: MinimaxInstance) -> CoveringNet:
        if self.net_radius is None and self.net_subsample is None:
            raise ConfigurationError("set net_radius or net_subsample")
        if self.net_radius is not None:
            return covering_net(instance.x_domain, self.net_radius)
        return subsampled_net(instance.x_domain, self.net_subsample,
                              derive_seed(self.base_seed, _NET_STREAM))


@dataclass(frozen=True)
class CurveRow:
    n: int
    mean: float
    std_error: float
    solver_budget: int


@dataclass(frozen=True, eq=False)
class ConvergenceCurve:
    """Mean net-sup deviation per sample size.

    ``values[i]`` holds the per-replicate sups for ``rows[i]``, in replicate
    order. ``correction`` is the additive term bounding the gap between the
    net maximum and the true supremum.
    """

    kind: str
    rows: tuple
    values: tuple
    correction: float
    net_count: int
    net_radius: float
    approximate: bool
    metadata: dict = field(default_factory=dict)

    @property
    def n(self) -> np.ndarray:
        return np.array([r.n for r in self.rows])

    @property
    def means(self) -> np.ndarray:
        return np.array([r.mean for r in self.rows])

    @property
    def std_errors(self) -> np.ndarray:
        return np.array([r.std_error for r in self.rows])


@dataclass(frozen=True)
class RateFit:
    """Least-squares line through ``(log n, log mean)``."""

    slope: float
    intercept: float
    slope_std_error: float

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class VerificationReport:
    """Verdict of an inequality check with its worst observed ratio.

    ``worst_ratio`` is the largest ``observed / bound`` seen; the check
    passes when it does not exceed ``slack`` (verifiers that compare against
    Monte Carlo bands document their own ratio in ``details``).
    """

    name: str
    passed: bool
    worst_ratio: float
    slack: float
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": bool(self.passed),
                "worst_ratio": float(self.worst_ratio), "slack": float(self.slack),
                "details": self.details}


# --- helpers --------------------------------------------------------------


def _parallel_map(fn: Callable, tasks: list, threads: int) -> list:
    """Ordered map; results come back in task order regardless of scheduling."""
    if threads <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, tasks))


def _tagged(fn: Callable) -> Callable:
    def run(task):
        n, r = task
        try:
            return fn(n, r)
        except UclabError as exc:
            if isinstance(exc, ReplicateError):
                raise
            raise ReplicateError(n, r, exc) from exc
    return run


def _primal_grad(objective: Objective, x, cfg: ExperimentConfig):
    if cfg.oracle == "closed_form":
        return objective.primal_grad(x)
    return primal_grad_ncsc(objective, x, cfg.inner)


def _lambda(cfg: ExperimentConfig, instance: MinimaxInstance) -> float:
    return cfg.lam if cfg.lam is not None else 1.0 / (2.0 * instance.constants.L)


def _require_mu(instance: MinimaxInstance, positive: bool):
    if positive and not instance.mu > 0:
        raise UnsupportedSettingError(f"{instance.family} has mu = 0; this experiment needs mu > 0")
    if not positive and instance.mu != 0:
        raise UnsupportedSettingError(f"{instance.family} has mu > 0; this experiment needs mu = 0")


def _curve(kind, cfg, values_by_n, budget, correction, net, metadata) -> ConvergenceCurve:
    rows, values = [], []
    R = cfg.replications
    for n, vals in zip(cfg.n_schedule, values_by_n):
        vals = np.asarray(vals, dtype=float)
        rows.append(CurveRow(n, float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(R)),
                             int(budget)))
        values.append(tuple(float(v) for v in vals))
    return ConvergenceCurve(kind, tuple(rows), tuple(values), float(correction), net.count,
                            float(net.radius), net.approximate, metadata)


def _replicates(cfg: ExperimentConfig, fn: Callable) -> list:
    tasks = [(n, r) for n in cfg.n_schedule for r in range(cfg.replications)]
    flat = _parallel_map(_tagged(fn), tasks, cfg.threads)
    R = cfg.replications
    return [flat[i * R:(i + 1) * R] for i in range(len(cfg.n_schedule))]


# --- uniform convergence curves -------------------------------------------


def estimate_uniform_convergence_ncsc(cfg: ExperimentConfig) -> ConvergenceCurve:
    """``E max_k ||grad Phi(x_k) - grad Phi_S(x_k)||`` over the net, per ``n``.

    The correction ``2 L~ upsilon`` bounds how much the true supremum over X
    can exceed the net maximum (both gradients are ``L~``-Lipschitz).
    """
    instance = cfg.instance()
    _require_mu(instance, True)
    net = cfg.net(instance)
    pop_grad = _primal_grad(instance.population(), net.points, cfg)

    def one(n, r):
        S = instance.draw(replicate_seed(cfg.base_seed, n, r), n)
        g = _primal_grad(instance.empirical(S), net.points, cfg)
        return float(np.max(np.linalg.norm(pop_grad - g, axis=1)))

    values = _replicates(cfg, one)
    c = instance.constants
    correction = 2.0 * c.L_tilde * net.radius if not net.approximate else float("nan")
    meta = {"constants": c.to_dict(), "net_count": net.count, "net_radius": net.radius,
            "oracle": cfg.oracle}
    if cfg.target_eps is not None:
        meta["theory_upsilon"] = cfg.target_eps / (4.0 * c.L_tilde)
    budget = 0 if cfg.oracle == "closed_form" else cfg.inner.max_iterations
    return _curve("ncsc", cfg, values, budget, correction, net, meta)


def estimate_uniform_convergence_ncc(cfg: ExperimentConfig) -> ConvergenceCurve:
    """``E max_k lam^-1 ||prox_{lam Phi}(x_k) - prox_{lam Phi_S}(x_k)||`` over the net.

    Proximal points are computed by :func:`~uclab.oracles.prox_point`; with
    ``oracle="closed_form"`` the closed-form primal is used for its duality
    gap. The correction is ``2 upsilon / (lam (1 - lam L))``, from the
    Lipschitz constant of the proximal map.
    """
    instance = cfg.instance()
    _require_mu(instance, False)
    net = cfg.net(instance)
    lam = _lambda(cfg, instance)
    pop = instance.population()
    closed = cfg.oracle == "closed_form"
    pop_prox = prox_point(pop, net.points, lam, cfg.prox,
                          primal=pop.primal if closed else None).prox_point

    def one(n, r):
        S = instance.draw(replicate_seed(cfg.base_seed, n, r), n)
        emp = instance.empirical(S)
        res = prox_point(emp, net.points, lam, cfg.prox, primal=emp.primal if closed else None)
        return float(np.max(np.linalg.norm(pop_prox - res.prox_point, axis=1)) / lam)

    values = _replicates(cfg, one)
    c = instance.constants
    denom = 1.0 - lam * c.L
    correction = 2.0 * net.radius / (lam * denom) if not net.approximate else float("nan")
    meta = {"constants": c.to_dict(), "lambda": lam, "net_count": net.count,
            "net_radius": net.radius, "oracle": cfg.oracle,
            "prox_tolerance": cfg.prox.tolerance}
    if cfg.target_eps is not None:
        meta["theory_upsilon"] = cfg.target_eps * lam * denom / 8.0
    return _curve("ncc", cfg, values, cfg.prox.max_iterations, correction, net, meta)


def fit_rate(curve) -> RateFit:
    """Ordinary least squares of ``log mean`` on ``log n``.

    Accepts a :class:`ConvergenceCurve` or a sequence of ``(n, mean)`` pairs.
    The slope standard error uses the residual variance with ``m - 2``
    degrees of freedom.
    """
    if isinstance(curve, ConvergenceCurve):
        n, means = curve.n, curve.means
    else:
        pairs = np.asarray(curve, dtype=float)
        n, means = pairs[:, 0], pairs[:, 1]
    if len(n) < 3:
        raise ConfigurationError("a rate fit needs at least 3 sample sizes")
    if np.any(means <= 0):
        raise ConfigurationError("a rate fit needs strictly positive means")
    res = stats.linregress(np.log(n), np.log(means))
    return RateFit(float(res.slope), float(res.intercept), float(res.stderr))


# --- verifiers ------------------------------------------------------------


def verify_rate(curve: ConvergenceCurve, fit: RateFit, band=None, max_std_error=None,
                monotone_sigmas: Optional[float] = None) -> VerificationReport:
    """Gate a measured curve on its fitted slope and, optionally, monotonicity.

    ``band`` is ``(low, high)`` for the slope, either end may be ``None``;
    ``monotone_sigmas = k`` requires
    ``mean[i+1] <= mean[i] + k * sqrt(se[i]^2 + se[i+1]^2)`` for each step.
    ``worst_ratio`` is 0 when every requested check holds and 1 otherwise;
    the individual margins are in ``details``.
    """
    checks = {}
    if band is not None:
        lo = -math.inf if band[0] is None else band[0]
        hi = math.inf if band[1] is None else band[1]
        checks["slope_in_band"] = bool(lo <= fit.slope <= hi)
    if max_std_error is not None:
        checks["slope_std_error_ok"] = bool(fit.slope_std_error <= max_std_error)
    excess = []
    if monotone_sigmas is not None:
        m, se = curve.means, curve.std_errors
        allow = monotone_sigmas * np.sqrt(se[:-1] ** 2 + se[1:] ** 2)
        excess = (m[1:] - m[:-1] - allow).tolist()
        checks["nonincreasing"] = bool(all(e <= 0 for e in excess))
    passed = all(checks.values())
    return VerificationReport(
        "rate", passed, 0.0 if passed else 1.0, 1.0,
        {"slope": fit.slope, "slope_std_error": fit.slope_std_error,
         "band": None if band is None else list(band), "max_slope_std_error": max_std_error,
         "monotone_sigmas": monotone_sigmas, "monotone_excess": excess, "checks": checks})


def verify_stability(instance: MinimaxInstance, x, n: int, trials: int, seed: int,
                     slack: float = 1.05, oracle: str = "closed_form",
                     inner: InnerSolveConfig = DEFAULT_INNER) -> VerificationReport:
    """Replace-one stability of the empirical maximizer against ``4G/(mu n)``.

    Each trial draws ``S``, swaps a uniformly chosen sample for a fresh one,
    and compares the two maximizers ``y*_S(x)`` and ``y*_{S^(i)}(x)``.
    """
    _require_mu(instance, True)
    x = np.asarray(x, dtype=float)
    bound = bounds.stability_y_bound(instance.constants.G, instance.mu, n)
    pick = np.random.default_rng(derive_seed(seed, _STABILITY_STREAM, n))

    def argmax(S: Dataset):
        obj = instance.empirical(S)
        if oracle == "closed_form":
            return obj.argmax_y(x)
        from .oracles import inner_max
        return inner_max(obj, x, inner)[0]

    devs = np.empty(trials)
    for t in range(trials):
        S = instance.draw(derive_seed(seed, n, t), n)
        i = int(pick.integers(n))
        fresh = instance.sample(derive_seed(seed, n, t, 1), 0)
        devs[t] = np.linalg.norm(argmax(S) - argmax(S.replace(i, fresh)))
    ratios = devs / bound
    worst = float(ratios.max())
    return VerificationReport(
        "stability", worst <= slack, worst, slack,
        {"n": n, "trials": trials, "bound": bound, "max_deviation": float(devs.max()),
         "mean_deviation": float(devs.mean()), "violations": int(np.sum(ratios > slack))})


def verify_prox_reg_lemma(instance: MinimaxInstance, x_list, nu_list, lam: float,
                          cfg: InnerSolveConfig = DEFAULT_PROX, slack: float = 1.05,
                          grid_resolution: Optional[float] = None) -> VerificationReport:
    """Squared distance between proximal points of ``Phi`` and of its
    ``nu``-regularized version against ``nu D_Y lam / (1 - lam (L + nu))``.

    With ``grid_resolution`` set (d <= 3) every computed proximal point is
    also compared to an exhaustive grid minimizer; the check allows
    ``resolution + solver residual``.
    """
    _require_mu(instance, False)
    c = instance.constants
    pop = instance.population()
    xs = np.atleast_2d(np.asarray(x_list, dtype=float))
    if lam * (c.L + max(nu_list)) >= 1:
        raise ConfigurationError(f"lambda={lam} must be below 1/(L + max nu)")
    base = prox_point(pop, xs, lam, cfg, primal=pop.primal)
    records, worst, grid_worst = [], 0.0, 0.0
    grid_ok = True

    def grid_check(obj, res):
        nonlocal grid_ok, grid_worst
        for j, xj in enumerate(xs):
            z_grid = brute_force_prox_grid(obj, xj, lam, grid_resolution)
            gap = float(np.linalg.norm(z_grid - res.prox_point[j]))
            allowed = grid_resolution + res.residual
            grid_worst = max(grid_worst, gap / allowed)
            grid_ok &= gap <= allowed

    if grid_resolution is not None:
        grid_check(pop, base)
    for nu in nu_list:
        bound_sq = bounds.prox_reg_bound(nu, c.D_Y, lam, c.L) ** 2
        if nu == 0:
            sq = np.zeros(len(xs))
        else:
            reg = regularized_primal(pop, nu)
            res = prox_point(reg, xs, lam, cfg, primal=reg.primal)
            sq = np.sum((res.prox_point - base.prox_point) ** 2, axis=1)
            if grid_resolution is not None:
                grid_check(reg, res)
        ratio = sq / bound_sq if bound_sq > 0 else np.where(sq > 0, np.inf, 0.0)
        worst = max(worst, float(ratio.max()))
        records.append({"nu": nu, "bound_squared": bound_sq,
                        "max_squared_distance": float(sq.max()),
                        "worst_ratio": float(ratio.max())})
    passed = worst <= slack and grid_ok
    details = {"lambda": lam, "points": len(xs), "per_nu": records}
    if grid_resolution is not None:
        details["grid_resolution"] = grid_resolution
        details["grid_worst_ratio"] = grid_worst
        details["grid_agrees"] = bool(grid_ok)
    return VerificationReport("prox_regularization", passed, worst, slack, details)


def verify_mapping_vs_gradient(instance: MinimaxInstance, S: Dataset, net,
                               slack: float = 1.05, oracle: str = "closed_form",
                               inner: InnerSolveConfig = DEFAULT_INNER) -> VerificationReport:
    """``||G_Phi(x) - G_{Phi_S}(x)|| <= ||grad Phi(x) - grad Phi_S(x)||`` at every net point.

    Both mappings use the step ``1/L~`` with the instance's ``L~``; the
    inequality is non-expansiveness of the projection.
    """
    _require_mu(instance, True)
    pts = net.points if isinstance(net, CoveringNet) else np.atleast_2d(np.asarray(net, float))
    cfg = ExperimentConfig(family={}, net_radius=1.0, oracle=oracle, inner=inner)
    g_pop = _primal_grad(instance.population(), pts, cfg)
    g_emp = _primal_grad(instance.empirical(S), pts, cfg)
    Lt = instance.constants.L_tilde
    X = instance.x_domain
    lhs = np.linalg.norm(mapping_from_gradient(pts, g_pop, Lt, X)
                         - mapping_from_gradient(pts, g_emp, Lt, X), axis=1)
    rhs = np.linalg.norm(g_pop - g_emp, axis=1)
    ratio = np.divide(lhs, rhs, out=np.zeros_like(lhs), where=rhs > 0)
    # a zero right side must come with a zero left side
    ratio = np.where((rhs == 0) & (lhs > 1e-12), np.inf, ratio)
    worst = float(ratio.max())
    return VerificationReport("mapping_vs_gradient", worst <= slack, worst, slack,
                              {"n": S.n, "points": len(pts),
                               "violations": int(np.sum(ratio > slack)),
                               "strict_points": int(np.sum(lhs < rhs * (1 - 1e-9)))})


def verify_mapping_ordering(cfg: ExperimentConfig) -> VerificationReport:
    """:func:`verify_mapping_vs_gradient` on every ``(n, replicate)`` dataset of ``cfg``."""
    instance = cfg.instance()
    net = cfg.net(instance)

    def one(n, r):
        S = instance.draw(replicate_seed(cfg.base_seed, n, r), n)
        return verify_mapping_vs_gradient(instance, S, net, cfg.slack, cfg.oracle, cfg.inner)

    reports = [rep for per_n in _replicates(cfg, one) for rep in per_n]
    worst = max(r.worst_ratio for r in reports)
    return VerificationReport(
        "mapping_vs_gradient", all(r.passed for r in reports), worst, cfg.slack,
        {"datasets": len(reports), "points": net.count,
         "violations": sum(r.details["violations"] for r in reports),
         "strict_points": sum(r.details["strict_points"] for r in reports)})


def gdmax_solver(objective: Objective, steps: int, inner: InnerSolveConfig = DEFAULT_INNER,
                 x0=None) -> np.ndarray:
    """Projected gradient descent on the primal with step ``1/L~``.

    Gradients come from Danskin's theorem through the iterative inner
    maximizer. Returns the visited iterate with the smallest gradient-mapping
    norm (the starting point counts); ``x0`` defaults to the center of X.
    """
    if not objective.mu > 0:
        raise UnsupportedSettingError("gdmax needs a strongly concave inner problem; "
                                      "regularize with regularized_primal first")
    X = objective.x_domain
    Lt = objective.constants.L_tilde
    if x0 is None:
        box = X.bounding_box()
        x0 = X.project(0.5 * (box.lower + box.upper))
    x = X.project(np.asarray(x0, dtype=float))
    best, best_norm, y = x, math.inf, None
    for _ in range(steps + 1):
        g, y = primal_grad_ncsc(objective, x, inner, y0=y, return_y=True)
        mapping = mapping_from_gradient(x, g, Lt, X)
        norm = float(np.linalg.norm(mapping))
        if norm < best_norm:
            best, best_norm = x, norm
        if norm == 0:
            break
        x = x - mapping / Lt
    return best.copy()


def run_decomposition(cfg: ExperimentConfig, solver_budget: Optional[int] = None) -> dict:
    """Population stationarity against empirical stationarity plus generalization.

    Per replication: draw ``S``, run :func:`gdmax_solver` on ``Phi_S``, and
    measure at its output ``x``::

        population     = ||grad Phi(x)||
        empirical      = ||grad Phi_S(x)||
        generalization = ||grad Phi(x) - grad Phi_S(x)||
        net_sup        = max over the net of the same deviation, same S

    Passes when ``population <= empirical + generalization`` in every
    replication (to ``slack``) and, for every ``n``, the mean generalization
    term is at most the mean net sup. Returns the per-``n`` summary together
    with a :class:`VerificationReport` under ``"report"``.
    """
    instance = cfg.instance()
    _require_mu(instance, True)
    steps = cfg.solver_steps if solver_budget is None else int(solver_budget)
    net = cfg.net(instance)
    pop = instance.population()
    pop_net = _primal_grad(pop, net.points, cfg)
    correction = 2.0 * instance.constants.L_tilde * net.radius

    def one(n, r):
        S = instance.draw(replicate_seed(cfg.base_seed, n, r), n)
        emp = instance.empirical(S)
        x = gdmax_solver(emp, steps, cfg.inner)
        gp = _primal_grad(pop, x, cfg)
        ge = _primal_grad(emp, x, cfg)
        netsup = float(np.max(np.linalg.norm(pop_net - _primal_grad(emp, net.points, cfg),
                                             axis=1)))
        return (float(np.linalg.norm(gp)), float(np.linalg.norm(ge)),
                float(np.linalg.norm(gp - ge)), netsup)

    results = _replicates(cfg, one)
    rows, worst, triangle_fail, ordering_ok, sup_fail = [], 0.0, 0, True, 0
    for n, per in zip(cfg.n_schedule, results):
        arr = np.array(per)
        p, e, g, s = arr.T
        rhs = e + g
        tri = np.divide(p, rhs, out=np.where(p > 0, np.inf, 0.0), where=rhs > 0)
        worst = max(worst, float(tri.max()))
        triangle_fail += int(np.sum(tri > cfg.slack))
        sup_fail += int(np.sum(g > s + correction))
        R = len(per)
        row = {"n": n,
               "population_mean": float(p.mean()), "empirical_mean": float(e.mean()),
               "generalization_mean": float(g.mean()),
               "generalization_std_error": float(g.std(ddof=1) / math.sqrt(R)),
               "net_sup_mean": float(s.mean()),
               "net_sup_std_error": float(s.std(ddof=1) / math.sqrt(R))}
        ordering_ok &= row["generalization_mean"] <= row["net_sup_mean"]
        rows.append(row)
    passed = triangle_fail == 0 and ordering_ok
    report = VerificationReport(
        "decomposition", passed, worst, cfg.slack,
        {"solver_steps": steps, "replications": cfg.replications,
         "triangle_violations": triangle_fail, "mean_ordering_holds": bool(ordering_ok),
         "net_correction": correction, "generalization_above_corrected_sup": sup_fail,
         "rows": rows})
    return {"rows": rows, "report": report}


def subgaussian_tail_check(instance: MinimaxInstance, x, n: int, draws: int, seed: int,
                           oracle: str = "closed_form",
                           inner: InnerSolveConfig = DEFAULT_INNER) -> VerificationReport:
    """Tail frequencies of the centered deviation ``||grad Phi(x) - grad Phi_S(x)||``.

    At ``t`` in ``{sigma, 2 sigma, 3 sigma}`` with ``sigma^2`` the variance
    proxy, passes when the empirical frequency of ``|D - mean D| >= t`` is
    at most ``2 exp(-t^2 / (2 sigma^2))`` plus three binomial standard errors.
    ``x`` must not depend on the data.
    """
    _require_mu(instance, True)
    x = np.asarray(x, dtype=float)
    c = instance.constants
    sigma2 = bounds.subgaussian_variance_proxy_ncsc(c.L, c.G, instance.mu, n)
    sigma = math.sqrt(sigma2)
    cfg = ExperimentConfig(family={}, net_radius=1.0, oracle=oracle, inner=inner)
    g_pop = _primal_grad(instance.population(), x, cfg)
    dev = np.empty(draws)
    for j in range(draws):
        S = instance.draw(derive_seed(seed, _TAIL_STREAM, n, j), n)
        dev[j] = np.linalg.norm(g_pop - _primal_grad(instance.empirical(S), x, cfg))
    centered = np.abs(dev - dev.mean())
    levels, worst, passed = [], 0.0, True
    for k in (1, 2, 3):
        t = k * sigma
        theory = 2.0 * math.exp(-t * t / (2.0 * sigma2))
        p = min(theory, 1.0)
        allowed = theory + 3.0 * math.sqrt(p * (1.0 - p) / draws)
        freq = float(np.mean(centered >= t))
        worst = max(worst, freq / allowed)
        passed &= freq <= allowed
        levels.append({"t_over_sigma": k, "t": t, "frequency": freq, "theory": theory,
                       "allowed": allowed})
    return VerificationReport("subgaussian_tails", passed, worst, 1.0,
                              {"n": n, "draws": draws, "sigma": sigma,
                               "mean_deviation": float(dev.mean()),
                               "std_deviation": float(dev.std(ddof=1)), "levels": levels})


# --- derivative identities ------------------------------------------------


def _central_difference(fn: Callable, xs: np.ndarray, h: float) -> np.ndarray:
    """Central-difference gradients of a batched scalar ``fn`` at every row of ``xs``."""
    k, d = xs.shape
    shifts = np.concatenate([xs[:, None, :] + h * np.eye(d), xs[:, None, :] - h * np.eye(d)],
                            axis=1).reshape(-1, d)
    vals = np.asarray(fn(shifts), dtype=float).reshape(k, 2 * d)
    return (vals[:, :d] - vals[:, d:]) / (2 * h)


def random_interior_points(instance: MinimaxInstance, count: int, seed: int,
                           shrink: float = 0.9) -> np.ndarray:
    """Uniform points of X pulled toward its center so finite differences stay inside."""
    X = instance.x_domain
    rng = np.random.default_rng(derive_seed(seed, _POINT_STREAM))
    box = X.bounding_box()
    center = 0.5 * (box.lower + box.upper)
    return center + shrink * (X.sample_uniform(rng, count) - center)


def verify_danskin(instance: MinimaxInstance, points, h: float = 1e-4,
                   tolerance: float = 1e-4,
                   inner: InnerSolveConfig = InnerSolveConfig(tolerance=1e-12)
                   ) -> VerificationReport:
    """Danskin gradient (iterative inner max) against central differences of the
    iteratively computed primal. Relative error uses ``max(||fd||, 1e-6)``."""
    _require_mu(instance, True)
    pop = instance.population()
    xs = np.atleast_2d(np.asarray(points, dtype=float))
    g = primal_grad_ncsc(pop, xs, inner)
    fd = _central_difference(lambda z: primal_value(pop, z, inner), xs, h)
    rel = np.linalg.norm(g - fd, axis=1) / np.maximum(np.linalg.norm(fd, axis=1), 1e-6)
    worst = float(rel.max())
    return VerificationReport("danskin_gradient", worst <= tolerance, worst / tolerance, 1.0,
                              {"points": len(xs), "h": h, "max_relative_error": worst,
                               "tolerance": tolerance})


def verify_moreau(instance: MinimaxInstance, points, lam: Optional[float] = None,
                  h: float = 1e-4, tolerance: float = 1e-3,
                  cfg: InnerSolveConfig = InnerSolveConfig(tolerance=1e-7,
                                                           max_iterations=200_000)
                  ) -> VerificationReport:
    """``(x - prox(x)) / lam`` against central differences of the envelope value.

    Both sides come from :func:`~uclab.oracles.prox_point` without closed-form
    help: the envelope is the prox objective at the returned point.
    """
    pop = instance.population()
    lam = 1.0 / (2.0 * pop.L) if lam is None else lam
    xs = np.atleast_2d(np.asarray(points, dtype=float))
    g = prox_point(pop, xs, lam, cfg).moreau_grad
    fd = _central_difference(lambda z: prox_point(pop, z, lam, cfg).envelope, xs, h)
    rel = np.linalg.norm(g - fd, axis=1) / np.maximum(np.linalg.norm(fd, axis=1), 1e-6)
    worst = float(rel.max())
    return VerificationReport("moreau_gradient", worst <= tolerance, worst / tolerance, 1.0,
                              {"points": len(xs), "h": h, "lambda": lam,
                               "max_relative_error": worst, "tolerance": tolerance})
