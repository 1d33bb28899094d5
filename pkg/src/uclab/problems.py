"""Stochastic minimax instances with analytically tractable inner problems.

Every built-in family has the affine-coupled form::

    f(x, y; xi) = a(xi) * s(x) + y^T (B x + b(xi)) - (mu / 2) ||y||^2

with ``xi = (a, b)``. ``s`` is either ``sin(w^T x)`` (the nonconvex families)
or ``(rho / 2) ||x||^2`` (the strongly-convex-strongly-concave test family,
where ``B = I`` and ``a = 1``). Because ``f`` is affine in ``xi``, the
population objective ``F = E f`` and the empirical objective ``F_S`` are both
``f`` evaluated at a mean parameter, and the inner maximizer over ``y`` has a
closed form. That gives exact primal values and gradients to test every
iterative oracle against.

Randomness follows a counter-based contract: sample ``i`` of the dataset with
seed ``sigma`` is a pure function of ``(sigma, i)`` (Philox keyed by
``sigma``, counter block ``i``).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.special import ndtri

from .domains import ConvexDomain
from .errors import ArgumentError, ConfigurationError

FAMILIES = ("sin_bilinear_ncsc", "sin_bilinear_ncc", "quadratic_scsc")


@dataclass(frozen=True)
class ConstantsRegistry:
    """Problem constants: smoothness ``L``, strong concavity ``mu``, gradient
    bounds ``G`` (for f) and ``G_Phi`` (for the primal), squared-norm bounds
    ``D_X``, ``D_Y``."""

    L: float
    mu: float
    G: float
    G_Phi: float
    D_X: float
    D_Y: float

    def __post_init__(self):
        for name in ("L", "G", "G_Phi", "D_X", "D_Y"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ArgumentError(f"constant {name} must be finite and positive, got {v}")
        if not (math.isfinite(self.mu) and self.mu >= 0):
            raise ArgumentError(f"mu must be finite and nonnegative, got {self.mu}")

    @property
    def kappa(self) -> float:
        return self.L / self.mu if self.mu > 0 else math.inf

    @property
    def L_tilde(self) -> float:
        """Smoothness of the primal function, ``L (1 + kappa)``."""
        return self.L * (1.0 + self.kappa)

    def to_dict(self) -> dict:
        return {"L": self.L, "mu": self.mu, "G": self.G, "G_Phi": self.G_Phi,
                "D_X": self.D_X, "D_Y": self.D_Y, "kappa": self.kappa,
                "L_tilde": self.L_tilde}


# --- randomness -----------------------------------------------------------


def _key(seed) -> int:
    seed = int(seed)
    if not 0 <= seed < 2**128:
        raise ArgumentError("seeds must be integers in [0, 2**128)")
    return seed


def derive_seed(*parts: int) -> int:
    """Deterministic 128-bit seed from a tuple of nonnegative integers."""
    words = np.random.SeedSequence([int(p) for p in parts]).generate_state(2, np.uint64)
    return int(words[0]) | (int(words[1]) << 64)


def replicate_seed(base_seed: int, n: int, replicate: int) -> int:
    """Dataset seed for replicate ``replicate`` at sample size ``n``."""
    return derive_seed(base_seed, n, replicate)


@dataclass(frozen=True, eq=False)
class Dataset:
    """Ordered i.i.d. samples; row ``i`` of ``samples`` is the parameter vector of xi_i."""

    samples: np.ndarray
    seed: int

    def __post_init__(self):
        s = np.array(self.samples, dtype=float, copy=True)
        if s.ndim != 2 or s.shape[0] == 0:
            raise ArgumentError("a dataset needs at least one sample")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    @property
    def n(self) -> int:
        return self.samples.shape[0]

    def __len__(self) -> int:
        return self.n

    def mean_param(self) -> np.ndarray:
        return self.samples.mean(axis=0)

    def replace(self, i: int, sample) -> "Dataset":
        """Copy with sample ``i`` swapped for ``sample`` (the S -> S^(i) operation)."""
        if not 0 <= i < self.n:
            raise ArgumentError(f"index {i} outside dataset of size {self.n}")
        s = np.array(self.samples)
        s[i] = sample
        return Dataset(s, self.seed)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["index"] + [f"param_{j}" for j in range(self.samples.shape[1])])
            for i, row in enumerate(self.samples):
                writer.writerow([i] + [format(float(v), ".17g") for v in row])


# --- instances ------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class MinimaxInstance:
    """A stochastic minimax problem ``min_x max_y E f(x, y; xi)`` of affine-coupled form."""

    family: str
    x_domain: ConvexDomain
    y_domain: ConvexDomain
    smooth_kind: str
    w: Optional[np.ndarray]
    rho: float
    B: np.ndarray
    mu: float
    a_range: tuple
    b_radius: float
    seed: int
    constants: ConstantsRegistry = field(init=False)

    def __post_init__(self):
        B = np.array(self.B, dtype=float, ndmin=2)
        if B.shape != (self.y_domain.dim, self.x_domain.dim):
            raise ArgumentError(f"B must have shape (d', d), got {B.shape}")
        B.setflags(write=False)
        object.__setattr__(self, "B", B)
        if self.w is not None:
            w = np.array(self.w, dtype=float).reshape(-1)
            w.setflags(write=False)
            object.__setattr__(self, "w", w)
        object.__setattr__(self, "constants", self._derive_constants())

    @property
    def d(self) -> int:
        return self.x_domain.dim

    @property
    def d_prime(self) -> int:
        return self.y_domain.dim

    @property
    def param_dim(self) -> int:
        return 1 + self.d_prime

    def _derive_constants(self) -> ConstantsRegistry:
        a_max = max(abs(self.a_range[0]), abs(self.a_range[1]))
        D_X = self.x_domain.squared_bound()
        D_Y = self.y_domain.squared_bound()
        b_norm = float(np.linalg.norm(self.B, 2))
        if self.smooth_kind == "sin":
            w_norm = float(np.linalg.norm(self.w))
            curv_x = a_max * w_norm**2
            grad_s = a_max * w_norm
        else:
            curv_x = a_max * self.rho
            grad_s = a_max * self.rho * math.sqrt(D_X)
        # operator norm of the Hessian is bounded by that of the matrix of block norms
        L = float(np.linalg.eigvalsh(np.array([[curv_x, b_norm], [b_norm, self.mu]]))[-1])
        gx = grad_s + b_norm * math.sqrt(D_Y)
        gy = b_norm * math.sqrt(D_X) + self.b_radius + self.mu * math.sqrt(D_Y)
        return ConstantsRegistry(L=L, mu=float(self.mu), G=math.hypot(gx, gy), G_Phi=gx,
                                 D_X=D_X, D_Y=D_Y)

    def to_spec(self) -> dict:
        spec = {"family": self.family, "d": self.d, "d_prime": self.d_prime, "mu": self.mu,
                "radius_x": float(self.x_domain.upper[0]), "radius_y": self.y_domain.radius,
                "seed": self.seed, "a_range": list(self.a_range), "b_radius": self.b_radius}
        if self.smooth_kind == "quadratic":
            spec["rho"] = self.rho
        return spec

    # -- smooth part s(x) --------------------------------------------------

    def _s(self, x):
        if self.smooth_kind == "sin":
            return np.sin(x @ self.w)
        return 0.5 * self.rho * np.sum(x * x, axis=-1)

    def _s_grad(self, x):
        if self.smooth_kind == "sin":
            return np.cos(x @ self.w)[..., None] * self.w
        return self.rho * x

    # -- stochastic oracle -------------------------------------------------

    def f(self, x, y, xi):
        """``f(x, y; xi)``; broadcasts over leading axes."""
        x, y, xi = (np.asarray(v, dtype=float) for v in (x, y, xi))
        a, b = xi[..., 0], xi[..., 1:]
        return (a * self._s(x) + np.sum(y * (x @ self.B.T + b), axis=-1)
                - 0.5 * self.mu * np.sum(y * y, axis=-1))

    def grad_f(self, x, y, xi):
        """``(grad_x f, grad_y f)``; broadcasts over leading axes."""
        x, y, xi = (np.asarray(v, dtype=float) for v in (x, y, xi))
        a, b = xi[..., 0], xi[..., 1:]
        gx = a[..., None] * self._s_grad(x) + y @ self.B
        gy = x @ self.B.T + b - self.mu * y
        return gx, gy

    # -- sampling ----------------------------------------------------------

    @property
    def _draws_per_sample(self) -> int:
        k = self.d_prime + 2
        return 4 * math.ceil(k / 4)

    def _transform(self, u: np.ndarray) -> np.ndarray:
        lo, hi = self.a_range
        a = lo + (hi - lo) * u[:, 0]
        g = ndtri(np.clip(u[:, 1:1 + self.d_prime], 2.0**-60, 1.0 - 2.0**-53))
        norm = np.linalg.norm(g, axis=1, keepdims=True)
        g = np.where(norm > 0, g / np.where(norm > 0, norm, 1.0), np.eye(1, self.d_prime))
        r = self.b_radius * u[:, 1 + self.d_prime] ** (1.0 / self.d_prime)
        return np.column_stack([a, g * r[:, None]])

    def draw(self, seed: int, n: int) -> Dataset:
        """The first ``n`` samples of the stream keyed by ``seed``."""
        if n < 1:
            raise ArgumentError("sample size must be at least 1")
        bitgen = np.random.Philox(key=_key(seed))
        u = np.random.Generator(bitgen).random((n, self._draws_per_sample))
        return Dataset(self._transform(u), int(seed))

    def sample(self, seed: int, index: int) -> np.ndarray:
        """Sample ``index`` of the stream keyed by ``seed``, drawn directly by counter."""
        k = self._draws_per_sample
        bitgen = np.random.Philox(key=_key(seed), counter=index * (k // 4))
        u = np.random.Generator(bitgen).random((1, k))
        return self._transform(u)[0]

    def population_param(self) -> np.ndarray:
        """``E xi``: mean of ``a`` and zero mean offset ``b``."""
        return np.concatenate([[0.5 * (self.a_range[0] + self.a_range[1])],
                               np.zeros(self.d_prime)])

    # -- objectives --------------------------------------------------------

    def population(self) -> "Objective":
        return Objective(self, self.population_param(), label="population")

    def empirical(self, S: Dataset) -> "Objective":
        return Objective(self, S.mean_param(), label=f"empirical(n={S.n})")

    def analytic_inner_max(self, x, param=None, nu: float = 0.0):
        """Closed-form ``argmax_y`` of ``f(x, y; param) - (nu/2)||y||^2`` over Y."""
        param = self.population_param() if param is None else param
        return Objective(self, np.asarray(param, dtype=float), nu=nu).argmax_y(x)


@dataclass(frozen=True, eq=False)
class Objective:
    """A deterministic objective ``F(x, y) - (nu/2)||y||^2`` on X x Y.

    ``F`` is the instance's ``f`` at a fixed mean parameter, which is exactly
    the population or empirical average since ``f`` is affine in ``xi``.
    """

    instance: MinimaxInstance
    param: np.ndarray
    nu: float = 0.0
    label: str = "objective"

    def __post_init__(self):
        p = np.array(self.param, dtype=float).reshape(-1)
        p.setflags(write=False)
        object.__setattr__(self, "param", p)

    @property
    def x_domain(self) -> ConvexDomain:
        return self.instance.x_domain

    @property
    def y_domain(self) -> ConvexDomain:
        return self.instance.y_domain

    @property
    def L(self) -> float:
        return self.instance.constants.L + self.nu

    @property
    def mu(self) -> float:
        return self.instance.mu + self.nu

    @property
    def constants(self) -> ConstantsRegistry:
        c = self.instance.constants
        if self.nu == 0:
            return c
        return replace(c, L=c.L + self.nu, mu=c.mu + self.nu,
                       G=c.G + self.nu * math.sqrt(c.D_Y))

    def value_grad(self, x, y):
        """``(value, grad_x, grad_y)``; broadcasts over leading axes."""
        inst = self.instance
        v = inst.f(x, y, self.param) - 0.5 * self.nu * np.sum(np.asarray(y) ** 2, axis=-1)
        gx, gy = inst.grad_f(x, y, self.param)
        return v, gx, gy - self.nu * np.asarray(y, dtype=float)

    # closed forms ---------------------------------------------------------

    def _linear_term(self, x):
        return np.asarray(x, dtype=float) @ self.instance.B.T + self.param[1:]

    def argmax_y(self, x):
        v = self._linear_term(x)
        Y = self.y_domain
        if self.mu > 0:
            return Y.project(v / self.mu)
        if Y.kind == "ball":
            norm = np.linalg.norm(v, axis=-1, keepdims=True)
            unit = np.divide(v, norm, out=np.zeros_like(v), where=norm > 0)
            return Y.center + Y.radius * unit
        return np.where(v > 0, Y.upper, np.where(v < 0, Y.lower, np.clip(0.0, Y.lower, Y.upper)))

    def primal(self, x):
        """Closed-form ``Phi(x) = max_y F(x, y)``."""
        y = self.argmax_y(x)
        return self.value_grad(x, y)[0]

    def primal_grad(self, x):
        """Closed-form Danskin gradient ``grad_x F(x, y*(x))``."""
        y = self.argmax_y(x)
        return self.value_grad(x, y)[1]


def empirical_value_grad(instance: MinimaxInstance, S: Dataset, x, y):
    """Arithmetic mean of ``f`` and its gradient over the samples of ``S``."""
    if S is None or S.n == 0:
        raise ArgumentError("empirical average over an empty dataset")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    vals = instance.f(x, y, S.samples)
    gx, gy = instance.grad_f(x, y, S.samples)
    return float(vals.mean()), gx.mean(axis=0), gy.mean(axis=0)


# --- family constructors --------------------------------------------------


def _structure(d, d_prime, seed, w, B):
    rng = np.random.default_rng(derive_seed(int(seed), 0xFA111))
    if w is None:
        w = rng.standard_normal(d)
        w /= np.linalg.norm(w)
    if B is None:
        B = rng.standard_normal((d_prime, d))
        B /= np.linalg.norm(B, 2)
    return np.atleast_1d(np.asarray(w, dtype=float)), np.array(B, dtype=float, ndmin=2)


def _check_dims(d, d_prime):
    if int(d) < 1 or int(d_prime) < 1:
        raise ArgumentError("dimensions must be positive")


def make_sin_bilinear_ncsc(d, d_prime, mu, radius_x, radius_y, seed, *, w=None, B=None,
                           a_range=(0.5, 1.5), b_radius=0.5) -> MinimaxInstance:
    """Nonconvex-strongly-concave family with an interior closed-form maximizer.

    ``X = [-radius_x, radius_x]^d``, ``Y`` is the centered ball of radius
    ``radius_y``. Requires ``radius_y >= (||B|| sqrt(D_X) + b_radius) / mu`` so
    that ``y*(x) = (B x + b)/mu`` never touches the boundary.
    """
    _check_dims(d, d_prime)
    if not mu > 0:
        raise ConfigurationError("the NC-SC family needs mu > 0")
    w, B = _structure(d, d_prime, seed, w, B)
    X = ConvexDomain.cube(d, radius_x)
    need = (np.linalg.norm(B, 2) * math.sqrt(X.squared_bound()) + b_radius) / mu
    if radius_y < need - 1e-12:
        raise ConfigurationError(
            f"radius_y={radius_y} too small for an interior maximizer; need >= {need:.6g}")
    return MinimaxInstance("sin_bilinear_ncsc", X, ConvexDomain.ball(np.zeros(d_prime), radius_y),
                           "sin", w, 0.0, B, float(mu), tuple(a_range), float(b_radius), int(seed))


def make_sin_bilinear_ncc(d, d_prime, radius_x, radius_y, seed, *, w=None, B=None,
                          a_range=(0.5, 1.5), b_radius=0.5) -> MinimaxInstance:
    """Nonconvex-concave family (``mu = 0``); primal ``a sin(w^T x) + R_Y ||B x + b||``."""
    _check_dims(d, d_prime)
    if not radius_y > 0:
        raise ConfigurationError("radius_y must be positive")
    w, B = _structure(d, d_prime, seed, w, B)
    return MinimaxInstance("sin_bilinear_ncc", ConvexDomain.cube(d, radius_x),
                           ConvexDomain.ball(np.zeros(d_prime), radius_y), "sin", w, 0.0, B,
                           0.0, tuple(a_range), float(b_radius), int(seed))


def make_quadratic_scsc(d, rho, mu, radius_x, radius_y, seed, *, c_radius=1.0) -> MinimaxInstance:
    """``(rho/2)||x||^2 + x^T y - (mu/2)||y||^2 + c^T y`` with ``c`` uniform in a ball."""
    _check_dims(d, d)
    if not (rho > 0 and mu > 0):
        raise ConfigurationError("the SC-SC family needs rho > 0 and mu > 0")
    return MinimaxInstance("quadratic_scsc", ConvexDomain.cube(d, radius_x),
                           ConvexDomain.ball(np.zeros(d), radius_y), "quadratic", None,
                           float(rho), np.eye(d), float(mu), (1.0, 1.0), float(c_radius),
                           int(seed))


def make_instance(spec: dict) -> MinimaxInstance:
    """Build an instance from ``{family, d, d_prime, mu, radius_x, radius_y, seed, ...}``."""
    spec = dict(spec)
    family = spec.pop("family", None)
    if family not in FAMILIES:
        raise ConfigurationError(f"unknown family {family!r}; expected one of {FAMILIES}")
    try:
        d = int(spec.pop("d"))
        radius_x = float(spec.pop("radius_x"))
        radius_y = float(spec.pop("radius_y"))
        seed = int(spec.pop("seed", 0))
        d_prime = int(spec.pop("d_prime", d))
        mu = float(spec.pop("mu", 0.0))
    except KeyError as exc:
        raise ConfigurationError(f"family spec is missing field {exc.args[0]!r}") from None
    extras = {k: v for k, v in spec.items() if v is not None}
    if "a_range" in extras:
        extras["a_range"] = tuple(extras["a_range"])
    if family == "sin_bilinear_ncsc":
        return make_sin_bilinear_ncsc(d, d_prime, mu, radius_x, radius_y, seed, **extras)
    if family == "sin_bilinear_ncc":
        return make_sin_bilinear_ncc(d, d_prime, radius_x, radius_y, seed, **extras)
    if d_prime != d:
        raise ConfigurationError("quadratic_scsc requires d_prime == d")
    return make_quadratic_scsc(d, extras.pop("rho", 1.0), mu, radius_x, radius_y, seed,
                               **{("c_radius" if k == "b_radius" else k): v
                                  for k, v in extras.items()})
