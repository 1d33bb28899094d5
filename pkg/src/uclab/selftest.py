"""Fast sanity suite: closed-form values and identities that must hold exactly."""

from __future__ import annotations

import math

import numpy as np

from . import bounds
from .domains import ConvexDomain, covering_net
from .experiments import fit_rate
from .oracles import inner_max, prox_point, regularized_primal
from .problems import make_instance


def _close(a, b, tol=1e-12):
    return abs(a - b) <= tol * max(1.0, abs(b))


def _checks():
    yield "stability bound 4G/(mu n)", _close(bounds.stability_y_bound(2, 0.5, 100), 0.16)
    yield "ERM gap 4G^2/(mu n)", _close(bounds.erm_gap_bound(2, 1, 16), 1.0)
    yield "expected gradient difference", _close(
        bounds.expected_grad_diff_bound(1, 1, 1, 100), 0.1 + math.sqrt(0.08))
    yield "prox regularization bound", _close(
        bounds.prox_reg_bound(0.01, 1, 0.5, 1), math.sqrt(0.005 / 0.495))
    yield "prox regularization bound at nu = 0", bounds.prox_reg_bound(0, 1, 0.5, 1) == 0
    yield "variance proxy", _close(bounds.subgaussian_variance_proxy_ncsc(1, 1, 1, 9), 1.0)
    yield "sample size d=1, eps=1, L=mu=G=1", bounds.sample_size_ncsc(1, 1, 1, 1, 1) == 38
    yield "complexity template sqrt(n)/eps^2", _close(
        bounds.induced_gradient_complexity(1e4, 0.1, "sqrt_n"), 1e4, 1e-9)

    n = np.array([16.0, 64.0, 256.0, 1024.0])
    yield "rate fit of exact n^-1/2", abs(fit_rate(np.c_[n, 3 * n ** -0.5]).slope + 0.5) < 1e-12
    yield "rate fit of a constant", abs(fit_rate(np.c_[n, np.ones(4)]).slope) < 1e-12

    box = ConvexDomain.box([0, 0], [1, 1])
    yield "box projection clamps", np.allclose(box.project([2.0, -1.0]), [1.0, 0.0])
    ball = ConvexDomain.ball([0, 0], 1.0)
    yield "ball projection rescales", np.allclose(ball.project([3.0, 4.0]), [0.6, 0.8])
    net = covering_net(box, 0.25)
    probe = box.sample_uniform(np.random.default_rng(0), 2000)
    gaps = np.min(np.linalg.norm(probe[:, None] - net.points[None], axis=2), axis=1)
    yield "net covers [0,1]^2 at radius 0.25", bool(gaps.max() <= 0.25)

    inst = make_instance({"family": "sin_bilinear_ncsc", "d": 2, "d_prime": 2, "mu": 1.0,
                          "radius_x": 1.0, "radius_y": 2.0, "seed": 7})
    pop = inst.population()
    x = np.array([0.3, -0.4])
    y_it, _ = inner_max(pop, x)
    yield "iterative inner max matches closed form", bool(
        np.linalg.norm(y_it - pop.argmax_y(x)) <= 1e-9)

    ncc = make_instance({"family": "sin_bilinear_ncc", "d": 1, "d_prime": 1,
                         "radius_x": 2.0, "radius_y": 1.0, "seed": 3})
    p = ncc.population()
    xs = np.array([[-1.0], [0.1], [1.5]])
    base = prox_point(p, xs, 0.25, primal=p.primal)
    yield "prox point stays in X", bool(np.all(p.x_domain.contains(base.prox_point)))
    reg = regularized_primal(p, 1e-2)
    moved = prox_point(reg, xs, 0.25, primal=reg.primal).prox_point - base.prox_point
    yield "regularized prox within its bound", bool(
        np.max(np.sum(moved ** 2, axis=1))
        <= bounds.prox_reg_bound(1e-2, ncc.constants.D_Y, 0.25, ncc.constants.L) ** 2 * 1.05)


def run_selftest() -> list:
    """Run every check; returns ``[{"name", "passed"}]`` in a fixed order."""
    return [{"name": name, "passed": bool(ok)} for name, ok in _checks()]
