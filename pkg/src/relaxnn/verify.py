"""Finite-difference checks of the tape gradients and the input-derivative forward pass."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Tape
from .mlp import (
    MlpConfig,
    ParamSet,
    bind,
    forward,
    forward_with_input_derivatives,
    init_he_uniform,
    make_rng,
)
from .sampling import sample_points
from .systems import get_problem
from .trainer import LossWeights, term_names, total_loss

LOSS_TOLERANCE = 1e-5
INPUT_TOLERANCE = 1e-6


@dataclass(frozen=True)
class CheckResult:
    check: str
    case: int
    deviation: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.deviation <= self.tolerance


def relative_deviation(analytic, numeric) -> float:
    """max |a - n| over the vector, divided by max |n|; 0 when both vanish."""
    analytic = np.asarray(analytic, dtype=np.float64).ravel()
    numeric = np.asarray(numeric, dtype=np.float64).ravel()
    scale = max(np.abs(numeric).max(), np.abs(analytic).max())
    if scale == 0.0:
        return 0.0
    return float(np.abs(analytic - numeric).max() / scale)


def _random_params(sizes, rng: np.random.Generator) -> ParamSet:
    config = MlpConfig.from_sizes(sizes)
    # Nonzero biases so that no layer sits exactly at the tanh origin.
    flat = init_he_uniform(config, rng.integers(2**32)).flat.copy()
    flat += 0.1 * rng.standard_normal(flat.size)
    return ParamSet(config, flat)


def _loss_terms(problem, u, v, points, weights) -> dict[str, float]:
    _, terms = total_loss(points, u, v, problem, weights, Tape())
    return {k: float(n) for k, n in terms.items()}


def loss_gradient_checks(
    problem_name: str = "burgers-riemann",
    relax: int | None = 1,
    hidden: tuple[int, ...] = (8, 8),
    draws: int = 20,
    seed: int = 1,
    step: float = 1e-6,
    counts: tuple[int, int, int] = (16, 8, 8),
) -> list[CheckResult]:
    """Parameter gradients of every loss term against central differences.

    Each draw uses fresh random weights for both networks and fresh points.
    """
    problem = get_problem(problem_name, relax)
    n = problem.kind.n_rows
    weights = LossWeights((1.0,) * n, (1.0,) * n, 1.0, 1.0)
    rng = make_rng(seed)
    d_in = problem.input_dim
    results = []
    for draw in range(draws):
        u = _random_params([d_in, *hidden, problem.n_prims], rng)
        v = None if relax is None else _random_params([d_in, *hidden, problem.n_relaxed], rng)
        points = sample_points(problem, counts, int(rng.integers(2**32)))
        names = term_names(problem)

        tape = Tape()
        ub = bind(u, tape)
        vb = None if v is None else bind(v, tape)
        _, terms = total_loss(points, ub, vb, problem, weights, tape)
        analytic = {}
        for name in names:
            grads = tape.backward(terms[name])
            g = ub.flat_gradient(grads)
            if vb is not None:
                g = np.concatenate([g, vb.flat_gradient(grads)])
            analytic[name] = g

        flat = np.concatenate([u.flat] + ([] if v is None else [v.flat]))
        numeric = {name: np.empty(flat.size) for name in names}

        def split(vec):
            uu = ParamSet(u.config, vec[: u.n_params])
            vv = None if v is None else ParamSet(v.config, vec[u.n_params :])
            return uu, vv

        for k in range(flat.size):
            hi = flat.copy()
            lo = flat.copy()
            hi[k] += step
            lo[k] -= step
            f_hi = _loss_terms(problem, *split(hi), points, weights)
            f_lo = _loss_terms(problem, *split(lo), points, weights)
            for name in names:
                numeric[name][k] = (f_hi[name] - f_lo[name]) / (2.0 * step)
        label = f"{problem_name}/relax={relax}"
        for name in names:
            dev = relative_deviation(analytic[name], numeric[name])
            results.append(CheckResult(f"{label}/{name}", draw, dev, LOSS_TOLERANCE))
    return results


def input_derivative_checks(cases: int = 100, seed: int = 1, step: float = 1e-6) -> list[CheckResult]:
    """d(output)/d(t, x) from the augmented forward pass against central differences."""
    rng = make_rng(seed)
    results = []
    for case in range(cases):
        d_in = int(rng.integers(2, 5))
        hidden = tuple(int(w) for w in rng.integers(2, 12, size=rng.integers(1, 4)))
        d_out = int(rng.integers(1, 4))
        params = _random_params([d_in, *hidden, d_out], rng)
        x = rng.uniform(-1.0, 1.0, size=(3, d_in))
        trip = forward_with_input_derivatives(params, x, (0, 1), Tape())
        dev = 0.0
        for k in (0, 1):
            hi = x.copy()
            lo = x.copy()
            hi[:, k] += step
            lo[:, k] -= step
            f_hi = np.stack([n.value for n in forward(params, hi, Tape())], axis=1)
            f_lo = np.stack([n.value for n in forward(params, lo, Tape())], axis=1)
            numeric = (f_hi - f_lo) / (2.0 * step)
            analytic = np.stack([t.derivs[k].value for t in trip], axis=1)
            dev = max(dev, relative_deviation(analytic, numeric))
        results.append(CheckResult("input-derivatives", case, dev, INPUT_TOLERANCE))
    return results


def run_all(seed: int = 1, draws: int = 20, cases: int = 100) -> list[CheckResult]:
    out = input_derivative_checks(cases, seed)
    out += loss_gradient_checks("burgers-riemann", 1, draws=draws, seed=seed)
    out += loss_gradient_checks("euler-sod", 3, draws=draws, seed=seed)
    return out
