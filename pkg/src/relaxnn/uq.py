"""Random initial data and mean/variance estimation for the stochastic problems.

Networks for these problems take ``(t, x, z_1, ..., z_s)`` as input. Statistics
are computed over z for a fixed evaluation grid of (t, x) pairs, either by
Monte Carlo or by tensorized Gauss-Legendre quadrature. Both estimators accept
any callable mapping an (K, 2 + s) input array to (K, d_out) outputs, or a
ParamSet (evaluated with :func:`relaxnn.mlp.predict`).
"""

from __future__ import annotations

import itertools
from collections.abc import Callable
from dataclasses import dataclass, replace

import numpy as np

from .fvref import Grid1D, solve
from .mlp import ParamSet, make_rng, predict
from .systems import (
    CATALOG,
    ProblemSpec,
    conserved_to_primitive,
    initial_state,
    primitive_to_conserved,
)

ADDITIVE = "additive-sum"
INTERFACE = "interface-shift"


@dataclass(frozen=True)
class StochasticIC:
    kind: str
    eps: float = 0.005
    dim: int = 5

    def __post_init__(self):
        if self.kind not in (ADDITIVE, INTERFACE):
            raise ValueError(f"unknown stochastic IC kind {self.kind!r}")
        if self.eps <= 0 or self.dim < 1:
            raise ValueError("need eps > 0 and dim >= 1")
        if self.kind == INTERFACE and self.dim != 5:
            raise ValueError("the interface shift uses exactly 5 random variables")


UQ_PROBLEMS = {
    "burgers-riemann-uq": replace(
        CATALOG["burgers-riemann"],
        name="burgers-riemann-uq",
        stochastic=StochasticIC(ADDITIVE, 0.005, 100),
    ),
    # The shallow-water run relaxes only the momentum row (one v output).
    "swe-2shock-uq": replace(
        CATALOG["swe-2shock"],
        name="swe-2shock-uq",
        relax=2,
        stochastic=StochasticIC(INTERFACE, 0.005, 5),
    ),
    "euler-sod-uq": replace(
        CATALOG["euler-sod"],
        name="euler-sod-uq",
        relax=3,
        stochastic=StochasticIC(INTERFACE, 0.005, 5),
    ),
}


def psi(z, eps: float = 0.005):
    """Interface position eps * (z1 * relu(z2 z3 + z4) + z5); z on the last axis."""
    z = np.asarray(z, dtype=np.float64)
    if z.shape[-1] != 5:
        raise ValueError("psi needs 5 random variables")
    relu = np.maximum(z[..., 1] * z[..., 2] + z[..., 3], 0.0)
    return eps * (z[..., 0] * relu + z[..., 4])


def stochastic_initial_state(problem: ProblemSpec, x, z) -> np.ndarray:
    """Initial primitives at ``x`` for random inputs ``z``; shape (..., n_prims).

    ``z`` broadcasts against ``x`` with the random dimension last.
    """
    spec = problem.stochastic
    if spec is None:
        return initial_state(problem, x)
    x = np.asarray(x, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    if z.shape[-1] != spec.dim:
        raise ValueError(f"expected {spec.dim} random variables, got {z.shape[-1]}")
    base = initial_state(problem, x)
    left = np.asarray(problem.left, dtype=np.float64)
    right = np.asarray(problem.right, dtype=np.float64)
    if spec.kind == ADDITIVE:
        shift = spec.eps * z.sum(axis=-1)
        shifted_left = left + shift[..., None] * np.ones_like(left)
        return np.where((x <= 0.0)[..., None], shifted_left, base)
    position = psi(z, spec.eps)
    return np.where((x <= position)[..., None], left, right)


@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray
    dim: int = 1

    def tensor(self) -> tuple[np.ndarray, np.ndarray]:
        """Tensor-product nodes (n^dim, dim) and probability weights for U([-1,1]^dim)."""
        pts = np.array(list(itertools.product(self.nodes, repeat=self.dim)))
        w = np.prod(
            np.array(list(itertools.product(self.weights / 2.0, repeat=self.dim))), axis=1
        )
        return pts.reshape(-1, self.dim), w


def gauss_legendre(n: int, dim: int = 1) -> QuadratureRule:
    if n < 1:
        raise ValueError("need at least one node")
    nodes, weights = np.polynomial.legendre.leggauss(n)
    return QuadratureRule(nodes, weights, dim)


Model = Callable[[np.ndarray], np.ndarray]


def _as_model(model: ParamSet | Model) -> Model:
    if isinstance(model, ParamSet):
        return lambda inputs: predict(model, inputs)
    return model


def _evaluate(model: Model, grid: np.ndarray, zs: np.ndarray) -> np.ndarray:
    """Outputs for every (grid point, z) pair: shape (M, K, d_out)."""
    m, k = len(grid), len(zs)
    inputs = np.concatenate(
        [np.repeat(grid, k, axis=0), np.tile(zs, (m, 1))], axis=1
    )
    out = np.asarray(model(inputs), dtype=np.float64)
    return out.reshape(m, k, -1)


@dataclass
class MomentEstimate:
    mean: np.ndarray
    variance: np.ndarray
    mean_stderr: np.ndarray | None = None
    variance_stderr: np.ndarray | None = None


def mc_mean_variance(
    model: ParamSet | Model,
    grid,
    sampler: Callable[[np.random.Generator, int], np.ndarray] | np.ndarray,
    n_samples: int,
    seed: int = 1,
    chunk: int = 4096,
) -> MomentEstimate:
    """Monte Carlo mean and unbiased variance over z at each grid point.

    ``sampler(rng, k)`` returns k random vectors, or pass a pre-drawn (N, s)
    array. Standard errors of both estimates are included.
    """
    if n_samples < 2:
        raise ValueError("need at least two samples")
    model = _as_model(model)
    grid = np.atleast_2d(np.asarray(grid, dtype=np.float64))
    rng = make_rng(seed)
    if callable(sampler):
        zs_all = None
    else:
        zs_all = np.asarray(sampler, dtype=np.float64)[:n_samples]
        if len(zs_all) < n_samples:
            raise ValueError("not enough pre-drawn samples")

    # Shifted power sums keep the variance accurate when it is tiny next to the mean.
    shift = None
    s1 = s2 = s3 = s4 = 0.0
    done = 0
    while done < n_samples:
        k = min(chunk, n_samples - done)
        zs = sampler(rng, k) if zs_all is None else zs_all[done : done + k]
        vals = _evaluate(model, grid, np.asarray(zs, dtype=np.float64))
        if shift is None:
            shift = vals[:, :1, :].copy()
        d = vals - shift
        s1 = s1 + d.sum(axis=1)
        s2 = s2 + (d * d).sum(axis=1)
        s3 = s3 + (d**3).sum(axis=1)
        s4 = s4 + (d**4).sum(axis=1)
        done += k
    n = float(n_samples)
    m1 = s1 / n
    mean = shift[:, 0, :] + m1
    central2 = s2 / n - m1 * m1
    variance = central2 * n / (n - 1.0)
    central4 = s4 / n - 4 * m1 * s3 / n + 6 * m1 * m1 * s2 / n - 3 * m1**4
    var_se = np.sqrt(np.maximum(central4 - central2 * central2, 0.0) / n)
    mean_se = np.sqrt(np.maximum(variance, 0.0) / n)
    return MomentEstimate(mean, variance, mean_se, var_se)


def quad_mean_variance(
    model: ParamSet | Model,
    grid,
    rule: QuadratureRule | None = None,
    dims: int = 5,
    chunk: int = 10000,
) -> MomentEstimate:
    """Mean and variance under z ~ U([-1,1]^dims) by tensorized Gauss-Legendre.

    variance = E[f^2] - E[f]^2 with the tensor rule supplying both integrals.
    """
    model = _as_model(model)
    rule = gauss_legendre(10) if rule is None else rule
    rule = QuadratureRule(rule.nodes, rule.weights, dims)
    pts, w = rule.tensor()
    grid = np.atleast_2d(np.asarray(grid, dtype=np.float64))
    first = second = 0.0
    for start in range(0, len(pts), chunk):
        vals = _evaluate(model, grid, pts[start : start + chunk])
        ww = w[start : start + chunk][None, :, None]
        first = first + (ww * vals).sum(axis=1)
        second = second + (ww * vals * vals).sum(axis=1)
    return MomentEstimate(first, second - first * first)


def uniform_sampler(dim: int) -> Callable[[np.random.Generator, int], np.ndarray]:
    return lambda rng, k: rng.uniform(-1.0, 1.0, size=(k, dim))


def stochastic_cell_averages(problem: ProblemSpec, grid: Grid1D, z) -> np.ndarray:
    """Exact cell averages of the conserved initial data, shape (K, n_cells, n_rows).

    An interface at psi(z) inside a cell contributes the left and right states
    in proportion to the covered lengths; the additive kind keeps its jump at
    x = 0 and is sampled at the centers.
    """
    spec = problem.stochastic
    z = np.atleast_2d(np.asarray(z, dtype=np.float64))
    if spec.kind == ADDITIVE:
        prim = stochastic_initial_state(problem, grid.centers[None, :], z[:, None, :])
        return primitive_to_conserved(problem.kind, prim, problem.gamma)
    q_left = primitive_to_conserved(problem.kind, np.asarray(problem.left, float), problem.gamma)
    q_right = primitive_to_conserved(problem.kind, np.asarray(problem.right, float), problem.gamma)
    faces = grid.x_min + grid.dx * np.arange(grid.n_cells)
    frac = np.clip((psi(z, spec.eps)[:, None] - faces[None, :]) / grid.dx, 0.0, 1.0)
    return frac[..., None] * q_left + (1.0 - frac[..., None]) * q_right


def fv_reference_moments(
    problem: ProblemSpec,
    grid: Grid1D,
    times,
    n_samples: int = 10000,
    seed: int = 1,
    cfl: float = 0.5,
    batch: int = 500,
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Reference primitive mean/variance fields by Monte Carlo over finite-volume runs.

    Returns per-time lists of (n_cells, n_prims) arrays.
    """
    spec = problem.stochastic
    if spec is None:
        raise ValueError("problem has no stochastic initial condition")
    rng = make_rng(seed)
    times = [float(t) for t in times]
    s1 = [0.0] * len(times)
    s2 = [0.0] * len(times)
    shift = [None] * len(times)
    done = 0
    while done < n_samples:
        k = min(batch, n_samples - done)
        zs = rng.uniform(-1.0, 1.0, size=(k, spec.dim))
        q0 = stochastic_cell_averages(problem, grid, zs)
        sol = solve(problem, grid, cfl, times, q0=q0)
        for i in range(len(times)):
            prim = conserved_to_primitive(problem.kind, sol.states[i], problem.gamma)
            if shift[i] is None:
                shift[i] = prim[0].copy()
            d = prim - shift[i]
            s1[i] = s1[i] + d.sum(axis=0)
            s2[i] = s2[i] + (d * d).sum(axis=0)
        done += k
    n = float(n_samples)
    means = [shift[i] + s1[i] / n for i in range(len(times))]
    variances = [(s2[i] / n - (s1[i] / n) ** 2) * n / (n - 1.0) for i in range(len(times))]
    return means, variances
