"""Network sizes and loss weights used in the published experiments.

Weights are per conservation row (mass, momentum, energy). A flux weight of 0
marks a row that the variant does not relax.
"""

from __future__ import annotations

from .systems import Kind, ProblemSpec
from .trainer import LossWeights

# (kind, relax) -> (u sizes, v sizes), deterministic problems.
NETWORKS = {
    (Kind.BURGERS, 1): ([2, 128, 128, 128, 128, 1], [2, 64, 64, 64, 64, 1]),
    (Kind.SWE, 1): ([2] + [128] * 5 + [2], [2] + [128] * 5 + [2]),
    (Kind.SWE, 2): ([2] + [128] * 5 + [2], [2] + [64] * 5 + [1]),
    (Kind.EULER, 1): ([2] + [384] * 6 + [3], [2] + [384] * 6 + [3]),
    (Kind.EULER, 2): ([2] + [384] * 6 + [3], [2] + [256] * 6 + [2]),
    (Kind.EULER, 3): ([2] + [384] * 6 + [3], [2] + [128] * 6 + [1]),
}

UQ_NETWORKS = {
    "burgers-riemann-uq": ([102, 128, 128, 128, 1], [102, 64, 64, 64, 1]),
    "swe-2shock-uq": ([7] + [256] * 6 + [2], [7] + [128] * 6 + [1]),
    "euler-sod-uq": ([7] + [384] * 6 + [3], [7] + [128] * 6 + [1]),
}

# Residual weights and (ic, bc) per base problem; flux weights per (problem, relax).
_RESIDUAL = {
    "burgers-riemann": ((0.1,), 10.0, 10.0),
    "burgers-sine": ((0.5,), 5.0, 5.0),
    "swe-dam": ((0.01, 0.01), 1.0, 1.0),
    "swe-2shock": ((0.1, 0.1), 1.0, 1.0),
    "euler-sod": ((0.1, 0.05, 0.01), 5.0, 5.0),
    "euler-lax": ((1.0, 0.5, 0.1), 100.0, 100.0),
}

_FLUX = {
    ("burgers-riemann", 1): (2.0,),
    ("burgers-sine", 1): (2.0,),
    ("swe-dam", 1): (1.0, 1.0),
    ("swe-dam", 2): (0.0, 1.0),
    ("swe-2shock", 1): (1.0, 1.0),
    ("swe-2shock", 2): (0.0, 1.0),
    ("euler-sod", 1): (5.0, 5.0, 5.0),
    ("euler-sod", 2): (0.0, 5.0, 5.0),
    ("euler-sod", 3): (0.0, 0.0, 5.0),
    ("euler-lax", 1): (100.0, 100.0, 10.0),
    ("euler-lax", 2): (0.0, 100.0, 10.0),
    ("euler-lax", 3): (0.0, 0.0, 10.0),
}


def default_networks(problem: ProblemSpec) -> tuple[list[int], list[int] | None]:
    """u and v layer sizes; v is None in PINN mode."""
    if problem.stochastic is not None:
        u, v = UQ_NETWORKS[problem.name]
        v = v[:-1] + [problem.n_relaxed]  # other relax types keep the hidden widths
    else:
        u, v = NETWORKS[(problem.kind, problem.relax or problem.kind.n_rows)]
    return list(u), (None if problem.relax is None else list(v))


def default_weights(problem: ProblemSpec) -> LossWeights:
    """Weights for ``problem``; PINN mode reuses the residual, IC and BC weights."""
    base = problem.name.removesuffix("-uq")
    residual, ic, bc = _RESIDUAL[base]
    if problem.relax is None:
        flux = (0.0,) * problem.kind.n_rows
    else:
        flux = _FLUX[(base, problem.relax)]
    return LossWeights(residual, flux, ic, bc)
