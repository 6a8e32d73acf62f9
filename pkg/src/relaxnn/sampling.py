"""Uniform random collocation points."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .mlp import make_rng
from .systems import ProblemSpec

DEFAULT_COUNTS = (2540, 320, 160)


@dataclass
class PointSets:
    """Rows are network inputs ``(t, x, z...)``."""

    interior: np.ndarray
    ic: np.ndarray
    bc: np.ndarray

    @property
    def sizes(self) -> tuple[int, int, int]:
        return len(self.interior), len(self.ic), len(self.bc)

    def to_csv(self, path: str | Path) -> None:
        width = self.interior.shape[1]
        header = ["set", "t", "x"] + [f"z{i + 1}" for i in range(width - 2)]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for name, arr in (("interior", self.interior), ("ic", self.ic), ("bc", self.bc)):
                for row in arr:
                    writer.writerow([name] + [f"{v:.17g}" for v in row])


def sample_points(
    problem: ProblemSpec,
    counts: tuple[int, int, int] = DEFAULT_COUNTS,
    seed: int | np.random.SeedSequence = 1,
) -> PointSets:
    """Interior points uniform over the space-time rectangle, IC points on t = t0,
    BC points split evenly between x_min and x_max with uniform t.

    For stochastic problems every point gets z ~ U([-1, 1]^s) appended.
    """
    n_r, n_ic, n_bc = (int(c) for c in counts)
    if min(n_r, n_ic, n_bc) < 1:
        raise ValueError("point counts must be positive")
    rng = make_rng(seed)
    t0, t1, x0, x1 = problem.t0, problem.t_end, problem.x_min, problem.x_max

    interior = np.column_stack([rng.uniform(t0, t1, n_r), rng.uniform(x0, x1, n_r)])
    ic = np.column_stack([np.full(n_ic, t0), rng.uniform(x0, x1, n_ic)])
    n_left = n_bc - n_bc // 2
    bc_x = np.concatenate([np.full(n_left, x0), np.full(n_bc - n_left, x1)])
    bc = np.column_stack([rng.uniform(t0, t1, n_bc), bc_x])

    s = problem.stochastic_dim
    if s:
        interior = np.column_stack([interior, rng.uniform(-1.0, 1.0, (n_r, s))])
        ic = np.column_stack([ic, rng.uniform(-1.0, 1.0, (n_ic, s))])
        bc = np.column_stack([bc, rng.uniform(-1.0, 1.0, (n_bc, s))])
    return PointSets(interior, ic, bc)
