"""Error metrics and evaluation of trained networks against reference solutions."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .fvref import Grid1D, Solution, read_snapshot, solve
from .mlp import ParamSet, predict
from .systems import ProblemSpec, figure_times


def relative_l2(pred, ref) -> float:
    """||pred - ref||_2 / ||ref||_2 with every entry stacked into one vector."""
    pred = np.asarray(pred, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    if pred.shape != ref.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {ref.shape}")
    denom = np.linalg.norm(ref.ravel())
    if denom == 0.0:
        raise ValueError("reference field has zero norm")
    return float(np.linalg.norm((pred - ref).ravel()) / denom)


@dataclass
class ReferenceField:
    """Primitive reference values on the evaluation grid, one array per time."""

    times: list[float]
    centers: np.ndarray
    values: list[np.ndarray]  # (n_cells, n_prims) each

    def stacked(self) -> np.ndarray:
        return np.stack(self.values)


@dataclass
class ErrorReport:
    relative_l2: float
    per_component: dict[str, float]
    times: list[float]
    centers: np.ndarray
    prediction: np.ndarray  # (n_times, n_cells, n_prims)
    reference: np.ndarray
    abs_error: np.ndarray


def reference_solution(
    problem: ProblemSpec,
    n_cells: int = 400,
    refine: int = 5,
    times=None,
    cfl: float = 0.5,
) -> ReferenceField:
    """Finite-volume reference sampled at the centers of an ``n_cells`` grid.

    The solve runs on ``n_cells * refine`` cells; with odd ``refine`` the
    middle fine cell of each block shares its center with the coarse cell.
    """
    if refine < 1 or refine % 2 == 0:
        raise ValueError("refine must be a positive odd integer")
    times = list(figure_times(problem) if times is None else times)
    fine = Grid1D.for_problem(problem, n_cells * refine)
    sol: Solution = solve(problem, fine, cfl, times)
    pick = np.arange(n_cells) * refine + refine // 2
    coarse = Grid1D.for_problem(problem, n_cells)
    values = [sol.primitives(i)[pick] for i in range(len(times))]
    return ReferenceField(times, coarse.centers, values)


def load_reference(ref_dir: str | Path, problem: ProblemSpec) -> ReferenceField:
    ref_dir = Path(ref_dir)
    files = sorted(ref_dir.glob("snapshot_t*.csv"))
    if not files:
        raise FileNotFoundError(f"missing reference: no snapshot files in {ref_dir}")
    times, values, centers = [], [], None
    for f in files:
        t, x, prim = read_snapshot(f, problem.kind)
        times.append(t)
        values.append(prim)
        centers = x
    return ReferenceField(times, centers, values)


def network_field(params: ParamSet, times, centers) -> np.ndarray:
    """u-network predictions, shape (n_times, n_cells, n_outputs)."""
    out = []
    for t in times:
        inputs = np.column_stack([np.full(len(centers), t), centers])
        out.append(predict(params, inputs))
    return np.stack(out)


def evaluate(params: ParamSet, problem: ProblemSpec, reference: ReferenceField) -> ErrorReport:
    pred = network_field(params, reference.times, reference.centers)
    ref = reference.stacked()
    per = {
        name: relative_l2(pred[..., k], ref[..., k])
        for k, name in enumerate(problem.kind.primitive_names)
        if np.any(ref[..., k] != 0)
    }
    return ErrorReport(
        relative_l2(pred, ref),
        per,
        list(reference.times),
        reference.centers,
        pred,
        ref,
        np.abs(pred - ref),
    )


def write_report(report: ErrorReport, problem: ProblemSpec, out_dir: str | Path) -> list[Path]:
    """error_report.csv, abs_error.csv and one slice_t*.csv per output time."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    names = problem.kind.primitive_names
    paths = [out_dir / "error_report.csv"]
    with open(paths[0], "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["quantity", "relative_l2"])
        writer.writerow(["all", f"{report.relative_l2:.17g}"])
        for name, val in report.per_component.items():
            writer.writerow([name, f"{val:.17g}"])
    paths.append(out_dir / "abs_error.csv")
    with open(paths[-1], "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "x"] + [f"abs_err_{n}" for n in names])
        for i, t in enumerate(report.times):
            for x, row in zip(report.centers, report.abs_error[i]):
                writer.writerow([f"{t:.17g}", f"{x:.17g}"] + [f"{v:.17g}" for v in row])
    for i, t in enumerate(report.times):
        path = out_dir / f"slice_t{t:.6f}.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["x"] + [f"pred_{n}" for n in names] + [f"ref_{n}" for n in names])
            for x, p, r in zip(report.centers, report.prediction[i], report.reference[i]):
                writer.writerow(
                    [f"{x:.17g}"] + [f"{v:.17g}" for v in p] + [f"{v:.17g}" for v in r]
                )
        paths.append(path)
    return paths
