"""RelaxNN vs PINN comparison on one problem with an identical budget."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .metrics import ErrorReport, ReferenceField, evaluate, reference_solution, write_report
from .presets import default_weights
from .systems import get_problem
from .trainer import TrainConfig, TrainResult, format_number, save_checkpoint, train, write_history

DESK_U = (2, 64, 64, 64, 1)
DESK_V = (2, 32, 32, 32, 1)
DESK_EPOCHS = 30_000


@dataclass
class ModeOutcome:
    mode: str
    final_loss: float
    report: ErrorReport
    result: TrainResult


@dataclass
class Comparison:
    relaxnn: ModeOutcome
    pinn: ModeOutcome

    def summary(self) -> dict:
        return {
            m.mode: {"relative_l2": m.report.relative_l2, "final_loss": m.final_loss}
            for m in (self.relaxnn, self.pinn)
        }


def compare(
    problem_name: str = "burgers-riemann",
    relax: int = 1,
    u_sizes=DESK_U,
    v_sizes=DESK_V,
    epochs: int = DESK_EPOCHS,
    seed: int = 1,
    reference: ReferenceField | None = None,
    out_dir: str | Path | None = None,
    on_epoch=None,
) -> Comparison:
    """Train both variants from the same seed and evaluate on the figure times.

    The PINN baseline reuses the RelaxNN residual, IC and BC weights and the
    same u-network architecture. ``on_epoch(mode, record)`` observes training.
    """
    outcomes = {}
    for mode, rel, v in (("relaxnn", relax, v_sizes), ("pinn", None, None)):
        problem = get_problem(problem_name, rel)
        if reference is None:
            reference = reference_solution(problem)
        hook = None if on_epoch is None else (lambda rec, m=mode: on_epoch(m, rec))
        result = train(
            problem,
            list(u_sizes),
            None if v is None else list(v),
            default_weights(problem),
            TrainConfig(epochs=epochs, seed=seed),
            on_epoch=hook,
        )
        report = evaluate(result.u_params, problem, reference)
        outcomes[mode] = ModeOutcome(mode, result.history[-1]["total"], report, result)
        if out_dir is not None:
            d = Path(out_dir) / mode
            d.mkdir(parents=True, exist_ok=True)
            write_history(result.history, d / "history.jsonl")
            save_checkpoint(d / "checkpoints", result.u_params, result.v_params)
            write_report(report, problem, d / "eval")
    cmp = Comparison(outcomes["relaxnn"], outcomes["pinn"])
    if out_dir is not None:
        body = {
            mode: {k: format_number(v) for k, v in vals.items()}
            for mode, vals in cmp.summary().items()
        }
        (Path(out_dir) / "summary.json").write_text(json.dumps(body, indent=2) + "\n")
    return cmp
