"""Weighted PINN / RelaxNN losses and the Adam training loop."""

from __future__ import annotations

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .autodiff import Node, Tape
from .mlp import (
    SPACE,
    TIME,
    BoundNet,
    MlpConfig,
    ParamSet,
    _resolve,
    bind,
    forward,
    forward_with_input_derivatives,
    init_he_uniform,
)
from .sampling import DEFAULT_COUNTS, PointSets, sample_points
from .systems import ROW_SUFFIXES, ProblemSpec, flux_mismatch_terms, relaxed_rows, residual_terms

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class LossWeights:
    """Per-row residual and flux weights plus IC/BC weights.

    In PINN mode the residual weights act as the PDE weights and ``flux`` is
    ignored.
    """

    residual: tuple[float, ...]
    flux: tuple[float, ...]
    ic: float
    bc: float

    def __post_init__(self):
        vals = [*self.residual, *self.flux, self.ic, self.bc]
        if any(w < 0 for w in vals):
            raise ValueError("loss weights must be non-negative")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 300_000
    lr: float = 1e-3
    decay_rate: float = 0.99
    decay_every: int = 1000
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 1
    resample: bool = False
    checkpoint_every: int = 0
    divergence_threshold: float = 1e8

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")
        if self.lr <= 0:
            raise ValueError("learning rate must be positive")


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0

    @classmethod
    def zeros(cls, n: int) -> AdamState:
        return cls(np.zeros(n), np.zeros(n), 0)


class TrainingDiverged(RuntimeError):
    def __init__(self, message: str, history: list[dict]):
        super().__init__(message)
        self.history = history


def term_names(problem: ProblemSpec) -> list[str]:
    n = problem.kind.n_rows
    names = [f"residual_{ROW_SUFFIXES[r]}" for r in range(n)]
    names += [f"flux_{ROW_SUFFIXES[r]}" for r in relaxed_rows(problem.kind, problem.relax)]
    return names + ["ic", "bc"]


def term_weights(problem: ProblemSpec, weights: LossWeights) -> dict[str, float]:
    n = problem.kind.n_rows
    if len(weights.residual) != n or len(weights.flux) != n:
        raise ValueError(f"{problem.kind.value} needs {n} residual and flux weights")
    out = {f"residual_{ROW_SUFFIXES[r]}": float(weights.residual[r]) for r in range(n)}
    for r in relaxed_rows(problem.kind, problem.relax):
        out[f"flux_{ROW_SUFFIXES[r]}"] = float(weights.flux[r])
    out["ic"] = float(weights.ic)
    out["bc"] = float(weights.bc)
    return out


def boundary_targets(problem: ProblemSpec, pts: np.ndarray) -> np.ndarray:
    """Initial data at the x (and z) coordinates of ``pts``: shape (N, n_prims)."""
    if problem.stochastic is not None:
        from .uq import stochastic_initial_state

        return stochastic_initial_state(problem, pts[:, 1], pts[:, 2:])
    from .systems import initial_state

    return initial_state(problem, pts[:, 1])


def _data_misfit(outputs: list[Node], target: np.ndarray) -> Node:
    total = None
    for k, out in enumerate(outputs):
        sq = (out - target[:, k]).square().mean()
        total = sq if total is None else total + sq
    return total


def total_loss(
    points: PointSets,
    u_params: ParamSet | BoundNet,
    v_params: ParamSet | BoundNet | None,
    problem: ProblemSpec,
    weights: LossWeights,
    tape: Tape | None = None,
    targets: tuple[np.ndarray, np.ndarray] | None = None,
) -> tuple[Node, dict[str, Node]]:
    """Weighted loss root plus unweighted per-term nodes (mean squares).

    RelaxNN mode requires ``v_params`` and ``problem.relax``; PINN mode
    (``problem.relax is None``) forbids ``v_params``.
    """
    relax = problem.relax
    if (relax is None) != (v_params is None):
        raise ValueError("v-network parameters must be given exactly in RelaxNN mode")
    if tape is None:
        tape = u_params.tape if isinstance(u_params, BoundNet) else Tape()
    u_net = _resolve(u_params, tape)
    v_net = None if v_params is None else _resolve(v_params, tape)
    kind = problem.kind
    rows = relaxed_rows(kind, relax)

    u_wrt = {TIME, SPACE} if len(rows) < kind.n_rows else {TIME}
    u_trip = forward_with_input_derivatives(u_net, points.interior, u_wrt)
    v_trip = [] if v_net is None else forward_with_input_derivatives(v_net, points.interior, {SPACE})
    if v_net is not None and len(v_trip) != len(rows):
        raise ValueError(f"v-network has {len(v_trip)} outputs, variant relaxes {len(rows)} rows")

    terms: dict[str, Node] = {}
    for r, res in enumerate(residual_terms(kind, relax, u_trip, v_trip, problem.g, problem.gamma)):
        terms[f"residual_{ROW_SUFFIXES[r]}"] = res.square().mean()
    if rows:
        mism = flux_mismatch_terms(
            kind,
            relax,
            [t.value for t in u_trip],
            [t.value for t in v_trip],
            problem.g,
            problem.gamma,
        )
        for r, m in zip(rows, mism):
            terms[f"flux_{ROW_SUFFIXES[r]}"] = m.square().mean()

    if targets is None:
        targets = (boundary_targets(problem, points.ic), boundary_targets(problem, points.bc))
    terms["ic"] = _data_misfit(forward(u_net, points.ic), targets[0])
    terms["bc"] = _data_misfit(forward(u_net, points.bc), targets[1])

    w = term_weights(problem, weights)
    root = None
    for name in term_names(problem):
        piece = terms[name] * w[name]
        root = piece if root is None else root + piece
    return root, terms


def lr_at(epoch: int, config: TrainConfig) -> float:
    """Staircase exponential decay."""
    if epoch < 0:
        raise ValueError("epoch must be non-negative")
    return config.lr * config.decay_rate ** (epoch // config.decay_every)


def adam_step(
    params: np.ndarray,
    grads: np.ndarray,
    state: AdamState,
    lr: float,
    config: TrainConfig,
) -> tuple[np.ndarray, AdamState]:
    """One bias-corrected Adam update; returns new arrays, inputs untouched."""
    if params.shape != grads.shape or state.m.shape != params.shape:
        raise ValueError("parameter, gradient and moment shapes must agree")
    step = state.step + 1
    m = config.beta1 * state.m + (1.0 - config.beta1) * grads
    v = config.beta2 * state.v + (1.0 - config.beta2) * grads * grads
    m_hat = m / (1.0 - config.beta1**step)
    v_hat = v / (1.0 - config.beta2**step)
    new = params - lr * m_hat / (np.sqrt(v_hat) + config.adam_eps)
    return new, AdamState(m, v, step)


@dataclass
class TrainResult:
    u_params: ParamSet
    v_params: ParamSet | None
    history: list[dict] = field(default_factory=list)
    points: PointSets | None = None


def init_networks(
    problem: ProblemSpec,
    u_sizes,
    v_sizes,
    seed: int = 1,
) -> tuple[ParamSet, ParamSet | None]:
    u_seed, v_seed, _ = np.random.SeedSequence(seed).spawn(3)
    u_cfg = MlpConfig.from_sizes(u_sizes)
    if u_cfg.input_dim != problem.input_dim or u_cfg.output_dim != problem.n_prims:
        raise ValueError(
            f"u-network must map {problem.input_dim} inputs to {problem.n_prims} outputs"
        )
    u = init_he_uniform(u_cfg, u_seed)
    if problem.relax is None:
        if v_sizes is not None:
            raise ValueError("PINN mode takes no v-network")
        return u, None
    v_cfg = MlpConfig.from_sizes(v_sizes)
    if v_cfg.input_dim != problem.input_dim or v_cfg.output_dim != problem.n_relaxed:
        raise ValueError(
            f"v-network must map {problem.input_dim} inputs to {problem.n_relaxed} outputs"
        )
    return u, init_he_uniform(v_cfg, v_seed)


def points_seed(seed: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(seed).spawn(3)[2]


def train(
    problem: ProblemSpec,
    u_sizes,
    v_sizes,
    weights: LossWeights,
    config: TrainConfig,
    counts: tuple[int, int, int] = DEFAULT_COUNTS,
    points: PointSets | None = None,
    init: tuple[ParamSet, ParamSet | None] | None = None,
    checkpoint_dir: str | Path | None = None,
    on_epoch: Callable[[dict], None] | None = None,
) -> TrainResult:
    """Full-batch training, one Adam step per epoch.

    History entry ``e`` holds the loss evaluated at the parameters *before*
    the update of epoch ``e``.
    """
    u_params, v_params = init if init is not None else init_networks(
        problem, u_sizes, v_sizes, config.seed
    )
    pseed = points_seed(config.seed)
    if points is None:
        points = sample_points(problem, counts, pseed)
    resample_rng = np.random.SeedSequence(config.seed).spawn(4)[3] if config.resample else None

    u_n = u_params.n_params
    flat = np.concatenate([u_params.flat] + ([] if v_params is None else [v_params.flat]))
    state = AdamState.zeros(flat.size)
    names = term_names(problem)
    w = term_weights(problem, weights)
    targets = (boundary_targets(problem, points.ic), boundary_targets(problem, points.bc))
    history: list[dict] = []

    def unpack(vec):
        u = ParamSet(u_params.config, vec[:u_n])
        v = None if v_params is None else ParamSet(v_params.config, vec[u_n:])
        return u, v

    for epoch in range(config.epochs):
        if resample_rng is not None and epoch > 0:
            points = sample_points(problem, counts, resample_rng.spawn(1)[0])
            targets = (boundary_targets(problem, points.ic), boundary_targets(problem, points.bc))
        u_cur, v_cur = unpack(flat)
        tape = Tape()
        u_b = bind(u_cur, tape)
        v_b = None if v_cur is None else bind(v_cur, tape)
        root, terms = total_loss(points, u_b, v_b, problem, weights, tape, targets)
        lr = lr_at(epoch, config)
        record = {"epoch": epoch, "lr": lr, "total": float(root)}
        record.update({name: float(terms[name]) for name in names})
        history.append(record)
        if not math.isfinite(record["total"]) or record["total"] > config.divergence_threshold:
            raise TrainingDiverged(f"loss diverged at epoch {epoch}: {record['total']}", history)
        grads = tape.backward(root)
        g = u_b.flat_gradient(grads)
        if v_b is not None:
            g = np.concatenate([g, v_b.flat_gradient(grads)])
        flat, state = adam_step(flat, g, state, lr, config)
        if on_epoch is not None:
            on_epoch(record)
        if checkpoint_dir is not None and config.checkpoint_every and (
            (epoch + 1) % config.checkpoint_every == 0
        ):
            save_checkpoint(checkpoint_dir, *unpack(flat), tag=f"epoch{epoch + 1}")
    u_final, v_final = unpack(flat)
    log.debug("trained %s for %d epochs, weights %s", problem.name, config.epochs, w)
    return TrainResult(u_final, v_final, history, points)


def save_checkpoint(
    out_dir: str | Path, u: ParamSet, v: ParamSet | None, tag: str = "final"
) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = [out_dir / f"u_{tag}.bin"]
    u.save(paths[0])
    if v is not None:
        paths.append(out_dir / f"v_{tag}.bin")
        v.save(paths[1])
    return paths


def format_number(value) -> str:
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    return f"{float(value):.17g}"


def write_history(history: list[dict], path: str | Path) -> None:
    """JSON-lines, one object per epoch, numbers with 17 significant digits."""
    with open(path, "w") as fh:
        for rec in history:
            body = ", ".join(f'"{k}": {format_number(v)}' for k, v in rec.items())
            fh.write("{" + body + "}\n")
