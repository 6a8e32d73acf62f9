"""Experiment configuration files (INI syntax, one section per concern).

Only ``[experiment] problem`` is required. Every other key falls back to the
published defaults for that problem, mode and relaxation type::

    [experiment]
    problem = burgers-riemann
    mode = relaxnn
    relax_type = 1
    seed = 1
    out = runs/burgers-riemann

    [networks]
    u = 2, 128, 128, 128, 128, 1
    v = 2, 64, 64, 64, 64, 1

    [weights]
    residual = 0.1
    flux = 2.0
    ic = 10
    bc = 10

    [training]
    epochs = 300000
    ...
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .presets import default_networks, default_weights
from .sampling import DEFAULT_COUNTS
from .systems import ProblemSpec, figure_times, get_problem
from .trainer import LossWeights, TrainConfig

MODES = ("pinn", "relaxnn")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ReferenceConfig:
    cells: int = 400
    refine: int = 5
    cfl: float = 0.5
    times: tuple[float, ...] = ()


@dataclass(frozen=True)
class UQConfig:
    method: str = "mc"
    mc_samples: int = 1_000_000
    quad_points: int = 10
    reference_samples: int = 10_000
    cells: int = 400
    batch: int = 500

    def __post_init__(self):
        if self.method not in ("mc", "quad"):
            raise ConfigError(f"uq method must be mc or quad, got {self.method!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    problem: str
    mode: str
    relax_type: int | None
    u_sizes: tuple[int, ...]
    v_sizes: tuple[int, ...] | None
    weights: LossWeights
    train: TrainConfig
    counts: tuple[int, int, int] = DEFAULT_COUNTS
    out: str = "runs"
    reference: ReferenceConfig = field(default_factory=ReferenceConfig)
    uq: UQConfig = field(default_factory=UQConfig)

    @property
    def seed(self) -> int:
        return self.train.seed

    def problem_spec(self) -> ProblemSpec:
        return get_problem(self.problem, None if self.mode == "pinn" else self.relax_type)

    def output_times(self) -> tuple[float, ...]:
        return self.reference.times or figure_times(self.problem_spec())


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(s) for s in text.replace(",", " ").split())


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(s) for s in text.replace(",", " ").split())


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


_TRAIN_TYPES = {f.name: f.type for f in fields(TrainConfig)}


def _coerce(kind: str, text: str):
    if kind == "int":
        return int(text)
    if kind == "float":
        return float(text)
    if kind == "bool":
        return _bool(text)
    raise ConfigError(f"unsupported field type {kind}")


def build(
    problem: str,
    mode: str = "relaxnn",
    relax_type: int | None = None,
    **overrides,
) -> ExperimentConfig:
    """Config with table defaults for ``problem``; keyword overrides win."""
    if mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}, got {mode!r}")
    try:
        base = get_problem(problem)
    except KeyError as exc:
        raise ConfigError(f"unknown problem {problem!r}") from exc
    if mode == "pinn":
        relax_type = None
    elif relax_type is None:
        relax_type = base.relax if base.relax is not None else 1
    try:
        spec = base.with_relax(relax_type)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    u, v = default_networks(spec)
    cfg = ExperimentConfig(
        problem=problem,
        mode=mode,
        relax_type=relax_type,
        u_sizes=tuple(u),
        v_sizes=None if v is None else tuple(v),
        weights=default_weights(spec),
        train=TrainConfig(epochs=300_000 if spec.kind.value == "burgers" else 600_000),
    )
    cfg = replace(cfg, **overrides)
    validate(cfg)
    return cfg


def validate(cfg: ExperimentConfig) -> None:
    spec = cfg.problem_spec()
    n = spec.kind.n_rows
    if cfg.u_sizes[0] != spec.input_dim or cfg.u_sizes[-1] != spec.n_prims:
        raise ConfigError(f"u network must map {spec.input_dim} -> {spec.n_prims}")
    if cfg.mode == "pinn":
        if cfg.v_sizes is not None:
            raise ConfigError("pinn mode takes no v network")
    else:
        if cfg.v_sizes is None:
            raise ConfigError("relaxnn mode needs a v network")
        if cfg.v_sizes[0] != spec.input_dim or cfg.v_sizes[-1] != spec.n_relaxed:
            raise ConfigError(
                f"v network must map {spec.input_dim} -> {spec.n_relaxed} for relax type "
                f"{cfg.relax_type}"
            )
    if len(cfg.weights.residual) != n or len(cfg.weights.flux) != n:
        raise ConfigError(f"residual and flux weights need {n} entries")
    if cfg.mode == "relaxnn":
        rows = set(range(cfg.relax_type - 1, n))
        for k, w in enumerate(cfg.weights.flux):
            if (k in rows) != (w > 0):
                raise ConfigError(
                    f"flux weight for row {k} inconsistent with relax type {cfg.relax_type}"
                )
    if len(cfg.counts) != 3 or min(cfg.counts) < 1:
        raise ConfigError("sampling counts must be three positive integers")


def parse(text: str) -> ExperimentConfig:
    parser = configparser.ConfigParser()
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    known = {"experiment", "networks", "weights", "training", "sampling", "reference", "uq"}
    unknown = set(parser.sections()) - known
    if unknown:
        raise ConfigError(f"unknown sections: {sorted(unknown)}")
    if not parser.has_option("experiment", "problem"):
        raise ConfigError("[experiment] problem is required")
    try:
        return _parse_sections(parser)
    except (ValueError, KeyError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid config value: {exc}") from exc


def _parse_sections(parser: configparser.ConfigParser) -> ExperimentConfig:
    exp = parser["experiment"]
    _reject_unknown(exp, {"problem", "mode", "relax_type", "seed", "out"})
    relax = exp.get("relax_type")
    cfg = build(
        exp["problem"],
        exp.get("mode", "relaxnn"),
        None if relax in (None, "", "none") else int(relax),
    )
    changes: dict = {}
    if "out" in exp:
        changes["out"] = exp["out"]
    if parser.has_section("networks"):
        net = parser["networks"]
        _reject_unknown(net, {"u", "v"})
        if "u" in net:
            changes["u_sizes"] = _ints(net["u"])
        if "v" in net:
            changes["v_sizes"] = None if net["v"].strip() == "none" else _ints(net["v"])
    if parser.has_section("weights"):
        w = parser["weights"]
        _reject_unknown(w, {"residual", "flux", "ic", "bc"})
        cur = cfg.weights
        changes["weights"] = LossWeights(
            _floats(w["residual"]) if "residual" in w else cur.residual,
            _floats(w["flux"]) if "flux" in w else cur.flux,
            float(w.get("ic", cur.ic)),
            float(w.get("bc", cur.bc)),
        )
    train_kw = {}
    if parser.has_section("training"):
        sec = parser["training"]
        _reject_unknown(sec, set(_TRAIN_TYPES))
        train_kw = {k: _coerce(_TRAIN_TYPES[k], v) for k, v in sec.items()}
    if "seed" in exp:
        train_kw["seed"] = int(exp["seed"])
    if train_kw:
        changes["train"] = replace(cfg.train, **train_kw)
    if parser.has_section("sampling"):
        s = parser["sampling"]
        _reject_unknown(s, {"interior", "ic", "bc"})
        d = cfg.counts
        changes["counts"] = (
            int(s.get("interior", d[0])),
            int(s.get("ic", d[1])),
            int(s.get("bc", d[2])),
        )
    if parser.has_section("reference"):
        r = parser["reference"]
        _reject_unknown(r, {"cells", "refine", "cfl", "times"})
        d = cfg.reference
        changes["reference"] = ReferenceConfig(
            int(r.get("cells", d.cells)),
            int(r.get("refine", d.refine)),
            float(r.get("cfl", d.cfl)),
            _floats(r["times"]) if "times" in r else d.times,
        )
    if parser.has_section("uq"):
        q = parser["uq"]
        allowed = {f.name for f in fields(UQConfig)}
        _reject_unknown(q, allowed)
        kw = {k: (v if k == "method" else int(v)) for k, v in q.items()}
        changes["uq"] = replace(cfg.uq, **kw)
    cfg = replace(cfg, **changes)
    validate(cfg)
    return cfg


def _reject_unknown(section, allowed: set[str]) -> None:
    extra = set(section.keys()) - allowed
    if extra:
        raise ConfigError(f"unknown keys in [{section.name}]: {sorted(extra)}")


def load(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return parse(path.read_text())


def _fmt(values) -> str:
    # repr() is the shortest text that round-trips a float exactly.
    return ", ".join(repr(float(v)) if isinstance(v, float) else str(v) for v in values)


def serialize(cfg: ExperimentConfig) -> str:
    """Text form listing every field; ``parse(serialize(c)) == c``."""
    t = cfg.train
    lines = [
        "[experiment]",
        f"problem = {cfg.problem}",
        f"mode = {cfg.mode}",
        f"relax_type = {'none' if cfg.relax_type is None else cfg.relax_type}",
        f"seed = {t.seed}",
        f"out = {cfg.out}",
        "",
        "[networks]",
        f"u = {_fmt(cfg.u_sizes)}",
        f"v = {'none' if cfg.v_sizes is None else _fmt(cfg.v_sizes)}",
        "",
        "[weights]",
        f"residual = {_fmt(map(float, cfg.weights.residual))}",
        f"flux = {_fmt(map(float, cfg.weights.flux))}",
        f"ic = {float(cfg.weights.ic)!r}",
        f"bc = {float(cfg.weights.bc)!r}",
        "",
        "[training]",
    ]
    for f in fields(TrainConfig):
        if f.name == "seed":
            continue
        val = getattr(t, f.name)
        if isinstance(val, bool):
            text = "true" if val else "false"
        elif isinstance(val, float):
            text = repr(val)
        else:
            text = str(val)
        lines.append(f"{f.name} = {text}")
    r, q = cfg.reference, cfg.uq
    lines += [
        "",
        "[sampling]",
        f"interior = {cfg.counts[0]}",
        f"ic = {cfg.counts[1]}",
        f"bc = {cfg.counts[2]}",
        "",
        "[reference]",
        f"cells = {r.cells}",
        f"refine = {r.refine}",
        f"cfl = {r.cfl!r}",
    ]
    if r.times:
        lines.append(f"times = {_fmt(map(float, r.times))}")
    lines += ["", "[uq]"] + [f"{f.name} = {getattr(q, f.name)}" for f in fields(UQConfig)]
    return "\n".join(lines) + "\n"
