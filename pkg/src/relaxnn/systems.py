"""Conservation laws, initial data and RelaxNN loss-term assembly.

Networks output primitive variables: ``u`` (Burgers), ``(h, u)`` (shallow
water) and ``(rho, u, p)`` (Euler). Conserved quantities and fluxes are
composed from them, both on plain numpy arrays and on tape nodes; the
expression helpers below only use ``+``, ``-`` and ``*`` so the same code
serves both.

Relaxation variants relax a suffix of the conservation rows. Type ``k``
relaxes rows ``k-1 .. n-1``:

=========  =============  ==========================
system     variant        relaxed rows (flux symbols)
=========  =============  ==========================
Burgers    type1          0 (v)
SWE        type1          0, 1 (v, phi)
SWE        type2          1 (phi)
Euler      type1          0, 1, 2 (v, phi, zeta)
Euler      type2          1, 2 (phi, zeta)
Euler      type3          2 (zeta)
=========  =============  ==========================

``relax=None`` means plain PINN: no rows are relaxed.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import TYPE_CHECKING

import numpy as np

from .autodiff import Node
from .mlp import SPACE, OutputTriple

if TYPE_CHECKING:
    from .uq import StochasticIC


class Kind(str, enum.Enum):
    BURGERS = "burgers"
    SWE = "swe"
    EULER = "euler"

    @property
    def n_rows(self) -> int:
        return {Kind.BURGERS: 1, Kind.SWE: 2, Kind.EULER: 3}[self]

    @property
    def max_relax(self) -> int:
        return self.n_rows

    @property
    def primitive_names(self) -> tuple[str, ...]:
        return {
            Kind.BURGERS: ("u",),
            Kind.SWE: ("h", "u"),
            Kind.EULER: ("rho", "u", "p"),
        }[self]

    @property
    def conserved_names(self) -> tuple[str, ...]:
        return {
            Kind.BURGERS: ("u",),
            Kind.SWE: ("h", "hu"),
            Kind.EULER: ("rho", "rhou", "E"),
        }[self]


ROW_SUFFIXES = ("m", "p", "e")


@dataclass(frozen=True)
class ProblemSpec:
    name: str
    kind: Kind
    t0: float
    t_end: float
    x_min: float
    x_max: float
    ic: str  # "riemann" or "sine"
    left: tuple[float, ...] = ()
    right: tuple[float, ...] = ()
    g: float = 1.0
    gamma: float = 1.4
    relax: int | None = 1
    stochastic: StochasticIC | None = None

    def __post_init__(self):
        if not self.t_end > self.t0:
            raise ValueError("need t_end > t0")
        if not self.x_min < self.x_max:
            raise ValueError("need x_min < x_max")
        if self.g <= 0:
            raise ValueError("gravity must be positive")
        if self.gamma <= 1:
            raise ValueError("adiabatic index must exceed 1")
        if self.relax is not None:
            check_relax(self.kind, self.relax)

    @property
    def n_prims(self) -> int:
        return self.kind.n_rows

    @property
    def n_relaxed(self) -> int:
        return len(relaxed_rows(self.kind, self.relax))

    @property
    def stochastic_dim(self) -> int:
        return 0 if self.stochastic is None else self.stochastic.dim

    @property
    def input_dim(self) -> int:
        return 2 + self.stochastic_dim

    def with_relax(self, relax: int | None) -> ProblemSpec:
        return replace(self, relax=relax)


def check_relax(kind: Kind, relax: int | None) -> None:
    if relax is None:
        return
    if not 1 <= relax <= kind.max_relax:
        raise ValueError(f"type{relax} relaxation is not defined for {kind.value}")


def relaxed_rows(kind: Kind, relax: int | None) -> list[int]:
    check_relax(kind, relax)
    if relax is None:
        return []
    return list(range(relax - 1, kind.n_rows))


# Figure output times per problem; used for reference snapshots and evaluation.
FIGURE_TIMES = {
    "burgers-riemann": (0.0, 0.2, 0.4, 0.6),
    "burgers-sine": (0.0, 0.2, 0.4, 0.6),
    "swe-dam": (0.0, 0.2, 0.4, 0.6),
    "swe-2shock": (0.0, 0.2, 0.4, 0.6),
    "euler-sod": (0.0, 0.08, 0.16, 0.24, 0.32, 0.40),
    "euler-lax": (0.0, 0.032, 0.064, 0.096, 0.128, 0.16),
}

CATALOG = {
    "burgers-riemann": ProblemSpec(
        "burgers-riemann", Kind.BURGERS, 0.0, 1.0, -0.6, 0.6, "riemann", (1.0,), (0.0,)
    ),
    "burgers-sine": ProblemSpec("burgers-sine", Kind.BURGERS, 0.0, 1.0, -1.0, 1.0, "sine"),
    "swe-dam": ProblemSpec(
        "swe-dam", Kind.SWE, 0.0, 1.0, -1.5, 1.5, "riemann", (1.0, 0.0), (0.5, 0.0)
    ),
    "swe-2shock": ProblemSpec(
        "swe-2shock", Kind.SWE, 0.0, 1.0, -1.0, 1.0, "riemann", (1.0, 1.0), (1.0, -1.0)
    ),
    "euler-sod": ProblemSpec(
        "euler-sod", Kind.EULER, 0.0, 0.4, -0.8, 0.8, "riemann", (1.0, 0.0, 1.0), (0.125, 0.0, 0.1)
    ),
    "euler-lax": ProblemSpec(
        "euler-lax",
        Kind.EULER,
        0.0,
        0.16,
        -0.5,
        0.5,
        "riemann",
        (0.445, 0.698, 3.528),
        (0.5, 0.0, 0.571),
    ),
}


_KEEP = object()


def get_problem(name: str, relax=_KEEP) -> ProblemSpec:
    """Look up a catalog problem; ``*-uq`` ids attach the stochastic IC.

    ``relax`` overrides the catalog's relaxation type (``None`` selects PINN).
    """
    from .uq import UQ_PROBLEMS  # uq depends on this module

    base = CATALOG.get(name) or UQ_PROBLEMS.get(name)
    if base is not None:
        return base if relax is _KEEP else base.with_relax(relax)
    known = sorted(CATALOG) + ["burgers-riemann-uq", "swe-2shock-uq", "euler-sod-uq"]
    raise KeyError(f"unknown problem {name!r}; known: {', '.join(known)}")


def figure_times(problem: ProblemSpec) -> tuple[float, ...]:
    base = problem.name.removesuffix("-uq")
    if base in FIGURE_TIMES:
        return FIGURE_TIMES[base]
    return tuple(np.linspace(problem.t0, problem.t_end, 5))


# --- algebra shared by numpy arrays and tape nodes -------------------------


def total_energy(rho, u, p, gamma: float):
    """E = p/(gamma-1) + rho*u^2/2."""
    return p * (1.0 / (gamma - 1.0)) + 0.5 * rho * u * u


def conserved(kind: Kind, prims, g: float = 1.0, gamma: float = 1.4) -> list:
    if kind is Kind.BURGERS:
        return [prims[0]]
    if kind is Kind.SWE:
        h, u = prims
        return [h, h * u]
    rho, u, p = prims
    return [rho, rho * u, total_energy(rho, u, p, gamma)]


def flux_rows(kind: Kind, prims, g: float = 1.0, gamma: float = 1.4) -> list:
    """Physical flux F(u) row by row, from primitive variables."""
    if kind is Kind.BURGERS:
        u = prims[0]
        return [0.5 * u * u]
    if kind is Kind.SWE:
        h, u = prims
        return [h * u, h * u * u + 0.5 * g * h * h]
    rho, u, p = prims
    # u(E + p) rewritten through the equation of state.
    energy_flux = (gamma / (gamma - 1.0)) * p * u + 0.5 * rho * u * u * u
    return [rho * u, rho * u * u + p, energy_flux]


def physical_flux(kind: Kind, state, g: float = 1.0, gamma: float = 1.4) -> np.ndarray:
    """F(u) for a primitive state (last axis = components)."""
    state = np.asarray(state, dtype=np.float64)
    prims = [state[..., k] for k in range(kind.n_rows)]
    return np.stack(flux_rows(kind, prims, g, gamma), axis=-1)


def primitive_to_conserved(kind: Kind, state, gamma: float = 1.4) -> np.ndarray:
    state = np.asarray(state, dtype=np.float64)
    prims = [state[..., k] for k in range(kind.n_rows)]
    return np.stack(conserved(kind, prims, gamma=gamma), axis=-1)


def conserved_to_primitive(kind: Kind, q, gamma: float = 1.4) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    if kind is Kind.BURGERS:
        return q.copy()
    if kind is Kind.SWE:
        h = q[..., 0]
        return np.stack([h, q[..., 1] / h], axis=-1)
    rho = q[..., 0]
    u = q[..., 1] / rho
    p = (gamma - 1.0) * (q[..., 2] - 0.5 * rho * u * u)
    return np.stack([rho, u, p], axis=-1)


def positivity_report(kind: Kind, state) -> dict[str, int]:
    """Count entries violating h > 0, rho > 0, p > 0 (diagnostic only)."""
    state = np.asarray(state)
    if kind is Kind.SWE:
        return {"h<=0": int(np.sum(state[..., 0] <= 0))}
    if kind is Kind.EULER:
        return {
            "rho<=0": int(np.sum(state[..., 0] <= 0)),
            "p<=0": int(np.sum(state[..., 2] <= 0)),
        }
    return {}


def initial_state(problem: ProblemSpec, x) -> np.ndarray:
    """Deterministic initial data; shape (..., n_prims).

    Riemann data assigns the left state at the discontinuity x = 0.
    """
    x = np.asarray(x, dtype=np.float64)
    tol = 1e-12 * (problem.x_max - problem.x_min)
    if np.any(x < problem.x_min - tol) or np.any(x > problem.x_max + tol):
        raise ValueError(f"x outside [{problem.x_min}, {problem.x_max}]")
    if problem.ic == "sine":
        return (-np.sin(math.pi * x))[..., None]
    if problem.ic != "riemann":
        raise ValueError(f"unknown initial condition {problem.ic!r}")
    left = np.asarray(problem.left, dtype=np.float64)
    right = np.asarray(problem.right, dtype=np.float64)
    return np.where((x <= 0.0)[..., None], left, right)


# --- loss terms on the tape --------------------------------------------------


@dataclass
class _Jet:
    """A value with one directional derivative; products follow the product rule."""

    val: object
    der: object

    def __add__(self, other):
        if isinstance(other, _Jet):
            return _Jet(self.val + other.val, self.der + other.der)
        return _Jet(self.val + other, self.der)

    __radd__ = __add__

    def __mul__(self, other):
        if isinstance(other, _Jet):
            return _Jet(self.val * other.val, self.der * other.val + self.val * other.der)
        return _Jet(self.val * other, self.der * other)

    def __rmul__(self, other):
        # constant * jet
        return _Jet(other * self.val, other * self.der)


def _jets(u_triples: list[OutputTriple], axis: str) -> list[_Jet]:
    out = []
    for trip in u_triples:
        d = trip.d_dt if axis == "t" else trip.d_dx
        if d is None:
            raise ValueError(f"u-network triple lacks the d/d{axis} channel")
        out.append(_Jet(trip.value, d))
    return out


def residual_terms(
    kind: Kind,
    relax: int | None,
    u_triples: list[OutputTriple],
    v_triples: list[OutputTriple] | None = None,
    g: float = 1.0,
    gamma: float = 1.4,
) -> list[Node]:
    """One residual node per conservation row.

    Row r is d/dt(conserved_r) + d/dx(flux_r), where flux_r is the v-network
    output for relaxed rows and the physical flux of the u-network otherwise.
    """
    rows = relaxed_rows(kind, relax)
    v_triples = v_triples or []
    if len(u_triples) != kind.n_rows:
        raise ValueError(f"{kind.value} needs {kind.n_rows} u outputs, got {len(u_triples)}")
    if len(v_triples) != len(rows):
        raise ValueError(
            f"type{relax} {kind.value} relaxes {len(rows)} rows, got {len(v_triples)} v outputs"
        )
    time_q = conserved(kind, _jets(u_triples, "t"), g, gamma)
    space_f = None
    out = []
    for r in range(kind.n_rows):
        if r in rows:
            vx = v_triples[rows.index(r)].d_dx
            if vx is None:
                raise ValueError("v-network triple lacks the d/dx channel")
            out.append(time_q[r].der + vx)
        else:
            if space_f is None:
                space_f = flux_rows(kind, _jets(u_triples, "x"), g, gamma)
            out.append(time_q[r].der + space_f[r].der)
    return out


def flux_mismatch_terms(
    kind: Kind,
    relax: int | None,
    u_values: list,
    v_values: list,
    g: float = 1.0,
    gamma: float = 1.4,
) -> list:
    """v - F_row(u) for each relaxed row, in row order."""
    rows = relaxed_rows(kind, relax)
    if len(v_values) != len(rows):
        raise ValueError(
            f"type{relax} {kind.value} relaxes {len(rows)} rows, got {len(v_values)} v values"
        )
    if len(u_values) != kind.n_rows:
        raise ValueError(f"{kind.value} needs {kind.n_rows} u values, got {len(u_values)}")
    flux = flux_rows(kind, list(u_values), g, gamma)
    return [v - flux[r] for v, r in zip(v_values, rows)]


def physical_flux_triples(
    kind: Kind,
    relax: int | None,
    u_triples: list[OutputTriple],
    g: float = 1.0,
    gamma: float = 1.4,
) -> list[OutputTriple]:
    """Stand-ins for the v-network carrying F_row(u) and its x-derivative exactly."""
    flux = flux_rows(kind, _jets(u_triples, "x"), g, gamma)
    return [
        OutputTriple(flux[r].val, {SPACE: flux[r].der}) for r in relaxed_rows(kind, relax)
    ]
