"""First-order Godunov finite-volume reference solver and exact Riemann solutions.

Cell states are conserved variables with the cell axis second to last, so a
batch of independent runs (an ensemble over random initial data) can be
advanced together as an array of shape (batch, n_cells, n_vars).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .systems import (
    Kind,
    ProblemSpec,
    conserved_to_primitive,
    initial_state,
    primitive_to_conserved,
)


class FVError(RuntimeError):
    """Positivity loss or another unrecoverable solver state."""


@dataclass(frozen=True)
class Grid1D:
    x_min: float
    x_max: float
    n_cells: int

    def __post_init__(self):
        if self.n_cells < 2:
            raise ValueError("need at least two cells")
        if not self.x_min < self.x_max:
            raise ValueError("need x_min < x_max")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.n_cells

    @property
    def centers(self) -> np.ndarray:
        return self.x_min + (np.arange(self.n_cells) + 0.5) * self.dx

    @classmethod
    def for_problem(cls, problem: ProblemSpec, n_cells: int) -> Grid1D:
        return cls(problem.x_min, problem.x_max, n_cells)


# --- numerical fluxes --------------------------------------------------------


def godunov_flux_burgers(u_left, u_right):
    """Exact Godunov flux for f(u) = u^2/2."""
    ul = np.asarray(u_left, dtype=np.float64)
    ur = np.asarray(u_right, dtype=np.float64)
    fl = 0.5 * ul * ul
    fr = 0.5 * ur * ur
    shock_speed = 0.5 * (ul + ur)
    shock = np.where(shock_speed > 0.0, fl, fr)
    fan = np.where(ul > 0.0, fl, np.where(ur < 0.0, fr, 0.0))
    return np.where(ul > ur, shock, fan)


def _swe_flux(q, g):
    h, hu = q[..., 0], q[..., 1]
    u = hu / h
    return np.stack([hu, hu * u + 0.5 * g * h * h], axis=-1)


def hll_flux_swe(q_left, q_right, g: float = 1.0):
    """HLL flux with Davis wave-speed bounds; q = (h, hu)."""
    ql = np.asarray(q_left, dtype=np.float64)
    qr = np.asarray(q_right, dtype=np.float64)
    hl, hr = ql[..., 0], qr[..., 0]
    if np.any(hl <= 0) or np.any(hr <= 0):
        raise FVError("non-positive water depth")
    ul, ur = ql[..., 1] / hl, qr[..., 1] / hr
    cl, cr = np.sqrt(g * hl), np.sqrt(g * hr)
    sl = np.minimum(ul - cl, ur - cr)[..., None]
    sr = np.maximum(ul + cl, ur + cr)[..., None]
    fl, fr = _swe_flux(ql, g), _swe_flux(qr, g)
    with np.errstate(divide="ignore", invalid="ignore"):
        mid = (sr * fl - sl * fr + sl * sr * (qr - ql)) / (sr - sl)
    out = np.where(sl >= 0.0, fl, np.where(sr <= 0.0, fr, mid))
    same = np.all(ql == qr, axis=-1, keepdims=True)
    return np.where(same, fl, out)


def _euler_parts(q, gamma):
    rho, mom, energy = q[..., 0], q[..., 1], q[..., 2]
    u = mom / rho
    p = (gamma - 1.0) * (energy - 0.5 * rho * u * u)
    return rho, u, p, energy


def _euler_flux(rho, u, p, energy):
    return np.stack([rho * u, rho * u * u + p, u * (energy + p)], axis=-1)


def hllc_flux_euler(q_left, q_right, gamma: float = 1.4):
    """HLLC flux (Davis speed bounds, standard contact speed); q = (rho, rho u, E)."""
    ql = np.asarray(q_left, dtype=np.float64)
    qr = np.asarray(q_right, dtype=np.float64)
    rl, ul, pl, el = _euler_parts(ql, gamma)
    rr, ur, pr, er = _euler_parts(qr, gamma)
    if np.any(rl <= 0) or np.any(rr <= 0) or np.any(pl <= 0) or np.any(pr <= 0):
        raise FVError("non-positive density or pressure")
    al, ar = np.sqrt(gamma * pl / rl), np.sqrt(gamma * pr / rr)
    sl = np.minimum(ul - al, ur - ar)
    sr = np.maximum(ul + al, ur + ar)
    s_star = (pr - pl + rl * ul * (sl - ul) - rr * ur * (sr - ur)) / (
        rl * (sl - ul) - rr * (sr - ur)
    )
    fl = _euler_flux(rl, ul, pl, el)
    fr = _euler_flux(rr, ur, pr, er)

    def star_state(rho, u, p, energy, s):
        coef = rho * (s - u) / (s - s_star)
        return np.stack(
            [
                coef,
                coef * s_star,
                coef * (energy / rho + (s_star - u) * (s_star + p / (rho * (s - u)))),
            ],
            axis=-1,
        )

    with np.errstate(divide="ignore", invalid="ignore"):
        fl_star = fl + sl[..., None] * (star_state(rl, ul, pl, el, sl) - ql)
        fr_star = fr + sr[..., None] * (star_state(rr, ur, pr, er, sr) - qr)
    sl, sr, s_star = sl[..., None], sr[..., None], s_star[..., None]
    out = np.where(
        sl >= 0.0,
        fl,
        np.where(s_star >= 0.0, fl_star, np.where(sr > 0.0, fr_star, fr)),
    )
    same = np.all(ql == qr, axis=-1, keepdims=True)
    return np.where(same, fl, out)


def numerical_flux(problem: ProblemSpec, q_left, q_right):
    if problem.kind is Kind.BURGERS:
        return godunov_flux_burgers(q_left[..., 0], q_right[..., 0])[..., None]
    if problem.kind is Kind.SWE:
        return hll_flux_swe(q_left, q_right, problem.g)
    return hllc_flux_euler(q_left, q_right, problem.gamma)


def max_wave_speed(problem: ProblemSpec, q) -> float:
    prim = conserved_to_primitive(problem.kind, q, problem.gamma)
    if problem.kind is Kind.BURGERS:
        return float(np.max(np.abs(prim[..., 0])))
    if problem.kind is Kind.SWE:
        return float(np.max(np.abs(prim[..., 1]) + np.sqrt(problem.g * prim[..., 0])))
    rho, u, p = prim[..., 0], prim[..., 1], prim[..., 2]
    return float(np.max(np.abs(u) + np.sqrt(problem.gamma * p / rho)))


# --- time stepping -------------------------------------------------------------


@dataclass
class Solution:
    problem: ProblemSpec
    grid: Grid1D
    times: list[float] = field(default_factory=list)
    states: list[np.ndarray] = field(default_factory=list)  # conserved, (..., n_cells, n_vars)
    # Time integral of (right boundary flux - left boundary flux) up to each snapshot.
    boundary_outflow: list[np.ndarray] = field(default_factory=list)
    steps: int = 0

    def primitives(self, i: int) -> np.ndarray:
        return conserved_to_primitive(self.problem.kind, self.states[i], self.problem.gamma)

    def totals(self, i: int) -> np.ndarray:
        return self.states[i].sum(axis=-2) * self.grid.dx


def cell_initial_data(problem: ProblemSpec, grid: Grid1D) -> np.ndarray:
    """Initial data sampled at cell centers, as conserved variables."""
    prim = initial_state(problem, grid.centers)
    return primitive_to_conserved(problem.kind, prim, problem.gamma)


def _check_positivity(problem: ProblemSpec, q, step: int, t: float) -> None:
    if problem.kind is Kind.BURGERS:
        return
    prim = conserved_to_primitive(problem.kind, q, problem.gamma)
    bad = prim[..., 0] <= 0
    if problem.kind is Kind.EULER:
        bad = bad | (prim[..., 2] <= 0)
    if np.any(bad):
        where = np.argwhere(bad)[0]
        raise FVError(f"positivity lost at step {step}, t={t:.6g}, cell index {tuple(where)}")


def solve(
    problem: ProblemSpec,
    grid: Grid1D,
    cfl: float = 0.5,
    t_outputs=None,
    q0: np.ndarray | None = None,
) -> Solution:
    """Advance the first-order Godunov scheme and record snapshots at ``t_outputs``.

    Boundaries are zero-gradient. The step is cfl*dx/max|wave speed|,
    recomputed every step and clipped to land exactly on each output time. A
    batched ``q0`` shares one time step across the batch.
    """
    if not 0.0 < cfl <= 1.0:
        raise ValueError("cfl must lie in (0, 1]")
    if t_outputs is None:
        t_outputs = [problem.t_end]
    t_outputs = [float(t) for t in t_outputs]
    if any(b < a for a, b in zip(t_outputs, t_outputs[1:])):
        raise ValueError("output times must be ascending")
    if t_outputs and (t_outputs[0] < problem.t0 or t_outputs[-1] > problem.t_end + 1e-12):
        raise ValueError("output times must lie inside the time domain")

    q = cell_initial_data(problem, grid) if q0 is None else np.array(q0, dtype=np.float64)
    _check_positivity(problem, q, 0, problem.t0)
    sol = Solution(problem, grid)
    outflow = np.zeros(q.shape[:-2] + q.shape[-1:])
    t = problem.t0
    dx = grid.dx
    step = 0
    for t_out in t_outputs:
        while t < t_out:
            speed = max_wave_speed(problem, q)
            dt = cfl * dx / speed if speed > 0 else t_out - t
            if t + dt >= t_out:
                dt = t_out - t
            padded = np.concatenate([q[..., :1, :], q, q[..., -1:, :]], axis=-2)
            flux = numerical_flux(problem, padded[..., :-1, :], padded[..., 1:, :])
            q = q - (dt / dx) * (flux[..., 1:, :] - flux[..., :-1, :])
            outflow = outflow + dt * (flux[..., -1, :] - flux[..., 0, :])
            step += 1
            t = t_out if dt == t_out - t else t + dt
            _check_positivity(problem, q, step, t)
        sol.times.append(t_out)
        sol.states.append(q.copy())
        sol.boundary_outflow.append(outflow.copy())
    sol.steps = step
    return sol


def conservation_drift(sol: Solution) -> np.ndarray:
    """Relative imbalance of total conserved quantities after boundary-flux accounting.

    For each component: |total(T) - total(t0) + outflow| / sum(|q(t0)|) dx.
    ``sol.times[0]`` must be the initial time.
    """
    start = sol.totals(0)
    scale = np.abs(sol.states[0]).sum(axis=-2) * sol.grid.dx
    scale = np.where(scale > 0, scale, 1.0)
    end = sol.totals(-1)
    # Outflow is measured from t0; subtract what had accrued at the first snapshot.
    flow = sol.boundary_outflow[-1] - sol.boundary_outflow[0]
    return np.abs(end - start + flow) / scale


def l1_error(values, reference, dx: float) -> np.ndarray:
    """Per-component discrete L1 norm of the difference."""
    return np.abs(np.asarray(values) - np.asarray(reference)).sum(axis=-2) * dx


def write_snapshots(sol: Solution, out_dir: str | Path, prefix: str = "snapshot") -> list[Path]:
    """One CSV per output time: t, x_center, conserved columns, primitive columns."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    kind = sol.problem.kind
    header = ["t", "x_center"] + [f"q_{n}" for n in kind.conserved_names] + list(
        kind.primitive_names
    )
    paths = []
    for i, t in enumerate(sol.times):
        path = out_dir / f"{prefix}_t{t:.6f}.csv"
        prim = sol.primitives(i)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for x, qrow, prow in zip(sol.grid.centers, sol.states[i], prim):
                writer.writerow(
                    [f"{t:.17g}", f"{x:.17g}"]
                    + [f"{v:.17g}" for v in qrow]
                    + [f"{v:.17g}" for v in prow]
                )
        paths.append(path)
    return paths


def read_snapshot(path: str | Path, kind: Kind) -> tuple[float, np.ndarray, np.ndarray]:
    """Inverse of :func:`write_snapshots` for one file: (t, centers, primitives)."""
    rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    n = kind.n_rows
    return float(rows[0, 0]), rows[:, 1], rows[:, 2 + n : 2 + 2 * n]


# --- exact Riemann solutions ---------------------------------------------------


def exact_burgers_riemann(u_left: float, u_right: float, x, t: float):
    """Entropy solution of Burgers' equation with a jump at x = 0."""
    if t <= 0:
        raise ValueError("t must be positive")
    xi = np.asarray(x, dtype=np.float64) / t
    if u_left > u_right:
        s = 0.5 * (u_left + u_right)
        return np.where(xi < s, u_left, u_right)
    return np.where(xi <= u_left, u_left, np.where(xi >= u_right, u_right, xi))


@dataclass(frozen=True)
class StarState:
    p: float
    u: float


def _pressure_function(p, rho, pk, a, gamma):
    """Toro's f_K(p) and its derivative for one side of the Riemann fan."""
    if p > pk:
        big_a = 2.0 / ((gamma + 1.0) * rho)
        big_b = (gamma - 1.0) / (gamma + 1.0) * pk
        root = math.sqrt(big_a / (p + big_b))
        return (p - pk) * root, root * (1.0 - 0.5 * (p - pk) / (p + big_b))
    ratio = p / pk
    expo = (gamma - 1.0) / (2.0 * gamma)
    val = 2.0 * a / (gamma - 1.0) * (ratio**expo - 1.0)
    der = ratio ** (-(gamma + 1.0) / (2.0 * gamma)) / (rho * a)
    return val, der


def euler_star_state(left, right, gamma: float = 1.4, tol: float = 1e-12) -> StarState:
    """Star-region pressure and velocity by safeguarded Newton iteration.

    The pressure function is monotone increasing, so a bisection bracket is
    kept alongside Newton steps.
    """
    rl, ul, pl = (float(v) for v in left)
    rr, ur, pr = (float(v) for v in right)
    if min(rl, rr, pl, pr) <= 0:
        raise ValueError("density and pressure must be positive")
    al, ar = math.sqrt(gamma * pl / rl), math.sqrt(gamma * pr / rr)
    du = ur - ul
    if 2.0 * (al + ar) / (gamma - 1.0) <= du:
        raise ValueError("initial data generate vacuum")

    def f(p):
        fl, dl = _pressure_function(p, rl, pl, al, gamma)
        fr, dr = _pressure_function(p, rr, pr, ar, gamma)
        return fl + fr + du, dl + dr

    lo, hi = 0.0, max(pl, pr)
    while f(hi)[0] < 0.0:
        hi *= 2.0
    # Two-rarefaction approximation as the initial guess.
    expo = (gamma - 1.0) / (2.0 * gamma)
    guess = ((al + ar - 0.5 * (gamma - 1.0) * du) / (al / pl**expo + ar / pr**expo)) ** (1 / expo)
    p = min(max(guess, 1e-300), hi)
    for _ in range(200):
        val, der = f(p)
        if val > 0:
            hi = p
        else:
            lo = p
        p_new = p - val / der
        if not lo < p_new < hi:
            p_new = 0.5 * (lo + hi)
        if abs(p_new - p) <= tol * 0.5 * (p_new + p):
            p = p_new
            break
        p = p_new
    fl, _ = _pressure_function(p, rl, pl, al, gamma)
    fr, _ = _pressure_function(p, rr, pr, ar, gamma)
    return StarState(p, 0.5 * (ul + ur) + 0.5 * (fr - fl))


def exact_euler_riemann(left, right, gamma: float, x, t: float) -> np.ndarray:
    """Exact primitive solution (rho, u, p) at points ``x`` and time ``t`` > 0."""
    if t <= 0:
        raise ValueError("t must be positive")
    rl, ul, pl = (float(v) for v in left)
    rr, ur, pr = (float(v) for v in right)
    star = euler_star_state(left, right, gamma)
    ps, us = star.p, star.u
    al, ar = math.sqrt(gamma * pl / rl), math.sqrt(gamma * pr / rr)
    g1 = (gamma - 1.0) / (gamma + 1.0)
    xs = np.atleast_1d(np.asarray(x, dtype=np.float64))
    out = np.empty(xs.shape + (3,))
    for i, s in enumerate((xs / t).ravel()):
        if s <= us:
            if ps > pl:
                sh = ul - al * math.sqrt((gamma + 1) / (2 * gamma) * ps / pl + (gamma - 1) / (2 * gamma))
                if s <= sh:
                    state = (rl, ul, pl)
                else:
                    state = (rl * (ps / pl + g1) / (g1 * ps / pl + 1.0), us, ps)
            else:
                head = ul - al
                tail = us - al * (ps / pl) ** ((gamma - 1) / (2 * gamma))
                if s <= head:
                    state = (rl, ul, pl)
                elif s >= tail:
                    state = (rl * (ps / pl) ** (1 / gamma), us, ps)
                else:
                    c = 2 / (gamma + 1) + g1 / al * (ul - s)
                    state = (
                        rl * c ** (2 / (gamma - 1)),
                        2 / (gamma + 1) * (al + 0.5 * (gamma - 1) * ul + s),
                        pl * c ** (2 * gamma / (gamma - 1)),
                    )
        else:
            if ps > pr:
                sh = ur + ar * math.sqrt((gamma + 1) / (2 * gamma) * ps / pr + (gamma - 1) / (2 * gamma))
                if s >= sh:
                    state = (rr, ur, pr)
                else:
                    state = (rr * (ps / pr + g1) / (g1 * ps / pr + 1.0), us, ps)
            else:
                head = ur + ar
                tail = us + ar * (ps / pr) ** ((gamma - 1) / (2 * gamma))
                if s >= head:
                    state = (rr, ur, pr)
                elif s <= tail:
                    state = (rr * (ps / pr) ** (1 / gamma), us, ps)
                else:
                    c = 2 / (gamma + 1) - g1 / ar * (ur - s)
                    state = (
                        rr * c ** (2 / (gamma - 1)),
                        2 / (gamma + 1) * (-ar + 0.5 * (gamma - 1) * ur + s),
                        pr * c ** (2 * gamma / (gamma - 1)),
                    )
        out.reshape(-1, 3)[i] = state
    return out if np.ndim(x) else out[0]


def exact_sod(left, right, gamma: float, x, t: float) -> np.ndarray:
    """Exact shock-tube solution; alias of :func:`exact_euler_riemann`."""
    return exact_euler_riemann(left, right, gamma, x, t)
