"""
The coupled time loop and the experiment scenarios built on it.

run_simulation advances momentum then transport each step and records a
NormSeries. The studies sweep it over reaction rates and initial levels
(decay), push it past the blow-up time (blow-up), verify the discrete
operators against manufactured solutions (mms) and compare two runs whose
initial data differ by a small constant (perturbation).
"""

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .analysis import (
    DEFAULT_EPS_TOL,
    BoundsReport,
    NormRecord,
    NormSeries,
    Verdict,
    blowup_time,
    check_bounds,
    late_decay_rate,
    lp_norm,
    mass,
)
from .core import SimConfig, StaggeredGrid, State, StepProfile, build_grid, init_state
from .csvio import ensure_directory, format_float, write_csv, write_snapshot
from .exceptions import (
    BlowUpDetected,
    ConfigException,
    DFBSimException,
    HypothesisViolation,
    InstabilityException,
    NoBlowupGuarantee,
    VerificationFailure,
)
from .linsolve import DEFAULT_TOL, poisson_neumann
from .momentum import MomentumParams, divergence, momentum_step, project, velocity_l2
from .transport import TransportParams, advect, diffuse, stable_dt, transport_step

logger = logging.getLogger(__name__)

SCENARIOS = ("simulate", "decay-study", "blowup-study", "mms", "perturbation")
RATE_TOLERANCE = 0.1
BLOWUP_HORIZON = 3.0
MMS_THRESHOLDS = {"diffusion": 1.9, "upwind": 0.9, "poisson": 1.9}
MAX_STEP_RETRIES = 8
STEP_SHRINK = 0.95


@dataclass(frozen=True, eq=False)
class ExperimentSpec:
    """
    What to run and where to put the results.

    Attributes:
        scenario (str): One of simulate, decay-study, blowup-study, mms, perturbation.
        base (SimConfig): Configuration every run derives from.
        kappas (tuple[float, ...]): Reaction rates swept by the decay study.
        m0s (tuple[float, ...]): Initial levels swept by the decay study.
        out_dir (str | None): Output directory for CSV files.
        snapshot_stride (int | None): Steps between concentration snapshots.
        workers (int): Concurrent sweep cells.
        eps_tol (float): Relative tolerance of the bound verdicts.
    """
    scenario: str
    base: SimConfig = field(default_factory=SimConfig)
    kappas: tuple[float, ...] = (0.005, 0.01, 0.02)
    m0s: tuple[float, ...] = (0.4, 0.6, 0.8)
    out_dir: Optional[str] = None
    snapshot_stride: Optional[int] = None
    workers: int = 1
    eps_tol: float = DEFAULT_EPS_TOL

    def validate(self) -> None:
        """
        Raises:
            ConfigException: On an unknown scenario, empty sweep or bad stride.
        """
        if self.scenario not in SCENARIOS:
            raise ConfigException(f"unknown scenario {self.scenario!r}")
        if self.scenario == "decay-study" and (not self.kappas or not self.m0s):
            raise ConfigException("decay study needs non-empty kappa and M0 lists")
        if self.snapshot_stride is not None and self.snapshot_stride < 1:
            raise ConfigException(f"snapshot stride must be >= 1, got {self.snapshot_stride}")
        if self.workers < 1:
            raise ConfigException(f"workers must be >= 1, got {self.workers}")


@dataclass(frozen=True)
class BlowUpEvent:
    """
    Where and when the concentration blew up.

    Attributes:
        time (float): Critical time of the first offending cell.
        cell (tuple[int, int]): That cell.
        step (int): Index of the step in which it happened.
    """
    time: float
    cell: tuple[int, int]
    step: int


def record_state(state: State, grid: StaggeredGrid) -> NormRecord:
    """Diagnostics of one state."""
    c = state.c
    return NormRecord(
        t=state.t,
        l1=lp_norm(c, grid, 1),
        l2=lp_norm(c, grid, 2),
        linf=lp_norm(c, grid, math.inf),
        mass=mass(c, grid),
        u_l2=velocity_l2(state.u, state.v, grid),
        div_residual=float(np.max(np.abs(divergence(state.u, state.v, grid)))),
        c_min=float(np.min(c)),
        c_max=float(np.max(c)),
    )


def settle_momentum(
    states: Sequence[State],
    mparams: MomentumParams,
    tparams: TransportParams,
    dt: float,
    tol: float = DEFAULT_TOL,
) -> tuple[list[State], float]:
    """
    Momentum-advance the states with a step their new velocity can transport.

    The transport step advects with the velocity after the momentum update,
    so the step bound is taken from that velocity. When it is below dt, the
    momentum update is repeated from the same states with a step just under
    the bound.

    Args:
        states (Sequence[State]): States advanced with one common step.
        mparams (MomentumParams): Momentum coefficients.
        tparams (TransportParams): Transport coefficients, for stable_dt.
        dt (float): Proposed step size.
        tol (float): Projection tolerance.

    Returns:
        tuple: (moved states, the step size used).

    Raises:
        InstabilityException: If the step does not settle within MAX_STEP_RETRIES repeats.
    """
    grid = tparams.grid
    for _ in range(MAX_STEP_RETRIES + 1):
        moved = [momentum_step(s, mparams.with_dt(dt), tol) for s in states]
        bound = min(stable_dt(tparams, grid, m) for m in moved)
        if dt <= bound:
            return moved, dt
        logger.debug("dt=%g exceeds the bound %g of the updated velocity, repeating", dt, bound)
        dt = STEP_SHRINK * bound
    raise InstabilityException("step size did not settle below the stable bound", dt)


def run_simulation(
    config: SimConfig,
    tol: float = DEFAULT_TOL,
    out_dir: Optional[str] = None,
    snapshot_stride: Optional[int] = None,
    end_time: Optional[float] = None,
    observer: Optional[Callable[[State], None]] = None,
) -> tuple[NormSeries, State, Optional[BlowUpEvent]]:
    """
    Run the coupled momentum / transport loop.

    Each step uses dt = min(config dt, stable_dt) (or config dt in fixed
    mode), advances momentum then transport and records the norms. In
    adaptive mode the step is shortened further when the velocity after the
    momentum update needs it (see settle_momentum). The initial velocity is
    projected before the first record. The loop stops at the end time or
    when the concentration blows up.

    Args:
        config (SimConfig): Validated configuration.
        tol (float): Projection tolerance.
        out_dir (str | None): Where snapshots go, if any.
        snapshot_stride (int | None): Steps between snapshots.
        end_time (float | None): Overrides config.end_time.
        observer (Callable | None): Called with every recorded state.

    Returns:
        tuple: (series, last stable state, blow-up event or None).

    Raises:
        InstabilityException: With the step index, on NaN or Inf.
        LinearSolverException: If a projection solve fails.
    """
    grid = build_grid(config)
    state = init_state(config, grid)
    t_end = config.end_time if end_time is None else end_time
    mparams = MomentumParams.from_config(config, grid, config.dt)
    tparams = TransportParams.from_config(config, grid, config.dt)

    u, v, _ = project(state.u, state.v, grid, config.dt, tol)
    state = State(u=u, v=v, p=state.p, c=state.c, t=0.0)

    series = NormSeries()
    series.append(record_state(state, grid))
    if observer is not None:
        observer(state)
    if out_dir is not None and snapshot_stride is not None:
        ensure_directory(out_dir)
        write_snapshot(state.c, grid, os.path.join(out_dir, "snapshot_0.csv"))

    logger.info("simulating to T=%g on a %dx%d grid", t_end, grid.nx, grid.ny)
    event: Optional[BlowUpEvent] = None
    fixed = config.dt_mode == "fixed"
    warned = False
    step = 0
    while t_end - state.t > 1e-12 * t_end:
        step += 1
        dt = config.dt if fixed else min(config.dt, stable_dt(tparams, grid, state))
        dt = min(dt, t_end - state.t)

        try:
            if fixed:
                moved = momentum_step(state, mparams.with_dt(dt), tol)
                bound = min(stable_dt(tparams, grid, state), stable_dt(tparams, grid, moved))
                if dt > bound and not warned:
                    logger.warning("fixed dt=%g exceeds the stable bound %g", dt, bound)
                    warned = True
            else:
                (moved,), dt = settle_momentum([state], mparams, tparams, dt, tol)
            new_state = transport_step(moved, tparams.with_dt(dt))
        except BlowUpDetected as e:
            event = BlowUpEvent(time=e.time, cell=e.cell, step=step)
            series.blowup_time = e.time
            logger.info("blow-up in cell %s at t=%.6g", e.cell, e.time)
            break
        except InstabilityException as e:
            raise InstabilityException(e.reason, e.dt, step) from e
        if not new_state.is_finite():
            raise InstabilityException("non-finite state", dt, step)

        state = new_state
        series.append(record_state(state, grid))
        if observer is not None:
            observer(state)
        if out_dir is not None and snapshot_stride is not None and step % snapshot_stride == 0:
            write_snapshot(state.c, grid, os.path.join(out_dir, f"snapshot_{step}.csv"))
        logger.debug("step %d: t=%g dt=%g max c=%g", step, state.t, dt, series.records[-1].c_max)

    return series, state, event


def _strip_for(base: SimConfig, m0: float) -> StepProfile:
    c0 = base.initial_concentration
    if not isinstance(c0, StepProfile):
        raise ConfigException("decay study needs a step initial concentration (c0_mode = step)")
    return StepProfile(m0, c0.x_lo, c0.x_hi)


@dataclass
class DecayCell:
    """
    One (kappa, M0) run of the decay study.

    Attributes:
        kappa (float): Reaction rate.
        m0 (float): Initial level.
        lambda_theory (float): kappa (1 - M0).
        series (NormSeries | None): Recorded norms (None if the run failed).
        report (BoundsReport | None): Bound verdicts.
        lambda_num_0 (float): lambda_num at t = 0.
        lambda_num_late (float): Late-time lambda_num.
        error (str | None): Failure message of the run.
    """
    kappa: float
    m0: float
    lambda_theory: float
    series: Optional[NormSeries] = None
    report: Optional[BoundsReport] = None
    lambda_num_0: float = math.nan
    lambda_num_late: float = math.nan
    error: Optional[str] = None

    @property
    def passed(self) -> bool:
        """Verdicts pass and the initial rate is not below the theoretical one."""
        return (
            self.error is None and self.report is not None and self.report.passed
            and self.lambda_num_0 >= self.lambda_theory * (1.0 - RATE_TOLERANCE)
        )


@dataclass
class DecayStudyReport:
    """Sweep results in sweep order."""
    cells: list[DecayCell]

    @property
    def passed(self) -> bool:
        return all(cell.passed for cell in self.cells)

    def to_table(self) -> tuple[Sequence[str], list[list[str]]]:
        header = ("kappa", "m0", "lambda_theory", "lambda_num_0", "lambda_num_late",
                  "decay_pass", "maxprin_pass")
        rows = []
        for cell in self.cells:
            decay = cell.report.decay.value if cell.report else Verdict.FAIL.value
            maxprin = cell.report.max_principle.value if cell.report else Verdict.FAIL.value
            rows.append([
                format_float(cell.kappa), format_float(cell.m0), format_float(cell.lambda_theory),
                format_float(cell.lambda_num_0), format_float(cell.lambda_num_late), decay, maxprin,
            ])
        return header, rows


def _run_decay_cell(spec: ExperimentSpec, kappa: float, m0: float) -> DecayCell:
    cell = DecayCell(kappa=kappa, m0=m0, lambda_theory=kappa * (1.0 - m0))
    try:
        config = spec.base.replace(reaction_rate=kappa, initial_concentration=_strip_for(spec.base, m0))
        series, _, _ = run_simulation(config)
        cell.series = series
        cell.report = check_bounds(series, config, spec.eps_tol)
        cell.lambda_num_0 = float(series.lambda_num[0])
        cell.lambda_num_late = late_decay_rate(series)
        if spec.out_dir is not None:
            write_csv(series, os.path.join(spec.out_dir, f"decay_kappa{kappa:g}_m0{m0:g}.csv"))
    except (DFBSimException, ValueError) as e:
        logger.error("decay cell kappa=%g M0=%g failed: %s", kappa, m0, e)
        cell.error = str(e)
    return cell


def decay_study(spec: ExperimentSpec) -> DecayStudyReport:
    """
    Sweep the decay scenario over every (kappa, M0) pair.

    Each cell runs independently; a failing cell is reported and does not
    stop the others. With an output directory, one series CSV per cell plus
    ``decay_summary.csv`` are written.

    Raises:
        ConfigException: If a sweep list is empty or the base c0 is not a step.
        HypothesisViolation: If some M0 is not in [0, 1).
    """
    spec.validate()
    if not spec.kappas or not spec.m0s:
        raise ConfigException("decay study needs non-empty kappa and M0 lists")
    if not isinstance(spec.base.initial_concentration, StepProfile):
        raise ConfigException("decay study needs a step initial concentration (c0_mode = step)")
    for m0 in spec.m0s:
        if not 0.0 <= m0 < 1.0:
            raise HypothesisViolation(f"decay study requires 0 <= M0 < 1, got {m0}")
    if spec.out_dir is not None:
        ensure_directory(spec.out_dir)

    pairs = [(kappa, m0) for kappa in spec.kappas for m0 in spec.m0s]
    with ThreadPoolExecutor(max_workers=spec.workers) as pool:
        futures = [pool.submit(_run_decay_cell, spec, kappa, m0) for kappa, m0 in pairs]
        cells = [f.result() for f in futures]

    report = DecayStudyReport(cells)
    if spec.out_dir is not None:
        write_csv(report, os.path.join(spec.out_dir, "decay_summary.csv"))
    return report


@dataclass
class BlowupStudyReport:
    """
    Result of the blow-up study.

    Attributes:
        series (NormSeries): Norms until blow-up (or the horizon).
        report (BoundsReport): Bound verdicts.
        t_star_theory (float): Theoretical bound T*.
        measured_time (float | None): Measured blow-up time.
    """
    series: NormSeries
    report: BoundsReport
    t_star_theory: float
    measured_time: Optional[float]

    @property
    def passed(self) -> bool:
        return self.report.lower_bound == Verdict.PASS and self.report.blowup == Verdict.PASS

    @property
    def relative_error(self) -> float:
        """|measured - T*| / T*, NaN without a blow-up."""
        if self.measured_time is None:
            return math.nan
        return abs(self.measured_time - self.t_star_theory) / self.t_star_theory

    def to_table(self) -> tuple[Sequence[str], list[list[str]]]:
        """Envelope table: t, ||c||_inf and the lower bound, for t < T*."""
        linf = self.series.column("linf")[: len(self.report.lower_bound_t)]
        rows = [[format_float(t), format_float(c), format_float(b)]
                for t, c, b in zip(self.report.lower_bound_t, linf, self.report.lower_bound_values)]
        return ("t", "linf", "lower_bound"), rows


def blowup_study(spec: ExperimentSpec) -> BlowupStudyReport:
    """
    Run the blow-up scenario and compare it with the lower-bound envelope.

    The run extends to three times the theoretical blow-up time; reaching
    that horizon without a blow-up is a FAIL.

    Raises:
        NoBlowupGuarantee: If the mean initial concentration is not above 1.
    """
    spec.validate()
    config = spec.base
    grid = build_grid(config)
    c0 = init_state(config, grid).c
    m0_total = mass(c0, grid)
    if not m0_total > grid.area:
        raise NoBlowupGuarantee(f"blow-up study needs mean c0 > 1, got {m0_total / grid.area:g}")
    t_star = blowup_time(m0_total, config.kappa_min, grid.area)

    series, _, event = run_simulation(config, end_time=BLOWUP_HORIZON * t_star)
    report = check_bounds(series, config, spec.eps_tol)
    result = BlowupStudyReport(series, report, t_star, event.time if event else None)
    if spec.out_dir is not None:
        ensure_directory(spec.out_dir)
        write_csv(series, os.path.join(spec.out_dir, "blowup_series.csv"))
        write_csv(result, os.path.join(spec.out_dir, "blowup_envelope.csv"))
    return result


@dataclass
class MMSRow:
    """
    Convergence of one discrete operator.

    Attributes:
        name (str): diffusion, upwind or poisson.
        levels (list[int]): Resolutions.
        errors (list[float]): Max-norm errors per level.
        orders (list[float]): Observed orders between consecutive levels.
        threshold (float): Required order.
    """
    name: str
    levels: list[int]
    errors: list[float]
    orders: list[float]
    threshold: float

    @property
    def min_order(self) -> float:
        return min(self.orders)

    @property
    def passed(self) -> bool:
        return self.min_order >= self.threshold


@dataclass
class MMSTable:
    """Observed orders of every verified operator."""
    rows: list[MMSRow]

    @property
    def passed(self) -> bool:
        return all(row.passed for row in self.rows)

    def to_table(self) -> tuple[Sequence[str], list[list[str]]]:
        header = ("operator", "level", "error", "order")
        out = []
        for row in self.rows:
            for k, (n, err) in enumerate(zip(row.levels, row.errors)):
                order = row.orders[k - 1] if k > 0 else math.nan
                out.append([row.name, str(n), format_float(err), format_float(order)])
        return header, out


def _unit_grid(n: int) -> StaggeredGrid:
    return StaggeredGrid(1.0, 1.0, n, n)


def _mms_diffusion(n: int) -> float:
    grid = _unit_grid(n)
    x, y = grid.cell_centers()
    c = np.cos(np.pi * x) * np.cos(np.pi * y)
    return float(np.max(np.abs(diffuse(c, 1.0, grid) + 2.0 * np.pi ** 2 * c)))


def _mms_poisson(n: int) -> float:
    grid = _unit_grid(n)
    x, y = grid.cell_centers()
    exact = np.cos(np.pi * x) * np.cos(np.pi * y)
    phi = poisson_neumann(grid, -2.0 * np.pi ** 2 * exact)
    return float(np.max(np.abs(phi - (exact - exact.mean()))))


def _mms_upwind(n: int) -> float:
    grid = _unit_grid(n)
    xn = np.arange(n + 1) * grid.hx
    yn = np.arange(n + 1) * grid.hy
    X, Y = np.meshgrid(xn, yn, indexing="ij")
    # Stream function on grid nodes, zero on the walls: discrete u is exactly solenoidal.
    psi = np.sin(np.pi * X) ** 2 * np.sin(np.pi * Y) ** 2 / np.pi
    u = (psi[:, 1:] - psi[:, :-1]) / grid.hy
    v = -(psi[1:, :] - psi[:-1, :]) / grid.hx
    x, y = grid.cell_centers()
    c = np.cos(np.pi * x) * np.cos(np.pi * y)
    ux = np.sin(np.pi * x) ** 2 * np.sin(2.0 * np.pi * y)
    vy = -np.sin(2.0 * np.pi * x) * np.sin(np.pi * y) ** 2
    cx = -np.pi * np.sin(np.pi * x) * np.cos(np.pi * y)
    cy = -np.pi * np.cos(np.pi * x) * np.sin(np.pi * y)
    exact = -(ux * cx + vy * cy)
    return float(np.max(np.abs(advect(c, u, v, grid) - exact)))


def mms_convergence(levels: Sequence[int], strict: bool = False) -> MMSTable:
    """
    Observed convergence orders of the discrete operators.

    Manufactured fields on the unit square: cos(pi x) cos(pi y) for diffusion
    and the Neumann Poisson solve; the same concentration advected by the
    solenoidal field of a wall-vanishing stream function for upwinding.

    Args:
        levels (Sequence[int]): At least three resolutions, each doubling the last.
        strict (bool): Raise instead of reporting when an order is too low.

    Returns:
        MMSTable: One row per operator.

    Raises:
        ConfigException: If fewer than three levels or not doubling.
        VerificationFailure: In strict mode, when an order is below threshold.
    """
    levels = [int(n) for n in levels]
    if len(levels) < 3:
        raise ConfigException(f"need at least three levels, got {len(levels)}")
    if any(b != 2 * a for a, b in zip(levels, levels[1:])) or levels[0] < 2:
        raise ConfigException(f"levels must double successively, got {levels}")

    rows = []
    for name, measure in (("diffusion", _mms_diffusion), ("upwind", _mms_upwind), ("poisson", _mms_poisson)):
        errors = [measure(n) for n in levels]
        orders = [math.log2(e0 / e1) for e0, e1 in zip(errors, errors[1:])]
        rows.append(MMSRow(name, levels, errors, orders, MMS_THRESHOLDS[name]))
        logger.info("MMS %s: errors %s, orders %s", name, errors, orders)
    table = MMSTable(rows)
    if strict and not table.passed:
        failed = [row.name for row in rows if not row.passed]
        raise VerificationFailure(f"convergence order below threshold for {failed}", table)
    return table


@dataclass
class PerturbationReport:
    """
    Growth of the difference between a run and its perturbed twin.

    Attributes:
        delta (float): Uniform perturbation of c0.
        t (np.ndarray): Sample times.
        abs_difference (np.ndarray): ||c1 - c2||_2 + ||u1 - u2||_2.
        ratio (np.ndarray): abs_difference / abs_difference(0) (1 when delta = 0).
        gamma (float): Smallest rate with ratio <= exp(gamma t).
    """
    delta: float
    t: np.ndarray
    abs_difference: np.ndarray
    ratio: np.ndarray
    gamma: float

    @property
    def passed(self) -> bool:
        if not np.all(np.isfinite(self.ratio)):
            return False
        return bool(np.all(self.ratio <= np.exp(self.gamma * self.t) * (1.0 + 1e-12)))

    def to_table(self) -> tuple[Sequence[str], list[list[str]]]:
        rows = [[format_float(a), format_float(b), format_float(c)]
                for a, b, c in zip(self.t, self.abs_difference, self.ratio)]
        return ("t", "abs_difference", "ratio"), rows


def perturbation_study(config: SimConfig, delta: float) -> PerturbationReport:
    """
    Compare a run with the run started from c0 + delta.

    Both states are advanced in lockstep and share every step size, which is
    the configured dt capped by the stable bound of both states before and
    after the momentum update. Only their difference is kept.

    Raises:
        HypothesisViolation: If M0 + delta >= 1 or delta < 0.
        InstabilityException: If either run produces NaN or Inf.
    """
    grid = build_grid(config)
    initial = init_state(config, grid)
    m0 = float(np.max(initial.c))
    if delta < 0 or not m0 + delta < 1.0:
        raise HypothesisViolation(
            f"perturbation needs 0 <= delta and M0 + delta < 1, got M0={m0}, delta={delta}"
        )
    mparams = MomentumParams.from_config(config, grid, config.dt)
    tparams = TransportParams.from_config(config, grid, config.dt)
    u0, v0, _ = project(initial.u, initial.v, grid, config.dt)
    base = State(u0, v0, initial.p, initial.c)
    perturbed = State(u0.copy(), v0.copy(), initial.p.copy(), initial.c + delta)
    logger.info("perturbation study: delta=%g, dt<=%g", delta, config.dt)

    def difference(a: State, b: State) -> float:
        return lp_norm(a.c - b.c, grid, 2) + velocity_l2(a.u - b.u, a.v - b.v, grid)

    times = [0.0]
    diffs = [difference(base, perturbed)]
    step = 0
    while config.end_time - base.t > 1e-12 * config.end_time:
        step += 1
        dt = min(config.dt, config.end_time - base.t,
                 stable_dt(tparams, grid, base), stable_dt(tparams, grid, perturbed))
        try:
            (moved_base, moved_perturbed), dt = settle_momentum([base, perturbed], mparams, tparams, dt)
            step_params = tparams.with_dt(dt)
            base = transport_step(moved_base, step_params)
            perturbed = transport_step(moved_perturbed, step_params)
        except InstabilityException as e:
            raise InstabilityException(e.reason, e.dt, step) from e
        times.append(base.t)
        diffs.append(difference(base, perturbed))

    t = np.array(times)
    diff = np.array(diffs)
    if diff[0] == 0.0:
        ratio = np.ones(len(diff))
    else:
        ratio = diff / diff[0]
    grows = (t > 0) & (ratio > 0)
    rates = np.log(ratio[grows]) / t[grows]
    gamma = max(0.0, float(np.max(rates))) if rates.size else 0.0
    return PerturbationReport(delta, t, diff, ratio, gamma)
