"""
Norms, decay-rate diagnostics and the decay / blow-up bound machinery.

Everything here is a pure function over value data: a norm series recorded
by the runner plus the configuration is enough to compute the theoretical
rates and constants and to judge a run against them.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .core import SimConfig, StaggeredGrid
from .exceptions import HypothesisViolation, NoBlowupGuarantee

logger = logging.getLogger(__name__)

NormOrder = Union[int, float]
SUPPORTED_P = (1, 2, math.inf)

DEFAULT_EPS_TOL = 0.02
MAX_PRINCIPLE_SLACK = 1e-12
LATE_LINF_THRESHOLD = 0.05
LATE_FRACTION = 0.1
ODE_DIVERGENCE = 1e12


@dataclass(frozen=True)
class NormRecord:
    """
    Diagnostics of one recorded time level.

    Attributes:
        t (float): Time.
        l1 (float): ||c||_L1.
        l2 (float): ||c||_L2.
        linf (float): ||c||_Linf.
        mass (float): M(t), the signed integral of c.
        u_l2 (float): ||u||_L2.
        div_residual (float): Largest cell divergence of the velocity.
        c_min (float): Smallest cell concentration.
        c_max (float): Largest cell concentration.
    """
    t: float
    l1: float
    l2: float
    linf: float
    mass: float
    u_l2: float
    div_residual: float
    c_min: float
    c_max: float


COLUMNS = ("t", "l1", "l2", "linf", "mass", "u_l2", "div_residual", "c_min", "c_max")


@dataclass
class NormSeries:
    """
    Ordered per-step record of concentration and velocity diagnostics.

    Attributes:
        records (list[NormRecord]): Records with strictly increasing t.
        blowup_time (float | None): Measured blow-up time, if the run blew up.
    """
    records: list[NormRecord] = field(default_factory=list)
    blowup_time: Optional[float] = None

    def append(self, record: NormRecord) -> None:
        """
        Append a record.

        Raises:
            ValueError: If t does not increase or a norm is negative.
        """
        if self.records and not record.t > self.records[-1].t:
            raise ValueError(f"time must increase: {record.t} after {self.records[-1].t}")
        if min(record.l1, record.l2, record.linf) < 0:
            raise ValueError(f"norms must be non-negative at t={record.t}")
        self.records.append(record)

    def __len__(self) -> int:
        return len(self.records)

    def column(self, name: str) -> np.ndarray:
        """Return one column as an array."""
        if name not in COLUMNS:
            raise KeyError(f"unknown column {name!r}")
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    @property
    def times(self) -> np.ndarray:
        return self.column("t")

    @property
    def lambda_num(self) -> np.ndarray:
        """lambda_num of the L1 norm, NaN where it cannot be formed."""
        l1 = self.column("l1")
        if len(l1) < 2 or np.any(l1 <= 0):
            return np.full(len(l1), np.nan)
        return numerical_decay_rate(self)


class Verdict(Enum):
    """Outcome of one bound check."""
    PASS = "PASS"
    FAIL = "FAIL"
    NOT_APPLICABLE = "NOT-APPLICABLE"


@dataclass
class BoundsReport:
    """
    Theoretical constants and pass/fail verdicts for one run.

    Attributes:
        lambda_theory (float | None): kappa_1 (1 - M0), when M0 < 1.
        c_p (dict): Interpolation constants for p in {1, 2, inf}.
        t_star_theory (float | None): Blow-up time bound, when mean c0 > 1.
        lower_bound_t (np.ndarray): Sample times of the lower-bound curve.
        lower_bound_values (np.ndarray): Lower bound on ||c||_inf at those times.
        decay (Verdict): Lp decay envelope.
        max_principle (Verdict): 0 <= c <= M0 throughout.
        lower_bound (Verdict): ||c||_inf above the blow-up lower bound.
        blowup (Verdict): Measured blow-up no later than T*.
        measured_blowup_time (float | None): From the series.
        failures (list[str]): Human-readable descriptions of violations.
    """
    lambda_theory: Optional[float]
    c_p: dict[NormOrder, float]
    t_star_theory: Optional[float]
    lower_bound_t: np.ndarray
    lower_bound_values: np.ndarray
    decay: Verdict
    max_principle: Verdict
    lower_bound: Verdict
    blowup: Verdict
    measured_blowup_time: Optional[float]
    failures: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        """True when no verdict failed."""
        return Verdict.FAIL not in (self.decay, self.max_principle, self.lower_bound, self.blowup)


@dataclass
class ODESolution:
    """
    Samples of a Runge-Kutta integration.

    Attributes:
        t (np.ndarray): Sample times.
        y (np.ndarray): Samples, first axis is time.
        diverged (bool): Whether |y| exceeded the divergence threshold.
        divergence_time (float | None): First sample time past the threshold.
        last_finite_time (float): Last sample time with a finite value below the threshold.
    """
    t: np.ndarray
    y: np.ndarray
    diverged: bool
    divergence_time: Optional[float]
    last_finite_time: float


def lp_norm(c: np.ndarray, grid: StaggeredGrid, p: NormOrder) -> float:
    """
    Midpoint-quadrature Lp norm of a cell field.

    Args:
        c (np.ndarray): Cell field.
        grid (StaggeredGrid): The grid.
        p (int | float): 1, 2 or math.inf.

    Returns:
        float: The norm.

    Raises:
        ValueError: For p outside {1, 2, inf}.
    """
    a = np.abs(np.asarray(c, dtype=float))
    if p == math.inf:
        return float(np.max(a))
    if p == 1:
        return grid.cell_measure * float(np.sum(a))
    if p == 2:
        return math.sqrt(grid.cell_measure * float(np.sum(a * a)))
    raise ValueError(f"p must be one of 1, 2, inf; got {p}")


def mass(c: np.ndarray, grid: StaggeredGrid) -> float:
    """Total mass M = integral of c (signed)."""
    return grid.cell_measure * float(np.sum(c))


def theoretical_decay_rate(kappa_1: float, m0: float) -> float:
    """
    Uniform Lp decay rate lambda = kappa_1 (1 - M0).

    Raises:
        HypothesisViolation: Unless 0 <= M0 < 1 and kappa_1 > 0.
    """
    if not 0.0 <= m0 < 1.0:
        raise HypothesisViolation(f"decay requires 0 <= M0 < 1, got M0={m0}")
    if not kappa_1 > 0.0:
        raise HypothesisViolation(f"decay requires kappa_1 > 0, got {kappa_1}")
    return kappa_1 * (1.0 - m0)


def _interpolation_from_norms(l1: float, linf: float, p: NormOrder) -> float:
    if p == math.inf:
        return linf
    if p == 1:
        return l1
    return l1 ** (1.0 / p) * linf ** (1.0 - 1.0 / p)


def interpolation_constant(c0: np.ndarray, grid: StaggeredGrid, p: NormOrder) -> float:
    """
    C_p = ||c0||_1^(1/p) ||c0||_inf^(1 - 1/p).

    Args:
        c0 (np.ndarray): Non-negative initial concentration.
        grid (StaggeredGrid): The grid.
        p (int | float): Exponent in [1, inf].

    Returns:
        float: The constant; C_1 = ||c0||_1 and C_inf = ||c0||_inf.
    """
    if not p >= 1:
        raise ValueError(f"p must be >= 1, got {p}")
    return _interpolation_from_norms(lp_norm(c0, grid, 1), lp_norm(c0, grid, math.inf), p)


def numerical_decay_rate(series: NormSeries, norm: str = "l1") -> np.ndarray:
    """
    lambda_num = -d/dt log ||c(t)|| from a recorded series.

    Centered differences at interior samples, one-sided at both ends.

    Args:
        series (NormSeries): At least two records.
        norm (str): Column to differentiate: "l1", "l2" or "linf".

    Returns:
        np.ndarray: lambda_num at every sample time.

    Raises:
        ValueError: If a norm value is zero or negative, or there are fewer
            than two samples.
    """
    if norm not in ("l1", "l2", "linf"):
        raise ValueError(f"norm must be l1, l2 or linf, got {norm!r}")
    values = series.column(norm)
    if len(values) < 2:
        raise ValueError("need at least two samples for a decay rate")
    if np.any(values <= 0):
        raise ValueError(f"{norm} norm must be positive on the whole series")
    return -np.gradient(np.log(values), series.times, edge_order=1)


def normalized_decay_rate(series: NormSeries, kappa: float, norm: str = "l1") -> np.ndarray:
    """lambda_num / kappa, which tends to 1 as c decays."""
    return numerical_decay_rate(series, norm) / kappa


def late_decay_rate(
    series: NormSeries,
    norm: str = "l1",
    linf_threshold: float = LATE_LINF_THRESHOLD,
    fraction: float = LATE_FRACTION,
) -> float:
    """
    Late-time decay rate.

    The mean of lambda_num over the final ``fraction`` of the samples whose
    ||c||_inf is below ``linf_threshold``; NaN when there are none.
    """
    rates = numerical_decay_rate(series, norm)
    candidates = np.flatnonzero(series.column("linf") < linf_threshold)
    if candidates.size == 0:
        return math.nan
    count = max(1, int(math.ceil(fraction * candidates.size)))
    return float(np.mean(rates[candidates[-count:]]))


def blowup_time(m0_total: float, kappa_1: float, omega_measure: float) -> float:
    """
    Upper bound on the blow-up time, T* = (1/kappa_1) ln(M(0) / (M(0) - |Omega|)).

    Raises:
        NoBlowupGuarantee: If M(0) <= |Omega| (mean c0 not above 1).
    """
    if not m0_total > omega_measure:
        raise NoBlowupGuarantee(
            f"blow-up bound needs M(0) > |Omega|, got M(0)={m0_total}, |Omega|={omega_measure}"
        )
    return math.log(m0_total / (m0_total - omega_measure)) / kappa_1


def blowup_lower_bound(
    t: Union[float, np.ndarray], m0_total: float, kappa_1: float, omega_measure: float
) -> Union[float, np.ndarray]:
    """
    Lower bound on ||c(t)||_inf before blow-up.

        M(0) / (M(0) - (M(0) - |Omega|) exp(kappa_1 t))

    Raises:
        HypothesisViolation: If any t is negative or not below T*.
    """
    t_star = blowup_time(m0_total, kappa_1, omega_measure)
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0) or np.any(t_arr >= t_star):
        raise HypothesisViolation(f"lower bound is defined for 0 <= t < T* = {t_star:.6g}")
    value = m0_total / (m0_total - (m0_total - omega_measure) * np.exp(kappa_1 * t_arr))
    return float(value) if np.ndim(value) == 0 else value


def mass_lower_bound(
    t: Union[float, np.ndarray], m0_total: float, kappa_1: float, omega_measure: float
) -> Union[float, np.ndarray]:
    """Comparison solution M(t) = |Omega| M(0) / (M(0) - (M(0) - |Omega|) exp(kappa_1 t))."""
    return omega_measure * blowup_lower_bound(t, m0_total, kappa_1, omega_measure)


def mass_ode_rate(kappa_1: float, omega_measure: float) -> Callable[[float, np.ndarray], np.ndarray]:
    """Right-hand side of M' = (kappa_1 / |Omega|) (M^2 - |Omega| M)."""
    def rate(_t: float, m: np.ndarray) -> np.ndarray:
        return (kappa_1 / omega_measure) * (m * m - omega_measure * m)
    return rate


def ode_integrate(
    f: Callable[[float, np.ndarray], np.ndarray],
    y0: Union[float, Sequence[float], np.ndarray],
    t_span: tuple[float, float],
    dt: float,
    divergence_threshold: float = ODE_DIVERGENCE,
) -> ODESolution:
    """
    Integrate y' = f(t, y) with the classical fourth-order Runge-Kutta method.

    The last step is shortened to land on the end of the span. Integration
    stops at the first sample whose magnitude exceeds the threshold or is not
    finite.

    Args:
        f (Callable): Rate rule f(t, y).
        y0: Initial value (scalar or vector).
        t_span (tuple[float, float]): (t0, t1).
        dt (float): Step size.
        divergence_threshold (float): Magnitude treated as divergence.

    Returns:
        ODESolution: Samples plus the divergence flag and times.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    t0, t1 = t_span
    y = np.array(y0, dtype=float)
    ts = [t0]
    ys = [y.copy()]
    t = t0
    n_steps = int(math.ceil((t1 - t0) / dt - 1e-12))
    for n in range(1, n_steps + 1):
        t_next = min(t0 + n * dt, t1)
        h = t_next - t
        k1 = f(t, y)
        k2 = f(t + 0.5 * h, y + 0.5 * h * k1)
        k3 = f(t + 0.5 * h, y + 0.5 * h * k2)
        k4 = f(t + h, y + h * k3)
        with np.errstate(over="ignore", invalid="ignore"):
            y_next = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(y_next)) or np.max(np.abs(y_next)) > divergence_threshold:
            logger.debug("ODE diverged at t=%g", t_next)
            if np.all(np.isfinite(y_next)):
                ts.append(t_next)
                ys.append(y_next)
            return ODESolution(np.array(ts), np.array(ys), True, t_next, t)
        ts.append(t_next)
        ys.append(y_next)
        t, y = t_next, y_next
    return ODESolution(np.array(ts), np.array(ys), False, None, t)


def check_bounds(series: NormSeries, config: SimConfig, eps_tol: float = DEFAULT_EPS_TOL) -> BoundsReport:
    """
    Judge a recorded run against the decay, maximum-principle and blow-up bounds.

    The initial record supplies ||c0||_1, ||c0||_inf, M(0) and min c0; the
    configuration supplies kappa_1 and |Omega|. Checks whose hypotheses do
    not hold for the initial data are NOT-APPLICABLE.

    Args:
        series (NormSeries): Non-empty series starting at the initial state.
        config (SimConfig): Configuration of the run.
        eps_tol (float): Relative tolerance on the envelopes.

    Returns:
        BoundsReport: Constants, curve samples and verdicts.
    """
    if len(series) == 0:
        raise ValueError("series is empty")
    first = series.records[0]
    lx, ly = config.domain_extent
    area = lx * ly
    kappa_1 = config.kappa_min
    m0 = first.linf
    failures: list[str] = []
    t = series.times

    non_negative = first.c_min >= 0.0
    c_p = {p: _interpolation_from_norms(first.l1, first.linf, p) for p in SUPPORTED_P}

    lambda_theory: Optional[float] = None
    decay = Verdict.NOT_APPLICABLE
    if non_negative and m0 < 1.0:
        lambda_theory = theoretical_decay_rate(kappa_1, m0)
        envelope = np.exp(-lambda_theory * t) * (1.0 + eps_tol)
        decay = Verdict.PASS
        for p, name in ((1, "l1"), (2, "l2"), (math.inf, "linf")):
            bad = np.flatnonzero(series.column(name) > c_p[p] * envelope)
            if bad.size:
                decay = Verdict.FAIL
                failures.append(f"{name} above C_p exp(-lambda t) at t={t[bad[0]]:g}")

    max_principle = Verdict.NOT_APPLICABLE
    if non_negative and m0 <= 1.0:
        low = np.flatnonzero(series.column("c_min") < -MAX_PRINCIPLE_SLACK)
        high = np.flatnonzero(series.column("c_max") > m0 + MAX_PRINCIPLE_SLACK)
        max_principle = Verdict.PASS
        if low.size:
            max_principle = Verdict.FAIL
            failures.append(f"min c below 0 at t={t[low[0]]:g}")
        if high.size:
            max_principle = Verdict.FAIL
            failures.append(f"max c above M0={m0:g} at t={t[high[0]]:g}")

    t_star: Optional[float] = None
    lower_t = np.empty(0)
    lower_values = np.empty(0)
    lower_bound = Verdict.NOT_APPLICABLE
    blowup = Verdict.NOT_APPLICABLE
    if first.mass > area:
        t_star = blowup_time(first.mass, kappa_1, area)
        before = t < t_star
        lower_t = t[before]
        lower_values = np.asarray(blowup_lower_bound(lower_t, first.mass, kappa_1, area), dtype=float)
        bad = np.flatnonzero(series.column("linf")[before] < lower_values * (1.0 - eps_tol))
        lower_bound = Verdict.PASS
        if bad.size:
            lower_bound = Verdict.FAIL
            failures.append(f"||c||_inf below the blow-up lower bound at t={lower_t[bad[0]]:g}")
        measured = series.blowup_time
        if measured is not None and measured <= t_star * (1.0 + eps_tol):
            blowup = Verdict.PASS
        else:
            blowup = Verdict.FAIL
            failures.append(f"blow-up not observed by T*={t_star:.6g} (measured {measured})")

    report = BoundsReport(
        lambda_theory=lambda_theory,
        c_p=c_p,
        t_star_theory=t_star,
        lower_bound_t=lower_t,
        lower_bound_values=lower_values,
        decay=decay,
        max_principle=max_principle,
        lower_bound=lower_bound,
        blowup=blowup,
        measured_blowup_time=series.blowup_time,
        failures=failures,
    )
    logger.info("bounds check: %s", "PASS" if report.passed else "; ".join(failures))
    return report
