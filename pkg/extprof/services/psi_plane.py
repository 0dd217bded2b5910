"""
First-order transform of the profile equation.

With y = 1 - f(r)/a and psi(y) = |f'(r)|^p / a^p the profile becomes

    psi' = (p/(p-1)) (a^{2-p} (1-y) - psi^{(p-1)/p}),    psi(0) = 0,

on y in [0, 1). The ratio phi = psi (1-y)^{-p} = (|f'|/f)^p decides the regime:
it exceeds kappa = (p-1)^{-p} somewhere exactly when f has a finite zero, and
it has an interior maximum exactly when f decays algebraically.
"""
import logging
import math
from dataclasses import asdict, dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import quad

from ..config import get_config
from ..errors import ConvergenceError, InvariantViolation, ParameterError, RangeError
from ..models.params import Params
from .ode_core import EventSpec, StepControl, Trajectory, dense_eval, integrate_adaptive
from .profile_ivp import ProfileTrajectory

logger = logging.getLogger(__name__)

# the limit psi(1) is extrapolated only from runs that get this close to y = 1
TAIL_MIN_Y_END = 1.0 - 1e-4

# length of the RK45 stability interval on the negative real axis
RK45_STABILITY = 3.3


# closed-form slopes -------------------------------------------------------

def psi_slope(params: Params, a: float, y, psi):
    """psi'(y) from the transform equation (psi clamped at 0)"""
    p = params.p
    psi = np.maximum(psi, 0.0)
    return p / (p - 1.0) * (a ** (2.0 - p) * (1.0 - y) - psi ** ((p - 1.0) / p))


def phi_slope_indicator(params: Params, a: float, y, psi):
    """Quantity with the sign of phi'(y): psi' + p psi / (1-y)"""
    return psi_slope(params, a, y, psi) + params.p * np.maximum(psi, 0.0) / (1.0 - y)


def phi_from_profile(params: Params, f, g):
    """phi along the r-parametrisation: (g^{1/(p-1)} / f)^p"""
    return (np.abs(g) ** params.q / f) ** params.p


def phi_slope_on_profile(params: Params, f, g):
    """d/dr log(|f'|/f) = (f-g)/((p-1) g) + g^{1/(p-1)}/f; same sign as phi'"""
    q = params.q
    return q * (f - g) / g + np.abs(g) ** q / f


def psi_from_profile(params: Params, a: float, g):
    return np.abs(g) ** (params.p * params.q) / a ** params.p


# trajectory types ---------------------------------------------------------

@dataclass(frozen=True)
class PsiTrajectory:
    """Solution of the transform equation on [y_start, y_end]"""

    a: float
    params: Params
    path: Trajectory
    y_a: Optional[float] = None
    Y_a: Optional[float] = None
    phi_peak: Optional[float] = None

    @property
    def y(self) -> np.ndarray:
        return self.path.t

    @property
    def psi(self) -> np.ndarray:
        return self.path.y[:, 0]

    @property
    def y_start(self) -> float:
        return self.path.t_start

    @property
    def y_end(self) -> float:
        return self.path.t_last

    @property
    def phi_nodes(self) -> np.ndarray:
        return self.psi * (1.0 - self.y) ** (-self.params.p)

    def psi_at(self, y: float) -> float:
        """psi at y; below the start node the series expansion is used"""
        if y <= 0.0:
            return 0.0
        if y < self.y_start:
            return psi_series_start(self.params, self.a, y)
        return float(dense_eval(self.path, y)[0])

    def psi_prime(self) -> np.ndarray:
        return psi_slope(self.params, self.a, self.y, self.psi)

    def to_rows(self):
        return [
            {'y': float(y), 'psi': float(s), 'phi': float(ph)}
            for y, s, ph in zip(self.y, self.psi, self.phi_nodes)
        ]


@dataclass(frozen=True)
class TailEstimate:
    ell: float
    phi_end: float
    phi_slope_sign: int
    y_end: float

    def __post_init__(self):
        if not (math.isfinite(self.ell) and self.ell >= 0.0):
            raise InvariantViolation(f'tail limit must be finite and non-negative, got {self.ell}')

    def to_dict(self):
        return {
            'ell': self.ell,
            'phi_end': self.phi_end,
            'phi_slope_sign': self.phi_slope_sign,
            'y_end': self.y_end,
        }


@dataclass(frozen=True)
class ComparisonReport:
    """Ordering of psi(., a1) and psi(., a2) on their common grid"""

    a1: float
    a2: float
    nodes: int
    max_lhs_minus_rhs: float
    max_rhs_minus_lhs: float
    gap_at_half: Optional[float]
    sharp_bound_excess: float
    explicit_K: float
    explicit_bound_holds: bool
    fitted_K: Optional[float]
    max_derivative_gap: float
    derivative_gap_bound: float

    def ordered(self, tol: float = 1e-8) -> bool:
        return self.max_lhs_minus_rhs <= tol

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class TransformReport:
    max_defect: float
    nodes_compared: int
    y_max: float

    def to_dict(self):
        return asdict(self)


# series start and integration ----------------------------------------------

def psi_series_start(params: Params, a: float, y0: Optional[float] = None) -> float:
    """
    psi near y = 0: beta y - beta y^2/2 - p^2/((p-1)(2p-1)) beta^{(p-1)/p} y^{(2p-1)/p},
    beta = p a^{2-p}/(p-1). The last term is the leading drain of psi^{(p-1)/p}.
    """
    if not (math.isfinite(a) and a > 0.0):
        raise ParameterError(f'shooting parameter must be positive, got {a}', 'invalid_a')
    if y0 is None:
        y0 = get_config().PSI_Y_START
    if not 0.0 < y0 < 1.0:
        raise ParameterError(f'start ordinate must lie in (0, 1), got {y0}', 'invalid_argument')
    p = params.p
    beta = params.beta(a)
    drain = p * p / ((p - 1.0) * (2.0 * p - 1.0)) * beta ** ((p - 1.0) / p) * y0 ** ((2.0 * p - 1.0) / p)
    return beta * y0 - 0.5 * beta * y0 * y0 - drain


def psi_rhs(params: Params, a: float):
    p = params.p
    c = p / (p - 1.0)
    drive = a ** (2.0 - p)
    expo = (p - 1.0) / p

    def rhs(y, state):
        psi = state[0]
        # tiny negative overshoot in the deep tail is integrator noise
        if psi < 0.0:
            psi = 0.0
        return (c * (drive * (1.0 - y) - psi ** expo),)

    return rhs


def explicit_tail_cost(params: Params, y, psi):
    """
    Explicit steps spent on the decaying tail up to y.

    Past the psi maximum psi relaxes onto (a^{2-p}(1-y))^{p/(p-1)} at the rate
    psi^{-1/p}, which caps the RK45 step at RK45_STABILITY psi^{1/p}. With psi
    on that power law the cap integrates to (1-y) psi^{-1/p} / (q - 1).
    """
    rate = np.maximum(psi, np.finfo(float).tiny) ** (-1.0 / params.p)
    return (1.0 - y) * rate / ((params.q - 1.0) * RK45_STABILITY)


def count_slope_sign_changes(params: Params, a: float, y, psi, ctrl: StepControl) -> int:
    """Sign changes of psi' across the nodes, ignoring values inside the noise floor"""
    p = params.p
    y = np.asarray(y)
    psi = np.maximum(np.asarray(psi), 0.0)
    drive = a ** (2.0 - p) * (1.0 - y)
    drain = psi ** ((p - 1.0) / p)
    slope = p / (p - 1.0) * (drive - drain)
    floor = 10.0 * (max(ctrl.rel_tol, 1e-14) * p / (p - 1.0) * (drive + drain) + ctrl.abs_tol)
    signs = np.sign(slope)
    signs[np.abs(slope) <= floor] = 0.0
    signs = signs[signs != 0.0]
    if signs.size < 2:
        return 0
    return int(np.count_nonzero(np.diff(signs)))


def _phi_event_state(params: Params, hit) -> float:
    y, psi = hit.t, float(hit.state[0])
    return psi * (1.0 - y) ** (-params.p)


def integrate_psi(
    params: Params,
    a: float,
    y_end: Optional[float] = None,
    ctrl: Optional[StepControl] = None,
    events: Sequence[EventSpec] = (),
    strict: bool = True,
    check: bool = True,
    y_start: Optional[float] = None,
) -> PsiTrajectory:
    """
    Integrate the transform equation from the series start to y_end.

    The maximum of psi (y_a) and the maximum of phi (Y_a) are located as
    non-terminal events on their closed-form slopes. Decaying profiles turn stiff
    in the deep tail: psi relaxes onto its power law at a rate that blows up as
    y -> 1. An explicit run cannot follow that far, so it stops on the terminal
    'stiff_tail' event once the estimated tail cost passes PSI_STIFF_BUDGET of
    the step budget. With ``strict=False`` a run that exhausts the budget
    earlier returns the covered range instead of raising.
    """
    cfg = get_config()
    if not (math.isfinite(a) and a > 0.0):
        raise ParameterError(f'shooting parameter must be positive, got {a}', 'invalid_a')
    y0 = cfg.PSI_Y_START if y_start is None else float(y_start)
    y_end = cfg.PSI_Y_END if y_end is None else float(y_end)
    if not y0 < y_end < 1.0:
        raise ParameterError(f'y_end must lie in ({y0}, 1), got {y_end}', 'invalid_argument')
    ctrl = ctrl or StepControl.default()
    psi0 = psi_series_start(params, a, y0)

    all_events = [
        EventSpec(lambda y, s: psi_slope(params, a, y, s[0]), 'falling', cfg.ROOT_TOL, False, 'psi_peak'),
        EventSpec(lambda y, s: phi_slope_indicator(params, a, y, s[0]), 'falling', cfg.ROOT_TOL, False, 'phi_peak'),
    ]
    all_events.extend(events)
    tail_budget = cfg.PSI_STIFF_BUDGET * ctrl.max_steps
    # positive once psi is past its maximum and the tail has used its share of the budget
    all_events.append(EventSpec(
        lambda y, s: min(explicit_tail_cost(params, y, s[0]) - tail_budget, -psi_slope(params, a, y, s[0])),
        'rising', cfg.ROOT_TOL, True, 'stiff_tail',
    ))
    path = integrate_adaptive(psi_rhs(params, a), y0, (psi0,), y_end, ctrl, all_events, strict=strict)
    if path.terminal_reason != 'reached_end':
        logger.info('psi run a=%.6g p=%.4g stopped at y=%.10g (%s)', a, params.p, path.t_last, path.terminal_reason)

    psi_peak = path.event('psi_peak')
    phi_peak = path.event('phi_peak')
    traj = PsiTrajectory(
        a=float(a), params=params, path=path,
        y_a=psi_peak.t if psi_peak else None,
        Y_a=phi_peak.t if phi_peak else None,
        phi_peak=_phi_event_state(params, phi_peak) if phi_peak else None,
    )
    if check:
        interior = traj.psi[1:-1] if traj.path.n_nodes > 2 else traj.psi[:0]
        if np.any(interior < -10.0 * ctrl.abs_tol):
            raise InvariantViolation(f'psi negative at interior nodes (a={a}, p={params.p})', 'invariant_violation')
        changes = count_slope_sign_changes(params, a, traj.y, traj.psi, ctrl)
        if changes > 1:
            raise InvariantViolation(
                f"psi' changes sign {changes} times (a={a}, p={params.p})", 'shape_violation'
            )
    return traj


# tail and landmarks --------------------------------------------------------

def tail_estimate(traj: PsiTrajectory) -> TailEstimate:
    """
    Estimate the limit of psi at y = 1.

    A positive limit is reported only with the crossing signature (phi above
    kappa and still increasing at the last node). Near y = 1 psi is linear in
    1 - y there, so the limit is extrapolated from the last node and the node a
    decade of 1 - y earlier.
    """
    if traj.y_end < TAIL_MIN_Y_END:
        raise RangeError(
            f'psi run ends at y={traj.y_end:.10g}, need at least {TAIL_MIN_Y_END}', 'insufficient_range'
        )
    params = traj.params
    y_n, psi_n = traj.y_end, float(traj.psi[-1])
    phi_end = psi_n * (1.0 - y_n) ** (-params.p)
    phi_sign = int(np.sign(phi_slope_indicator(params, traj.a, y_n, psi_n)))

    ell = 0.0
    if phi_sign > 0 and phi_end > params.kappa:
        eps_n = 1.0 - y_n
        eps_1 = min(10.0 * eps_n, 1.0 - traj.y_start)
        psi_1 = traj.psi_at(1.0 - eps_1)
        ell = psi_n - eps_n * (psi_1 - psi_n) / (eps_1 - eps_n)
        if not ell > 0.0:
            ell = psi_n
    return TailEstimate(ell=float(ell), phi_end=float(phi_end), phi_slope_sign=phi_sign, y_end=y_n)


def refined_tail_ratio(traj: PsiTrajectory) -> Tuple[np.ndarray, np.ndarray]:
    """psi (1-y)^{-p/(p-1)} / a^{p(2-p)/(p-1)} on the nodes past the psi maximum"""
    params = traj.params
    if traj.y_a is not None:
        mask = traj.y > traj.y_a
    else:
        mask = np.arange(traj.path.n_nodes) > int(np.argmax(traj.psi))
    y = traj.y[mask]
    ratio = traj.psi[mask] * (1.0 - y) ** (-params.p * params.q) / params.tail_scale(traj.a)
    return y, ratio


def lower_bound_defect(traj: PsiTrajectory) -> float:
    """Worst relative shortfall of psi below a^{p(2-p)/(p-1)} (1-y)^{p/(p-1)} past y_a (<= 0 when it holds)"""
    _, ratio = refined_tail_ratio(traj)
    if ratio.size == 0:
        return 0.0
    return float(np.max(1.0 - ratio))


def envelope_defect(traj: PsiTrajectory) -> float:
    """Worst relative excess of psi over kappa (1-y)^p; <= 0 when the envelope holds"""
    bound = traj.params.kappa * (1.0 - traj.y) ** traj.params.p
    return float(np.max((traj.psi - bound) / bound))


def barrier_defect(traj: PsiTrajectory, amplitude: Optional[float] = None) -> float:
    """Worst relative excess of psi over the supersolution A (1-y)^{p/(p-1)}"""
    params = traj.params
    if amplitude is None:
        amplitude = params.barrier_amplitude(traj.a)
        if amplitude is None:
            raise ParameterError(
                f'no admissible barrier amplitude for a={traj.a}, p={params.p}', 'invalid_argument'
            )
    bound = amplitude * (1.0 - traj.y) ** (params.p * params.q)
    return float(np.max((traj.psi - bound) / bound))


def radius_from_psi(traj: PsiTrajectory) -> Tuple[float, float]:
    """
    First zero of the profile from the transform: R = int_0^1 psi(y)^{-1/p} dy.

    Returns (R estimate, contribution of the truncated tail beyond y_end).
    """
    tail = tail_estimate(traj)
    if tail.ell <= 0.0:
        raise ConvergenceError(f'psi run for a={traj.a} has no positive limit; R is infinite', 'not_converged')
    p = traj.params.p
    beta = traj.params.beta(traj.a)
    y0 = traj.y_start
    # psi ~ beta y below the start node
    total = beta ** (-1.0 / p) * y0 ** (1.0 - 1.0 / p) / (1.0 - 1.0 / p)
    y = traj.y
    for k, segment in enumerate(traj.path.segments):
        piece, _ = quad(lambda s: max(float(segment(s)[0]), 0.0) ** (-1.0 / p), y[k], y[k + 1],
                        epsabs=0.0, epsrel=1e-12, limit=200)
        total += piece
    truncated = (1.0 - traj.y_end) * float(traj.psi[-1]) ** (-1.0 / p)
    return total + truncated, truncated


# cross-checks ----------------------------------------------------------------

def compare_on_grid(lhs: PsiTrajectory, rhs: PsiTrajectory) -> ComparisonReport:
    """
    Compare psi(., a1) <= psi(., a2) for a1 <= a2 on the union of both node sets.

    Besides the ordering, checks the sharp gap bound psi2 - psi1 <= M y with
    M = p (a2^{2-p} - a1^{2-p})/(p-1), the form psi2 - psi1 <= K (a2-a1)^{2-p} with
    K = p/(p-1), and the matching bound on |psi1' - psi2'|.
    """
    if lhs.params.p != rhs.params.p:
        raise RangeError(f'p differs: {lhs.params.p} vs {rhs.params.p}', 'mismatched_params')
    if lhs.a > rhs.a:
        raise ParameterError(f'need lhs.a <= rhs.a, got {lhs.a} > {rhs.a}', 'invalid_argument')
    lo = max(lhs.y_start, rhs.y_start)
    hi = min(lhs.y_end, rhs.y_end)
    if not hi > lo:
        raise RangeError(f'psi runs do not overlap ([{lo}, {hi}])', 'range_mismatch')
    grid = np.union1d(lhs.y, rhs.y)
    grid = grid[(grid >= lo) & (grid <= hi)]
    psi1 = np.array([lhs.psi_at(y) for y in grid])
    psi2 = np.array([rhs.psi_at(y) for y in grid])
    diff = psi2 - psi1

    p = lhs.params.p
    da = rhs.a - lhs.a
    gap_scale = da ** (2.0 - p)
    M = p * (rhs.a ** (2.0 - p) - lhs.a ** (2.0 - p)) / (p - 1.0)
    K = p / (p - 1.0)
    tol = 1e-8

    gap_at_half = None
    if lo <= 0.5 <= hi:
        gap_at_half = rhs.psi_at(0.5) - lhs.psi_at(0.5)

    d1 = psi_slope(lhs.params, lhs.a, grid, psi1)
    d2 = psi_slope(rhs.params, rhs.a, grid, psi2)
    deriv_bound = K * ((K * gap_scale) ** ((p - 1.0) / p) + gap_scale)

    return ComparisonReport(
        a1=lhs.a, a2=rhs.a, nodes=int(grid.size),
        max_lhs_minus_rhs=float(np.max(-diff)),
        max_rhs_minus_lhs=float(np.max(diff)),
        gap_at_half=gap_at_half,
        sharp_bound_excess=float(np.max(diff - M * grid)),
        explicit_K=K,
        explicit_bound_holds=bool(np.max(diff) <= K * gap_scale + tol),
        fitted_K=float(np.max(diff) / gap_scale) if da > 0.0 else None,
        max_derivative_gap=float(np.max(np.abs(d1 - d2))),
        derivative_gap_bound=float(deriv_bound),
    )


def transform_check(profile: ProfileTrajectory, psi: PsiTrajectory) -> TransformReport:
    """
    Largest |psi(1 - f/a) - g^{p/(p-1)}/a^p| over the profile nodes.

    Profile nodes below the psi start node are compared with the series.
    """
    if profile.params.p != psi.params.p or profile.a != psi.a:
        raise RangeError(
            f'profile (a={profile.a}, p={profile.params.p}) and psi run (a={psi.a}, p={psi.params.p}) differ',
            'mismatched_params',
        )
    a, params = profile.a, profile.params
    y = (a - profile.f) / a
    y_max = float(np.max(y))
    if y_max > psi.y_end * (1.0 + 1e-12):
        raise RangeError(
            f'profile reaches y={y_max:.12g} beyond the psi span ending at {psi.y_end:.12g}', 'range_mismatch'
        )
    expected = psi_from_profile(params, a, profile.g)
    values = np.array([psi.psi_at(min(yi, psi.y_end)) for yi in y])
    defect = float(np.max(np.abs(values - expected)))
    logger.debug('transform defect a=%.6g p=%.4g: %.3e over %d nodes', a, params.p, defect, y.size)
    return TransformReport(max_defect=defect, nodes_compared=int(y.size), y_max=y_max)
