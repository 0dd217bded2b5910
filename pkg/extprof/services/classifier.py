"""
Regime classification and threshold search.

A shooting parameter a gives a profile that either reaches zero at a finite
radius (Crossing), decays algebraically (Decaying), or, for the single critical
value a*, decays exponentially. The decision is read off phi = psi (1-y)^{-p}:

* phi > kappa (1 + margin) somewhere         -> Crossing
* phi has a maximum below kappa (1 - margin) -> Decaying
* neither within the run                     -> Critical (indistinguishable from a*)

Crossing parameters form (a*, inf) and decaying ones (0, a*), so a* is located
by bisection between the closed-form endpoints.
"""
import logging
import math
from dataclasses import dataclass, field, replace
from typing import List, Optional, Tuple

from ..config import get_config
from ..errors import ClassificationError, ParameterError
from ..models.params import Params
from .ode_core import EventSpec, StepControl
from .profile_ivp import integrate_profile
from .psi_plane import integrate_psi, phi_slope_indicator

logger = logging.getLogger(__name__)

CROSSING = 'Crossing'
CRITICAL = 'Critical'
DECAYING = 'Decaying'
REGIMES = (CROSSING, CRITICAL, DECAYING)

EVIDENCE = ('phi_exceeds_kappa', 'first_zero', 'phi_peak_below_kappa', 'phi_peak_within_margin', 'undecided')
PLANES = ('profile', 'psi')

# events fire slightly past kappa (1 + margin) so the stored evidence exceeds it strictly
EVENT_OVERSHOOT = 1e-9


@dataclass(frozen=True)
class ClassLabel:
    """Regime tag with the criterion that fired.

    ``y`` is the ordinate 1 - f/a of the evidence (the phi maximum Y_a for
    Decaying) and ``phi`` the value of phi there. ``r`` is the radius when the
    decision was taken on the profile path.
    """

    regime: str
    evidence: str
    margin: float
    kappa: float
    y: Optional[float] = None
    phi: Optional[float] = None
    r: Optional[float] = None
    plane: str = 'profile'

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise ParameterError(f'unknown regime {self.regime!r}', 'invalid_argument')
        if self.evidence not in EVIDENCE:
            raise ParameterError(f'unknown evidence {self.evidence!r}', 'invalid_argument')
        if self.regime == CROSSING and self.evidence == 'phi_exceeds_kappa':
            if not (self.phi is not None and self.phi > self.kappa * (1.0 + self.margin)):
                raise ParameterError('Crossing evidence must exceed kappa (1 + margin)', 'invalid_argument')
        if self.regime == DECAYING:
            if not (self.evidence == 'phi_peak_below_kappa' and self.phi is not None
                    and self.phi < self.kappa * (1.0 - self.margin)):
                raise ParameterError('Decaying evidence must be a phi peak below kappa (1 - margin)',
                                     'invalid_argument')

    def to_dict(self):
        return {
            'regime': self.regime,
            'evidence': self.evidence,
            'margin': self.margin,
            'y': self.y,
            'phi': self.phi,
            'r': self.r,
            'plane': self.plane,
        }


@dataclass(frozen=True)
class ThresholdResult:
    a_lo: float
    a_hi: float
    iterations: int
    log: Tuple[Tuple[float, ClassLabel], ...] = ()
    margin: float = 0.0
    reclassifications: int = 0
    verification: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (0.0 < self.a_lo < self.a_hi):
            raise ClassificationError(f'degenerate bracket [{self.a_lo}, {self.a_hi}]', 'inconsistent_classification')

    @property
    def a_star(self) -> float:
        return 0.5 * (self.a_lo + self.a_hi)

    @property
    def width(self) -> float:
        return self.a_hi - self.a_lo

    def to_dict(self):
        return {
            'a_lo': self.a_lo,
            'a_hi': self.a_hi,
            'a_star': self.a_star,
            'width': self.width,
            'iterations': self.iterations,
            'margin': self.margin,
            'reclassifications': self.reclassifications,
            'verification': dict(self.verification),
        }


def _check_margin(margin: float):
    if not 0.0 < margin < 0.5:
        raise ParameterError(f'margin must lie in (0, 0.5), got {margin}', 'invalid_argument')


def _classify_on_profile(params, a, margin, ctrl, r_max) -> ClassLabel:
    q, p = params.q, params.p
    kappa = params.kappa
    level = q * ((1.0 + margin) * (1.0 + EVENT_OVERSHOOT)) ** (1.0 / p)
    cfg = get_config()
    events = [
        # phi > kappa (1 + margin)  <=>  g^q > q (1 + margin)^{1/p} f
        EventSpec(lambda r, s: abs(s[1]) ** q - level * s[0], 'rising', cfg.ROOT_TOL, True, 'phi_exceeds'),
        # f g d/dr log(|f'|/f): same sign as phi'
        EventSpec(lambda r, s: q * s[0] * (s[0] - s[1]) + abs(s[1]) ** (q + 1.0), 'falling',
                  cfg.ROOT_TOL, True, 'phi_peak'),
    ]
    traj = integrate_profile(params, a, r_max=r_max, ctrl=ctrl, events=events)
    f, g = traj.path.y[-1]
    r = traj.path.t_last
    y = (a - f) / a

    hit = traj.path.events[-1] if traj.path.terminal_reason == 'event_hit' else None
    if hit is not None and hit.name == 'crossing':
        return ClassLabel(CROSSING, 'first_zero', margin, kappa, y=1.0, r=r)
    phi = (abs(g) ** q / f) ** p
    if hit is not None and hit.name == 'phi_exceeds':
        return ClassLabel(CROSSING, 'phi_exceeds_kappa', margin, kappa, y=y, phi=phi, r=r)
    if hit is not None and hit.name == 'phi_peak':
        if phi < kappa * (1.0 - margin):
            return ClassLabel(DECAYING, 'phi_peak_below_kappa', margin, kappa, y=y, phi=phi, r=r)
        return ClassLabel(CRITICAL, 'phi_peak_within_margin', margin, kappa, y=y, phi=phi, r=r)
    return ClassLabel(CRITICAL, 'undecided', margin, kappa, y=y, phi=phi, r=r)


def _classify_on_psi(params, a, margin, ctrl, y_end) -> ClassLabel:
    p, kappa = params.p, params.kappa
    cfg = get_config()
    threshold = kappa * (1.0 + margin) * (1.0 + EVENT_OVERSHOOT)
    events = [
        EventSpec(lambda y, s: s[0] * (1.0 - y) ** (-p) - threshold, 'rising', cfg.ROOT_TOL, True, 'phi_exceeds'),
        EventSpec(lambda y, s: phi_slope_indicator(params, a, y, s[0]), 'falling',
                  cfg.ROOT_TOL, True, 'phi_peak_stop'),
    ]
    traj = integrate_psi(params, a, y_end=y_end, ctrl=ctrl, events=events, strict=False)
    hit = traj.path.event('phi_exceeds')
    if hit is not None:
        phi = float(hit.state[0]) * (1.0 - hit.t) ** (-p)
        return ClassLabel(CROSSING, 'phi_exceeds_kappa', margin, kappa, y=hit.t, phi=phi, plane='psi')
    if traj.Y_a is not None:
        if traj.phi_peak < kappa * (1.0 - margin):
            return ClassLabel(DECAYING, 'phi_peak_below_kappa', margin, kappa,
                              y=traj.Y_a, phi=traj.phi_peak, plane='psi')
        return ClassLabel(CRITICAL, 'phi_peak_within_margin', margin, kappa,
                          y=traj.Y_a, phi=traj.phi_peak, plane='psi')
    return ClassLabel(CRITICAL, 'undecided', margin, kappa,
                      y=traj.y_end, phi=float(traj.phi_nodes[-1]), plane='psi')


def classify(
    params: Params,
    a: float,
    margin: Optional[float] = None,
    plane: str = 'profile',
    ctrl: Optional[StepControl] = None,
    r_max: Optional[float] = None,
    y_end: Optional[float] = None,
) -> ClassLabel:
    """
    Decide the regime of the profile with f(0) = a.

    Args:
        params: exponent parameters
        a: shooting parameter
        margin: relative band around kappa treated as undecided (config CLASSIFY_MARGIN)
        plane: 'profile' evaluates phi along the r-space path, 'psi' on a
            directly integrated transform trajectory
        ctrl: step control
        r_max: profile range for plane='profile'
        y_end: transform range for plane='psi'

    Returns:
        ClassLabel
    """
    if not (math.isfinite(a) and a > 0.0):
        raise ParameterError(f'shooting parameter must be positive, got {a}', 'invalid_a')
    margin = get_config().CLASSIFY_MARGIN if margin is None else float(margin)
    _check_margin(margin)
    if plane not in PLANES:
        raise ParameterError(f'unknown plane {plane!r}', 'invalid_argument')
    ctrl = ctrl or StepControl.default()
    if plane == 'psi':
        label = _classify_on_psi(params, a, margin, ctrl, y_end)
    else:
        label = _classify_on_profile(params, a, margin, ctrl, r_max)
    logger.debug('classify p=%.6g a=%.17g margin=%.3g -> %s (%s)', params.p, a, margin, label.regime, label.evidence)
    return label


def initial_bracket(params: Params, ctrl: Optional[StepControl] = None,
                    margin: Optional[float] = None, r_max: Optional[float] = None) -> Tuple[float, float]:
    """
    (a_lo, a_hi) around a*: a_lo = c_lower(p) and a_hi the first a_lo 2^k that
    classifies Crossing. Every a above the closed-form seed is known to cross.
    """
    cfg = get_config()
    a_lo = params.c_lower
    seed = params.crossing_seed()
    for k in range(1, cfg.BRACKET_DOUBLING_CAP + 1):
        a = a_lo * 2.0 ** k
        label = classify(params, a, margin=margin, ctrl=ctrl, r_max=r_max)
        if label.regime == CROSSING:
            logger.info('bracket for p=%.6g: [%.10g, %.10g] after %d doublings (seed %.6g)', params.p, a_lo, a, k, seed)
            return a_lo, a
        if a >= seed:
            raise ClassificationError(
                f'a={a:.6g} above the crossing seed {seed:.6g} classified {label.regime}', 'bracket_failure'
            )
    raise ClassificationError(
        f'no Crossing parameter within {cfg.BRACKET_DOUBLING_CAP} doublings of {a_lo:.6g}', 'bracket_failure'
    )


def _bisection_margin(cfg, a_lo: float, a_hi: float) -> float:
    """max(MARGIN_FLOOR, width / a_hi), never wider than the default margin"""
    return max(cfg.MARGIN_FLOOR, min(cfg.CLASSIFY_MARGIN, (a_hi - a_lo) / a_hi))


def _check_log(log: List[Tuple[float, ClassLabel]]):
    decaying = [a for a, lab in log if lab.regime == DECAYING]
    crossing = [a for a, lab in log if lab.regime == CROSSING]
    if decaying and crossing and max(decaying) >= min(crossing):
        raise ClassificationError(
            f'Decaying a={max(decaying):.17g} not below Crossing a={min(crossing):.17g}',
            'inconsistent_classification',
        )


def find_threshold(
    params: Params,
    tol_a: Optional[float] = None,
    ctrl: Optional[StepControl] = None,
    r_max: Optional[float] = None,
    bracket: Optional[Tuple[float, float]] = None,
) -> ThresholdResult:
    """
    Bisect [a_lo, a_hi] down to width tol_a.

    Midpoints are classified with margin max(MARGIN_FLOOR, width / a_hi), capped
    at CLASSIFY_MARGIN. An undecided midpoint is reclassified with a tenfold
    smaller margin, a tenfold tighter tolerance and twice the range, at most
    MAX_RECLASSIFY times; the bracket never moves on an undecided label.
    Every classification runs with rel_tol at most THRESHOLD_REL_TOL, and both
    final endpoints are re-verified with a tenfold tighter tolerance.
    """
    cfg = get_config()
    ctrl = ctrl or StepControl.default()
    # labels a few tol_a from a* are only stable well below the default tolerance
    ctrl = replace(ctrl, rel_tol=min(ctrl.rel_tol, cfg.THRESHOLD_REL_TOL))
    r_max = cfg.PROFILE_R_MAX if r_max is None else float(r_max)
    a_lo, a_hi = bracket if bracket is not None else initial_bracket(params, ctrl, r_max=r_max)
    if not 0.0 < a_lo < a_hi:
        raise ParameterError(f'invalid bracket [{a_lo}, {a_hi}]', 'invalid_argument')
    if tol_a is None:
        tol_a = 1e-10 * max(1.0, a_hi)
    if not tol_a > 0.0:
        raise ParameterError(f'tol_a must be positive, got {tol_a}', 'invalid_argument')

    log: List[Tuple[float, ClassLabel]] = []
    for a, expected in ((a_lo, DECAYING), (a_hi, CROSSING)):
        label = classify(params, a, ctrl=ctrl, r_max=r_max)
        log.append((a, label))
        if label.regime != expected:
            raise ClassificationError(
                f'bracket end a={a:.10g} classified {label.regime}, expected {expected}', 'bracket_failure'
            )

    iterations = 0
    reclassified = 0
    margin = _bisection_margin(cfg, a_lo, a_hi)
    while a_hi - a_lo > tol_a:
        mid = 0.5 * (a_lo + a_hi)
        if not a_lo < mid < a_hi:
            logger.warning('bracket [%.17g, %.17g] cannot be split further', a_lo, a_hi)
            break
        margin = _bisection_margin(cfg, a_lo, a_hi)
        label = classify(params, mid, margin=margin, ctrl=ctrl, r_max=r_max)
        retry_margin, retry_ctrl, retry_r_max = margin, ctrl, r_max
        attempts = 0
        while label.regime == CRITICAL:
            if attempts >= cfg.MAX_RECLASSIFY:
                partial = ThresholdResult(a_lo, a_hi, iterations, tuple(log), margin, reclassified)
                raise ClassificationError(
                    f'a={mid:.17g} undecided after {attempts} reclassifications', 'unresolved', result=partial
                )
            attempts += 1
            reclassified += 1
            retry_margin = max(cfg.MARGIN_FLOOR, retry_margin / 10.0)
            retry_ctrl = retry_ctrl.tightened(10.0)
            retry_r_max *= 2.0
            logger.warning('a=%.17g undecided (%s); retry %d with margin %.1e, rel_tol %.1e',
                           mid, label.evidence, attempts, retry_margin, retry_ctrl.rel_tol)
            label = classify(params, mid, margin=retry_margin, ctrl=retry_ctrl, r_max=retry_r_max)

        log.append((mid, label))
        if label.regime == CROSSING:
            a_hi = mid
        else:
            a_lo = mid
        iterations += 1
        _check_log(log)
        logger.debug('bisection %d: a=%.17g %s, width %.3e', iterations, mid, label.regime, a_hi - a_lo)

    verify_ctrl = ctrl.tightened(10.0)
    verification = {}
    for name, a, expected in (('a_lo', a_lo, DECAYING), ('a_hi', a_hi, CROSSING)):
        label = classify(params, a, margin=margin, ctrl=verify_ctrl, r_max=2.0 * r_max)
        verification[name] = label.regime
        if label.regime != expected:
            partial = ThresholdResult(a_lo, a_hi, iterations, tuple(log), margin, reclassified, verification)
            raise ClassificationError(
                f'{name}={a:.17g} reclassified {label.regime} at rel_tol {verify_ctrl.rel_tol:g}',
                'inconsistent_classification', result=partial,
            )

    result = ThresholdResult(a_lo, a_hi, iterations, tuple(log), margin, reclassified, verification)
    logger.info('threshold p=%.6g: a* in [%.15g, %.15g] (width %.3e, %d iterations)',
                params.p, a_lo, a_hi, result.width, iterations)
    return result
