"""
r-space initial value problem for the extinction profile.

The second-order equation (|f'|^{p-2} f')' + f - |f'|^{p-1} = 0, f(0) = a,
f'(0) = 0 is integrated as the first-order system

    f' = -|g|^{(2-p)/(p-1)} g,    g' = f - |g|,

with g = -|f'|^{p-2} f' (so g > 0 while f decreases). The run starts at a small
radius r0 > 0 from a two-term series and stops at r_max, at the first zero
R(a) of f, or at an optional level f_stop.
"""
import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import quad

from ..config import get_config
from ..errors import InvariantViolation, ParameterError, RangeError
from ..models.params import Params
from .ode_core import EventSpec, StepControl, Trajectory, dense_derivative, dense_eval, integrate_adaptive

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Crossing:
    R: float
    slope: float


@dataclass(frozen=True)
class ProfileTrajectory:
    a: float
    params: Params
    path: Trajectory
    r_end: float
    crossing: Optional[Crossing] = None
    stopped_at_level: bool = False

    @property
    def r(self) -> np.ndarray:
        return self.path.t

    @property
    def f(self) -> np.ndarray:
        return self.path.y[:, 0]

    @property
    def g(self) -> np.ndarray:
        return self.path.y[:, 1]

    @property
    def fprime(self) -> np.ndarray:
        g = self.g
        return -np.sign(g) * np.abs(g) ** self.params.q

    def state_at(self, r: float) -> np.ndarray:
        """(f, g) at radius r from the dense output"""
        return dense_eval(self.path, r)

    def f_at(self, r: float) -> float:
        return float(self.state_at(r)[0])

    def to_rows(self):
        """Tabular view: one mapping per node with r, f, fprime, g"""
        return [
            {'r': float(r), 'f': float(f), 'fprime': float(fp), 'g': float(g)}
            for r, f, fp, g in zip(self.r, self.f, self.fprime, self.g)
        ]


@dataclass(frozen=True)
class ResidualReport:
    max_ode_residual: float
    max_identity_defect: float
    nodes_checked: int

    def __post_init__(self):
        for name in ('max_ode_residual', 'max_identity_defect'):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0.0):
                raise InvariantViolation(f'{name}={value} is not a finite non-negative number')

    def passed(self, tol: float = 1e-6) -> bool:
        return self.max_ode_residual < tol and self.max_identity_defect < tol

    def to_dict(self):
        return {
            'max_ode_residual': self.max_ode_residual,
            'max_identity_defect': self.max_identity_defect,
            'nodes_checked': self.nodes_checked,
        }


def _check_a(a: float):
    if not (math.isfinite(a) and a > 0.0):
        raise ParameterError(f'shooting parameter must be positive, got {a}', 'invalid_a')


def default_start_radius(a: float) -> float:
    return 1e-6 * max(1.0, 1.0 / a)


def profile_series_start(params: Params, a: float, r0: Optional[float] = None) -> Tuple[float, float]:
    """
    Two-term expansion of (f, g) at a small radius r0.

    With q = 1/(p-1): g = a(1 - e^{-r}) - (p-1)^2/(p(2p-1)) a^q r^{q+2} + ...,
    f = a - a^q [ (p-1)/p r^{q+1} - r^{q+2} / (2(2p-1)) ] + ...
    """
    _check_a(a)
    if r0 is None:
        r0 = default_start_radius(a)
    if not r0 > 0.0:
        raise ParameterError(f'start radius must be positive, got {r0}', 'invalid_argument')
    p, q = params.p, params.q
    aq = a ** q
    f0 = a - aq * ((p - 1.0) / p * r0 ** (q + 1.0) - r0 ** (q + 2.0) / (2.0 * (2.0 * p - 1.0)))
    g0 = -a * math.expm1(-r0) - (p - 1.0) ** 2 / (p * (2.0 * p - 1.0)) * aq * r0 ** (q + 2.0)
    return f0, g0


def profile_rhs(params: Params):
    q = params.q

    def rhs(r, state):
        f, g = state
        ag = abs(g)
        return (-math.copysign(ag ** q, g), f - ag)

    return rhs


def node_invariant_failures(traj: ProfileTrajectory, ctrl: StepControl) -> list:
    """Descriptions of the violated node bounds: 0 < f <= a, f non-increasing, 0 < g <= a(1 - e^-r)"""
    a = traj.a
    r, f, g = traj.r, traj.f, traj.g
    upto = len(r)
    if traj.crossing is not None or traj.stopped_at_level:
        upto -= 1  # last node sits on the stop level
    slack = 10.0 * (ctrl.abs_tol + ctrl.rel_tol * a)
    failures = []
    interior = slice(0, upto)
    if np.any(f[interior] <= 0.0) and traj.crossing is None:
        failures.append('f not positive before the first zero')
    if np.any(f[interior] > a + slack):
        failures.append('f exceeds a')
    if np.any(g[interior] <= 0.0):
        failures.append('g not positive')
    bound = -a * np.expm1(-r[interior])
    if np.any(g[interior] > bound * (1.0 + 10.0 * ctrl.rel_tol) + slack):
        failures.append('g exceeds a(1 - e^-r)')
    # non-increasing in floating point; tiny early steps may not change f at all
    if np.any(np.diff(f[:upto]) > slack):
        failures.append('f increases')
    return failures


def integrate_profile(
    params: Params,
    a: float,
    r_max: Optional[float] = None,
    ctrl: Optional[StepControl] = None,
    f_stop: Optional[float] = None,
    events: Sequence[EventSpec] = (),
    strict: bool = True,
    check: bool = True,
) -> ProfileTrajectory:
    """
    Integrate the profile system from the series start to min(r_max, R(a)).

    Args:
        params: exponent parameters
        a: shooting parameter f(0)
        r_max: last radius (config PROFILE_R_MAX by default)
        ctrl: step control
        f_stop: optional terminal level for f (stop when f falls to it)
        events: additional event specifications (e.g. classifier certificates)
        strict: propagate integrator budget errors
        check: verify the node invariants of the solution

    Returns:
        ProfileTrajectory; ``crossing`` is set when f reaches zero
    """
    _check_a(a)
    cfg = get_config()
    r_max = cfg.PROFILE_R_MAX if r_max is None else float(r_max)
    if not r_max > 0.0:
        raise ParameterError(f'r_max must be positive, got {r_max}', 'invalid_argument')
    ctrl = ctrl or StepControl.default()
    r0 = min(default_start_radius(a), 0.5 * r_max)
    f0, g0 = profile_series_start(params, a, r0)

    all_events = [EventSpec(lambda r, s: s[0], 'falling', ctrl_root_tol(), True, 'crossing')]
    if f_stop is not None:
        if not 0.0 < f_stop < f0:
            raise ParameterError(f'f_stop must lie in (0, f(r0)), got {f_stop}', 'invalid_argument')
        level = float(f_stop)
        all_events.append(EventSpec(lambda r, s: s[0] - level, 'falling', ctrl_root_tol(), True, 'f_stop'))
    all_events.extend(events)

    path = integrate_adaptive(profile_rhs(params), r0, (f0, g0), r_max, ctrl, all_events, strict=strict)

    crossing = None
    stopped_at_level = False
    last_hit = path.events[-1] if path.terminal_reason == 'event_hit' and path.events else None
    if last_hit is not None and last_hit.name == 'crossing':
        g_R = float(path.y[-1, 1])
        crossing = Crossing(R=path.t_last, slope=-abs(g_R) ** params.q)
        logger.debug('a=%.12g: first zero at R=%.10g, slope %.6g', a, crossing.R, crossing.slope)
    elif last_hit is not None and last_hit.name == 'f_stop':
        stopped_at_level = True

    traj = ProfileTrajectory(
        a=float(a), params=params, path=path, r_end=path.t_last,
        crossing=crossing, stopped_at_level=stopped_at_level,
    )
    if check:
        failures = node_invariant_failures(traj, ctrl)
        if failures:
            raise InvariantViolation(
                f'profile a={a}, p={params.p}: ' + '; '.join(failures), 'invariant_violation'
            )
    return traj


def ctrl_root_tol() -> float:
    return get_config().ROOT_TOL


def check_residuals(traj: ProfileTrajectory) -> ResidualReport:
    """
    Residual of the profile equation and defect of the integrated identity
    e^r g(r) - e^{r0} g(r0) = int_{r0}^r e^s f(s) ds along a trajectory.

    The ODE residual is measured relative to |f| + |g| at step midpoints
    (interpolant derivative against the interpolated state), which carries the
    discretisation error, and at the nodes. A stored node derivative is the rhs
    of the state the stepper produced, so the node part is zero unless a stored
    state was altered afterwards.
    The identity is evaluated in the scaled form
    g(r_i) - e^{r0 - r_i} g(r0) - int e^{s - r_i} f(s) ds, relative to g(r_i).
    """
    path = traj.path
    n = path.n_nodes
    if n < 3:
        raise RangeError(f'need at least 3 nodes, got {n}', 'too_few_nodes')
    q = traj.params.q
    r, f, g = traj.r, traj.f, traj.g

    def residual(state, deriv):
        fs, gs = state
        scale = abs(fs) + abs(gs)
        if scale == 0.0:
            return 0.0
        res_f = abs(deriv[0] + math.copysign(abs(gs) ** q, gs))
        res_g = abs(deriv[1] - (fs - abs(gs)))
        return max(res_f, res_g) / scale

    upto = n - 1 if traj.crossing is not None else n
    ode_res = 0.0
    for i in range(upto):
        ode_res = max(ode_res, residual(path.y[i], path.dy[i]))
    for i in range(upto - 1):
        mid = 0.5 * (r[i] + r[i + 1])
        ode_res = max(ode_res, residual(dense_eval(path, mid), dense_derivative(path, mid)))

    identity = 0.0
    scaled_integral = 0.0
    for i in range(1, upto):
        segment = path.segments[i - 1]
        r_lo, r_hi = r[i - 1], r[i]
        piece, _ = quad(lambda s: math.exp(s - r_hi) * segment(s)[0], r_lo, r_hi,
                        epsabs=0.0, epsrel=1e-13, limit=200)
        scaled_integral = math.exp(r_lo - r_hi) * scaled_integral + piece
        defect = g[i] - math.exp(r[0] - r_hi) * g[0] - scaled_integral
        identity = max(identity, abs(defect) / max(abs(g[i]), np.finfo(float).tiny))

    return ResidualReport(
        max_ode_residual=float(ode_res),
        max_identity_defect=float(identity),
        nodes_checked=n,
    )
