"""Adaptive explicit one-step integration with dense output and event location.

The stepper is scipy's Dormand-Prince 5(4) pair (``RK45``) driven one step at a
time so that step-size floors, step budgets, finiteness checks and event
refinement are under our control. Each accepted step keeps its free quartic
interpolant, which backs ``dense_eval`` and event refinement.
"""
import logging
import math
from dataclasses import dataclass, replace
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import RK45
from scipy.optimize import brentq

from ..config import get_config
from ..errors import IntegrationError, ParameterError

logger = logging.getLogger(__name__)

TERMINAL_REASONS = ('reached_end', 'event_hit', 'step_underflow', 'max_steps', 'non_finite_rhs')
DIRECTIONS = ('rising', 'falling', 'any')

# scipy refuses relative tolerances below this
_MIN_REL_TOL = 100 * np.finfo(float).eps


@dataclass(frozen=True)
class StepControl:
    """Tolerances and step limits for one integration"""

    abs_tol: float
    rel_tol: float
    h_init: float
    h_min: float
    h_max: float
    max_steps: int

    def __post_init__(self):
        if self.abs_tol < 0 or self.rel_tol < 0:
            raise ParameterError('tolerances must be non-negative', 'invalid_control')
        if self.abs_tol == 0 and self.rel_tol == 0:
            raise ParameterError('at least one tolerance must be positive', 'invalid_control')
        if not (0 < self.h_min <= self.h_init <= self.h_max):
            raise ParameterError(
                f'need 0 < h_min <= h_init <= h_max, got {self.h_min}, {self.h_init}, {self.h_max}',
                'invalid_control',
            )
        if int(self.max_steps) < 1:
            raise ParameterError('max_steps must be at least 1', 'invalid_control')

    @classmethod
    def default(cls, **overrides) -> 'StepControl':
        cfg = get_config()
        values = dict(
            abs_tol=cfg.ABS_TOL,
            rel_tol=cfg.REL_TOL,
            h_init=cfg.H_INIT,
            h_min=cfg.H_MIN,
            h_max=cfg.H_MAX,
            max_steps=cfg.MAX_STEPS,
        )
        values.update(overrides)
        return cls(**values)

    def tightened(self, factor: float, floor: float = 1e-13) -> 'StepControl':
        """Copy with both tolerances divided by ``factor`` (rel_tol not below ``floor``)"""
        return replace(
            self,
            rel_tol=max(self.rel_tol / factor, floor) if self.rel_tol > 0 else 0.0,
            abs_tol=self.abs_tol / factor,
        )


@dataclass(frozen=True)
class EventSpec:
    """Scalar event g(t, state) located where it changes sign in ``direction``"""

    event_fn: Callable[[float, np.ndarray], float]
    direction: str = 'any'
    root_tol: float = 1e-12
    terminal: bool = True
    name: str = 'event'

    def __post_init__(self):
        if self.direction not in DIRECTIONS:
            raise ParameterError(f'unknown event direction {self.direction!r}', 'invalid_argument')
        if not self.root_tol > 0:
            raise ParameterError('root_tol must be positive', 'invalid_argument')

    def crosses(self, g_old: float, g_new: float) -> bool:
        if g_old == 0.0 or not (math.isfinite(g_old) and math.isfinite(g_new)):
            return False
        rising = g_old < 0.0 <= g_new
        falling = g_old > 0.0 >= g_new
        if self.direction == 'rising':
            return rising
        if self.direction == 'falling':
            return falling
        return rising or falling


@dataclass(frozen=True)
class EventHit:
    name: str
    t: float
    state: np.ndarray
    terminal: bool


@dataclass(frozen=True)
class Trajectory:
    """Accepted nodes of one integration plus the per-step interpolants.

    ``t`` has shape (n,), ``y`` and ``dy`` shape (n, dim); ``segments[i]`` covers
    [t[i], t[i+1]].
    """

    t: np.ndarray
    y: np.ndarray
    dy: np.ndarray
    segments: Tuple = ()
    terminal_reason: str = 'reached_end'
    events: Tuple[EventHit, ...] = ()
    n_rhs: int = 0

    def __post_init__(self):
        if self.terminal_reason not in TERMINAL_REASONS:
            raise ParameterError(f'unknown terminal reason {self.terminal_reason!r}', 'invalid_argument')
        for arr in (self.t, self.y, self.dy):
            arr.setflags(write=False)

    @property
    def t_start(self) -> float:
        return float(self.t[0])

    @property
    def t_last(self) -> float:
        return float(self.t[-1])

    @property
    def n_nodes(self) -> int:
        return int(self.t.shape[0])

    def event(self, name: str) -> Optional[EventHit]:
        """First recorded hit of the named event"""
        for hit in self.events:
            if hit.name == name:
                return hit
        return None

    def with_node_state(self, index: int, state: Sequence[float]) -> 'Trajectory':
        """Copy with one node state overwritten (derivatives and interpolants untouched)"""
        y = np.array(self.y, copy=True)
        y[index] = np.asarray(state, dtype=float)
        return replace(self, y=y, t=np.array(self.t), dy=np.array(self.dy))


class _Recorder:
    """Growing node store used while stepping"""

    def __init__(self, t0, y0, dy0):
        self.t = [t0]
        self.y = [y0]
        self.dy = [dy0]
        self.segments = []
        self.events: List[EventHit] = []

    def append(self, t, y, dy, segment):
        self.t.append(t)
        self.y.append(y)
        self.dy.append(dy)
        self.segments.append(segment)

    def build(self, reason, n_rhs) -> Trajectory:
        return Trajectory(
            t=np.asarray(self.t, dtype=float),
            y=np.asarray(self.y, dtype=float).reshape(len(self.t), -1),
            dy=np.asarray(self.dy, dtype=float).reshape(len(self.t), -1),
            segments=tuple(self.segments),
            terminal_reason=reason,
            events=tuple(self.events),
            n_rhs=n_rhs,
        )


def _refine_root(event: EventSpec, segment, t_lo: float, t_hi: float) -> float:
    """Locate the event root inside one step with Brent's bracketing method"""
    def g(t):
        return float(event.event_fn(t, segment(t)))

    g_lo, g_hi = g(t_lo), g(t_hi)
    if g_hi == 0.0:
        return t_hi
    if g_lo * g_hi > 0.0:
        # the interpolant missed the sign change seen on the nodes; keep the step end
        return t_hi
    return brentq(g, t_lo, t_hi, xtol=event.root_tol, rtol=4 * np.finfo(float).eps, maxiter=200)


def integrate_adaptive(
    rhs: Callable[[float, np.ndarray], Sequence[float]],
    t0: float,
    state0: Sequence[float],
    t_end: float,
    ctrl: Optional[StepControl] = None,
    events: Sequence[EventSpec] = (),
    strict: bool = True,
) -> Trajectory:
    """
    Integrate state' = rhs(t, state) from t0 towards t_end.

    Args:
        rhs: right-hand side returning the derivative vector
        t0, state0: initial point
        t_end: end of the integration interval (> t0)
        ctrl: step control, defaults to ``StepControl.default()``
        events: event specifications; terminal events stop the run at the refined root
        strict: raise on step underflow / exhausted budget instead of returning the partial path

    Returns:
        Trajectory with ``terminal_reason`` set
    """
    ctrl = ctrl or StepControl.default()
    if not t_end > t0:
        raise ParameterError(f't_end={t_end} must exceed t0={t0}', 'invalid_argument')
    y0 = np.atleast_1d(np.asarray(state0, dtype=float))
    if not np.all(np.isfinite(y0)):
        raise IntegrationError('initial state is not finite', 'non_finite_rhs')

    n_calls = [0]

    def fun(t, y):
        n_calls[0] += 1
        value = np.atleast_1d(np.asarray(rhs(t, y), dtype=float))
        if not np.all(np.isfinite(value)):
            raise IntegrationError(f'right-hand side not finite at t={t}', 'non_finite_rhs')
        return value

    dy0 = fun(t0, y0)
    recorder = _Recorder(float(t0), y0.copy(), dy0)
    g_prev = [float(ev.event_fn(t0, y0)) for ev in events]

    rel_tol = max(ctrl.rel_tol, _MIN_REL_TOL)
    solver = RK45(
        fun, t0, y0, t_end,
        rtol=rel_tol, atol=ctrl.abs_tol,
        max_step=ctrl.h_max, first_step=min(ctrl.h_init, t_end - t0),
    )

    reason = None
    n_steps = 0
    try:
        while solver.status == 'running':
            if n_steps >= ctrl.max_steps:
                reason = 'max_steps'
                break
            t_old = solver.t
            message = solver.step()
            n_steps += 1
            if solver.status == 'failed':
                logger.debug('stepper failed at t=%.6g: %s', t_old, message)
                reason = 'step_underflow'
                break
            t_new = float(solver.t)
            h = t_new - t_old
            if h < ctrl.h_min and solver.status != 'finished':
                reason = 'step_underflow'
                break
            segment = solver.dense_output()
            y_new = solver.y.copy()
            dy_new = np.array(solver.f, dtype=float)

            g_new = [float(ev.event_fn(t_new, y_new)) for ev in events]
            hits = []
            for k, ev in enumerate(events):
                if ev.crosses(g_prev[k], g_new[k]):
                    hits.append((_refine_root(ev, segment, t_old, t_new), k))
            g_prev = g_new
            hits.sort()

            stop_at = None
            for t_hit, k in hits:
                ev = events[k]
                if stop_at is not None and t_hit > stop_at:
                    break
                state = y_new if t_hit == t_new else segment(t_hit)
                recorder.events.append(EventHit(ev.name, float(t_hit), np.array(state), ev.terminal))
                logger.debug('event %s at t=%.12g', ev.name, t_hit)
                if ev.terminal:
                    stop_at = t_hit

            if stop_at is not None:
                if stop_at > t_old:
                    state = y_new if stop_at == t_new else segment(stop_at)
                    recorder.append(float(stop_at), np.array(state), fun(stop_at, state), segment)
                reason = 'event_hit'
                break

            recorder.append(t_new, y_new, dy_new, segment)
    except IntegrationError as exc:
        # partial path up to the last accepted node; the abort itself is in exc.kind
        if exc.trajectory is None and len(recorder.t) >= 2:
            exc.trajectory = recorder.build('non_finite_rhs', n_calls[0])
        raise

    if reason is None:
        reason = 'reached_end'
    trajectory = recorder.build(reason, n_calls[0])
    logger.debug('integration stopped at t=%.6g after %d steps: %s', trajectory.t_last, n_steps, reason)

    if strict and reason in ('step_underflow', 'max_steps'):
        raise IntegrationError(
            f'integration stopped early at t={trajectory.t_last:.6g} ({reason})',
            reason, trajectory=trajectory,
        )
    return trajectory


def _segment_index(traj: Trajectory, t: float) -> int:
    idx = int(np.searchsorted(traj.t, t, side='right')) - 1
    return min(max(idx, 0), len(traj.segments) - 1)


def _check_span(traj: Trajectory, t: float):
    if not (traj.t[0] <= t <= traj.t[-1]):
        raise IntegrationError(
            f't={t} outside trajectory span [{traj.t[0]}, {traj.t[-1]}]', 'out_of_span'
        )


def dense_eval(traj: Trajectory, t: float) -> np.ndarray:
    """Interpolated state at t; stored node states are returned exactly"""
    t = float(t)
    _check_span(traj, t)
    idx = int(np.searchsorted(traj.t, t))
    if idx < traj.n_nodes and traj.t[idx] == t:
        return np.array(traj.y[idx])
    if not traj.segments:
        return np.array(traj.y[0])
    return np.asarray(traj.segments[_segment_index(traj, t)](t), dtype=float)


def dense_eval_many(traj: Trajectory, ts: Sequence[float]) -> np.ndarray:
    """Vectorised ``dense_eval``: returns shape (len(ts), dim)"""
    return np.array([dense_eval(traj, t) for t in np.asarray(ts, dtype=float)])


def dense_derivative(traj: Trajectory, t: float) -> np.ndarray:
    """Derivative of the interpolant at t (stored rhs value at nodes)"""
    t = float(t)
    _check_span(traj, t)
    idx = int(np.searchsorted(traj.t, t))
    if idx < traj.n_nodes and traj.t[idx] == t:
        return np.array(traj.dy[idx])
    segment = traj.segments[_segment_index(traj, t)]
    x = (t - segment.t_old) / segment.h
    powers = np.array([(j + 1) * x ** j for j in range(segment.order + 1)])
    return segment.Q.dot(powers)
