"""
Tail constants of computed profiles and the self-similar extinction solution.

* Crossing: first zero R(a) and slope f'(R) < 0 (optionally compared with the
  transform prediction f'(R) = -a ell(a)^{1/p}).
* Critical: f(r) ~ ell* e^{-r/(p-1)} with ell* = (p-1) I^{1/(p-1)} and
  I = int_0^inf e^r f dr, read off a plateau of e^{r/(p-1)} f.
* Decaying: r^{(p-1)/(2-p)} f(r) -> ((p-1)/(2-p))^{(p-1)/(2-p)}, independent of a.
"""
import logging
import math
from dataclasses import dataclass, fields
from typing import Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.integrate import quad

from ..config import get_config
from ..errors import ClassificationError, ConvergenceError, InvariantViolation, ParameterError, RangeError
from ..models.params import Params
from .classifier import CRITICAL, CROSSING, DECAYING, ClassLabel
from .ode_core import StepControl, dense_eval_many
from .profile_ivp import ProfileTrajectory, integrate_profile, profile_series_start
from .psi_plane import TailEstimate

logger = logging.getLogger(__name__)

PLATEAU_GRID_STEP = 0.05


@dataclass(frozen=True)
class TailFit:
    regime: str
    # Crossing
    R: Optional[float] = None
    slope: Optional[float] = None
    psi_slope: Optional[float] = None
    slope_gap: Optional[float] = None
    # Critical
    rate: Optional[float] = None
    ell_star: Optional[float] = None
    I: Optional[float] = None
    I_from_identity: Optional[float] = None
    plateau_value: Optional[float] = None
    plateau_window: Optional[Tuple[float, float]] = None
    plateau_variation: Optional[float] = None
    crossover: Optional[float] = None
    ell_gap: Optional[float] = None
    # Decaying
    exponent: Optional[float] = None
    constant_estimate: Optional[float] = None
    limit_constant: Optional[float] = None
    relative_gap: Optional[float] = None
    drift: Optional[float] = None

    def __post_init__(self):
        if self.regime == CROSSING:
            if not (self.R is not None and self.R > 0.0 and self.slope is not None and self.slope < 0.0):
                raise InvariantViolation(f'crossing fit needs R > 0 and slope < 0, got {self.R}, {self.slope}')
        elif self.regime == CRITICAL:
            if not (self.ell_star is not None and self.ell_star > 0.0):
                raise InvariantViolation(f'critical fit needs ell_star > 0, got {self.ell_star}')
        elif self.regime == DECAYING:
            if not (self.constant_estimate is not None and self.constant_estimate > 0.0):
                raise InvariantViolation(f'decaying fit needs a positive constant, got {self.constant_estimate}')

    def to_dict(self):
        out = {}
        for item in fields(self):
            value = getattr(self, item.name)
            if value is not None:
                out[item.name] = list(value) if isinstance(value, tuple) else value
        return out


@dataclass(frozen=True)
class SelfSimilarSlice:
    T: float
    t: float
    x_grid: np.ndarray
    u_values: np.ndarray

    def to_rows(self):
        return [{'x': float(x), 'u': float(u)} for x, u in zip(self.x_grid, self.u_values)]


# Decaying ------------------------------------------------------------------

def _linearised_limit(profile: ProfileTrajectory, r: float) -> float:
    """
    Limit of r^k f, k = exp_slow, from W = f^{-1/k} at r, r/2 and r/4.

    Along the decaying tail W = alpha r + beta ln r + gamma + O(ln r / r), so
    W(r) - 2 W(r/2) + W(r/4) = alpha r / 4 up to that remainder and the limit
    of r^k f is alpha^{-k}.
    """
    k = profile.params.exp_slow
    f = dense_eval_many(profile.path, [r, 0.5 * r, 0.25 * r])[:, 0]
    if np.any(f <= 0.0):
        raise ConvergenceError(f'profile not positive on [{0.25 * r:g}, {r:g}]', 'not_converged')
    w = f ** (-1.0 / k)
    alpha = 4.0 * (w[0] - 2.0 * w[1] + w[2]) / r
    if not alpha > 0.0:
        raise ConvergenceError(f'f^(-1/{k:.4g}) not growing linearly near r={r:g}', 'not_converged')
    return float(alpha ** (-k))


def _fit_decaying(profile: ProfileTrajectory) -> TailFit:
    params = profile.params
    cfg = get_config()
    r_end = profile.r_end
    if r_end / 40.0 <= profile.path.t_start:
        raise ConvergenceError(f'profile ends at r={r_end:g}, too short for a tail fit', 'not_converged')
    estimate = _linearised_limit(profile, r_end)
    previous = _linearised_limit(profile, r_end / 10.0)
    drift = abs(estimate - previous) / abs(estimate)
    if drift >= cfg.TAIL_DRIFT_TOL:
        raise ConvergenceError(
            f'r^{params.exp_slow:.4g} f still drifting by {drift:.2e} over the last decade up to r={r_end:g}',
            'not_converged',
        )
    gap = abs(estimate - params.slow_const) / params.slow_const
    return TailFit(
        regime=DECAYING, exponent=params.exp_slow, constant_estimate=float(estimate),
        limit_constant=params.slow_const, relative_gap=float(gap), drift=float(drift),
    )


# Critical ------------------------------------------------------------------

def find_plateau(profile: ProfileTrajectory, window: Optional[float] = None) -> Tuple[float, float, float, float]:
    """
    Window of length ``window`` minimising the relative variation of e^{r/(p-1)} f.

    Returns (r_start, r_stop, variation, plateau value) where the variation is
    (max - min) / min over the window and the value is the window mean.
    """
    window = get_config().PLATEAU_WINDOW if window is None else float(window)
    r_lo = profile.path.t_start
    r_hi = profile.r_end
    if r_hi - r_lo < window:
        raise RangeError(f'profile span {r_hi - r_lo:g} shorter than the plateau window {window:g}',
                         'insufficient_range')
    grid = np.arange(r_lo, r_hi, PLATEAU_GRID_STEP)
    f = dense_eval_many(profile.path, grid)[:, 0]
    # past the first zero the monitored quantity is meaningless
    keep = f > 0.0
    grid, f = grid[keep], f[keep]
    values = np.exp(profile.params.exp_fast * grid) * f
    width = int(round(window / PLATEAU_GRID_STEP))
    if values.size <= width:
        raise RangeError('not enough positive samples for a plateau window', 'insufficient_range')
    windows = sliding_window_view(values, width + 1)
    low = windows.min(axis=1)
    variation = (windows.max(axis=1) - low) / low
    start = int(np.argmin(variation))
    return float(grid[start]), float(grid[start + width]), float(variation[start]), float(windows[start].mean())


def _weighted_integral(profile: ProfileTrajectory, r_stop: float) -> float:
    """int_0^{r_stop} e^r f dr on the dense output (series part below the first node)"""
    path = profile.path
    r0 = path.t_start
    total = profile.a * r0
    r = path.t
    for k, segment in enumerate(path.segments):
        lo, hi = r[k], min(r[k + 1], r_stop)
        if hi <= lo:
            break
        piece, _ = quad(lambda s: math.exp(s) * segment(s)[0], lo, hi, epsabs=0.0, epsrel=1e-12, limit=200)
        total += piece
    return total


def _fit_critical(profile: ProfileTrajectory) -> TailFit:
    params = profile.params
    cfg = get_config()
    r_start, r_stop, variation, plateau_value = find_plateau(profile)
    if variation >= cfg.PLATEAU_VARIATION:
        raise ConvergenceError(
            f'no plateau of e^(r/(p-1)) f: best variation {variation:.3f} on [{r_start:g}, {r_stop:g}]',
            'not_converged',
        )
    crossover = r_stop
    f_c, g_c = profile.state_at(crossover)
    # beyond the crossover f is continued by its critical exponential tail
    tail = math.exp(crossover) * f_c * (params.p - 1.0) / (2.0 - params.p)
    weighted = _weighted_integral(profile, crossover) + tail
    from_identity = math.exp(crossover) * g_c + tail
    ell_star = (params.p - 1.0) * weighted ** params.q
    gap = abs(ell_star - plateau_value) / plateau_value
    logger.info('critical fit p=%.4g: plateau %.6g on [%.2f, %.2f], ell*=%.6g (gap %.2e)',
                params.p, plateau_value, r_start, r_stop, ell_star, gap)
    return TailFit(
        regime=CRITICAL, rate=params.exp_fast, ell_star=float(ell_star), I=float(weighted),
        I_from_identity=float(from_identity), plateau_value=plateau_value,
        plateau_window=(r_start, r_stop), plateau_variation=variation,
        crossover=crossover, ell_gap=float(gap),
    )


# Crossing ------------------------------------------------------------------

def _fit_crossing(profile: ProfileTrajectory, tail: Optional[TailEstimate]) -> TailFit:
    crossing = profile.crossing
    psi_slope = slope_gap = None
    if tail is not None and tail.ell > 0.0:
        psi_slope = -profile.a * tail.ell ** (1.0 / profile.params.p)
        slope_gap = abs(psi_slope - crossing.slope) / abs(crossing.slope)
    return TailFit(regime=CROSSING, R=crossing.R, slope=crossing.slope, psi_slope=psi_slope, slope_gap=slope_gap)


def fit_tail(profile: ProfileTrajectory, label: ClassLabel, tail: Optional[TailEstimate] = None) -> TailFit:
    """
    Tail constants of ``profile`` for the regime named by ``label``.

    Args:
        profile: integrated profile; decaying fits need a long run
            (see ``integrate_for_fit``)
        label: classification of the same parameter
        tail: optional transform tail estimate, used to cross-check the
            crossing slope

    Returns:
        TailFit
    """
    if label.regime == CROSSING:
        if profile.crossing is None:
            raise ClassificationError(f'label Crossing but profile a={profile.a} has no zero', 'wrong_label')
        return _fit_crossing(profile, tail)
    if label.regime == DECAYING:
        if profile.crossing is not None:
            raise ClassificationError(
                f'label Decaying but profile a={profile.a} vanishes at R={profile.crossing.R:g}', 'wrong_label'
            )
        return _fit_decaying(profile)
    return _fit_critical(profile)


def integrate_for_fit(params: Params, a: float, label: ClassLabel,
                      ctrl: Optional[StepControl] = None) -> ProfileTrajectory:
    """Profile run long enough for ``fit_tail``: decaying profiles go out to DECAY_R_MAX"""
    cfg = get_config()
    ctrl = ctrl or StepControl.default()
    if label.regime == DECAYING:
        r_max = cfg.DECAY_R_MAX
        # explicit steps stay O(1) along the tail: the run costs about r_max / 3 steps
        return integrate_profile(params, a, r_max=r_max, ctrl=ctrl)
    if label.regime == CROSSING:
        r_max = cfg.PROFILE_R_MAX
        while True:
            traj = integrate_profile(params, a, r_max=r_max, ctrl=ctrl)
            if traj.crossing is not None or r_max >= cfg.DECAY_R_MAX:
                return traj
            r_max *= 10.0
    return integrate_profile(params, a, r_max=cfg.PROFILE_R_MAX, ctrl=ctrl)


# Self-similar solution -------------------------------------------------------

def reconstruct_selfsimilar(profile: ProfileTrajectory, T: float, t: float,
                            x_grid: Sequence[float]) -> SelfSimilarSlice:
    """u(t, x) = ((2-p)(T-t))^{1/(2-p)} f(|x|), zero beyond the first zero of f"""
    if not (math.isfinite(T) and T > 0.0):
        raise ParameterError(f'extinction time must be positive, got {T}', 'invalid_argument')
    if not 0.0 <= t <= T:
        raise ParameterError(f'time must lie in [0, T], got {t}', 'invalid_argument')
    x = np.asarray(x_grid, dtype=float)
    radius = np.abs(x)
    params = profile.params
    r0 = profile.path.t_start
    if profile.crossing is None and radius.size and radius.max() > profile.r_end:
        raise RangeError(
            f'|x| up to {radius.max():g} exceeds the profile span ending at {profile.r_end:g}', 'grid_exceeds_span'
        )

    f = np.empty_like(radius)
    for i, r in enumerate(radius):
        if profile.crossing is not None and r >= profile.crossing.R:
            f[i] = 0.0
        elif r == 0.0:
            f[i] = profile.a
        elif r < r0:
            f[i] = profile_series_start(params, profile.a, r)[0]
        else:
            f[i] = profile.f_at(r)
    factor = ((2.0 - params.p) * (T - t)) ** (1.0 / (2.0 - params.p))
    return SelfSimilarSlice(T=float(T), t=float(t), x_grid=x, u_values=factor * np.maximum(f, 0.0))
