"""
Regime sweep over a grid of shooting parameters.

Each grid point is classified and, when possible, tail-fitted independently;
points run on a thread pool and come back in grid order.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from ..config import get_config
from ..errors import ExtprofError, ParameterError
from ..models.params import Params
from .asymptotics import fit_tail, integrate_for_fit
from .classifier import classify, initial_bracket
from .ode_core import StepControl

logger = logging.getLogger(__name__)

DEFAULT_POINTS = 50


def default_grid(params: Params, ctrl: Optional[StepControl] = None, points: int = DEFAULT_POINTS) -> np.ndarray:
    """Logarithmic grid over [a_lo / 10, 10 a_hi] of the initial bracket"""
    a_lo, a_hi = initial_bracket(params, ctrl)
    return np.geomspace(a_lo / 10.0, 10.0 * a_hi, points)


def _sweep_point(params: Params, a: float, margin, ctrl, fit: bool) -> Dict[str, Any]:
    record: Dict[str, Any] = {'a': float(a)}
    try:
        label = classify(params, a, margin=margin, ctrl=ctrl)
    except ExtprofError as exc:
        logger.warning('sweep point a=%.6g failed to classify: %s', a, exc)
        record.update(regime=None, evidence=None, error=exc.kind)
        return record
    record.update(regime=label.regime, evidence=label.evidence, phi=label.phi, y=label.y)
    if not fit:
        return record
    try:
        profile = integrate_for_fit(params, a, label, ctrl)
        fitted = fit_tail(profile, label).to_dict()
        window = fitted.pop('plateau_window', None)
        if window is not None:
            fitted['plateau_start'], fitted['plateau_stop'] = window
        record.update(fitted)
        record['regime'] = label.regime
    except ExtprofError as exc:
        logger.info('no tail fit at a=%.6g (%s): %s', a, label.regime, exc)
        record['fit_error'] = exc.kind
    return record


def sweep(
    params: Params,
    a_values: Optional[Sequence[float]] = None,
    margin: Optional[float] = None,
    ctrl: Optional[StepControl] = None,
    fit: bool = True,
    workers: Optional[int] = None,
) -> List[Dict[str, Any]]:
    """
    Classify (and tail-fit) every a in ``a_values``.

    Args:
        params: exponent parameters
        a_values: grid of shooting parameters (``default_grid`` when omitted)
        margin: classification margin
        ctrl: step control
        fit: also compute tail constants for each point
        workers: thread count, capped by EXTPROF_THREADS

    Returns:
        One record per grid point, in grid order
    """
    cfg = get_config()
    grid = default_grid(params, ctrl) if a_values is None else np.asarray(a_values, dtype=float)
    if grid.size == 0:
        return []
    if np.any(~np.isfinite(grid)) or np.any(grid <= 0.0):
        raise ParameterError('sweep grid must contain positive finite values', 'invalid_a')
    workers = min(workers or cfg.EXTPROF_THREADS, cfg.EXTPROF_THREADS, grid.size)
    workers = max(1, workers)
    logger.info('sweep p=%.4g over %d points on %d threads', params.p, grid.size, workers)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        records = list(pool.map(lambda a: _sweep_point(params, a, margin, ctrl, fit), grid))
    return records


def sweep_frame(records: Sequence[Dict[str, Any]]) -> pd.DataFrame:
    """Records as a DataFrame with the classification columns first"""
    frame = pd.DataFrame(list(records))
    if frame.empty:
        return frame
    leading = [c for c in ('a', 'regime', 'evidence', 'phi', 'y') if c in frame.columns]
    rest = sorted(c for c in frame.columns if c not in leading)
    return frame[leading + rest]


def labels_monotone(records: Sequence[Dict[str, Any]], max_band: int = 2) -> bool:
    """Decaying, then at most ``max_band`` Critical points, then Crossing along an increasing grid"""
    order = {'Decaying': 0, 'Critical': 1, 'Crossing': 2}
    ranks = [order[r['regime']] for r in records if r.get('regime') in order]
    if any(later < earlier for earlier, later in zip(ranks, ranks[1:])):
        return False
    return sum(1 for rank in ranks if rank == 1) <= max_band
