import math
from dataclasses import dataclass, field
from typing import Any, Dict, Optional

import numpy as np
from scipy.optimize import brentq

from ..config import get_config
from ..errors import ParameterError


@dataclass(frozen=True)
class Params:
    """Exponent p of the profile equation and the constants derived from it.

    Derived constants are properties so they can never disagree with ``p``.
    """

    p: float
    guard: Optional[float] = field(default=None, compare=False)

    def __post_init__(self):
        guard = self.guard if self.guard is not None else get_config().P_GUARD
        if not (0.0 <= guard < 0.5):
            raise ParameterError(f'guard band must lie in [0, 0.5), got {guard}', 'invalid_p')
        p = float(self.p)
        if not math.isfinite(p) or not (1.0 + guard <= p <= 2.0 - guard) or p in (1.0, 2.0):
            raise ParameterError(
                f'p={self.p} outside the admissible band [{1 + guard}, {2 - guard}]', 'invalid_p'
            )
        object.__setattr__(self, 'p', p)
        object.__setattr__(self, 'guard', guard)

    @property
    def q(self) -> float:
        """1/(p-1): exponent mapping g to |f'|"""
        return 1.0 / (self.p - 1.0)

    @property
    def kappa(self) -> float:
        return (self.p - 1.0) ** (-self.p)

    @property
    def exp_fast(self) -> float:
        """Exponential decay rate of the critical profile"""
        return 1.0 / (self.p - 1.0)

    @property
    def exp_slow(self) -> float:
        """Algebraic decay exponent: f(r) ~ slow_const * r^(-exp_slow)"""
        return (self.p - 1.0) / (2.0 - self.p)

    @property
    def slow_const(self) -> float:
        return ((self.p - 1.0) / (2.0 - self.p)) ** ((self.p - 1.0) / (2.0 - self.p))

    @property
    def c_lower(self) -> float:
        """Largest a for which membership in the decaying set is guaranteed"""
        p = self.p
        return (p - 1.0) ** ((p - 1.0) / (2.0 - p)) * p ** (-p / (2.0 - p))

    def beta(self, a: float) -> float:
        """Initial slope psi'(0) = p a^(2-p) / (p-1)"""
        return self.p * a ** (2.0 - self.p) / (self.p - 1.0)

    def crossing_seed(self) -> float:
        """Smallest a for which the closed-form sufficient condition for crossing holds"""
        p = self.p
        coeff = p * (1.0 - 2.0 ** (p - 2.0)) / ((p - 1.0) * (2.0 - p))
        rhs = self.kappa * (1.0 + p * math.log(2.0))
        return (rhs / coeff) ** (1.0 / (2.0 - p))

    def tail_scale(self, a: float) -> float:
        """a^(p(2-p)/(p-1)): lower envelope and limit of psi (1-y)^(-p/(p-1))"""
        p = self.p
        return a ** (p * (2.0 - p) / (p - 1.0))

    def barrier_amplitude(self, a: float) -> Optional[float]:
        """Amplitude A in (0,1) with A^((p-1)/p) - A >= a^(2-p), or None if none exists.

        A^((p-1)/p) - A peaks at A_max = ((p-1)/p)^p; the smallest admissible A on
        (0, A_max] gives the tightest supersolution A (1-y)^(p/(p-1)).
        """
        p = self.p
        target = a ** (2.0 - p)
        a_max = ((p - 1.0) / p) ** p

        def gap(amp):
            return amp ** ((p - 1.0) / p) - amp - target

        if gap(a_max) < 0.0:
            if gap(a_max) > -1e-14 * max(1.0, target):
                return a_max
            return None
        if gap(a_max) == 0.0:
            return a_max
        # gap(0) = -target < 0 <= gap(a_max)
        return brentq(gap, 0.0, a_max, xtol=1e-300, rtol=4 * np.finfo(float).eps)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'p': self.p,
            'kappa': self.kappa,
            'exp_fast': self.exp_fast,
            'exp_slow': self.exp_slow,
            'slow_const': self.slow_const,
            'c_lower': self.c_lower,
        }
