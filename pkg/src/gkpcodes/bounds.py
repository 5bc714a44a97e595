"""Closed-form information-theoretic bounds for GKP stabilizer codes.

Entropies are in nats; capacities are in bits.
"""

import json
from dataclasses import asdict, dataclass

import numpy as np

from .errors import DomainError

BREAKEVEN_WINDOW = (1 / np.sqrt(np.e), 1 / np.sqrt(2))


def _check_modes(N, M):
    if N < 1 or M < N:
        raise DomainError("need M >= N >= 1")


def _check_gains(gains):
    g = np.atleast_1d(np.asarray(gains, dtype=float))
    if g.size == 0 or np.any(g < 1):
        raise DomainError("gains must be >= 1")
    return g


def sigma_lb(sigma, N, M):
    """Lower bound on the output GM standard deviation for iid noise.

    Parameters
    ----------
    sigma : float or ndarray
        Input noise standard deviation, ``0 < sigma < 1``.
    N, M : int
        Data and ancilla mode counts.

    Returns
    -------
    float or ndarray
        ``e^(-1/2) (sigma^2 / (1 - sigma^2))^((N + M) / (2N))``.

    Notes
    -----
    The expression bounds ``sigma_GM`` only for ``sigma <= 1/sqrt(2)``,
    where the AGN capacity upper bound is positive.  Beyond that point it
    still traces the ratio curve but exceeds the trivial code's ``sigma``.
    """
    _check_modes(N, M)
    s2 = np.asarray(sigma, dtype=float) ** 2
    if np.any(s2 <= 0) or np.any(s2 >= 1):
        raise DomainError("sigma^2 must lie in (0, 1)")
    out = np.exp(-0.5) * (s2 / (1 - s2)) ** ((N + M) / (2 * N))
    return float(out) if out.ndim == 0 else out


def lb_ratio_curve(sigmas, ratio):
    """``sigma_LB / sigma`` over ``sigmas`` for ``M/N = ratio`` (N = 1 scaled form)."""
    s = np.asarray(sigmas, dtype=float)
    s2 = s**2
    if np.any(s2 <= 0) or np.any(s2 >= 1) or ratio < 1:
        raise DomainError("need 0 < sigma < 1 and M/N >= 1")
    # large M/N saturates to 0 or inf on either side of the transition
    with np.errstate(over="ignore"):
        return np.exp(-0.5) * (s2 / (1 - s2)) ** ((1 + ratio) / 2) / s


def lb_crossing(ratio):
    """Input noise at which ``sigma_LB / sigma = 1`` for ``M/N = ratio``.

    The log-ratio is strictly increasing in ``sigma`` so the root is unique.
    """
    from scipy.optimize import brentq
    if ratio < 1:
        raise DomainError("need M/N >= 1")

    def f(s):
        s2 = s * s
        return -0.5 + 0.5 * (1 + ratio) * (np.log(s2) - np.log1p(-s2)) - np.log(s)

    return float(brentq(f, 1e-6, 1 - 1e-12, xtol=1e-15, rtol=4 * np.finfo(float).eps))


def capacity_lb(sigma_gm_sq, N):
    """Quantum capacity lower bound ``max(0, N log2(1 / (e sigma_gm^2)))`` in bits."""
    if sigma_gm_sq <= 0:
        raise DomainError("sigma_gm_sq must be positive")
    return max(0.0, N * float(np.log2(1 / (np.e * sigma_gm_sq))))


def capacity_ub(variances):
    """AGN quantum capacity upper bound in bits, each mode floored at zero."""
    v = np.atleast_1d(np.asarray(variances, dtype=float))
    if v.size == 0 or np.any(v <= 0) or np.any(v >= 1):
        raise DomainError("variances must lie in (0, 1)")
    return float(np.sum(np.maximum(0.0, np.log2((1 - v) / v))))


def no_threshold_tr_lb(gains, sigma):
    """Lower bound ``sum_i 2 sigma^2 / (2 G_i - 1)`` on ``tr V_out``."""
    g = _check_gains(gains)
    return float(np.sum(2 * sigma**2 / (2 * g - 1)))


@dataclass(frozen=True)
class EntropyReport:
    s_xd: float
    s_xa: float
    s_joint: float
    mutual_info: float
    cond_entropy: float


def entropy_report(gains, sigma, N, M):
    """Differential entropies of the data and ancilla noise of a reduced code.

    Parameters
    ----------
    gains : sequence of float
        The ``N`` TMS gains.
    sigma : float
        Input noise standard deviation.
    N, M : int
        Data and ancilla mode counts.

    Returns
    -------
    EntropyReport
    """
    _check_modes(N, M)
    g = _check_gains(gains)
    if g.size != N:
        raise DomainError("need one gain per data mode")
    if sigma <= 0:
        raise DomainError("sigma must be positive")
    c = np.log(2 * np.pi * np.e * sigma**2)
    lg = np.log(2 * g - 1)
    s_xd = float(np.sum(c + lg))
    s_xa = s_xd + (M - N) * c
    s_joint = (N + M) * c
    return EntropyReport(s_xd=s_xd, s_xa=float(s_xa), s_joint=float(s_joint),
                         mutual_info=float(2 * np.sum(lg)),
                         cond_entropy=float(np.sum(c - lg)))


def gaussian_entropy(V):
    """Differential entropy ``ln((2 pi e)^K det V) / 2`` of a normal vector."""
    V = np.asarray(V, dtype=float)
    w = np.linalg.eigvalsh(0.5 * (V + V.T))
    if w.min() <= 0:
        raise DomainError("covariance must be positive definite")
    return 0.5 * (V.shape[0] * np.log(2 * np.pi * np.e) + np.sum(np.log(w)))


@dataclass(frozen=True)
class BoundsReport:
    sigma: float
    n: int
    m: int
    sigma_lb: float
    capacity_lb_bits: float
    capacity_ub_bits: float
    no_threshold_tr_lb: float
    breakeven_window: tuple = BREAKEVEN_WINDOW

    def to_dict(self):
        d = asdict(self)
        d["breakeven_window"] = list(self.breakeven_window)
        return d

    def to_json(self):
        return json.dumps(self.to_dict())


def bounds_report(sigma, N, M, gains=None, sigma_gm_sq=None):
    """Collect the bounds at one operating point.

    ``gains`` defaults to all ones; ``sigma_gm_sq`` defaults to ``sigma_lb^2``,
    where the capacity lower bound is evaluated.
    """
    lb = sigma_lb(sigma, N, M)
    gains = np.ones(N) if gains is None else gains
    gm = lb**2 if sigma_gm_sq is None else sigma_gm_sq
    return BoundsReport(sigma=float(sigma), n=N, m=M, sigma_lb=lb,
                        capacity_lb_bits=capacity_lb(gm, N),
                        capacity_ub_bits=capacity_ub([sigma**2] * (N + M)),
                        no_threshold_tr_lb=no_threshold_tr_lb(gains, sigma))


def breakeven_window():
    """Interval ``(1/sqrt(e), 1/sqrt(2))`` bracketing the break-even noise."""
    return BREAKEVEN_WINDOW


__all__ = [
    "BREAKEVEN_WINDOW", "sigma_lb", "lb_ratio_curve", "lb_crossing", "capacity_lb", "capacity_ub",
    "no_threshold_tr_lb", "EntropyReport", "entropy_report", "gaussian_entropy", "BoundsReport",
    "bounds_report", "breakeven_window",
]
