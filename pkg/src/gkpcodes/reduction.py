"""Reduction of Gaussian encodings to two-mode-squeezing normal form.

For iid noise, local symplectics on the data and ancilla modes bring the
noise covariance ``S_enc^-1 S_enc^-T`` of any encoding to a direct sum
of TMS covariances plus vacuum on the unpaired ancillae.
"""

import json
from dataclasses import dataclass

import numpy as np
from scipy.linalg import block_diag

from .errors import DomainError, ReductionError
from .symplectic import Z1, require_symplectic, squeeze, symplectic_inverse, tms, williamson

GAIN_SNAP = 1e-12


@dataclass(frozen=True)
class ReductionResult:
    """Gains ``G_i`` (descending) and local symplectics ``lambda_d``, ``lambda_a``."""

    gains: np.ndarray
    lambda_d: np.ndarray
    lambda_a: np.ndarray
    residual: float

    def to_dict(self):
        return {"gains": self.gains.tolist(), "lambda_d": self.lambda_d.tolist(),
                "lambda_a": self.lambda_a.tolist(), "residual": self.residual}

    def to_json(self):
        return json.dumps(self.to_dict())


def tms_normal_form(gains, M):
    """Covariance ``(+) S_G S_G^T (+) I`` with data modes first, pairs (d_i, a_i)."""
    gains = np.asarray(gains, dtype=float)
    N = len(gains)
    a = np.repeat(2 * gains - 1, 2)
    c = 2 * np.sqrt(gains * (gains - 1))
    V = np.eye(2 * (N + M))
    V[:2 * N, :2 * N] = np.diag(a)
    V[2 * N:4 * N, 2 * N:4 * N] = np.diag(a)
    X = block_diag(*[ci * Z1 for ci in c])
    V[:2 * N, 2 * N:4 * N] = X
    V[2 * N:4 * N, :2 * N] = X.T
    return V


def _to_complex(A):
    """Complex-linear part of a real ``2n x 2n`` matrix, ``a + ib`` per block ``[[a, b], [-b, a]]``."""
    a = 0.5 * (A[0::2, 0::2] + A[1::2, 1::2])
    b = 0.5 * (A[0::2, 1::2] - A[1::2, 0::2])
    return a + 1j * b


def _from_complex(W):
    n = W.shape[0]
    A = np.empty((2 * n, 2 * n))
    A[0::2, 0::2] = A[1::2, 1::2] = W.real
    A[0::2, 1::2] = W.imag
    A[1::2, 0::2] = -W.imag
    return A


def _polar(W):
    u, _, vh = np.linalg.svd(W)
    return u @ vh


def reduce_to_tms(S_enc, N, M, sigma=1.0, tol=1e-8):
    """Find local symplectics reducing ``S_enc`` to a product of TMS codes.

    Parameters
    ----------
    S_enc : ndarray
        Encoding on ``N`` data modes followed by ``M`` ancilla modes.
    N, M : int
        Mode counts, ``M >= N``.
    sigma : float
        Noise standard deviation.  It scales both sides of the normal form
        and does not affect the result.
    tol : float
        Bound on the relative Frobenius reconstruction error.

    Returns
    -------
    ReductionResult
    """
    if M < N or N < 1:
        raise DomainError("need M >= N >= 1")
    S = require_symplectic(S_enc)
    if S.shape[0] != 2 * (N + M):
        raise DomainError("encoding dimension does not match N + M")
    if sigma <= 0:
        raise DomainError("sigma must be positive")
    Si = symplectic_inverse(S)
    V = Si @ Si.T
    V = 0.5 * (V + V.T)
    n2 = 2 * N
    Vd, Va, Vda = V[:n2, :n2], V[n2:, n2:], V[:n2, n2:]

    wd = williamson(Vd)
    wa = williamson(Va)
    lam_d = symplectic_inverse(wd.sympl)
    lam_a0 = symplectic_inverse(wa.sympl)

    X = lam_d @ Vda @ lam_a0.T
    X1 = X[:, :n2]
    # c = sqrt(nu^2 - 1) loses half the digits near nu = 1; the row norms
    # of the cross block give the couplings directly
    c = np.sqrt(0.5 * (X1**2).sum(1).reshape(N, 2).sum(1))
    c[c < GAIN_SNAP] = 0.0
    gains = (1 + np.sqrt(1 + c**2)) / 2
    # passive ancilla rotation U with X1 = (+) c_i Z U, by Procrustes
    Zs = block_diag(*[Z1] * N)
    U = _from_complex(_polar(_to_complex(Zs @ (np.repeat(c, 2)[:, None] * X1))))
    lam_a = block_diag(U, np.eye(2 * (M - N))) @ lam_a0

    L = block_diag(lam_d, lam_a)
    target = tms_normal_form(gains, M)
    got = L @ V @ L.T
    resid = float(np.linalg.norm(got - target) / max(1.0, np.linalg.norm(target)))
    if resid > tol:
        raise ReductionError(f"reduction residual {resid:.3e} exceeds {tol:g}")
    return ReductionResult(gains=gains, lambda_d=lam_d, lambda_a=lam_a, residual=resid)


def staircase_gains(G1, G2):
    """Equivalent gains ``(G12, Ga)`` of a two-layer TMS staircase."""
    if G1 < 1 or G2 < 1:
        raise DomainError("gains must be >= 1")
    G12 = 1 + G2 * (G1 - 1)
    return G12, G2 * G1 / G12


def sqrep3_gain(lam):
    """TMS gain equivalent to the three-mode squeezed-repetition code."""
    if lam <= 0:
        raise DomainError("lambda must be positive")
    return (np.sqrt(1 / lam**2 + 1) + 1) / 2


def sqrep3_data_squeezer(lam):
    """Data-mode squeezer accompanying :func:`sqrep3_gain`."""
    if lam <= 0:
        raise DomainError("lambda must be positive")
    return squeeze(lam * (lam**2 + lam**4) ** 0.25)


def sqrep2_gain():
    """TMS gain equivalent to the two-mode squeezed-repetition code (any lambda)."""
    return (np.sqrt(2) + 1) / 2


def reduced_code(S_enc, lattice_sympl, N, M):
    """Reduced encoding ``tms`` product and transformed ancilla symplectic.

    Returns ``(result, encoding, ancilla_sympl)`` where the ancilla lattice of
    the reduced code is generated by ``ancilla_sympl = lambda_a @ lattice_sympl``.
    """
    res = reduce_to_tms(S_enc, N, M)
    from .symplectic import tms_code
    if M == N:
        enc = tms_code(res.gains)
    else:
        enc = block_diag(tms_code(res.gains), np.eye(2 * (M - N)))
        # keep data modes first: (d..., a_paired..., a_free...)
    return res, enc, res.lambda_a @ lattice_sympl


__all__ = [
    "ReductionResult", "tms_normal_form", "reduce_to_tms", "staircase_gains", "sqrep3_gain",
    "sqrep3_data_squeezer", "sqrep2_gain", "reduced_code", "tms", "GAIN_SNAP",
]
