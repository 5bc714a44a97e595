"""Additive Gaussian noise bookkeeping for GKP stabilizer codes.

The decoder works with the joint covariance of the data displacement
``x_d`` and the unwrapped ancilla syndrome ``u = Mhat^T Omega x_a``.
"""

import json
from dataclasses import dataclass

import numpy as np
from scipy.linalg import block_diag, cho_factor, cho_solve

from .errors import DimensionError, DomainError, NumericalError
from .lattice import Lattice
from .symplectic import omega, require_symplectic, symplectic_inverse

COND_LIMIT = 1e12


@dataclass(frozen=True)
class AgnModel:
    """Independent additive Gaussian noise with per-mode variances."""

    variances: tuple

    def __post_init__(self):
        v = tuple(float(x) for x in np.atleast_1d(self.variances))
        if not v or min(v) <= 0:
            raise DomainError("noise variances must be positive")
        object.__setattr__(self, "variances", v)

    @classmethod
    def iid(cls, sigma, modes):
        return cls((sigma**2,) * modes)

    @property
    def modes(self):
        return len(self.variances)

    @property
    def covariance(self):
        return np.diag(np.repeat(self.variances, 2))


@dataclass(frozen=True)
class CodeSpec:
    """Encoding symplectic on ``N + M`` modes (data first) and the ancilla lattice."""

    encoding: np.ndarray
    lattice: Lattice
    data_modes: int
    ancilla_modes: int

    def __post_init__(self):
        S = np.array(self.encoding, dtype=float)
        K = self.data_modes + self.ancilla_modes
        if self.data_modes < 1 or self.ancilla_modes < 1:
            raise DomainError("need at least one data and one ancilla mode")
        if S.shape != (2 * K, 2 * K):
            raise DimensionError(f"encoding must be {2 * K}x{2 * K}, got {S.shape}")
        if self.lattice.modes != self.ancilla_modes:
            raise DimensionError("lattice dimension does not match ancilla modes")
        require_symplectic(S)
        S.setflags(write=False)
        object.__setattr__(self, "encoding", S)

    @property
    def modes(self):
        return self.data_modes + self.ancilla_modes

    def to_dict(self):
        return {"encoding": self.encoding.ravel().tolist(), "lattice": self.lattice.to_dict(),
                "data_modes": self.data_modes, "ancilla_modes": self.ancilla_modes}

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d):
        from .lattice import by_name
        lat = d["lattice"]
        lat = by_name(lat) if isinstance(lat, str) else Lattice.from_dict(lat)
        K = int(d["data_modes"]) + int(d["ancilla_modes"])
        S = np.asarray(d["encoding"], dtype=float).reshape(2 * K, 2 * K)
        return cls(S, lat, int(d["data_modes"]), int(d["ancilla_modes"]))


@dataclass(frozen=True)
class FiniteGkp:
    """Finite-squeezing GKP noise on ancilla preparation and measurement.

    ``measurement_sq`` defaults to ``sigma_gkp_sq``.
    """

    sigma_gkp_sq: float = 0.0
    measurement_sq: float = None

    def __post_init__(self):
        if self.measurement_sq is None:
            object.__setattr__(self, "measurement_sq", self.sigma_gkp_sq)
        for v in (self.sigma_gkp_sq, self.measurement_sq):
            if not 0 <= v < 1:
                raise DomainError(f"GKP variance must lie in [0, 1), got {v}")

    @classmethod
    def from_db(cls, s_db):
        if s_db is None or np.isinf(s_db):
            return cls(0.0)
        return cls(gkp_variance_from_db(s_db))

    @property
    def exact(self):
        return self.sigma_gkp_sq == 0 and self.measurement_sq == 0


@dataclass(frozen=True)
class NoiseBlocks:
    """Decoder state derived from the (x_d, u) covariance.

    ``v_d, v_da, v_a`` are blocks of its inverse and ``v_cond`` is
    ``V_a - V_da^T V_d^-1 V_da``.  The covariance-form fields hold the
    quantities actually used during decoding.
    """

    v_d: np.ndarray
    v_da: np.ndarray
    v_a: np.ndarray
    v_cond: np.ndarray
    cov_u: np.ndarray      # covariance of u, equal to v_cond^-1
    gain: np.ndarray       # -V_d^-1 V_da, maps u to E[x_d | u]
    v_d_inv: np.ndarray    # conditional covariance of x_d given u
    condition: float

    @property
    def n2(self):
        return self.v_d.shape[0]

    @property
    def m2(self):
        return self.v_a.shape[0]


def spd_inverse(A, what="matrix"):
    """Inverse of a symmetric positive-definite matrix via Cholesky, with condition check."""
    A = 0.5 * (A + A.T)
    cond = np.linalg.cond(A)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise NumericalError(f"{what} is ill-conditioned (condition number {cond:.3e})")
    try:
        c = cho_factor(A)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"{what} is not positive definite (condition number {cond:.3e})") from exc
    inv = cho_solve(c, np.eye(A.shape[0]))
    return 0.5 * (inv + inv.T), cond


def propagate_noise(code, noise):
    """Covariance ``S^-1 V_xi S^-T`` of the decoded displacement."""
    if noise.modes != code.modes:
        raise DimensionError("noise model and code have different mode counts")
    Si = symplectic_inverse(code.encoding)
    Vx = Si @ noise.covariance @ Si.T
    return 0.5 * (Vx + Vx.T)


def syndrome_map(lattice):
    """Linear map ``Mhat^T Omega`` from ancilla displacements to unwrapped syndromes."""
    return lattice.normalized.T @ omega(lattice.modes)


def joint_covariance(Vx, lattice, fin=None):
    """Covariance of ``(x_d, u)``, with finite-GKP noise added on ``u``."""
    m2 = lattice.generator.shape[0]
    n2 = Vx.shape[0] - m2
    if n2 < 2:
        raise DimensionError("covariance smaller than lattice dimension")
    T = block_diag(np.eye(n2), syndrome_map(lattice))
    C = T @ Vx @ T.T
    if fin is not None and not fin.exact:
        Mh = lattice.normalized
        C[n2:, n2:] += fin.sigma_gkp_sq * (Mh.T @ Mh) + fin.measurement_sq * np.eye(m2)
    return 0.5 * (C + C.T)


def noise_blocks(Vx, lattice, fin=None):
    """Precompute the decoder blocks for covariance ``Vx`` and ``lattice``."""
    C = joint_covariance(Vx, lattice, fin)
    m2 = lattice.generator.shape[0]
    n2 = C.shape[0] - m2
    P, cond = spd_inverse(C, "joint noise covariance")
    v_d, v_da, v_a = P[:n2, :n2], P[:n2, n2:], P[n2:, n2:]
    v_d_inv, _ = spd_inverse(v_d, "V_d")
    gain = -v_d_inv @ v_da
    v_cond = v_a - v_da.T @ v_d_inv @ v_da
    v_cond = 0.5 * (v_cond + v_cond.T)
    cov_u = C[n2:, n2:]
    return NoiseBlocks(v_d=v_d, v_da=v_da, v_a=v_a, v_cond=v_cond, cov_u=cov_u,
                       gain=gain, v_d_inv=v_d_inv, condition=cond)


def code_blocks(code, noise, fin=None):
    return noise_blocks(propagate_noise(code, noise), code.lattice, fin)


def gkp_variance_from_delta(delta):
    """GKP noise variance ``tanh(delta^2 / 2)``."""
    if delta <= 0:
        raise DomainError(f"delta must be positive, got {delta}")
    return float(np.tanh(delta**2 / 2))


def gkp_variance_from_db(s_db):
    """GKP noise variance from squeezing in dB, ``10^(-s/10) / 2``."""
    return float(10 ** (-s_db / 10) / 2)


def gkp_db_from_variance(var):
    """Inverse of :func:`gkp_variance_from_db`."""
    if var <= 0:
        raise DomainError("variance must be positive")
    return float(-10 * np.log10(2 * var))


__all__ = [
    "AgnModel", "CodeSpec", "FiniteGkp", "NoiseBlocks", "spd_inverse", "propagate_noise",
    "syndrome_map", "joint_covariance", "noise_blocks", "code_blocks",
    "gkp_variance_from_delta", "gkp_variance_from_db", "gkp_db_from_variance",
]
