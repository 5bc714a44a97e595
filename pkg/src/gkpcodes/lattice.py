"""GKP lattices: generator matrices, integrality checks and a standard library.

A lattice is stored through its generator ``M`` whose columns are the
lattice vectors, including the canonical spacing ``sqrt(2 pi)``.
"""

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import block_diag

from .errors import DimensionError, DomainError, ValidationError
from .symplectic import beamsplitter, bloch_messiah, omega, require_symplectic, rotation, squeeze

ELL = np.sqrt(2 * np.pi)
INTEGRALITY_TOL = 1e-9

_R2 = np.sqrt(2.0)
LAMBDA_HEX = _R2 / 3**0.25 * np.array([[1.0, -0.5], [0.0, np.sqrt(3) / 2]])
# basis vectors are the rows below, so transpose to columns
LAMBDA_D4 = (2**0.25 * np.array([
    [0.5, -1 / _R2, 0.5, 0.0],
    [0.0, 1 / _R2, 0.0, 1 / _R2],
    [0.0, 1 / _R2, 0.0, -1 / _R2],
    [-0.5, 0.0, 0.5, 1 / _R2],
])).T


@dataclass(frozen=True)
class Lattice:
    """GKP lattice with generator ``M`` (columns are lattice vectors)."""

    generator: np.ndarray
    label: str = "custom"
    _hat: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        M = np.array(self.generator, dtype=float)
        if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] % 2:
            raise DimensionError(f"generator must be 2M x 2M, got {M.shape}")
        if abs(np.linalg.det(M)) <= 1e-12:
            raise ValidationError("generator columns are linearly dependent")
        M.setflags(write=False)
        object.__setattr__(self, "generator", M)
        hat = M / ELL
        hat.setflags(write=False)
        object.__setattr__(self, "_hat", hat)

    @property
    def modes(self):
        return self.generator.shape[0] // 2

    @property
    def normalized(self):
        """Generator divided by ``sqrt(2 pi)``."""
        return self._hat

    def to_dict(self):
        return {"label": self.label, "modes": self.modes,
                "generator": self.generator.ravel().tolist()}

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d):
        modes = int(d["modes"])
        gen = np.asarray(d["generator"], dtype=float)
        if gen.size != 4 * modes * modes:
            raise DimensionError("generator length does not match modes")
        return cls(gen.reshape(2 * modes, 2 * modes), label=d.get("label", "custom"))

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def from_symplectic(lam, label="custom"):
    """Lattice ``M = sqrt(2 pi) Lambda Omega`` obtained by a Gaussian unitary on the square lattice."""
    lam = require_symplectic(lam)
    return Lattice(ELL * lam @ omega(lam.shape[0] // 2), label=label)


def square(modes=1):
    """Canonical square lattice, ``M = sqrt(2 pi) Omega``."""
    return Lattice(ELL * omega(modes), label="square" if modes == 1 else f"square{modes}")


def rectangular(eta):
    """Rectangular lattice with aspect ratio ``eta**2``."""
    if eta <= 0:
        raise DomainError(f"eta must be positive, got {eta}")
    return from_symplectic(squeeze(eta), label=f"rectangular({eta:g})")


def hexagonal(modes=1):
    """Hexagonal lattice on each of ``modes`` modes."""
    lam = block_diag(*[LAMBDA_HEX] * modes)
    return from_symplectic(lam, label="hexagonal" if modes == 1 else f"hexagonal{modes}")


def d4():
    """Two-mode D4 lattice."""
    return from_symplectic(LAMBDA_D4, label="d4")


def bell():
    """Two-mode GKP Bell lattice."""
    return from_symplectic(beamsplitter(np.pi / 4), label="bell")


LIBRARY = {
    "square": lambda: square(1),
    "square2": lambda: square(2),
    "hexagonal": lambda: hexagonal(1),
    "hexagonal2": lambda: hexagonal(2),
    "d4": d4,
    "bell": bell,
}


def by_name(name):
    """Look up a library lattice by label."""
    try:
        return LIBRARY[name]()
    except KeyError:
        raise DomainError(f"unknown lattice {name!r}; known: {sorted(LIBRARY)}") from None


def form_matrix(L):
    """``M^T Omega M / (2 pi)`` as floats."""
    M = L.generator
    return M.T @ omega(L.modes) @ M / (2 * np.pi)


def check_integral(L, tol=INTEGRALITY_TOL):
    """Return the integer matrix ``A = M^T Omega M / 2 pi``; raise if not integral."""
    F = form_matrix(L)
    A = np.rint(F)
    dev = np.abs(F - A)
    if dev.max() > tol:
        i, j = np.unravel_index(np.argmax(dev), dev.shape)
        raise ValidationError(f"lattice is not symplectically integral: A[{i},{j}] = {F[i, j]:.12g}")
    return A.astype(int)


def is_self_dual(L):
    """True iff ``A`` equals the symplectic form."""
    try:
        A = check_integral(L)
    except ValidationError:
        return False
    return bool(np.array_equal(A, omega(L.modes).astype(int)))


def check_unimodular(N):
    N = np.asarray(N)
    if N.ndim != 2 or N.shape[0] != N.shape[1]:
        raise DimensionError("unimodular matrix must be square")
    if not np.all(np.equal(np.mod(N, 1), 0)):
        raise DomainError("unimodular matrix must be integer valued")
    Ni = N.astype(int)
    det = int(round(np.linalg.det(Ni)))
    if det != 1:
        raise DomainError(f"unimodular matrix must have determinant 1, got {det}")
    return Ni


def change_basis(L, N):
    """Same lattice with generator ``M N^T`` for integer ``N`` of determinant 1."""
    N = check_unimodular(N)
    if N.shape[0] != L.generator.shape[0]:
        raise DimensionError("unimodular matrix size does not match lattice")
    return Lattice(L.generator @ N.T, label=L.label)


def param_lattice(r, theta):
    """Single-mode lattice from ``Sq(r) R(theta)`` acting on the square lattice."""
    if r <= 0:
        raise DomainError(f"r must be positive, got {r}")
    return from_symplectic(squeeze(r) @ rotation(theta), label=f"param(r={r:g},theta={theta:g})")


def min_norm(L, search=3):
    """Shortest nonzero lattice vector length (small-box enumeration)."""
    d = L.generator.shape[0]
    grids = np.meshgrid(*[np.arange(-search, search + 1)] * d, indexing="ij")
    n = np.stack([g.ravel() for g in grids], 1)
    n = n[np.any(n != 0, axis=1)]
    return float(np.sqrt((((L.generator @ n.T) ** 2).sum(0)).min()))


HEX_TABLE = [
    ((np.pi / 4, 3**0.25), np.eye(2, dtype=int)),
    ((0.16 * np.pi, 2.095), np.array([[-2, -1], [1, 0]])),
    ((0.11 * np.pi, 3.021), np.array([[2, -1], [1, 0]])),
    ((0.18 * np.pi, 3.385), np.array([[1, -2], [1, -1]])),
]


def hex_equivalents():
    """Four rounded ``((theta, r), N)`` representations of the hexagonal lattice."""
    return [((th, r), N.copy()) for (th, r), N in HEX_TABLE]


def hex_equivalent_exact(N):
    """Exact ``(theta, r)`` with ``Sq(r) R(theta)`` equivalent to ``Sq(3^(1/4)) R(pi/4) N``.

    ``theta`` is folded into ``[0, pi/4]`` using the ``theta -> pi/2 - theta``
    and ``theta -> theta + pi/2`` symmetries.
    """
    N = check_unimodular(N)
    base = squeeze(3**0.25) @ rotation(np.pi / 4)
    bm = bloch_messiah(base @ N)
    R = bm.right
    theta = np.mod(np.arctan2(R[0, 1], R[0, 0]), np.pi / 2)
    if theta > np.pi / 4:
        theta = np.pi / 2 - theta
    return float(theta), float(bm.squeezings[0])


__all__ = [
    "ELL", "LAMBDA_HEX", "LAMBDA_D4", "Lattice", "from_symplectic", "square", "rectangular",
    "hexagonal", "d4", "bell", "LIBRARY", "by_name", "form_matrix", "check_integral",
    "is_self_dual", "check_unimodular", "change_basis", "param_lattice", "min_norm",
    "hex_equivalents", "hex_equivalent_exact",
]
