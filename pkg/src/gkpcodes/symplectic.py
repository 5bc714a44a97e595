"""Symplectic linear algebra for Gaussian operations on bosonic modes.

Quadratures are ordered as (q1, p1, q2, p2, ...) throughout.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import block_diag, schur

from .errors import DimensionError, DomainError, ValidationError

OMEGA1 = np.array([[0.0, 1.0], [-1.0, 0.0]])
Z1 = np.diag([1.0, -1.0])
PI_Q = np.diag([1.0, 0.0])
PI_P = np.diag([0.0, 1.0])


@dataclass(frozen=True)
class BlochMessiah:
    """Factorization ``S = left @ diag(r1, 1/r1, ...) @ right``.

    Attributes
    ----------
    left, right : ndarray
        Orthogonal symplectic (passive) factors.
    squeezings : ndarray
        Per-mode squeezing factors, all ``>= 1`` and sorted descending.
    """

    left: np.ndarray
    squeezings: np.ndarray
    right: np.ndarray

    @property
    def middle(self):
        return squeeze_diag(self.squeezings)

    def reconstruct(self):
        return self.left @ self.middle @ self.right


@dataclass(frozen=True)
class WilliamsonResult:
    """Williamson normal form ``V = sympl @ diag(nu1, nu1, ...) @ sympl.T``."""

    sympl: np.ndarray
    eigenvalues: np.ndarray

    def reconstruct(self):
        d = np.repeat(self.eigenvalues, 2)
        return (self.sympl * d) @ self.sympl.T


def _check_even_square(S):
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1] or S.shape[0] % 2:
        raise DimensionError(f"expected a square matrix of even dimension, got shape {S.shape}")
    return S


def omega(modes):
    """Return the symplectic form for ``modes`` modes."""
    if modes < 1:
        raise DomainError("modes must be >= 1")
    return block_diag(*[OMEGA1] * modes)


def symplectic_inner(mu, nu, modes=None):
    """Symplectic inner product ``mu^T Omega nu``."""
    mu = np.asarray(mu, dtype=float)
    nu = np.asarray(nu, dtype=float)
    if modes is None:
        modes = mu.shape[-1] // 2
    return mu @ omega(modes) @ nu


def is_symplectic(S, tol=1e-10):
    """Check ``||S Omega S^T - Omega||_F < tol``."""
    S = _check_even_square(S)
    Om = omega(S.shape[0] // 2)
    return bool(np.linalg.norm(S @ Om @ S.T - Om) < tol)


def require_symplectic(S, tol=1e-8):
    S = _check_even_square(S)
    Om = omega(S.shape[0] // 2)
    err = np.linalg.norm(S @ Om @ S.T - Om) / max(1.0, np.linalg.norm(S) ** 2)
    if err >= tol:
        raise ValidationError(f"matrix is not symplectic (relative form error {err:.3e})")
    return S


def symplectic_inverse(S):
    """Exact inverse ``-Omega S^T Omega`` of a symplectic matrix."""
    S = _check_even_square(S)
    Om = omega(S.shape[0] // 2)
    return -Om @ S.T @ Om


def tms(G):
    """Two-mode squeezing with gain ``G >= 1``."""
    if G < 1:
        raise DomainError(f"gain must be >= 1, got {G}")
    a, b = np.sqrt(G), np.sqrt(G - 1.0)
    I = np.eye(2)
    return np.block([[a * I, b * Z1], [b * Z1, a * I]])


def squeeze(r):
    """Single-mode squeezer ``diag(r, 1/r)``."""
    if r <= 0:
        raise DomainError(f"squeezing factor must be positive, got {r}")
    return np.diag([r, 1.0 / r])


def squeeze_diag(rs):
    """Direct sum of single-mode squeezers."""
    return block_diag(*[squeeze(r) for r in np.atleast_1d(rs)])


def rotation(theta):
    """Phase rotation by ``theta``."""
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, s], [-s, c]])


def beamsplitter(theta):
    """Two-mode beamsplitter with mixing angle ``theta``."""
    c, s = np.cos(theta), np.sin(theta)
    I = np.eye(2)
    return np.block([[c * I, s * I], [-s * I, c * I]])


def sum_gate(delta):
    """SUM gate of strength ``delta`` (q2 += delta q1, p1 -= delta p2)."""
    I = np.eye(2)
    return np.block([[I, -delta * PI_P], [delta * PI_Q, I]])


def sqrep2(lam):
    """Two-mode squeezed-repetition encoding."""
    if lam <= 0:
        raise DomainError(f"lambda must be positive, got {lam}")
    il = 1.0 / lam
    return np.array([
        [il, 0, 0, 0],
        [0, lam, 0, -lam],
        [lam, 0, lam, 0],
        [0, 0, 0, il],
    ])


def sqrep3(lam):
    """Three-mode squeezed-repetition encoding."""
    if lam <= 0:
        raise DomainError(f"lambda must be positive, got {lam}")
    l2, l3, il = lam**2, lam**3, 1.0 / lam
    return np.array([
        [1 / l2, 0, 0, 0, 0, 0],
        [0, l2, 0, -lam, 0, 0],
        [1, 0, lam, 0, 0, 0],
        [0, 0, 0, il, 0, -lam],
        [l2, 0, l3, 0, lam, 0],
        [0, 0, 0, 0, 0, il],
    ])


def sqrep2_encoding(lam):
    """Encoding acting as ``x -> S x`` whose inverse is :func:`sqrep2`.

    :func:`sqrep2` and :func:`sqrep3` give the squeezed-repetition maps in
    the orientation whose noise covariance is ``S S^T``; this package
    propagates noise as ``S^-1 S^-T``.
    """
    return symplectic_inverse(sqrep2(lam))


def sqrep3_encoding(lam):
    """Encoding whose inverse is :func:`sqrep3`; see :func:`sqrep2_encoding`."""
    return symplectic_inverse(sqrep3(lam))


def embed(S, modes, total):
    """Embed an operation acting on ``modes`` into ``total`` modes.

    Parameters
    ----------
    S : ndarray
        ``2k x 2k`` matrix acting on the listed modes, in the listed order.
    modes : sequence of int
        Target mode indices.
    total : int
        Number of modes in the output.
    """
    S = _check_even_square(S)
    modes = list(modes)
    if S.shape[0] != 2 * len(modes) or len(set(modes)) != len(modes):
        raise DimensionError("operation size does not match the mode list")
    idx = np.ravel([[2 * m, 2 * m + 1] for m in modes])
    out = np.eye(2 * total)
    out[np.ix_(idx, idx)] = S
    return out


def mode_permutation(order):
    """Symplectic permutation matrix sending old mode ``order[i]`` to slot ``i``."""
    K = len(order)
    P = np.zeros((2 * K, 2 * K))
    for i, o in enumerate(order):
        P[2 * i:2 * i + 2, 2 * o:2 * o + 2] = np.eye(2)
    return P


def tms_code(gains):
    """Direct product of TMS operations pairing data mode i with ancilla mode i.

    Modes are ordered as all data modes first, then all ancillae.
    """
    gains = list(np.atleast_1d(gains))
    n = len(gains)
    S = block_diag(*[tms(g) for g in gains])
    order = [2 * i for i in range(n)] + [2 * i + 1 for i in range(n)]
    P = mode_permutation(order)
    return P @ S @ P.T


def staircase_up(G1, G2):
    """Couple ancillae (a1, a2) with gain G2, then (d, a1) with gain G1."""
    return block_diag(tms(G1), np.eye(2)) @ block_diag(np.eye(2), tms(G2))


def staircase_down(G1, G2):
    """Couple (d, a1) with gain G1, then (a1, a2) with gain G2."""
    return block_diag(np.eye(2), tms(G2)) @ block_diag(tms(G1), np.eye(2))


def _canonical_sign(v):
    i = np.argmax(np.abs(v) > 1e-12 * np.abs(v).max())
    return v if v[i] >= 0 else -v


def _passive_basis(P, tol=1e-9):
    """Orthogonal symplectic O with O^T P O = diag(d1, 1/d1, ...), d descending.

    ``P`` must be symmetric, positive definite and symplectic.
    """
    n = P.shape[0]
    K = n // 2
    Om = omega(K)
    vals, vecs = np.linalg.eigh(P)
    order = np.argsort(-vals, kind="stable")
    vals, vecs = vals[order], vecs[:, order]
    cols_q, cols_p, ds = [], [], []
    up = vals > 1.0 + tol
    for j in np.flatnonzero(up):
        v = _canonical_sign(vecs[:, j])
        cols_q.append(v)
        cols_p.append(-Om @ v)
        ds.append(vals[j])
    n_unit = K - len(ds)
    if n_unit:
        # symplectic Gram-Schmidt inside the unit eigenspace
        k = len(ds)
        unit = vecs[:, k:n - k]
        if np.abs(np.log(vals[k:n - k])).max() > 1e-6:
            raise ValidationError("spectrum of P is not symplectic")
        basis = [unit[:, j] for j in range(unit.shape[1])]
        while len(cols_q) < K:
            best = max(basis, key=np.linalg.norm)
            v = _canonical_sign(best / np.linalg.norm(best))
            w = -Om @ v
            cols_q.append(v)
            cols_p.append(w)
            ds.append(1.0)
            basis = [b - (b @ v) * v - (b @ w) * w for b in basis]
    O = np.empty((n, n))
    O[:, 0::2] = np.column_stack(cols_q)
    O[:, 1::2] = np.column_stack(cols_p)
    return O, np.array(ds)


def bloch_messiah(S, tol=1e-8):
    """Bloch-Messiah decomposition ``S = L @ Sq(r) @ R`` with passive L, R.

    Squeezing factors are returned ``>= 1`` and sorted descending; inverse
    squeezing is folded into the passive factors.
    """
    S = require_symplectic(S, tol)
    O, d = _passive_basis(S @ S.T)
    r = np.sqrt(d)
    D = squeeze_diag(r)
    right = np.linalg.solve(D, O.T @ S)
    return BlochMessiah(left=O, squeezings=r, right=right)


def williamson(V, tol=1e-10):
    """Williamson normal form of a symmetric positive-definite matrix.

    Returns ``sympl`` and symplectic eigenvalues ``nu`` (descending) with
    ``V = sympl @ diag(nu1, nu1, ...) @ sympl.T``.
    """
    V = _check_even_square(V)
    if np.linalg.norm(V - V.T) > tol * max(1.0, np.linalg.norm(V)):
        raise DomainError("matrix is not symmetric")
    V = 0.5 * (V + V.T)
    w, U = np.linalg.eigh(V)
    if w.min() <= 0:
        raise DomainError("matrix is not positive definite")
    K = V.shape[0] // 2
    Vh = (U * np.sqrt(w)) @ U.T
    Vmh = (U / np.sqrt(w)) @ U.T
    A = Vmh @ omega(K) @ Vmh
    A = 0.5 * (A - A.T)
    T, Q = schur(A, output="real")
    a = np.array([T[2 * i, 2 * i + 1] for i in range(K)])
    for i in range(K):
        if a[i] < 0:
            Q[:, [2 * i, 2 * i + 1]] = Q[:, [2 * i + 1, 2 * i]]
            a[i] = -a[i]
    nu = 1.0 / a
    order = np.argsort(-nu, kind="stable")
    nu = nu[order]
    idx = np.ravel([[2 * i, 2 * i + 1] for i in order])
    Q = Q[:, idx]
    sympl = Vh @ Q / np.sqrt(np.repeat(nu, 2))
    return WilliamsonResult(sympl=sympl, eigenvalues=nu)


def symplectic_eigenvalues(V):
    """Symplectic eigenvalues as positive eigenvalue magnitudes of ``i Omega V``."""
    V = _check_even_square(V)
    ev = np.linalg.eigvals(1j * omega(V.shape[0] // 2) @ V)
    ev = np.sort(ev.real[ev.real > 0])[::-1]
    return ev


def gaussian_compose(ch1, ch2):
    """Compose Gaussian channels ``(d, X, Y)``: apply ``ch1`` then ``ch2``."""
    d1, X1, Y1 = (np.asarray(a, dtype=float) for a in ch1)
    d2, X2, Y2 = (np.asarray(a, dtype=float) for a in ch2)
    if X1.shape != X2.shape or Y1.shape != X1.shape or d1.shape != d2.shape:
        raise DimensionError("channel dimensions do not match")
    return d2 + X2 @ d1, X2 @ X1, X2 @ Y1 @ X2.T + Y2


def random_symplectic(modes, rng, depth=None, scale=0.5):
    """Random symplectic matrix built from products of the standard constructors."""
    depth = depth or 3 * modes
    S = np.eye(2 * modes)
    for _ in range(depth):
        kind = rng.integers(4) if modes > 1 else rng.integers(2)
        if kind == 0:
            m = rng.integers(modes)
            op = rotation(rng.uniform(0, 2 * np.pi)) @ squeeze(np.exp(rng.normal(0, scale)))
            S = embed(op, [m], modes) @ S
        elif kind == 1:
            m = rng.integers(modes)
            S = embed(rotation(rng.uniform(0, 2 * np.pi)), [m], modes) @ S
        else:
            i, j = rng.choice(modes, 2, replace=False)
            if kind == 2:
                op = beamsplitter(rng.uniform(0, 2 * np.pi))
            else:
                op = tms(1.0 + rng.exponential(scale))
            S = embed(op, [i, j], modes) @ S
    return S


__all__ = [
    "BlochMessiah", "WilliamsonResult", "omega", "symplectic_inner", "is_symplectic",
    "require_symplectic", "symplectic_inverse", "tms", "squeeze", "squeeze_diag", "rotation", "beamsplitter",
    "sum_gate", "sqrep2", "sqrep3", "sqrep2_encoding", "sqrep3_encoding", "embed", "mode_permutation", "tms_code",
    "staircase_up", "staircase_down", "bloch_messiah", "williamson",
    "symplectic_eigenvalues", "gaussian_compose", "random_symplectic",
]
