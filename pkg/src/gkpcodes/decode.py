"""Syndrome decoding and output-noise evaluation.

Notation: ``u = Mhat^T Omega x_a`` is the unwrapped syndrome, ``s`` its
reduction into the cell ``[-sqrt(pi/2), sqrt(pi/2))^(2M)`` and
``k = (s - u) / sqrt(2 pi)`` the integer wrap.  Given ``u``, the data
displacement has mean ``C u`` and covariance ``V_d^-1``.  With
``nbar(s)`` the posterior mean of ``k``, the residual covariance is

    V_out = V_d^-1 + 2 pi C Q C^T,

where ``Q`` is the mean posterior covariance of ``k`` (MMSE) or the mean
of ``k k^T`` (linear estimation).
"""

import itertools
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss

from .channel import FiniteGkp, code_blocks, syndrome_map
from .errors import ConvergenceError, DomainError, TruncationError, ValidationError
from .lattice import ELL
from .symplectic import symplectic_inverse

HALF_CELL = np.sqrt(np.pi / 2)
ESTIMATORS = ("mmse", "linear")


@dataclass(frozen=True)
class TruncationPolicy:
    """Controls the range of the integer sums over lattice wraps."""

    rel_tail_bound: float = 1e-14
    max_range: int = 25

    def __post_init__(self):
        if not 0 < self.rel_tail_bound < 1:
            raise DomainError("rel_tail_bound must lie in (0, 1)")
        if self.max_range < 1:
            raise DomainError("max_range must be >= 1")


@dataclass(frozen=True)
class QuadConfig:
    """Tensor-product Gauss-Legendre settings.

    Two-dimensional cells use ``points`` nodes per panel and dyadic panel
    refinement up to ``max_level``.  Four-dimensional cells use a single
    panel and step through ``ladder_4d`` node counts.
    """

    points: int = 64
    rel_tol: float = 1e-6
    max_level: int = 4
    ladder_4d: tuple = (12, 16, 24)
    rel_tol_4d: float = 1e-4
    strict: bool = True
    chunk: int = 2_000_000


@dataclass
class DecodeReport:
    v_out: np.ndarray
    sigma_gm_sq: float
    sigma_rms_sq: float
    numerical_error: np.ndarray
    samples_or_nodes: int
    seed: int = None
    method: str = "quadrature"
    estimator: str = "mmse"
    converged: bool = True
    sigma_gm_se: float = 0.0
    extra: dict = field(default_factory=dict)

    @property
    def sigma_gm(self):
        return float(np.sqrt(self.sigma_gm_sq))

    def to_dict(self):
        return {
            "v_out": self.v_out.tolist(), "sigma_gm_sq": self.sigma_gm_sq,
            "sigma_rms_sq": self.sigma_rms_sq, "sigma_gm": self.sigma_gm,
            "numerical_error": np.asarray(self.numerical_error).tolist(),
            "samples_or_nodes": int(self.samples_or_nodes), "seed": self.seed,
            "method": self.method, "estimator": self.estimator,
            "converged": bool(self.converged), "sigma_gm_se": self.sigma_gm_se,
        }

    def to_json(self):
        return json.dumps(self.to_dict())


def metrics(v_out, tol=1e-12):
    """Return ``(sigma_gm_sq, sigma_rms_sq)`` for an output covariance."""
    V = np.asarray(v_out, dtype=float)
    V = 0.5 * (V + V.T)
    n2 = V.shape[0]
    w = np.linalg.eigvalsh(V)
    if w.min() < -tol:
        raise ValidationError(f"output covariance has negative eigenvalue {w.min():.3e}")
    gm = float(np.prod(np.clip(w, 0, None)) ** (1.0 / n2))
    rms = float(np.trace(V) / n2)
    return gm, rms


def wrap(u):
    """Reduce into the half-open cell ``[-sqrt(pi/2), sqrt(pi/2))``."""
    u = np.asarray(u, dtype=float)
    return u - ELL * np.floor(u / ELL + 0.5)


def syndrome(x_a, lattice):
    """Syndrome of ancilla displacement ``x_a`` for ``lattice``."""
    u = np.asarray(x_a, dtype=float) @ syndrome_map(lattice).T
    return wrap(u)


def integer_offsets(cov_u, trunc=TruncationPolicy()):
    """Integer wraps ``k`` whose Gaussian weight can exceed the tail bound."""
    d = cov_u.shape[0]
    lam_min = 1.0 / np.linalg.eigvalsh(cov_u).max()
    R = np.sqrt(2 * np.log(1 / trunc.rel_tail_bound) / lam_min)
    nmax = int(np.ceil((HALF_CELL + R) / ELL))
    if nmax > trunc.max_range:
        raise TruncationError(f"integer range {nmax} exceeds cap {trunc.max_range}")
    rng = np.arange(-nmax, nmax + 1)
    ks = np.array(list(itertools.product(rng, repeat=d)), dtype=float)
    gap = np.maximum(0.0, np.abs(ks) * ELL - HALF_CELL)
    ks = ks[np.sqrt((gap**2).sum(1)) <= R]
    # drop k whose term stays below the tail bound times the k = 0 term on the whole cell
    P = np.linalg.inv(cov_u)
    Pk = ks @ P
    excess = ELL**2 * np.einsum("ki,ki->k", Pk, ks) - 2 * ELL * HALF_CELL * np.abs(Pk).sum(1)
    return ks[excess <= 2 * np.log(1 / trunc.rel_tail_bound)]


# rows x offsets per posterior evaluation block (bounds peak memory)
EVAL_CHUNK = 4_000_000


class _Posterior:
    """Posterior over integer wraps given syndromes, for fixed ``cov_u``."""

    def __init__(self, cov_u, trunc):
        self.tail = trunc.rel_tail_bound
        self.d = cov_u.shape[0]
        self.ks = integer_offsets(cov_u, trunc)
        self.P = np.linalg.inv(cov_u)
        self.P = 0.5 * (self.P + self.P.T)
        sign, logdet = np.linalg.slogdet(cov_u)
        self.lnorm = -0.5 * (self.d * np.log(2 * np.pi) + logdet)
        self.B = (self.P @ self.ks.T) * ELL
        self.kk = 0.5 * ELL**2 * np.einsum("ki,ij,kj->k", self.ks, self.P, self.ks)
        self.K2 = np.einsum("ki,kj->kij", self.ks, self.ks).reshape(len(self.ks), -1)

    def evaluate(self, s, second=True, chunk=EVAL_CHUNK):
        """Return ``(log pdf, nbar, E[k k^T])`` at syndromes ``s`` (rows)."""
        step = max(1, chunk // len(self.ks))
        if len(s) <= step:
            return self._evaluate(s, second)
        parts = [self._evaluate(s[a:a + step], second) for a in range(0, len(s), step)]
        m2 = np.concatenate([p[2] for p in parts]) if second else None
        return (np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts]), m2)

    def _evaluate(self, s, second):
        sPs = 0.5 * np.einsum("pi,ij,pj->p", s, self.P, s)
        e = s @ self.B - self.kk
        m = e.max(axis=1, keepdims=True)
        e -= m
        # columns negligible for every row in this batch
        keep = e.max(axis=0) > np.log(self.tail)
        g = np.exp(e[:, keep])
        ks = self.ks[keep]
        Z = g.sum(axis=1)
        nbar = (g @ ks) / Z[:, None]
        logpdf = np.log(Z) + m[:, 0] - sPs + self.lnorm
        m2 = None
        if second:
            m2 = ((g @ self.K2[keep]) / Z[:, None]).reshape(-1, self.d, self.d)
        return logpdf, nbar, m2


def _as_rows(s, d):
    s = np.asarray(s, dtype=float)
    return s.reshape(-1, d), s.shape


def estimator_linear(blocks, s):
    """Linear estimate ``-V_d^-1 V_da s``."""
    rows, shape = _as_rows(s, blocks.m2)
    out = rows @ blocks.gain.T
    return out.reshape(shape[:-1] + (blocks.n2,))


def estimator_mmse(blocks, s, trunc=TruncationPolicy()):
    """Conditional-mean estimate of the data displacement."""
    rows, shape = _as_rows(s, blocks.m2)
    post = _Posterior(blocks.cov_u, trunc)
    _, nbar, _ = post.evaluate(rows, second=False)
    out = (rows - ELL * nbar) @ blocks.gain.T
    return out.reshape(shape[:-1] + (blocks.n2,))


def joint_syndrome_pdf(blocks, s, trunc=TruncationPolicy()):
    """Density of the wrapped syndrome at ``s``."""
    rows, shape = _as_rows(s, blocks.m2)
    post = _Posterior(blocks.cov_u, trunc)
    logpdf, _, _ = post.evaluate(rows, second=False)
    return np.exp(logpdf).reshape(shape[:-1])


def _check_kind(kind):
    if kind not in ESTIMATORS:
        raise DomainError(f"estimator must be one of {ESTIMATORS}, got {kind!r}")


def _inner_moment(m2, nbar, kind):
    if kind == "mmse":
        return m2 - nbar[:, :, None] * nbar[:, None, :]
    return m2


def _gl_nodes(points, panels):
    x, w = leggauss(points)
    h = ELL / panels
    lo = -HALF_CELL + h * np.arange(panels)
    nodes = (lo[:, None] + h * (x[None, :] + 1) / 2).ravel()
    weights = np.tile(w * h / 2, panels)
    return nodes, weights


def _cell_integral(post, nodes, weights, kind, chunk):
    """Integral over the cell of pdf times the inner moment, plus total mass."""
    d = post.d
    n = len(nodes)
    total = n**d
    step = max(1, chunk // max(1, len(post.ks)))
    Q = np.zeros((d, d))
    mass = 0.0
    for start in range(0, total, step):
        idx = np.arange(start, min(total, start + step))
        digits = np.stack(np.unravel_index(idx, (n,) * d), axis=1)
        S = nodes[digits]
        W = np.prod(weights[digits], axis=1)
        logpdf, nbar, m2 = post.evaluate(S)
        pw = W * np.exp(logpdf)
        Q += np.einsum("p,pij->ij", pw, _inner_moment(m2, nbar, kind))
        mass += pw.sum()
    return 0.5 * (Q + Q.T), mass


def _vout(blocks, Q):
    C = blocks.gain
    V = blocks.v_d_inv + 2 * np.pi * C @ Q @ C.T
    return 0.5 * (V + V.T)


def cell_moment_quadrature(blocks, kind="mmse", trunc=TruncationPolicy(), quad=QuadConfig()):
    """Adaptive quadrature of the wrap moment ``Q``.

    Returns ``(Q, residual, nodes, converged, mass)`` where ``residual`` is
    the entrywise change of ``V_out`` between the last two refinements.
    """
    _check_kind(kind)
    post = _Posterior(blocks.cov_u, trunc)
    d = post.d
    if d == 2:
        plan = [(quad.points, 2**lvl) for lvl in range(quad.max_level + 1)]
        tol = quad.rel_tol
    elif d == 4:
        plan = [(p, 1) for p in quad.ladder_4d]
        tol = quad.rel_tol_4d
    else:
        raise DomainError("quadrature supports one or two ancilla modes")
    prev = None
    resid = None
    for points, panels in plan:
        nodes, weights = _gl_nodes(points, panels)
        Q, mass = _cell_integral(post, nodes, weights, kind, quad.chunk)
        V = _vout(blocks, Q)
        if prev is not None:
            resid = np.abs(V - prev[1])
            if resid.max() <= tol * np.abs(V).max():
                return Q, resid, len(nodes) ** d, True, mass
        prev = (Q, V)
    if resid is None:
        # a single rung gives no error estimate
        resid = np.full_like(V, np.inf)
    if quad.strict:
        raise ConvergenceError(
            f"quadrature did not reach rel_tol {tol:g} (last change {resid.max() / np.abs(V).max():.3e})")
    return Q, resid, len(nodes) ** d, False, mass


def output_covariance_quadrature(code, noise, fin=None, estimator_kind="mmse",
                                 trunc=TruncationPolicy(), quad=QuadConfig()):
    """Deterministic output covariance for one or two ancilla modes."""
    blocks = code_blocks(code, noise, fin)
    Q, resid, nodes, ok, mass = cell_moment_quadrature(blocks, estimator_kind, trunc, quad)
    V = _vout(blocks, Q)
    gm, rms = metrics(V)
    return DecodeReport(v_out=V, sigma_gm_sq=gm, sigma_rms_sq=rms, numerical_error=resid,
                        samples_or_nodes=nodes, method="quadrature", estimator=estimator_kind,
                        converged=ok, extra={"mass": mass})


IS_SCALES = (1.0, 1.5, 2.0, 2.5, 3.0)


def _mc_stream_direct(seq, n, code, noise, fin, blocks, post, kind):
    """Physical simulation: sample the channel noise and decode."""
    rng = np.random.default_rng(seq)
    K = code.modes
    N2 = 2 * code.data_modes
    xi = rng.standard_normal((n, 2 * K)) * np.sqrt(np.repeat(noise.variances, 2))
    x = xi @ symplectic_inverse(code.encoding).T
    x_d, x_a = x[:, :N2], x[:, N2:]
    Tm = syndrome_map(code.lattice)
    u = x_a @ Tm.T
    if fin is not None and not fin.exact:
        u += (rng.standard_normal(x_a.shape) * np.sqrt(fin.sigma_gkp_sq)) @ Tm.T
        u += rng.standard_normal(u.shape) * np.sqrt(fin.measurement_sq)
    s = wrap(u)
    C = blocks.gain
    if kind == "mmse":
        _, nbar, _ = post.evaluate(s, second=False)
        f = (s - ELL * nbar) @ C.T
    else:
        f = s @ C.T
    r = x_d - f
    return (r[:, :, None] * r[:, None, :]).reshape(n, -1)


def _is_logweight(z, scale):
    d = z.shape[1]
    return d * np.log(scale) - 0.5 * (z**2).sum(1) * (1 - 1 / scale**2)


def _rb_inner(post, s, kind, batch=4096):
    out = np.empty((len(s), post.d, post.d))
    for a in range(0, len(s), batch):
        _, nbar, m2 = post.evaluate(s[a:a + batch])
        out[a:a + batch] = _inner_moment(m2, nbar, kind)
    return out


def _mc_stream_rb(seq, n, blocks, post, kind, scale):
    """Rao-Blackwellized estimate with syndromes drawn from a widened Gaussian."""
    rng = np.random.default_rng(seq)
    A = np.linalg.cholesky(blocks.cov_u)
    z = rng.standard_normal((n, post.d)) * scale
    inner = _rb_inner(post, wrap(z @ A.T), kind)
    inner *= np.exp(_is_logweight(z, scale))[:, None, None]
    C = blocks.gain
    X = blocks.v_d_inv[None] + 2 * np.pi * np.einsum("ia,pab,jb->pij", C, inner, C)
    return X.reshape(n, -1)


def _moments(flat):
    return flat.sum(0), flat.T @ flat, flat.shape[0]


def _run_streams(fn, sizes, seqs, threads):
    jobs = list(zip(seqs, sizes))
    if threads and threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(lambda j: _moments(fn(*j)), jobs))
    return [_moments(fn(*j)) for j in jobs]


def _choose_scale(blocks, post, kind, seed, n_pilot=16_384):
    """Pick the importance-sampling scale with the smallest estimated variance.

    One pilot is drawn at the widest scale; the second moment under every
    candidate scale is then estimated by reweighting that pilot.
    """
    rng = np.random.default_rng(np.random.SeedSequence([seed, 7919]))
    wide = max(IS_SCALES)
    A = np.linalg.cholesky(blocks.cov_u)
    z = rng.standard_normal((n_pilot, post.d)) * wide
    inner = _rb_inner(post, wrap(z @ A.T), kind)
    C = blocks.gain
    t = np.einsum("ia,pab,ia->p", C, inner, C)
    lw_wide = _is_logweight(z, wide)
    mu = np.mean(np.exp(lw_wide) * t)
    best, best_var = wide, np.inf
    for scale in IS_SCALES:
        # E_p[w_scale t^2] estimated with draws from the widest proposal
        m2 = np.mean(np.exp(lw_wide + _is_logweight(z, scale)) * t**2)
        var = m2 - mu**2
        if var < best_var * (1 - 1e-9):
            best, best_var = scale, var
    return best


def output_covariance_mc(code, noise, fin=None, estimator_kind="mmse", trunc=TruncationPolicy(),
                         n_samples=100_000, seed=0, method="rb", is_scale=None, threads=None,
                         stream_size=65_536):
    """Monte Carlo output covariance.

    ``method="direct"`` simulates the channel noise and applies the
    estimator to the resulting syndromes.  ``method="rb"`` samples the
    syndrome marginal and averages the analytic conditional residual
    covariance, drawing syndromes from a Gaussian widened by ``is_scale``
    in whitened coordinates with importance weights (chosen from a pilot
    when ``None``).  Samples are split into streams of ``stream_size``
    seeded by ``SeedSequence(seed).spawn``; results do not depend on
    ``threads``.
    """
    _check_kind(estimator_kind)
    if n_samples < 1:
        raise DomainError("n_samples must be >= 1")
    if method not in ("rb", "direct"):
        raise DomainError(f"unknown Monte Carlo method {method!r}")
    blocks = code_blocks(code, noise, fin)
    post = _Posterior(blocks.cov_u, trunc)
    sizes = [stream_size] * (n_samples // stream_size)
    if n_samples % stream_size:
        sizes.append(n_samples % stream_size)
    seqs = np.random.SeedSequence(seed).spawn(len(sizes))
    if method == "rb":
        scale = is_scale or _choose_scale(blocks, post, estimator_kind, seed)
        fn = lambda sq, n: _mc_stream_rb(sq, n, blocks, post, estimator_kind, scale)
    else:
        scale = 1.0
        fn = lambda sq, n: _mc_stream_direct(sq, n, code, noise, fin, blocks, post, estimator_kind)
    parts = _run_streams(fn, sizes, seqs, threads)
    s1 = sum(p[0] for p in parts)
    s2 = sum(p[1] for p in parts)
    n = sum(p[2] for p in parts)
    N2 = 2 * code.data_modes
    mean = s1 / n
    cov = (s2 / n - np.outer(mean, mean)) * n / max(n - 1, 1)
    V = 0.5 * (mean.reshape(N2, N2) + mean.reshape(N2, N2).T)
    se = np.sqrt(np.clip(np.diag(cov), 0, None) / n).reshape(N2, N2)
    gm, rms = metrics(V)
    # delta method: se of ln det V, then of sigma_gm = det^(1 / (2 N2))
    g = np.linalg.inv(V).T.ravel()
    se_logdet = float(np.sqrt(max(g @ cov @ g, 0.0) / n))
    sigma_gm = np.sqrt(gm)
    return DecodeReport(v_out=V, sigma_gm_sq=gm, sigma_rms_sq=rms, numerical_error=se,
                        samples_or_nodes=n, seed=seed, method=f"mc-{method}",
                        estimator=estimator_kind, sigma_gm_se=sigma_gm * se_logdet / (2 * N2),
                        extra={"is_scale": scale})


def output_covariance_mc_auto(code, noise, fin=None, estimator_kind="mmse", target_se=3e-4,
                              seed=0, n_min=65_536, n_max=2**24, threads=None,
                              trunc=TruncationPolicy()):
    """Monte Carlo with the sample budget scaled so that the standard error of
    ``sigma_gm`` is at most ``target_se``."""
    pilot = output_covariance_mc(code, noise, fin, estimator_kind, trunc, n_min, seed,
                                 threads=threads)
    pilot.extra["target_se"] = target_se
    if pilot.sigma_gm_se <= target_se:
        return pilot
    need = int(np.ceil(n_min * (pilot.sigma_gm_se / target_se) ** 2 * 1.2))
    rep = output_covariance_mc(code, noise, fin, estimator_kind, trunc, min(n_max, need), seed,
                               is_scale=pilot.extra["is_scale"], threads=threads)
    rep.extra["target_se"] = target_se
    return rep


__all__ = [
    "TruncationPolicy", "QuadConfig", "DecodeReport", "metrics", "wrap", "syndrome",
    "integer_offsets", "estimator_linear", "estimator_mmse", "joint_syndrome_pdf",
    "cell_moment_quadrature", "output_covariance_quadrature", "output_covariance_mc",
    "output_covariance_mc_auto", "FiniteGkp", "HALF_CELL", "ESTIMATORS",
]
