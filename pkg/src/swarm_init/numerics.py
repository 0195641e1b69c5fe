"""Dense symmetric linear algebra and the probability primitives used downstream.

Everything here works on small-to-moderate dense matrices (edge Laplacians of
a few hundred edges).  ``sym_eigen`` is the single spectral entry point; the
pseudoinverse, matrix exponential and Gaussian sampler are all built on it.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from .errors import InvalidMatrix, InvalidProbability, NotPSD, Overflow

SYM_TOL = 1e-12
_LOG_MAX = math.log(np.finfo(float).max)


class EigenDecomposition(NamedTuple):
    values: np.ndarray  # ascending
    vectors: np.ndarray  # columns are orthonormal eigenvectors

    def reconstruct(self) -> np.ndarray:
        q = self.vectors
        return (q * self.values) @ q.T


def as_symmetric(m, name: str = "matrix") -> np.ndarray:
    """Validate ``m`` as a finite square symmetric array and return it as float."""
    a = np.array(m, dtype=float, copy=True)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidMatrix(f"{name} must be square, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidMatrix(f"{name} has non-finite entries")
    tol = SYM_TOL * np.maximum(1.0, np.abs(a))
    if np.any(np.abs(a - a.T) > tol):
        raise InvalidMatrix(f"{name} is not symmetric")
    return 0.5 * (a + a.T)


def jacobi_eigen(m, tol: float = 1e-14, max_sweeps: int = 100) -> EigenDecomposition:
    """Cyclic Jacobi eigensolver.

    Slow (pure Python loop over pivots) but dependency-free and very accurate;
    kept as the reference path for ``sym_eigen(method="jacobi")``.
    """
    a = as_symmetric(m)
    n = a.shape[0]
    v = np.eye(n)
    scale = np.linalg.norm(a)
    if n < 2 or scale == 0.0:
        return _sorted(np.diag(a).copy(), v)
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.tril(a, -1) ** 2))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                ap = a[:, p].copy()
                aq = a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                ap = a[p, :].copy()
                aq = a[q, :].copy()
                a[p, :] = c * ap - s * aq
                a[q, :] = s * ap + c * aq
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    return _sorted(np.diag(a).copy(), v)


def _sorted(values: np.ndarray, vectors: np.ndarray) -> EigenDecomposition:
    order = np.argsort(values, kind="stable")
    return EigenDecomposition(values[order], vectors[:, order])


def sym_eigen(m, method: str = "lapack") -> EigenDecomposition:
    """Eigendecomposition of a real symmetric matrix, eigenvalues ascending.

    ``method="lapack"`` calls ``numpy.linalg.eigh``; ``method="jacobi"`` runs
    :func:`jacobi_eigen`.
    """
    a = as_symmetric(m)
    if method == "jacobi":
        return jacobi_eigen(a)
    if method != "lapack":
        raise ValueError(f"unknown eigen method {method!r}")
    w, q = np.linalg.eigh(a)
    return EigenDecomposition(w, q)


def pseudo_inverse(m, rank_tol: float = 1e-10, eig: EigenDecomposition | None = None) -> np.ndarray:
    """Moore-Penrose pseudoinverse of a symmetric PSD matrix.

    Eigenvalues below ``rank_tol * lambda_max`` are treated as zero; any
    eigenvalue below ``-rank_tol * lambda_max`` raises :class:`NotPSD`.
    """
    if eig is None:
        eig = sym_eigen(m)
    w, q = eig
    if w.size == 0:
        return np.zeros((0, 0))
    lmax = max(abs(w[-1]), abs(w[0]))
    if lmax == 0.0:
        return np.zeros_like(q)
    cut = rank_tol * lmax
    if w[0] < -cut:
        raise NotPSD(f"eigenvalue {w[0]:.3e} below -{cut:.3e}")
    inv = np.zeros_like(w)
    keep = w > cut
    inv[keep] = 1.0 / w[keep]
    out = (q * inv) @ q.T
    return 0.5 * (out + out.T)


def sym_expm(m, scale: float = 1.0, eig: EigenDecomposition | None = None) -> np.ndarray:
    """Return ``exp(scale * m)`` for symmetric ``m`` via its spectrum."""
    if eig is None:
        eig = sym_eigen(m)
    w, q = eig
    arg = scale * w
    if arg.size and np.max(arg) > _LOG_MAX:
        raise Overflow(f"exp argument {np.max(arg):.3e} overflows float64")
    out = (q * np.exp(arg)) @ q.T
    return 0.5 * (out + out.T)


# -- chi-square -----------------------------------------------------------------

def _gamma_series(a: float, x: float) -> float:
    # lower regularized gamma P(a, x), valid for x < a + 1
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(10_000):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * 1e-17:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_cfrac(a: float, x: float) -> float:
    # upper regularized gamma Q(a, x) by modified Lentz, valid for x >= a + 1
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 10_000):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return h * math.exp(-x + a * math.log(x) - math.lgamma(a))


def regularized_gamma(a: float, x: float) -> tuple[float, float]:
    """Return ``(P(a, x), Q(a, x))``, each computed on its stable side."""
    if a <= 0:
        raise ValueError("shape parameter must be positive")
    if x <= 0:
        return 0.0, 1.0
    if x < a + 1.0:
        p = _gamma_series(a, x)
        return p, 1.0 - p
    q = _gamma_cfrac(a, x)
    return 1.0 - q, q


def chi2_cdf(dof: int, q: float) -> float:
    return regularized_gamma(0.5 * dof, 0.5 * q)[0]


def chi2_sf(dof: int, q: float) -> float:
    return regularized_gamma(0.5 * dof, 0.5 * q)[1]


def _chi2_logpdf(dof: int, q: float) -> float:
    k = 0.5 * dof
    return (k - 1.0) * math.log(q) - 0.5 * q - k * math.log(2.0) - math.lgamma(k)


def chi2_quantile(dof: int, p: float) -> float:
    """Inverse CDF of the chi-square distribution.

    Brackets the root, then runs Newton steps on the regularized incomplete
    gamma, falling back to bisection whenever a step leaves the bracket.
    The upper tail is used for ``p > 0.5`` so that quantiles near 1 keep
    full relative accuracy.
    """
    if not (0.0 < p < 1.0):
        raise InvalidProbability(f"p must lie in (0, 1), got {p}")
    if int(dof) != dof or dof < 1:
        raise ValueError(f"dof must be a positive integer, got {dof}")
    dof = int(dof)
    upper = p > 0.5
    target = 1.0 - p if upper else p

    def resid(q: float) -> float:
        return (target - chi2_sf(dof, q)) if upper else (chi2_cdf(dof, q) - target)

    lo, hi = 0.0, max(1.0, float(dof))
    while resid(hi) < 0.0:
        lo, hi = hi, 2.0 * hi
    x = 0.5 * (lo + hi)
    for _ in range(200):
        r = resid(x)
        if r == 0.0:
            return x
        if r < 0.0:
            lo = x
        else:
            hi = x
        step = r / math.exp(_chi2_logpdf(dof, x))
        x_new = x - step
        if not (lo < x_new < hi):
            x_new = 0.5 * (lo + hi)
        if abs(x_new - x) <= 1e-15 * x or hi - lo <= 1e-15 * hi:
            x = x_new
            break
        x = x_new
    return x


# -- sampling -------------------------------------------------------------------

def make_rng(seed) -> np.random.Generator:
    """Counter-based (Philox) generator from an int or ``SeedSequence``."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.Philox(seed))


def mvn_factor(cov, psd_tol: float = 1e-10) -> np.ndarray:
    """Return ``F = Q sqrt(Lambda)`` so that ``F @ F.T == cov``."""
    w, q = sym_eigen(cov)
    if w.size == 0:
        return q
    scale = max(abs(w[0]), abs(w[-1]))
    if w[0] < -psd_tol * max(scale, 1e-300):
        raise NotPSD(f"covariance has eigenvalue {w[0]:.3e}")
    return q * np.sqrt(np.clip(w, 0.0, None))


def mvn_sample(mean, cov, rng_state, size: int | None = None) -> np.ndarray:
    """Draw Gaussian samples ``mean + Q sqrt(Lambda) z``.

    Returns a vector when ``size`` is None, otherwise an array of shape
    ``(size, dim)``.  Deterministic for a given seed.
    """
    mean = np.asarray(mean, dtype=float)
    f = mvn_factor(cov)
    rng = make_rng(rng_state)
    if size is None:
        return mean + f @ rng.standard_normal(mean.size)
    z = rng.standard_normal((size, mean.size))
    return mean + z @ f.T
