"""Gaussian measures and the ground-truth divergence oracle."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, DomainError, FactorizationError
from .families import DivergenceFamily, Renyi
from .quadrature import integrate_line

__all__ = [
    "GaussianSpec",
    "log_density_ratio",
    "kl_closed_form",
    "log_chernoff",
    "oracle_divergence",
    "oracle_divergence_mc",
]


class GaussianSpec:
    """Multivariate normal ``N(mean, cov)``.

    ``cov`` may be a scalar (``sigma^2 * I``), a vector of diagonal variances or
    a full matrix. Positive definiteness is checked by factorization.
    """

    def __init__(self, mean, cov):
        self.mean = np.atleast_1d(np.asarray(mean, dtype=float)).copy()
        d = self.mean.size
        c = np.asarray(cov, dtype=float)
        if c.ndim == 0:
            c = np.full(d, float(c))
        if c.ndim == 1:
            if c.size == 1 and d > 1:
                c = np.full(d, c[0])
            if c.size != d:
                raise DomainError("covariance diagonal does not match mean dimension")
            self._diag = c.copy()
            cov_m = np.diag(c)
        else:
            if c.shape != (d, d):
                raise DomainError("covariance shape does not match mean dimension")
            if not np.allclose(c, c.T, rtol=0, atol=1e-12 * max(1.0, np.abs(c).max())):
                raise FactorizationError("covariance is not symmetric")
            cov_m = 0.5 * (c + c.T)
            off = cov_m - np.diag(np.diag(cov_m))
            self._diag = np.diag(cov_m).copy() if not off.any() else None
        try:
            self.chol = np.linalg.cholesky(cov_m)
        except np.linalg.LinAlgError as exc:
            raise FactorizationError("covariance is not positive definite") from exc
        if not np.all(np.diag(self.chol) > 0):
            raise FactorizationError("covariance is not positive definite")
        self.cov = cov_m
        self.mean.setflags(write=False)
        self.cov.setflags(write=False)

    def __repr__(self):
        if self._diag is not None:
            return f"GaussianSpec(mean={self.mean.tolist()}, var={self._diag.tolist()})"
        return f"GaussianSpec(mean={self.mean.tolist()}, cov=<{self.dim}x{self.dim}>)"

    @property
    def dim(self) -> int:
        return self.mean.size

    @property
    def is_diagonal(self) -> bool:
        return self._diag is not None

    @property
    def variances(self) -> np.ndarray:
        return np.diag(self.cov).copy()

    def marginal(self, i: int) -> "GaussianSpec":
        return GaussianSpec(self.mean[i], self.cov[i, i])

    def log_det(self) -> float:
        return 2.0 * float(np.sum(np.log(np.diag(self.chol))))

    def logpdf(self, x):
        """Log density at points ``x`` of shape (n, d), (d,) or, for d = 1, (n,)."""
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0 or (x.ndim == 1 and self.dim > 1)
        pts = x.reshape(-1, self.dim)
        z = np.linalg.solve(self.chol, (pts - self.mean).T)
        out = -0.5 * np.sum(z * z, axis=0) - 0.5 * self.log_det() - 0.5 * self.dim * math.log(2 * math.pi)
        if scalar:
            return float(out[0])
        return out

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Draw ``n`` samples as an (n, d) array: mean + L z with z standard normal."""
        z = rng.standard_normal((int(n), self.dim))
        return self.mean + z @ self.chol.T


def log_density_ratio(Q: GaussianSpec, P: GaussianSpec):
    """Return ``x -> log dQ/dP(x)``."""
    if Q.dim != P.dim:
        raise DomainError("dimension mismatch")
    return lambda x: Q.logpdf(x) - P.logpdf(x)


def kl_closed_form(Q: GaussianSpec, P: GaussianSpec) -> float:
    d = Q.dim
    pinv = np.linalg.inv(P.cov)
    delta = P.mean - Q.mean
    return 0.5 * float(np.trace(pinv @ Q.cov) + delta @ pinv @ delta - d + P.log_det() - Q.log_det())


def log_chernoff(a: float, Q: GaussianSpec, P: GaussianSpec) -> float:
    """``log int q^a p^(1-a)`` in closed form; ``inf`` if the integral diverges."""
    qi = np.linalg.inv(Q.cov)
    pi = np.linalg.inv(P.cov)
    lam = a * qi + (1.0 - a) * pi
    lam = 0.5 * (lam + lam.T)
    try:
        lc = np.linalg.cholesky(lam)
    except np.linalg.LinAlgError:
        return math.inf
    b = a * qi @ Q.mean + (1.0 - a) * pi @ P.mean
    y = np.linalg.solve(lc, b)
    c = a * Q.mean @ qi @ Q.mean + (1.0 - a) * P.mean @ pi @ P.mean - y @ y
    log_det_lam = 2.0 * float(np.sum(np.log(np.diag(lc))))
    return float(-0.5 * log_det_lam - 0.5 * a * Q.log_det() - 0.5 * (1.0 - a) * P.log_det() - 0.5 * c)


def _closed_form(family, Q, P) -> float:
    if isinstance(family, Renyi):
        a = family.alpha
        return log_chernoff(a, Q, P) / (a * (a - 1.0))
    if family.kind == "kl":
        return kl_closed_form(Q, P)
    a = 2.0 if family.kind == "chi2" else family.alpha
    lc = log_chernoff(a, Q, P)
    if family.kind == "chi2":
        return 0.5 * math.expm1(lc)
    return math.expm1(lc) / (a * (a - 1.0))


def _line_integral(integrand, q: GaussianSpec, p: GaussianSpec, tol: float) -> float:
    center = 0.5 * (q.mean[0] + p.mean[0])
    scale = math.sqrt(max(q.cov[0, 0], p.cov[0, 0])) + 0.5 * abs(q.mean[0] - p.mean[0])
    return integrate_line(integrand, center, scale, tol)


def _quadrature(family, Q, P, tol) -> float:
    """Per-coordinate quadrature; valid for 1-D or diagonal covariances."""
    pairs = [(Q.marginal(i), P.marginal(i)) for i in range(Q.dim)]

    def lq_lp(q, p):
        return lambda x: (q.logpdf(x), p.logpdf(x))

    if not isinstance(family, Renyi) and family.kind == "kl":
        total = 0.0
        for q, p in pairs:
            dens = lq_lp(q, p)
            total += _line_integral(lambda x: float(family.perspective(*dens(x))), q, p, tol / Q.dim)
        return total
    a = family.alpha if isinstance(family, Renyi) or family.is_alpha else 2.0
    log_c = 0.0
    for q, p in pairs:
        dens = lq_lp(q, p)

        def chern(x, dens=dens):
            lq, lp = dens(x)
            return math.exp(a * lq + (1.0 - a) * lp)

        c = _line_integral(chern, q, p, tol / Q.dim)
        if not c > 0:
            raise ConvergenceError("Chernoff coefficient quadrature returned a non-positive value")
        log_c += math.log(c)
    if isinstance(family, Renyi):
        return log_c / (a * (a - 1.0))
    if family.kind == "chi2":
        return 0.5 * math.expm1(log_c)
    return math.expm1(log_c) / (a * (a - 1.0))


def oracle_divergence(family, Q: GaussianSpec, P: GaussianSpec, method: str = "auto", tol: float = 1e-9) -> float:
    """Ground-truth ``D_f(Q||P)`` (or Renyi ``R_alpha``) between Gaussians.

    ``method="auto"`` integrates ``E_P[f(dQ/dP)]`` adaptively when the
    covariances are diagonal (coordinate-wise reduction: KL adds, Chernoff
    coefficients multiply) and falls back to the Gaussian closed form for full
    covariances. ``method`` may also be ``"quadrature"`` or ``"closed"``; use
    :func:`oracle_divergence_mc` for a Monte Carlo estimate.
    """
    if Q.dim != P.dim:
        raise DomainError("Q and P dimensions differ")
    if not isinstance(family, (DivergenceFamily, Renyi)):
        raise DomainError("family must be a DivergenceFamily or Renyi")
    if method == "closed":
        return _closed_form(family, Q, P)
    if method not in ("auto", "quadrature"):
        raise DomainError(f"unknown oracle method {method!r}")
    if Q.is_diagonal and P.is_diagonal:
        # chi2 of Gaussians diverges when 2/var_q - 1/var_p <= 0 in some coordinate
        if not isinstance(family, Renyi) and family.kind == "chi2" or (
            not isinstance(family, Renyi) and family.is_alpha and family.alpha > 1
        ) or (isinstance(family, Renyi) and family.alpha > 1):
            a = 2.0 if not isinstance(family, Renyi) and family.kind == "chi2" else family.alpha
            if np.any(a / Q.variances + (1 - a) / P.variances <= 0):
                return math.inf
        return _quadrature(family, Q, P, tol)
    if method == "quadrature":
        raise DomainError("quadrature oracle needs diagonal covariances")
    return _closed_form(family, Q, P)


def oracle_divergence_mc(family, Q, P, n: int = 10**6, rng=None, tol: float | None = None):
    """Monte Carlo estimate of ``D_f(Q||P)`` from ``n`` samples of P.

    Returns ``(value, standard_error)``. Raises :class:`ConvergenceError` when
    the standard error exceeds ``tol``.
    """
    if n < 10**6:
        raise DomainError("Monte Carlo oracle uses at least 1e6 samples")
    rng = np.random.default_rng() if rng is None else rng
    x = P.sample(n, rng)
    lr = Q.logpdf(x) - P.logpdf(x)
    if isinstance(family, Renyi):
        a = family.alpha
        vals = np.exp(a * lr)
        m = vals.mean()
        se_m = vals.std(ddof=1) / math.sqrt(n)
        value = math.log(m) / (a * (a - 1.0))
        se = se_m / (m * abs(a * (a - 1.0)))
    else:
        vals = family.perspective(lr, np.zeros_like(lr))
        value = float(vals.mean())
        se = float(vals.std(ddof=1) / math.sqrt(n))
    if tol is not None and se > tol:
        raise ConvergenceError(f"Monte Carlo standard error {se:.2e} exceeds tolerance {tol:.1e}")
    return value, se
