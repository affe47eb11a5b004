"""Divergence generators, their Legendre transforms and exact optimizers.

Every function here is vectorized over numpy arrays and uses IEEE ``inf`` for
values outside the effective domain, so expectations propagate ``+inf``
instead of producing NaN.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DomainError

__all__ = [
    "DivergenceFamily",
    "Renyi",
    "kl",
    "alpha",
    "hellinger",
    "chi_squared",
    "family_from_name",
    "exact_optimizer",
]

ALPHA_MAX = 4.0


def _check_alpha(a: float) -> float:
    a = float(a)
    if not (0.0 < a < 1.0 or 1.0 < a <= ALPHA_MAX):
        raise DomainError(f"alpha must lie in (0,1) or (1,{ALPHA_MAX:g}], got {a}")
    return a


@dataclass(frozen=True)
class DivergenceFamily:
    """Generator ``f`` of an f-divergence together with ``f*`` and derivatives.

    ``kind`` is one of ``"kl"``, ``"alpha"``, ``"hellinger"`` or ``"chi2"``.
    Hellinger is the alpha family at ``alpha = 1/2`` and shares its formulas.
    The chi-squared family uses ``f(x) = (x**2 - 1)/2`` on the whole line, so
    its divergence is half of the usual chi-squared divergence.
    """

    kind: str
    alpha: float | None = None

    def __post_init__(self):
        if self.kind not in ("kl", "alpha", "hellinger", "chi2"):
            raise DomainError(f"unknown divergence kind {self.kind!r}")
        if self.kind in ("alpha", "hellinger"):
            object.__setattr__(self, "alpha", _check_alpha(self.alpha))

    @property
    def name(self) -> str:
        if self.kind == "alpha":
            return f"alpha({self.alpha:g})"
        return self.kind

    @property
    def is_alpha(self) -> bool:
        return self.kind in ("alpha", "hellinger")

    @property
    def domain_fstar(self) -> tuple[float, float]:
        """Open interval (c, d) on which ``f*`` is finite and strictly convex.

        For ``alpha > 1`` the transform is also finite (constant) for y <= 0,
        but that half-line is excluded because ``(f*)''`` vanishes there.
        """
        if self.is_alpha:
            return (0.0, math.inf) if self.alpha > 1 else (-math.inf, 0.0)
        return (-math.inf, math.inf)

    # -- generator -----------------------------------------------------
    def f(self, x):
        x = np.asarray(x, dtype=float)
        out = np.full(x.shape, np.inf)
        with np.errstate(divide="ignore", invalid="ignore"):
            if self.kind == "kl":
                pos = x > 0
                out[pos] = x[pos] * np.log(x[pos])
                out[x == 0] = 0.0
            elif self.kind == "chi2":
                out = 0.5 * (x * x - 1.0)
            else:
                a = self.alpha
                ok = x >= 0
                out[ok] = (x[ok] ** a - 1.0) / (a * (a - 1.0))
        return out[()] if out.ndim == 0 else out

    def f_prime(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            if self.kind == "kl":
                out = np.where(x > 0, np.log(np.where(x > 0, x, 1.0)) + 1.0, -np.inf)
            elif self.kind == "chi2":
                out = x.copy()
            else:
                a = self.alpha
                out = np.where(x > 0, np.where(x > 0, x, 1.0) ** (a - 1.0) / (a - 1.0), np.nan)
                out = np.where(x == 0, 0.0 if a > 1 else -np.inf, out)
        return out[()] if out.ndim == 0 else out

    # -- Legendre transform ---------------------------------------------
    def f_star(self, y):
        y = np.asarray(y, dtype=float)
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            if self.kind == "kl":
                out = np.exp(y - 1.0)
            elif self.kind == "chi2":
                out = 0.5 * (y * y + 1.0)
            else:
                a = self.alpha
                if a > 1:
                    p = a / (a - 1.0)
                    yy = np.where(y > 0, y, 0.0)
                    out = yy**p * (a - 1.0) ** p / a + 1.0 / (a * (a - 1.0))
                else:
                    p = -a / (1.0 - a)
                    neg = y < 0
                    yy = np.where(neg, -y, 1.0)
                    val = yy**p * (1.0 - a) ** p / a - 1.0 / (a * (1.0 - a))
                    out = np.where(neg, val, np.inf)
        return out[()] if out.ndim == 0 else out

    def f_star_d1(self, y):
        y = np.asarray(y, dtype=float)
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            if self.kind == "kl":
                out = np.exp(y - 1.0)
            elif self.kind == "chi2":
                out = y.copy()
            else:
                out = self._alpha_power(y, 1.0 / (self.alpha - 1.0))
        return out[()] if out.ndim == 0 else out

    def f_star_d2(self, y):
        y = np.asarray(y, dtype=float)
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            if self.kind == "kl":
                out = np.exp(y - 1.0)
            elif self.kind == "chi2":
                out = np.ones_like(y)
            else:
                a = self.alpha
                out = self._alpha_power(y, (2.0 - a) / (a - 1.0))
        return out[()] if out.ndim == 0 else out

    def f_star_d3(self, y):
        y = np.asarray(y, dtype=float)
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            if self.kind == "kl":
                out = np.exp(y - 1.0)
            elif self.kind == "chi2":
                out = np.zeros_like(y)
            else:
                a = self.alpha
                e = (2.0 - a) / (a - 1.0)
                out = e * (a - 1.0) * self._alpha_power(y, e - 1.0)
        return out[()] if out.ndim == 0 else out

    def _alpha_power(self, y, e):
        # ((alpha-1) y)**e on the regular part of dom(f*)
        a = self.alpha
        t = (a - 1.0) * y
        inside = t > 0
        val = np.where(inside, t, 1.0) ** e
        if a > 1:
            return np.where(inside, val, 0.0)
        return np.where(inside, val, np.inf)

    # -- integrand for D_f = E_P[f(dQ/dP)] ------------------------------
    def perspective(self, log_q, log_p):
        """Return ``p * f(q/p)`` from log densities, without forming ``q/p``."""
        lq = np.asarray(log_q, dtype=float)
        lp = np.asarray(log_p, dtype=float)
        if self.kind == "kl":
            return np.exp(lq) * (lq - lp)
        if self.kind == "chi2":
            return 0.5 * (np.exp(2.0 * lq - lp) - np.exp(lp))
        a = self.alpha
        return (np.exp(a * lq + (1.0 - a) * lp) - np.exp(lp)) / (a * (a - 1.0))


@dataclass(frozen=True)
class Renyi:
    """Marker for the Renyi divergence of order ``alpha``.

    Uses the normalization ``R_a = log(int q^a p^(1-a)) / (a (a - 1))``.
    """

    alpha: float

    def __post_init__(self):
        object.__setattr__(self, "alpha", _check_alpha(self.alpha))

    @property
    def name(self) -> str:
        return f"renyi({self.alpha:g})"


def kl() -> DivergenceFamily:
    return DivergenceFamily("kl")


def alpha(a: float) -> DivergenceFamily:
    return DivergenceFamily("alpha", a)


def hellinger() -> DivergenceFamily:
    return DivergenceFamily("hellinger", 0.5)


def chi_squared() -> DivergenceFamily:
    return DivergenceFamily("chi2")


def family_from_name(name: str, a: float | None = None):
    """Build a family (or :class:`Renyi`) from a short name used in configs."""
    key = name.strip().lower()
    if key == "kl":
        return kl()
    if key == "hellinger":
        return hellinger()
    if key in ("chi2", "chisquared", "chi_squared"):
        return chi_squared()
    if key == "alpha":
        if a is None:
            raise DomainError("alpha family needs an alpha value")
        return alpha(a)
    if key == "renyi":
        if a is None:
            raise DomainError("renyi needs an alpha value")
        return Renyi(a)
    raise DomainError(f"unknown divergence family {name!r}")


def exact_optimizer(family, density_ratio: Callable, objective: str = "lt") -> Callable:
    """Return the exact optimizer of a variational objective as a function of x.

    ``objective`` selects the representation: ``"lt"``/``"dv"`` give
    ``f'(dQ/dP)``, ``"alpha_scale"`` gives the scale-invariant representative
    ``(dQ/dP)**(alpha-1)`` and ``"renyi"`` gives ``log(dQ/dP)``.
    """
    if isinstance(family, Renyi):
        objective = "renyi"
    needs_positive = objective in ("alpha_scale", "renyi") or (
        isinstance(family, DivergenceFamily)
        and (family.kind == "kl" or (family.is_alpha and family.alpha < 1))
    )

    def ratio(x):
        r = np.asarray(density_ratio(x), dtype=float)
        if needs_positive and np.any(r <= 0):
            raise DomainError("density ratio must be positive for this optimizer")
        return r

    if objective in ("lt", "dv"):
        return lambda x: family.f_prime(ratio(x))
    if objective == "alpha_scale":
        if not family.is_alpha:
            raise DomainError("alpha_scale optimizer needs an alpha family")
        a = family.alpha
        return lambda x: ratio(x) ** (a - 1.0)
    if objective == "renyi":
        return lambda x: np.log(ratio(x))
    raise DomainError(f"unknown objective {objective!r}")
