"""Parameterized test functions with hand-written reverse-mode gradients.

Every model exposes the same small protocol:

``n_params``
    length of the flat parameter vector;
``init(rng)``
    initial parameter vector;
``forward_batch(params, X) -> (out, cache)``
    outputs for each row of ``X``;
``backward(params, cache, upstream) -> grad``
    gradient of ``sum_i upstream_i * out_i`` with respect to the parameters.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DomainError, FormatError
from .families import DivergenceFamily

__all__ = [
    "MlpSpec",
    "Mlp",
    "ExpWrapper",
    "GaussianStatistics",
    "Submanifold",
    "save_params",
    "load_params",
]


@dataclass(frozen=True)
class MlpSpec:
    """Fully connected ReLU network with a scalar output."""

    input_dim: int
    hidden: tuple = (64,)
    output_dim: int = 1

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if self.input_dim < 1 or any(h < 1 for h in self.hidden):
            raise DomainError("layer widths must be at least 1")
        if self.output_dim != 1:
            raise DomainError("only scalar-output networks are supported")

    @property
    def widths(self) -> tuple:
        return (self.input_dim, *self.hidden, self.output_dim)

    def layout(self) -> list[tuple[str, slice, tuple]]:
        """``(name, slice, shape)`` for every weight matrix and bias vector."""
        out, pos = [], 0
        w = self.widths
        for k in range(len(w) - 1):
            fan_in, fan_out = w[k], w[k + 1]
            out.append((f"W{k}", slice(pos, pos + fan_in * fan_out), (fan_out, fan_in)))
            pos += fan_in * fan_out
            out.append((f"b{k}", slice(pos, pos + fan_out), (fan_out,)))
            pos += fan_out
        return out

    @property
    def n_params(self) -> int:
        w = self.widths
        return sum((w[k] + 1) * w[k + 1] for k in range(len(w) - 1))


class Mlp:
    """ReLU network ``g_theta``; the subgradient of ReLU at 0 is taken as 0."""

    output_kind = "real"

    def __init__(self, spec: MlpSpec):
        self.spec = spec
        self._layout = spec.layout()
        self.n_params = spec.n_params

    def unpack(self, params):
        params = np.asarray(params, dtype=float)
        if params.shape != (self.n_params,):
            raise DomainError(f"expected {self.n_params} parameters, got shape {params.shape}")
        layers = []
        for k in range(0, len(self._layout), 2):
            (_, sw, shw), (_, sb, _) = self._layout[k], self._layout[k + 1]
            layers.append((params[sw].reshape(shw), params[sb]))
        return layers

    def init(self, rng: np.random.Generator) -> np.ndarray:
        """He-uniform weights, zero biases."""
        theta = np.zeros(self.n_params)
        for name, sl, shape in self._layout:
            if name.startswith("W"):
                bound = math.sqrt(6.0 / shape[1])
                theta[sl] = rng.uniform(-bound, bound, size=shape[0] * shape[1])
        return theta

    def forward_batch(self, params, X):
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None] if self.spec.input_dim == 1 else X[None, :]
        if X.shape[1] != self.spec.input_dim:
            raise DomainError(f"input dimension {X.shape[1]} != {self.spec.input_dim}")
        layers = self.unpack(params)
        acts, pre = [X], []
        a = X
        for k, (W, b) in enumerate(layers):
            z = a @ W.T + b
            pre.append(z)
            a = np.maximum(z, 0.0) if k < len(layers) - 1 else z
            acts.append(a)
        return a[:, 0], (acts, pre)

    def forward(self, params, x) -> float:
        return float(self.forward_batch(params, np.atleast_2d(np.asarray(x, dtype=float)))[0][0])

    def backward(self, params, cache, upstream):
        acts, pre = cache
        layers = self.unpack(params)
        grad = np.zeros(self.n_params)
        delta = np.asarray(upstream, dtype=float).reshape(-1, 1)
        for k in range(len(layers) - 1, -1, -1):
            W, _ = layers[k]
            _, sw, _ = self._layout[2 * k]
            _, sb, _ = self._layout[2 * k + 1]
            grad[sw] = (delta.T @ acts[k]).ravel()
            grad[sb] = delta.sum(axis=0)
            if k > 0:
                delta = (delta @ W) * (pre[k - 1] > 0)
        return grad


class ExpWrapper:
    """``sign * exp(g)``: positive (``sign=+1``) or negative test functions."""

    def __init__(self, inner, sign: float = 1.0):
        self.inner = inner
        self.sign = 1.0 if sign > 0 else -1.0
        self.n_params = inner.n_params
        self.output_kind = "positive" if self.sign > 0 else "negative"

    def init(self, rng):
        return self.inner.init(rng)

    def forward_batch(self, params, X):
        g, cache = self.inner.forward_batch(params, X)
        out = self.sign * np.exp(g)
        return out, (cache, out)

    def forward(self, params, x) -> float:
        return float(self.forward_batch(params, np.atleast_2d(np.asarray(x, dtype=float)))[0][0])

    def backward(self, params, cache, upstream):
        inner_cache, out = cache
        return self.inner.backward(params, inner_cache, np.asarray(upstream) * out)


class GaussianStatistics:
    """Natural statistics of a Gaussian on R^d: ``x_i`` and ``x_i x_j`` for i <= j."""

    def __init__(self, d: int):
        self.d = int(d)
        self._iu = np.triu_indices(self.d)
        self.n = self.d + self._iu[0].size

    def __call__(self, X):
        X = np.asarray(X, dtype=float).reshape(-1, self.d)
        return np.hstack([X, X[:, self._iu[0]] * X[:, self._iu[1]]])


class Submanifold:
    """Finite-dimensional test-function family spanned by sufficient statistics.

    Modes:

    ``"generic"``
        ``f'(exp(kappa . T + beta))`` with parameters ``(kappa, beta)``;
    ``"kl-linear"``
        ``kappa . T`` (KL objectives that are shift invariant);
    ``"alpha-scale"``
        ``exp((alpha - 1) kappa . T)`` (scale-invariant alpha objectives).
    """

    def __init__(self, stats, family: DivergenceFamily, mode: str = "generic"):
        if mode not in ("generic", "kl-linear", "alpha-scale"):
            raise DomainError(f"unknown submanifold mode {mode!r}")
        if mode == "alpha-scale" and not family.is_alpha:
            raise DomainError("alpha-scale mode needs an alpha family")
        self.stats = stats
        self.family = family
        self.mode = mode
        self.n_params = stats.n + (1 if mode == "generic" else 0)
        if mode == "alpha-scale":
            self.output_kind = "positive"
        elif mode == "generic" and family.is_alpha:
            self.output_kind = "negative" if family.alpha < 1 else "positive"
        else:
            self.output_kind = "real"

    def init(self, rng=None):
        return np.zeros(self.n_params)

    def _link(self, s):
        """Outer map of the generic mode as a function of the exponent s."""
        fam = self.family
        with np.errstate(over="ignore"):
            if fam.kind == "kl":
                return s + 1.0, np.ones_like(s)
            if fam.kind == "chi2":
                e = np.exp(s)
                return e, e
            a = fam.alpha
            e = np.exp((a - 1.0) * s)
            return e / (a - 1.0), e

    def forward_batch(self, params, X):
        params = np.asarray(params, dtype=float)
        if params.shape != (self.n_params,):
            raise DomainError(f"expected {self.n_params} parameters")
        T = self.stats(X)
        s = T @ params[: self.stats.n]
        if self.mode == "kl-linear":
            return s, (T, None)
        if self.mode == "alpha-scale":
            a = self.family.alpha
            with np.errstate(over="ignore"):
                out = np.exp((a - 1.0) * s)
            if not np.all(np.isfinite(out)):
                raise DomainError("submanifold output overflowed")
            return out, (T, (a - 1.0) * out)
        s = s + params[-1]
        out, ds = self._link(s)
        if not (np.all(np.isfinite(out)) and np.all(np.isfinite(ds))):
            raise DomainError("f' evaluated outside its domain")
        return out, (T, ds)

    def forward(self, params, x) -> float:
        return float(self.forward_batch(params, np.atleast_2d(np.asarray(x, dtype=float)))[0][0])

    def backward(self, params, cache, upstream):
        T, ds = cache
        up = np.asarray(upstream, dtype=float)
        if ds is not None:
            up = up * ds
        g = T.T @ up
        if self.mode == "generic":
            g = np.append(g, up.sum())
        return g


# -- checkpoint files ------------------------------------------------------------
_MAGIC = b"DGPM"
_VERSION = 1
_HEADER = struct.Struct("<4sIQ")


def save_params(path, params) -> None:
    """Write a parameter vector: 16-byte header then little-endian float64 values."""
    theta = np.ascontiguousarray(np.asarray(params, dtype="<f8").ravel())
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, _VERSION, theta.size))
        fh.write(theta.tobytes())


def load_params(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise FormatError("checkpoint shorter than its header")
    magic, version, count = _HEADER.unpack_from(data)
    if magic != _MAGIC:
        raise FormatError(f"bad checkpoint magic {magic!r}")
    if version != _VERSION:
        raise FormatError(f"unsupported checkpoint version {version}")
    if len(data) != _HEADER.size + 8 * count:
        raise FormatError("checkpoint length does not match its parameter count")
    return np.frombuffer(data, dtype="<f8", offset=_HEADER.size).astype(float)
