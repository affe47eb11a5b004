"""Sample generators, data sources for training and IDX image loading."""

from __future__ import annotations

import gzip
import math
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DomainError, FormatError
from .gaussian import GaussianSpec

__all__ = [
    "STREAM_NAMES",
    "make_streams",
    "sample_gaussian",
    "EmbeddingSpec",
    "MiPairSampler",
    "sample_mi_pairs",
    "ImageBatch",
    "mnist_load",
    "random_translate",
    "GaussianSource",
    "MiSource",
    "DatasetSource",
    "TemplateImages",
    "ClassMixture",
]

STREAM_NAMES = ("q", "p", "init", "eval")


def make_streams(seed: int, names=STREAM_NAMES) -> dict:
    """Disjoint counter-based generators (Philox) split from one 64-bit seed."""
    children = np.random.SeedSequence(int(seed) & (2**64 - 1)).spawn(len(names))
    return {name: np.random.Generator(np.random.Philox(ss)) for name, ss in zip(names, children)}


def sample_gaussian(spec: GaussianSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` draws of ``spec`` as an (n, d) array (Cholesky factor times normals)."""
    if n < 1:
        raise DomainError("n must be at least 1")
    return spec.sample(n, rng)


# -- mutual information pairs ---------------------------------------------------
@dataclass(frozen=True)
class EmbeddingSpec:
    """Nonlinear lift of R^20 into R^target_dim.

    ``h_i(x) = x_i`` for the first 20 coordinates; the remaining ones are
    ``A_i(x) + cos(x_j1) sin(x_j2) + x_j3 x_j4`` with a random affine map ``A``
    (coefficients uniform on (-1, 1) / sqrt(20)) and random indices, both fixed
    by ``seed``.
    """

    target_dim: int
    seed: int = 0
    base_dim: int = 20
    A: np.ndarray = field(init=False, repr=False, compare=False)
    b: np.ndarray = field(init=False, repr=False, compare=False)
    idx: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.target_dim <= self.base_dim:
            raise DomainError("embedding target dimension must exceed the base dimension")
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(int(self.seed))))
        extra = self.target_dim - self.base_dim
        scale = 1.0 / math.sqrt(self.base_dim)
        object.__setattr__(self, "A", rng.uniform(-1.0, 1.0, (extra, self.base_dim)) * scale)
        object.__setattr__(self, "b", rng.uniform(-1.0, 1.0, extra) * scale)
        object.__setattr__(self, "idx", rng.integers(0, self.base_dim, (4, extra)))

    def __call__(self, X):
        X = np.asarray(X, dtype=float)
        j1, j2, j3, j4 = self.idx
        lifted = X @ self.A.T + self.b + np.cos(X[:, j1]) * np.sin(X[:, j2]) + X[:, j3] * X[:, j4]
        return np.hstack([X, lifted])


@dataclass(frozen=True)
class MiPairSampler:
    """Pairs (x, y) in R^d x R^d with ``corr(x_i, y_i) = rho`` and independent components."""

    d: int
    rho: float
    embed: EmbeddingSpec | None = None

    def __post_init__(self):
        if not -1.0 < self.rho < 1.0:
            raise DomainError("rho must lie in (-1, 1)")
        if self.d < 1:
            raise DomainError("d must be at least 1")
        if self.embed is not None and self.embed.base_dim != self.d:
            raise DomainError("embedding base dimension must equal d")

    @property
    def out_dim(self) -> int:
        per = self.d if self.embed is None else self.embed.target_dim
        return 2 * per

    def joint_spec(self) -> GaussianSpec:
        eye = np.eye(self.d)
        cov = np.block([[eye, self.rho * eye], [self.rho * eye, eye]])
        return GaussianSpec(np.zeros(2 * self.d), cov)

    def product_spec(self) -> GaussianSpec:
        return GaussianSpec(np.zeros(2 * self.d), 1.0)

    def _raw_joint(self, n, rng):
        x = rng.standard_normal((n, self.d))
        z = rng.standard_normal((n, self.d))
        return x, self.rho * x + math.sqrt(1.0 - self.rho**2) * z

    def _finish(self, x, y):
        if self.embed is not None:
            x, y = self.embed(x), self.embed(y)
        return np.hstack([x, y])

    def joint(self, n, rng):
        return self._finish(*self._raw_joint(n, rng))

    def product(self, n, rng):
        """Independent joint draw with the y rows shuffled by a uniform permutation."""
        x, y = self._raw_joint(n, rng)
        return self._finish(x, y[rng.permutation(n)])


def sample_mi_pairs(sampler: MiPairSampler, n: int, streams) -> tuple[np.ndarray, np.ndarray]:
    """``(joint batch, product batch)`` from two independent streams."""
    if n < 2:
        raise DomainError("n must be at least 2")
    rng_joint, rng_product = streams
    return sampler.joint(n, rng_joint), sampler.product(n, rng_product)


# -- images ---------------------------------------------------------------------
@dataclass
class ImageBatch:
    """Images as an (n, rows, cols) float array in [0, 1], row-major."""

    images: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self):
        self.images = np.asarray(self.images, dtype=float)
        if self.images.ndim != 3:
            raise DomainError("images must have shape (n, rows, cols)")
        if self.images.size and (self.images.min() < 0 or self.images.max() > 1):
            raise DomainError("pixel values must lie in [0, 1]")

    def __len__(self):
        return self.images.shape[0]

    def flat(self) -> np.ndarray:
        return self.images.reshape(len(self), -1)


def _read(path):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    data = path.read_bytes()
    if path.suffix == ".gz":
        data = gzip.decompress(data)
    return data


def mnist_load(images_path, labels_path=None) -> ImageBatch:
    """Load IDX image (magic 0x803) and optional label (magic 0x801) files.

    Pixels are divided by 255. Raises :class:`FormatError` on bad magic
    numbers, image sizes other than 28 x 28, or truncated payloads.
    """
    raw = _read(images_path)
    if len(raw) < 16:
        raise FormatError("image file shorter than its header")
    magic, n, rows, cols = struct.unpack(">IIII", raw[:16])
    if magic != 0x803:
        raise FormatError(f"bad image magic 0x{magic:08x}")
    if rows != 28 or cols != 28:
        raise FormatError(f"expected 28x28 images, got {rows}x{cols}")
    if len(raw) != 16 + n * rows * cols:
        raise FormatError("image payload length does not match header")
    images = np.frombuffer(raw, dtype=np.uint8, offset=16).reshape(n, rows, cols) / 255.0
    labels = None
    if labels_path is not None:
        lab = _read(labels_path)
        if len(lab) < 8:
            raise FormatError("label file shorter than its header")
        magic, m = struct.unpack(">II", lab[:8])
        if magic != 0x801:
            raise FormatError(f"bad label magic 0x{magic:08x}")
        if m != n or len(lab) != 8 + m:
            raise FormatError("label count does not match images")
        labels = np.frombuffer(lab, dtype=np.uint8, offset=8).copy()
    return ImageBatch(images, labels)


def mnist_from_env() -> ImageBatch | None:
    """Training images from ``$DIVGAUGE_DATA_DIR`` if present, else None."""
    root = os.environ.get("DIVGAUGE_DATA_DIR")
    if not root:
        return None
    for name in ("train-images-idx3-ubyte", "train-images.idx3-ubyte", "train-images-idx3-ubyte.gz"):
        img = Path(root) / name
        if img.exists():
            lab = None
            for ln in ("train-labels-idx1-ubyte", "train-labels.idx1-ubyte", "train-labels-idx1-ubyte.gz"):
                if (Path(root) / ln).exists():
                    lab = Path(root) / ln
            return mnist_load(img, lab)
    return None


def translate(images, shifts) -> np.ndarray:
    """Periodically roll each image by its integer ``(dy, dx)`` shift."""
    images = np.asarray(images)
    shifts = np.asarray(shifts, dtype=int).reshape(-1, 2)
    n, rows, cols = images.shape
    r = (np.arange(rows)[None, :] - shifts[:, :1]) % rows
    c = (np.arange(cols)[None, :] - shifts[:, 1:]) % cols
    return images[np.arange(n)[:, None, None], r[:, :, None], c[:, None, :]]


def random_translate(batch, sigma: float, rng: np.random.Generator):
    """Shift each image by rounded N(0, sigma^2) offsets with periodic wrap.

    Accepts an :class:`ImageBatch` (returns one) or a raw (n, rows, cols) array.
    """
    images = batch.images if isinstance(batch, ImageBatch) else np.asarray(batch)
    shifts = np.rint(rng.normal(0.0, sigma, size=(images.shape[0], 2))).astype(int)
    out = translate(images, shifts)
    if isinstance(batch, ImageBatch):
        return ImageBatch(out, batch.labels)
    return out


# -- training sources -------------------------------------------------------------
class GaussianSource:
    """Fresh draws from Q and P on every call."""

    def __init__(self, Q: GaussianSpec, P: GaussianSpec):
        self.Q, self.P = Q, P
        self.dim = Q.dim

    def sample_q(self, n, rng):
        return self.Q.sample(n, rng)

    def sample_p(self, n, rng):
        return self.P.sample(n, rng)


class MiSource:
    """Q is the joint law of (x, y), P the product of its marginals."""

    def __init__(self, sampler: MiPairSampler):
        self.sampler = sampler
        self.dim = sampler.out_dim

    def sample_q(self, n, rng):
        return self.sampler.joint(n, rng)

    def sample_p(self, n, rng):
        return self.sampler.product(n, rng)


class DatasetSource:
    """Minibatches drawn without replacement from fixed Q and P datasets."""

    def __init__(self, xq, xp):
        self.xq = np.asarray(xq, dtype=float)
        self.xp = np.asarray(xp, dtype=float)
        self.dim = self.xq.shape[1]
        self.size = min(len(self.xq), len(self.xp))

    def sample_q(self, n, rng):
        return self.xq[rng.choice(len(self.xq), size=n, replace=False)]

    def sample_p(self, n, rng):
        return self.xp[rng.choice(len(self.xp), size=n, replace=False)]


class TemplateImages:
    """Synthetic stand-in for translated handwritten digits.

    ``k`` fixed random blob templates on a ``size x size`` grid. A sample picks
    a template uniformly, adds small pixel noise, clips to [0, 1] and
    translates it by rounded N(0, sigma^2) offsets with periodic wrap.
    """

    def __init__(self, size: int = 28, k: int = 10, sigma: float = 3.0, noise: float = 0.05, seed: int = 0):
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))
        yy, xx = np.mgrid[0:size, 0:size]
        temps = np.zeros((k, size, size))
        for t in range(k):
            for _ in range(3):
                cy, cx = rng.uniform(0, size, 2)
                w = rng.uniform(1.0, 2.5)
                dy = np.minimum(np.abs(yy - cy), size - np.abs(yy - cy))
                dx = np.minimum(np.abs(xx - cx), size - np.abs(xx - cx))
                temps[t] += np.exp(-(dy**2 + dx**2) / (2 * w * w))
        self.templates = np.clip(temps, 0.0, 1.0)
        self.sigma = sigma
        self.noise = noise
        self.dim = size * size

    def sample(self, n, rng, classes=None):
        k = len(self.templates)
        labels = rng.integers(0, k, n) if classes is None else rng.choice(np.asarray(classes), n)
        imgs = self.templates[labels] + self.noise * rng.standard_normal((n, *self.templates.shape[1:]))
        imgs = random_translate(np.clip(imgs, 0.0, 1.0), self.sigma, rng)
        return imgs.reshape(n, -1)


class ClassMixture:
    """Synthetic stand-in for a labelled image dataset.

    Class ``c`` is ``N(m_c, s^2 I)`` on R^m with random smooth class means.
    ``sample(n, rng, classes)`` draws from the uniform mixture over ``classes``.
    The kernel ``kernel(X, rng)`` cyclically shifts each vector by a rounded
    N(0, 1) offset, playing the role of a random translation.
    """

    def __init__(self, m: int = 8, k: int = 10, spread: float = 1.0, noise: float = 0.5, seed: int = 0):
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))
        self.means = spread * rng.standard_normal((k, m))
        self.noise = noise
        self.dim = m
        self.k = k

    def sample(self, n, rng, classes=None):
        classes = np.arange(self.k) if classes is None else np.asarray(classes)
        labels = rng.choice(classes, n)
        return self.means[labels] + self.noise * rng.standard_normal((n, self.dim))

    def kernel(self, X, rng):
        shifts = np.rint(rng.standard_normal(len(X))).astype(int)
        cols = (np.arange(self.dim)[None, :] - shifts[:, None]) % self.dim
        return X[np.arange(len(X))[:, None], cols]
