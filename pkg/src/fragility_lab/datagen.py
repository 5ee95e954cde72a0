"""Synthetic classification problems.

Three generators are provided:

* ``orthogonal_label``: ``d`` standard Gaussian points in ``R^d``, one class each.
* ``generative_chain``: ``d`` points ``x_i = G_t ... G_1 v_i`` with normalized
  Gaussian generators (entry variance ``1/d``).
* ``hypercube``: ``x = A z`` for sign codes ``z`` in ``{-1, +1}^d``, labelled
  by the last code bit.

Class ids are always ``0..k-1``. For the hypercube problem class 0 is the
``+1`` bit and class 1 is the ``-1`` bit; :func:`bit_of_class` converts.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .exceptions import DimensionError, DomainError
from .rmt import as_generator, sample_gaussian_matrix

KINDS = ("orthogonal_label", "generative_chain", "hypercube")

EXHAUSTIVE_MAX_D = 14
SAMPLED_COUNT = 2**14
GRAY_MAX_D = 20
MAX_CONDITION = 1e12


@dataclass
class GeneratorMeta:
    kind: str
    n_classes: int
    a_matrix: Optional[np.ndarray] = None
    chain: Optional[list] = None
    z_codes: Optional[np.ndarray] = None
    column_scales: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown dataset kind {self.kind!r}")
        if self.kind == "generative_chain" and not self.chain:
            raise DomainError("generative_chain metadata needs the generator chain")
        if self.kind == "hypercube":
            if self.z_codes is None or self.column_scales is None:
                raise DomainError("hypercube metadata needs z_codes and column_scales")
            if not np.all(np.abs(self.z_codes) == 1):
                raise DomainError("z_codes entries must be +1 or -1")
        elif self.z_codes is not None or self.column_scales is not None:
            raise DomainError(f"{self.kind} metadata carries no z_codes/column_scales")
        if self.kind != "generative_chain" and self.chain is not None:
            raise DomainError(f"{self.kind} metadata carries no generator chain")


@dataclass
class Dataset:
    """Labelled points stored row-wise: ``inputs[i]`` is the i-th point."""

    inputs: np.ndarray
    labels: np.ndarray
    generator: GeneratorMeta
    seed: Optional[int] = None

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.inputs.ndim != 2:
            raise DimensionError("inputs must be a 2-D array of points")
        if self.labels.shape != (self.inputs.shape[0],):
            raise DimensionError("labels must have one entry per input")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.generator.n_classes):
            raise DomainError("labels must lie in 0..n_classes-1")

    @property
    def kind(self) -> str:
        return self.generator.kind

    @property
    def d(self) -> int:
        return self.inputs.shape[1]

    @property
    def n_classes(self) -> int:
        return self.generator.n_classes

    def __len__(self):
        return self.inputs.shape[0]

    def to_dict(self) -> dict:
        g = self.generator
        return {
            "kind": g.kind,
            "d": self.d,
            "seed": self.seed,
            "n_classes": g.n_classes,
            "inputs": self.inputs.tolist(),
            "labels": self.labels.tolist(),
            "a_matrix": None if g.a_matrix is None else g.a_matrix.tolist(),
            "chain": None if g.chain is None else [m.tolist() for m in g.chain],
            "z_codes": None if g.z_codes is None else g.z_codes.astype(int).tolist(),
            "column_scales": None if g.column_scales is None else g.column_scales.tolist(),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "Dataset":
        def arr(key, dtype=np.float64):
            value = payload.get(key)
            return None if value is None else np.asarray(value, dtype=dtype)

        chain = payload.get("chain")
        labels = arr("labels", np.int64)
        n_classes = payload.get("n_classes")
        if n_classes is None:
            n_classes = int(labels.max()) + 1
        meta = GeneratorMeta(
            kind=payload["kind"],
            n_classes=int(n_classes),
            a_matrix=arr("a_matrix"),
            chain=None if chain is None else [np.asarray(m, dtype=np.float64) for m in chain],
            z_codes=arr("z_codes", np.int64),
            column_scales=arr("column_scales"),
        )
        return cls(arr("inputs"), labels, meta, seed=payload.get("seed"))


@dataclass
class PathSpec:
    """Straight segment ``x(alpha) = alpha * endpoint_b + (1 - alpha) * endpoint_a``."""

    endpoint_a: np.ndarray
    endpoint_b: np.ndarray
    alphas: np.ndarray = field(default_factory=lambda: np.array([0.0, 1.0]))

    def __post_init__(self):
        self.endpoint_a = np.asarray(self.endpoint_a, dtype=np.float64)
        self.endpoint_b = np.asarray(self.endpoint_b, dtype=np.float64)
        self.alphas = np.asarray(self.alphas, dtype=np.float64)
        if self.endpoint_a.shape != self.endpoint_b.shape or self.endpoint_a.ndim != 1:
            raise DimensionError("path endpoints must be vectors of equal dimension")
        if self.alphas.size < 2 or self.alphas[0] != 0.0 or self.alphas[-1] != 1.0:
            raise DomainError("alphas must start at 0 and end at 1")
        if np.any(np.diff(self.alphas) <= 0):
            raise DomainError("alphas must be strictly increasing")

    @property
    def length(self) -> float:
        return float(np.linalg.norm(self.endpoint_b - self.endpoint_a))

    def point(self, alpha: float) -> np.ndarray:
        return alpha * self.endpoint_b + (1.0 - alpha) * self.endpoint_a

    def points(self) -> np.ndarray:
        a = self.alphas[:, None]
        return a * self.endpoint_b + (1.0 - a) * self.endpoint_a


def gen_orthogonal_label(rng, d: int) -> Dataset:
    """``d`` standard Gaussian points, point ``i`` in class ``i``.

    ``generator.a_matrix`` holds ``X = [x_1 ... x_d]`` (points as columns).
    """
    if d < 2:
        raise DomainError(f"d must be >= 2, got {d}")
    x = sample_gaussian_matrix(rng, d, d)
    meta = GeneratorMeta("orthogonal_label", n_classes=d, a_matrix=x)
    return Dataset(x.T.copy(), np.arange(d), meta)


def gen_generative_chain(rng, d: int, t: int, n_points: Optional[int] = None) -> Dataset:
    """Points ``x_i = G_t ... G_1 v_i`` with ``G_k`` entries of variance ``1/d``.

    ``n_points`` defaults to ``d`` (one point per class, as in the orthogonal
    problem). Larger values give a single-class sample of the generative law,
    useful for covariance checks. ``a_matrix`` holds the points as columns.
    """
    if d < 2:
        raise DomainError(f"d must be >= 2, got {d}")
    if t < 1:
        raise DomainError(f"chain length t must be >= 1, got {t}")
    rng = as_generator(rng)
    n = d if n_points is None else int(n_points)
    chain = [sample_gaussian_matrix(rng, d, d, stddev=1.0 / np.sqrt(d)) for _ in range(t)]
    v = rng.standard_normal((d, n))
    x = v
    for g in chain:
        x = g @ x
    labels = np.arange(n) if n == d else np.zeros(n, dtype=np.int64)
    meta = GeneratorMeta("generative_chain", n_classes=int(labels.max()) + 1, a_matrix=x, chain=chain)
    return Dataset(x.T.copy(), labels, meta)


def gray_code_signs(indices, d: int) -> np.ndarray:
    """Map integer indices to sign vectors through their reflected Gray code.

    Bit ``d-1-k`` of the Gray code gives coordinate ``k``; a set bit is ``-1``.
    """
    idx = np.asarray(indices, dtype=np.int64)
    gray = idx ^ (idx >> 1)
    shifts = np.arange(d - 1, -1, -1, dtype=np.int64)
    bits = (gray[:, None] >> shifts[None, :]) & 1
    return (1 - 2 * bits).astype(np.int64)


def _sample_codes(rng: np.random.Generator, d: int, count: int) -> np.ndarray:
    total = 2**d if d <= 62 else None
    if total is not None and count == total:
        return gray_code_signs(np.arange(total), d)
    if d <= GRAY_MAX_D:
        chosen = np.sort(rng.permutation(total)[:count])
        return gray_code_signs(chosen, d)
    seen = set()
    codes = []
    while len(codes) < count:
        z = np.where(rng.random(d) < 0.5, 1, -1).astype(np.int64)
        key = z.tobytes()
        if key not in seen:
            seen.add(key)
            codes.append(z)
    return np.array(codes)


def default_sample_count(d: int) -> int:
    return 2**d if d <= EXHAUSTIVE_MAX_D else SAMPLED_COUNT


def gen_hypercube(rng, d: int, sample_count: Optional[int] = None, column_scale: float = 1.0) -> Dataset:
    """Hypercube codes mapped through a Gaussian matrix.

    Columns ``0..d-2`` of ``A`` are multiplied by ``column_scale``; the last
    column is left alone, so the last column of ``R`` in ``A = QR`` does not
    depend on the scale. ``A`` is redrawn until its condition number is
    below ``1e12``.
    """
    if d < 2:
        raise DomainError(f"d must be >= 2, got {d}")
    if not column_scale > 0:
        raise DomainError(f"column_scale must be positive, got {column_scale}")
    count = default_sample_count(d) if sample_count is None else int(sample_count)
    if count < 2 or (d < 63 and count > 2**d):
        raise DomainError(f"sample_count must lie in [2, 2^{d}], got {count}")
    rng = as_generator(rng)
    scales = np.full(d, float(column_scale))
    scales[-1] = 1.0
    while True:
        a = sample_gaussian_matrix(rng, d, d) * scales
        if np.linalg.cond(a) < MAX_CONDITION:
            break
    z = _sample_codes(rng, d, count)
    labels = (z[:, -1] < 0).astype(np.int64)
    meta = GeneratorMeta("hypercube", n_classes=2, a_matrix=a, z_codes=z, column_scales=scales)
    return Dataset(z @ a.T, labels, meta)


def bit_of_class(label: int) -> int:
    """Hypercube class id to the last-bit value: 0 -> +1, 1 -> -1."""
    return 1 - 2 * int(label)


def boundary_pair(rng, dataset: Dataset):
    """Two hypercube points that differ only in the last code bit.

    Returns ``(b_plus, b_minus)`` with ``b_plus = A z_+`` and
    ``b_minus = A z_-``, where the first ``d-1`` bits are shared random signs.
    """
    if dataset.kind != "hypercube":
        raise DomainError("boundary_pair needs a hypercube dataset")
    rng = as_generator(rng)
    a = dataset.generator.a_matrix
    head = np.where(rng.random(dataset.d - 1) < 0.5, 1.0, -1.0)
    z_plus = np.append(head, 1.0)
    z_minus = np.append(head, -1.0)
    return a @ z_plus, a @ z_minus


def make_path(a, b, n_alpha: int) -> PathSpec:
    """Uniform ``n_alpha``-point grid on the segment from ``a`` (alpha=0) to ``b`` (alpha=1)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError(f"endpoint dimensions differ: {a.shape} vs {b.shape}")
    if n_alpha < 2:
        raise DomainError(f"n_alpha must be >= 2, got {n_alpha}")
    return PathSpec(a, b, np.linspace(0.0, 1.0, n_alpha))
