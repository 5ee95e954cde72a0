"""Random-matrix primitives.

Gaussian sampling, Householder QR with a nonnegative-diagonal convention,
chi draws, the product-of-triangular-factors sampler that describes the R
factor of a product of Gaussian matrices, and the chi-squared lower-tail
Chernoff bound.

Every sampler takes an explicit :class:`numpy.random.Generator`. Streams
are PCG64 seeded through :func:`make_rng`; child streams for parallel work
come from :func:`child_seed`, which mixes ``(seed, index)`` with numpy's
``SeedSequence`` spawn-key hashing.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from .exceptions import DegenerateError, DimensionError, DomainError, SingularMatrixError

__all__ = [
    "QrFactors",
    "make_rng",
    "as_generator",
    "child_seed",
    "sample_gaussian_matrix",
    "qr_decompose",
    "sample_chi",
    "sample_product_r",
    "chernoff_tail_bound",
    "min_pairwise_distance",
    "project_onto_span",
    "matrix_to_csv",
    "matrix_from_csv",
]


class QrFactors(NamedTuple):
    q: np.ndarray
    r: np.ndarray


def make_rng(seed: int) -> np.random.Generator:
    """Return a PCG64 generator; identical seeds give identical streams."""
    if seed < 0:
        raise DomainError(f"seed must be nonnegative, got {seed}")
    return np.random.Generator(np.random.PCG64(seed))


def as_generator(rng) -> np.random.Generator:
    """Accept a Generator or an integer seed."""
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, (int, np.integer)):
        return make_rng(int(rng))
    raise TypeError(f"expected a numpy Generator or an int seed, got {type(rng).__name__}")


def child_seed(seed: int, index: int) -> int:
    """Derive a 64-bit child seed from ``(seed, index)``.

    Uses ``SeedSequence(seed, spawn_key=(index,))``, so children of one
    master seed are statistically independent and stable across platforms.
    """
    ss = np.random.SeedSequence(seed, spawn_key=(index,))
    return int(ss.generate_state(1, np.uint64)[0])


def sample_gaussian_matrix(rng, rows: int, cols: int, stddev: float = 1.0) -> np.ndarray:
    if rows < 1 or cols < 1:
        raise DimensionError(f"matrix dimensions must be positive, got {rows}x{cols}")
    if not stddev > 0:
        raise DomainError(f"stddev must be positive, got {stddev}")
    rng = as_generator(rng)
    return rng.standard_normal((rows, cols)) * stddev


def _as_matrix(m) -> np.ndarray:
    a = np.asarray(m, dtype=np.float64)
    if a.ndim != 2:
        raise DimensionError(f"expected a 2-D matrix, got shape {a.shape}")
    if a.size == 0:
        raise DimensionError("matrix has a zero dimension")
    if not np.all(np.isfinite(a)):
        raise DomainError("matrix contains non-finite entries")
    return a


def qr_decompose(m, rtol: float = 1e-12) -> QrFactors:
    """Thin Householder QR of a tall matrix with ``diag(R) >= 0``.

    Parameters
    ----------
    m : array_like, shape (n, k), n >= k
    rtol : float
        A pivot ``|R[j, j]|`` at or below ``rtol`` times the largest column
        norm of ``m`` is treated as rank deficiency.

    Returns
    -------
    QrFactors
        ``q`` of shape (n, k) with orthonormal columns and upper-triangular
        ``r`` of shape (k, k) whose diagonal is nonnegative.

    Raises
    ------
    SingularMatrixError
        With ``column`` set to the first column that is (numerically) in
        the span of the previous ones.
    """
    a = _as_matrix(m)
    n, k = a.shape
    if n < k:
        raise DimensionError(f"qr_decompose needs rows >= cols, got {n}x{k}")

    peak = float(np.max(np.abs(a)))
    if peak == 0.0:
        raise SingularMatrixError("column 0 is zero", column=0)
    # Rescale by a power of two (exact) so column norms neither underflow nor overflow.
    exponent = math.frexp(peak)[1]
    r = np.ldexp(a, -exponent)
    scale = float(np.max(np.linalg.norm(r, axis=0)))
    reflectors = []
    for j in range(k):
        x = r[j:, j]
        normx = float(np.linalg.norm(x))
        if normx <= rtol * scale:
            raise SingularMatrixError(
                f"column {j} is numerically dependent on the preceding columns "
                f"(pivot {normx:.3e}, scale {scale:.3e})",
                column=j,
            )
        v = x.copy()
        v[0] += math.copysign(normx, x[0])
        v /= np.linalg.norm(v)
        r[j:, j:] -= 2.0 * np.outer(v, v @ r[j:, j:])
        reflectors.append(v)

    q = np.eye(n, k)
    for j in range(k - 1, -1, -1):
        v = reflectors[j]
        q[j:, :] -= 2.0 * np.outer(v, v @ q[j:, :])

    r = np.ldexp(np.triu(r[:k, :]), exponent)
    # Householder leaves diag(R) = -sign(x0) * |x|; flip to the nonnegative convention.
    signs = np.where(np.diag(r) < 0.0, -1.0, 1.0)
    q *= signs
    r *= signs[:, None]
    return QrFactors(q, r)


def sample_chi(rng, degrees: int) -> float:
    """One draw of a chi variable, i.e. the square root of a chi-squared draw."""
    if degrees < 1:
        raise DomainError(f"chi degrees of freedom must be >= 1, got {degrees}")
    rng = as_generator(rng)
    return math.sqrt(rng.chisquare(degrees))


def _triangular_factor(rng: np.random.Generator, n1: int, n_next: int) -> np.ndarray:
    factor = np.triu(rng.standard_normal((n1, n1)), k=1)
    degrees = n_next - np.arange(n1)  # row j (1-based) gets n_next - j + 1
    factor[np.diag_indices(n1)] = np.sqrt(rng.chisquare(degrees))
    return factor


def sample_product_r(rng, layer_widths) -> np.ndarray:
    """Draw ``R_{l-1} ... R_1`` for widths ``[n_1, ..., n_l]``.

    Each factor ``R_i`` is ``n_1 x n_1`` upper triangular with i.i.d.
    standard normal strict-upper entries and a chi(``n_{i+1} - j + 1``)
    diagonal in row ``j``. The product has the same law as the R factor of
    ``H_{l-1} ... H_1`` for independent standard Gaussian ``H_i`` of shape
    ``n_{i+1} x n_i``.
    """
    widths = [int(w) for w in layer_widths]
    if len(widths) < 2:
        raise DomainError("layer_widths needs at least two entries")
    if min(widths) < 1:
        raise DimensionError(f"layer widths must be positive, got {widths}")
    if any(b < a for a, b in zip(widths, widths[1:])):
        raise DomainError(f"layer widths must be nondecreasing, got {widths}")
    rng = as_generator(rng)
    n1 = widths[0]
    product = np.eye(n1)
    for n_next in widths[1:]:
        product = _triangular_factor(rng, n1, n_next) @ product
    return np.triu(product)


def chernoff_tail_bound(alpha: float, d: int) -> float:
    """Upper bound on ``P(sum_{i<d} Z_i^2 <= alpha * d)`` for standard normal Z."""
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    if d < 1:
        raise DomainError(f"d must be >= 1, got {d}")
    return (alpha * math.exp(1.0 - alpha)) ** (d / 2.0)


def min_pairwise_distance(points):
    """Smallest Euclidean distance among ``points`` and the index pair achieving it.

    Ties resolve to the lexicographically smallest ``(i, j)`` with ``i < j``.
    """
    try:
        pts = np.asarray(points, dtype=np.float64)
    except ValueError as exc:
        raise DimensionError("points have unequal dimensions") from exc
    if pts.ndim != 2:
        raise DimensionError(f"expected a list of equal-length vectors, got shape {pts.shape}")
    if pts.shape[0] < 2:
        raise DomainError("need at least two points")
    best = math.inf
    pair = (0, 1)
    for i in range(pts.shape[0] - 1):
        dist = np.sqrt(((pts[i + 1:] - pts[i]) ** 2).sum(axis=1))
        j = int(np.argmin(dist))
        if dist[j] < best:
            best = float(dist[j])
            pair = (i, i + 1 + j)
    return best, pair


def project_onto_span(directions, v):
    """Orthogonal projection of ``v`` onto the span of ``directions``.

    Directions that are numerically dependent on earlier ones are dropped,
    so collinear inputs fall back to a lower-dimensional span. Returns
    ``(projection, span_dim)``.
    """
    v = np.asarray(v, dtype=np.float64)
    cols = [np.asarray(u, dtype=np.float64) for u in directions]
    if any(u.shape != v.shape for u in cols):
        raise DimensionError("directions and vector must share a dimension")
    basis = []
    for u in cols:
        if np.linalg.norm(u) <= 1e-12:
            continue
        trial = np.column_stack(basis + [u])
        try:
            qr_decompose(trial)
        except SingularMatrixError:
            continue
        basis.append(u)
    if not basis:
        raise DegenerateError("all spanning directions are (near) zero")
    q, _ = qr_decompose(np.column_stack(basis))
    return q @ (q.T @ v), q.shape[1]


def matrix_to_csv(m, path) -> None:
    """Write one matrix row per line with ``%.17g`` (round-trip exact)."""
    np.savetxt(path, _as_matrix(m), fmt="%.17g", delimiter=",")


def matrix_from_csv(path) -> np.ndarray:
    return np.atleast_2d(np.loadtxt(path, delimiter=",", dtype=np.float64))
