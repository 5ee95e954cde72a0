"""Compression diagnostics: angles, local ratios, path profiles and path integrals.

All angle-type quantities are scale free, so rescaling a network's last
layer by a positive constant leaves them unchanged.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .datagen import Dataset, PathSpec
from .exceptions import DegenerateError, DimensionError, DomainError, SingularMatrixError
from .models import MLPClassifier
from .rmt import qr_decompose

CSV_COLUMNS = ("seed", "d", "valid", "cos_theta1", "cos_theta2", "phi", "abs_gap", "rho", "m_signed", "d_change")


def cosine(u, v) -> float:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise DimensionError(f"vectors differ in shape: {u.shape} vs {v.shape}")
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu <= 1e-12 or nv <= 1e-12:
        raise DegenerateError("cosine of a zero vector is undefined")
    return float(np.clip(u @ v / (nu * nv), -1.0, 1.0))


def compression_fraction(a_matrix) -> float:
    """``R[d-1, d-1] / ||A[:, d-1]||`` from the nonnegative-diagonal QR of ``A``."""
    _, r = qr_decompose(a_matrix)
    return float(r[-1, -1] / np.linalg.norm(np.asarray(a_matrix)[:, -1]))


def linear_compression_angles(model: MLPClassifier, dataset: Dataset):
    """``(cos_theta1, cos_theta2, phi)`` for a two-logit linear network.

    ``cos_theta1``: cosine between ``W_0 - W_1`` and the last column of ``A``.
    ``cos_theta2``: cosine between ``W_0`` and the last row of ``A^{-1}``.
    ``phi``: the compression fraction of ``A``.
    """
    if dataset.kind != "hypercube":
        raise DomainError("compression angles are defined for hypercube datasets")
    a = dataset.generator.a_matrix
    if np.linalg.cond(a) >= 1e12:
        raise SingularMatrixError("A is numerically singular")
    w = model.effective_weight()
    if w.shape[0] != 2:
        raise DimensionError("compression angles need a two-logit network")
    last_row_inv = np.linalg.solve(a.T, np.eye(a.shape[0])[-1])
    return (
        cosine(w[0] - w[1], a[:, -1]),
        cosine(w[0], last_row_inv),
        compression_fraction(a),
    )


def local_ratio_rho(model: MLPClassifier, x, x1, x2, classes=(0, 1)) -> float:
    """``|P_g (x1 - x2)| / |x1 - x2|`` with ``g = grad(f_a - f_b)(x)`` (a 1-D span)."""
    x1 = np.asarray(x1, dtype=np.float64)
    x2 = np.asarray(x2, dtype=np.float64)
    diff = x1 - x2
    if np.linalg.norm(diff) <= 1e-12:
        raise DegenerateError("x1 and x2 coincide")
    grad = model.input_gradient(np.asarray(x, dtype=np.float64), classes[0], classes[1])
    if np.linalg.norm(grad) <= 1e-12:
        raise DegenerateError("gradient of the logit difference vanishes at x")
    return abs(cosine(grad, diff))


@dataclass
class ProfilePoint:
    alpha: float
    cos_theta: float
    grad_norm: float
    vanished: bool = False


def path_profile(model: MLPClassifier, path: PathSpec, classes=(0, 1)):
    """Gradient of ``g = f_i - f_j`` along ``path``: cosine with ``b - a`` and norm.

    Points where the gradient vanishes are recorded with cosine 0, norm 0 and
    ``vanished=True``.
    """
    direction = path.endpoint_b - path.endpoint_a
    if np.linalg.norm(direction) <= 1e-12:
        raise DegenerateError("path endpoints coincide")
    grads = model.input_gradients(path.points(), classes[0], classes[1])
    out = []
    for alpha, grad in zip(path.alphas, grads):
        norm = float(np.linalg.norm(grad))
        if norm <= 1e-12:
            out.append(ProfilePoint(float(alpha), 0.0, 0.0, True))
        else:
            out.append(ProfilePoint(float(alpha), cosine(grad, direction), norm))
    return out


def _weights(n: int, rule: str) -> np.ndarray:
    w = np.ones(n)
    if rule == "trapezoid":
        w[0] = w[-1] = 0.5
    elif rule != "rectangle":
        raise DomainError(f"unknown quadrature rule {rule!r}")
    return w


def path_integral(profile, path_length: float, rule: str = "trapezoid") -> float:
    """Quadrature of ``||grad g|| cos(theta)`` over the path with spacing ``L / (n - 1)``.

    ``rule='rectangle'`` sums every grid point with full weight;
    ``'trapezoid'`` halves the two endpoints and is exact for linear ``g``.
    """
    if not profile:
        raise DomainError("profile is empty")
    n = len(profile)
    if n < 2:
        raise DomainError("profile needs at least two points")
    vals = np.array([p.grad_norm * p.cos_theta for p in profile])
    return float(np.sum(_weights(n, rule) * vals) * path_length / (n - 1))


def path_integral_m(profile, grad_norm_at_start: float, path_length: float, rule: str = "trapezoid") -> float:
    """Signed attacker path length: the path integral over the start-point gradient norm."""
    if not grad_norm_at_start > 0:
        raise DegenerateError("gradient norm at the path start must be positive")
    return path_integral(profile, path_length, rule) / grad_norm_at_start


def d_change(model: MLPClassifier, a, b, classes=(0, 1)) -> float:
    """``g(b) - g(a)`` for ``g = f_i - f_j``."""
    la, lb = model.forward(np.asarray(a, dtype=np.float64)), model.forward(np.asarray(b, dtype=np.float64))
    i, j = classes
    return float((lb[i] - lb[j]) - (la[i] - la[j]))


@dataclass
class CompressionReport:
    cos_theta1: Optional[float] = None
    cos_theta2: Optional[float] = None
    phi: Optional[float] = None
    rho: Optional[float] = None
    rho_span: str = "gradient-difference"
    path_profile: Optional[list] = None
    m_signed: Optional[float] = None
    d_change: Optional[float] = None
    run_metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("cos_theta1", "cos_theta2"):
            value = getattr(self, name)
            if value is not None and not -1.0 <= value <= 1.0:
                raise DomainError(f"{name} must lie in [-1, 1]")
        if self.phi is not None and not 0.0 <= self.phi <= 1.0 + 1e-12:
            raise DomainError("phi must lie in [0, 1]")

    @property
    def abs_gap(self) -> Optional[float]:
        if self.cos_theta1 is None or self.phi is None:
            return None
        return abs(abs(self.cos_theta1) - abs(self.phi))

    def to_dict(self) -> dict:
        out = asdict(self)
        if self.path_profile is not None:
            out["path_profile"] = [asdict(p) if isinstance(p, ProfilePoint) else p for p in self.path_profile]
        out["abs_gap"] = self.abs_gap
        return out

    def csv_row(self) -> dict:
        meta = self.run_metadata
        return {
            "seed": meta.get("seed"),
            "d": meta.get("d"),
            "valid": meta.get("valid"),
            "cos_theta1": self.cos_theta1,
            "cos_theta2": self.cos_theta2,
            "phi": self.phi,
            "abs_gap": self.abs_gap,
            "rho": self.rho,
            "m_signed": self.m_signed,
            "d_change": self.d_change,
        }


def analyze_linear(model: MLPClassifier, dataset: Dataset, **metadata) -> CompressionReport:
    c1, c2, phi = linear_compression_angles(model, dataset)
    metadata.setdefault("d", dataset.d)
    metadata.setdefault("dataset_kind", dataset.kind)
    return CompressionReport(cos_theta1=c1, cos_theta2=c2, phi=phi, run_metadata=metadata)
