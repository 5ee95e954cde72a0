"""Constructive adversarial perturbations and a normalized-gradient attack.

Each attack returns an :class:`AttackOutcome` holding the perturbation, the
logits before and after (from a real forward pass) and the theoretical
magnitude the construction is expected to respect (``bound``).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .datagen import Dataset, bit_of_class
from .exceptions import (
    DegenerateError,
    DimensionError,
    DomainError,
    SingularMatrixError,
    VanishingGradientError,
)
from .models import MLPClassifier
from .rmt import project_onto_span, qr_decompose

METHODS = ("thm1", "thm5", "probe", "local-proj", "grad")


@dataclass
class AttackOutcome:
    perturbation: np.ndarray
    logits_before: np.ndarray
    logits_after: np.ndarray
    success: bool
    bound: float
    source_class: int
    target_class: int
    method: str
    details: dict = field(default_factory=dict)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.perturbation))

    def to_dict(self) -> dict:
        details = {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in self.details.items()}
        return {
            "method": self.method,
            "perturbation": self.perturbation.tolist(),
            "norm": self.norm,
            "logits_before": self.logits_before.tolist(),
            "logits_after": self.logits_after.tolist(),
            "success": bool(self.success),
            "bound": float(self.bound),
            "source_class": int(self.source_class),
            "target_class": int(self.target_class),
            "details": details,
        }


def _flipped(logits, source, target) -> bool:
    """Target logit strictly above the source logit, and source no longer the argmax."""
    return bool(logits[target] > logits[source] and int(np.argmax(logits)) != source)


def thm1_attack(dataset: Dataset, model: MLPClassifier) -> AttackOutcome:
    """Move the last point toward the second-to-last class along two QR directions.

    With ``X = Q R`` the perturbation is ``e = Q b`` where
    ``b = (0, ..., 0, R[d-2, d-2] - R[d-2, d-1], -R[d-1, d-1])``; on the ideal
    two-layer net this yields logits ``f_{d-2} = 1`` and ``f_{d-1} = 0``.
    """
    if dataset.kind not in ("orthogonal_label", "generative_chain"):
        raise DomainError(f"thm1_attack needs an orthogonal-label dataset, got {dataset.kind}")
    x_mat = dataset.generator.a_matrix
    d = x_mat.shape[0]
    if model.input_dim != d or model.output_dim != d:
        raise DimensionError("model must map R^d to d logits")
    q, r = qr_decompose(x_mat)
    b = np.zeros(d)
    b[d - 2] = r[d - 2, d - 2] - r[d - 2, d - 1]
    b[d - 1] = -r[d - 1, d - 1]
    e = q @ b
    x = x_mat[:, d - 1]
    source, target = d - 1, d - 2
    before = model.forward(x)
    after = model.forward(x + e)
    bound = abs(r[d - 2, d - 2]) + abs(r[d - 2, d - 1]) + abs(r[d - 1, d - 1])
    return AttackOutcome(
        e, before, after, _flipped(after, source, target), bound, source, target, "thm1",
        {"r_tail": [r[d - 2, d - 2], r[d - 2, d - 1], r[d - 1, d - 1]]},
    )


def thm5_attack(dataset: Dataset, model: MLPClassifier, index: int) -> AttackOutcome:
    """Flip a hypercube point by moving ``2 R[d-1, d-1]`` along the last column of ``Q``."""
    if dataset.kind != "hypercube":
        raise DomainError(f"thm5_attack needs a hypercube dataset, got {dataset.kind}")
    if not 0 <= index < len(dataset):
        raise DomainError(f"point index {index} out of range")
    q, r = qr_decompose(dataset.generator.a_matrix)
    bit = int(dataset.generator.z_codes[index][-1])
    basis = np.zeros(dataset.d)
    basis[-1] = -2.0 * bit * r[-1, -1]
    e = q @ basis
    x = dataset.inputs[index]
    source = int(dataset.labels[index])
    target = 1 - source
    before = model.forward(x)
    after = model.forward(x + e)
    bound = 2.0 * abs(r[-1, -1])
    return AttackOutcome(
        e, before, after, int(np.argmax(after)) == target, bound, source, target, "thm5",
        {"bit": bit, "r_dd": r[-1, -1]},
    )


def probe_subspace_attack(model: MLPClassifier, x, source: int, target: int) -> AttackOutcome:
    """Cross the pairwise boundary along ``probe_target - probe_source``.

    The step length is the exact crossing distance plus a margin of
    ``max(1e-6 * c, 1e-9)``. ``bound`` is the QR-coordinate quotient
    ``|r11 a1 - (r12 a1 + r22 a2)| / ||p_i - p_j||``, which equals the
    crossing distance for bias-free networks.
    """
    x = np.asarray(x, dtype=np.float64)
    p_i, p_j = model.probing_vectors([source, target])
    diff = p_j - p_i
    gap = float(np.linalg.norm(diff))
    if gap <= 1e-10:
        raise DegenerateError("probing vectors of source and target coincide")
    try:
        q, r = qr_decompose(np.column_stack([p_i, p_j]))
        a1, a2 = q.T @ x
        numer = abs(r[0, 0] * a1 - (r[0, 1] * a1 + r[1, 1] * a2))
        details = {"a": [float(a1), float(a2)], "r": [float(r[0, 0]), float(r[0, 1]), float(r[1, 1])]}
    except SingularMatrixError:
        numer = abs(float((p_i - p_j) @ x))
        u = p_i / np.linalg.norm(p_i)
        details = {"a": [float(u @ x), 0.0], "r": None}
    bound = numer / gap
    before = model.forward(x)
    margin_now = before[source] - before[target]
    if margin_now < 0:
        delta = np.zeros_like(x)
    else:
        c = margin_now / gap
        c += max(1e-6 * c, 1e-9)
        delta = c * diff / gap
    after = model.forward(x + delta)
    details["projection_norm"] = float(np.hypot(*details["a"]))
    return AttackOutcome(
        delta, before, after, bool(after[target] > after[source]), bound, source, target, "probe", details
    )


def local_projection_attack(model: MLPClassifier, x, x1, x2, epsilon: float, classes=(0, 1)) -> AttackOutcome:
    """Match ``f(x + eps*x2)`` starting from ``x + eps*x1`` using only the gradient span.

    The perturbation is the projection of ``eps * (x2 - x1)`` onto
    ``span(grad f_a(x), grad f_b(x))`` for ``classes = (a, b)``. Collinear
    gradients fall back to their common direction.
    """
    x = np.asarray(x, dtype=np.float64)
    x1 = np.asarray(x1, dtype=np.float64)
    x2 = np.asarray(x2, dtype=np.float64)
    if not (x.shape == x1.shape == x2.shape):
        raise DimensionError("x, x1 and x2 must share a dimension")
    full = epsilon * (x2 - x1)
    if np.linalg.norm(full) > 0.1 * np.linalg.norm(x):
        raise DomainError("epsilon too large: ||eps (x2 - x1)|| must not exceed 0.1 ||x||")
    a, b = classes
    grads = [model.input_gradient(x, a), model.input_gradient(x, b)]
    if max(np.linalg.norm(g) for g in grads) <= 1e-12:
        raise DegenerateError("both logit gradients vanish at x")
    q, span_dim = project_onto_span(grads, full)
    start = x + epsilon * x1
    before = model.forward(start)
    after = model.forward(start + q)
    reference = model.forward(x + epsilon * x2)
    first_order = before.copy()
    first_order[a] += grads[0] @ q
    first_order[b] += grads[1] @ q
    full_norm = float(np.linalg.norm(full))
    target = int(np.argmax(reference))
    return AttackOutcome(
        q, before, after, int(np.argmax(after)) == target, float(np.linalg.norm(q)),
        int(np.argmax(before)), target, "local-proj",
        {
            "first_order_logits": first_order,
            "reference_logits": reference,
            "span_dim": span_dim,
            "rho": float(np.linalg.norm(q)) / full_norm if full_norm > 0 else 0.0,
        },
    )


def iterative_gradient_attack(
    model: MLPClassifier,
    x,
    source: int,
    target: int,
    step: float | None = None,
    max_steps: int = 100_000,
    threshold: float = 0.0,
    tol: float = 1e-6,
) -> AttackOutcome:
    """Walk down ``g = f_source - f_target`` with unit-normalized gradient steps.

    Stops once ``g < threshold`` (0 means the pair flips), then bisects the
    last step until the crossing is bracketed to ``tol``. The reported norm
    is the net displacement from ``x``.
    """
    x = np.asarray(x, dtype=np.float64)
    if step is None:
        step = 1e-2 * max(float(np.linalg.norm(x)), 1.0)
    if not step > 0:
        raise DomainError("step must be positive")

    def g(point):
        logits = model.forward(point)
        return logits[source] - logits[target]

    before = model.forward(x)
    cur = x.copy()
    steps_taken = 0
    crossed = g(cur) < threshold
    while not crossed and steps_taken < max_steps:
        grad = model.input_gradient(cur, source, target)
        gnorm = float(np.linalg.norm(grad))
        if gnorm < 1e-12:
            raise VanishingGradientError(f"gradient vanished at iterate {steps_taken}", iterate=steps_taken)
        direction = -grad / gnorm
        nxt = cur + step * direction
        steps_taken += 1
        if g(nxt) < threshold:
            lo, hi = 0.0, 1.0
            while (hi - lo) * step > tol:
                mid = 0.5 * (lo + hi)
                if g(cur + mid * step * direction) < threshold:
                    hi = mid
                else:
                    lo = mid
            cur = cur + hi * step * direction
            crossed = True
        else:
            cur = nxt
    after = model.forward(cur)
    final_g = after[source] - after[target]
    return AttackOutcome(
        cur - x, before, after, bool(final_g < threshold), float(np.linalg.norm(cur - x)),
        source, target, "grad",
        {"steps": steps_taken, "final_g": float(final_g), "threshold": threshold, "step": step},
    )
