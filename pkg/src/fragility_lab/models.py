"""Small multilayer perceptrons written directly in numpy.

:class:`MLPClassifier` follows the scikit-learn estimator protocol
(``fit``/``predict``/``decision_function``/``get_params``) so it drops into
pipelines and ``clone``. Its fitted state is a list of :class:`Layer` and
the final layer always emits raw logits.

Two idealized constructions build already-fitted estimators whose weights
satisfy the interpolation conditions used by the analytic attacks:
:func:`ideal_two_layer` and :func:`ideal_hypercube_net`.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.linalg import solve_triangular
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .datagen import Dataset
from .exceptions import (
    DimensionError,
    DivergenceError,
    DomainError,
    SingularMatrixError,
    UnsupportedModelError,
)
from .rmt import as_generator, qr_decompose, sample_gaussian_matrix

ACTIVATIONS = ("identity", "relu")
LOSSES = ("cross_entropy", "nll")
DEFAULT_BATCH = 32


@dataclass
class Layer:
    weight: np.ndarray  # (n_out, n_in)
    bias: np.ndarray  # (n_out,)
    activation: str = "identity"

    def __post_init__(self):
        self.weight = np.asarray(self.weight, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.activation not in ACTIVATIONS:
            raise DomainError(f"unknown activation {self.activation!r}")
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[0],):
            raise DimensionError("layer bias must match the weight's output dimension")
        if not (np.all(np.isfinite(self.weight)) and np.all(np.isfinite(self.bias))):
            raise DomainError("layer parameters must be finite")


@dataclass
class TrainConfig:
    epochs: int = 20
    learning_rate: float = 1e-3
    batch_size: object = "auto"
    optimizer: str = "adam"
    adam_betas: tuple = (0.9, 0.999)
    adam_eps: float = 1e-8
    loss: str = "cross_entropy"
    seed: int = 0

    def __post_init__(self):
        self.adam_betas = tuple(float(b) for b in self.adam_betas)
        if self.epochs < 1:
            raise DomainError("epochs must be >= 1")
        if self.learning_rate < 0:
            raise DomainError("learning_rate must be nonnegative")
        if not all(0.0 < b < 1.0 for b in self.adam_betas):
            raise DomainError("adam betas must lie in (0, 1)")
        if self.optimizer != "adam":
            raise DomainError(f"unsupported optimizer {self.optimizer!r}")
        if self.loss not in LOSSES:
            raise DomainError(f"unsupported loss {self.loss!r}")
        if self.batch_size not in ("auto", "full") and (self.batch_size is None or int(self.batch_size) < 1):
            raise DomainError("batch_size must be 'auto', 'full' or a positive integer")

    @classmethod
    def from_dict(cls, payload: dict) -> "TrainConfig":
        known = {k: v for k, v in payload.items() if k in cls.__dataclass_fields__}
        return cls(**known)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["adam_betas"] = list(self.adam_betas)
        return out


@dataclass
class TrainReport:
    final_train_accuracy: float
    loss_curve: list = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return self.final_train_accuracy == 1.0

    def to_dict(self) -> dict:
        return {
            "final_train_accuracy": self.final_train_accuracy,
            "loss_curve": list(self.loss_curve),
            "valid": self.valid,
        }


def resolve_batch_size(batch_size, n_samples: int) -> int:
    """``'auto'`` means mini-batches of 32; 20 full-batch epochs are too few Adam steps to fit."""
    if batch_size == "auto" or batch_size is None:
        return min(DEFAULT_BATCH, n_samples)
    if batch_size == "full":
        return n_samples
    return min(int(batch_size), n_samples)


def _activate(z, activation):
    return np.maximum(z, 0.0) if activation == "relu" else z


def _softmax(logits):
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


class MLPClassifier(ClassifierMixin, BaseEstimator):
    """Fully connected network trained with Adam on a cross-entropy loss.

    Parameters
    ----------
    hidden_layer_sizes : tuple of int
        Widths of the hidden layers; ``()`` gives a single linear layer.
    activation : {'identity', 'relu'}
        Hidden-layer activation. The output layer is always linear.
    epochs, learning_rate, batch_size, beta_1, beta_2, epsilon, loss
        Optimizer settings, see :class:`TrainConfig`.
    random_state : int
        Seeds weight initialization and mini-batch shuffling.

    Attributes
    ----------
    layers_ : list of Layer
    classes_ : ndarray
    train_report_ : TrainReport
    """

    def __init__(
        self,
        hidden_layer_sizes=(256,),
        activation="identity",
        epochs=20,
        learning_rate=1e-3,
        batch_size="auto",
        beta_1=0.9,
        beta_2=0.999,
        epsilon=1e-8,
        loss="cross_entropy",
        random_state=0,
    ):
        self.hidden_layer_sizes = hidden_layer_sizes
        self.activation = activation
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.beta_1 = beta_1
        self.beta_2 = beta_2
        self.epsilon = epsilon
        self.loss = loss
        self.random_state = random_state

    # -- construction -----------------------------------------------------

    @classmethod
    def from_layers(cls, layers, classes=None, **params):
        """Wrap explicit layers as a fitted estimator."""
        layers = list(layers)
        _check_chain(layers)
        hidden = tuple(layer.weight.shape[0] for layer in layers[:-1])
        acts = {layer.activation for layer in layers[:-1]} or {"identity"}
        params.setdefault("activation", "relu" if "relu" in acts else "identity")
        model = cls(hidden_layer_sizes=hidden, **params)
        model.layers_ = layers
        k = layers[-1].weight.shape[0]
        model.classes_ = np.arange(k) if classes is None else np.asarray(classes)
        model.n_features_in_ = layers[0].weight.shape[1]
        return model

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            epochs=self.epochs,
            learning_rate=self.learning_rate,
            batch_size=self.batch_size,
            adam_betas=(self.beta_1, self.beta_2),
            adam_eps=self.epsilon,
            loss=self.loss,
            seed=self.random_state,
        )

    def _init_layers(self, d, k, rng):
        if self.activation not in ACTIVATIONS:
            raise DomainError(f"unknown activation {self.activation!r}")
        widths = [d, *[int(w) for w in self.hidden_layer_sizes], k]
        layers = []
        for i, (n_in, n_out) in enumerate(zip(widths, widths[1:])):
            act = self.activation if i < len(widths) - 2 else "identity"
            w = sample_gaussian_matrix(rng, n_out, n_in, stddev=1.0 / np.sqrt(n_in))
            layers.append(Layer(w, np.zeros(n_out), act))
        return layers

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        self.classes_, y_idx = np.unique(y, return_inverse=True)
        if self.classes_.size < 2:
            raise DomainError("need at least two classes to fit")
        self.n_features_in_ = X.shape[1]
        rng = as_generator(int(self.random_state))
        self.layers_ = self._init_layers(X.shape[1], self.classes_.size, rng)
        self.train_report_ = train(self, X, y_idx, self.train_config())
        return self

    # -- inference --------------------------------------------------------

    @property
    def input_dim(self) -> int:
        check_is_fitted(self, "layers_")
        return self.layers_[0].weight.shape[1]

    @property
    def output_dim(self) -> int:
        check_is_fitted(self, "layers_")
        return self.layers_[-1].weight.shape[0]

    @property
    def is_linear(self) -> bool:
        check_is_fitted(self, "layers_")
        return all(layer.activation == "identity" for layer in self.layers_)

    def _batch(self, X):
        X = np.asarray(X, dtype=np.float64)
        single = X.ndim == 1
        X = np.atleast_2d(X)
        if X.shape[1] != self.input_dim:
            raise DimensionError(f"expected inputs of dimension {self.input_dim}, got {X.shape[1]}")
        if not np.all(np.isfinite(X)):
            raise DomainError("inputs must be finite")
        return X, single

    def forward(self, X):
        """Logits for one vector (returns a vector) or a batch of rows."""
        check_is_fitted(self, "layers_")
        h, single = self._batch(X)
        for layer in self.layers_:
            h = _activate(h @ layer.weight.T + layer.bias, layer.activation)
        return h[0] if single else h

    def decision_function(self, X):
        check_is_fitted(self, "layers_")
        X = check_array(X)
        return self.forward(X)

    def predict_proba(self, X):
        return _softmax(self.decision_function(X))

    def predict(self, X):
        # argmax picks the lowest class index on exact ties
        return self.classes_[np.argmax(self.decision_function(X), axis=1)]

    def _check_class(self, c):
        if c is None:
            return
        if not 0 <= int(c) < self.output_dim:
            raise DomainError(f"class index {c} out of range for {self.output_dim} outputs")

    def input_gradients(self, X, i, j=None):
        """Row-wise gradients of ``f_i`` (or ``f_i - f_j``) with respect to the inputs.

        ReLU uses the subgradient 0 at the kink.
        """
        check_is_fitted(self, "layers_")
        self._check_class(i)
        self._check_class(j)
        h, single = self._batch(X)
        pre = []
        for layer in self.layers_:
            z = h @ layer.weight.T + layer.bias
            pre.append(z)
            h = _activate(z, layer.activation)
        seed = np.zeros(self.output_dim)
        seed[int(i)] += 1.0
        if j is not None:
            seed[int(j)] -= 1.0
        grad = np.broadcast_to(seed, (h.shape[0], seed.size))
        for layer, z in zip(reversed(self.layers_), reversed(pre)):
            if layer.activation == "relu":
                grad = grad * (z > 0.0)
            grad = grad @ layer.weight
        return grad[0] if single else grad

    def input_gradient(self, x, i, j=None):
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 1:
            raise DimensionError("input_gradient takes a single vector")
        return self.input_gradients(x, i, j)

    def effective_weight(self):
        """``H_l ... H_1`` for a linear network (rows are probing vectors)."""
        if not self.is_linear:
            raise UnsupportedModelError("effective weights exist only for linear networks")
        w = self.layers_[0].weight
        for layer in self.layers_[1:]:
            w = layer.weight @ w
        return w

    def probing_vectors(self, classes):
        w = self.effective_weight()
        for c in classes:
            self._check_class(c)
        return [w[int(c)].copy() for c in classes]

    # -- serialization ----------------------------------------------------

    def to_dict(self) -> dict:
        check_is_fitted(self, "layers_")
        dims = [self.input_dim] + [layer.weight.shape[0] for layer in self.layers_]
        return {
            "layers": [
                {"weights": l.weight.tolist(), "bias": l.bias.tolist(), "activation": l.activation}
                for l in self.layers_
            ],
            "dims": dims,
            "classes": self.classes_.tolist(),
            "params": _jsonable_params(self.get_params()),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "MLPClassifier":
        layers = [Layer(l["weights"], l["bias"], l.get("activation", "identity")) for l in payload["layers"]]
        dims = payload.get("dims")
        if dims is not None and dims != [layers[0].weight.shape[1]] + [l.weight.shape[0] for l in layers]:
            raise DimensionError("model dims do not match the stored layers")
        params = dict(payload.get("params") or {})
        params.pop("hidden_layer_sizes", None)  # recovered from the layers
        return cls.from_layers(layers, classes=payload.get("classes"), **params)


def _jsonable_params(params):
    out = {}
    for key, value in params.items():
        if isinstance(value, tuple):
            value = list(value)
        elif isinstance(value, np.generic):
            value = value.item()
        out[key] = value
    return out


def _check_chain(layers):
    if not layers:
        raise DimensionError("a model needs at least one layer")
    for a, b in zip(layers, layers[1:]):
        if b.weight.shape[1] != a.weight.shape[0]:
            raise DimensionError(
                f"layer dimensions do not chain: {a.weight.shape} then {b.weight.shape}"
            )


def forward(model: MLPClassifier, x):
    return model.forward(x)


def input_gradient(model: MLPClassifier, x, i, j=None):
    return model.input_gradient(x, i, j)


def probing_vectors(model: MLPClassifier, classes):
    return model.probing_vectors(classes)


def _loss_and_grad(logits, y, loss):
    """Mean loss over the batch and its gradient with respect to the logits.

    ``nll`` is the negative log-likelihood of a log-softmax output head;
    since the head is applied here rather than stored as a layer, its value
    coincides with ``cross_entropy``.
    """
    if loss not in LOSSES:
        raise DomainError(f"unsupported loss {loss!r}")
    n = logits.shape[0]
    rows = np.arange(n)
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    log_probs = shifted - log_norm[:, None]
    value = float(-np.mean(log_probs[rows, y]))
    grad = np.exp(log_probs)
    grad[rows, y] -= 1.0
    return value, grad / n


def _backprop(layers, xb, y, loss):
    acts = [xb]
    pres = []
    h = xb
    for layer in layers:
        z = h @ layer.weight.T + layer.bias
        pres.append(z)
        h = _activate(z, layer.activation)
        acts.append(h)
    value, g = _loss_and_grad(h, y, loss)
    grads = [None] * len(layers)
    for idx in range(len(layers) - 1, -1, -1):
        layer = layers[idx]
        if layer.activation == "relu":
            g = g * (pres[idx] > 0.0)
        grads[idx] = (g.T @ acts[idx], g.sum(axis=0))
        if idx:
            g = g @ layer.weight
    return value, grads


def training_accuracy(model: MLPClassifier, X, y_idx) -> float:
    pred = np.argmax(model.forward(X), axis=1)
    return float(np.mean(pred == y_idx))


def train(model: MLPClassifier, data, y_idx=None, config: TrainConfig | None = None) -> TrainReport:
    """Train ``model.layers_`` in place with Adam over shuffled mini-batches.

    ``data`` is either a :class:`Dataset` (labels taken from it) or an input
    matrix accompanied by ``y_idx`` holding class indices ``0..k-1``.
    """
    check_is_fitted(model, "layers_")
    if isinstance(data, Dataset):
        X, y_idx = data.inputs, data.labels
    else:
        X = np.asarray(data, dtype=np.float64)
    y_idx = np.asarray(y_idx, dtype=np.int64)
    if X.ndim != 2 or X.shape[1] != model.input_dim:
        raise DimensionError(f"dataset dimension does not match model input {model.input_dim}")
    if y_idx.shape != (X.shape[0],):
        raise DimensionError("labels must have one entry per input")
    if y_idx.min() < 0 or y_idx.max() >= model.output_dim:
        raise DomainError("labels exceed the model's output dimension")
    config = config or model.train_config()

    rng = as_generator(int(config.seed)).spawn(1)[0]
    beta1, beta2 = config.adam_betas
    lr, eps = config.learning_rate, config.adam_eps
    params = [p for layer in model.layers_ for p in (layer.weight, layer.bias)]
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    n = X.shape[0]
    batch = resolve_batch_size(config.batch_size, n)
    step = 0
    curve = []
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, batch):
            idx = order[start:start + batch]
            value, grads = _backprop(model.layers_, X[idx], y_idx[idx], config.loss)
            if not np.isfinite(value):
                raise DivergenceError(f"loss became non-finite in epoch {epoch}", epoch=epoch)
            total += value * idx.size
            step += 1
            flat = [g for pair in grads for g in pair]
            c1 = 1.0 - beta1**step
            c2 = 1.0 - beta2**step
            for p, g, mk, vk in zip(params, flat, m, v):
                mk *= beta1
                mk += (1.0 - beta1) * g
                vk *= beta2
                vk += (1.0 - beta2) * g * g
                p -= lr * (mk / c1) / (np.sqrt(vk / c2) + eps)
        curve.append(total / n)
    return TrainReport(training_accuracy(model, X, y_idx), curve)


def ideal_two_layer(dataset: Dataset, rng=0, hidden_width=None) -> MLPClassifier:
    """Two identity layers with ``H_2 H_1 X = I`` for the orthogonal-label problem.

    ``H_1`` is an ``m x d`` standard Gaussian matrix (``m`` defaults to ``2d``)
    and ``H_2 = R^{-1} Q_2^T R_H^{-1} Q_1^T`` from the QR factors
    ``X = Q_2 R`` and ``H_1 = Q_1 R_H``, so ``f(x_i) = e_i``.
    """
    if dataset.kind not in ("orthogonal_label", "generative_chain"):
        raise DomainError(f"ideal_two_layer needs an orthogonal-label dataset, got {dataset.kind}")
    x = dataset.generator.a_matrix
    d = x.shape[0]
    if np.linalg.cond(x) >= 1e12:
        raise SingularMatrixError("data matrix X is numerically singular")
    m = 2 * d if hidden_width is None else int(hidden_width)
    if m < d:
        raise DimensionError(f"hidden width {m} must be at least d={d}")
    h1 = sample_gaussian_matrix(as_generator(rng), m, d)
    q2, r = qr_decompose(x)
    q1, r_h = qr_decompose(h1)
    inner = solve_triangular(r_h, q1.T, lower=False)  # R_H^{-1} Q_1^T
    h2 = solve_triangular(r, q2.T @ inner, lower=False)
    layers = [
        Layer(h1, np.zeros(m), "identity"),
        Layer(h2, np.zeros(d), "identity"),
    ]
    return MLPClassifier.from_layers(layers)


def ideal_hypercube_net(dataset: Dataset) -> MLPClassifier:
    """Linear two-logit net ``f_{+1}(x) = w.x``, ``f_{-1}(x) = -w.x``, ``w`` = last row of ``A^{-1}``.

    Row 0 is the ``+1`` class (class id 0), row 1 the ``-1`` class.
    """
    if dataset.kind != "hypercube":
        raise DomainError(f"ideal_hypercube_net needs a hypercube dataset, got {dataset.kind}")
    a = dataset.generator.a_matrix
    if np.linalg.cond(a) >= 1e12:
        raise SingularMatrixError("A is numerically singular")
    q, r = qr_decompose(a)
    w = q[:, -1] / r[-1, -1]
    return MLPClassifier.from_layers([Layer(np.vstack([w, -w]), np.zeros(2), "identity")])
