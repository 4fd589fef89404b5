"""Feed-forward surrogate: contractive-autoencoder pretraining plus
regression finetuning, in plain numpy.

The network maps a raw spectrum to an approximation of the corrected
spectrum, one output unit per wavenumber: sigmoid hidden layers, linear
output. Hidden layers are pretrained bottom-up as contractive
autoencoders on raw spectra only; finetuning then minimizes the
root-mean-square regression error against corrector outputs.

Training is plain minibatch gradient descent with a fixed learning rate;
everything is deterministic given (config, seed, data).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.special import expit

from . import rng as rngmod
from .core import Spectrum
from .errors import ConfigError, DimensionError, FormatError

MODEL_FORMAT = "miesurrogate-model"
MODEL_VERSION = 1


@dataclass(frozen=True, eq=False)
class LayerParams:
    weights: np.ndarray   # (out_dim, in_dim)
    bias: np.ndarray      # (out_dim,)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        b = np.asarray(self.bias, dtype=np.float64)
        if w.ndim != 2 or b.shape != (w.shape[0],):
            raise DimensionError(
                f"inconsistent layer shapes {w.shape} / {b.shape}")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise ValueError("layer parameters must be finite")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]


@dataclass(frozen=True)
class NetworkConfig:
    layer_sizes: tuple               # input, hidden..., output
    hidden_activation: str = "sigmoid"
    output_activation: str = "linear"
    contraction_lambda: float = 1e-4
    dropout_p: float = 0.5           # used only when dropout is activated
    learning_rate: float = 1e-3
    epochs_pretrain: int = 12
    epochs_finetune: int = 40
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        if len(sizes) < 3:
            raise ConfigError("need input, at least one hidden, and output size")
        if any(s < 1 for s in sizes):
            raise ConfigError("layer sizes must be positive")
        if sizes[0] != sizes[-1]:
            raise ConfigError("input and output sizes must both equal the grid length")
        if self.hidden_activation != "sigmoid":
            raise ConfigError("only sigmoid hidden layers are supported")
        if self.output_activation != "linear":
            raise ConfigError("only a linear output layer is supported")
        if not 0.0 <= self.dropout_p < 1.0:
            raise ConfigError("dropout_p must lie in [0, 1)")
        if self.contraction_lambda < 0.0:
            raise ConfigError("contraction_lambda must be >= 0")
        for name in ("epochs_pretrain", "epochs_finetune"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        if self.batch_size < 1 or self.learning_rate <= 0.0:
            raise ConfigError("batch_size must be >= 1 and learning_rate > 0")
        object.__setattr__(self, "layer_sizes", sizes)

    def to_dict(self) -> dict:
        return {
            "layer_sizes": list(self.layer_sizes),
            "hidden_activation": self.hidden_activation,
            "output_activation": self.output_activation,
            "contraction_lambda": self.contraction_lambda,
            "dropout_p": self.dropout_p,
            "learning_rate": self.learning_rate,
            "epochs_pretrain": self.epochs_pretrain,
            "epochs_finetune": self.epochs_finetune,
            "batch_size": self.batch_size,
            "seed": self.seed,
        }


def default_network_config(n_bands: int, seed: int = 0) -> NetworkConfig:
    """Symmetric bottleneck n-256-128-256-n."""
    return NetworkConfig(layer_sizes=(n_bands, 256, 128, 256, n_bands),
                         seed=seed)


@dataclass(frozen=True, eq=False)
class ModelParameters:
    """Layer stack plus config and provenance.

    A model fresh out of pretraining carries only the hidden (encoder)
    layers; finetuning appends the linear output layer. ``is_complete``
    tells the two states apart.
    """

    layers: tuple
    config: NetworkConfig
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        layers = tuple(self.layers)
        sizes = self.config.layer_sizes
        if len(layers) not in (len(sizes) - 2, len(sizes) - 1):
            raise DimensionError(
                f"{len(layers)} layers do not fit size chain {sizes}")
        for i, layer in enumerate(layers):
            if (layer.in_dim, layer.out_dim) != (sizes[i], sizes[i + 1]):
                raise DimensionError(
                    f"layer {i} is {layer.in_dim}->{layer.out_dim}, "
                    f"expected {sizes[i]}->{sizes[i + 1]}")
        object.__setattr__(self, "layers", layers)

    @property
    def is_complete(self) -> bool:
        return len(self.layers) == len(self.config.layer_sizes) - 1

    @property
    def n_inputs(self) -> int:
        return self.config.layer_sizes[0]


# nominal standard deviation of sigmoid codes, used to scale the init of
# layers that consume them
SIGMOID_CODE_STD = 0.25


def init_layer(rng: np.random.Generator, in_dim: int, out_dim: int,
               input_scale: float = 1.0) -> LayerParams:
    """Uniform +-sqrt(6/(fan_in+fan_out))/input_scale weights, zero bias.

    The balanced-fan-in/out limit assumes unit-variance inputs; dividing
    by the actual input scale keeps pre-activation variance in the
    responsive part of the sigmoid. Without it, the low-variance codes of
    deeper layers collapse to near-constant activations.
    """
    limit = np.sqrt(6.0 / (in_dim + out_dim)) / max(float(input_scale), 1e-3)
    return LayerParams(rng.uniform(-limit, limit, size=(out_dim, in_dim)),
                       np.zeros(out_dim))


def forward_matrix(model: ModelParameters, X: np.ndarray,
                   dropout_p: float = 0.0,
                   rng: np.random.Generator | None = None) -> np.ndarray:
    """Batched forward pass; rows of X are spectra.

    With ``dropout_p`` > 0 each hidden activation is masked by independent
    Bernoulli(1-p) draws and rescaled by 1/(1-p) (inverted dropout), one
    mask per layer drawn in layer order from ``rng``.
    """
    if not model.is_complete:
        raise ConfigError("model has no output layer yet (pretraining only)")
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.n_inputs:
        raise DimensionError(
            f"input width {X.shape} does not match model input "
            f"size {model.n_inputs}")
    a = X
    for layer in model.layers[:-1]:
        a = expit(a @ layer.weights.T + layer.bias)
        if dropout_p > 0.0:
            keep = rng.random(a.shape) >= dropout_p
            a = a * keep / (1.0 - dropout_p)
    out = model.layers[-1]
    return a @ out.weights.T + out.bias


def forward(model: ModelParameters, x: Spectrum) -> Spectrum:
    """Plain deterministic inference for one spectrum."""
    if len(x) != model.n_inputs:
        raise DimensionError(
            f"spectrum length {len(x)} does not match model input "
            f"size {model.n_inputs}")
    out = forward_matrix(model, x.absorbance[None, :])
    return Spectrum(x.grid, out[0])


def encode(model: ModelParameters, X: np.ndarray) -> np.ndarray:
    """Activations of the deepest hidden layer."""
    a = np.asarray(X, dtype=np.float64)
    hidden = model.layers[:-1] if model.is_complete else model.layers
    for layer in hidden:
        a = expit(a @ layer.weights.T + layer.bias)
    return a


def _forward_acts(layers, X):
    acts = [X]
    a = X
    for layer in layers[:-1]:
        a = expit(a @ layer.weights.T + layer.bias)
        acts.append(a)
    out = layers[-1]
    acts.append(a @ out.weights.T + out.bias)
    return acts


# Below this the 1/rmse factor in the root-loss gradient is floored;
# without it a near-perfect batch fit turns float noise into unit-scale
# gradient directions.
_RMSE_GRAD_FLOOR = 1e-8


def _loss_grad_out(pred, Y, loss):
    n = pred.size
    diff = pred - Y
    mse = float((diff * diff).sum() / n)
    if loss == "mse":
        return mse, (2.0 / n) * diff
    if loss == "rmse":
        value = float(np.sqrt(mse))
        return value, diff / (n * max(value, _RMSE_GRAD_FLOOR))
    raise ConfigError(f"unknown loss {loss!r}")


def backprop_gradients(model: ModelParameters, inputs: np.ndarray,
                       targets: np.ndarray, loss: str = "rmse"):
    """Exact analytic gradients of the configured loss over one batch.

    Returns ``(loss_value, grads)`` where grads mirrors the layer list as
    (d_weights, d_bias) pairs.
    """
    X = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    Y = np.atleast_2d(np.asarray(targets, dtype=np.float64))
    if X.shape != Y.shape or X.shape[1] != model.n_inputs:
        raise DimensionError("batch shapes do not match the model")
    acts = _forward_acts(model.layers, X)
    value, delta = _loss_grad_out(acts[-1], Y, loss)
    grads = [None] * len(model.layers)
    for li in range(len(model.layers) - 1, -1, -1):
        a_prev = acts[li]
        grads[li] = (delta.T @ a_prev, delta.sum(axis=0))
        if li > 0:
            h = acts[li]
            delta = (delta @ model.layers[li].weights) * (h * (1.0 - h))
    return value, grads


def cae_loss_and_grads(X: np.ndarray, enc: LayerParams, dec: LayerParams,
                       contraction_lambda: float):
    """Contractive autoencoder batch loss and its exact gradients.

    Per-example loss: squared reconstruction error plus
    lambda * ||J_enc||_F^2 with the sigmoid closed form
    sum_j (h_j(1-h_j))^2 * sum_i W_ji^2; the batch value is the mean.
    Decoder is linear (spectra are real-valued).
    """
    B = X.shape[0]
    H = expit(X @ enc.weights.T + enc.bias)
    R = H @ dec.weights.T + dec.bias
    diff = R - X
    loss = float((diff * diff).sum() / B)

    d_r = (2.0 / B) * diff
    g_wd = d_r.T @ H
    g_bd = d_r.sum(axis=0)
    d_h = d_r @ dec.weights
    act = H * (1.0 - H)
    d_z = d_h * act
    g_we = d_z.T @ X
    g_be = d_z.sum(axis=0)

    if contraction_lambda > 0.0:
        row_sq = (enc.weights * enc.weights).sum(axis=1)     # S_j
        act_sq = act * act
        loss += contraction_lambda * float((act_sq @ row_sq).sum() / B)
        scale = 2.0 * contraction_lambda / B
        curvature = act_sq * (1.0 - 2.0 * H)                 # a^2 (1-2h)
        g_we += scale * (act_sq.sum(axis=0)[:, None] * enc.weights
                         + row_sq[:, None] * (curvature.T @ X))
        g_be += scale * row_sq * curvature.sum(axis=0)

    return loss, g_we, g_be, g_wd, g_bd


def cae_pretrain_layer(inputs: np.ndarray, in_dim: int, hid_dim: int,
                       contraction_lambda: float, epochs: int,
                       learning_rate: float = 0.01, batch_size: int = 32,
                       seed: int = 0, stream_id: int = 0):
    """Train one contractive autoencoder layer by minibatch descent.

    Returns (encoder, decoder, losses) with losses[0] the full-set loss
    before training and one full-set entry per epoch after it.
    """
    X = np.asarray(inputs, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != in_dim:
        raise ConfigError(f"inputs {X.shape} do not match in_dim {in_dim}")
    if hid_dim < 1:
        raise ConfigError("hid_dim must be >= 1")
    rng = rngmod.stream(seed, rngmod.DOMAIN_PRETRAIN, stream_id)
    enc = init_layer(rng, in_dim, hid_dim,
                     input_scale=float(X.std(axis=0).mean()))
    dec = init_layer(rng, hid_dim, in_dim, input_scale=SIGMOID_CODE_STD)
    we, be = enc.weights.copy(), enc.bias.copy()
    wd, bd = dec.weights.copy(), dec.bias.copy()

    def full_loss():
        return cae_loss_and_grads(
            X, LayerParams(we, be), LayerParams(wd, bd),
            contraction_lambda)[0]

    losses = [full_loss()]
    n = X.shape[0]
    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            batch = X[order[start:start + batch_size]]
            _, g_we, g_be, g_wd, g_bd = cae_loss_and_grads(
                batch, LayerParams(we, be), LayerParams(wd, bd),
                contraction_lambda)
            we -= learning_rate * g_we
            be -= learning_rate * g_be
            wd -= learning_rate * g_wd
            bd -= learning_rate * g_bd
        losses.append(full_loss())
    return LayerParams(we, be), LayerParams(wd, bd), losses


def _fingerprint(*arrays) -> str:
    h = hashlib.sha256()
    for a in arrays:
        h.update(np.ascontiguousarray(a).tobytes())
    return h.hexdigest()[:16]


def stack_pretrain(raw_matrix: np.ndarray, config: NetworkConfig) -> ModelParameters:
    """Layer-wise unsupervised pretraining of the hidden stack.

    Consumes raw spectra only; layer l+1 trains on layer l's encodings and
    the decoders are discarded. The result has no output layer.
    """
    X = np.asarray(raw_matrix, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != config.layer_sizes[0]:
        raise ConfigError(
            f"raw matrix width {X.shape} does not match input size "
            f"{config.layer_sizes[0]}")
    layers = []
    traces = []
    for li, hid in enumerate(config.layer_sizes[1:-1]):
        enc, _dec, losses = cae_pretrain_layer(
            X, X.shape[1], hid, config.contraction_lambda,
            config.epochs_pretrain, config.learning_rate,
            config.batch_size, seed=config.seed, stream_id=li)
        layers.append(enc)
        traces.append(losses)
        X = expit(X @ enc.weights.T + enc.bias)
    provenance = {
        "pretrained": True,
        "finetuned": False,
        "data_fingerprint": _fingerprint(raw_matrix),
        "pretrain_loss_traces": traces,
    }
    return ModelParameters(tuple(layers), config, provenance)


# rank cutoff for the output-layer least squares; without it the
# minimum-norm solution rides near-collinear code directions with huge
# weights and the first SGD step destroys the fit
_LSQ_INIT_COND = 1e-3


def _lsq_output_layer(H: np.ndarray, Y: np.ndarray) -> LayerParams:
    # one-shot least-squares map from deepest encodings to targets;
    # stabilizes early finetuning compared to a random linear head
    A = np.column_stack([H, np.ones(H.shape[0])])
    sol = sla.lstsq(A, Y, cond=_LSQ_INIT_COND, lapack_driver="gelsy",
                    check_finite=False)[0]
    return LayerParams(sol[:-1].T, sol[-1])


def finetune_regression(model: ModelParameters | None,
                        dataset, config: NetworkConfig) -> ModelParameters:
    """Supervised finetuning against corrected targets.

    ``model`` may be a pretrained hidden stack, a complete model, or None
    for random initialization. A missing output layer is initialized by a
    least-squares fit of the deepest encodings to the targets. The
    finetuning loss trace (full training set, RMSE) lands in
    ``provenance["finetune_loss_trace"]``.
    """
    X = dataset.raw_matrix()
    if dataset.corrected is None:
        raise ConfigError("finetuning needs corrected target spectra")
    Y = dataset.corrected_matrix()
    sizes = config.layer_sizes
    if X.shape[1] != sizes[0] or Y.shape[1] != sizes[-1]:
        raise ConfigError(
            f"dataset width {X.shape[1]}/{Y.shape[1]} does not match the "
            f"configured sizes {sizes[0]}/{sizes[-1]}")
    rng = rngmod.stream(config.seed, rngmod.DOMAIN_FINETUNE)

    pretrain_traces = None
    if model is None:
        layers = []
        scale = float(X.std(axis=0).mean())
        for i in range(len(sizes) - 2):
            layers.append(init_layer(rng, sizes[i], sizes[i + 1],
                                     input_scale=scale))
            scale = SIGMOID_CODE_STD
        pretrained = False
    else:
        if model.config.layer_sizes != sizes:
            raise ConfigError("model layer sizes do not match the config")
        layers = list(model.layers)
        pretrained = bool(model.provenance.get("pretrained", False))
        pretrain_traces = model.provenance.get("pretrain_loss_traces")

    if len(layers) == len(sizes) - 2:
        stack = ModelParameters(tuple(layers), config,
                                {"pretrained": pretrained})
        layers.append(_lsq_output_layer(encode(stack, X), Y))

    weights = [(l.weights.copy(), l.bias.copy()) for l in layers]

    def as_model():
        return ModelParameters(
            tuple(LayerParams(w, b) for w, b in weights), config, {})

    def full_loss():
        pred = forward_matrix(as_model(), X)
        return float(np.sqrt(((pred - Y) ** 2).mean()))

    losses = [full_loss()]
    n = X.shape[0]
    for _ in range(config.epochs_finetune):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            _, grads = backprop_gradients(as_model(), X[idx], Y[idx],
                                          loss="rmse")
            for (w, b), (gw, gb) in zip(weights, grads):
                w -= config.learning_rate * gw
                b -= config.learning_rate * gb
        losses.append(full_loss())

    provenance = {
        "pretrained": pretrained,
        "finetuned": True,
        "data_fingerprint": _fingerprint(X, Y),
        "finetune_loss_trace": losses,
    }
    if pretrain_traces is not None:
        provenance["pretrain_loss_traces"] = pretrain_traces
    return ModelParameters(tuple(LayerParams(w, b) for w, b in weights),
                           config, provenance)


def save_model(model: ModelParameters, path) -> None:
    """Single JSON document; float repr keeps every weight bit-exact."""
    doc = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "config": model.config.to_dict(),
        "provenance": model.provenance,
        "layer_dims": [[l.out_dim, l.in_dim] for l in model.layers],
        "layers": [{"weights": l.weights.tolist(), "bias": l.bias.tolist()}
                   for l in model.layers],
    }
    with open(path, "w") as f:
        json.dump(doc, f)


def load_model(path) -> ModelParameters:
    with open(path) as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format") != MODEL_FORMAT:
        raise FormatError(f"{path}: not a {MODEL_FORMAT} document")
    if doc.get("version") != MODEL_VERSION:
        raise FormatError(f"{path}: unsupported version {doc.get('version')}")
    try:
        config = NetworkConfig(**doc["config"])
        dims = doc["layer_dims"]
        layers = []
        for spec, layer in zip(dims, doc["layers"], strict=True):
            w = np.asarray(layer["weights"], dtype=np.float64)
            b = np.asarray(layer["bias"], dtype=np.float64)
            if list(w.shape) != spec or b.shape != (spec[0],):
                raise FormatError(
                    f"{path}: layer dims {w.shape} disagree with header {spec}")
            layers.append(LayerParams(w, b))
        model = ModelParameters(tuple(layers), config,
                                doc.get("provenance", {}))
    except FormatError:
        raise
    except (KeyError, TypeError, ValueError, ConfigError,
            DimensionError) as exc:
        raise FormatError(f"{path}: malformed model document: {exc}") from exc
    return model
