"""
Autoencoder Module
------------------
Scene-specific compression of D-dim language features to C-dim latents.

Encoder D -> hidden... -> C and decoder C -> reversed hidden... -> D are
fully connected layers with leaky rectifiers (slope 0.01) between them and
identity outputs. Decoded features are L2-normalized.

Training minimizes a transient-uncertainty-weighted L1 reconstruction:

    loss = mean_m || w_m * decode(encode(w_m F_m)) - w_m F_m ||_1,   w = 1 - U^T

so a sample with w = 0 contributes neither loss nor gradient.

Params file ("MAE1"), little endian:

    magic b"MAE1" | u32 layers | u32 encoder layers
    layers x (u32 rows, u32 cols)
    layers x row-major f32 weights (rows x cols, input-major)
    layers x f32 biases (cols)
"""

import csv
import os
import struct
from dataclasses import dataclass, field

import numpy as np
from tqdm import tqdm

from wildscene.seeding import as_f32, rng_for

from .optim import Adam
from .uncertainty import UncertaintyMap, occluder_mask

MAGIC = b"MAE1"
LEAK = 0.01
NORM_FLOOR = 1e-12
DEFAULT_HIDDEN = (256, 128, 32)


class DivergenceError(FloatingPointError):
    """
    Raised when a training loss stops being finite.
    """

    def __init__(self, step: int, loss: float, what: str = "epoch"):
        self.step = step
        self.loss = loss
        super().__init__(f"Training diverged at {what} {step}: loss = {loss}")


@dataclass
class MlpParams:
    """
    Parameters:
        weights (list[np.ndarray]): (in, out) matrix per layer, encoder layers first
        biases (list[np.ndarray]): (out,) vector per layer
        encoder_layers (int): How many leading layers form the encoder
    """
    weights: list
    biases: list
    encoder_layers: int

    def __post_init__(self):
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ValueError("Need one bias per weight matrix and at least one layer")
        if not 0 < self.encoder_layers < len(self.weights):
            raise ValueError(f"encoder_layers must split {len(self.weights)} layers, got {self.encoder_layers}")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.shape != (w.shape[1],):
                raise ValueError(f"Layer {i}: weight {w.shape} and bias {b.shape} do not match")
            if i and w.shape[0] != self.weights[i - 1].shape[1]:
                raise ValueError(f"Layer {i} input {w.shape[0]} does not chain from {self.weights[i - 1].shape[1]}")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ValueError(f"Layer {i} has non-finite parameters")
        if self.input_dim != self.weights[-1].shape[1]:
            raise ValueError("Decoder output must match encoder input width")

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[0]

    @property
    def latent_dim(self) -> int:
        return self.weights[self.encoder_layers - 1].shape[1]

    @property
    def encoder(self) -> list:
        return list(zip(self.weights[:self.encoder_layers], self.biases[:self.encoder_layers]))

    @property
    def decoder(self) -> list:
        return list(zip(self.weights[self.encoder_layers:], self.biases[self.encoder_layers:]))

    def arrays(self) -> list:
        return self.weights + self.biases

    def copy(self) -> "MlpParams":
        return MlpParams([w.copy() for w in self.weights], [b.copy() for b in self.biases], self.encoder_layers)

    def as_f32(self) -> "MlpParams":
        return MlpParams([as_f32(w) for w in self.weights], [as_f32(b) for b in self.biases], self.encoder_layers)


@dataclass
class AeTrainConfig:
    """
    Parameters:
        epochs (int): Passes over the training set
        learning_rate (float): Adam step size
        batch_size (int): Samples per update
        seed (int): Seed of initialization and shuffling
        tau_u (float): Transient uncertainty above which pixels are dropped
        hidden (list[int]): Hidden widths of the encoder (decoder mirrors them)
    """
    epochs: int = 100
    learning_rate: float = 1e-4
    batch_size: int = 256
    seed: int = 0
    tau_u: float = 0.9
    hidden: list = field(default_factory=lambda: list(DEFAULT_HIDDEN))

    def validate(self):
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        if self.learning_rate < 0:
            raise ValueError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if not 0.0 <= self.tau_u <= 1.0:
            raise ValueError(f"tau_u must be in [0, 1], got {self.tau_u}")


def init_params(D: int, C: int, hidden: list, seed: int) -> MlpParams:
    """
    Glorot-uniform weights and zero biases for a D -> C -> D autoencoder.

    Parameters:
        D (int): Feature width
        C (int): Latent width
        hidden (list[int]): Encoder hidden widths, mirrored by the decoder
        seed (int): Initialization seed

    Returns:
        MlpParams
    """
    if not D >= C >= 1:
        raise ValueError(f"Need D >= C >= 1, got D={D}, C={C}")
    if any(h < 1 for h in hidden):
        raise ValueError(f"Hidden widths must be positive, got {hidden}")

    enc = [D] + list(hidden) + [C]
    dec = [C] + list(hidden)[::-1] + [D]
    rng = rng_for(seed, "autoencoder-init")

    weights, biases = [], []
    for dims in (enc, dec):
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            weights.append(as_f32(rng.uniform(-limit, limit, (fan_in, fan_out))))
            biases.append(np.zeros(fan_out))
    return MlpParams(weights, biases, encoder_layers=len(enc) - 1)


def _forward(layers: list, x: np.ndarray) -> tuple:
    """
    Run a layer stack; returns the output and the cache needed for backprop.
    """
    inputs, pre = [], []
    h = x
    for i, (w, b) in enumerate(layers):
        inputs.append(h)
        a = h @ w + b
        pre.append(a)
        h = a if i == len(layers) - 1 else np.where(a > 0, a, LEAK * a)
    return h, (inputs, pre)


def _backward(layers: list, cache: tuple, grad_out: np.ndarray) -> tuple:
    inputs, pre = cache
    grad_w, grad_b = [None] * len(layers), [None] * len(layers)
    g = grad_out
    for i in reversed(range(len(layers))):
        if i != len(layers) - 1:
            g = g * np.where(pre[i] > 0, 1.0, LEAK)
        grad_w[i] = inputs[i].T @ g
        grad_b[i] = g.sum(axis=0)
        g = g @ layers[i][0].T
    return grad_w, grad_b, g


def _normalize(z: np.ndarray) -> tuple:
    norms = np.linalg.norm(z, axis=1, keepdims=True)
    safe = norms >= NORM_FLOOR
    return np.where(safe, z / np.where(safe, norms, 1.0), z), norms, safe


def _as_batch(x: np.ndarray, width: int, name: str) -> tuple:
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.ndim != 2 or x.shape[1] != width:
        raise ValueError(f"{name} expects width {width}, got shape {x.shape}")
    return x, single


def encode(p: MlpParams, features: np.ndarray) -> np.ndarray:
    """
    (D,) or (M, D) features to (C,) or (M, C) latents.
    """
    x, single = _as_batch(features, p.input_dim, "encode")
    out, _ = _forward(p.encoder, x)
    return out[0] if single else out


def decode(p: MlpParams, latents: np.ndarray) -> np.ndarray:
    """
    (C,) or (M, C) latents to unit-norm (D,) or (M, D) features.

    Outputs with norm below 1e-12 are returned unnormalized.
    """
    z, single = _as_batch(latents, p.latent_dim, "decode")
    out, _ = _forward(p.decoder, z)
    out, _, _ = _normalize(out)
    return out[0] if single else out


def encode_map(p: MlpParams, features: np.ndarray) -> np.ndarray:
    """
    Encode an (H, W, D) map into (H, W, C).
    """
    H, W, D = features.shape
    return encode(p, features.reshape(H * W, D)).reshape(H, W, p.latent_dim)


def decode_map(p: MlpParams, latents: np.ndarray) -> np.ndarray:
    """
    Decode an (H, W, C) map into (H, W, D).
    """
    H, W, C = latents.shape
    return decode(p, latents.reshape(H * W, C)).reshape(H, W, p.input_dim)


def ae_loss(p: MlpParams, features: np.ndarray, weights: np.ndarray = None) -> tuple:
    """
    Weighted L1 reconstruction loss and its parameter gradients.

    Parameters:
        p (MlpParams): Autoencoder
        features (np.ndarray): (M, D) samples
        weights (np.ndarray): (M,) per-sample weights in [0, 1], default 1

    Returns:
        tuple: (loss float, gradients aligned with p.arrays())
    """
    F, _ = _as_batch(features, p.input_dim, "ae_loss")
    M = F.shape[0]
    w = np.ones(M) if weights is None else np.asarray(weights, dtype=np.float64).reshape(-1)
    if w.shape != (M,):
        raise ValueError(f"Expected {M} weights, got {w.shape}")
    if np.any(w < 0) or np.any(w > 1):
        raise ValueError("Sample weights must lie in [0, 1]")

    target = w[:, np.newaxis] * F
    latent, enc_cache = _forward(p.encoder, target)
    raw, dec_cache = _forward(p.decoder, latent)
    unit, norms, safe = _normalize(raw)
    residual = w[:, np.newaxis] * unit - target
    loss = float(np.abs(residual).sum() / M)

    g_unit = w[:, np.newaxis] * np.sign(residual) / M
    g_raw = np.where(safe, (g_unit - unit * np.sum(unit * g_unit, axis=1, keepdims=True)) / np.where(safe, norms, 1.0),
                     g_unit)
    dec_w, dec_b, g_latent = _backward(p.decoder, dec_cache, g_raw)
    enc_w, enc_b, _ = _backward(p.encoder, enc_cache, g_latent)
    return loss, enc_w + dec_w + enc_b + dec_b


def training_set(features: list, transient: list = None, tau_u: float = 0.9, stride: int = 1) -> tuple:
    """
    Flatten original-photo feature maps into autoencoder samples.

    Pixels whose normalized transient uncertainty exceeds tau_u are dropped
    and the rest are weighted by 1 - U^T. Without uncertainty maps every
    pixel is kept with weight 1.

    Parameters:
        features (list[np.ndarray]): (H, W, D) maps
        transient (list[UncertaintyMap]): Normalized U^T per map, or None
        tau_u (float): Exclusion threshold
        stride (int): Keep every stride-th pixel in each direction

    Returns:
        tuple: ((M, D) samples, (M,) weights)
    """
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    if transient is not None and len(transient) != len(features):
        raise ValueError("Need one transient uncertainty map per feature map")

    samples, weights = [], []
    for i, f in enumerate(features):
        f = np.asarray(f, dtype=np.float64)[::stride, ::stride]
        if transient is None:
            keep = np.ones(f.shape[:2], dtype=bool)
            w = np.ones(f.shape[:2])
        else:
            u: UncertaintyMap = transient[i]
            keep = ~occluder_mask(u, tau_u)[::stride, ::stride]
            w = 1.0 - u.values[::stride, ::stride]
        samples.append(f[keep])
        weights.append(w[keep])

    samples = np.concatenate(samples) if samples else np.zeros((0, 0))
    if samples.shape[0] == 0:
        raise ValueError("Autoencoder training set is empty after transient exclusion")
    return samples, np.concatenate(weights)


def train_ae(features: np.ndarray, weights: np.ndarray, cfg: AeTrainConfig, C: int,
             init: MlpParams = None, verbose: bool = False) -> tuple:
    """
    Train the autoencoder with Adam over seeded shuffles of the samples.

    Parameters:
        features (np.ndarray): (M, D) samples from the original photos
        weights (np.ndarray): (M,) sample weights 1 - U^T
        cfg (AeTrainConfig): Hyperparameters
        C (int): Latent width
        init (MlpParams): Starting point; default init_params(D, C, cfg.hidden, cfg.seed)
        verbose (bool): Show a progress bar

    Returns:
        tuple: (MlpParams rounded to float32, per-epoch mean loss list)

    Raises:
        DivergenceError when a batch loss is not finite
    """
    cfg.validate()
    features = np.asarray(features, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    if features.ndim != 2 or features.shape[0] == 0:
        raise ValueError(f"Need a non-empty (M, D) training set, got {features.shape}")

    params = init.copy() if init is not None else init_params(features.shape[1], C, cfg.hidden, cfg.seed)
    arrays = params.arrays()
    optimizer = Adam(arrays, lr=cfg.learning_rate)
    rng = rng_for(cfg.seed, "autoencoder-shuffle")
    M = features.shape[0]

    curve = []
    bar = tqdm(range(cfg.epochs), desc="autoencoder", disable=not verbose, leave=False)
    for epoch in bar:
        order = rng.permutation(M)
        total = 0.0
        for start in range(0, M, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            loss, grads = ae_loss(params, features[idx], weights[idx])
            if not np.isfinite(loss):
                raise DivergenceError(epoch, loss)
            optimizer.step(grads)
            total += loss * len(idx)
        curve.append(total / M)
        bar.set_postfix(loss=f"{curve[-1]:.5f}")

    return params.as_f32(), curve


def params_to_bytes(p: MlpParams) -> bytes:
    parts = [MAGIC, struct.pack("<II", len(p.weights), p.encoder_layers)]
    parts += [struct.pack("<II", *w.shape) for w in p.weights]
    parts += [np.ascontiguousarray(w, dtype="<f4").tobytes() for w in p.weights]
    parts += [np.ascontiguousarray(b, dtype="<f4").tobytes() for b in p.biases]
    return b"".join(parts)


def params_from_bytes(data: bytes) -> MlpParams:
    """
    Raises:
        ValueError on a bad magic or truncated payload
    """
    if data[:4] != MAGIC:
        raise ValueError(f"Not an MAE1 params file (magic {data[:4]!r})")
    if len(data) < 12:
        raise ValueError("Truncated MAE1 header")
    layers, encoder_layers = struct.unpack_from("<II", data, 4)
    offset = 12
    if len(data) < offset + 8 * layers:
        raise ValueError("Truncated MAE1 layer table")
    dims = [struct.unpack_from("<II", data, offset + 8 * i) for i in range(layers)]
    offset += 8 * layers

    expected = offset + 4 * sum(r * c + c for r, c in dims)
    if len(data) != expected:
        raise ValueError(f"MAE1 payload has {len(data)} bytes, expected {expected}")

    weights, biases = [], []
    for r, c in dims:
        weights.append(np.frombuffer(data, dtype="<f4", count=r * c, offset=offset).reshape(r, c).astype(np.float64))
        offset += 4 * r * c
    for _, c in dims:
        biases.append(np.frombuffer(data, dtype="<f4", count=c, offset=offset).astype(np.float64))
        offset += 4 * c
    return MlpParams(weights, biases, encoder_layers)


def save_params(path: str, p: MlpParams):
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as f:
        f.write(params_to_bytes(p))
    os.replace(tmp, path)


def load_params(path: str) -> MlpParams:
    if not os.path.exists(path):
        raise FileNotFoundError(f"Params file '{path}' not found")
    with open(path, "rb") as f:
        return params_from_bytes(f.read())


def save_loss_curve(path: str, curve: list):
    """
    Write the per-epoch loss as CSV (epoch, loss).
    """
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["epoch", "loss"])
        for epoch, loss in enumerate(curve):
            writer.writerow([epoch, repr(float(loss))])
