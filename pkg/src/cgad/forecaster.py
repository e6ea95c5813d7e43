"""Single-step forecaster over a weighted causal graph.

The network lifts each scalar channel to ``residual_channels`` features, then
stacks blocks of gated inception causal convolutions followed by a two-layer
graph convolution over the normalized adjacency, with a residual connection
around each graph convolution. Per-block skip projections collapse the time
axis; their sum feeds a two-layer output head producing one value per node.
Training minimizes mean squared error with Adam and keeps the parameter
snapshot with the lowest validation error.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import (
    ArgumentError,
    DimensionError,
    FormatError,
    NumericError,
)
from .series import NormalizationSpec, WindowBatch

MODEL_FILE_TAG = "cgad-model"
MODEL_FILE_VERSION = "v1"


@dataclass(frozen=True)
class ModelConfig:
    window_w: int = 15
    blocks: int = 3
    residual_channels: int = 16
    skip_channels: int = 32
    gcn_hidden: int = 32
    output_hidden: int = 64
    kernel_sizes: tuple[int, ...] = (2, 3, 5, 6)
    dilation: int = 1
    rng_seed: int = 0

    def __post_init__(self):
        kernels = tuple(sorted(set(int(k) for k in self.kernel_sizes)))
        if not kernels or min(kernels) < 1:
            raise ArgumentError(f"invalid kernel sizes {self.kernel_sizes}")
        object.__setattr__(self, "kernel_sizes", kernels)
        if self.window_w < max(kernels):
            raise ArgumentError(
                f"window_w={self.window_w} must be >= the largest kernel {max(kernels)}"
            )
        if self.blocks < 1:
            raise ArgumentError(f"blocks must be >= 1, got {self.blocks}")
        for name in ("residual_channels", "skip_channels", "gcn_hidden", "output_hidden"):
            if getattr(self, name) < 1:
                raise ArgumentError(f"{name} must be >= 1")
        if self.residual_channels % len(kernels) != 0:
            raise ArgumentError(
                f"residual_channels={self.residual_channels} must be divisible by "
                f"the number of kernel sizes ({len(kernels)})"
            )
        if self.dilation != 1:
            raise ArgumentError("dilation is fixed at 1")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 32
    epochs: int = 10
    optimizer: str = "adam"
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ArgumentError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.epochs < 1:
            raise ArgumentError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ArgumentError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.optimizer != "adam":
            raise ArgumentError(f"unsupported optimizer {self.optimizer!r}")


@dataclass
class ForecastModel:
    config: ModelConfig
    normalized_adjacency: np.ndarray
    parameters: dict[str, Tensor]
    normalization: NormalizationSpec | None = None

    @property
    def n_nodes(self) -> int:
        return self.normalized_adjacency.shape[0]


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    train_mse: float
    val_mse: float


def normalize_adjacency(adjacency) -> np.ndarray:
    """Symmetric degree scaling of the self-loop-augmented adjacency.

    Returns D^(-1/2) (A + I) D^(-1/2) where D is the diagonal of row sums of
    A + I; weighted entries are used as-is and A is not symmetrized.
    """
    a = np.asarray(adjacency, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"adjacency must be square, got shape {a.shape}")
    if (a < 0).any():
        raise ArgumentError("adjacency entries must be nonnegative")
    if np.diag(a).any():
        raise ArgumentError("adjacency diagonal must be zero")
    a_hat = a + np.eye(a.shape[0])
    inv_sqrt = 1.0 / np.sqrt(a_hat.sum(axis=1))
    return inv_sqrt[:, None] * a_hat * inv_sqrt[None, :]


def receptive_field(layers: int, kernel: int) -> int:
    """Input positions seen by one output of ``layers`` stacked convolutions."""
    if layers < 1 or kernel < 1:
        raise ArgumentError(f"need layers >= 1 and kernel >= 1, got {layers}, {kernel}")
    return layers * (kernel - 1) + 1


def required_padding(config: ModelConfig) -> int:
    """Left zero-padding so the final block's time axis reaches length 1."""
    return max(0, receptive_field(config.blocks, max(config.kernel_sizes)) - config.window_w)


def _block_lengths(config: ModelConfig) -> list[int]:
    # temporal length after each block, starting from the padded input
    length = config.window_w + required_padding(config)
    step = max(config.kernel_sizes) - 1
    return [length - step * (i + 1) for i in range(config.blocks)]


def gcn_forward(h, a_norm: np.ndarray, w0: Tensor, w1: Tensor) -> Tensor:
    """Two-layer graph convolution ReLU(A~ ReLU(A~ X W0) W1).

    ``h`` may be a (B, C, N, L) tensor or a plain (N, C) feature matrix.
    """
    if isinstance(h, Tensor) and h.data.ndim == 4:
        t = ad.channel_mix(h, w0)
        t = ad.relu(ad.node_mix(t, a_norm))
        t = ad.channel_mix(t, w1)
        return ad.relu(ad.node_mix(t, a_norm))
    x = h if isinstance(h, Tensor) else Tensor(h)
    if x.data.ndim != 2:
        raise DimensionError(f"expected (N, C) features, got shape {x.data.shape}")
    if x.data.shape[0] != a_norm.shape[0]:
        raise DimensionError(
            f"{x.data.shape[0]} node rows for an adjacency of {a_norm.shape[0]}"
        )
    lifted = ad.reshape(ad.transpose(x, (1, 0)), (1, x.data.shape[1], x.data.shape[0], 1))
    out = gcn_forward(lifted, a_norm, w0, w1)
    return ad.transpose(ad.reshape(out, (out.data.shape[1], out.data.shape[2])), (1, 0))


def inception_forward(z: Tensor, filters: dict[int, Tensor]) -> Tensor:
    """Parallel causal convolutions with several kernel sizes, truncated to the
    shortest branch (aligned on the most recent positions) and concatenated
    along channels.

    The branches are fused into a single convolution: a kernel-k branch padded
    with zero taps beyond position k-1 produces, under the largest kernel,
    exactly its own outputs on the aligned suffix.
    """
    kernels = sorted(filters)
    k_max = max(kernels)
    length = z.data.shape[3]
    if length < k_max:
        raise ArgumentError(f"time length {length} shorter than largest kernel {k_max}")
    bank = ad.concat([ad.pad_last(filters[k], k_max) for k in kernels], axis=0)
    return ad.conv_time(z, bank)


def gated_tc_forward(
    z: Tensor,
    tanh_filters: dict[int, Tensor],
    tanh_bias: Tensor,
    sig_filters: dict[int, Tensor],
    sig_bias: Tensor,
) -> Tensor:
    """tanh(filter path) gated elementwise by sigmoid(gate path)."""
    filt = ad.tanh(ad.bias_add(inception_forward(z, tanh_filters), tanh_bias))
    gate = ad.sigmoid(ad.bias_add(inception_forward(z, sig_filters), sig_bias))
    return ad.mul(filt, gate)


def build_model(
    adjacency, config: ModelConfig, normalization: NormalizationSpec | None = None
) -> ForecastModel:
    """Initialize all parameters uniformly in +-1/sqrt(fan_in), seeded."""
    a_norm = normalize_adjacency(adjacency)
    rng = np.random.default_rng(config.rng_seed)
    params: dict[str, Tensor] = {}

    def init(name: str, shape: tuple[int, ...], fan_in: int):
        bound = 1.0 / math.sqrt(fan_in)
        params[name] = Tensor(rng.uniform(-bound, bound, shape), requires_grad=True)

    rc = config.residual_channels
    branch = rc // len(config.kernel_sizes)
    init("lift.w", (1, rc), 1)
    init("lift.b", (rc,), 1)
    for i, l_out in enumerate(_block_lengths(config)):
        for path in ("tanh", "sig"):
            for k in config.kernel_sizes:
                init(f"block{i}.{path}.k{k}", (branch, rc, k), rc * k)
            init(f"block{i}.{path}.b", (rc,), rc)
        init(f"block{i}.gcn.w0", (rc, config.gcn_hidden), rc)
        init(f"block{i}.gcn.w1", (config.gcn_hidden, rc), config.gcn_hidden)
        init(f"block{i}.skip.w", (config.skip_channels, rc, l_out), rc * l_out)
        init(f"block{i}.skip.b", (config.skip_channels,), rc * l_out)
    init("out.w1", (config.skip_channels, config.output_hidden), config.skip_channels)
    init("out.b1", (config.output_hidden,), config.skip_channels)
    init("out.w2", (config.output_hidden, 1), config.output_hidden)
    init("out.b2", (1,), config.output_hidden)
    return ForecastModel(config, a_norm, params, normalization)


def model_forward(model: ForecastModel, inputs) -> Tensor:
    """Forecast the next value of every node from (B, N, w) history windows."""
    x = np.asarray(inputs, dtype=np.float64)
    if x.ndim != 3:
        raise DimensionError(f"inputs must be (B, N, w), got shape {x.shape}")
    b, n, w = x.shape
    cfg = model.config
    if w != cfg.window_w:
        raise DimensionError(f"window length {w} does not match config window_w={cfg.window_w}")
    if n != model.n_nodes:
        raise DimensionError(f"{n} input nodes for an adjacency of {model.n_nodes}")
    pad = required_padding(cfg)
    if pad:
        x = np.pad(x, ((0, 0), (0, 0), (pad, 0)))
    p = model.parameters

    z = ad.bias_add(ad.channel_mix(Tensor(x[:, None, :, :]), p["lift.w"]), p["lift.b"])
    skip_sum = None
    for i in range(cfg.blocks):
        tanh_filters = {k: p[f"block{i}.tanh.k{k}"] for k in cfg.kernel_sizes}
        sig_filters = {k: p[f"block{i}.sig.k{k}"] for k in cfg.kernel_sizes}
        h = gated_tc_forward(
            z, tanh_filters, p[f"block{i}.tanh.b"], sig_filters, p[f"block{i}.sig.b"]
        )
        s = ad.bias_add(ad.conv_time(h, p[f"block{i}.skip.w"]), p[f"block{i}.skip.b"])
        skip_sum = s if skip_sum is None else ad.add(skip_sum, s)
        g = gcn_forward(h, model.normalized_adjacency, p[f"block{i}.gcn.w0"], p[f"block{i}.gcn.w1"])
        z = ad.add(g, h)  # residual around the graph convolution

    out = ad.relu(skip_sum)
    out = ad.relu(ad.bias_add(ad.channel_mix(out, p["out.w1"]), p["out.b1"]))
    out = ad.bias_add(ad.channel_mix(out, p["out.w2"]), p["out.b2"])
    return ad.reshape(out, (b, n))


def mse_loss(pred: Tensor, target) -> Tensor:
    """Mean over the batch of the squared error summed across nodes."""
    t = np.asarray(target, dtype=np.float64)
    if t.shape != pred.data.shape:
        raise DimensionError(f"prediction {pred.data.shape} vs target {t.shape}")
    diff = ad.sub(pred, Tensor(t))
    return ad.scale(ad.sum_all(ad.mul(diff, diff)), 1.0 / pred.data.shape[0])


def compute_gradients(loss: Tensor, model: ForecastModel) -> None:
    """Reverse pass populating ``grad`` on every model parameter; parameters
    the loss does not depend on receive exact zeros."""
    ad.backward(loss)
    for p in model.parameters.values():
        if p.grad is None:
            p.grad = np.zeros_like(p.data)


class Adam:
    """Bias-corrected Adam over a fixed parameter list."""

    def __init__(self, params: list[Tensor], cfg: TrainConfig):
        self.params = params
        self.cfg = cfg
        self.m = [np.zeros_like(p.data) for p in params]
        self.v = [np.zeros_like(p.data) for p in params]
        self.t = 0

    def step(self):
        cfg = self.cfg
        self.t += 1
        b1c = 1.0 - cfg.adam_beta1**self.t
        b2c = 1.0 - cfg.adam_beta2**self.t
        for i, p in enumerate(self.params):
            if p.grad is None:
                continue
            self.m[i] = cfg.adam_beta1 * self.m[i] + (1 - cfg.adam_beta1) * p.grad
            self.v[i] = cfg.adam_beta2 * self.v[i] + (1 - cfg.adam_beta2) * p.grad**2
            p.data -= cfg.learning_rate * (self.m[i] / b1c) / (
                np.sqrt(self.v[i] / b2c) + cfg.adam_eps
            )

    def zero_grad(self):
        for p in self.params:
            p.grad = None


def dataset_mse(model: ForecastModel, batches: list[WindowBatch]) -> float:
    """Squared-error sum over all windows divided by the window count."""
    total = 0.0
    count = 0
    for batch in batches:
        pred = model_forward(model, batch.inputs)
        total += float(((pred.data - batch.targets) ** 2).sum())
        count += len(batch)
    if count == 0:
        raise ArgumentError("no windows to evaluate")
    return total / count


def train(
    model: ForecastModel,
    train_windows: list[WindowBatch],
    val_windows: list[WindowBatch],
    tcfg: TrainConfig,
) -> tuple[ForecastModel, list[EpochStats]]:
    """Adam training with per-epoch validation; the parameters with the lowest
    validation error are restored into the returned model."""
    if not train_windows:
        raise ArgumentError("training requires at least one window batch")
    params = list(model.parameters.values())
    opt = Adam(params, tcfg)
    history: list[EpochStats] = []
    best_val = math.inf
    best_snapshot = {name: p.data.copy() for name, p in model.parameters.items()}
    for epoch in range(tcfg.epochs):
        total = 0.0
        count = 0
        for index, batch in enumerate(train_windows):
            pred = model_forward(model, batch.inputs)
            loss = mse_loss(pred, batch.targets)
            value = loss.item()
            if not math.isfinite(value):
                raise NumericError(
                    f"non-finite training loss at epoch {epoch} batch {index}"
                )
            opt.zero_grad()
            compute_gradients(loss, model)
            opt.step()
            total += value * len(batch)
            count += len(batch)
        val = dataset_mse(model, val_windows) if val_windows else total / count
        history.append(EpochStats(epoch, total / count, val))
        if val < best_val:
            best_val = val
            best_snapshot = {name: p.data.copy() for name, p in model.parameters.items()}
    for name, p in model.parameters.items():
        p.data = best_snapshot[name]
    return model, history


def _fmt(values: np.ndarray) -> str:
    return " ".join(f"{v:.17g}" for v in values.ravel())


def save_model(model: ForecastModel, path, meta: dict[str, str] | None = None) -> None:
    """Versioned text checkpoint: config, adjacency, normalization and all
    named parameter tensors, round-tripping bit-exactly."""
    lines = [f"{MODEL_FILE_TAG}\t{MODEL_FILE_VERSION}"]
    for key, value in (meta or {}).items():
        lines.append(f"meta\t{key}\t{value}")
    lines.append("config\t" + json.dumps(asdict(model.config), sort_keys=True))
    if model.normalization is None:
        lines.append("norm\tnull")
    else:
        lines.append(
            "norm\t"
            + _fmt(model.normalization.per_sensor_min)
            + "\t"
            + _fmt(model.normalization.per_sensor_max)
        )
    lines.append(f"adjacency\t{model.n_nodes}")
    for row in model.normalized_adjacency:
        lines.append("row\t" + _fmt(row))
    for name, p in model.parameters.items():
        shape = ",".join(str(s) for s in p.data.shape)
        lines.append(f"param\t{name}\t{shape}\t{_fmt(p.data)}")
    lines.append("end")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_model(path, expected_nodes: int | None = None) -> ForecastModel:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != f"{MODEL_FILE_TAG}\t{MODEL_FILE_VERSION}":
        raise FormatError(f"{path}: missing or unsupported model header")
    config = None
    normalization = None
    adjacency_rows: list[np.ndarray] = []
    n_nodes = None
    params: dict[str, Tensor] = {}
    ended = False

    def parse_values(text: str, where: str) -> np.ndarray:
        try:
            return np.fromiter((float(v) for v in text.split()), dtype=np.float64)
        except ValueError:
            raise FormatError(f"{path}: bad numeric data in {where}") from None

    for lineno, line in enumerate(lines[1:], start=2):
        if ended:
            raise FormatError(f"{path}: line {lineno}: content after end marker")
        parts = line.split("\t")
        kind = parts[0]
        if kind == "meta":
            continue
        if kind == "config":
            try:
                fields = json.loads(parts[1])
                fields["kernel_sizes"] = tuple(fields["kernel_sizes"])
                config = ModelConfig(**fields)
            except (IndexError, KeyError, TypeError, ValueError) as exc:
                raise FormatError(f"{path}: line {lineno}: bad config: {exc}") from None
        elif kind == "norm":
            if parts[1] != "null":
                if len(parts) != 3:
                    raise FormatError(f"{path}: line {lineno}: malformed norm line")
                normalization = NormalizationSpec(
                    parse_values(parts[1], "norm"), parse_values(parts[2], "norm")
                )
        elif kind == "adjacency":
            n_nodes = int(parts[1])
        elif kind == "row":
            adjacency_rows.append(parse_values(parts[1], f"adjacency row {lineno}"))
        elif kind == "param":
            if len(parts) != 4:
                raise FormatError(f"{path}: line {lineno}: malformed param line")
            _, name, shape_text, values_text = parts
            shape = tuple(int(s) for s in shape_text.split(","))
            values = parse_values(values_text, f"param {name}")
            if values.size != int(np.prod(shape)):
                raise FormatError(
                    f"{path}: param {name} has {values.size} values for shape {shape}"
                )
            params[name] = Tensor(values.reshape(shape), requires_grad=True)
        elif kind == "end":
            ended = True
        else:
            raise FormatError(f"{path}: line {lineno}: unknown record {kind!r}")
    if not ended:
        raise FormatError(f"{path}: truncated model file (missing end marker)")
    if config is None or n_nodes is None or len(adjacency_rows) != n_nodes:
        raise FormatError(f"{path}: incomplete model file")
    adjacency = np.vstack(adjacency_rows)
    if adjacency.shape != (n_nodes, n_nodes):
        raise FormatError(f"{path}: adjacency block is not {n_nodes}x{n_nodes}")
    if expected_nodes is not None and n_nodes != expected_nodes:
        raise DimensionError(
            f"{path}: model built for {n_nodes} nodes, expected {expected_nodes}"
        )
    return ForecastModel(config, adjacency, params, normalization)
