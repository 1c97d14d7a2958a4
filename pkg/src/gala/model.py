"""The GALA network: smoothing encoder, sharpening decoder, manual forward and reverse passes."""

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from pydantic import ValidationError

from .constants import CHECKPOINT_FORMAT, CHECKPOINT_VERSION, IDENTITY, RELU, SMOOTHING
from .exceptions import DataFormatError, NumericalError, ShapeError
from .graph_ops import Graph, PropagationOperator, build_operator
from .linalg import as_dense, gemm, spmm
from .models import ArchitectureSection, LayerSpec


@dataclass(frozen=True)
class ModelParams:
    """Per-layer weight matrices Θ^(m)."""

    weights: list[np.ndarray]


@dataclass(frozen=True)
class ForwardTrace:
    """Activations H^(0..M), pre-activations and propagated inputs P·H^(m) of one forward pass."""

    activations: list[np.ndarray]
    pre_activations: list[np.ndarray]
    propagated: list[np.ndarray]

    @property
    def reconstruction(self) -> np.ndarray:
        return self.activations[-1]

    @property
    def latent(self) -> np.ndarray:
        return self.activations[len(self.pre_activations) // 2]


def build_layer_specs(in_dim: int, arch: ArchitectureSection) -> list[LayerSpec]:
    """
    Mirror the encoder dims into a symmetric M-layer architecture.

    Args:
        in_dim: Feature dimension d
        arch: Architecture section (encoder dims, decoder kind, activations)

    Returns:
        Specs d -> h1 -> ... -> latent -> ... -> h1 -> d
    """
    dims = [in_dim, *arch.hidden_dims]
    dims = dims + dims[-2::-1]
    depth = len(dims) - 1
    specs = []
    for m in range(depth):
        encoder = m < depth // 2
        specs.append(
            LayerSpec(
                in_dim=dims[m],
                out_dim=dims[m + 1],
                operator_kind=SMOOTHING if encoder else arch.decoder_kind,
                activation=arch.output_activation if m == depth - 1 else arch.hidden_activation,
            )
        )
    return specs


def _check_chain(specs: Sequence[LayerSpec]) -> None:
    for m in range(1, len(specs)):
        if specs[m - 1].out_dim != specs[m].in_dim:
            raise ShapeError(
                f"layer {m - 1} out_dim {specs[m - 1].out_dim} != layer {m} in_dim {specs[m].in_dim}"
            )


def validate_specs(specs: Sequence[LayerSpec]) -> None:
    """Check M even, chained dims, mirrored dims and smoothing encoder / uniform decoder."""
    _check_chain(specs)
    depth = len(specs)
    if depth == 0 or depth % 2:
        raise ShapeError(f"GALA needs an even, nonzero number of layers, got {depth}")
    dims = [specs[0].in_dim] + [s.out_dim for s in specs]
    if dims != dims[::-1]:
        raise ShapeError(f"layer dims must be symmetric, got {dims}")
    half = depth // 2
    if any(s.operator_kind != SMOOTHING for s in specs[:half]):
        raise ShapeError("encoder layers must use the smoothing operator")
    if len({s.operator_kind for s in specs[half:]}) != 1:
        raise ShapeError("decoder layers must share one operator kind")


def init_params(
    specs: Sequence[LayerSpec],
    seed: int,
    scheme: str = "glorot",
    gain: float = 1.0,
) -> ModelParams:
    """
    Initialize weights from a seeded generator.

    Args:
        specs: Layer specs (dims must chain)
        seed: Generator seed
        scheme: "glorot" (uniform ±gain·√(6/(in+out))) or "identity" (gain·I)
        gain: Scale factor

    Returns:
        ModelParams
    """
    _check_chain(specs)
    rng = np.random.default_rng(seed)
    weights = []
    for spec in specs:
        if scheme == "glorot":
            bound = gain * np.sqrt(6.0 / (spec.in_dim + spec.out_dim))
            weights.append(rng.uniform(-bound, bound, size=(spec.in_dim, spec.out_dim)))
        elif scheme == "identity":
            weights.append(gain * np.eye(spec.in_dim, spec.out_dim))
        else:
            raise ValueError(f"Unknown init scheme: {scheme!r}")
    return ModelParams(weights=weights)


def layer_operators(g: Graph, specs: Sequence[LayerSpec]) -> list[PropagationOperator]:
    """Per-layer operators; each kind is built once and shared."""
    cache: dict[str, PropagationOperator] = {}
    for spec in specs:
        if spec.operator_kind not in cache:
            cache[spec.operator_kind] = build_operator(g, spec.operator_kind)
    return [cache[spec.operator_kind] for spec in specs]


def relu_prime(pre: np.ndarray) -> np.ndarray:
    """ReLU derivative; the subgradient at 0 is 0."""
    return (pre > 0).astype(np.float64)


def _activate(pre: np.ndarray, activation: str) -> np.ndarray:
    if activation == RELU:
        return np.maximum(pre, 0.0)
    if activation == IDENTITY:
        return pre
    raise ValueError(f"Unknown activation: {activation!r}")


def forward(
    x: np.ndarray,
    params: ModelParams,
    operators: Sequence[PropagationOperator],
    specs: Sequence[LayerSpec],
) -> ForwardTrace:
    """
    H^(m+1) = activation(P_m H^(m) Θ^(m)) for every layer.

    Args:
        x: n x d feature matrix
        params: Layer weights
        operators: One n x n operator per layer
        specs: Layer specs

    Returns:
        ForwardTrace caching what backward needs
    """
    if not len(params.weights) == len(operators) == len(specs):
        raise ShapeError(
            f"{len(specs)} specs, {len(params.weights)} weights and {len(operators)} operators"
        )
    h = as_dense(x, "features")
    activations = [h]
    pre_activations = []
    propagated = []
    for m, (theta, op, spec) in enumerate(zip(params.weights, operators, specs)):
        if theta.shape != (spec.in_dim, spec.out_dim):
            raise ShapeError(f"layer {m}: weight shape {theta.shape} != ({spec.in_dim}, {spec.out_dim})")
        if h.shape[1] != spec.in_dim or op.matrix.shape[1] != h.shape[0]:
            raise ShapeError(
                f"layer {m}: input {h.shape} incompatible with operator {op.matrix.shape} "
                f"and in_dim {spec.in_dim}"
            )
        try:
            ph = spmm(op.matrix, h)
            pre = gemm(ph, theta)
        except NumericalError as e:
            raise NumericalError(f"layer {m}: {e}", layer=m) from e
        h = _activate(pre, spec.activation)
        propagated.append(ph)
        pre_activations.append(pre)
        activations.append(h)
    return ForwardTrace(activations=activations, pre_activations=pre_activations, propagated=propagated)


def backward(
    trace: ForwardTrace,
    output_grad: np.ndarray,
    params: ModelParams,
    operators: Sequence[PropagationOperator],
    specs: Sequence[LayerSpec],
    latent_grad: np.ndarray | None = None,
) -> tuple[list[np.ndarray], np.ndarray]:
    """
    Reverse-mode gradients of a scalar loss.

    Args:
        trace: Forward trace
        output_grad: dLoss/dH^(M)
        params: Layer weights
        operators: Per-layer operators
        specs: Layer specs
        latent_grad: Extra dLoss/dH^(M/2) from latent costs

    Returns:
        (weight gradients per layer, total gradient at H^(M/2))
    """
    depth = len(specs)
    if len(trace.pre_activations) != depth or len(params.weights) != depth:
        raise ShapeError("trace, params and specs describe different depths")
    if output_grad.shape != trace.activations[-1].shape:
        raise ShapeError(f"output_grad shape {output_grad.shape} != {trace.activations[-1].shape}")

    half = depth // 2
    grads: list[np.ndarray] = [np.empty(0)] * depth
    delta = output_grad
    latent_total = np.zeros_like(trace.activations[half])

    for m in range(depth - 1, -1, -1):
        if m == half - 1:
            if latent_grad is not None:
                if latent_grad.shape != delta.shape:
                    raise ShapeError(f"latent_grad shape {latent_grad.shape} != {delta.shape}")
                delta = delta + latent_grad
            latent_total = delta
        if specs[m].activation == RELU:
            delta = delta * relu_prime(trace.pre_activations[m])
        try:
            grads[m] = gemm(trace.propagated[m], delta, transpose_a=True)
            if m > 0:
                delta = spmm(operators[m].transpose, gemm(delta, params.weights[m], transpose_b=True))
        except NumericalError as e:
            raise NumericalError(f"layer {m}: {e}", layer=m) from e

    return grads, latent_total


# ============================================================================
# CHECKPOINTS
# ============================================================================


def save_checkpoint(path: str | Path, specs: Sequence[LayerSpec], params: ModelParams) -> Path:
    """
    Write specs and weights as a JSON checkpoint.

    Args:
        path: Output file
        specs: Layer specs
        params: Layer weights

    Returns:
        Path written
    """
    document = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "layers": [spec.model_dump() for spec in specs],
        "weights": [
            {"shape": list(theta.shape), "values": theta.ravel().tolist()} for theta in params.weights
        ],
    }
    file_path = Path(path)
    file_path.write_text(json.dumps(document, indent=1), encoding="utf-8")
    return file_path


def _read_weights(path: str | Path, entries: list) -> list[np.ndarray]:
    weights = []
    for m, entry in enumerate(entries):
        rows, cols = entry["shape"]
        values = np.asarray(entry["values"], dtype=np.float64)
        if values.size != rows * cols:
            raise DataFormatError(f"{path}: layer {m} has {values.size} values for shape {rows}x{cols}")
        weights.append(values.reshape(rows, cols))
    return weights


def load_checkpoint(path: str | Path) -> tuple[list[LayerSpec], ModelParams]:
    """
    Read a checkpoint written by save_checkpoint.

    Raises:
        DataFormatError: unreadable JSON, missing keys, invalid layers or weights that do not fit the layers
    """
    try:
        document = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise DataFormatError(f"{path}: invalid JSON ({e})") from e
    if not isinstance(document, dict):
        raise DataFormatError(f"{path}: checkpoint must be a JSON object")
    if document.get("format") != CHECKPOINT_FORMAT or document.get("version") != CHECKPOINT_VERSION:
        raise DataFormatError(f"{path}: not a {CHECKPOINT_FORMAT} v{CHECKPOINT_VERSION} file")

    try:
        specs = [LayerSpec(**layer) for layer in document["layers"]]
        weights = _read_weights(path, document["weights"])
    except DataFormatError:
        raise
    except KeyError as e:
        raise DataFormatError(f"{path}: missing key {e}") from e
    except ValidationError as e:
        raise DataFormatError(f"{path}: invalid layer ({e.error_count()} errors: {e.errors()[0]['msg']})") from e
    except (TypeError, ValueError) as e:
        raise DataFormatError(f"{path}: malformed checkpoint ({e})") from e

    if len(weights) != len(specs):
        raise DataFormatError(f"{path}: {len(weights)} weight matrices for {len(specs)} layers")
    for m, (theta, spec) in enumerate(zip(weights, specs)):
        if theta.shape != (spec.in_dim, spec.out_dim):
            raise DataFormatError(f"{path}: layer {m} weights {theta.shape} != ({spec.in_dim}, {spec.out_dim})")
    try:
        validate_specs(specs)
    except ShapeError as e:
        raise DataFormatError(f"{path}: {e}") from e
    return specs, ModelParams(weights=weights)
