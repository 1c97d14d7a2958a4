"""Full-batch deterministic training: Adam, pre-training, fine-tuning and link-prediction training."""

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .constants import (
    ADAM_BETA1,
    ADAM_BETA2,
    ADAM_EPSILON,
    FINETUNE_EPOCHS,
    FINETUNE_LEARNING_RATE,
    MODE_LINK,
    MODE_RECON,
    MODE_SUBSPACE,
)
from .data_io import TrainingData
from .exceptions import NumericalError, ShapeError, TrainingDiverged
from .model import (
    ModelParams,
    backward,
    build_layer_specs,
    forward,
    init_params,
    layer_operators,
    validate_specs,
)
from .models import ArchitectureSection, LayerSpec, StageReport, StopReason, SubspaceConfig, TrainConfig
from .objectives import LinkConfig, LossTerms, total_loss

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AdamState:
    """First/second moment estimates mirroring ModelParams, and the step counter."""

    first_moments: list[np.ndarray]
    second_moments: list[np.ndarray]
    step: int = 0
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    epsilon: float = ADAM_EPSILON

    @classmethod
    def zeros(cls, params: ModelParams) -> "AdamState":
        return cls(
            first_moments=[np.zeros_like(w) for w in params.weights],
            second_moments=[np.zeros_like(w) for w in params.weights],
        )


@dataclass(frozen=True)
class TrainReport:
    """Outcome of one training stage."""

    stage: str
    loss_history: list[float]
    stop_reason: StopReason
    specs: list[LayerSpec]
    params: ModelParams
    config: TrainConfig
    max_activation_norm: float = 0.0
    wall_time: float = field(default=0.0, compare=False)

    @property
    def epochs_run(self) -> int:
        return len(self.loss_history)

    def to_stage_report(self) -> StageReport:
        """JSON-ready summary; wall time is left out so reruns serialize identically."""
        return StageReport(
            stage=self.stage,
            loss_history=self.loss_history,
            epochs_run=self.epochs_run,
            stop_reason=self.stop_reason,
            max_activation_norm=self.max_activation_norm,
            config=self.config.model_dump(),
        )


def adam_step(
    params: ModelParams,
    grads: list[np.ndarray],
    state: AdamState,
    lr: float,
) -> tuple[ModelParams, AdamState]:
    """
    One bias-corrected Adam update.

    Args:
        params: Current weights
        grads: Gradients, one per weight matrix
        state: Moment estimates
        lr: Learning rate

    Returns:
        (updated params, updated state)
    """
    if len(grads) != len(params.weights):
        raise ShapeError(f"{len(grads)} gradients for {len(params.weights)} weight matrices")
    t = state.step + 1
    bc1 = 1.0 - state.beta1**t
    bc2 = 1.0 - state.beta2**t

    weights, first, second = [], [], []
    for theta, g, m, v in zip(params.weights, grads, state.first_moments, state.second_moments):
        if g.shape != theta.shape:
            raise ShapeError(f"gradient shape {g.shape} != weight shape {theta.shape}")
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * (g * g)
        denom = np.sqrt(v / bc2) + state.epsilon
        weights.append(theta - (lr / bc1) * m / denom)
        first.append(m)
        second.append(v)

    new_state = AdamState(
        first_moments=first,
        second_moments=second,
        step=t,
        beta1=state.beta1,
        beta2=state.beta2,
        epsilon=state.epsilon,
    )
    return ModelParams(weights=weights), new_state


def _converged(history: list[float], window: int, tol: float) -> bool:
    """Mean relative loss change over the last `window` epochs below tol."""
    if len(history) <= window:
        return False
    recent = np.asarray(history[-(window + 1):])
    previous = np.maximum(np.abs(recent[:-1]), np.finfo(np.float64).tiny)
    return float(np.mean(np.abs(np.diff(recent)) / previous)) < tol


def _fit(
    stage: str,
    data: TrainingData,
    specs: list[LayerSpec],
    params: ModelParams,
    cfg: TrainConfig,
    terms: LossTerms,
) -> TrainReport:
    """Run the full-batch loop; losses are recorded before each update."""
    operators = layer_operators(data.graph, specs)
    state = AdamState.zeros(params)
    history: list[float] = []
    max_norm = 0.0
    stop_reason: StopReason = "max_epochs"
    start = time.perf_counter()

    for epoch in range(cfg.max_epochs):
        try:
            trace = forward(data.features, params, operators, specs)
            value, grad_out, grad_latent = total_loss(trace, cfg.mode, terms)
        except NumericalError as e:
            raise TrainingDiverged(
                f"{stage}: forward pass failed at epoch {epoch} ({e})",
                last_finite_epoch=epoch - 1,
                loss_history=history,
                layer=e.layer,
            ) from e
        if not np.isfinite(value):
            raise TrainingDiverged(
                f"{stage}: loss became {value} at epoch {epoch}",
                last_finite_epoch=epoch - 1,
                loss_history=history,
            )
        history.append(value)
        max_norm = max(max_norm, max(float(np.linalg.norm(h)) for h in trace.activations[1:]))

        if cfg.stop_on_convergence and _converged(history, cfg.convergence_window, cfg.convergence_rel_tol):
            stop_reason = "converged"
            break

        try:
            grads, _ = backward(trace, grad_out, params, operators, specs, latent_grad=grad_latent)
        except NumericalError as e:
            raise TrainingDiverged(
                f"{stage}: backward pass failed at epoch {epoch} ({e})",
                last_finite_epoch=epoch,
                loss_history=history,
                layer=e.layer,
            ) from e
        for m, g in enumerate(grads):
            if not np.all(np.isfinite(g)):
                raise TrainingDiverged(
                    f"{stage}: non-finite gradient in layer {m} at epoch {epoch}",
                    last_finite_epoch=epoch,
                    loss_history=history,
                    layer=m,
                )
        params, state = adam_step(params, grads, state, cfg.learning_rate)

        if epoch % cfg.log_every == 0:
            logger.debug("%s epoch %d loss %.6e", stage, epoch, value)

    elapsed = time.perf_counter() - start
    logger.info(
        "%s stopped (%s) after %d epochs, loss %.6e, %.2fs",
        stage, stop_reason, len(history), history[-1], elapsed,
    )
    return TrainReport(
        stage=stage,
        loss_history=history,
        stop_reason=stop_reason,
        specs=list(specs),
        params=params,
        config=cfg,
        max_activation_norm=max_norm,
        wall_time=elapsed,
    )


def _initial_model(data: TrainingData, arch: ArchitectureSection, seed: int) -> tuple[list[LayerSpec], ModelParams]:
    specs = build_layer_specs(data.features.shape[1], arch)
    validate_specs(specs)
    return specs, init_params(specs, seed, arch.init_scheme, arch.init_gain)


def pretrain(data: TrainingData, arch: ArchitectureSection, cfg: TrainConfig) -> TrainReport:
    """
    Minimize the reconstruction cost from a fresh seeded initialization.

    Args:
        data: Features and training graph
        arch: Architecture section
        cfg: Stage settings (mode is forced to recon)

    Returns:
        TrainReport
    """
    cfg = cfg.model_copy(update={"mode": MODE_RECON})
    specs, params = _initial_model(data, arch, cfg.seed)
    return _fit("pretrain", data, specs, params, cfg, LossTerms())


def finetune_config(
    learning_rate: float = FINETUNE_LEARNING_RATE,
    epochs: int = FINETUNE_EPOCHS,
    seed: int = 0,
) -> TrainConfig:
    """Fixed-length fine-tuning stage settings."""
    return TrainConfig(
        learning_rate=learning_rate,
        max_epochs=epochs,
        stop_on_convergence=False,
        mode=MODE_SUBSPACE,
        seed=seed,
    )


def finetune(
    pretrained: TrainReport,
    data: TrainingData,
    subspace: SubspaceConfig,
    cfg: TrainConfig | None = None,
) -> TrainReport:
    """
    Continue from pre-trained weights on reconstruction + subspace cost.

    Defaults to 50 epochs at learning rate 1e-6.
    """
    cfg = (cfg or finetune_config(seed=pretrained.config.seed)).model_copy(update={"mode": MODE_SUBSPACE})
    return _fit("finetune", data, pretrained.specs, pretrained.params, cfg, LossTerms(subspace=subspace))


def train_linkpred(
    data: TrainingData,
    arch: ArchitectureSection,
    cfg: TrainConfig,
    link: LinkConfig,
) -> TrainReport:
    """
    Minimize reconstruction + link cost.

    `data.graph` must be the training graph of an edge split; operators are built from it alone.
    """
    cfg = cfg.model_copy(update={"mode": MODE_LINK})
    specs, params = _initial_model(data, arch, cfg.seed)
    return _fit("linkpred", data, specs, params, cfg, LossTerms(link=link))
