"""Pydantic models for configuration and report documents."""

from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .constants import (
    CLUSTERING_REPEATS,
    CONVERGENCE_REL_TOL,
    CONVERGENCE_WINDOW,
    DEFAULT_GAMMA,
    DEFAULT_K_NN,
    DEFAULT_LAMBDA,
    DEFAULT_MU,
    FINETUNE_EPOCHS,
    FINETUNE_LEARNING_RATE,
    HIDDEN_DIMS,
    LINK_INITIALIZATIONS,
    MAX_EPOCHS,
    PRETRAIN_LEARNING_RATE,
    TEST_FRACTION,
    VAL_FRACTION,
)

OperatorKind = Literal["smoothing", "naive_sharpening", "stable_sharpening"]
Activation = Literal["relu", "identity"]
LossMode = Literal["recon", "recon+subspace", "recon+link"]
StopReason = Literal["converged", "max_epochs"]


class LayerSpec(BaseModel):
    """One propagation layer H' = activation(P H Θ)."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    in_dim: int = Field(gt=0)
    out_dim: int = Field(gt=0)
    operator_kind: OperatorKind
    activation: Activation


class SubspaceConfig(BaseModel):
    """Regularization weights of the self-expressive subspace cost."""

    model_config = ConfigDict(frozen=True, populate_by_name=True)

    lam: float = Field(default=DEFAULT_LAMBDA, gt=0, alias="lambda")
    mu: float = Field(default=DEFAULT_MU, gt=0)


class TrainConfig(BaseModel):
    """Settings of one full-batch training stage."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    learning_rate: float = Field(default=PRETRAIN_LEARNING_RATE, gt=0)
    max_epochs: int = Field(default=MAX_EPOCHS, ge=1)
    convergence_window: int = Field(default=CONVERGENCE_WINDOW, ge=2)
    convergence_rel_tol: float = Field(default=CONVERGENCE_REL_TOL, ge=0)
    stop_on_convergence: bool = True
    mode: LossMode = "recon"
    seed: int = Field(default=0, ge=0)
    log_every: int = Field(default=100, ge=1)


class SbmSpec(BaseModel):
    """Stochastic block model with one-hot-plus-noise node features."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    block_sizes: list[int] = Field(default_factory=lambda: [40, 40, 40], min_length=1)
    p_in: float = Field(default=0.3, ge=0, le=1)
    p_out: float = Field(default=0.02, ge=0, le=1)
    noise: float = Field(default=0.3, ge=0)
    seed: int = Field(default=0, ge=0)

    @field_validator("block_sizes")
    @classmethod
    def blocks_nonempty(cls, v):
        """Every block must hold at least one node."""
        if any(size < 1 for size in v):
            raise ValueError("every block must contain at least one node")
        return v


# ============================================================================
# RUN CONFIGURATION
# ============================================================================


class DataSection(BaseModel):
    """Dataset source: files or a synthetic SBM."""

    model_config = ConfigDict(extra="forbid")

    name: str = "dataset"
    features: str | None = None
    edges: str | None = None
    labels: str | None = None
    synth: SbmSpec | None = None

    @model_validator(mode="after")
    def one_source(self):
        """Exactly one of the file sources or synth must be given; an edge list alone serves `radius`."""
        if self.synth is None and self.features is None and self.edges is None:
            raise ValueError("data needs either 'features' (and optional edges/labels) or 'synth'")
        if self.synth is not None and any((self.features, self.edges, self.labels)):
            raise ValueError("data.synth cannot be combined with file paths")
        return self


class ArchitectureSection(BaseModel):
    """Encoder dims (decoder mirrors them) and layer choices."""

    model_config = ConfigDict(extra="forbid")

    hidden_dims: list[int] = Field(default_factory=lambda: list(HIDDEN_DIMS), min_length=1)
    decoder_kind: OperatorKind = "stable_sharpening"
    hidden_activation: Activation = "relu"
    output_activation: Activation = "identity"
    init_scheme: Literal["glorot", "identity"] = "glorot"
    init_gain: float = Field(default=1.0, gt=0)

    @field_validator("hidden_dims")
    @classmethod
    def dims_positive(cls, v):
        """Hidden dims must be positive."""
        if any(d < 1 for d in v):
            raise ValueError("hidden dims must be positive")
        return v

    @property
    def depth(self) -> int:
        """Total layer count M."""
        return 2 * len(self.hidden_dims)


class ObjectiveSection(BaseModel):
    """Loss mode and cost weights."""

    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    mode: LossMode = "recon"
    lam: float = Field(default=DEFAULT_LAMBDA, gt=0, alias="lambda")
    mu: float = Field(default=DEFAULT_MU, gt=0)
    gamma: float = Field(default=DEFAULT_GAMMA, ge=0)

    def subspace(self) -> SubspaceConfig:
        return SubspaceConfig(lam=self.lam, mu=self.mu)


class TrainingSection(BaseModel):
    """Pre-training and fine-tuning schedule."""

    model_config = ConfigDict(extra="forbid")

    learning_rate: float = Field(default=PRETRAIN_LEARNING_RATE, gt=0)
    max_epochs: int = Field(default=MAX_EPOCHS, ge=1)
    convergence_window: int = Field(default=CONVERGENCE_WINDOW, ge=2)
    convergence_rel_tol: float = Field(default=CONVERGENCE_REL_TOL, ge=0)
    finetune_learning_rate: float = Field(default=FINETUNE_LEARNING_RATE, gt=0)
    finetune_epochs: int = Field(default=FINETUNE_EPOCHS, ge=1)
    log_every: int = Field(default=100, ge=1)


class EvaluationSection(BaseModel):
    """Clustering evaluation protocol."""

    model_config = ConfigDict(extra="forbid")

    k_nn: int = Field(default=DEFAULT_K_NN, ge=1)
    k_clusters: int | None = Field(default=None, ge=1)
    affinity: Literal["knn", "subspace"] = "knn"
    repeats: int = Field(default=CLUSTERING_REPEATS, ge=1)


class LinkSection(BaseModel):
    """Link prediction protocol."""

    model_config = ConfigDict(extra="forbid")

    val_fraction: float = Field(default=VAL_FRACTION, gt=0, lt=1)
    test_fraction: float = Field(default=TEST_FRACTION, gt=0, lt=1)
    initializations: int = Field(default=LINK_INITIALIZATIONS, ge=1)

    @model_validator(mode="after")
    def fractions_fit(self):
        """Validation and test fractions must leave training edges."""
        if self.val_fraction + self.test_fraction >= 1:
            raise ValueError("val_fraction + test_fraction must be < 1")
        return self


class AblationSection(BaseModel):
    """Decoder x cost ablation grid."""

    model_config = ConfigDict(extra="forbid")

    seeds: list[int] = Field(default_factory=lambda: [0, 1, 2, 3, 4], min_length=1)
    repeats: int = Field(default=1, ge=1)
    decoders: list[OperatorKind] = Field(
        default_factory=lambda: ["smoothing", "naive_sharpening", "stable_sharpening"],
        min_length=1,
    )


class RunConfig(BaseModel):
    """Complete configuration of one CLI run."""

    model_config = ConfigDict(extra="forbid")

    data: DataSection
    architecture: ArchitectureSection = Field(default_factory=ArchitectureSection)
    objective: ObjectiveSection = Field(default_factory=ObjectiveSection)
    training: TrainingSection = Field(default_factory=TrainingSection)
    evaluation: EvaluationSection = Field(default_factory=EvaluationSection)
    link: LinkSection = Field(default_factory=LinkSection)
    ablation: AblationSection = Field(default_factory=AblationSection)
    seed: int = Field(default=0, ge=0)
    output_dir: str = "output"


# ============================================================================
# REPORTS
# ============================================================================


class MetricSummary(BaseModel):
    """Mean and spread of a metric over repeated runs."""

    mean: float
    std: float
    stderr: float
    values: list[float]


class MetricsReport(BaseModel):
    """Clustering (acc/nmi/ari) or link prediction (auc/ap) metrics."""

    task: Literal["clustering", "link_prediction"]
    metrics: dict[str, MetricSummary]
    seed: int
    config: dict


class StageReport(BaseModel):
    """Serializable part of a training stage."""

    stage: str
    loss_history: list[float]
    epochs_run: int
    stop_reason: StopReason
    max_activation_norm: float
    config: dict
