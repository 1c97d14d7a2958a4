"""Command-line entry point: train, evaluate, linkpred, ablate, synth and radius."""

import argparse
import logging
import sys
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from threadpoolctl import threadpool_limits
from tqdm import tqdm

from .clustering_eval import (
    auc_ap,
    edge_scores,
    evaluate_node_clustering,
    sample_training_negatives,
    split_edges,
)
from .config import Config, derive_seed
from .constants import (
    ABLATION_JSON_FILE,
    ABLATION_TEXT_FILE,
    CHECKPOINT_FILE,
    EMBEDDINGS_FILE,
    EXIT_CONFIG,
    EXIT_FAILURE,
    EXIT_NUMERICAL,
    EXIT_OK,
    METRICS_FILE,
    MODE_RECON,
    MODE_SUBSPACE,
    RADIUS_FILE,
    STREAM_INIT,
    STREAM_NEGATIVES,
    STREAM_SBM,
    STREAM_SPLIT,
    TIMINGS_FILE,
    TRAIN_REPORT_FILE,
)
from .data_io import Dataset, TrainingData, load_dataset, load_edge_list, save_dataset, save_embeddings, sbm_generate
from .exceptions import ConfigError, GalaError, GraphError, NumericalError, TrainingDiverged
from .formatters import format_ablation_table, format_metric, format_radius_table, summarize, write_json
from .graph_ops import (
    Graph,
    first_order_operator,
    naive_sharpening_operator,
    smoothing_operator,
    spectral_radius,
    stable_sharpening_operator,
)
from .model import ForwardTrace, forward, layer_operators, load_checkpoint, save_checkpoint
from .models import MetricsReport, RunConfig, SbmSpec, TrainConfig
from .objectives import LinkConfig
from .trainer import TrainReport, finetune, finetune_config, pretrain, train_linkpred
from .validators import load_run_config, parse_overrides, validate_for_dataset

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gala",
        description="Graph convolutional autoencoder with Laplacian smoothing and sharpening.",
        epilog="Any '--section.key value' pair overrides the config file, e.g. --training.learning_rate 0.001",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--out", help="output directory")

    commands = parser.add_subparsers(dest="command", required=True)
    commands.add_parser("train", parents=[common], help="pre-train (and fine-tune) and write a checkpoint")
    evaluate = commands.add_parser("evaluate", parents=[common], help="cluster a checkpoint's latents")
    evaluate.add_argument("--checkpoint", help=f"checkpoint file (default <out>/{CHECKPOINT_FILE})")
    commands.add_parser("linkpred", parents=[common], help="split edges, train with the link cost, report AUC/AP")
    commands.add_parser("ablate", parents=[common], help="decoder x cost comparison table")
    commands.add_parser("synth", parents=[common], help="write an SBM dataset to files")
    commands.add_parser("radius", parents=[common], help="spectral radius of each propagation operator")
    return parser


# ============================================================================
# HELPERS
# ============================================================================


def _sbm_spec(cfg: RunConfig) -> SbmSpec:
    """The configured SBM with its seed drawn from the master seed's sbm substream."""
    spec = cfg.data.synth or SbmSpec()
    return spec.model_copy(update={"seed": derive_seed(cfg.seed, STREAM_SBM, spec.seed)})


def load_run_dataset(cfg: RunConfig) -> Dataset:
    """Dataset named by the config's data section."""
    if cfg.data.synth is not None:
        return sbm_generate(_sbm_spec(cfg))
    if cfg.data.features is None:
        raise ConfigError("this command needs node features (data.features) or data.synth")
    return load_dataset(cfg.data.features, cfg.data.edges, cfg.data.labels, name=cfg.data.name)


def pretrain_config(cfg: RunConfig, seed: int) -> TrainConfig:
    t = cfg.training
    return TrainConfig(
        learning_rate=t.learning_rate,
        max_epochs=t.max_epochs,
        convergence_window=t.convergence_window,
        convergence_rel_tol=t.convergence_rel_tol,
        mode=MODE_RECON,
        seed=seed,
        log_every=t.log_every,
    )


def run_training(cfg: RunConfig, data: TrainingData, seed: int) -> list[TrainReport]:
    """Pre-train, then fine-tune when the objective includes the subspace cost."""
    stages = [pretrain(data, cfg.architecture, pretrain_config(cfg, seed))]
    if cfg.objective.mode == MODE_SUBSPACE:
        stage_cfg = finetune_config(cfg.training.finetune_learning_rate, cfg.training.finetune_epochs, seed)
        stages.append(finetune(stages[0], data, cfg.objective.subspace(), stage_cfg))
    return stages


def latent_of(report: TrainReport, data: TrainingData) -> np.ndarray:
    trace: ForwardTrace = forward(
        data.features, report.params, layer_operators(data.graph, report.specs), report.specs
    )
    return trace.latent


def _config_echo(cfg: RunConfig) -> dict:
    return cfg.model_dump(mode="json", by_alias=True)


def _cluster(cfg: RunConfig, h: np.ndarray, labels: np.ndarray, seed: int, repeats: int) -> MetricsReport:
    ev = cfg.evaluation
    return evaluate_node_clustering(
        h,
        labels,
        k_nn=ev.k_nn,
        k_clusters=ev.k_clusters,
        seed=seed,
        repeats=repeats,
        affinity=ev.affinity,
        subspace=cfg.objective.subspace(),
        config=_config_echo(cfg),
    )


def _write_stage_reports(
    out: Path,
    cfg: RunConfig,
    stages: Sequence[TrainReport],
    names: Sequence[str] | None = None,
) -> None:
    """Deterministic train report plus a separate wall-clock timings file."""
    names = list(names) if names is not None else [stage.stage for stage in stages]
    reports = [stage.to_stage_report().model_copy(update={"stage": name}) for stage, name in zip(stages, names)]
    write_json(out / TRAIN_REPORT_FILE, {"seed": cfg.seed, "stages": [r.model_dump(mode="json") for r in reports]})
    timings = [
        {"stage": name, "epochs_run": stage.epochs_run, "wall_time": stage.wall_time}
        for stage, name in zip(stages, names)
    ]
    write_json(out / TIMINGS_FILE, {"stages": timings, "total_wall_time": sum(s.wall_time for s in stages)})


def _output_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ============================================================================
# COMMANDS
# ============================================================================


def cmd_train(cfg: RunConfig, args: argparse.Namespace) -> int:
    """Train, then write checkpoint, embeddings, train report and (with labels) metrics."""
    ds = load_run_dataset(cfg)
    validate_for_dataset(cfg, ds, "train")
    data = ds.training_view(cfg.evaluation.k_nn)

    stages = run_training(cfg, data, derive_seed(cfg.seed, STREAM_INIT))
    final = stages[-1]
    h = latent_of(final, data)
    metrics = _cluster(cfg, h, ds.labels, cfg.seed, cfg.evaluation.repeats) if ds.labels is not None else None

    out = _output_dir(cfg)
    save_checkpoint(out / CHECKPOINT_FILE, final.specs, final.params)
    save_embeddings(h, out / EMBEDDINGS_FILE)
    _write_stage_reports(out, cfg, stages)
    for stage in stages:
        print(
            f"✓ {stage.stage}: {stage.epochs_run} epochs ({stage.stop_reason}), "
            f"loss {stage.loss_history[0]:.6g} -> {stage.loss_history[-1]:.6g}, {stage.wall_time:.2f}s"
        )
    if metrics is not None:
        write_json(out / METRICS_FILE, metrics)
        print(f"✓ ACC {format_metric(metrics.metrics['acc'])}, NMI {format_metric(metrics.metrics['nmi'])}")
    print(f"✓ Outputs written to: {out}")
    return EXIT_OK


def cmd_evaluate(cfg: RunConfig, args: argparse.Namespace) -> int:
    """Cluster the latents of a saved checkpoint, repeated with re-seeded k-means."""
    ds = load_run_dataset(cfg)
    validate_for_dataset(cfg, ds, "evaluate")
    checkpoint = Path(args.checkpoint) if args.checkpoint else Path(cfg.output_dir) / CHECKPOINT_FILE
    if not checkpoint.exists():
        raise ConfigError(f"checkpoint not found: {checkpoint} (run 'train' first or pass --checkpoint)")
    specs, params = load_checkpoint(checkpoint)
    data = ds.training_view(cfg.evaluation.k_nn)
    h = forward(data.features, params, layer_operators(data.graph, specs), specs).latent

    metrics = _cluster(cfg, h, ds.labels, cfg.seed, cfg.evaluation.repeats)
    path = write_json(_output_dir(cfg) / METRICS_FILE, metrics)
    for name, summary in metrics.metrics.items():
        print(f"✓ {name.upper()}: {format_metric(summary)}")
    print(f"✓ Metrics written to: {path}")
    return EXIT_OK


def cmd_linkpred(cfg: RunConfig, args: argparse.Namespace) -> int:
    """Hold out edges, train with the link cost per initialization, score held-out pairs."""
    ds = load_run_dataset(cfg)
    validate_for_dataset(cfg, ds, "linkpred")
    split = split_edges(
        ds.affinity, cfg.link.val_fraction, cfg.link.test_fraction, derive_seed(cfg.seed, STREAM_SPLIT)
    )
    data = TrainingData(features=ds.features, graph=split.train_graph)
    positives = split.train_graph.upper_edges()

    runs: dict[str, list[float]] = {"auc": [], "ap": [], "val_auc": [], "val_ap": []}
    stages = []
    for i in tqdm(range(cfg.link.initializations), desc="initializations", disable=None):
        negatives = sample_training_negatives(split, len(positives), derive_seed(cfg.seed, STREAM_NEGATIVES, i))
        link = LinkConfig(gamma=cfg.objective.gamma, positive_edges=positives, negative_edges=negatives)
        stage_cfg = pretrain_config(cfg, derive_seed(cfg.seed, STREAM_INIT, i))
        report = train_linkpred(data, cfg.architecture, stage_cfg, link)
        h = latent_of(report, data)

        auc, ap = auc_ap(edge_scores(h, split.test_positive), edge_scores(h, split.test_negative))
        val_auc, val_ap = auc_ap(edge_scores(h, split.val_positive), edge_scores(h, split.val_negative))
        for name, value in (("auc", auc), ("ap", ap), ("val_auc", val_auc), ("val_ap", val_ap)):
            runs[name].append(value)
        stages.append(report)

    metrics = MetricsReport(
        task="link_prediction",
        metrics={name: summarize(values) for name, values in runs.items()},
        seed=cfg.seed,
        config=_config_echo(cfg),
    )
    out = _output_dir(cfg)
    write_json(out / METRICS_FILE, metrics)
    names = [f"linkpred-{i}" for i in range(len(stages))]
    _write_stage_reports(out, cfg, stages, names)
    print(f"✓ Test AUC {format_metric(metrics.metrics['auc'], 'stderr')}, AP {format_metric(metrics.metrics['ap'], 'stderr')}")
    print(f"✓ Outputs written to: {out}")
    return EXIT_OK


def run_ablation_cell(
    cfg: RunConfig,
    data: TrainingData,
    labels: np.ndarray,
    decoder: str,
    mode: str,
) -> dict:
    """Mean clustering metrics of one (decoder, cost) cell over the ablation seeds."""
    cell_cfg = cfg.model_copy(
        update={
            "architecture": cfg.architecture.model_copy(update={"decoder_kind": decoder}),
            "objective": cfg.objective.model_copy(update={"mode": mode}),
        }
    )
    per_seed: dict[str, list[float]] = {"acc": [], "nmi": [], "ari": []}
    diverged = 0
    for seed in cfg.ablation.seeds:
        try:
            stages = run_training(cell_cfg, data, derive_seed(seed, STREAM_INIT))
        except TrainingDiverged as e:
            logger.warning("%s / %s seed %d diverged: %s", decoder, mode, seed, e)
            diverged += 1
            continue
        report = _cluster(cell_cfg, latent_of(stages[-1], data), labels, seed, cfg.ablation.repeats)
        for name in per_seed:
            per_seed[name].append(report.metrics[name].mean)

    row = {"decoder": decoder, "cost": mode, "runs": len(per_seed["acc"]), "diverged": diverged}
    for name, values in per_seed.items():
        row[name] = summarize(values).mean if values else None
    row["acc_std"] = summarize(per_seed["acc"]).std if per_seed["acc"] else None
    return row


def cmd_ablate(cfg: RunConfig, args: argparse.Namespace) -> int:
    """Every configured decoder with and without the subspace cost."""
    ds = load_run_dataset(cfg)
    validate_for_dataset(cfg, ds, "ablate")
    data = ds.training_view(cfg.evaluation.k_nn)

    cells = [(decoder, mode) for decoder in cfg.ablation.decoders for mode in (MODE_RECON, MODE_SUBSPACE)]
    rows = [
        run_ablation_cell(cfg, data, ds.labels, decoder, mode)
        for decoder, mode in tqdm(cells, desc="ablation", disable=None)
    ]

    out = _output_dir(cfg)
    write_json(out / ABLATION_JSON_FILE, {"rows": rows, "seeds": cfg.ablation.seeds, "config": _config_echo(cfg)})
    table = format_ablation_table(rows)
    (out / ABLATION_TEXT_FILE).write_text(table, encoding="utf-8")
    print(table, end="")
    print(f"✓ Ablation table written to: {out / ABLATION_JSON_FILE}")
    return EXIT_OK


def cmd_synth(cfg: RunConfig, args: argparse.Namespace) -> int:
    """Write the configured SBM as features.csv, edges.txt and labels.csv."""
    if cfg.data.synth is None:
        raise ConfigError("synth needs a data.synth section (e.g. --data.synth '{}')")
    ds = sbm_generate(_sbm_spec(cfg))
    written = save_dataset(ds, _output_dir(cfg))
    print(f"✓ {ds.name}: {ds.n} nodes, {ds.affinity.edge_count} edges, {ds.num_classes} blocks")
    for path in written.values():
        print(f"✓ Written: {path}")
    return EXIT_OK


def operator_radii(g: Graph) -> dict[str, float]:
    """Spectral radius of every propagation operator on one graph."""
    if g.n == 0 or g.edge_count == 0:
        raise GraphError("spectral radii need a graph with at least one edge")
    return {
        "smoothing": spectral_radius(smoothing_operator(g)),
        "naive_sharpening": spectral_radius(naive_sharpening_operator(g)),
        "stable_sharpening": spectral_radius(stable_sharpening_operator(g)),
        "first_order": spectral_radius(first_order_operator(g)),
    }


def cmd_radius(cfg: RunConfig, args: argparse.Namespace) -> int:
    """Print and write the spectral radii of the operators built from the configured graph."""
    if cfg.data.synth is not None:
        g = sbm_generate(_sbm_spec(cfg)).affinity
    elif cfg.data.edges is not None:
        g = load_edge_list(cfg.data.edges)
    else:
        raise ConfigError("radius needs a graph (data.edges or data.synth)")
    radii = operator_radii(g)

    print(format_radius_table(radii), end="")
    path = write_json(
        _output_dir(cfg) / RADIUS_FILE,
        {"graph": cfg.data.name, "n": g.n, "edges": g.edge_count, "spectral_radius": radii},
    )
    print(f"✓ Radii written to: {path}")
    return EXIT_OK


COMMANDS: dict[str, Callable[[RunConfig, argparse.Namespace], int]] = {
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "linkpred": cmd_linkpred,
    "ablate": cmd_ablate,
    "synth": cmd_synth,
    "radius": cmd_radius,
}


def _configure_logging(level: str) -> None:
    if not isinstance(logging.getLevelName(level), int):
        raise ConfigError(f"Environment variable 'GALA_LOG_LEVEL' is not a logging level: {level!r}")
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def main(argv: Sequence[str] | None = None) -> int:
    """
    Parse arguments, validate the configuration, run one command.

    Returns:
        0 success, 2 configuration error, 3 numerical abort, 1 any other failure
    """
    args, extra = build_parser().parse_known_args(argv)
    try:
        env = Config()
        _configure_logging(env.log_level)
        cfg = load_run_config(
            args.config,
            parse_overrides(extra),
            seed=args.seed,
            output_dir=args.out,
            default_output_dir=env.output_dir,
        )
        with threadpool_limits(limits=env.threads):
            return COMMANDS[args.command](cfg, args)
    except ConfigError as e:
        print(f"Config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except TrainingDiverged as e:
        print(
            f"Training diverged: {e} (last finite epoch {e.last_finite_epoch}"
            + (f", layer {e.layer})" if e.layer is not None else ")"),
            file=sys.stderr,
        )
        return EXIT_NUMERICAL
    except NumericalError as e:
        print(f"Numerical error: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (GalaError, OSError) as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_FAILURE
