"""Run-configuration loading and precondition checks."""

import copy
import json
from pathlib import Path
from typing import Any, Sequence

from pydantic import ValidationError

from .data_io import Dataset
from .exceptions import ConfigError
from .models import RunConfig


def _parse_value(text: str) -> Any:
    """JSON literal when possible (numbers, booleans, lists), else plain text."""
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def parse_overrides(tokens: Sequence[str]) -> dict[str, Any]:
    """
    Parse "--a.b value" and "--a.b=value" tokens into {"a.b": value}.

    Args:
        tokens: Unrecognized command-line tokens

    Returns:
        Dotted key to parsed value
    """
    overrides: dict[str, Any] = {}
    i = 0
    while i < len(tokens):
        token = tokens[i]
        if not token.startswith("--") or len(token) == 2:
            raise ConfigError(f"Unexpected argument {token!r}; overrides look like --section.key value")
        key = token[2:]
        if "=" in key:
            key, raw = key.split("=", 1)
            i += 1
        else:
            if i + 1 >= len(tokens):
                raise ConfigError(f"Override {token} is missing a value")
            raw = tokens[i + 1]
            i += 2
        overrides[key] = _parse_value(raw)
    return overrides


def apply_overrides(document: dict, overrides: dict[str, Any]) -> dict:
    """Set dotted keys in a copy of a nested config document."""
    result = copy.deepcopy(document)
    for dotted, value in overrides.items():
        parts = dotted.split(".")
        node = result
        for part in parts[:-1]:
            child = node.setdefault(part, {})
            if not isinstance(child, dict):
                raise ConfigError(f"Override {dotted!r}: {part!r} is not a section")
            node = child
        node[parts[-1]] = value
    return result


def _describe(error: ValidationError) -> str:
    return "; ".join(
        f"{'.'.join(str(p) for p in item['loc']) or '<root>'}: {item['msg']}" for item in error.errors()
    )


def validate_run_config(document: dict) -> RunConfig:
    """
    Validate a config document.

    Args:
        document: Parsed JSON document

    Returns:
        RunConfig

    Raises:
        ConfigError: listing every invalid or unknown key
    """
    try:
        return RunConfig(**document)
    except ValidationError as e:
        raise ConfigError(f"Invalid configuration: {_describe(e)}") from e
    except TypeError as e:
        raise ConfigError(f"Invalid configuration: {e}") from e


def load_run_config(
    path: str | Path | None = None,
    overrides: dict[str, Any] | None = None,
    seed: int | None = None,
    output_dir: str | None = None,
    default_output_dir: str | None = None,
) -> RunConfig:
    """
    Read the JSON file, then apply --seed, --out and dotted overrides, then validate.

    Args:
        path: Config file (optional when overrides supply the data section)
        overrides: Dotted key overrides
        seed: Master seed override
        output_dir: Output directory override
        default_output_dir: Used when neither the file nor --out names one

    Returns:
        RunConfig
    """
    document: dict = {}
    if path is not None:
        try:
            document = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"Config file not found: {path}")
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: invalid JSON ({e})")
        if not isinstance(document, dict):
            raise ConfigError(f"{path}: top level must be a JSON object")
    if seed is not None:
        document["seed"] = seed
    if output_dir is not None:
        document["output_dir"] = output_dir
    elif default_output_dir is not None:
        document.setdefault("output_dir", default_output_dir)
    return validate_run_config(apply_overrides(document, overrides or {}))


def validate_for_dataset(cfg: RunConfig, ds: Dataset, task: str) -> None:
    """
    Check the preconditions a command has on the loaded dataset, before any compute.

    Args:
        cfg: Run configuration
        ds: Loaded dataset
        task: "train", "evaluate", "linkpred" or "ablate"
    """
    if ds.n < 2:
        raise ConfigError(f"{ds.name}: need at least 2 nodes, got {ds.n}")
    if ds.features.shape[1] == 0:
        raise ConfigError(f"{ds.name}: feature matrix has no columns")
    if task in ("evaluate", "ablate") and ds.labels is None:
        raise ConfigError(f"{ds.name}: clustering evaluation needs labels (data.labels)")
    k = cfg.evaluation.k_clusters
    if k is not None and k > ds.n:
        raise ConfigError(f"evaluation.k_clusters={k} exceeds the {ds.n} nodes")
    if task == "linkpred" and ds.affinity is None:
        raise ConfigError(f"{ds.name}: link prediction needs a graph (data.edges)")
    if task == "train" and cfg.objective.mode == "recon+link":
        raise ConfigError("objective.mode 'recon+link' is trained by the linkpred command")
