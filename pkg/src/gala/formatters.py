"""Report formatting: metric summaries, deterministic JSON and aligned text tables."""

import json
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel

from .models import MetricSummary


def summarize(values: Sequence[float]) -> MetricSummary:
    """
    Mean, population std and standard error of repeated measurements.

    Args:
        values: One value per repetition

    Returns:
        MetricSummary (std and stderr are 0 for a single value)
    """
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("cannot summarize an empty list of values")
    std = float(arr.std())
    stderr = float(arr.std(ddof=1) / np.sqrt(arr.size)) if arr.size > 1 else 0.0
    return MetricSummary(mean=float(arr.mean()), std=std, stderr=stderr, values=arr.tolist())


def to_json(document: BaseModel | dict) -> str:
    """Serialize with sorted keys so identical inputs give identical bytes."""
    payload = document.model_dump(mode="json", by_alias=True) if isinstance(document, BaseModel) else document
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def write_json(path: str | Path, document: BaseModel | dict) -> Path:
    """
    Write a report document as JSON.

    Args:
        path: Output file
        document: Pydantic model or plain dict

    Returns:
        Path written
    """
    file_path = Path(path)
    file_path.write_text(to_json(document), encoding="utf-8")
    return file_path


def format_metric(summary: MetricSummary, spread: str = "std") -> str:
    """Format as 'mean ± spread' with four decimals."""
    return f"{summary.mean:.4f} ± {getattr(summary, spread):.4f}"


# ============================================================================
# TABLES
# ============================================================================


def ablation_frame(rows: Sequence[dict]) -> pd.DataFrame:
    """
    Ablation rows as a DataFrame indexed by (decoder, cost).

    Args:
        rows: Dicts with decoder, cost and per-metric means
    """
    return pd.DataFrame(list(rows)).set_index(["decoder", "cost"])


def format_ablation_table(rows: Sequence[dict]) -> str:
    """Aligned text table of ablation means."""
    return ablation_frame(rows).to_string(float_format=lambda v: f"{v:.4f}") + "\n"


def format_radius_table(radii: dict[str, float]) -> str:
    """One 'operator  radius' line per operator."""
    frame = pd.DataFrame({"operator": list(radii), "spectral_radius": list(radii.values())})
    return frame.to_string(index=False, float_format=lambda v: f"{v:.12g}") + "\n"
