"""Reconstruction, subspace-clustering and link-prediction costs with gradients.

Latent orientation: the network stores activations n x k; the subspace functions
take the k x n orientation H and total_loss transposes at the boundary.
"""

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

from .constants import DENSE_LINK_MAX_NODES, MODE_LINK, MODE_RECON, MODE_SUBSPACE
from .exceptions import ConfigError, ShapeError
from .linalg import as_dense, frobenius_sq, gemm, small_inverse
from .model import ForwardTrace
from .models import LossMode, SubspaceConfig

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LinkConfig:
    """Positive / negative node pairs for the link cost, weighted by gamma."""

    gamma: float
    positive_edges: np.ndarray
    negative_edges: np.ndarray

    def __post_init__(self):
        if self.gamma < 0:
            raise ConfigError(f"gamma must be >= 0, got {self.gamma}")
        pos = np.asarray(self.positive_edges, dtype=np.int64).reshape(-1, 2)
        neg = np.asarray(self.negative_edges, dtype=np.int64).reshape(-1, 2)
        if (pos.size and pos.min() < 0) or (neg.size and neg.min() < 0):
            raise ConfigError("edge indices must be nonnegative")
        pos_keys = {tuple(sorted(e)) for e in pos.tolist()}
        neg_keys = {tuple(sorted(e)) for e in neg.tolist()}
        if pos_keys & neg_keys:
            raise ConfigError("positive and negative edge lists overlap")
        object.__setattr__(self, "positive_edges", pos)
        object.__setattr__(self, "negative_edges", neg)


@dataclass(frozen=True)
class LossTerms:
    """Configuration of the latent terms a loss mode needs."""

    subspace: SubspaceConfig | None = None
    link: LinkConfig | None = None


def recon_loss(x: np.ndarray, x_bar: np.ndarray) -> tuple[float, np.ndarray]:
    """½‖X - X̄‖²_F and its gradient X̄ - X."""
    if x.shape != x_bar.shape:
        raise ShapeError(f"reconstruction shape {x_bar.shape} != input shape {x.shape}")
    diff = x_bar - x
    return 0.5 * frobenius_sq(diff), diff


def optimal_affinity(h: np.ndarray, cfg: SubspaceConfig) -> np.ndarray:
    """
    Closed-form LSR affinity A* = (HᵀH + (μ/λ)I_n)⁻¹HᵀH for H of shape k x n.

    Evaluated as Hᵀ(HHᵀ + (μ/λ)I_k)⁻¹H so only a k x k inverse is formed.
    """
    h = as_dense(h, "latent")
    k = h.shape[0]
    inner = small_inverse(gemm(h, h, transpose_b=True) + (cfg.mu / cfg.lam) * np.eye(k))
    affinity = gemm(h, gemm(inner, h), transpose_a=True)
    return 0.5 * (affinity + affinity.T)


def subspace_cost(h: np.ndarray, cfg: SubspaceConfig) -> tuple[float, np.ndarray]:
    """
    Efficient subspace cost (μλ/2)·tr((μI_k + λHHᵀ)⁻¹HHᵀ) for H of shape k x n.

    With M = μI_k + λHHᵀ the gradient is μ²λ·M⁻²H.
    """
    h = as_dense(h, "latent")
    k, n = h.shape
    if k > n:
        logger.warning("Subspace cost with latent dim k=%d > n=%d nodes", k, n)
    gram = gemm(h, h, transpose_b=True)
    m_inv = small_inverse(cfg.mu * np.eye(k) + cfg.lam * gram)
    value = 0.5 * cfg.mu * cfg.lam * float(np.trace(gemm(m_inv, gram)))
    grad = (cfg.mu**2 * cfg.lam) * gemm(gemm(m_inv, m_inv), h)
    return value, grad


def lsr_cost_explicit(h: np.ndarray, a: np.ndarray, cfg: SubspaceConfig) -> float:
    """(λ/2)‖H - HA‖²_F + (μ/2)‖A‖²_F for H k x n and A n x n."""
    h = as_dense(h, "latent")
    a = as_dense(a, "affinity")
    n = h.shape[1]
    if a.shape != (n, n):
        raise ShapeError(f"affinity shape {a.shape} != ({n}, {n})")
    residual = h - gemm(h, a)
    return 0.5 * cfg.lam * frobenius_sq(residual) + 0.5 * cfg.mu * frobenius_sq(a)


def _pair_logits(h: np.ndarray, pairs: np.ndarray) -> np.ndarray:
    return np.einsum("ij,ij->i", h[pairs[:, 0]], h[pairs[:, 1]])


def link_loss(h: np.ndarray, cfg: LinkConfig) -> tuple[float, np.ndarray]:
    """
    γ x mean binary cross-entropy of sigmoid(h_i·h_j) over sampled pairs.

    Args:
        h: n x k latent matrix
        cfg: Positive (target 1) and negative (target 0) pairs and gamma

    Returns:
        (value, gradient w.r.t. h)
    """
    h = as_dense(h, "latent")
    pos, neg = cfg.positive_edges, cfg.negative_edges
    if len(pos) == 0 or len(neg) == 0:
        raise ConfigError("link loss needs nonempty positive and negative edge lists")
    n = h.shape[0]
    if pos.max() >= n or neg.max() >= n:
        raise ShapeError(f"edge index out of range for {n} nodes")

    pairs = np.vstack([pos, neg])
    targets = np.concatenate([np.ones(len(pos)), np.zeros(len(neg))])
    logits = _pair_logits(h, pairs)
    # softplus(-z) for targets 1, softplus(z) for targets 0
    losses = np.logaddexp(0.0, np.where(targets > 0, -logits, logits))
    count = len(pairs)
    value = cfg.gamma * float(np.sum(losses)) / count

    coeff = cfg.gamma * (expit(logits) - targets) / count
    grad = np.zeros_like(h)
    np.add.at(grad, pairs[:, 0], coeff[:, None] * h[pairs[:, 1]])
    np.add.at(grad, pairs[:, 1], coeff[:, None] * h[pairs[:, 0]])
    return value, grad


def link_loss_dense(h: np.ndarray, adjacency: sp.spmatrix, gamma: float) -> tuple[float, np.ndarray]:
    """
    Dense cross-entropy over all n² entries of sigmoid(HHᵀ) against A + I.

    Only for n <= 500; used to cross-check the sampled cost.
    """
    h = as_dense(h, "latent")
    n = h.shape[0]
    if n > DENSE_LINK_MAX_NODES:
        raise ConfigError(f"dense link loss is limited to {DENSE_LINK_MAX_NODES} nodes, got {n}")
    targets = (np.asarray(adjacency.toarray()) > 0).astype(np.float64)
    np.fill_diagonal(targets, 1.0)
    logits = gemm(h, h, transpose_b=True)
    losses = np.logaddexp(0.0, np.where(targets > 0, -logits, logits))
    value = gamma * float(np.sum(losses)) / (n * n)
    coeff = gamma * (expit(logits) - targets) / (n * n)
    grad = gemm(coeff + coeff.T, h)
    return value, grad


def total_loss(
    trace: ForwardTrace,
    mode: LossMode,
    terms: LossTerms,
) -> tuple[float, np.ndarray, np.ndarray | None]:
    """
    Reconstruction cost on H^(M) plus the mode's latent cost on H^(M/2).

    Returns:
        (value, gradient at X̄, gradient at the latent or None)
    """
    value, grad_x_bar = recon_loss(trace.activations[0], trace.reconstruction)
    if mode == MODE_RECON:
        return value, grad_x_bar, None

    latent = trace.latent
    if mode == MODE_SUBSPACE:
        if terms.subspace is None:
            raise ConfigError("mode recon+subspace needs a SubspaceConfig")
        extra, grad_h = subspace_cost(latent.T, terms.subspace)
        return value + extra, grad_x_bar, grad_h.T

    if mode == MODE_LINK:
        if terms.link is None:
            raise ConfigError("mode recon+link needs a LinkConfig")
        if terms.link.gamma == 0.0:
            return value, grad_x_bar, None
        extra, grad_h = link_loss(latent, terms.link)
        return value + extra, grad_x_bar, grad_h

    raise ConfigError(f"Unknown loss mode: {mode!r}")
