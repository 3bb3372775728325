"""Clipped, KL-regularized surrogate objective over one group of rollouts.

All log-probabilities are sequence level: one number per sampled response.
The objective is meant to be maximized.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class RolloutLogProbs:
    logp_current: float
    logp_old: float
    logp_ref: float


def importance_ratio(logp_current, logp_old):
    """exp(logp_current - logp_old); deliberately unclamped."""
    return np.exp(np.asarray(logp_current, dtype=np.float64) - logp_old)


def clipped_term(ratio, a_eff, epsilon: float):
    ratio = np.asarray(ratio, dtype=np.float64)
    return np.minimum(ratio * a_eff, np.clip(ratio, 1.0 - epsilon, 1.0 + epsilon) * a_eff)


def kl_penalty(logp_current, logp_ref):
    """Non-negative k3 estimator of KL(current || ref) from a sample of the current policy."""
    d = np.asarray(logp_ref, dtype=np.float64) - logp_current
    return np.exp(d) - d - 1.0


def tarpo_objective(a_eff, logp_current, logp_old, logp_ref, epsilon: float, beta: float) -> float:
    """Group mean of the clipped surrogate minus beta times the mean KL estimate."""
    ratio = importance_ratio(logp_current, logp_old)
    surrogate = clipped_term(ratio, np.asarray(a_eff, dtype=np.float64), epsilon)
    kl = kl_penalty(logp_current, logp_ref)
    return float(np.mean(surrogate) - beta * np.mean(kl))


def tarpo_objective_logp_grad(a_eff, logp_current, logp_old, logp_ref, epsilon: float, beta: float) -> np.ndarray:
    """d objective / d logp_current for each rollout.

    Chain with the policy's score function to get the parameter gradient. When
    the clipped branch is the active minimum, the surrogate has zero slope.
    """
    a_eff = np.asarray(a_eff, dtype=np.float64)
    logp_current = np.asarray(logp_current, dtype=np.float64)
    g = len(a_eff)
    ratio = importance_ratio(logp_current, logp_old)
    unclipped = ratio * a_eff
    clipped = np.clip(ratio, 1.0 - epsilon, 1.0 + epsilon) * a_eff
    outside = (ratio < 1.0 - epsilon) | (ratio > 1.0 + epsilon)
    flat = outside & (clipped < unclipped)
    d_surrogate = np.where(flat, 0.0, unclipped)
    d_kl = 1.0 - np.exp(np.asarray(logp_ref, dtype=np.float64) - logp_current)
    return (d_surrogate - beta * d_kl) / g
