"""Cross attention between requirement and experience vectors, followed by
importance pooling into one local vector per side.

Indexing convention: ``eta[l, k]`` weights requirement k for experience l
(rows sum to 1), ``eps[k, l]`` weights experience l for requirement k.
The pooled job vector mixes the n experience-attended rows; the pooled
resume vector mixes the m requirement-attended rows.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import ShapeError, Tensor, expand_dims, reshape, softmax, tanh
from .encoders import init_param


class CoAttentionParams:
    """Trainable weights for cross attention and importance pooling."""

    def __init__(self, name, dim, rng):
        self.dim = dim
        self.W1 = init_param(f"{name}.W1", (dim, dim), rng)
        self.U1 = init_param(f"{name}.U1", (dim, dim), rng)
        self.v1 = init_param(f"{name}.v1", (dim,), rng)
        self.W2 = init_param(f"{name}.W2", (dim, dim), rng)
        self.U2 = init_param(f"{name}.U2", (dim, dim), rng)
        self.v2 = init_param(f"{name}.v2", (dim,), rng)
        self.W3 = init_param(f"{name}.W3", (dim, dim), rng)
        self.b3 = init_param(f"{name}.b3", (dim,), rng)
        self.v_zeta = init_param(f"{name}.v_zeta", (dim,), rng)
        self.W4 = init_param(f"{name}.W4", (dim, dim), rng)
        self.b4 = init_param(f"{name}.b4", (dim,), rng)
        self.v_mu = init_param(f"{name}.v_mu", (dim,), rng)

    def parameters(self):
        return [
            self.W1, self.U1, self.v1,
            self.W2, self.U2, self.v2,
            self.W3, self.b3, self.v_zeta,
            self.W4, self.b4, self.v_mu,
        ]


@dataclass
class LocalRepresentation:
    """Pooled local vectors plus the attention maps that produced them."""

    job: Tensor       # [d]
    resume: Tensor    # [d]
    eta: np.ndarray   # [n, m]
    eps: np.ndarray   # [m, n]
    zeta: np.ndarray  # [n]
    mu: np.ndarray    # [m]


def _pairwise_scores(a, b, Wa, Wb, v):
    """score[i, j] = v' tanh(Wa a_i + Wb b_j) for all row pairs."""
    left = a @ Wa.value.T    # [na, d]
    right = b @ Wb.value.T   # [nb, d]
    grid = expand_dims(left, 1) + expand_dims(right, 0)  # [na, nb, d]
    return (tanh(grid) * v.value).sum(axis=2)            # [na, nb]


def cross_attend(h_j, h_r, params):
    """Mutual attention between m requirements and n experiences.

    Returns (attended_job [n, d], attended_resume [m, d], eta, eps):
    attended_job row l is the requirement mixture relevant to experience l;
    attended_resume row k is the experience mixture relevant to requirement k.
    """
    if h_j.ndim != 2 or h_r.ndim != 2 or h_j.shape[1] != h_r.shape[1]:
        raise ShapeError(f"cross_attend: bad shapes {h_j.shape} and {h_r.shape}")
    if h_j.shape[0] < 1 or h_r.shape[0] < 1:
        raise ShapeError("cross_attend: both sides need at least one sentence")
    eta = softmax(_pairwise_scores(h_r, h_j, params.W1, params.U1, params.v1))  # [n, m]
    attended_job = eta @ h_j                                                    # [n, d]
    eps = softmax(_pairwise_scores(h_j, h_r, params.W2, params.U2, params.v2))  # [m, n]
    attended_resume = eps @ h_r                                                 # [m, d]
    return attended_job, attended_resume, eta, eps


def _importance_pool(rows, W, b, v):
    scores = (tanh(rows @ W.value.T + b.value) * v.value).sum(axis=1)  # [n]
    weights = softmax(scores)
    n = rows.shape[0]
    pooled = reshape(reshape(weights, (1, n)) @ rows, (rows.shape[1],))
    return pooled, weights


def pool_local(attended_job, attended_resume, params):
    """Importance-weighted pooling of both attended sides."""
    job_vec, zeta = _importance_pool(attended_job, params.W3, params.b3, params.v_zeta)
    resume_vec, mu = _importance_pool(attended_resume, params.W4, params.b4, params.v_mu)
    return LocalRepresentation(
        job=job_vec,
        resume=resume_vec,
        eta=None,
        eps=None,
        zeta=zeta.data.copy(),
        mu=mu.data.copy(),
    )


def local_representation(h_j, h_r, params):
    """Full local pipeline: cross attention then importance pooling."""
    attended_job, attended_resume, eta, eps = cross_attend(h_j, h_r, params)
    rep = pool_local(attended_job, attended_resume, params)
    rep.eta = eta.data.copy()
    rep.eps = eps.data.copy()
    return rep
