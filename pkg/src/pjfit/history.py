"""Historical-success index and per-pair relation graphs.

For a pair (job, resume) the related jobs are those that successfully
hired this resume before, and the related resumes are those this job
successfully hired before.  Each side becomes a complete weighted graph:
node 0 is the current entity, nodes 1..q the related ones, edge weights
from a pluggable similarity function.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class HistoryIndex:
    """Immutable inverted index over successful (job, resume) records."""

    def __init__(self, success_pairs):
        self._pairs = set()
        self._jobs_by_resume = {}
        self._resumes_by_job = {}
        for job_id, resume_id in success_pairs:
            if (job_id, resume_id) in self._pairs:
                continue
            self._pairs.add((job_id, resume_id))
            self._jobs_by_resume.setdefault(resume_id, set()).add(job_id)
            self._resumes_by_job.setdefault(job_id, set()).add(resume_id)

    def __len__(self):
        return len(self._pairs)

    def __contains__(self, pair):
        return tuple(pair) in self._pairs

    @property
    def pairs(self):
        return set(self._pairs)

    def related_jobs(self, current_job, current_resume):
        """Jobs that successfully hired the current resume, excluding the
        current job itself; ascending id order."""
        related = self._jobs_by_resume.get(current_resume, ())
        return sorted(j for j in related if j != current_job)

    def related_resumes(self, current_job, current_resume):
        """Resumes the current job successfully hired, excluding the current
        resume itself; ascending id order."""
        related = self._resumes_by_job.get(current_job, ())
        return sorted(r for r in related if r != current_resume)


def find_related_jobs(current_job, current_resume, index):
    return index.related_jobs(current_job, current_resume)


def find_related_resumes(current_job, current_resume, index):
    return index.related_resumes(current_job, current_resume)


@dataclass
class RecruitmentGraph:
    """Complete weighted graph: node 0 is the current entity."""

    node_ids: list
    adjacency: np.ndarray  # symmetric [q+1, q+1], zero diagonal by default
    self_loops: bool = False

    @property
    def size(self):
        return len(self.node_ids)

    def propagation_matrix(self, normalize_rows=True):
        """Adjacency as used for aggregation: optionally row-sum normalized
        (rows with non-positive sums are left untouched)."""
        A = self.adjacency.copy()
        if normalize_rows:
            sums = A.sum(axis=1)
            for i, s in enumerate(sums):
                if s > 1e-12:
                    A[i] /= s
        return A


def build_graph(current_id, related_ids, docs, similarity_fn, max_related=20, self_loops=False):
    """Complete graph over the current entity and its related entities.

    When more than ``max_related`` related entities exist, the ones most
    similar to the current entity are kept (ties broken by ascending id,
    so the result is order independent).  The adjacency is symmetric with
    the diagonal 0 unless ``self_loops`` is set, in which case diagonal
    entries hold each node's self-similarity.
    """
    related = list(related_ids)
    if len(related) > max_related:
        scored = sorted(
            related,
            key=lambda rid: (-similarity_fn.similarity(docs[current_id], docs[rid]), rid),
        )
        related = sorted(scored[:max_related])
    nodes = [current_id] + related
    q1 = len(nodes)
    A = np.zeros((q1, q1))
    for i in range(q1):
        for j in range(i + 1, q1):
            s = similarity_fn.similarity(docs[nodes[i]], docs[nodes[j]])
            A[i, j] = s
            A[j, i] = s
    if self_loops:
        for i in range(q1):
            A[i, i] = similarity_fn.similarity(docs[nodes[i]], docs[nodes[i]])
    return RecruitmentGraph(node_ids=nodes, adjacency=A, self_loops=self_loops)
