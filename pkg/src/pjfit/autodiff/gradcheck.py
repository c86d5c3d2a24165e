"""Finite-difference verification of analytic gradients.

Compares the tape's gradients against central differences computed by
re-running the forward function with perturbed parameter entries.  All
arithmetic is 64-bit; stochastic graphs (dropout) are refused.
"""

from __future__ import annotations

import numpy as np

from .tensor import GradCheckRefused, Tape, backward

STOCHASTIC_OPS = frozenset({"dropout"})


class GradCheckReport:
    """Per-parameter worst relative errors for one checked fragment."""

    def __init__(self, name, errors):
        self.name = name
        self.errors = errors  # param name -> max relative error

    @property
    def max_error(self):
        return max(self.errors.values()) if self.errors else 0.0

    def worst(self, k=3):
        return sorted(self.errors.items(), key=lambda kv: -kv[1])[:k]

    def passed(self, tolerance):
        return self.max_error < tolerance

    def lines(self, tolerance):
        out = [f"{self.name}: max rel. error {self.max_error:.3e} "
               f"({'PASS' if self.passed(tolerance) else 'FAIL'} at {tolerance:g})"]
        if not self.passed(tolerance):
            for pname, err in self.worst():
                out.append(f"  worst: {pname} rel. error {err:.3e}")
        return out


def grad_check(fn, params, tolerance=1e-4, step=1e-5, name="fragment"):
    """Check d(fn)/d(param) for every parameter against central differences.

    ``fn`` must evaluate to a scalar Tensor and close over ``params``.
    Relative error per entry is |analytic - numeric| / max(1, |numeric|).
    """
    params = list(params)
    with Tape() as tape:
        loss = fn()
        found = tape.op_kinds() & STOCHASTIC_OPS
        if found:
            raise GradCheckRefused(
                f"cannot finite-difference a stochastic graph (found {sorted(found)}); "
                "run the fragment in eval mode"
            )
        if loss.data.size != 1:
            raise ValueError(f"grad_check: fragment must be scalar, got shape {loss.shape}")
        analytic = backward(tape, loss, params)

    errors = {}
    for p in params:
        a = analytic[p.name]
        flat = p.value.data.reshape(-1)
        err = 0.0
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            hi = fn().item()
            flat[i] = orig - step
            lo = fn().item()
            flat[i] = orig
            numeric = (hi - lo) / (2.0 * step)
            err = max(err, abs(a.reshape(-1)[i] - numeric) / max(1.0, abs(numeric)))
        errors[p.name] = err
    return GradCheckReport(name, errors)


def numeric_gradient(fn, array, step=1e-5):
    """Central-difference gradient of scalar ``fn()`` w.r.t. ``array`` in place."""
    grad = np.zeros_like(array)
    flat = array.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        hi = fn()
        flat[i] = orig - step
        lo = fn()
        flat[i] = orig
        gflat[i] = (hi - lo) / (2.0 * step)
    return grad
