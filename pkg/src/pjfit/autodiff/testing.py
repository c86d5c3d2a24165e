"""Hooks for negative-control tests of the gradient machinery."""

from contextlib import contextmanager

from .tensor import _CORRUPTION


@contextmanager
def corrupted_backward(op, factor=1.5):
    """Scale the gradients produced by ``op``'s backward by ``factor``.

    Used to verify that gradient checks actually catch a wrong backward.
    """
    _CORRUPTION[op] = factor
    try:
        yield
    finally:
        _CORRUPTION.pop(op, None)
