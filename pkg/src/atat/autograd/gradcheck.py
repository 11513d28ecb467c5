"""Finite-difference verification of reverse-mode gradients."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .tensor import Tensor


@dataclass
class GradCheckReport:
    max_rel_error: float
    max_abs_error: float
    checked: int
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tolerance


def grad_check(fn: Callable[[], Tensor], leaves: Sequence[Tensor], h: float = 1e-4,
               tolerance: float = 1e-3, max_coords: int | None = None, seed: int = 0,
               floor: float = 1e-6) -> GradCheckReport:
    """Compare backward() against central differences of ``fn``.

    ``fn`` recomputes its output from ``leaves`` (perturbed in place). Leaves
    should be float64. Non-scalar outputs are reduced with a fixed random
    projection so every output element contributes. When ``max_coords`` is set
    only that many coordinates per leaf are probed.
    """
    rng = np.random.default_rng(seed)
    out = fn()
    proj = rng.standard_normal(out.shape)

    def scalar() -> float:
        return float(np.sum(fn().data * proj))

    for leaf in leaves:
        leaf.grad = None
    y = fn()
    (y * proj).sum().backward()
    analytic = [np.zeros_like(l.data) if l.grad is None else l.grad.copy() for l in leaves]

    worst_rel = worst_abs = 0.0
    checked = 0
    for leaf, ga in zip(leaves, analytic):
        flat = leaf.data.reshape(-1)
        coords = np.arange(flat.size)
        if max_coords is not None and flat.size > max_coords:
            coords = rng.choice(flat.size, size=max_coords, replace=False)
        for i in coords:
            orig = flat[i]
            flat[i] = orig + h
            up = scalar()
            flat[i] = orig - h
            down = scalar()
            flat[i] = orig
            num = (up - down) / (2 * h)
            a = ga.reshape(-1)[i]
            err = abs(a - num)
            worst_abs = max(worst_abs, err)
            worst_rel = max(worst_rel, err / max(abs(a), abs(num), floor))
            checked += 1
    return GradCheckReport(worst_rel, worst_abs, checked, tolerance)
