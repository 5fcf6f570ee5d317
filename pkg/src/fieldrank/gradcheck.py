"""Finite-difference verification of analytic gradients.

The checker perturbs every entry of every parameter in a store and compares
the central difference (L(x+h) - L(x-h)) / 2h against the gradient the
model's own backward pass produced. It is the ground truth the explicit
backward implementations are held to.

An entry is certified when its relative error is below the tolerance or
its absolute error is below `abs_tolerance`. The absolute tier exists
because a central difference of a float64 loss carries roundoff noise of
roughly ulp(L)/2h (about 1e-10 for unit-scale losses at h=1e-6), so
entries whose true gradient is near zero, including ones that are exactly
zero by construction (a pairwise margin is invariant to score
translations), cannot meet any relative tolerance; they are instead
required to vanish at finite-difference resolution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericError, UsageError


@dataclass
class ParamCheck:
    max_rel_error: float
    max_abs_error: float
    n_entries: int
    n_uncertified: int


@dataclass
class GradCheckReport:
    per_param: dict[str, ParamCheck]
    rel_tolerance: float
    abs_tolerance: float

    @property
    def max_rel_error(self) -> float:
        return max(c.max_rel_error for c in self.per_param.values())

    @property
    def worst_param(self) -> str:
        return max(self.per_param, key=lambda n: self.per_param[n].max_rel_error)

    @property
    def n_uncertified(self) -> int:
        return sum(c.n_uncertified for c in self.per_param.values())

    def passed(self) -> bool:
        return self.n_uncertified == 0


def relative_error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-12)


def numerical_grad_check(
    loss_fn,
    store,
    h: float = 1e-6,
    tolerance: float = 1e-5,
    abs_tolerance: float = 1e-8,
) -> GradCheckReport:
    """Compare analytic gradients against central finite differences.

    `loss_fn` takes no arguments, returns the scalar loss for the current
    parameter values and accumulates the analytic gradients into `store`.
    It must be deterministic (fix any batch and RNG outside).
    """
    if h <= 0.0:
        raise UsageError(f"finite-difference step must be positive, got {h}")
    if len(store) == 0:
        raise UsageError("parameter store is empty")

    store.zero_grad()
    base = float(loss_fn())
    if not np.isfinite(base):
        raise NumericError(f"loss is not finite at the current parameters ({base})")
    analytic = {name: p.grad.copy() for name, p in store.items()}

    per_param: dict[str, ParamCheck] = {}
    for name, p in store.items():
        flat = p.value.reshape(-1)
        a_flat = analytic[name].reshape(-1)
        worst_rel = 0.0
        worst_abs = 0.0
        failed = 0
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            lp = float(loss_fn())
            flat[i] = orig - h
            lm = float(loss_fn())
            flat[i] = orig
            if not (np.isfinite(lp) and np.isfinite(lm)):
                raise NumericError(
                    f"non-finite loss while probing parameter '{name}' entry {i}"
                )
            numeric = (lp - lm) / (2.0 * h)
            rel = relative_error(a_flat[i], numeric)
            abs_err = abs(a_flat[i] - numeric)
            worst_rel = max(worst_rel, rel)
            worst_abs = max(worst_abs, abs_err)
            if rel >= tolerance and abs_err >= abs_tolerance:
                failed += 1
        per_param[name] = ParamCheck(
            max_rel_error=worst_rel,
            max_abs_error=worst_abs,
            n_entries=flat.size,
            n_uncertified=failed,
        )

    store.zero_grad()
    return GradCheckReport(per_param, tolerance, abs_tolerance)
