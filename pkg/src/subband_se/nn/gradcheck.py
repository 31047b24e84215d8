"""Central finite-difference checks against reverse-mode gradients."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class GradCheckReport:
    errors: dict = field(default_factory=dict)
    eps: float = 1e-5

    @property
    def max_rel_error(self) -> float:
        return max(self.errors.values()) if self.errors else 0.0

    def passed(self, tol) -> bool:
        return self.max_rel_error <= tol

    def __str__(self):
        lines = [f"{name}: {err:.3e}" for name, err in self.errors.items()]
        lines.append(f"max relative error: {self.max_rel_error:.3e}")
        return "\n".join(lines)


def relative_error(analytic, numeric) -> float:
    """``||a - n|| / max(||a||, ||n||)``; 0 when both vanish."""
    a = np.ravel(analytic)
    n = np.ravel(numeric)
    scale = max(np.linalg.norm(a), np.linalg.norm(n))
    if scale == 0.0:
        return 0.0
    return float(np.linalg.norm(a - n) / scale)


def grad_check(loss_fn, arrays, analytic, eps=1e-5, max_entries=None, rng=None) -> GradCheckReport:
    """Compare ``analytic[name]`` with central differences of ``loss_fn``.

    ``loss_fn()`` must read the arrays in ``arrays`` (perturbed in place).
    With ``max_entries`` only a random subset of each array is probed.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    report = GradCheckReport(eps=eps)
    for name, arr in arrays.items():
        flat = arr.reshape(-1)
        idx = np.arange(flat.size)
        if max_entries is not None and flat.size > max_entries:
            idx = rng.choice(flat.size, size=max_entries, replace=False)
        numeric = np.empty(idx.size)
        for j, i in enumerate(idx):
            orig = flat[i]
            flat[i] = orig + eps
            plus = loss_fn()
            flat[i] = orig - eps
            minus = loss_fn()
            flat[i] = orig
            numeric[j] = (plus - minus) / (2.0 * eps)
        report.errors[name] = relative_error(np.ravel(analytic[name])[idx], numeric)
    return report


def check_module(module, x, rng=None, eps=1e-5, max_entries=None, forward=None, backward=None):
    """Grad-check a layer on input ``x`` and all of its parameters.

    The scalar probed is ``sum(y * r)`` for a fixed random ``r``.
    """
    rng = np.random.default_rng(1) if rng is None else rng
    forward = forward or module.forward
    backward = backward or module.backward
    x = np.array(x, dtype=np.float64)
    r = rng.standard_normal(forward(x).shape)

    module.zero_grad()
    forward(x)
    dx = backward(r)
    analytic = {"input": dx}
    arrays = {"input": x}
    for name, p in module.named_params():
        analytic[name] = p.grad.copy()
        arrays[name] = p.value

    def loss():
        return float(np.sum(forward(x) * r))

    return grad_check(loss, arrays, analytic, eps=eps, max_entries=max_entries, rng=rng)
