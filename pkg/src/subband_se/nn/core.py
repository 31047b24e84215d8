"""Parameters, module containers and the Adam optimiser."""

from __future__ import annotations

from collections import OrderedDict

import numpy as np


class ShapeError(ValueError):
    pass


class Param:
    """A parameter tensor with its gradient and Adam moments."""

    __slots__ = ("value", "grad", "m", "v")

    def __init__(self, value):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = np.zeros_like(self.value)
        self.m = np.zeros_like(self.value)
        self.v = np.zeros_like(self.value)

    @property
    def shape(self):
        return self.value.shape

    @property
    def size(self):
        return self.value.size

    def __repr__(self):
        return f"Param(shape={self.value.shape})"


class Module:
    """Base class: collects ``Param`` and sub-``Module`` attributes in order."""

    def named_params(self, prefix=""):
        for name, attr in vars(self).items():
            if isinstance(attr, Param):
                yield prefix + name, attr
            elif isinstance(attr, Module):
                yield from attr.named_params(f"{prefix}{name}.")
            elif isinstance(attr, (list, tuple)):
                for i, item in enumerate(attr):
                    if isinstance(item, Module):
                        yield from item.named_params(f"{prefix}{name}.{i}.")

    def param_set(self, prefix="") -> "ParamSet":
        return ParamSet(self.named_params(prefix))

    def zero_grad(self):
        for _, p in self.named_params():
            p.grad[...] = 0.0

    def count_params(self) -> int:
        return sum(p.size for _, p in self.named_params())

    def astype(self, dtype):
        """Cast parameter values in place (e.g. float32 for inference)."""
        for _, p in self.named_params():
            p.value = p.value.astype(dtype)
        return self


class ParamSet(OrderedDict):
    """Named parameters plus the optimiser step counter."""

    def __init__(self, items=()):
        super().__init__(items)
        self.step = 0

    def zero_grad(self):
        for p in self.values():
            p.grad[...] = 0.0

    def count(self) -> int:
        return sum(p.size for p in self.values())

    def grad_norm(self) -> float:
        return float(np.sqrt(sum(np.sum(p.grad**2) for p in self.values())))


def adam_step(params: ParamSet, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
    """One bias-corrected Adam update over every parameter in ``params``."""
    params.step += 1
    t = params.step
    c1 = 1.0 - beta1**t
    c2 = 1.0 - beta2**t
    for p in params.values():
        p.m *= beta1
        p.m += (1.0 - beta1) * p.grad
        p.v *= beta2
        p.v += (1.0 - beta2) * p.grad**2
        p.value -= lr * (p.m / c1) / (np.sqrt(p.v / c2) + eps)


def clip_grad_norm(params: ParamSet, max_norm: float) -> float:
    norm = params.grad_norm()
    if max_norm > 0 and norm > max_norm:
        scale = max_norm / (norm + 1e-12)
        for p in params.values():
            p.grad *= scale
    return norm
