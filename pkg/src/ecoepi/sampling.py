"""Random parameter sets and states that respect the model's ordering constraints."""
from __future__ import annotations

import math

import numpy as np

from .model import ModelParams, StateOriginal, StateReformed, Variant

__all__ = ["random_params", "random_original_state", "random_reformed_state", "random_cubic"]


def random_params(rng: np.random.Generator, variant=Variant.HARMLESS, **fixed) -> ModelParams:
    """Draw rates in biologically moderate ranges; keyword arguments pin individual values."""
    variant = Variant(variant)
    v = {
        "r": rng.uniform(0.1, 1.0),
        "K": rng.uniform(1.0, 20.0),
        "sigma": rng.uniform(0.05, 1.0),
        "mu": rng.uniform(0.05, 1.0),
        "m": rng.uniform(0.05, 1.0),
    }
    w = rng.uniform(0.3, 1.0)
    q = rng.uniform(0.05, w)
    if variant is Variant.HARMLESS:
        g = rng.uniform(0.01, 0.95 * q)
        f = rng.uniform(g, 0.95 * w)
    else:
        g = rng.uniform(0.01, q)
        f = rng.uniform(0.01, w)
    v.update(q=q, w=w, g=g, f=f)
    v.update(fixed)
    return ModelParams(**v, variant=variant)


def random_original_state(rng: np.random.Generator, low=0.05, high=10.0) -> StateOriginal:
    S, I, P = rng.uniform(low, high, size=3)
    return StateOriginal(S, I, P)


def random_reformed_state(rng: np.random.Generator, K=10.0) -> StateReformed:
    """Interior point with ``0 < A < 1``, ``T`` up to about ``sqrt(2K)`` and moderate ``U``."""
    return StateReformed(rng.uniform(0.01, 0.99), rng.uniform(0.1, math.sqrt(2 * K)), rng.uniform(0.0, 3.0))


def random_cubic(rng: np.random.Generator):
    """Monic-scaled cubic with coefficients spread over several decades."""
    a3 = rng.choice([-1.0, 1.0]) * 10 ** rng.uniform(-2, 2)
    rest = rng.uniform(-1, 1, size=3) * 10 ** rng.uniform(-2, 2, size=3)
    return (a3, *rest)
