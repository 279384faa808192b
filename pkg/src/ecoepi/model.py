"""Herd-defense ecoepidemic model: parameters, state spaces and vector fields.

Two coordinate systems are supported.  The original populations ``(S, I, P)``
(healthy prey, infected prey, predators) and the singularity-free coordinates

    A = S / (S + I),   T = sqrt(S + I),   U = P / sqrt(S + I)

in which the system is polynomial.  Every function takes a :class:`ModelParams`
whose ``variant`` selects the harmless or the toxic-prey model; the two differ
only in the sign of the infected-prey conversion term of the predator equation.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, fields, replace

import numpy as np

__all__ = [
    "Variant",
    "ModelParams",
    "StateOriginal",
    "StateReformed",
    "ModelDomainError",
    "ParameterDomainError",
    "StateDomainError",
    "SingularTransformError",
    "rhs_original",
    "rhs_reformed",
    "to_reformed",
    "to_original",
    "transform_derivative",
    "jacobian_reformed",
    "PARAM_NAMES",
]

PARAM_NAMES = ("r", "K", "sigma", "mu", "q", "w", "m", "g", "f")


class ModelDomainError(ValueError):
    """Base class for inputs outside the model's domain."""


class ParameterDomainError(ModelDomainError):
    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key


class StateDomainError(ModelDomainError):
    pass


class SingularTransformError(StateDomainError):
    pass


class Variant(str, enum.Enum):
    HARMLESS = "harmless"
    TOXIC = "toxic"

    @property
    def prefix(self):
        """Equilibrium label prefix: E for harmless prey, P for toxic prey."""
        return "E" if self is Variant.HARMLESS else "P"


@dataclass(frozen=True)
class ModelParams:
    """Rates and capacity of the model plus the variant switch.

    Parameters
    ----------
    r : healthy-prey birth rate.
    K : carrying capacity.
    sigma : disease incidence.
    mu : infected-prey mortality (natural plus disease-related).
    q, w : predation rates on healthy and infected prey.
    m : predator death rate.
    g, f : predator conversion from healthy and infected prey.
    variant : harmless or toxic infected prey.
    check_constraints : enforce the ecological ordering of the predation and
        conversion rates.  Harmless: ``q <= w, g <= f, g < q, f < w``; toxic:
        ``g <= q, f <= w, q <= w``.  Set to False to explore outside them.
    """

    r: float
    K: float
    sigma: float
    mu: float
    q: float
    w: float
    m: float
    g: float
    f: float
    variant: Variant = Variant.HARMLESS
    check_constraints: bool = True

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        for name in PARAM_NAMES:
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, float, np.floating, np.integer)):
                raise ParameterDomainError(name, f"expected a real number, got {value!r}")
            value = float(value)
            if not math.isfinite(value):
                raise ParameterDomainError(name, "must be finite")
            if value < 0:
                raise ParameterDomainError(name, f"must be nonnegative, got {value}")
            object.__setattr__(self, name, value)
        if self.K <= 0:
            raise ParameterDomainError("K", "carrying capacity must be positive")
        if self.r <= 0:
            raise ParameterDomainError("r", "birth rate must be positive")
        if self.check_constraints:
            self._check_ordering()

    def _check_ordering(self):
        q, w, g, f = self.q, self.w, self.g, self.f
        if self.variant is Variant.HARMLESS:
            rules = [("q", q <= w, "q <= w"), ("g", g <= f, "g <= f"),
                     ("g", g < q, "g < q"), ("f", f < w, "f < w")]
        else:
            rules = [("g", g <= q, "g <= q"), ("f", f <= w, "f <= w"), ("q", q <= w, "q <= w")]
        for key, ok, text in rules:
            if not ok:
                raise ParameterDomainError(
                    key, f"violates {text} for the {self.variant.value} variant "
                         "(pass check_constraints=False to override)")

    @property
    def toxic(self) -> bool:
        return self.variant is Variant.TOXIC

    def with_(self, **changes) -> "ModelParams":
        return replace(self, **changes)

    def as_dict(self) -> dict:
        return {name: getattr(self, name) for name in PARAM_NAMES}

    @classmethod
    def from_dict(cls, values, variant=Variant.HARMLESS, check_constraints=True):
        known = {f.name for f in fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise ParameterDomainError(sorted(unknown)[0], "unknown parameter")
        missing = [n for n in PARAM_NAMES if n not in values]
        if missing:
            raise ParameterDomainError(missing[0], "missing parameter")
        kw = dict(values)
        kw.setdefault("variant", variant)
        kw.setdefault("check_constraints", check_constraints)
        return cls(**kw)


def _finite_nonneg(name, value):
    value = float(value)
    if not math.isfinite(value):
        raise StateDomainError(f"{name} must be finite, got {value}")
    if value < 0:
        raise StateDomainError(f"{name} must be nonnegative, got {value}")
    return value


@dataclass(frozen=True)
class StateOriginal:
    S: float
    I: float
    P: float

    def __post_init__(self):
        for name in ("S", "I", "P"):
            object.__setattr__(self, name, _finite_nonneg(name, getattr(self, name)))

    def as_array(self):
        return np.array([self.S, self.I, self.P])

    def __iter__(self):
        return iter((self.S, self.I, self.P))


@dataclass(frozen=True)
class StateReformed:
    """Healthy fraction ``A``, boundary prey ``T`` and predators per boundary prey ``U``."""

    A: float
    T: float
    U: float

    def __post_init__(self):
        A = _finite_nonneg("A", self.A)
        if A > 1:
            raise StateDomainError(f"A must lie in [0, 1], got {A}")
        T = _finite_nonneg("T", self.T)
        if T == 0:
            raise StateDomainError("T must be positive")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "T", T)
        object.__setattr__(self, "U", _finite_nonneg("U", self.U))

    def as_array(self):
        return np.array([self.A, self.T, self.U])

    def __iter__(self):
        return iter((self.A, self.T, self.U))


def rhs_original(p: ModelParams, x: StateOriginal) -> np.ndarray:
    """Time derivative ``(dS/dt, dI/dt, dP/dt)`` in the original populations.

    At total prey extinction ``S = I = 0`` the continuous extension
    ``(0, 0, -m P)`` is returned.
    """
    return original_field(p, x.S, x.I, x.P)


def original_field(p, S, I, P):
    # Unchecked evaluation, shared with the original-coordinate integrator.
    N = S + I
    if N == 0.0:
        return np.array([0.0, 0.0, -p.m * P])
    rootN = math.sqrt(N)
    incidence = p.sigma * S * I / N
    dS = p.r * S * (1.0 - N / p.K) - incidence - p.q * P * S * rootN / N
    dI = incidence - p.w * P * I * rootN / N - p.mu * I
    sign = -1.0 if p.toxic else 1.0
    dP = -p.m * P + p.g * P * S / rootN + sign * p.f * P * I / rootN
    return np.array([dS, dI, dP])


def rhs_reformed(p: ModelParams, y: StateReformed) -> np.ndarray:
    """Time derivative ``(dA/dt, dT/dt, dU/dt)`` of the singularity-free system."""
    return np.array(reformed_field(p, y.A, y.T, y.U))


def reformed_field(p, A, T, U):
    # Each equation is written with its invariant face factored out
    # (A(1-A), T, U); expanding the brackets gives the polynomial form term by term.
    r, K, sigma, mu, q, w, m, g, f = (p.r, p.K, p.sigma, p.mu, p.q, p.w, p.m, p.g, p.f)
    rK = r / K
    T2 = T * T
    dA = A * (1.0 - A) * ((r + mu - sigma) - rK * T2 + (w - q) * U)
    dT = T * (-0.5 * rK * A * T2 - 0.5 * mu + 0.5 * (r + mu) * A
              - 0.5 * w * U + 0.5 * (w - q) * A * U)
    if p.variant is Variant.TOXIC:
        conv_a, conv_t = g + f, -f
    else:
        conv_a, conv_t = g - f, f
    dU = U * (0.5 * w * U + 0.5 * (q - w) * A * U + 0.5 * mu - m + conv_a * A * T
              - 0.5 * (r + mu) * A + conv_t * T + 0.5 * rK * A * T2)
    return dA, dT, dU


def to_reformed(x: StateOriginal) -> StateReformed:
    N = x.S + x.I
    if N <= 0:
        raise SingularTransformError("S + I = 0: the reformed coordinates are undefined")
    T = math.sqrt(N)
    return StateReformed(A=min(x.S / N, 1.0), T=T, U=x.P / T)


def to_original(y: StateReformed) -> StateOriginal:
    T2 = y.T * y.T
    I = 0.0 if y.A == 1.0 else max((1.0 - y.A) * T2, 0.0)
    return StateOriginal(S=y.A * T2, I=I, P=y.U * y.T)


def transform_derivative(x: StateOriginal) -> np.ndarray:
    """Analytic Jacobian of ``to_reformed`` with respect to ``(S, I, P)``."""
    S, I, P = x.S, x.I, x.P
    N = S + I
    if N <= 0:
        raise SingularTransformError("S + I = 0: the reformed coordinates are undefined")
    T = math.sqrt(N)
    dT = 0.5 / T
    dU = -0.5 * P / (N * T)
    return np.array([
        [I / (N * N), -S / (N * N), 0.0],
        [dT, dT, 0.0],
        [dU, dU, 1.0 / T],
    ])


def jacobian_reformed(p: ModelParams, y: StateReformed) -> np.ndarray:
    """Analytic Jacobian of :func:`rhs_reformed`; row i is equation i."""
    return jacobian_entries(p, y.A, y.T, y.U)


def jacobian_entries(p, A, T, U):
    r, K, sigma, mu, q, w, m, g, f = (p.r, p.K, p.sigma, p.mu, p.q, p.w, p.m, p.g, p.f)
    rK = r / K
    T2 = T * T
    J = np.empty((3, 3))
    J[0, 0] = (2 * A - 1) * ((sigma - r - mu) + (q - w) * U + rK * T2)
    J[0, 1] = 2 * rK * A * T * (A - 1)
    J[0, 2] = (q - w) * A * (A - 1)
    J[1, 0] = -0.5 * rK * T2 * T + 0.5 * (r + mu) * T + 0.5 * (w - q) * U * T
    J[1, 1] = (-1.5 * rK * A * T2 - 0.5 * mu + 0.5 * (r + mu) * A
               - 0.5 * w * U + 0.5 * (w - q) * A * U)
    J[1, 2] = -0.5 * w * T + 0.5 * (w - q) * A * T
    if p.variant is Variant.TOXIC:
        conv_a, conv_t = g + f, -f
    else:
        conv_a, conv_t = g - f, f
    J[2, 0] = 0.5 * (q - w) * U * U + conv_a * U * T - 0.5 * (r + mu) * U + 0.5 * rK * U * T2
    J[2, 1] = conv_a * A * U + conv_t * U + rK * A * U * T
    J[2, 2] = (w * U + (q - w) * A * U + 0.5 * mu - m + conv_a * A * T
               - 0.5 * (r + mu) * A + conv_t * T + 0.5 * rK * A * T2)
    return J
