"""Equilibria of the reformed system and their feasibility conditions.

Five equilibrium families exist (E1..E5 for harmless prey, P1..P5 for toxic
prey).  E1..E4 are closed form; E5 comes from a cubic in the healthy fraction
``A``.  Every candidate is returned as an :class:`EquilibriumRecord` carrying
a signed-margin feasibility report and the residual of the vector field at the
reported point, so a record is self-verifying.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .cubic import CubicCoeffs, polyval, real_roots
from .model import ModelParams, StateDomainError, StateReformed, Variant, reformed_field

__all__ = [
    "EquilibriumId",
    "Status",
    "Condition",
    "FeasibilityReport",
    "EquilibriumRecord",
    "equilibrium_boundary",
    "equilibrium_E3",
    "equilibrium_E4",
    "equilibrium_E5",
    "all_equilibria",
    "e5_cubic",
    "equal_rates",
    "RESIDUAL_TOL",
    "BOUNDARY_TOL",
]

RESIDUAL_TOL = 1e-10
BOUNDARY_TOL = 1e-12
EQUAL_RATE_TOL = 1e-12
COINCIDENCE_TOL = 1e-9


class EquilibriumId(str, enum.Enum):
    E1 = "E1"
    E2 = "E2"
    E3 = "E3"
    E4 = "E4"
    E5 = "E5"

    @property
    def index(self):
        return int(self.value[1])

    def label(self, variant):
        return f"{Variant(variant).prefix}{self.index}"


class Status(str, enum.Enum):
    FEASIBLE = "feasible"
    INFEASIBLE = "infeasible"
    NOT_APPLICABLE = "not_applicable"


@dataclass(frozen=True)
class Condition:
    """One inequality with its signed distance from the threshold.

    ``margin`` is (larger side) - (smaller side) of the inequality as written,
    so it is positive when the inequality holds strictly.
    """

    label: str
    margin: float
    strict: bool = True
    scale: float = 1.0

    @property
    def satisfied(self) -> bool:
        if math.isnan(self.margin):
            return False
        return self.margin > 0 if self.strict else self.margin >= 0

    @property
    def boundary(self) -> bool:
        return abs(self.margin) <= BOUNDARY_TOL * max(1.0, self.scale)

    def to_dict(self):
        return {"label": self.label, "satisfied": self.satisfied, "margin": self.margin,
                "strict": self.strict, "boundary": self.boundary}


def less(label, lhs, rhs, strict=True):
    """Condition ``lhs < rhs`` (or ``<=``)."""
    return Condition(label, rhs - lhs, strict, max(abs(lhs), abs(rhs)) if math.isfinite(lhs) and math.isfinite(rhs) else 1.0)


def greater(label, lhs, rhs, strict=True):
    """Condition ``lhs > rhs`` (or ``>=``)."""
    return less(label, rhs, lhs, strict)


@dataclass(frozen=True)
class FeasibilityReport:
    conditions: tuple[Condition, ...] = ()

    @property
    def feasible(self) -> bool:
        return all(c.satisfied for c in self.conditions)

    @property
    def boundary(self) -> bool:
        return any(c.boundary for c in self.conditions)

    @property
    def margin(self) -> float:
        """Smallest margin; positive exactly when every strict condition holds."""
        if not self.conditions:
            return math.inf
        return min(c.margin for c in self.conditions)

    def __iter__(self):
        return iter(self.conditions)

    def to_dict(self):
        return [c.to_dict() for c in self.conditions]


@dataclass(frozen=True)
class EquilibriumRecord:
    id: EquilibriumId
    variant: Variant
    status: Status
    coords: tuple[float, float, float] | None = None
    feasibility: FeasibilityReport = field(default_factory=FeasibilityReport)
    residual: float = math.nan
    reason: str | None = None
    flags: tuple[str, ...] = ()
    coincident_with: EquilibriumId | None = None

    @property
    def label(self):
        return self.id.label(self.variant)

    @property
    def feasible(self):
        return self.status is Status.FEASIBLE

    @property
    def state(self) -> StateReformed | None:
        if self.coords is None:
            return None
        try:
            return StateReformed(*self.coords)
        except StateDomainError:
            return None

    def to_dict(self):
        return {
            "id": self.id.value,
            "label": self.label,
            "variant": self.variant.value,
            "status": self.status.value,
            "state": None if self.coords is None else dict(zip("ATU", self.coords)),
            "feasibility": self.feasibility.to_dict(),
            "residual": self.residual,
            "reason": self.reason,
            "flags": list(self.flags),
            "coincident_with": None if self.coincident_with is None else self.coincident_with.value,
        }


def _residual(p, coords):
    return float(np.max(np.abs(reformed_field(p, *coords))))


def _valid_state(coords):
    A, T, U = coords
    return all(map(math.isfinite, coords)) and 0 <= A <= 1 and T > 0 and U >= 0


def _record(p, eq_id, coords, conditions, reason=None, flags=()):
    """Assemble a record; feasibility needs the conditions, a valid state and a small residual."""
    report = FeasibilityReport(tuple(conditions))
    residual = math.nan
    if coords is not None:
        coords = tuple(float(c) for c in coords)
        if all(map(math.isfinite, coords)):
            residual = _residual(p, coords)
        else:
            coords, reason = None, reason or "coordinates undefined"
    status = Status.INFEASIBLE
    if coords is not None and report.feasible:
        if not _valid_state(coords):
            reason = reason or "coordinates outside the state space"
        elif not residual <= RESIDUAL_TOL * (1 + max(map(abs, coords))):
            reason = "residual check failed"
        else:
            status = Status.FEASIBLE
    elif coords is not None and reason is None:
        failed = [c.label for c in report if not c.satisfied]
        reason = "violates " + "; ".join(failed)
    if report.boundary:
        flags = tuple(flags) + ("boundary",)
    return EquilibriumRecord(eq_id, p.variant, status, coords, report, residual, reason, tuple(flags))


def _not_applicable(p, eq_id, reason):
    return EquilibriumRecord(eq_id, p.variant, Status.NOT_APPLICABLE, reason=reason)


def equal_rates(p: ModelParams) -> bool:
    """True when ``q == w`` up to the relative gating tolerance (E4 vs E5)."""
    return abs(p.q - p.w) <= EQUAL_RATE_TOL * max(p.q, p.w, 1e-300)


def _coincide(a, b):
    scale = max(1.0, *map(abs, a), *map(abs, b))
    return max(abs(x - y) for x, y in zip(a, b)) <= COINCIDENCE_TOL * scale


def equilibrium_boundary(p: ModelParams) -> list[EquilibriumRecord]:
    """Predator-free equilibria E1 = (1, sqrt(K), 0) and E2 = (mu/sigma, T2, 0)."""
    e1 = _record(p, EquilibriumId.E1, (1.0, math.sqrt(p.K), 0.0), ())
    c = p.r + p.mu - p.sigma
    toxic = p.toxic
    if toxic:
        conditions = [greater("r + mu >= sigma", p.r + p.mu, p.sigma, strict=False),
                      greater("sigma >= mu", p.sigma, p.mu, strict=False)]
    else:
        conditions = [greater("r + mu > sigma", p.r + p.mu, p.sigma),
                      less("mu < sigma", p.mu, p.sigma)]
    if p.sigma == 0:
        e2 = _record(p, EquilibriumId.E2, None, conditions, reason="A undefined (sigma = 0)")
    elif c < 0:
        e2 = _record(p, EquilibriumId.E2, None, conditions, reason="T undefined (r + mu - sigma < 0)")
    else:
        coords = (p.mu / p.sigma, math.sqrt(p.K * c / p.r), 0.0)
        e2 = _record(p, EquilibriumId.E2, coords, conditions)
        if _coincide(coords, e1.coords):
            e2 = _with(e2, coincident_with=EquilibriumId.E1, flags=e2.flags + ("degenerate",))
    return [e1, e2]


def _with(rec, **changes):
    return replace(rec, **changes)


def equilibrium_E3(p: ModelParams) -> EquilibriumRecord:
    """Disease-free coexistence E3 = (1, m/g, r (g^2 K - m^2) / (g^2 q K))."""
    threshold = (p.m / p.g) ** 2 if p.g > 0 else math.inf
    if p.toxic:
        conditions = [greater("K >= (m/g)^2", p.K, threshold, strict=False)]
    else:
        conditions = [greater("K > (m/g)^2", p.K, threshold)]
    if p.g == 0 or p.q == 0:
        which = "g = 0" if p.g == 0 else "q = 0"
        return _record(p, EquilibriumId.E3, None, conditions, reason=f"undefined ({which})")
    g2K = p.g * p.g * p.K
    coords = (1.0, p.m / p.g, p.r * (g2K - p.m * p.m) / (g2K * p.q))
    rec = _record(p, EquilibriumId.E3, coords, conditions)
    flags = rec.flags
    if abs(coords[2]) <= BOUNDARY_TOL * max(1.0, abs(p.r / p.q)):
        flags += ("degenerate",)
    if _coincide(coords, (1.0, math.sqrt(p.K), 0.0)):
        rec = _with(rec, coincident_with=EquilibriumId.E1)
    return _with(rec, flags=tuple(dict.fromkeys(flags)))


def equilibrium_E4(p: ModelParams) -> EquilibriumRecord:
    """Endemic coexistence for equal predation rates ``q == w``."""
    if not equal_rates(p):
        return _not_applicable(p, EquilibriumId.E4, "requires q = w")
    r, K, sigma, mu, w, m, g, f = p.r, p.K, p.sigma, p.mu, p.w, p.m, p.g, p.f
    c = r + mu - sigma
    if p.toxic:
        conditions = [greater("r + mu >= sigma", r + mu, sigma, strict=False)]
    else:
        conditions = [greater("r + mu > sigma", r + mu, sigma)]
    if c <= 0:
        return _record(p, EquilibriumId.E4, None, conditions, reason="T4 undefined (r + mu - sigma <= 0)")
    T = math.sqrt(K * c / r)
    if w == 0:
        return _record(p, EquilibriumId.E4, None, conditions, reason="U4 undefined (w = 0)")

    if p.toxic:
        if f + g == 0:
            return _record(p, EquilibriumId.E4, None, conditions, reason="A4 undefined (f + g = 0)")
        A = (m + f * T) / ((f + g) * T)
        U = sigma * (m + f * T) / (w * (f + g) * T) - mu / w
        rhs = (sigma / mu) * (m + f * T) - f * T if mu > 0 else math.inf
        conditions.append(less("T4 g <= (sigma/mu)(m + f T4) - f T4", T * g, rhs, strict=False))
    else:
        if g == f:
            return _record(p, EquilibriumId.E4, None, conditions, reason="A4 undefined (g = f)")
        R = m * math.sqrt(r / (K * c))
        A = (R - f) / (g - f)
        U = (sigma * A - mu) / w
        denom = (sigma - mu) * f + mu * g
        threshold = m * m * r * sigma * sigma / (denom * denom * c) if denom != 0 else math.inf
        conditions.insert(0, greater("K > m^2 r sigma^2 / ([(sigma-mu) f + mu g]^2 (r+mu-sigma))",
                                     K, threshold))
        conditions.insert(1, greater("sigma f + mu g > mu f", sigma * f + mu * g, mu * f))
    # Required for A4 to be a fraction; the other conditions do not imply it.
    conditions.append(less("A4 <= 1", A, 1.0, strict=False))
    return _record(p, EquilibriumId.E4, (A, T, U), conditions)


def e5_cubic(p: ModelParams, uncorrected: bool = False) -> CubicCoeffs:
    """Coefficients ``(b3, b2, b1, b0)`` of the cubic whose roots are the E5 healthy fractions.

    The cubic is ``K L(A)^2 (sigma (q-w) A + h) + m^2 r w`` with
    ``h = w sigma - r w - q mu`` and ``L(A) = (g -+ f) A +- f`` the predator
    balance denominator (upper signs harmless, lower signs toxic).

    ``uncorrected=True`` returns the variant in which ``b3`` and ``b2``
    (harmless) and ``b2`` (toxic) carry ``K**2`` in place of ``K``.  Roots of
    that variant fail the equilibrium residual check; it exists so tests can
    show the difference.
    """
    r, K, sigma, mu, q, w, m, g, f = (p.r, p.K, p.sigma, p.mu, p.q, p.w, p.m, p.g, p.f)
    h = w * sigma - r * w - q * mu
    d = q - w
    Kq = K * K if uncorrected else K
    if p.toxic:
        G = g + f
        return CubicCoeffs(
            sigma * d * K * G * G,
            h * Kq * G * G - 2 * f * G * sigma * d * K,
            f * f * sigma * d * K - 2 * f * G * h * K,
            f * f * h * K + m * m * r * w,
        )
    G = g - f
    return CubicCoeffs(
        sigma * d * Kq * G * G,
        2 * f * G * sigma * d * K + h * Kq * G * G,
        f * f * sigma * d * K + 2 * f * G * h * K,
        f * f * h * K + m * m * r * w,
    )


def e5_existence_conditions(p: ModelParams):
    """Sufficient conditions for a positive root of the E5 cubic (constant term positive)."""
    h = p.w * p.sigma - p.r * p.w - p.q * p.mu
    feas1 = h >= 0
    if h < 0:
        bound = (p.m / p.f) ** 2 * p.r * p.w / (-h) if p.f > 0 else math.inf
        feas2 = p.K < bound
    else:
        feas2 = False
    return feas1, feas2


def equilibrium_E5(p: ModelParams) -> list[EquilibriumRecord]:
    """Endemic coexistence for ``q < w``: one record per positive real root of :func:`e5_cubic`.

    Records are ordered by ascending ``A``.  Roots that land outside the state
    space (``A > 1``, ``T <= 0`` or ``U < 0``) are still returned, marked
    infeasible, so the existence of a positive root stays observable.
    """
    if equal_rates(p) or p.q > p.w:
        return [_not_applicable(p, EquilibriumId.E5, "requires q < w")]
    r, K, sigma, mu, q, w, m, g, f = (p.r, p.K, p.sigma, p.mu, p.q, p.w, p.m, p.g, p.f)
    c = r + mu - sigma
    if p.toxic:
        base = [greater("r + mu >= sigma", r + mu, sigma, strict=False)]
    else:
        base = [greater("r + mu > sigma", r + mu, sigma)]
    # With r + mu - sigma <= 0 the roots are still reported (infeasible through
    # the base condition) so that the existence of a positive root stays visible.
    cubic = e5_cubic(p)
    flags = []
    if abs(cubic.a0) <= BOUNDARY_TOL * cubic.scale:
        flags.append("degenerate: cubic through the origin, healthy prey wiped out (A = 0)")
    feas1, feas2 = e5_existence_conditions(p)
    if feas1:
        flags.append("positive constant term: w sigma >= rw + q mu")
    if feas2:
        flags.append("positive constant term: K below (m/f)^2 rw/(rw + q mu - w sigma)")

    conv_a, conv_t = (g + f, -f) if p.toxic else (g - f, f)
    records = []
    for A in real_roots(cubic):
        if not A > BOUNDARY_TOL:
            continue
        L = conv_a * A + conv_t
        conditions = list(base)
        conditions.append(less("A5 <= 1", A, 1.0, strict=False))
        if L == 0:
            records.append(_record(p, EquilibriumId.E5, None, conditions,
                                   reason="T5 undefined", flags=flags))
            continue
        T = m / L
        U = (c - (r / K) * m * m / (L * L)) / (q - w)
        conditions.append(greater("T5 > 0", T, 0.0))
        if p.toxic and c > 0:
            bound = (m * math.sqrt(r / (K * c)) + f) / (f + g)
            conditions.append(less("A5 <= (m sqrt(r/(K(r+mu-sigma))) + f)/(f+g)", A, bound, strict=False))
        conditions.append(greater("U5 >= 0", U, 0.0, strict=False))
        rec = _record(p, EquilibriumId.E5, (A, T, U), conditions, flags=flags)
        if abs(A - 1.0) <= COINCIDENCE_TOL:
            rec = _with(rec, coincident_with=EquilibriumId.E3)
        records.append(rec)
    if not records:
        records.append(_record(p, EquilibriumId.E5, None, base,
                               reason="no positive real root", flags=flags))
    return records


def cubic_residual(p: ModelParams, A: float) -> float:
    """|P(A)| / max|b_k| for the E5 cubic."""
    c = e5_cubic(p)
    return abs(polyval(c, A)) / c.scale


def all_equilibria(p: ModelParams) -> list[EquilibriumRecord]:
    """Every candidate equilibrium, in id order, with coincidences flagged."""
    records = [*equilibrium_boundary(p), equilibrium_E3(p), equilibrium_E4(p), *equilibrium_E5(p)]
    out = []
    for rec in records:
        if rec.coincident_with is None and rec.coords is not None:
            for prev in out:
                if prev.coords is not None and _coincide(rec.coords, prev.coords):
                    rec = _with(rec, coincident_with=prev.id)
                    break
        out.append(rec)
    return out
