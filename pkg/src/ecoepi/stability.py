"""Linear stability of equilibria, Hopf and transcritical thresholds.

Three routes decide stability and are cross-checked against each other:

* eigenvalues of the Jacobian, computed as roots of its characteristic cubic;
* the Routh-Hurwitz (Lienard-Chipart) sign conditions on that cubic;
* the closed-form inequality sets available for E1, E2, E3, E4 and their
  toxic counterparts P1, P2, P3.

E1, E2 and E3 additionally have explicit eigenvalue formulas (one root in
closed form times a quadratic) that do not go through the Jacobian code.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .cubic import CubicCoeffs, DegreeError, eigen_from_quadratic, solve_cubic
from .equilibria import Condition, EquilibriumId, EquilibriumRecord, equilibrium_E3, greater, less
from .model import ModelDomainError, ModelParams, jacobian_entries

__all__ = [
    "CubicCoeffs",
    "DegreeError",
    "Classification",
    "RouthHurwitz",
    "ClosedForm",
    "StabilityVerdict",
    "solve_cubic",
    "characteristic_cubic",
    "routh_hurwitz_cubic",
    "eigenvalues",
    "classify",
    "closed_form_conditions",
    "factored_eigenvalues",
    "e3_quadratic",
    "hopf_K",
    "hopf_condition",
    "transcritical_points",
    "Transcritical",
    "max_real_part",
    "MARGINAL_TOL",
]

MARGINAL_TOL = 1e-8


class Classification(str, enum.Enum):
    STABLE = "stable"
    UNSTABLE = "unstable"
    MARGINAL = "marginal"


def characteristic_cubic(J) -> CubicCoeffs:
    """``det(lambda I - J)`` from the trace, principal 2x2 minors and determinant."""
    J = np.asarray(J, dtype=float)
    trace = J[0, 0] + J[1, 1] + J[2, 2]
    minors = (J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
              + J[0, 0] * J[2, 2] - J[0, 2] * J[2, 0]
              + J[1, 1] * J[2, 2] - J[1, 2] * J[2, 1])
    det = (J[0, 0] * (J[1, 1] * J[2, 2] - J[1, 2] * J[2, 1])
           - J[0, 1] * (J[1, 0] * J[2, 2] - J[1, 2] * J[2, 0])
           + J[0, 2] * (J[1, 0] * J[2, 1] - J[1, 1] * J[2, 0]))
    return CubicCoeffs(1.0, -trace, minors, -det)


@dataclass(frozen=True)
class RouthHurwitz:
    satisfied: bool
    a2: float
    a1: float
    a0: float
    hurwitz: float  # a1 a2 - a0 a3

    @property
    def margins(self):
        return {"a2": self.a2, "a1": self.a1, "a0": self.a0, "a1a2-a0a3": self.hurwitz}

    def __bool__(self):
        return self.satisfied


def routh_hurwitz_cubic(c) -> RouthHurwitz:
    """All roots in the open left half-plane iff a2, a1, a0 > 0 and a1 a2 > a0 a3.

    Coefficients are first divided by ``a3`` so ``a3 = 1``.
    """
    a3, a2, a1, a0 = map(float, c)
    if a3 == 0:
        raise DegreeError("leading coefficient a3 must be nonzero")
    a2, a1, a0 = a2 / a3, a1 / a3, a0 / a3
    hurwitz = a1 * a2 - a0
    return RouthHurwitz(a2 > 0 and a1 > 0 and a0 > 0 and hurwitz > 0, a2, a1, a0, hurwitz)


def eigenvalues(J) -> list[complex]:
    return solve_cubic(characteristic_cubic(J))


def max_real_part(p: ModelParams, coords) -> float:
    """Largest eigenvalue real part of the Jacobian at ``coords`` (no domain checks)."""
    return max(z.real for z in eigenvalues(jacobian_entries(p, *coords)))


@dataclass(frozen=True)
class ClosedForm:
    """Closed-form stability conditions; ``any_of`` lists alternative condition sets."""

    label: str
    any_of: tuple[tuple[Condition, ...], ...]
    notes: tuple[str, ...] = ()

    @property
    def satisfied(self) -> bool:
        return any(all(c.satisfied for c in group) for group in self.any_of)

    @property
    def conditions(self) -> tuple[Condition, ...]:
        return tuple(c for group in self.any_of for c in group)

    def near_threshold(self, tol=1e-6) -> bool:
        """True if the verdict could flip within ``tol`` of some threshold."""
        return any(abs(c.margin) <= tol for c in self.conditions)

    def to_dict(self):
        return {"label": self.label, "satisfied": self.satisfied,
                "any_of": [[c.to_dict() for c in g] for g in self.any_of],
                "notes": list(self.notes)}


def _ratio(num, den):
    if den == 0:
        return math.inf if num > 0 else (-math.inf if num < 0 else math.nan)
    return num / den


def _structured_E4(p):
    """Lienard-Chipart conditions for E4 from the closed-form Jacobian entries.

    The entries are written directly in terms of the model parameters, so this
    path never touches :func:`jacobian_entries`.
    """
    r, K, sigma, mu, w, m, g, f = p.r, p.K, p.sigma, p.mu, p.w, p.m, p.g, p.f
    c = r + mu - sigma
    R = m * math.sqrt(r / (K * c))
    T = math.sqrt(K * c / r)
    A = (R - f) / (g - f)
    U = sigma / (w * (g - f)) * (R - f) - mu / w
    H = sigma * (R - f) - mu * (g - f)
    Z = 2 * r / K * T * A * (A - 1)
    B = sigma / 2 * T
    C = -c / (g - f) * (R - f)
    D = -w / 2 * T
    E = H / w * (T - sigma / (2 * (g - f)))
    F = U * (R + (m * r / K - f * math.sqrt(r / K * c)) / (g - f))
    G = H / (2 * (g - f))
    a2 = -(C + G)
    a1 = -(Z * B + F * D - C * G)
    a0 = -Z * (E * D - B * G)
    D2 = (C + G) * (Z * B + F * D - C * G) + Z * (E * D - B * G)
    group = (greater("a2 = -(C+G) > 0", a2, 0.0),
             greater("a1 = -(ZB+FD-CG) > 0", a1, 0.0),
             greater("a0 = -Z(ED-BG) > 0", a0, 0.0),
             greater("(C+G)(ZB+FD-CG) + Z(ED-BG) > 0", D2, 0.0))
    pattern = (Z < 0, B > 0, C < 0, D < 0, E < 0, F > 0, G < 0)
    notes = ()
    if not all(pattern):
        names = "ZBCDEFG"
        notes = ("sign pattern (-,+,-,-,-,+,-) for Z..G not met at: "
                 + ",".join(n for n, ok in zip(names, pattern) if not ok),)
    return ClosedForm("E4 structured Routh-Hurwitz", (group,), notes)


def closed_form_conditions(p: ModelParams, eq_id: EquilibriumId) -> ClosedForm | None:
    """Closed-form stability conditions for ``eq_id``, or None where none exist."""
    r, K, sigma, mu, q, w, m, g, f = (p.r, p.K, p.sigma, p.mu, p.q, p.w, p.m, p.g, p.f)
    m2g2 = _ratio(m * m, g * g)
    c = r + mu - sigma
    if eq_id is EquilibriumId.E1:
        if p.toxic:
            return ClosedForm("P1 closed form", ((less("sigma < mu", sigma, mu), less("K < m^2/g^2", K, m2g2)),))
        return ClosedForm("E1 closed form", ((greater("mu/sigma > 1", _ratio(mu, sigma), 1.0),
                                       less("K < m^2/g^2", K, m2g2)),))
    if eq_id is EquilibriumId.E2:
        if p.toxic:
            split = f / mu * (sigma - mu) if mu > 0 else math.inf
            den = g * mu - f * (sigma - mu)
            bound = _ratio(r, c) * _ratio(m * m * sigma * sigma, den * den)
            return ClosedForm("P2 closed form", (
                (less("g <= f (sigma - mu)/mu", g, split, strict=False),),
                (greater("g > f (sigma - mu)/mu", g, split),
                 less("K < r/(r+mu-sigma) m^2 sigma^2/[g mu - f(sigma-mu)]^2", K, bound)),
            ))
        den = (sigma - mu) * f + g * mu
        bound = _ratio(m * sigma, den) ** 2 * _ratio(r, c)
        return ClosedForm("E2 closed form", ((less("K < [m sigma/((sigma-mu) f + g mu)]^2 r/(r+mu-sigma)", K, bound),),))
    if eq_id is EquilibriumId.E3:
        s = r * w + q * mu - q * sigma
        if p.toxic:
            return ClosedForm("P3 closed form", ((
                less("K < 3 m^2/g^2", K, 3 * m2g2),
                greater("rw + q mu - q sigma > 0", s, 0.0),
                greater("K > m^2 r w/(g^2 (rw + q mu - q sigma))", K, _ratio(m * m * r * w, g * g * s)),
            ),))
        x = _ratio(K * g * g, m * m)
        return ClosedForm("E3 closed form", ((
            greater("rw + q mu - q sigma > 0", s, 0.0),
            greater("K g^2/m^2 > 1", x, 1.0),
            greater("K g^2/m^2 > rw/(rw + q mu - q sigma)", x, _ratio(r * w, s)),
            less("K g^2/m^2 < 3", x, 3.0),
        ),))
    if eq_id is EquilibriumId.E4 and not p.toxic:
        return _structured_E4(p)
    return None


def e3_quadratic(p: ModelParams, uncorrected: bool = False):
    """Coefficients ``(b, c)`` of the quadratic factor ``x^2 + b x + c`` at E3.

    The constant term is ``m r (g^2 K - m^2) / (2 g^2 K)``, the determinant of
    the (T, U) block.  ``uncorrected=True`` gives the longer expression
    ``m r (g^2 K - m^2)(2 m r + g^2 K) / (2 g^4 K)``, which has the right sign
    but not the determinant's size.
    """
    r, K, m, g = p.r, p.K, p.m, p.g
    g2K = g * g * K
    b = r * (3 * m * m - g2K) / (2 * g2K)
    if uncorrected:
        c = m * r / (2 * g ** 4 * K) * (g2K - m * m) * (2 * m * r + g2K)
    else:
        c = m * r * (g2K - m * m) / (2 * g2K)
    return b, c


def factored_eigenvalues(p: ModelParams, eq_id: EquilibriumId) -> list[complex] | None:
    """Eigenvalues at E1, E2 or E3 from their explicit closed forms."""
    r, K, sigma, mu, q, w, m, g, f = (p.r, p.K, p.sigma, p.mu, p.q, p.w, p.m, p.g, p.f)
    c = r + mu - sigma
    if eq_id is EquilibriumId.E1:
        roots = [complex(sigma - mu), complex(-r), complex(-m + g * math.sqrt(K))]
    elif eq_id is EquilibriumId.E2:
        if sigma == 0 or c < 0:
            return None
        T2 = math.sqrt(K / r * c)
        if p.toxic:
            lam = T2 * (mu / sigma * (f + g) - f) - m
        else:
            lam = T2 * (f + (g - f) * mu / sigma) - m
        roots = [complex(lam)] + eigen_from_quadratic(mu / sigma * c, mu * (1 - mu / sigma) * c)
    elif eq_id is EquilibriumId.E3:
        if g == 0 or q == 0:
            return None
        lam = (sigma - mu) + r * w / (g * g * q * K) * (m * m - g * g * K)
        roots = [complex(lam)] + eigen_from_quadratic(*e3_quadratic(p))
    else:
        return None
    return sorted(roots, key=lambda z: (z.real, z.imag))


def _match(a, b, tol):
    # Pair each root with its nearest partner; orderings can differ near ties.
    remaining = list(b)
    for z in a:
        k = min(range(len(remaining)), key=lambda i: abs(remaining[i] - z))
        if abs(remaining[k] - z) > tol:
            return False
        remaining.pop(k)
    return True


@dataclass(frozen=True)
class StabilityVerdict:
    label: str
    eigenvalues: tuple[complex, ...]
    max_real_part: float
    classification: Classification
    routh_hurwitz: RouthHurwitz
    agreement: bool
    closed_form: ClosedForm | None = None
    closed_form_agreement: bool | None = None
    factored: tuple[complex, ...] | None = None
    factored_agreement: bool | None = None
    scale: float = 1.0
    notes: tuple[str, ...] = field(default=())

    @property
    def rh_satisfied(self):
        return self.routh_hurwitz.satisfied

    @property
    def stable(self):
        return self.classification is Classification.STABLE

    def to_dict(self):
        return {
            "label": self.label,
            "eigenvalues": [{"re": z.real, "im": z.imag} for z in self.eigenvalues],
            "max_real_part": self.max_real_part,
            "classification": self.classification.value,
            "routh_hurwitz": {"satisfied": self.rh_satisfied, "margins": self.routh_hurwitz.margins},
            "agreement": self.agreement,
            "closed_form": None if self.closed_form is None else self.closed_form.to_dict(),
            "closed_form_agreement": self.closed_form_agreement,
            "factored_eigenvalues": None if self.factored is None
            else [{"re": z.real, "im": z.imag} for z in self.factored],
            "factored_agreement": self.factored_agreement,
            "notes": list(self.notes),
        }


def classify(p: ModelParams, eq: EquilibriumRecord) -> StabilityVerdict:
    """Stability of a feasible equilibrium by eigenvalues, Routh-Hurwitz and closed forms.

    ``stable`` means max Re(lambda) < -1e-8 * scale, where scale is
    ``max(1, max |J_ik|)``; ``marginal`` is the band around zero.
    """
    if not eq.feasible:
        raise ModelDomainError(f"{eq.label} is not feasible: {eq.reason}")
    J = jacobian_entries(p, *eq.coords)
    scale = max(1.0, float(np.max(np.abs(J))))
    cubic = characteristic_cubic(J)
    roots = solve_cubic(cubic)
    top = max(z.real for z in roots)
    tol = MARGINAL_TOL * scale
    if top < -tol:
        kind = Classification.STABLE
    elif top > tol:
        kind = Classification.UNSTABLE
    else:
        kind = Classification.MARGINAL
    rh = routh_hurwitz_cubic(cubic)
    agreement = True if kind is Classification.MARGINAL else rh.satisfied == (top < 0)

    closed = closed_form_conditions(p, eq.id)
    closed_ok = None
    if closed is not None and kind is not Classification.MARGINAL and not closed.near_threshold():
        closed_ok = closed.satisfied == (kind is Classification.STABLE)

    factored = factored_eigenvalues(p, eq.id)
    factored_ok = None
    if factored is not None:
        factored_ok = _match(roots, factored, 1e-7 * scale)
        factored = tuple(factored)
    return StabilityVerdict(eq.label, tuple(roots), top, kind, rh, agreement, closed, closed_ok,
                            factored, factored_ok, scale, closed.notes if closed else ())


def hopf_K(p: ModelParams) -> float:
    """Carrying capacity ``3 (m/g)^2`` at which E3 (P3) loses stability through a Hopf pair."""
    if p.g <= 0:
        raise ModelDomainError("hopf_K needs g > 0")
    return 3 * (p.m / p.g) ** 2


def hopf_condition(p: ModelParams) -> float:
    """``a1 a2 - a0`` of the characteristic cubic at E3 with ``K`` set to :func:`hopf_K`."""
    at = p.with_(K=hopf_K(p))
    rec = equilibrium_E3(at)
    c = characteristic_cubic(jacobian_entries(at, *rec.coords))
    return c.a1 * c.a2 - c.a0 * c.a3


@dataclass(frozen=True)
class Transcritical:
    pair: tuple[EquilibriumId, EquilibriumId]
    parameter: str
    locus: str
    threshold: float
    margin: float  # positive on the side where the first equilibrium is the stable one

    @property
    def at_threshold(self):
        return abs(self.margin) <= 1e-12 * max(1.0, abs(self.threshold))

    def to_dict(self):
        return {"pair": [e.value for e in self.pair], "parameter": self.parameter,
                "locus": self.locus, "threshold": self.threshold, "margin": self.margin,
                "at_threshold": self.at_threshold}


def transcritical_points(p: ModelParams) -> list[Transcritical]:
    """Exchange-of-stability loci sigma = mu (E1/E2) and K = m^2/g^2 (E1/E3)."""
    out = [Transcritical((EquilibriumId.E1, EquilibriumId.E2), "sigma", "sigma = mu", p.mu, p.mu - p.sigma)]
    if p.g > 0:
        k = (p.m / p.g) ** 2
        out.append(Transcritical((EquilibriumId.E1, EquilibriumId.E3), "K", "K = m^2/g^2", k, k - p.K))
    return out
