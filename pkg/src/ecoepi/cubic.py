"""Closed-form cubic root finding with Newton polishing."""
from __future__ import annotations

import math
from typing import NamedTuple

__all__ = ["CubicCoeffs", "DegreeError", "solve_cubic", "real_roots", "polyval"]


class DegreeError(ValueError):
    pass


class CubicCoeffs(NamedTuple):
    """Coefficients of ``a3*x**3 + a2*x**2 + a1*x + a0``."""

    a3: float
    a2: float
    a1: float
    a0: float

    @property
    def scale(self):
        return max(abs(self.a3), abs(self.a2), abs(self.a1), abs(self.a0))

    def __call__(self, x):
        return polyval(self, x)


def polyval(c, x):
    a3, a2, a1, a0 = c
    return ((a3 * x + a2) * x + a1) * x + a0


def _dpolyval(c, x):
    a3, a2, a1, _ = c
    return (3 * a3 * x + 2 * a2) * x + a1


def _polish(c, x, iterations=4):
    # Newton steps are kept only while they reduce the residual.
    best, best_res = x, abs(polyval(c, x))
    for _ in range(iterations):
        d = _dpolyval(c, best)
        if d == 0 or best_res == 0:
            break
        cand = best - polyval(c, best) / d
        res = abs(polyval(c, cand))
        if res >= best_res:
            break
        best, best_res = cand, res
    return best


def _quadratic(a, b, c):
    """Roots of ``a x^2 + b x + c`` (a != 0) without cancellation."""
    disc = b * b - 4 * a * c
    if disc >= 0:
        s = math.sqrt(disc)
        q = -0.5 * (b + math.copysign(s, b))
        if q == 0:
            return [0.0, 0.0]
        return sorted([q / a, c / q])
    re = -b / (2 * a)
    im = abs(math.sqrt(-disc) / (2 * a))
    return [complex(re, -im), complex(re, im)]


def _cbrt(x):
    return math.copysign(abs(x) ** (1.0 / 3.0), x)


def _scaled_residual(c, z):
    return abs(polyval(c, z)) / (c.scale * (1 + abs(z)) ** 3)


def _deflated_pairs(c, x):
    """Quadratic factors left after removing root ``x``, forward and backward."""
    a3, a2, a1, a0 = c
    e = a2 + a3 * x
    yield a3, e, a1 + e * x
    if x != 0:
        h = -a0 / x
        yield a3, (h - a1) / x, h


def solve_cubic(c) -> list[complex]:
    """All three roots of a cubic, sorted by (real part, imaginary part).

    One real root comes from Cardano's formula or the trigonometric form of
    the depressed cubic (the largest in magnitude when all three are real)
    and is Newton-polished on the original polynomial.  The other two are
    roots of the deflated quadratic; forward and backward deflation are both
    tried and the one with the smaller residual is kept.  Complex roots are
    returned as exact conjugates.

    Raises
    ------
    DegreeError
        If the leading coefficient is zero.
    """
    c = CubicCoeffs(*map(float, c))
    if c.a3 == 0:
        raise DegreeError("leading coefficient a3 must be nonzero")
    b, cc, d = c.a2 / c.a3, c.a1 / c.a3, c.a0 / c.a3
    shift = b / 3.0
    p = cc - b * shift
    q = 2 * shift ** 3 - shift * cc + d
    half_q = q / 2
    disc = half_q * half_q + (p / 3) ** 3

    if disc > 0 or p == 0:
        sq = math.sqrt(max(disc, 0.0))
        u = _cbrt(-half_q - math.copysign(sq, half_q) if half_q != 0 else -sq)
        x = (u - p / (3 * u) if u != 0 else 0.0) - shift
    else:
        rho = math.sqrt(-p / 3)
        arg = max(-1.0, min(1.0, -half_q / rho ** 3))
        phi = math.acos(arg) / 3
        x = max((2 * rho * math.cos(phi - 2 * math.pi * k / 3) - shift for k in range(3)), key=abs)
    x = _polish(c, x)

    best, best_err = None, math.inf
    for quad in _deflated_pairs(c, x):
        rest = []
        for z in _quadratic(*quad):
            rest.append(_polish(c, z))
        if isinstance(rest[0], complex) or isinstance(rest[1], complex):
            z = rest[0] if complex(rest[0]).imag > 0 else rest[1]
            z = complex(z)
            if z.imag == 0:
                rest = [complex(z.real, 0.0)] * 2
            else:
                im = abs(z.imag)
                rest = [complex(z.real, -im), complex(z.real, im)]
        err = max(_scaled_residual(c, z) for z in rest)
        if err < best_err:
            best, best_err = rest, err
    roots = [complex(x + 0.0, 0.0)] + [complex(z.real + 0.0, z.imag) for z in map(complex, best)]
    return sorted(roots, key=lambda z: (z.real, z.imag))


def real_roots(coeffs, imag_tol=1e-10) -> list[float]:
    """Real roots of a polynomial of degree at most three, ascending.

    Leading coefficients that are zero relative to the largest coefficient
    (below ``1e-14``) reduce the degree.  Roots whose imaginary part is below
    ``imag_tol * (1 + |root|)`` are treated as real.
    """
    c = [float(v) for v in coeffs]
    scale = max(abs(v) for v in c) or 1.0
    while c and abs(c[0]) <= 1e-14 * scale:
        c.pop(0)
    if len(c) <= 1:
        return []
    if len(c) == 2:
        return [-c[1] / c[0]]
    if len(c) == 3:
        return sorted(z for z in _quadratic(*c) if not isinstance(z, complex))
    out = []
    for z in solve_cubic(c):
        if abs(z.imag) <= imag_tol * (1 + abs(z)):
            out.append(_polish(CubicCoeffs(*c), z.real))
    return sorted(out)


def eigen_from_quadratic(b, c):
    """Roots of ``x^2 + b x + c`` as complex numbers, sorted like :func:`solve_cubic`."""
    roots = _quadratic(1.0, b, c)
    return sorted((complex(z) for z in roots), key=lambda z: (z.real, z.imag))
