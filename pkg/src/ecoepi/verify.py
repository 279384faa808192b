"""Self-check suite: transforms, chain rule, Jacobian, stability routes and equilibrium residuals.

All checks are seeded, so the deterministic part of the report (everything
except timings) is identical between runs.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .equilibria import all_equilibria, cubic_residual, equilibrium_E5, RESIDUAL_TOL
from .model import (Variant, jacobian_entries, original_field, reformed_field, to_original, to_reformed,
                    transform_derivative)
from .sampling import random_cubic, random_original_state, random_params, random_reformed_state
from .scenario import bundled_scenarios, load_scenario
from .stability import (Classification, characteristic_cubic, classify, routh_hurwitz_cubic, solve_cubic,
                        MARGINAL_TOL)

__all__ = ["CheckResult", "VerifyReport", "run_checks", "CHECKS",
           "check_roundtrip", "check_chain_rule", "check_jacobian_fd", "check_rh_random",
           "check_equilibria", "check_e5_roots", "check_stability_routes", "fd_jacobian", "relative_error"]


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    cases: int
    worst: float
    tolerance: float
    detail: str = ""
    seconds: float = 0.0

    def to_dict(self, timing=True):
        d = {"name": self.name, "passed": self.passed, "cases": self.cases, "worst": self.worst,
             "tolerance": self.tolerance, "detail": self.detail}
        if timing:
            d["seconds"] = self.seconds
        return d


@dataclass(frozen=True)
class VerifyReport:
    checks: tuple[CheckResult, ...]
    seed: int

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def to_dict(self, timing=True):
        return {"seed": self.seed, "passed": self.passed,
                "checks": [c.to_dict(timing) for c in self.checks]}


def relative_error(a, b, floor=1e-12):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(a)), np.max(np.abs(b)), floor))


def fd_jacobian(p, y, h=1e-6):
    """Central differences of the reformed field with step ``h * max(1, |y_k|)``."""
    y = np.asarray(y, dtype=float)
    J = np.empty((3, 3))
    for k in range(3):
        step = h * max(1.0, abs(y[k]))
        up, dn = y.copy(), y.copy()
        up[k] += step
        dn[k] -= step
        J[:, k] = (np.array(reformed_field(p, *up)) - np.array(reformed_field(p, *dn))) / (2 * step)
    return J


def check_roundtrip(rng, n=500, tol=1e-12):
    worst = 0.0
    for _ in range(n):
        x = random_original_state(rng)
        back = to_original(to_reformed(x))
        worst = max(worst, relative_error(x.as_array(), back.as_array()))
    return worst, n, tol, ""


def check_chain_rule(rng, n=1000, tol=1e-9):
    """``D phi(x) . F(x) == G(phi(x))`` for both variants."""
    worst = 0.0
    for variant in Variant:
        for _ in range(n):
            p = random_params(rng, variant)
            x = random_original_state(rng)
            lhs = transform_derivative(x) @ original_field(p, *x)
            rhs = np.array(reformed_field(p, *to_reformed(x)))
            worst = max(worst, relative_error(lhs, rhs))
    return worst, 2 * n, tol, ""


def check_jacobian_fd(rng, n=200, tol=1e-5, jacobian=jacobian_entries):
    worst = 0.0
    for variant in Variant:
        for _ in range(n):
            p = random_params(rng, variant)
            y = random_reformed_state(rng, p.K)
            J = np.asarray(jacobian(p, *y))
            worst = max(worst, relative_error(J, fd_jacobian(p, y.as_array()), floor=1.0))
    return worst, 2 * n, tol, ""


def check_rh_random(rng, n=1000, tol=MARGINAL_TOL):
    """Routh-Hurwitz verdict equals the eigenvalue-sign verdict outside the marginal band."""
    mismatches = marginal = 0
    for _ in range(n):
        c = random_cubic(rng)
        top = max(z.real for z in solve_cubic(c))
        if abs(top) <= tol * max(1.0, *map(abs, c)):
            marginal += 1
            continue
        if routh_hurwitz_cubic(c).satisfied != (top < 0):
            mismatches += 1
    return float(mismatches), n, 0.0, f"{marginal} marginal"


def _scenario_params():
    out = []
    for name in bundled_scenarios():
        s = load_scenario(name)
        out.append((name, s.params))
    return out


def check_equilibria(rng, n=200, tol=RESIDUAL_TOL):
    """Feasible equilibria have scaled residual within tolerance (bundled scenarios plus random draws)."""
    worst = 0.0
    cases = 0
    pool = [p for _, p in _scenario_params()]
    pool += [random_params(rng, v) for v in Variant for _ in range(n)]
    for p in pool:
        for rec in all_equilibria(p):
            if rec.feasible:
                scale = 1 + max(map(abs, rec.coords))
                worst = max(worst, rec.residual / scale)
                cases += 1
    return worst, cases, tol, ""


def check_e5_roots(rng, n=300, tol=1e-12):
    worst = 0.0
    cases = 0
    for variant in Variant:
        for _ in range(n):
            p = random_params(rng, variant)
            for rec in equilibrium_E5(p):
                if rec.coords is not None:
                    worst = max(worst, cubic_residual(p, rec.coords[0]))
                    cases += 1
    return worst, cases, tol, ""


def check_stability_routes(rng, n=200):
    """Eigenvalue, Routh-Hurwitz, closed-form and factored verdicts agree wherever they apply."""
    failures = []
    cases = 0
    pool = _scenario_params()
    pool += [(f"random[{v.value}:{i}]", random_params(rng, v)) for v in Variant for i in range(n)]
    for name, p in pool:
        for rec in all_equilibria(p):
            if not rec.feasible:
                continue
            v = classify(p, rec)
            cases += 1
            ok = v.agreement and v.closed_form_agreement is not False and v.factored_agreement is not False
            if v.classification is not Classification.MARGINAL:
                rh = routh_hurwitz_cubic(characteristic_cubic(jacobian_entries(p, *rec.coords)))
                ok = ok and rh.satisfied == (v.max_real_part < 0)
            if not ok:
                failures.append(f"{name}:{v.label}")
    return float(len(failures)), cases, 0.0, ", ".join(failures[:5])


CHECKS = (
    ("transform_roundtrip", check_roundtrip),
    ("chain_rule", check_chain_rule),
    ("jacobian_fd", check_jacobian_fd),
    ("routh_hurwitz_vs_eigen", check_rh_random),
    ("equilibrium_residuals", check_equilibria),
    ("e5_cubic_roots", check_e5_roots),
    ("stability_routes", check_stability_routes),
)


def run_checks(seed: int = 20240607, jacobian=None) -> VerifyReport:
    """Run every check with its own RNG stream derived from ``seed``.

    ``jacobian`` replaces the analytic Jacobian in the finite-difference
    check, which lets tests confirm the check catches a corrupted entry.
    """
    results = []
    for i, (name, fn) in enumerate(CHECKS):
        rng = np.random.default_rng([seed, i])
        kwargs = {"jacobian": jacobian} if name == "jacobian_fd" and jacobian is not None else {}
        start = time.perf_counter()
        worst, cases, tol, detail = fn(rng, **kwargs)
        elapsed = time.perf_counter() - start
        results.append(CheckResult(name, bool(worst <= tol), cases, worst, tol, detail, elapsed))
    return VerifyReport(tuple(results), seed)
