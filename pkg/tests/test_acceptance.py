"""Acceptance criteria.  The terminal summary prints one PASS/FAIL line per criterion."""
import time
from collections import Counter

import numpy as np
import pytest

from ecoepi.equilibria import EquilibriumId, all_equilibria, e5_existence_conditions, equilibrium_E5
from ecoepi.integrate import AttractorKind, SolverOptions, detect_attractor, simulate, simulate_original
from ecoepi.model import (StateReformed, Variant, jacobian_entries, original_field, reformed_field, to_reformed,
                          transform_derivative)
from ecoepi.sampling import random_original_state, random_params, random_reformed_state
from ecoepi.scenario import bundled_scenarios, load_scenario
from ecoepi.stability import Classification, characteristic_cubic, classify, hopf_K, routh_hurwitz_cubic
from ecoepi.sweep import SweepSpec, refine_transition, run_sweep, transitions
from ecoepi.verify import check_e5_roots, check_equilibria, check_jacobian_fd, check_rh_random, relative_error

# Tolerances.
CONVERGENCE_REL = 1e-4
SCENARIO_SECONDS = 10.0
HOPF_EXACT = 1e-12
HOPF_REFINED = 1e-5
CYCLE_A_AMPLITUDE = 1e-3
EXCHANGE_REL = 1e-5
PUSHFORWARD_REL = 1e-9
DUAL_REL = 1e-6
MARGINAL = 1e-8
JACOBIAN_REL = 1e-5
RESIDUAL_SCALED = 1e-10
CUBIC_REL = 1e-12
A_SLACK = 1e-9
U_SLACK = 1e-12

CLASSIFICATION_SCENARIOS = ["e1_scenario", "e2_scenario", "e3_scenario", "e4_scenario",
                            "p1_scenario", "p2_scenario", "p3_scenario", "p4_scenario", "p4_limit_cycle"]


def perturb(coords, frac=0.01):
    """Move each coordinate by ``frac``, inward for A; zero coordinates get ``frac`` absolute."""
    A, T, U = coords
    A = A * (1 - frac) if A > 0.5 else A * (1 + frac) if A > 0 else frac
    return StateReformed(A, T * (1 + frac), U * (1 + frac) if U > 0 else frac)


def criterion(n):
    return pytest.mark.criterion(n)


@criterion(1)
@pytest.mark.parametrize("name", CLASSIFICATION_SCENARIOS)
def test_c1_scenario_table(name, record_property):
    t0 = time.perf_counter()
    s = load_scenario(name)
    p = s.params
    recs = [r for r in all_equilibria(p) if r.id is s.target]
    feasible = [r for r in recs if r.feasible]
    if not feasible:
        record_property("detail", f"{recs[0].label} is {recs[0].status.value}: {recs[0].reason}")
        pytest.fail("target equilibrium does not exist")
    rec = feasible[0]
    v = classify(p, rec)
    record_property("detail", f"{v.label} classified {v.classification.value}, max Re = {v.max_real_part:.3g}")
    assert v.classification is Classification.STABLE
    assert v.agreement and v.rh_satisfied
    assert v.closed_form_agreement is True or (v.closed_form is None and rec.id is EquilibriumId.E5)

    traj = simulate(p, perturb(rec.coords), SolverOptions(t_end=5000))
    err = relative_error(traj.final, rec.coords)
    elapsed = time.perf_counter() - t0
    record_property("detail", f"final relative distance {err:.2e}, {elapsed:.1f} s")
    assert traj.completed and err <= CONVERGENCE_REL
    assert elapsed < SCENARIO_SECONDS


@criterion(2)
@pytest.mark.parametrize("name", ["e3_hopf_limit_cycle", "p4_limit_cycle"])
def test_c2_hopf(name, record_property):
    s = load_scenario(name)
    p = s.params
    k_dag = hopf_K(p)
    record_property("detail", f"hopf_K = {k_dag!r}")
    assert abs(k_dag - 12.0) <= HOPF_EXACT

    spec = SweepSpec.from_range(p, "K", 4.0, 20.0, 0.5)
    flips = [t for t in transitions(run_sweep(spec)) if t.flag == "E3.stable" and t.lo_value >= 8.0]
    assert len(flips) == 1
    k_ref = refine_transition(spec, flips[0])
    record_property("detail", f"refined stability flip at K = {k_ref!r}")
    assert abs(k_ref - 12.0) <= HOPF_REFINED

    rep = detect_attractor(simulate(p, s.start, s.solver))
    amps = ", ".join(f"{k} {a:.3g}" for k, a in rep.amplitudes.items())
    record_property("detail", f"attractor {rep.kind.value}, amplitudes {amps}")
    assert rep.kind is AttractorKind.LIMIT_CYCLE
    assert rep.amplitudes["A"] < CYCLE_A_AMPLITUDE


@criterion(3)
def test_c3_transcritical(record_property):
    base = load_scenario("e1_scenario").params
    rng = np.random.default_rng(3)
    worst = 0.0
    grid = np.linspace(0.5, 1.5, 11)
    for _ in range(20):
        mu, m, g = rng.uniform(0.1, 0.9), rng.uniform(0.2, 0.9), rng.uniform(0.05, 0.19)
        k_star = m * m / (g * g)
        p = base.with_(mu=mu, m=m, g=g, sigma=0.5 * mu, K=0.5 * k_star)

        spec = SweepSpec(p, "sigma", tuple(mu * grid))
        flips = [t for t in transitions(run_sweep(spec)) if t.flag in ("E1.stable", "E2.feasible")]
        assert len(flips) == 2
        worst = max(worst, *(abs(refine_transition(spec, t) / mu - 1) for t in flips))

        spec = SweepSpec(p, "K", tuple(k_star * grid))
        flips = [t for t in transitions(run_sweep(spec)) if t.flag in ("E1.stable", "E3.feasible")]
        assert len(flips) == 2
        worst = max(worst, *(abs(refine_transition(spec, t) / k_star - 1) for t in flips))
    record_property("detail", f"worst relative offset {worst:.2e}")
    assert worst <= EXCHANGE_REL


@criterion(4)
@pytest.mark.parametrize("variant", list(Variant))
def test_c4_pushforward(variant, record_property):
    rng = np.random.default_rng([4, list(Variant).index(variant)])
    worst = 0.0
    for _ in range(1000):
        p = random_params(rng, variant)
        x = random_original_state(rng)
        lhs = transform_derivative(x) @ original_field(p, *x)
        worst = max(worst, relative_error(lhs, reformed_field(p, *to_reformed(x))))
    record_property("detail", f"worst relative error {worst:.2e}")
    assert worst <= PUSHFORWARD_REL


@criterion(4)
def test_c4_dual_trajectories(record_property):
    # Draws whose orbit brings S + I near zero are skipped: the original
    # coordinates are singular there and both solvers lose accuracy.
    rng = np.random.default_rng(44)
    opts = SolverOptions(t_end=100, dense_output_stride=0.5)
    worst, used, drawn = 0.0, 0, 0
    while used < 20:
        drawn += 1
        p = random_params(rng, list(Variant)[drawn % 2])
        x0 = random_original_state(rng, 0.5, 5.0)
        a = simulate(p, to_reformed(x0), opts)
        if not a.completed or np.min(a.states[:, 1]) ** 2 < 1e-2:
            continue
        b = simulate_original(p, x0, opts)
        assert b.completed and len(b) == len(a)
        worst = max(worst, max(relative_error(ya, yb) for ya, yb in zip(a.states, b.reformed())))
        used += 1
    record_property("detail", f"worst relative error {worst:.2e} over {used} scenarios ({drawn} drawn)")
    assert worst <= DUAL_REL


@criterion(5)
def test_c5_routh_hurwitz_random(record_property):
    mismatches, n, _, detail = check_rh_random(np.random.default_rng(5), n=1000, tol=MARGINAL)
    record_property("detail", f"{mismatches:g} mismatches in {n} cubics, {detail}")
    assert mismatches == 0


@criterion(5)
def test_c5_routh_hurwitz_scenarios(record_property):
    compared, bad = 0, []
    for name in bundled_scenarios():
        p = load_scenario(name).params
        for rec in all_equilibria(p):
            if not rec.feasible:
                continue
            c = characteristic_cubic(jacobian_entries(p, *rec.coords))
            v = classify(p, rec)
            if abs(v.max_real_part) > MARGINAL:
                compared += 1
                if routh_hurwitz_cubic(c).satisfied != (v.max_real_part < 0):
                    bad.append(f"{name}:{rec.label}")
    record_property("detail", f"{compared} equilibria compared, mismatches {bad}")
    assert compared > 20 and not bad


@criterion(5)
def test_c5_jacobian(record_property):
    worst, n, _, _ = check_jacobian_fd(np.random.default_rng(55), n=200, tol=JACOBIAN_REL)
    record_property("detail", f"worst relative deviation {worst:.2e} over {n} points")
    assert worst <= JACOBIAN_REL


@criterion(5)
def test_c5_residuals(record_property):
    worst, n, _, _ = check_equilibria(np.random.default_rng(56), n=300, tol=RESIDUAL_SCALED)
    record_property("detail", f"worst scaled residual {worst:.2e} over {n} equilibria")
    assert worst <= RESIDUAL_SCALED


@criterion(5)
def test_c5_cubic_roots(record_property):
    worst, n, _, _ = check_e5_roots(np.random.default_rng(57), n=300, tol=CUBIC_REL)
    record_property("detail", f"worst relative polynomial residual {worst:.2e} over {n} roots")
    assert worst <= CUBIC_REL


@criterion(6)
def test_c6_e5_existence(record_property):
    rng = np.random.default_rng(6)
    draws = missing = with_e5 = 0
    verdicts = Counter()
    while draws < 500:
        p = random_params(rng, list(Variant)[draws % 2])
        if not any(e5_existence_conditions(p)):
            continue
        draws += 1
        recs = equilibrium_E5(p)
        if not any(r.coords is not None and r.coords[0] > 0 for r in recs):
            missing += 1
        feasible = [r for r in recs if r.feasible]
        with_e5 += bool(feasible)
        verdicts.update(classify(p, r).classification.value for r in feasible)
    record_property("detail", f"{missing} of {draws} draws without a positive root")
    record_property("report", f"E5 feasible in {with_e5} draws; classifications {dict(sorted(verdicts.items()))}")
    assert missing == 0


@criterion(7)
@pytest.mark.parametrize("variant", list(Variant))
def test_c7_forward_invariance(variant, record_property):
    rng = np.random.default_rng([7, list(Variant).index(variant)])
    lo_A, hi_A, min_T, min_U = 1.0, 0.0, np.inf, np.inf
    opts = SolverOptions(t_end=1000)
    for _ in range(100):
        p = random_params(rng, variant)
        traj = simulate(p, random_reformed_state(rng, p.K), opts)
        A, T, U = traj.states.T
        lo_A, hi_A = min(lo_A, A.min()), max(hi_A, A.max())
        min_T, min_U = min(min_T, T.min()), min(min_U, U.min())
    record_property("detail", f"A in [{lo_A:.3g}, {hi_A:.17g}], min T {min_T:.3g}, min U {min_U:.3g}")
    assert lo_A >= -A_SLACK and hi_A <= 1 + A_SLACK
    assert min_T > 0 and min_U >= -U_SLACK
