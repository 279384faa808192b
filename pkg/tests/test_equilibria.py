import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ecoepi.equilibria import (EquilibriumId, Status, all_equilibria, cubic_residual, e5_cubic,
                               e5_existence_conditions, equilibrium_boundary, equilibrium_E3, equilibrium_E4,
                               equilibrium_E5)
from ecoepi.model import ModelParams, Variant, reformed_field
from ecoepi.sampling import random_params

E1_SET = dict(r=.5, K=5, sigma=.2, mu=.4, q=.2, w=.5, m=.8, g=.1, f=.3)
E2_SET = {**E1_SET, "sigma": .5}
E3_SET = dict(r=.5, K=5, sigma=.5, mu=.4, q=.2, w=.5, m=.2, g=.1, f=.3)
E4_SET = dict(r=.5, K=10, sigma=.4, mu=.2, q=.5, w=.5, m=.3, g=.1, f=.2)
P4_SET = dict(r=.6, K=15, sigma=.4, mu=.17, q=.5, w=.5, m=.33, g=.14, f=.2)


def by_id(records):
    out = {}
    for rec in records:
        out.setdefault(rec.id, []).append(rec)
    return out


class TestBoundary:
    def test_e1_always_feasible(self):
        e1, e2 = equilibrium_boundary(ModelParams(**E1_SET))
        assert e1.feasible and e1.coords == (1.0, math.sqrt(5), 0.0)
        assert not e2.feasible and "mu < sigma" in e2.reason

    def test_e2_closed_form(self):
        _, e2 = equilibrium_boundary(ModelParams(**E2_SET))
        assert e2.feasible
        np.testing.assert_allclose(e2.coords, (0.8, 2.0, 0.0), rtol=1e-15)
        assert e2.residual <= 1e-14

    def test_sigma_zero(self):
        _, e2 = equilibrium_boundary(ModelParams(**{**E1_SET, "sigma": 0.0}))
        assert e2.status is Status.INFEASIBLE and "A undefined" in e2.reason

    def test_coincidence_at_sigma_equals_mu(self):
        _, e2 = equilibrium_boundary(ModelParams(**{**E1_SET, "sigma": 0.4}))
        assert e2.coincident_with is EquilibriumId.E1

    def test_toxic_labels(self):
        e1, e2 = equilibrium_boundary(ModelParams(**E2_SET, variant="toxic"))
        assert (e1.label, e2.label) == ("P1", "P2")
        assert e2.feasible


class TestE3:
    def test_closed_form(self):
        rec = equilibrium_E3(ModelParams(**E3_SET))
        assert rec.feasible
        np.testing.assert_allclose(rec.coords, (1, 2, 0.5), rtol=1e-14)
        assert rec.feasibility.margin > 0

    def test_threshold_degenerate(self):
        rec = equilibrium_E3(ModelParams(**{**E3_SET, "K": 4.0}))
        assert rec.coords[2] == pytest.approx(0, abs=1e-15)
        assert "degenerate" in rec.flags
        assert rec.coincident_with is EquilibriumId.E1

    def test_toxic_same_coordinates(self):
        p = ModelParams(**{**E3_SET, "mu": 0.8}, variant="toxic")
        rec = equilibrium_E3(p)
        np.testing.assert_allclose(rec.coords, (1, 2, 0.5), rtol=1e-14)
        assert rec.label == "P3" and rec.feasible

    def test_infeasible_below_threshold(self):
        assert not equilibrium_E3(ModelParams(**E1_SET)).feasible

    def test_g_zero(self):
        rec = equilibrium_E3(ModelParams(**{**E3_SET, "g": 0.0}))
        assert rec.status is Status.INFEASIBLE and rec.reason


class TestE4:
    def test_harmless_closed_form(self):
        rec = equilibrium_E4(ModelParams(**E4_SET))
        assert rec.feasible
        A, T, U = rec.coords
        assert A == pytest.approx(0.77526, abs=1e-5)
        assert T == pytest.approx(math.sqrt(6), rel=1e-15)
        assert U == pytest.approx(0.22021, abs=2e-5)
        assert rec.residual <= 1e-10

    def test_toxic_closed_form(self):
        rec = equilibrium_E4(ModelParams(**P4_SET, variant="toxic"))
        assert rec.label == "P4" and rec.feasible
        A, T, U = rec.coords
        assert T == pytest.approx(math.sqrt(9.25), rel=1e-15)
        assert A == pytest.approx(0.90736, abs=1e-5)
        # 0.38588 is a truncation; the closed form gives 0.385890.
        assert U == pytest.approx(0.38588, abs=2e-5)
        assert rec.residual <= 1e-10

    def test_not_applicable(self):
        assert equilibrium_E4(ModelParams(**E3_SET)).status is Status.NOT_APPLICABLE

    def test_t4_undefined(self):
        p = ModelParams(**{**E4_SET, "sigma": 0.9})
        rec = equilibrium_E4(p)
        assert rec.status is Status.INFEASIBLE and "T4 undefined" in rec.reason

    def test_fraction_above_one_is_infeasible(self):
        # A4 > 1 is not excluded by the other conditions; the extra check catches it.
        p = ModelParams(**{**E4_SET, "m": 0.05})
        rec = equilibrium_E4(p)
        assert rec.coords[0] > 1 or not rec.feasible
        assert not rec.feasible


class TestE5:
    def test_roots_satisfy_cubic(self):
        p = ModelParams(**E3_SET)
        cubic = e5_cubic(p)
        for rec in equilibrium_E5(p):
            if rec.coords is not None:
                assert abs(cubic(rec.coords[0])) / cubic.scale <= 1e-12

    @pytest.mark.parametrize("variant", list(Variant))
    def test_uncorrected_coefficients_fail_residual(self, variant):
        # Roots of the K^2 variant of the coefficients are not equilibria.
        from ecoepi.cubic import real_roots
        rng = np.random.default_rng(2)
        bad = total = 0
        for _ in range(100):
            p = random_params(rng, variant)
            c = p.r + p.mu - p.sigma
            if c <= 0 or p.K == 1:
                continue
            conv_a, conv_t = (p.g + p.f, -p.f) if p.toxic else (p.g - p.f, p.f)
            for A in real_roots(e5_cubic(p, uncorrected=True)):
                L = conv_a * A + conv_t
                if A <= 0 or L == 0:
                    continue
                T = p.m / L
                U = (c - p.r / p.K * p.m ** 2 / L ** 2) / (p.q - p.w)
                total += 1
                bad += max(map(abs, reformed_field(p, A, T, U))) > 1e-8 * (1 + abs(T) + abs(U))
        assert total > 20 and bad == total

    def test_degenerate_through_origin(self):
        p = ModelParams(**E3_SET)
        den = p.r * p.w + p.q * p.mu - p.w * p.sigma
        assert den > 0
        K = p.m ** 2 * p.r * p.w / (p.f ** 2 * den)
        recs = equilibrium_E5(p.with_(K=K))
        assert any(any(f.startswith("degenerate") for f in r.flags) for r in recs)

    def test_roots_reported_without_positive_growth_margin(self):
        # sigma > r + mu breaks the standing assumption but not the cubic's sign argument.
        p = ModelParams(**{**E3_SET, "sigma": 0.95})
        assert e5_existence_conditions(p)[0]
        recs = equilibrium_E5(p)
        assert any(r.coords is not None and r.coords[0] > 0 for r in recs)
        assert not any(r.feasible for r in recs)

    def test_not_applicable_for_equal_rates(self):
        (rec,) = equilibrium_E5(ModelParams(**E4_SET))
        assert rec.status is Status.NOT_APPLICABLE

    def test_reported_states_are_equilibria(self):
        rng = np.random.default_rng(11)
        for _ in range(200):
            for variant in Variant:
                p = random_params(rng, variant)
                for rec in equilibrium_E5(p):
                    if rec.coords is not None:
                        assert cubic_residual(p, rec.coords[0]) <= 1e-12
                        scale = 1 + max(map(abs, rec.coords))
                        assert rec.residual <= 1e-10 * scale

    @settings(max_examples=200, deadline=None)
    @given(st.integers(0, 2 ** 32 - 1), st.sampled_from(list(Variant)))
    def test_existence_condition_gives_positive_root(self, seed, variant):
        rng = np.random.default_rng(seed)
        p = random_params(rng, variant)
        if p.r + p.mu <= p.sigma:
            p = p.with_(sigma=0.5 * (p.r + p.mu))
        feas1, feas2 = e5_existence_conditions(p)
        if feas1 or feas2:
            assert any(r.coords is not None and r.coords[0] > 0 for r in equilibrium_E5(p))


class TestAggregate:
    def test_e1_scenario(self):
        recs = by_id(all_equilibria(ModelParams(**E1_SET)))
        assert recs[EquilibriumId.E1][0].feasible
        assert not recs[EquilibriumId.E2][0].feasible
        assert not recs[EquilibriumId.E3][0].feasible

    def test_e3_scenario(self):
        recs = by_id(all_equilibria(ModelParams(**E3_SET)))
        assert all(recs[i][0].feasible for i in (EquilibriumId.E1, EquilibriumId.E2, EquilibriumId.E3))
        assert recs[EquilibriumId.E4][0].status is Status.NOT_APPLICABLE
        assert EquilibriumId.E5 in recs

    def test_residuals_and_margin_signs(self):
        rng = np.random.default_rng(5)
        for _ in range(300):
            p = random_params(rng, list(Variant)[rng.integers(2)])
            for rec in all_equilibria(p):
                assert rec.id is not EquilibriumId.E1 or rec.feasible
                if rec.feasible:
                    assert max(map(abs, reformed_field(p, *rec.coords))) <= 1e-10 * (1 + max(map(abs, rec.coords)))
                for c in rec.feasibility:
                    if abs(c.margin) > 1e-12:
                        assert c.satisfied == (c.margin > 0)

    def test_simplified_e4_condition_implication(self):
        rng = np.random.default_rng(9)
        checked = 0
        for _ in range(2000):
            p = random_params(rng)
            s, mu, f, g, r, m = p.sigma, p.mu, p.f, p.g, p.r, p.m
            c = r + mu - s
            den = (s - mu) * f + mu * g
            if c <= 0 or den <= 0:
                continue
            if p.K > m * m * r * s * s / (den * den * c):
                checked += 1
                assert p.K > m * m * r / (f * f * c)
        assert checked > 50
