import math

import numpy as np
import pytest
from scipy import integrate

from gfou import regularity
from gfou.datacontroller import get_spectral_model
from gfou.errors import ConfigurationError, DomainError
from gfou.gausscore import GridField, build_grid, half_space, interval
from gfou.rearrange import RearrangedProfile, decreasing_rearrangement
from gfou.regularity import (
    embedding_ratio,
    empirical_constant,
    g2_majorant,
    g3_uniform_bound,
    greens_kernel,
    greens_kernel_eval,
    kernel_lp_ratio,
    kernel_table,
    log_weight_integral,
    regularity_ratio,
    solve_by_kernel,
    zygmund_norm,
)
from gfou.comparison import solve_problem


def constant_profile(c, measure=0.5):
    return RearrangedProfile.from_steps(measure, [measure], [c])


def rel_l2(field, a, b):
    w = field.rule.weights
    return math.sqrt(np.dot(w, (a - b) ** 2) / np.dot(w, b ** 2))


class TestZygmund:
    def test_log_weight_at_zero_power_is_length(self):
        assert log_weight_integral(0.1, 0.4, 0.0) == pytest.approx(0.3, rel=1e-12)
        assert log_weight_integral(0.0, 0.5, 0.0) == pytest.approx(0.5, rel=1e-12)

    def test_negative_powers(self):
        # (1 - log t)^{-1} + (1 - log t)^{-2} has antiderivative t / (1 - log t)
        total = log_weight_integral(0.0, 0.5, -1.0) + log_weight_integral(0.0, 0.5, -2.0)
        assert total == pytest.approx(0.5 / (1.0 + math.log(2.0)), rel=1e-8)
        half = integrate.quad(lambda t: (1.0 - math.log(t)) ** -0.5, 0.1, 0.4)[0]
        assert log_weight_integral(0.1, 0.4, -0.5) == pytest.approx(half, rel=1e-10)

    def test_zero_power_is_the_lebesgue_norm(self):
        prof = RearrangedProfile.from_steps(0.5, [0.1, 0.3, 0.5], [3.0, 2.0, 0.5])
        expected = (0.1 * 3.0 ** 3 + 0.2 * 2.0 ** 3 + 0.2 * 0.5 ** 3) ** (1.0 / 3.0)
        assert zygmund_norm(prof, 3.0, 0.0).value == pytest.approx(expected, rel=1e-12)

    def test_constant_profile(self):
        assert zygmund_norm(constant_profile(2.0), 2.0, 0.0).value == pytest.approx(2.0 / math.sqrt(2.0), rel=1e-12)

    def test_closed_form_at_first_power(self):
        u = 1.0 + math.log(2.0)
        expected = math.sqrt(0.5 * (u * u + 2.0 * u + 2.0))
        assert zygmund_norm(constant_profile(1.0), 2.0, 1.0).value == pytest.approx(expected, rel=1e-10)

    @pytest.mark.parametrize("p", [1.0, 2.0, 4.0])
    def test_monotone_in_alpha(self, p):
        prof = RearrangedProfile.from_steps(0.5, [0.05, 0.2, 0.5], [5.0, 1.0, 0.2])
        values = [zygmund_norm(prof, p, a).value for a in (-0.25, 0.0, 0.5, 1.0, 2.0)]
        assert all(b >= a for a, b in zip(values, values[1:]))

    def test_maximal_dominates_quasi(self):
        prof = RearrangedProfile.from_steps(0.5, [0.05, 0.2, 0.5], [5.0, 1.0, 0.2])
        for alpha in (0.0, 0.5, 1.0):
            quasi = zygmund_norm(prof, 2.0, alpha).value
            maximal = zygmund_norm(prof, 2.0, alpha, "maximal").value
            assert maximal >= quasi

    def test_maximal_of_a_constant(self):
        prof = constant_profile(1.5)
        assert zygmund_norm(prof, 2.0, 0.5, "maximal").value == pytest.approx(
            zygmund_norm(prof, 2.0, 0.5).value, rel=1e-10)

    def test_rejects(self):
        with pytest.raises(ConfigurationError):
            zygmund_norm(constant_profile(1.0), 0.5, 0.0)
        with pytest.raises(ConfigurationError):
            zygmund_norm(constant_profile(1.0), 2.0, 0.0, "weak")


class TestRegularityRatio:
    def test_zero_datum(self):
        dom = half_space(0.0)
        rule = build_grid(dom, 200)
        f = GridField(dom, rule, np.zeros(rule.size), "zero")
        assert regularity_ratio(dom, f, 0.5, 2.0, 0.0).ratio == 0.0

    def test_first_mode(self):
        dom = half_space(0.0)
        model = get_spectral_model(dom, 30, 400)
        psi = model.mode(1)
        ratio = regularity_ratio(dom, psi, 0.5, 2.0, 0.0).ratio
        prof = decreasing_rearrangement(psi, 0.5)
        expected = model.eigenvalues[0] ** -0.5 * zygmund_norm(prof, 2.0, 0.5).value / zygmund_norm(prof, 2.0, 0.0).value
        assert ratio == pytest.approx(expected, rel=1e-8)
        assert ratio > 1.0

    @pytest.mark.parametrize("dom, p, alpha", [
        (half_space(-0.5), 2.0, 0.0),
        (half_space(0.0), 1.5, 0.0),
        (half_space(0.0), 2.0, -0.3),
    ])
    def test_hypotheses(self, dom, p, alpha):
        rule = build_grid(dom, 100)
        f = GridField(dom, rule, np.ones(rule.size))
        with pytest.raises(ConfigurationError):
            regularity_ratio(dom, f, 0.5, p, alpha)

    def test_unknown_route(self):
        dom = half_space(0.0)
        rule = build_grid(dom, 100)
        with pytest.raises(ConfigurationError):
            regularity_ratio(dom, GridField(dom, rule, np.ones(rule.size)), 0.5, 2.0, 0.0, route="fft")

    def test_seeded_family_is_reproducible(self):
        dom = interval(0.5, 3.0)
        rule = build_grid(dom, 400)
        a = empirical_constant(dom, rule, 0.5, 2.0, 0.0, count=4, seed=7)
        b = empirical_constant(dom, rule, 0.5, 2.0, 0.0, count=4, seed=7)
        assert a.ratios == b.ratios
        assert a.constant == max(a.ratios)

    @pytest.mark.slow
    def test_empirical_constant_is_stable_under_refinement(self):
        dom = half_space(1.0)
        coarse = empirical_constant(dom, build_grid(dom, 400), 0.5, 2.0, 0.0, count=30, seed=1)
        fine = empirical_constant(dom, build_grid(dom, 800), 0.5, 2.0, 0.0, count=30, seed=1)
        assert len(fine.ratios) == 30
        assert abs(fine.constant - coarse.constant) < 0.2 * coarse.constant

    @pytest.mark.slow
    def test_kernel_route_constant_is_stable_under_refinement(self):
        dom = half_space(0.0)
        coarse = empirical_constant(dom, build_grid(dom, 200), 0.5, 2.0, 0.0, count=30, seed=1, route="kernel")
        fine = empirical_constant(dom, build_grid(dom, 400), 0.5, 2.0, 0.0, count=30, seed=1, route="kernel")
        assert abs(fine.constant - coarse.constant) < 0.2 * coarse.constant

    def test_embedding_ratio_is_bounded(self, halfline_hermite):
        rng = np.random.default_rng(5)
        ratios = []
        for _ in range(30):
            u = halfline_hermite.synthesize(rng.standard_normal(halfline_hermite.K))
            ratios.append(embedding_ratio(halfline_hermite, u, 0.5))
        assert all(0.0 < r < 10.0 for r in ratios)


class TestGreensKernel:
    def test_constant(self):
        k = greens_kernel(0.5, 2.0)
        assert k.c_p == pytest.approx(math.log(8.0) + 0.5)
        assert greens_kernel(0.5, 1.0).c_p == pytest.approx(math.log(4.0) + 0.5)
        assert k.T(1.0, 1.0) == k.c_p
        assert k.T(10.0, 0.0) == pytest.approx(math.log(100.0))

    def test_rejects(self):
        with pytest.raises(ConfigurationError):
            greens_kernel(0.5, 0.5)
        with pytest.raises(ConfigurationError):
            greens_kernel(0.5, 2.0, margin=0.0)
        with pytest.raises(ConfigurationError):
            greens_kernel(1.0, 2.0)

    @pytest.mark.parametrize("x, y", [(1.0, 2.0), (0.5, 3.0), (3.0, 4.0), (2.0, 0.3)])
    def test_split_is_consistent(self, x, y):
        v = greens_kernel_eval(greens_kernel(0.5, 2.0), x, y)
        assert v.G > 0.0
        assert abs(v.G - (v.G1 + v.G2 + v.G3)) <= 1e-9 * max(1.0, v.G)

    def test_split_point_below_c_leaves_no_middle_piece(self):
        v = greens_kernel_eval(greens_kernel(0.5, 2.0), 0.5, 1.0)
        assert v.G2 == 0.0

    def test_symmetric(self):
        k = greens_kernel(0.3, 2.0)
        a = greens_kernel_eval(k, 0.7, 1.9).G
        b = greens_kernel_eval(k, 1.9, 0.7).G
        assert a == pytest.approx(b, rel=1e-8)

    @pytest.mark.parametrize("x, y", [(0.0, 1.0), (1.0, -1.0), (1.0, 1.0), (1.0, 1.0005)])
    def test_domain(self, x, y):
        with pytest.raises(DomainError):
            greens_kernel_eval(greens_kernel(0.5, 2.0), x, y)

    @pytest.mark.slow
    @pytest.mark.parametrize("s, p", [(0.3, 2.0), (0.5, 2.0), (0.7, 2.0), (0.3, 4.0)])
    def test_bounds_on_a_grid(self, s, p):
        k = greens_kernel(s, p)
        pts = np.linspace(0.1, 6.0, 20)
        bound = g3_uniform_bound(k)
        rows = kernel_table(k, pts, pts)
        assert len(rows) == 20 * 19
        for x, y, G, G1, G2, G3 in rows:
            assert G > 0.0
            assert G2 <= g2_majorant(k, x, y) * (1 + 1e-9)
            assert G3 <= bound * (1 + 1e-9)

    def test_table_skips_the_diagonal(self):
        rows = kernel_table(greens_kernel(0.5, 2.0), [1.0, 2.0], [1.0, 2.0])
        assert [(r[0], r[1]) for r in rows] == [(1.0, 2.0), (2.0, 1.0)]


class TestKernelRoute:
    def test_rejects(self):
        dom = interval(0.0, 3.0)
        rule = build_grid(dom, 100)
        with pytest.raises(ConfigurationError):
            solve_by_kernel(GridField(dom, rule, np.ones(rule.size)), 0.5)
        dom = half_space(0.0)
        rule = build_grid(dom, 100)
        with pytest.raises(ConfigurationError):
            solve_by_kernel(GridField(dom, rule, np.ones(rule.size)), 0.5, p=1.0)

    @pytest.mark.slow
    def test_first_mode(self):
        model = get_spectral_model(half_space(0.0), 30, 300)
        psi = model.mode(1)
        out = solve_by_kernel(psi, 0.5)
        assert rel_l2(out, out.values, psi.values) < 1e-3
        assert kernel_lp_ratio(psi, 0.5) == pytest.approx(1.0, abs=2e-3)

    @pytest.mark.slow
    @pytest.mark.parametrize("s", [0.3, 0.5, 0.7])
    def test_matches_the_spectral_route(self, s):
        dom = half_space(0.0)
        rule = build_grid(dom, 300)
        h = GridField.from_function(dom, rule, lambda y: y * np.exp(-y * y / 4.0), "bump")
        kernel = solve_by_kernel(h, s)
        spectral = solve_problem(dom, h, s)
        assert rel_l2(kernel, kernel.values, spectral.values) < 1e-3

    def test_never_evaluates_the_green_kernel(self, monkeypatch):
        def forbidden(*args, **kwargs):
            raise AssertionError("greens_kernel_eval called")

        monkeypatch.setattr(regularity, "greens_kernel_eval", forbidden)
        dom = half_space(0.0)
        rule = build_grid(dom, 100)
        h = GridField.from_function(dom, rule, lambda y: y * np.exp(-y * y / 4.0), "bump")
        out = solve_by_kernel(h, 0.5)
        assert np.all(np.isfinite(out.values))
        assert np.all(out.values > 0.0)
