import numpy as np
import pytest

from gfou.comparison import (
    calibration_gap,
    default_k,
    semigroup_domination,
    slice_concentration_check,
    solve_problem,
    solve_symmetrized,
    star_model,
    truncation_allowance,
    verify_comparison,
    verify_halfspace_domination,
)
from gfou.datacontroller import get_spectral_model
from gfou.errors import ConfigurationError
from gfou.gausscore import GridField, build_grid, full_space, grid2d, half_space, interval, phi_tail
from gfou.rearrange import RearrangedProfile, decreasing_rearrangement, gaussian_rearrangement_field
from gfou.spectral import is_rearranged


def constant_datum(domain, resolution, value=1.0):
    rule = build_grid(domain, resolution)
    return GridField(domain, rule, np.full(rule.size, value), "one")


def bump_datum(domain, resolution, center=2.0, width=0.5):
    rule = build_grid(domain, resolution)
    if rule.dim == 1:
        fn = lambda x: np.exp(-(x - center) ** 2 / (2 * width * width))
    else:
        fn = lambda x: np.exp(-((x[:, 0] - center) ** 2 + (x[:, 1] - center) ** 2) / (2 * width * width))
    return GridField.from_function(domain, rule, fn, "bump")


def disk():
    return grid2d((0.5, 1.5, 0.5, 1.5), 31, lambda x1, x2: (x1 - 1.0) ** 2 + (x2 - 1.0) ** 2 < 0.25, label="disk")


SWEEP = [
    *[pytest.param("interval", datum, s, id=f"interval-{datum}-{s}")
      for datum in ("constant", "bump") for s in (0.3, 0.5, 0.7)],
    *[pytest.param("disk", datum, s, id=f"disk-{datum}-{s}", marks=pytest.mark.slow)
      for datum in ("constant", "bump") for s in (0.3, 0.7)],
]


@pytest.fixture(scope="module")
def interval_report():
    dom = interval(1.0, 3.0)
    return verify_comparison(dom, constant_datum(dom, 400), 0.5)


class TestSolves:
    def test_default_mode_counts(self):
        assert default_k(half_space(0.0)) == 30
        assert default_k(grid2d((0.0, 1.0, 0.0, 1.0), 11)) == 20

    def test_first_mode(self):
        dom = half_space(0.5)
        model = get_spectral_model(dom, 30, 400)
        f = model.mode(1)
        u = solve_problem(dom, f, 0.5)
        expected = model.eigenvalues[0] ** -0.5 * f.values
        assert np.max(np.abs(u.values - expected)) < 1e-10 * np.max(np.abs(expected))

    def test_symmetrized_first_mode(self, halfline_hermite):
        psi1 = halfline_hermite.mode(1)
        prof = decreasing_rearrangement(psi1)
        psi = solve_symmetrized(0.5, prof, 0.5, K=10, resolution=1000)
        assert psi.diagnostics["method"] == "hermite"
        assert np.max(np.abs(psi.values - psi1.values)) < 1e-10 * np.max(psi1.values)

    def test_symmetrized_solution_is_rearranged(self, halfline_hermite):
        f = halfline_hermite.synthesize(np.r_[1.0, 0.3, np.zeros(8)])
        psi = solve_symmetrized(0.5, decreasing_rearrangement(f), 0.5, K=10, resolution=1000)
        assert is_rearranged(psi)
        again = gaussian_rearrangement_field(psi, resolution=1000)
        assert np.max(np.abs(again.values - psi.values)) < 1e-5 * np.max(np.abs(psi.values))

    def test_star_model_method(self):
        assert star_model(0.5, 5, 200).method == "hermite"
        assert star_model(phi_tail(1.0), 5, 200).method == "fd"

    def test_truncation_allowance(self):
        dom = half_space(0.0)
        model = get_spectral_model(dom, 30, 400)
        assert truncation_allowance(model.mode(1), 0.5, 0.5) == 0.0
        u = solve_problem(dom, constant_datum(dom, 400), 0.5)
        assert truncation_allowance(u, 0.5, 0.5) > 0.0


class TestComparison:
    def test_equality_case(self):
        dom = half_space(0.3)
        rule = build_grid(dom, 400)
        f = GridField.from_function(dom, rule, lambda x: 1.0 - np.exp(-(x - 0.3)), "rising")
        report = verify_comparison(dom, f, 0.5)
        assert report.confirmed
        assert report.max_gap < 1e-6

    def test_interval_constant(self, interval_report):
        assert interval_report.confirmed
        assert interval_report.verdict == "confirmed"
        assert interval_report.tolerance_budget >= 1e-8

    @pytest.mark.slow
    def test_interval_constant_refined(self):
        dom = interval(1.0, 3.0)
        assert verify_comparison(dom, constant_datum(dom, 800), 0.5).confirmed

    @pytest.mark.parametrize("s", [0.3, 0.7])
    def test_interval_other_orders(self, s):
        dom = interval(1.0, 3.0)
        assert verify_comparison(dom, constant_datum(dom, 400), s).confirmed

    @pytest.mark.slow
    def test_square(self):
        dom = grid2d((0.0, 1.0, 0.0, 1.0), 31)
        report = verify_comparison(dom, constant_datum(dom, 31), 0.5)
        assert report.confirmed

    @pytest.mark.parametrize("shape, datum, s", SWEEP)
    def test_gap_stays_within_budget(self, shape, datum, s):
        if shape == "interval":
            dom, resolution, center = interval(1.0, 3.0), 400, 2.0
        else:
            dom, resolution, center = disk(), 31, 1.0
        f = constant_datum(dom, resolution) if datum == "constant" else bump_datum(dom, resolution, center)
        report = verify_comparison(dom, f, s)
        assert report.max_gap <= report.tolerance_budget
        assert report.confirmed

    def test_scaling(self, interval_report):
        dom = interval(1.0, 3.0)
        scaled = verify_comparison(dom, constant_datum(dom, 400, 3.0), 0.5)
        for a, b in zip(interval_report.profiles, scaled.profiles):
            np.testing.assert_allclose(b.cumulative, 3.0 * a.cumulative, rtol=1e-10)
        assert scaled.verdict == interval_report.verdict

    @pytest.mark.parametrize("p", [1.0, 2.0, 4.0])
    def test_norm_consequence(self, interval_report, p):
        nu, npsi, ok = interval_report.norm_check(p)
        assert ok
        assert nu <= npsi + interval_report.tolerance_budget

    def test_report_text(self, interval_report):
        text = interval_report.to_text()
        assert "verdict: confirmed" in text
        assert "calibration_gap:" in text
        rows = list(interval_report.profile_rows())
        assert len(rows) > 0
        assert all(len(row) == 5 for row in rows)

    def test_negative_data(self):
        dom = interval(1.0, 3.0)
        rule = build_grid(dom, 400)
        f = GridField.from_function(dom, rule, lambda x: x - 2.0)
        with pytest.raises(ConfigurationError):
            verify_comparison(dom, f, 0.5)

    def test_full_measure(self):
        dom = full_space(1)
        rule = build_grid(interval(-12.0, 12.0), 100)
        with pytest.raises(ConfigurationError):
            verify_comparison(dom, GridField(dom, rule, np.ones(rule.size)), 0.5)

    def test_invalid_order(self):
        dom = interval(1.0, 3.0)
        with pytest.raises(ConfigurationError):
            verify_comparison(dom, constant_datum(dom, 200), 1.2)

    def test_slices(self, interval_report):
        checks = slice_concentration_check(interval_report)
        assert checks[0].y == 0.0
        assert all(c.result.holds for c in checks)


class TestCalibration:
    def test_gap_shrinks_under_refinement(self, halfline_hermite):
        prof = decreasing_rearrangement(halfline_hermite.mode(1))
        coarse = calibration_gap(0.5, prof, 0.5, K=15, resolution=200)
        fine = calibration_gap(0.5, prof, 0.5, K=15, resolution=400)
        assert fine <= 0.5 * coarse

    def test_shifted_half_space_uses_a_finer_grid(self):
        prof = RearrangedProfile.from_steps(phi_tail(1.0), [phi_tail(1.0)], [1.0])
        gap = calibration_gap(phi_tail(1.0), prof, 0.5, K=10, resolution=200)
        assert 0.0 <= gap < 1e-2


class TestDomination:
    @pytest.mark.parametrize("s", [0.3, 0.5, 0.8])
    def test_nested_half_spaces(self, s):
        prof = RearrangedProfile.from_steps(phi_tail(0.5), [phi_tail(0.5)], [1.0])
        result = verify_halfspace_domination(0.5, prof, s, resolution=400)
        assert result.holds
        assert result.x is None

    @pytest.mark.parametrize("omega", [0.02, 0.05, 0.1])
    def test_small_offsets_land_on_interior_nodes(self, omega):
        prof = RearrangedProfile.from_steps(phi_tail(omega), [phi_tail(omega)], [1.0])
        result = verify_halfspace_domination(omega, prof, 0.5, resolution=800)
        assert 0.0 < result.omega < 2.0 * omega
        assert result.max_difference > 1e-3
        assert result.holds
        assert result.gap <= 1e-6

    def test_offset_below_the_first_node_snaps_to_the_boundary(self):
        prof = RearrangedProfile.from_steps(0.5, [0.5], [1.0])
        result = verify_halfspace_domination(1e-3, prof, 0.5, resolution=400)
        assert result.omega == 0.0
        assert result.max_difference == 0.0

    def test_rejects_nonpositive_offset(self):
        prof = RearrangedProfile.from_steps(0.5, [0.5], [1.0])
        with pytest.raises(ConfigurationError):
            verify_halfspace_domination(0.0, prof, 0.5)

    @pytest.mark.parametrize("t", [0.2, 1.0])
    def test_semigroups(self, t):
        prof = RearrangedProfile.from_steps(phi_tail(0.5), [phi_tail(0.5)], [1.0])
        result = semigroup_domination(0.5, prof, t)
        assert result.holds
        assert abs(result.omega - 0.5) < 0.05
