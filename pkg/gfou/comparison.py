"""
comparison.py

End-to-end comparison experiments: solve L^s u = f on Omega and the symmetrized
problem on the half-space Omega^star of equal Gaussian measure, then check the
concentration inequality u^star < psi within a calibrated tolerance budget.

Budget = CALIBRATION_FACTOR * calibration_gap + CALIBRATION_FLOOR + truncation
allowance, where calibration_gap is the cumulative-profile discrepancy of two
discretizations of the half-space equality case at the same resolution.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from gfou import config
from gfou.datacontroller import get_spectral_model
from gfou.errors import ConfigurationError
from gfou.extension import build_extension
from gfou.gausscore import (FractionalParams, GaussianDomain, GridField, build_quadrature, graded_nodes,
                            half_space)
from gfou.rearrange import (ConcentrationResult, RearrangedProfile, concentration_leq,
                            decreasing_rearrangement, sample_on_star, star_domain)
from gfou.semigroup import halfspace_semigroup_at
from gfou.spectral import SpectralModel, build_spectral_model, dirichlet_semigroup, fractional_apply

logger = logging.getLogger(__name__)


def default_k(domain: GaussianDomain) -> int:
    return config.COMPARISON_K_2D if domain.dim == 2 else config.COMPARISON_K_1D


def truncation_allowance(u: GridField, s: float, measure: float) -> float:
    """L^1 bound sqrt(gamma) lambda_K^{-s} ||tail of f|| on the error of a K-mode solve."""
    rep = u.diagnostics.get("truncation")
    if not rep:
        return 0.0
    return math.sqrt(measure) * rep["lambda_K"] ** -s * math.sqrt(rep["tail_energy"])


# --------------------------- solves ----------------------------------------

def solve_with_model(model: SpectralModel, f: GridField, s: float) -> GridField:
    u = fractional_apply(model, f, -FractionalParams(s).s)
    u.label = f"u[{f.label}]"
    return u


def solve_problem(domain: GaussianDomain, f: GridField, s: float, K: Optional[int] = None) -> GridField:
    """u = L^{-s} f with Dirichlet conditions on `domain`."""
    K = default_k(domain) if K is None else K
    model = get_spectral_model(domain, K, f.rule.resolution or 0)
    return solve_with_model(model, f, s)


def star_model(omega_measure: float, K: int, resolution: int) -> SpectralModel:
    dom = star_domain(omega_measure)
    method = "hermite" if dom.lam == 0.0 else "fd"
    return get_spectral_model(dom, K, resolution, method)


def solve_symmetrized(omega_measure: float, f_star_profile: RearrangedProfile, s: float,
                      K: Optional[int] = None, resolution: int = config.STAR_RESOLUTION,
                      method: Optional[str] = None) -> GridField:
    """psi = L^{-s} f^star on Omega^star, with f^star(x) = f^(*)(Phi(x1))."""
    K = config.COMPARISON_K_1D if K is None else K
    if method is None:
        model = star_model(omega_measure, K, resolution)
    else:
        model = get_spectral_model(star_domain(omega_measure), K, resolution, method)
    f_star = model.field(sample_on_star(f_star_profile, model.domain, model.rule),
                         f"{f_star_profile.label or 'f'}^star")
    psi = solve_with_model(model, f_star, s)
    psi.label = f"psi[{f_star.label}]"
    psi.diagnostics["method"] = model.method
    return psi


def _profile_distance(p: RearrangedProfile, q: RearrangedProfile) -> float:
    r = np.union1d(p.breakpoints, q.breakpoints)
    return float(np.max(np.abs(p.integral_to(r) - q.integral_to(r))))


def calibration_gap(omega_measure: float, f_star_profile: RearrangedProfile, s: float,
                    K: Optional[int] = None, resolution: int = config.STAR_RESOLUTION) -> float:
    """Largest cumulative-profile discrepancy in the half-space equality case.

    The finite-difference solve at `resolution` is compared with the odd-Hermite
    model when Omega^star = {x1 > 0}, else with a finite-difference solve at twice
    the resolution.
    """
    dom = star_domain(omega_measure)
    fd = solve_symmetrized(omega_measure, f_star_profile, s, K, resolution, method="fd")
    if dom.lam == 0.0:
        ref = solve_symmetrized(omega_measure, f_star_profile, s, K, resolution, method="hermite")
    else:
        ref = solve_symmetrized(omega_measure, f_star_profile, s, K, 2 * resolution, method="fd")
    gap = _profile_distance(decreasing_rearrangement(fd, omega_measure),
                            decreasing_rearrangement(ref, omega_measure))
    logger.debug("calibration gap at measure %.6g, resolution %d: %.3e", omega_measure, resolution, gap)
    return gap


# --------------------------- reports ---------------------------------------

@dataclass(eq=False)
class ComparisonReport:
    domain: dict
    s: float
    datum: str
    profiles: Tuple[RearrangedProfile, RearrangedProfile]
    max_gap: float
    tolerance_budget: float
    worst_r: float = 0.0
    solution: Optional[GridField] = field(default=None, repr=False)
    symmetrized: Optional[GridField] = field(default=None, repr=False)
    models: tuple = field(default=(), repr=False)
    diagnostics: dict = field(default_factory=dict)

    @property
    def verdict(self) -> str:
        return "confirmed" if self.max_gap <= self.tolerance_budget else "violated-beyond-budget"

    @property
    def confirmed(self) -> bool:
        return self.verdict == "confirmed"

    def norm_check(self, p: float) -> Tuple[float, float, bool]:
        """||u||_p <= ||psi||_p + budget, the norm consequence of u^star < psi."""
        nu, npsi = self.profiles[0].lp_norm(p), self.profiles[1].lp_norm(p)
        return nu, npsi, nu <= npsi + self.tolerance_budget

    def profile_rows(self):
        pu, ppsi = self.profiles
        r = np.union1d(pu.breakpoints, ppsi.breakpoints)
        return zip(r, pu.integral_to(r), ppsi.integral_to(r), pu.at(r), ppsi.at(r))

    def to_text(self) -> str:
        lines = [
            f"domain: {self.domain}",
            f"s: {self.s:g}",
            f"datum: {self.datum}",
            f"max_gap: {self.max_gap:.6e}",
            f"worst_r: {self.worst_r:.6g}",
            f"tolerance_budget: {self.tolerance_budget:.6e}",
            f"verdict: {self.verdict}",
        ]
        for key in ("calibration_gap", "truncation_allowance"):
            if key in self.diagnostics:
                lines.append(f"{key}: {self.diagnostics[key]:.6e}")
        for w in self.diagnostics.get("warnings", []):
            lines.append(f"warning: {w}")
        return "\n".join(lines)


def verify_comparison(domain: GaussianDomain, f: GridField, s: float, K: Optional[int] = None,
                      star_resolution: Optional[int] = None,
                      factor: float = config.CALIBRATION_FACTOR) -> ComparisonReport:
    """Solve on Omega and on Omega^star and check u^(*) < psi^(*) within the budget."""
    params = FractionalParams(s)
    if not domain.measure < 1.0:
        raise ConfigurationError(f"comparison needs gamma(Omega) < 1, got {domain.measure}")
    if np.min(f.values) < 0.0:
        raise ConfigurationError("comparison experiments use nonnegative data")
    K = default_k(domain) if K is None else K
    if star_resolution is None:
        star_resolution = f.rule.resolution if domain.dim == 1 else config.STAR_RESOLUTION
    K_star = min(config.COMPARISON_K_1D, star_resolution // config.NODES_PER_MODE)
    m = domain.measure

    model = get_spectral_model(domain, K, f.rule.resolution or 0)
    u = solve_with_model(model, f, params.s)
    f_prof = decreasing_rearrangement(f, m)
    smodel = star_model(m, K_star, star_resolution)
    psi = solve_symmetrized(m, f_prof, params.s, K_star, star_resolution)

    pu = decreasing_rearrangement(u, m)
    ppsi = decreasing_rearrangement(psi, m)
    gap = calibration_gap(m, f_prof, params.s, K_star, star_resolution)
    allowance = truncation_allowance(u, params.s, m) + truncation_allowance(psi, params.s, m)
    budget = factor * gap + config.CALIBRATION_FLOOR + allowance
    result = concentration_leq(pu, ppsi, budget)

    warnings = u.warnings + psi.warnings
    report = ComparisonReport(domain.descriptor(), params.s, f.label, (pu, ppsi), max(result.max_gap, 0.0),
                              budget, result.worst_r, u, psi, (model, smodel),
                              {"calibration_gap": gap, "truncation_allowance": allowance,
                               "measure": m, "warnings": warnings})
    logger.info("comparison on %r, s=%g: max gap %.3e, budget %.3e -> %s",
                domain, params.s, report.max_gap, budget, report.verdict)
    return report


@dataclass(frozen=True)
class SliceConcentration:
    y: float
    result: ConcentrationResult


def slice_concentration_check(report: ComparisonReport, y_levels: Optional[Sequence[float]] = None,
                              tol: Optional[float] = None) -> List[SliceConcentration]:
    """int_0^r w^(*)(., y) <= int_0^r v^(*)(., y) + tol for the extensions of u and psi."""
    if y_levels is None:
        y_levels = np.concatenate([[0.0], np.geomspace(1e-2, 4.0, 9)])
    tol = report.tolerance_budget if tol is None else tol
    model, smodel = report.models
    params = FractionalParams(report.s)
    m = report.diagnostics["measure"]
    w = build_extension(model, report.solution, params, y_levels)
    v = build_extension(smodel, report.symmetrized, params, y_levels)
    out = []
    for i, y in enumerate(w.y_levels):
        pw = decreasing_rearrangement(model.field(w.values[i]), m)
        pv = decreasing_rearrangement(smodel.field(v.values[i]), m)
        out.append(SliceConcentration(float(y), concentration_leq(pw, pv, tol)))
    return out


# --------------------------- nested half-spaces ----------------------------

@dataclass(frozen=True)
class DominationResult:
    holds: bool
    x: Optional[float]
    gap: float
    max_difference: float
    omega: float


def _nested_grid(omega: float, resolution: int):
    if not omega > 0.0:
        raise ConfigurationError(f"omega must be positive, got {omega}")
    xs = graded_nodes(0.0, config.TRUNCATION_RADIUS, resolution)
    j = int(np.argmin(np.abs(xs - omega)))
    if j > len(xs) - 3 - config.NODES_PER_MODE:
        raise ConfigurationError(f"omega = {omega} leaves too few nodes in the half-space")
    if j and abs(xs[j] - omega) > 0.0:
        logger.debug("omega %.6g snapped to grid node %.6g", omega, xs[j])
    return xs, j


def _datum_on(profile: RearrangedProfile, xs: np.ndarray, j: int):
    dom = half_space(float(xs[j]))
    model = build_spectral_model(dom, None, nodes=xs[j:])
    h = model.field(sample_on_star(profile, dom, model.rule), profile.label or "h")
    return model, h


def verify_halfspace_domination(omega: float, h_profile: RearrangedProfile, s: float,
                                resolution: int = config.DOMINATION_RESOLUTION) -> DominationResult:
    """psi <= zeta on H_omega, for psi solving on H_omega with datum h and zeta on H with h extended by zero.

    Both problems live on nested node sets of one graded grid and use the whole
    discrete spectrum.
    """
    params = FractionalParams(s)
    xs, j = _nested_grid(omega, resolution)
    m_omega, h = _datum_on(h_profile, xs, j)
    m_full = build_spectral_model(half_space(0.0), None, nodes=xs)
    hbar = np.zeros(m_full.rule.size)
    hbar[j:] = h.values
    zeta = fractional_apply(m_full, m_full.field(hbar, "zero(h)"), -params.s).values[j:]
    psi = fractional_apply(m_omega, h, -params.s).values
    diff = psi - zeta
    slack = config.DOMINATION_SLACK * max(float(np.max(np.abs(zeta))), 1e-300)
    k = int(np.argmax(diff))
    holds = diff[k] <= slack
    return DominationResult(bool(holds), None if holds else float(m_omega.rule.x[k]), float(diff[k]),
                            float(np.max(np.abs(diff))), float(xs[j]))


def semigroup_domination(omega: float, h_profile: RearrangedProfile, t: float,
                         resolution: int = config.DOMINATION_RESOLUTION, count: int = 20,
                         window: Tuple[float, float] = (0.2, 4.0)) -> DominationResult:
    """e^{-t L_{H_omega}} h <= e^{-t L_H} zero(h) at `count` nodes of H_omega.

    The half-space side uses the reflected Mehler kernel against a Gauss-Legendre
    rule on (omega, R); the H_omega side the discrete Dirichlet semigroup.
    """
    xs, j = _nested_grid(omega, resolution)
    m_omega, h = _datum_on(h_profile, xs, j)
    inner = dirichlet_semigroup(m_omega, h, t).values
    x = m_omega.rule.x
    pick = np.flatnonzero((x >= xs[j] + window[0]) & (x <= window[1]))
    if pick.size == 0:
        raise ConfigurationError("no nodes inside the comparison window")
    pick = pick[np.unique(np.linspace(0, pick.size - 1, count).round().astype(int))]
    rule = build_quadrature(half_space(float(xs[j])), config.DEFAULT_ORDER, width=0.25)
    hbar = GridField(half_space(0.0), rule, np.interp(rule.x, x, h.values), "zero(h)")
    outer = halfspace_semigroup_at(hbar, t, x[pick])
    diff = inner[pick] - outer
    slack = config.DOMINATION_SLACK * max(float(np.max(np.abs(outer))), 1e-300)
    k = int(np.argmax(diff))
    holds = diff[k] <= slack
    return DominationResult(bool(holds), None if holds else float(x[pick][k]), float(diff[k]),
                            float(np.max(np.abs(diff))), float(xs[j]))
