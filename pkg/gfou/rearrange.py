"""
rearrange.py

Distribution functions, Gaussian decreasing rearrangements u^(*) on (0, gamma(Omega)],
the half-space rearrangement u^star(x) = u^(*)(Phi(x1)), concentration order,
Hardy-Littlewood, slice-wise (Steiner) symmetrization of extension fields and
numerical checks of the first and second order derivation formulas.

Discrete rearrangement sorts nodes by |value| descending with ties broken by
node index; a node of weight w_j occupies the interval (b_{j-1}, b_j] of length
w_j. The cumulative integral is piecewise linear and constant past the last
breakpoint.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from gfou import config
from gfou.errors import ConfigurationError, InconclusiveError
from gfou.gausscore import (GaussianDomain, GridField, build_grid, gaussian_cell_mass,
                            gaussian_density, half_space, isoperimetric_profile, phi_inverse)
from gfou.utils import write_matrix

logger = logging.getLogger(__name__)

_GL_T, _GL_W = np.polynomial.legendre.leggauss(6)


# --------------------------- profiles --------------------------------------

@dataclass(eq=False)
class RearrangedProfile:
    measure: float
    breakpoints: np.ndarray
    values: np.ndarray
    cumulative: np.ndarray
    label: str = ""

    @classmethod
    def from_steps(cls, measure: float, widths, values, label: str = "") -> "RearrangedProfile":
        widths = np.asarray(widths, dtype=float)
        values = np.asarray(values, dtype=float)
        if widths.shape != values.shape:
            raise ConfigurationError("one width per step value is required")
        if np.any(widths < 0.0) or np.any(values < 0.0):
            raise ConfigurationError("profile steps must be nonnegative")
        if np.any(np.diff(values) > 0.0):
            raise ConfigurationError("profile values must be nonincreasing")
        return cls(float(measure), np.cumsum(widths), values, np.cumsum(values * widths), label)

    @property
    def widths(self) -> np.ndarray:
        return np.diff(np.concatenate([[0.0], self.breakpoints]))

    @property
    def total(self) -> float:
        return float(self.cumulative[-1]) if self.cumulative.size else 0.0

    def at(self, r):
        """u^(*)(r): value of the step containing r (left-open, right-closed steps)."""
        r = np.asarray(r, dtype=float)
        idx = np.searchsorted(self.breakpoints, r, side="left")
        vals = np.concatenate([self.values, [0.0]])
        out = vals[np.minimum(idx, len(self.values))]
        return float(out) if out.ndim == 0 else out

    def integral_to(self, r):
        """int_0^r u^(*)."""
        out = np.interp(r, np.concatenate([[0.0], self.breakpoints]),
                        np.concatenate([[0.0], self.cumulative]))
        return float(out) if np.ndim(out) == 0 else out

    def maximal(self, r):
        """u^(**)(r) = (1/r) int_0^r u^(*)."""
        r = np.asarray(r, dtype=float)
        out = np.where(r > 0.0, self.integral_to(r) / np.where(r > 0.0, r, 1.0), self.values[0])
        return float(out) if out.ndim == 0 else out

    def interpolate(self, r):
        """Piecewise-linear through the step midpoints, flat beyond the end midpoints."""
        mids = self.breakpoints - 0.5 * self.widths
        out = np.interp(r, mids, self.values)
        return float(out) if np.ndim(out) == 0 else out

    def distribution(self, t: float) -> float:
        return float(np.sum(self.widths[self.values > t]))

    def lp_norm(self, p: float = 2.0) -> float:
        if math.isinf(p):
            return float(self.values[0]) if self.values.size else 0.0
        return float(np.dot(self.widths, self.values ** p) ** (1.0 / p))

    def scaled(self, c: float) -> "RearrangedProfile":
        return RearrangedProfile(self.measure, self.breakpoints, self.values * c, self.cumulative * c,
                                 self.label)

    def to_csv(self, path, cumulative: bool = True, comments=()):
        header = ["r", "value"] + (["cumulative"] if cumulative else [])
        cols = [self.breakpoints, self.values] + ([self.cumulative] if cumulative else [])
        return write_matrix(path, header, np.column_stack(cols), comments)


def distribution_function(u: GridField, t: float) -> float:
    """gamma({|u| > t}) as a sum of node weights."""
    return float(np.sum(u.rule.weights[np.abs(u.values) > t]))


def decreasing_rearrangement(u: GridField, measure: Optional[float] = None) -> RearrangedProfile:
    a = np.abs(u.values)
    # ties go to larger x1 first, the orientation of fields on Omega^star
    order = np.lexsort((-u.rule.x, -a))
    widths = u.rule.weights[order]
    vals = a[order]
    m = u.domain.measure if measure is None else measure
    return RearrangedProfile(m, np.cumsum(widths), vals, np.cumsum(vals * widths), f"{u.label}*")


def star_domain(measure: float) -> GaussianDomain:
    """Omega^star = {x1 > Phi^{-1}(measure)} in one dimension."""
    if not 0.0 < measure < 1.0:
        raise ConfigurationError(f"rearrangement measure must lie in (0, 1), got {measure}")
    return half_space(float(phi_inverse(measure)) + 0.0)


def sample_on_star(profile: RearrangedProfile, domain: GaussianDomain, rule) -> np.ndarray:
    """Measure-matched samples of u^(*)(Phi(x1)) at the nodes of a 1D rule on Omega^star."""
    w = rule.weights
    order = np.argsort(rule.x)
    right = np.cumsum(w[order][::-1])[::-1]
    r = np.empty_like(w)
    r[order] = right - 0.5 * w[order]
    r *= profile.breakpoints[-1] / rule.total
    return profile.interpolate(r)


def gaussian_rearrangement_field(u: GridField, resolution: Optional[int] = None,
                                 profile: Optional[RearrangedProfile] = None) -> GridField:
    """u^star on the half-space of equal Gaussian measure, on a graded 1D grid."""
    profile = decreasing_rearrangement(u) if profile is None else profile
    dom = star_domain(profile.measure)
    if resolution is None:
        resolution = u.rule.size if u.rule.boundary is not None else 800
    rule = build_grid(dom, resolution)
    vals = sample_on_star(profile, dom, rule)
    return GridField(dom, rule, vals, f"{u.label}^star", {"profile_total": profile.total})


# --------------------------- order relations -------------------------------

@dataclass(frozen=True)
class ConcentrationResult:
    holds: bool
    r: Optional[float]
    gap: float
    max_gap: float
    worst_r: float


def concentration_leq(p: RearrangedProfile, q: RearrangedProfile, tol: float = 0.0) -> ConcentrationResult:
    """Check int_0^r p <= int_0^r q + tol at every breakpoint of either profile."""
    if abs(p.measure - q.measure) > 1e-10:
        raise ConfigurationError(f"profiles live on different measures {p.measure} and {q.measure}")
    r = np.union1d(p.breakpoints, q.breakpoints)
    gap = p.integral_to(r) - q.integral_to(r)
    worst = int(np.argmax(gap))
    bad = np.flatnonzero(gap > tol)
    if bad.size:
        i = int(bad[0])
        return ConcentrationResult(False, float(r[i]), float(gap[i]), float(gap[worst]), float(r[worst]))
    return ConcentrationResult(True, None, 0.0, float(gap[worst]), float(r[worst]))


def profile_product_integral(p: RearrangedProfile, q: RearrangedProfile) -> float:
    """int_0^inf p(r) q(r) dr for two step profiles."""
    r = np.union1d(p.breakpoints, q.breakpoints)
    left = np.concatenate([[0.0], r[:-1]])
    mid = 0.5 * (left + r)
    return float(np.sum((r - left) * p.at(mid) * q.at(mid)))


@dataclass(frozen=True)
class HardyLittlewoodResult:
    holds: bool
    lhs: float
    rhs: float


def hardy_littlewood_check(u: GridField, v: GridField, slack: float = 1e-8) -> HardyLittlewoodResult:
    if not u.rule.same_as(v.rule):
        raise ConfigurationError("Hardy-Littlewood check needs fields on one grid")
    lhs = float(np.dot(u.rule.weights, np.abs(u.values * v.values)))
    rhs = profile_product_integral(decreasing_rearrangement(u), decreasing_rearrangement(v))
    return HardyLittlewoodResult(lhs <= rhs + slack, lhs, rhs)


# --------------------------- slices of 1D extension fields -----------------

class SliceSampler:
    """Cubic-spline reconstruction of x -> w(x, y) for a 1D extension field.

    The Dirichlet boundary points are added as zero knots (the right end only
    for finite-difference models, whose grid really vanishes there).
    """

    def __init__(self, ext):
        model = ext.base
        if model.domain.dim != 1 or model.rule.boundary is None:
            raise ConfigurationError("slice reconstruction needs a 1D graded grid")
        self.ext = ext
        lo, hi = model.rule.boundary
        self.right_zero = model.method == "fd"
        x = model.rule.x
        self.knots = np.concatenate([[lo], x] + ([[hi]] if self.right_zero else []))
        self.lo, self.hi = float(self.knots[0]), float(self.knots[-1])
        mids = 0.5 * (self.knots[1:] + self.knots[:-1])
        self.scan = np.sort(np.concatenate([self.knots, mids]))
        self._cache = {}

    def spline(self, values: np.ndarray) -> CubicSpline:
        pad = [np.zeros(1), values] + ([np.zeros(1)] if self.right_zero else [])
        return CubicSpline(self.knots, np.concatenate(pad))

    def slice(self, y: float, derivative: int = 0) -> CubicSpline:
        key = (float(y), derivative)
        if key not in self._cache:
            vals = self.ext.sample([y], derivative)[0]
            if derivative == 0 and np.min(vals) < -1e-10 * max(np.max(np.abs(vals)), 1e-300):
                raise ConfigurationError("derivation checks need a nonnegative field")
            self._cache[key] = self.spline(vals)
        return self._cache[key]

    # ---- integrals against the Gaussian density

    def integrate(self, g: CubicSpline, a: float, b: float) -> float:
        if b <= a:
            return 0.0
        inner = self.knots[(self.knots > a) & (self.knots < b)]
        edges = np.concatenate([[a], inner, [b]])
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[1:] + edges[:-1])
        x = (mid[:, None] + half[:, None] * _GL_T[None, :]).ravel()
        w = (half[:, None] * _GL_W[None, :]).ravel()
        return float(np.dot(w, g(x) * gaussian_density(x)))

    # ---- level sets

    def level_points(self, w: CubicSpline, t: float) -> np.ndarray:
        vals = w(self.scan) - t
        roots = list(self.scan[vals == 0.0])
        sign = np.sign(vals)
        idx = np.flatnonzero(sign[:-1] * sign[1:] < 0)
        for i in idx:
            roots.append(brentq(lambda x: float(w(x)) - t, self.scan[i], self.scan[i + 1], xtol=1e-15))
        return np.array(sorted(roots))

    def superlevel(self, w: CubicSpline, t: float):
        """Intervals of {w > t} within (lo, hi)."""
        cuts = np.concatenate([[self.lo], self.level_points(w, t), [self.hi]])
        out = []
        for a, b in zip(cuts[:-1], cuts[1:]):
            if b > a and float(w(0.5 * (a + b))) > t:
                out.append((float(a), float(b)))
        return out

    def measure_above(self, w: CubicSpline, t: float) -> float:
        return float(sum(gaussian_cell_mass(a, b) for a, b in self.superlevel(w, t)))

    def level(self, y: float, r: float) -> float:
        """t = w^(*)(r, y), solving gamma({w > t}) = r."""
        w = self.slice(y)
        if r >= self.measure_above(w, 0.0):
            return 0.0
        top = float(np.max(w(self.scan)))
        return brentq(lambda t: self.measure_above(w, t) - r, 0.0, top, xtol=1e-15, rtol=4 * np.finfo(float).eps)

    def cumulative(self, y: float, r: float) -> float:
        """int_0^r w^(*)(sigma, y) d sigma from the spline slice."""
        w = self.slice(y)
        t = self.level(y, r)
        body = sum(self.integrate(w, a, b) for a, b in self.superlevel(w, t))
        return body + t * (r - self.measure_above(w, t))

    def integral_above(self, y: float, r: float, derivative: int) -> float:
        t = self.level(y, r)
        g = self.slice(y, derivative)
        return sum(self.integrate(g, a, b) for a, b in self.superlevel(self.slice(y), t))


def _richardson(fn, h: float) -> float:
    return (4.0 * fn(0.5 * h) - fn(h)) / 3.0


@dataclass
class DerivationResult:
    lhs: float
    rhs: float
    residual: float
    inconclusive: bool = False
    reason: str = ""
    correction: Optional[float] = None
    level_points: List[float] = field(default_factory=list)


def _inconclusive(reason: str) -> DerivationResult:
    logger.info("derivation check inconclusive: %s", reason)
    return DerivationResult(math.nan, math.nan, math.nan, True, reason)


def _check_plateau(sampler: SliceSampler, y: float, t: float):
    w = sampler.slice(y)
    pts = sampler.level_points(w, t)
    if t <= 0.0:
        return pts, None
    scale = max(float(np.max(np.abs(w(sampler.scan)))), 1e-300)
    grad = np.abs(w.derivative()(pts)) if pts.size else np.zeros(0)
    if pts.size and np.any(grad < config.PLATEAU_GRADIENT * scale):
        return pts, "plateau: the level set has a vanishing gradient"
    return pts, None


def first_derivation_check(ext, y: float, r: float, h: float = config.DERIVATIVE_STEP) -> DerivationResult:
    """|int_{w > w^(*)(r,y)} w_y dgamma - d/dy int_0^r w^(*)(., y)|."""
    if y - h <= 0.0:
        raise ConfigurationError("y must exceed the finite-difference step")
    if ext.base.domain.dim == 2:
        return _first_derivation_discrete(ext, y, r, h)
    sampler = SliceSampler(ext)
    t = sampler.level(y, r)
    pts, plateau = _check_plateau(sampler, y, t)
    if plateau:
        return _inconclusive(plateau)
    lhs = sampler.integral_above(y, r, 1)
    rhs = _richardson(lambda k: (sampler.cumulative(y + k, r) - sampler.cumulative(y - k, r)) / (2 * k), h)
    return DerivationResult(lhs, rhs, abs(lhs - rhs), level_points=list(pts))


def _discrete_cumulative(values: np.ndarray, weights: np.ndarray, r: float) -> float:
    a = np.abs(values)
    order = np.argsort(-a, kind="stable")
    b = np.cumsum(weights[order])
    c = np.cumsum(a[order] * weights[order])
    return float(np.interp(r, np.concatenate([[0.0], b]), np.concatenate([[0.0], c])))


def _first_derivation_discrete(ext, y: float, r: float, h: float) -> DerivationResult:
    w = ext.base.rule.weights
    vals = ext.sample([y])[0]
    order = np.argsort(-np.abs(vals), kind="stable")
    b = np.cumsum(w[order])
    j = min(int(np.searchsorted(b, r, side="left")), len(b) - 1)
    t = abs(vals[order[j]])
    ties = np.sum(np.abs(np.abs(vals) - t) <= 1e-14 * max(t, 1e-300))
    if t > 0.0 and ties > 1:
        return _inconclusive("plateau: several nodes share the level value")
    dy = ext.sample([y], 1)[0] * np.sign(vals)
    above = order[:j]
    prev = b[j - 1] if j > 0 else 0.0
    lhs = float(np.dot(w[above], dy[above]) + (min(r, b[j]) - prev) * dy[order[j]])
    rhs = _richardson(lambda k: (_discrete_cumulative(ext.sample([y + k])[0], w, r)
                                 - _discrete_cumulative(ext.sample([y - k])[0], w, r)) / (2 * k), h)
    return DerivationResult(lhs, rhs, abs(lhs - rhs))


def second_derivation_check_1d(ext, y: float, r: float, h: float = config.DERIVATIVE_STEP) -> DerivationResult:
    """Second order derivation formula on a 1D slice.

    lhs = int_{w > t} w_yy dgamma
    rhs = d^2/dy^2 int_0^r w^(*) - S2 + S1^2 / S0,
    with S_j = sum over level points of (w_y)^j phi / |w_x|.
    """
    if ext.base.domain.dim != 1:
        raise ConfigurationError("the second order check is one-dimensional")
    if y - h <= 0.0:
        raise ConfigurationError("y must exceed the finite-difference step")
    sampler = SliceSampler(ext)
    t = sampler.level(y, r)
    if t <= 0.0:
        return _inconclusive("level set lies on the boundary (no sign change to bracket)")
    pts, plateau = _check_plateau(sampler, y, t)
    if plateau:
        return _inconclusive(plateau)
    if pts.size == 0:
        return _inconclusive("no level points found")
    wx = np.abs(sampler.slice(y).derivative()(pts))
    wy = sampler.slice(y, 1)(pts)
    dens = gaussian_density(pts) / wx
    s0, s1, s2 = float(np.sum(dens)), float(np.sum(wy * dens)), float(np.sum(wy * wy * dens))
    correction = -s2 + s1 * s1 / s0
    lhs = sampler.integral_above(y, r, 2)
    c0 = sampler.cumulative(y, r)
    d2 = _richardson(lambda k: (sampler.cumulative(y + k, r) - 2.0 * c0 + sampler.cumulative(y - k, r)) / (k * k), h)
    rhs = d2 + correction
    return DerivationResult(lhs, rhs, abs(lhs - rhs), correction=correction, level_points=list(pts))


# --------------------------- Steiner symmetrization ------------------------

@dataclass(eq=False)
class SteinerField:
    """Slice-wise rearrangement of an extension field: W(r, y) = int_0^r w^(*)(., y)."""
    measure: float
    r: np.ndarray
    y_levels: np.ndarray
    table: np.ndarray
    profiles: List[RearrangedProfile]

    def star_slice(self, index: int, resolution: int = 800) -> GridField:
        """w^star(., y) on Omega^star for the index-th level."""
        prof = self.profiles[index]
        dom = star_domain(self.measure)
        rule = build_grid(dom, resolution)
        return GridField(dom, rule, sample_on_star(prof, dom, rule), f"w^star(y={self.y_levels[index]:g})")


def steiner_symmetrize(ext, r: Optional[Sequence[float]] = None) -> SteinerField:
    measure = ext.base.domain.measure
    r = np.linspace(0.0, measure, 101) if r is None else np.asarray(r, dtype=float)
    profiles, rows = [], []
    for i, y in enumerate(ext.y_levels):
        prof = decreasing_rearrangement(ext.base.field(ext.values[i], f"w(y={y:g})"), measure)
        profiles.append(prof)
        rows.append(prof.integral_to(r))
    return SteinerField(measure, r, ext.y_levels.copy(), np.array(rows), profiles)


@dataclass(frozen=True)
class PdeCheck:
    residual: float
    level_form: float
    w_yy: float
    w_y: float
    w_rr: float


def concentration_pde_check(ext, y: float, r: float, h: float = config.DERIVATIVE_STEP) -> PdeCheck:
    """W_yy + (a/y) W_y + p(r) W_rr for W(r, y) = int_0^r w^(*)(., y).

    Nonnegative for every extension field, zero when the slices are already
    rearranged on a half-space. `level_form` is the same quantity from the
    level-point sums, as an independent value.
    """
    sampler = SliceSampler(ext)
    a = ext.params.a
    c0 = sampler.cumulative(y, r)
    w_yy = _richardson(lambda k: (sampler.cumulative(y + k, r) - 2.0 * c0 + sampler.cumulative(y - k, r)) / (k * k), h)
    w_y = _richardson(lambda k: (sampler.cumulative(y + k, r) - sampler.cumulative(y - k, r)) / (2 * k), h)
    # W_r = w^(*)(r), so W_rr is a first difference of the level
    w_rr = _richardson(lambda k: (sampler.level(y, r + k) - sampler.level(y, r - k)) / (2 * k), h * r)
    p = float(isoperimetric_profile(r)) ** 2
    residual = w_yy + a / y * w_y + p * w_rr

    t = sampler.level(y, r)
    pts = sampler.level_points(sampler.slice(y), t)
    if pts.size == 0:
        raise InconclusiveError("no level points for the level-set form")
    wx = np.abs(sampler.slice(y).derivative()(pts))
    wy = sampler.slice(y, 1)(pts)
    phi = gaussian_density(pts)
    s0, s1, s2 = np.sum(phi / wx), np.sum(wy * phi / wx), np.sum(wy * wy * phi / wx)
    level_form = float(np.sum(phi * wx) - p / s0 + s2 - s1 * s1 / s0)
    return PdeCheck(float(residual), level_form, w_yy, w_y, w_rr)
