"""
regularity.py

Zygmund norms L^p(log L)^alpha of rearranged profiles, regularity ratios
||L^{-s} f||_{L^p(log L)^{alpha+s}} / ||f||_{L^p(log L)^alpha} and their empirical
constants, and the Green's function of L^{-s} on the half-line {x > 0}:

    G(x, y) = 1/Gamma(s) int_0^inf [M_t(x, y) - M_t(x, -y)] t^{s-1} dt,

split at c(p) and T(x, y) = max(c(p), log(x^2 + y^2)) into G1 + G2 + G3.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np
from scipy import integrate, special

from gfou import config
from gfou.comparison import solve_problem
from gfou.errors import ConfigurationError, DomainError, NumericalError
from gfou.gausscore import (FractionalParams, GaussianDomain, GridField, build_quadrature, gaussian_density,
                            half_space, panel_rule)
from gfou.rearrange import RearrangedProfile, decreasing_rearrangement
from gfou.semigroup import halfspace_semigroup_at, mehler_difference
from gfou.spectral import SpectralModel, hs_norm

logger = logging.getLogger(__name__)

_GL_T, _GL_W = np.polynomial.legendre.leggauss(16)


# --------------------------- Zygmund norms ---------------------------------

@dataclass(frozen=True)
class ZygmundNorm:
    p: float
    alpha: float
    value: float
    variant: str = "quasi"


def log_weight_integral(t1, t2, beta: float):
    """int_{t1}^{t2} (1 - log t)^beta dt for 0 <= t1 <= t2 <= 1, elementwise."""
    t1, t2 = np.broadcast_arrays(np.asarray(t1, dtype=float), np.asarray(t2, dtype=float))
    if beta > -1.0:
        a = beta + 1.0
        with np.errstate(divide="ignore"):
            u1 = np.where(t1 > 0.0, 1.0 - np.log(np.where(t1 > 0.0, t1, 1.0)), np.inf)
        u2 = 1.0 - np.log(t2)
        # e * [Gamma(a, u2) - Gamma(a, u1)] with u = 1 - log t
        return math.e * special.gamma(a) * (special.gammaincc(a, u2) - special.gammaincc(a, u1))
    out = np.empty(t1.shape)
    for i, (lo, hi) in enumerate(zip(t1.ravel(), t2.ravel())):
        out.flat[i] = integrate.quad(lambda t: (1.0 - math.log(t)) ** beta, lo, hi)[0] if hi > lo else 0.0
    return out


def zygmund_norm(profile: RearrangedProfile, p: float, alpha: float, variant: str = "quasi") -> ZygmundNorm:
    """(int_0^gamma [(1 - log t)^alpha g(t)]^p dt)^{1/p} with g = u^(*) (quasi) or u^(**) (maximal)."""
    if p < 1.0:
        raise ConfigurationError(f"p must be >= 1, got {p}")
    if variant not in ("quasi", "maximal"):
        raise ConfigurationError(f"unknown Zygmund variant {variant!r}")
    b = profile.breakpoints
    if b.size and b[-1] > 1.0 + 1e-12:
        raise ConfigurationError("profile extends beyond total Gaussian mass")
    left = np.concatenate([[0.0], b[:-1]])
    beta = alpha * p
    if variant == "quasi":
        total = float(np.dot(profile.values ** p, log_weight_integral(left, np.minimum(b, 1.0), beta)))
    else:
        total = _maximal_integral(profile, p, alpha)
    if not math.isfinite(total):
        raise NumericalError(f"Zygmund integral diverges (p={p}, alpha={alpha})")
    return ZygmundNorm(p, alpha, total ** (1.0 / p), variant)


def _maximal_integral(profile: RearrangedProfile, p: float, alpha: float) -> float:
    b, v, C = profile.breakpoints, profile.values, profile.cumulative
    if b.size == 0:
        return 0.0
    # u^(**) is constant on the first step
    total = float(v[0] ** p * log_weight_integral(0.0, b[0], alpha * p))
    lo, hi = b[:-1], b[1:]
    half, mid = 0.5 * (hi - lo), 0.5 * (hi + lo)
    t = mid[:, None] + half[:, None] * _GL_T[None, :]
    g = v[1:, None] + (C[:-1] - v[1:] * lo)[:, None] / t
    total += float(np.sum(half[:, None] * _GL_W[None, :] * ((1.0 - np.log(t)) ** alpha * g) ** p))
    if profile.measure > b[-1]:
        a, c = b[-1], min(profile.measure, 1.0)
        total += integrate.quad(lambda t: ((1.0 - math.log(t)) ** alpha * C[-1] / t) ** p, a, c)[0]
    return total


# --------------------------- regularity ratios -----------------------------

@dataclass
class RegularityRatio:
    ratio: float
    report: dict = field(default_factory=dict)


def check_regularity_hypotheses(domain: GaussianDomain, s: float, p: float, alpha: float) -> None:
    if domain.measure > 0.5 + 1e-12:
        raise ConfigurationError(f"regularity estimates need gamma(Omega) <= 1/2, got {domain.measure:.6g}")
    if p < 2.0:
        raise ConfigurationError(f"regularity estimates need p >= 2, got {p}")
    if p == 2.0 and alpha < -s / 2.0:
        raise ConfigurationError(f"at p = 2 alpha must be >= -s/2 = {-s / 2.0:g}, got {alpha}")


def regularity_ratio(domain: GaussianDomain, f: GridField, s: float, p: float, alpha: float,
                     K: Optional[int] = None, route: str = "spectral") -> RegularityRatio:
    params = FractionalParams(s)
    check_regularity_hypotheses(domain, params.s, p, alpha)
    fprof = decreasing_rearrangement(f, domain.measure)
    fnorm = zygmund_norm(fprof, p, alpha).value
    if fnorm == 0.0:
        return RegularityRatio(0.0, {"f_norm": 0.0, "u_norm": 0.0})
    if route == "spectral":
        u = solve_problem(domain, f, params.s, K)
    elif route == "kernel":
        u = solve_by_kernel(f, params.s, p)
    else:
        raise ConfigurationError(f"unknown solution route {route!r}")
    unorm = zygmund_norm(decreasing_rearrangement(u, domain.measure), p, alpha + params.s).value
    return RegularityRatio(unorm / fnorm, {"f_norm": fnorm, "u_norm": unorm, "route": route,
                                           "warnings": u.warnings})


def random_datum(rng: np.random.Generator, bumps: int = 3, spread: float = 4.0) -> Callable:
    """Nonnegative mixture of Gaussian bumps; parameters drawn before any grid exists."""
    amp = rng.uniform(0.2, 1.0, bumps)
    frac = rng.uniform(0.0, 1.0, bumps)
    width = rng.uniform(0.2, 1.0, bumps)

    def datum(x, lo: float = 0.0):
        x = np.asarray(x, dtype=float)
        pts = x if x.ndim == 1 else x[:, 0]
        centers = lo + spread * frac
        return np.sum(amp[:, None] * np.exp(-(pts[None, :] - centers[:, None]) ** 2
                                            / (2.0 * width[:, None] ** 2)), axis=0)

    return datum


@dataclass
class EmpiricalConstant:
    constant: float
    ratios: List[float]
    worst: int


def empirical_constant(domain: GaussianDomain, rule, s: float, p: float, alpha: float, count: int = 30,
                       seed: int = 0, K: Optional[int] = None, route: str = "spectral") -> EmpiricalConstant:
    """max over a seeded family of random nonnegative data of regularity_ratio."""
    rng = np.random.default_rng(seed)
    lo = domain.support()[0]
    ratios = []
    for i in range(count):
        datum = random_datum(rng)
        f = GridField.from_function(domain, rule, lambda x: datum(x, lo), f"random-{i}")
        ratios.append(regularity_ratio(domain, f, s, p, alpha, K, route).ratio)
    worst = int(np.argmax(ratios))
    logger.info("empirical constant over %d data: %.6g (datum %d)", count, ratios[worst], worst)
    return EmpiricalConstant(float(ratios[worst]), ratios, worst)


def embedding_ratio(model: SpectralModel, u: GridField, s: float) -> float:
    """||u||_{L^2(log L)^{s/2}} / ||u||_{H^s}."""
    num = zygmund_norm(decreasing_rearrangement(u, model.domain.measure), 2.0, s / 2.0).value
    den = hs_norm(model, u, s)
    return num / den if den > 0.0 else 0.0


# --------------------------- Green's kernel --------------------------------

@dataclass(frozen=True)
class GreensKernel:
    s: float
    p: float
    c_p: float

    def T(self, x: float, y: float) -> float:
        return max(self.c_p, math.log(x * x + y * y))


def greens_kernel(s: float, p: float, margin: float = config.KERNEL_MARGIN) -> GreensKernel:
    FractionalParams(s)
    if p < 1.0:
        raise ConfigurationError(f"p must be >= 1, got {p}")
    if margin <= 0.0:
        raise ConfigurationError("c(p) needs a positive margin over max(1, log 4p)")
    return GreensKernel(float(s), float(p), max(1.0, math.log(4.0 * p)) + margin)


@dataclass(frozen=True)
class KernelValue:
    G: float
    G1: float
    G2: float
    G3: float


_QUAD = {"epsabs": 1e-14, "epsrel": 1e-12, "limit": 400}


def _integrand_t(x: float, y: float, s: float):
    return lambda t: float(mehler_difference(x, y, t)) * t ** (s - 1.0)


def _integrand_tau(x: float, y: float, s: float):
    return lambda tau: float(mehler_difference(x, y, math.exp(tau))) * math.exp(s * tau)


def _quad(fn, lo, hi, points=None) -> float:
    if points is not None and np.isfinite(hi):
        points = [p for p in points if lo < p < hi] or None
    else:
        points = None
    val, _ = integrate.quad(fn, lo, hi, points=points, **_QUAD)
    return val


def greens_kernel_eval(k: GreensKernel, x: float, y: float) -> KernelValue:
    if not (x > 0.0 and y > 0.0):
        raise DomainError(f"Green's kernel needs x, y > 0, got ({x}, {y})")
    if abs(x - y) < config.KERNEL_DIAGONAL:
        raise DomainError(f"|x - y| < {config.KERNEL_DIAGONAL:g}: too close to the diagonal")
    s, c = k.s, k.c_p
    T = k.T(x, y)
    gs = special.gamma(s)
    peak = [math.log(0.25 * (x - y) ** 2)]
    g1 = _quad(_integrand_tau(x, y, s), -60.0, math.log(c), peak) / gs
    g2 = _quad(_integrand_t(x, y, s), c, T) / gs if T > c else 0.0
    g3 = _quad(_integrand_t(x, y, s), T, np.inf) / gs
    # the whole integral again, split at t = e^5 only
    g = (_quad(_integrand_tau(x, y, s), -60.0, 5.0, peak) + _quad(_integrand_t(x, y, s), math.exp(5.0), np.inf)) / gs
    return KernelValue(g, g1, g2, g3)


def g2_majorant(k: GreensKernel, x: float, y: float) -> float:
    """[c_s / c^{1-s}] T(x, y) [phi(x) phi(y)]^{-4 e^{-c}}."""
    c_s = FractionalParams(k.s).c_s
    dens = float(gaussian_density(x) * gaussian_density(y))
    return c_s / k.c_p ** (1.0 - k.s) * k.T(x, y) * dens ** (-4.0 * math.exp(-k.c_p))


def g3_uniform_bound(k: GreensKernel) -> float:
    """(1 - e^{-2c})^{-3/2} cosh(1 / (2(1 - e^{-2c}))) c^{s-1} / Gamma(s)."""
    d = -math.expm1(-2.0 * k.c_p)
    return d ** -1.5 * math.cosh(0.5 / d) * k.c_p ** (k.s - 1.0) / special.gamma(k.s)


def kernel_table(k: GreensKernel, xs, ys):
    """Rows (x, y, G, G1, G2, G3) over a grid, skipping near-diagonal pairs."""
    rows = []
    for x in xs:
        for y in ys:
            if abs(x - y) < config.KERNEL_DIAGONAL:
                continue
            v = greens_kernel_eval(k, float(x), float(y))
            rows.append((float(x), float(y), v.G, v.G1, v.G2, v.G3))
    return rows


# --------------------------- kernel-route solve ----------------------------

def _time_rule(points: int, t_min: float, t_max: float):
    tau, w = panel_rule(math.log(t_min), math.log(t_max), points, config.EXTENSION_PANEL)
    return np.exp(tau), w


def solve_by_kernel(h: GridField, s: float, p: float = 2.0, t_min: float = config.SEMIGROUP_MIN_T,
                    t_max: float = 40.0) -> GridField:
    """psi = L_H^{-s} h on H = {x > 0} by integrating the reflected Mehler semigroup in t.

    psi = 1/Gamma(s) [h t_min^s / s + int_{t_min}^{t_max} t^s e^{-t L_H} h d(log t)],
    where e^{-t L_H} is the odd reflection of the Mehler kernel applied by
    halfspace_semigroup_at. The Green kernel G of greens_kernel_eval is never
    evaluated here; the band t < t_min stands in for its diagonal singularity.
    The datum is carried to a fine Gauss-Legendre rule so that the narrow
    small-t kernels are resolved.
    """
    params = FractionalParams(s)
    if p < 2.0:
        raise ConfigurationError(f"kernel solves need p >= 2, got {p}")
    dom = h.domain
    if dom.dim != 1 or dom.kind not in ("half-space", "interval") or dom.lam != 0.0 or math.isfinite(dom.b):
        raise ConfigurationError("kernel solves need a datum on the half-line {x > 0}")
    x = h.rule.x
    order = np.argsort(x)
    rule = build_quadrature(half_space(0.0), 64, width=0.25)
    hbar = GridField(half_space(0.0), rule, np.interp(rule.x, x[order], h.values[order], right=0.0), "h")

    def route(points: int) -> np.ndarray:
        ts, w = _time_rule(points, t_min, t_max)
        acc = np.zeros(len(x))
        for t, wt in zip(ts, w):
            acc += wt * t ** params.s * halfspace_semigroup_at(hbar, float(t), x)
        return acc

    fine = route(config.EXTENSION_POINTS)
    coarse = route(config.EXTENSION_POINTS // 2)
    head = h.values * t_min ** params.s / params.s
    vals = (head + fine) / special.gamma(params.s)
    norm = math.sqrt(max(float(np.dot(h.rule.weights, vals ** 2)), 1e-300))
    err = math.sqrt(float(np.dot(h.rule.weights, ((fine - coarse) / special.gamma(params.s)) ** 2))) / norm
    out = h.with_values(vals, label=f"kernel[{h.label}]")
    out.diagnostics["quadrature_error"] = err
    if err > 1e-4:
        out.warn(f"kernel route time quadrature estimate {err:.1e}")
    return out


def kernel_lp_ratio(h: GridField, s: float, p: float = 2.0) -> float:
    """||psi||_{L^p} / ||h||_{L^p} for the kernel-route solution."""
    psi = solve_by_kernel(h, s, p)
    den = h.norm(p)
    return psi.norm(p) / den if den > 0.0 else 0.0
