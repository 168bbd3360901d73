"""
extension.py

The degenerate extension problem  -div(y^a phi grad_{x,y} w) = 0  on Omega x (0, inf),
solved mode by mode: w(x, y) = sum_k c_k P(sqrt(lambda_k) y) psi_k(x) with the
Bessel profile P(z) = 2^{1-s}/Gamma(s) z^s K_s(z), or through the semigroup
formula for negative powers. Also the weighted Neumann trace, the energy and the
trace inequality.

Public API:
- bessel_k(nu, z)
- extension_profile(s, z, derivative=0)
- ExtensionField, Perturbation
- default_levels(model, y_max=None)
- build_extension(model, u, params, y_levels) / extend_spectral(model, u, params, y)
- extend_datum(model, f, params, y_levels)
- extend_semigroup(model, f, params, y)
- neumann_trace(ext) / energy(ext) / trace_inequality(ext)
- z_to_y / y_to_z / extend_spectral_z
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy import special

from gfou import config
from gfou.errors import ConfigurationError, DomainError, NumericalError
from gfou.gausscore import FractionalParams, GridField, panel_rule
from gfou.spectral import SpectralModel, fractional_apply, truncation_report

logger = logging.getLogger(__name__)

_TAU, _TAU_W = panel_rule(0.0, config.BESSEL_TAU_MAX, config.BESSEL_POINTS, config.BESSEL_PANEL)
_COSH_TAU = np.cosh(_TAU)
_CHUNK = 512


# --------------------------- Bessel profile --------------------------------

def bessel_k(nu: float, z):
    """K_nu(z) = int_0^inf exp(-z cosh t) cosh(nu t) dt, truncated at t = 30."""
    z = np.asarray(z, dtype=float)
    if np.any(~(z > 0.0)):
        raise DomainError("bessel_k needs z > 0")
    flat = z.ravel()
    out = np.empty_like(flat)
    weights = np.cosh(nu * _TAU) * _TAU_W
    for start in range(0, flat.size, _CHUNK):
        zc = flat[start:start + _CHUNK]
        out[start:start + _CHUNK] = np.exp(-np.outer(zc, _COSH_TAU)) @ weights
    out = out.reshape(z.shape)
    return float(out) if out.ndim == 0 else out


def extension_profile(s: float, z, derivative: int = 0):
    """P(z), P'(z) or P''(z) for P(z) = 2^{1-s}/Gamma(s) z^s K_s(z); P(0) = 1.

    Derivatives need z > 0 and use z^s K_s -> -z^s K_{1-s} and the profile
    equation P'' = P - (1 - 2s) P' / z.
    """
    z = np.asarray(z, dtype=float)
    scale = 2.0 ** (1.0 - s) / special.gamma(s)
    if derivative == 0:
        out = np.ones_like(z)
        pos = z > 0.0
        if np.any(pos):
            zp = z[pos]
            out[pos] = scale * zp ** s * bessel_k(s, zp)
        return out
    if np.any(~(z > 0.0)):
        raise DomainError("profile derivatives need z > 0")
    d1 = -scale * z ** s * bessel_k(1.0 - s, z)
    if derivative == 1:
        return d1
    if derivative == 2:
        return extension_profile(s, z) - (1.0 - 2.0 * s) * d1 / z
    raise ConfigurationError(f"derivative order {derivative} not supported")


def z_to_y(z, s: float):
    return 2.0 * s * np.asarray(z, dtype=float) ** (1.0 / (2.0 * s))


def y_to_z(y, s: float):
    return (np.asarray(y, dtype=float) / (2.0 * s)) ** (2.0 * s)


# --------------------------- extension fields ------------------------------

@dataclass(frozen=True)
class Perturbation:
    """Trace-free perturbation eps * sum_k a_k y^2 exp(-beta y) psi_k."""
    amplitudes: np.ndarray
    rate: float = 1.0
    eps: float = 1e-2

    def profile(self, y: np.ndarray, derivative: int = 0) -> np.ndarray:
        b = self.rate
        e = np.exp(-b * y)
        if derivative == 0:
            g = y * y * e
        elif derivative == 1:
            g = (2.0 * y - b * y * y) * e
        else:
            g = (2.0 - 4.0 * b * y + b * b * y * y) * e
        return self.eps * g[:, None] * np.asarray(self.amplitudes, dtype=float)[None, :]


@dataclass(eq=False)
class ExtensionField:
    base: SpectralModel
    params: FractionalParams
    y_levels: np.ndarray
    coefficients: np.ndarray
    static: bool = False
    perturbation: Optional[Perturbation] = None
    label: str = ""
    values: np.ndarray = field(default=None, repr=False)
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        y = np.unique(np.asarray(self.y_levels, dtype=float))
        if y.size == 0 or y[0] < 0.0:
            raise DomainError("extension levels must be nonnegative")
        self.y_levels = y
        self.coefficients = np.asarray(self.coefficients, dtype=float)
        if self.coefficients.shape != (self.base.K,):
            raise ConfigurationError("one coefficient per mode is required")
        if self.perturbation is not None and len(self.perturbation.amplitudes) != self.base.K:
            raise ConfigurationError("perturbation needs one amplitude per mode")
        self.values = self.sample(y)

    @property
    def domain(self):
        return self.base.domain

    def modal(self, y, derivative: int = 0) -> np.ndarray:
        """Mode amplitudes (len(y) x K) of d^j w / dy^j."""
        y = np.atleast_1d(np.asarray(y, dtype=float))
        K = self.base.K
        if self.static:
            out = np.tile(self.coefficients, (len(y), 1)) if derivative == 0 else np.zeros((len(y), K))
        else:
            root = np.sqrt(self.base.eigenvalues)
            z = y[:, None] * root[None, :]
            prof = extension_profile(self.params.s, z, derivative)
            out = prof * (root ** derivative * self.coefficients)[None, :]
        if self.perturbation is not None:
            out = out + self.perturbation.profile(y, derivative)
        return out

    def sample(self, y, derivative: int = 0) -> np.ndarray:
        return self.modal(y, derivative) @ self.base.vectors.T

    def at(self, y: float, derivative: int = 0) -> GridField:
        vals = self.sample([y], derivative)[0]
        tag = ["w", "w_y", "w_yy"][derivative]
        return self.base.field(vals, f"{tag}({self.label}, y={y:g})")

    def level_index(self, y: float) -> int:
        hit = np.flatnonzero(np.isclose(self.y_levels, y, rtol=1e-12, atol=0.0))
        if hit.size == 0:
            raise ConfigurationError(f"y = {y} is not a stored level")
        return int(hit[0])

    def perturbed(self, perturbation: Perturbation) -> "ExtensionField":
        levels = self.y_levels
        reach = 40.0 / perturbation.rate
        if levels[-1] < reach:
            levels = np.concatenate([levels, [reach]])
        return ExtensionField(self.base, self.params, levels, self.coefficients, self.static,
                              perturbation, f"{self.label}+xi", diagnostics=dict(self.diagnostics))


def default_levels(model: SpectralModel, y_max: Optional[float] = None, y0: float = config.TRACE_LADDER_MAX,
                   count: int = 48) -> np.ndarray:
    """0, the ladder y0/4, y0/2, y0, then geometric levels up to y_max."""
    if y_max is None:
        y_max = 1.5 * max(config.ENERGY_DECAY / math.sqrt(model.eigenvalues[0]), 1.0)
    return np.concatenate([[0.0, y0 / 4.0, y0 / 2.0, y0], np.geomspace(2.0 * y0, y_max, count)])


def build_extension(model: SpectralModel, u: GridField, params: FractionalParams,
                    y_levels: Optional[Sequence[float]] = None, label: str = "") -> ExtensionField:
    c = model.coefficients(u)
    report = truncation_report(model, u, c)
    levels = default_levels(model) if y_levels is None else y_levels
    ext = ExtensionField(model, params, levels, c, label=label or u.label,
                         diagnostics={"truncation": report})
    if report["tail_fraction"] > config.TAIL_WARNING:
        ext.diagnostics.setdefault("warnings", []).append(
            f"spectral tail holds {100 * report['tail_fraction']:.2f}% of the energy")
        logger.warning("extension of %s: spectral tail %.2f%%", u.label, 100 * report["tail_fraction"])
    return ext


def static_extension(model: SpectralModel, u: GridField, params: FractionalParams,
                     y_levels: Optional[Sequence[float]] = None) -> ExtensionField:
    """The y-independent field w(x, y) = u(x); not a solution, used by the derivation checks."""
    levels = default_levels(model) if y_levels is None else y_levels
    return ExtensionField(model, params, levels, model.coefficients(u), static=True, label=f"static({u.label})")


def extend_spectral(model: SpectralModel, u: GridField, params: FractionalParams, y: float) -> GridField:
    ext = build_extension(model, u, params, [y])
    out = ext.at(y)
    out.diagnostics.update(ext.diagnostics)
    return out


def extend_spectral_z(model: SpectralModel, u: GridField, params: FractionalParams, z: float) -> GridField:
    return extend_spectral(model, u, params, float(z_to_y(z, params.s)))


def extend_datum(model: SpectralModel, f: GridField, params: FractionalParams,
                 y_levels: Optional[Sequence[float]] = None) -> ExtensionField:
    """Extension whose weighted Neumann datum -lim y^a w_y is f, i.e. of u = L^{-s} f / c_s."""
    u = fractional_apply(model, f, -params.s)
    u = u.with_values(u.values / params.c_s, label=f"datum({f.label})")
    return build_extension(model, u, params, y_levels)


# --------------------------- semigroup route -------------------------------

def _small_t_tail(a: float, s: float, t0: float) -> float:
    """int_0^{t0} exp(-a/t) t^{s-1} dt (exp(-lambda t) ~ 1 there)."""
    if a == 0.0:
        return t0 ** s / s
    x = a / t0
    upper = special.gamma(1.0 - s) * special.gammaincc(1.0 - s, x)
    return a ** s * (x ** -s * math.exp(-x) - upper) / s


def _semigroup_weights(lam: np.ndarray, s: float, y: float, points: int) -> np.ndarray:
    lo, hi = config.EXTENSION_TAU
    tau, w = panel_rule(lo, hi, points, config.EXTENSION_PANEL)
    t = np.exp(tau)
    a = 0.25 * y * y
    expo = -(a / t)[:, None] - np.outer(t, lam) + s * tau[:, None]
    body = np.exp(expo).T @ w
    return (body + _small_t_tail(a, s, math.exp(lo))) / special.gamma(s)


def extend_semigroup(model: SpectralModel, f: GridField, params: FractionalParams, y: float) -> GridField:
    """1/Gamma(s) int_0^inf exp(-y^2/4t) e^{-t L} f t^{s-1} dt in t = e^tau."""
    if y < 0.0:
        raise DomainError("extension level must be nonnegative")
    s = params.s
    c = model.coefficients(f)
    lam = model.eigenvalues
    fine = _semigroup_weights(lam, s, y, config.EXTENSION_POINTS)
    coarse = _semigroup_weights(lam, s, y, config.EXTENSION_POINTS // 2)
    scale = max(float(np.sqrt(np.sum((fine * c) ** 2))), 1e-300)
    estimate = float(np.sqrt(np.sum(((fine - coarse) * c) ** 2))) / scale
    if estimate > config.EXTENSION_TOL:
        raise NumericalError(f"semigroup quadrature did not converge at y = {y}: estimate {estimate:.2e}")
    out = model.synthesize(fine * c, f"v({f.label}, y={y:g})")
    out.diagnostics["quadrature_error"] = estimate
    out.diagnostics["truncation"] = truncation_report(model, f, c)
    return out


# --------------------------- trace and energy ------------------------------

def _ladder(ext: ExtensionField):
    pos = ext.y_levels[ext.y_levels > 0.0]
    if pos.size < 3:
        raise NumericalError("the Neumann trace needs a three-level ladder")
    y1, y2, y3 = pos[:3]
    if not (np.isclose(y2, 2 * y1, rtol=1e-12) and np.isclose(y3, 2 * y2, rtol=1e-12)):
        raise NumericalError(f"levels {y1:g}, {y2:g}, {y3:g} do not form a halving ladder")
    if y3 > config.TRACE_LADDER_MAX * (1 + 1e-12):
        raise NumericalError(f"ladder top {y3:g} exceeds {config.TRACE_LADDER_MAX:g}")
    return y1, y2, y3


def neumann_trace(ext: ExtensionField) -> GridField:
    """-lim y^a w_y from the ladder (y0/4, y0/2, y0) by Richardson extrapolation.

    (w(0) - w(y)) / y^{2s} = A + B y^{2-2s} + C y^2 + ...; the two correction
    exponents are eliminated in turn and the trace is 2s A.
    """
    s = ext.params.s
    y1, y2, y3 = _ladder(ext)
    w0 = ext.sample([0.0])[0]
    q = {y: (w0 - ext.values[ext.level_index(y)]) / y ** (2 * s) for y in (y1, y2, y3)}
    p1, p2 = 2.0 - 2.0 * s, 2.0
    r_hi = (2 ** p1 * q[y2] - q[y3]) / (2 ** p1 - 1.0)
    r_lo = (2 ** p1 * q[y1] - q[y2]) / (2 ** p1 - 1.0)
    a = (2 ** p2 * r_lo - r_hi) / (2 ** p2 - 1.0)
    trace = 2.0 * s * a
    first = 2.0 * s * r_lo
    w = ext.base.rule.weights
    norm = math.sqrt(float(np.dot(w, trace ** 2)))
    change = math.sqrt(float(np.dot(w, (trace - first) ** 2)))
    if norm > 1e-14 and change / norm > config.TRACE_CONVERGENCE:
        raise NumericalError(f"Neumann trace ladder not converged ({change / norm:.3f} relative change)")
    out = ext.base.field(trace, f"trace({ext.label})")
    out.diagnostics["richardson_change"] = change / norm if norm > 1e-14 else 0.0
    return out


def energy(ext: ExtensionField) -> float:
    """int int y^a (|grad_x w|^2 + w_y^2) dgamma dy, mode by mode in eta = log y."""
    if ext.static:
        raise NumericalError("a y-independent field has infinite energy")
    s, a = ext.params.s, ext.params.a
    lam = ext.base.eigenvalues
    Y = float(ext.y_levels[-1])
    if math.sqrt(lam[0]) * Y < config.ENERGY_DECAY:
        raise NumericalError(f"levels stop at y = {Y:g}; the energy needs sqrt(lambda_1) Y >= "
                             f"{config.ENERGY_DECAY:g}")
    y_min = config.ENERGY_Y_MIN
    eta, w = panel_rule(math.log(y_min), math.log(Y), config.EXTENSION_POINTS, config.EXTENSION_PANEL)
    y = np.exp(eta)
    V, dV = ext.modal(y, 0), ext.modal(y, 1)
    density = (V * V * lam[None, :] + dV * dV).sum(axis=1) * y ** (a + 1.0)
    body = float(np.dot(w, density))
    V0, dV0 = ext.modal([y_min], 0)[0], ext.modal([y_min], 1)[0]
    head = y_min ** (2.0 - 2.0 * s) * (float(np.sum(dV0 ** 2)) / (2.0 * s)
                                        + float(np.sum(lam * V0 ** 2)) / (2.0 - 2.0 * s))
    tail = float(density[-1]) / (2.0 * math.sqrt(lam[0]) * Y)
    total = body + head
    if total > 0.0 and tail / total > 1e-8:
        raise NumericalError(f"energy tail beyond y = {Y:g} is {tail / total:.1e} of the total")
    return total


@dataclass(frozen=True)
class TraceReport:
    lhs: float
    rhs: float
    holds: bool
    ratio: float


def trace_inequality(ext: ExtensionField, slack: float = 1e-2) -> TraceReport:
    """||L^{s/2} tr w||^2 <= energy(w) / c_s; equality for the canonical extension."""
    lam = ext.base.eigenvalues
    trace_coeffs = ext.modal([0.0], 0)[0]
    lhs = float(np.sum(lam ** ext.params.s * trace_coeffs ** 2))
    rhs = energy(ext) / ext.params.c_s
    return TraceReport(lhs, rhs, lhs <= rhs * (1.0 + slack), lhs / rhs if rhs > 0 else math.inf)


def with_levels(ext: ExtensionField, y_levels) -> ExtensionField:
    return replace(ext, y_levels=np.asarray(y_levels, dtype=float), values=None)
