"""
gausscore.py

Gaussian-measure primitives shared by every other module.

Public API:
- gaussian_density(x) -> array            (n-dimensional standard normal density)
- phi_tail(lam) -> float | array          (Phi(lam) = gamma({x1 > lam}))
- phi_inverse(r) -> float | array
- gaussian_cell_mass(lo, hi) -> array     (Phi(lo) - Phi(hi) without cancellation)
- isoperimetric_profile(r) -> float | array
- FractionalParams(s)
- half_space / interval / full_space / grid2d -> GaussianDomain
- build_quadrature(domain, order) -> QuadratureRule
- build_grid(domain, resolution) -> QuadratureRule (graded grid, lumped weights)
- GridField
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple

import numpy as np
from scipy import special

from gfou.config import GRID_GRADING, PANEL_WIDTH, TRUNCATION_RADIUS
from gfou.errors import ConfigurationError, DomainError
from gfou.utils import sha256_of_array, sha256_of_text

logger = logging.getLogger(__name__)

SQRT2PI = math.sqrt(2.0 * math.pi)


# --------------------------- density and tail ------------------------------

def gaussian_density(x) -> np.ndarray:
    """phi(x) for 1D arrays, or the product density over the last axis for (N, n) arrays."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 2:
        n = x.shape[1]
        return np.exp(-0.5 * np.sum(x * x, axis=1)) / SQRT2PI ** n
    return np.exp(-0.5 * x * x) / SQRT2PI


def phi_tail(lam):
    """Gaussian upper tail Phi(lam) = erfc(lam / sqrt 2) / 2; total on the extended reals."""
    lam = np.asarray(lam, dtype=float)
    out = 0.5 * special.erfc(lam / math.sqrt(2.0))
    return float(out) if out.ndim == 0 else out


def gaussian_cell_mass(lo, hi):
    """gamma((lo, hi)) in 1D, using the tail on the side away from zero."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    right = 0.5 * special.erfc(lo / math.sqrt(2.0)) - 0.5 * special.erfc(hi / math.sqrt(2.0))
    left = 0.5 * special.erfc(-hi / math.sqrt(2.0)) - 0.5 * special.erfc(-lo / math.sqrt(2.0))
    out = np.where(lo + hi >= 0.0, right, left)
    return float(out) if out.ndim == 0 else out


def _phi_inverse_scalar(r: float) -> float:
    if r == 0.0:
        return math.inf
    if r == 1.0:
        return -math.inf
    if r > 0.5:
        # 1 - r is exact here, and the tail side keeps full relative accuracy
        return -_phi_inverse_scalar(1.0 - r)
    x = -float(special.ndtri(r))
    lo, hi = x - 1.0, x + 1.0
    while phi_tail(lo) < r:
        lo -= 1.0
    while phi_tail(hi) > r:
        hi += 1.0
    for _ in range(100):
        fx = phi_tail(x) - r
        if fx > 0.0:
            lo = x
        else:
            hi = x
        if abs(fx) <= 1e-16 * r:
            break
        x_new = x + fx / float(gaussian_density(x))
        if not (lo < x_new < hi):
            x_new = 0.5 * (lo + hi)
        if abs(x_new - x) <= 1e-15 * max(1.0, abs(x)):
            x = x_new
            break
        x = x_new
    return x


def phi_inverse(r):
    """Inverse of phi_tail by safeguarded Newton with bisection fallback."""
    arr = np.asarray(r, dtype=float)
    if np.any(np.isnan(arr)) or np.any(arr < 0.0) or np.any(arr > 1.0):
        raise DomainError(f"phi_inverse needs r in [0, 1], got {r!r}")
    if arr.ndim == 0:
        return _phi_inverse_scalar(float(arr))
    return np.array([_phi_inverse_scalar(float(v)) for v in arr.ravel()]).reshape(arr.shape)


def isoperimetric_profile(r):
    """I(r) = phi(Phi^{-1}(r)); zero at r in {0, 1}."""
    x = phi_inverse(r)
    out = gaussian_density(np.asarray(x, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


# --------------------------- fractional parameters -------------------------

@dataclass(frozen=True)
class FractionalParams:
    s: float

    def __post_init__(self):
        if not (0.0 < self.s < 1.0):
            raise ConfigurationError(f"s must lie in (0, 1), got {self.s}")

    @property
    def a(self) -> float:
        return 1.0 - 2.0 * self.s

    @property
    def c_s(self) -> float:
        s = self.s
        return float(special.gamma(1.0 - s) / (4.0 ** (s - 0.5) * special.gamma(s)))


# --------------------------- domains ---------------------------------------

@dataclass(frozen=True, eq=False)
class GaussianDomain:
    kind: str                      # "half-space" | "interval" | "grid2d" | "full"
    dim: int
    measure: float
    lam: float = 0.0
    a: float = -math.inf
    b: float = math.inf
    box: Optional[Tuple[float, float, float, float]] = None
    n: int = 0
    mask: Optional[np.ndarray] = None
    label: str = ""

    def descriptor(self) -> dict:
        d = {"kind": self.kind, "dim": self.dim}
        if self.kind == "half-space":
            d["lam"] = self.lam
        elif self.kind == "interval":
            d["a"], d["b"] = self.a, self.b
        elif self.kind == "grid2d":
            d["box"] = list(self.box)
            d["n"] = self.n
            d["mask"] = sha256_of_array(self.mask.astype(float))[:16]
        if self.label:
            d["label"] = self.label
        return d

    def fingerprint(self) -> str:
        return sha256_of_text(repr(sorted(self.descriptor().items())))

    def support(self, radius: float = TRUNCATION_RADIUS) -> Tuple[float, float]:
        """Truncated x1-range of a 1D domain."""
        if self.kind == "half-space":
            return self.lam, radius
        if self.kind == "interval":
            return max(self.a, -radius), min(self.b, radius)
        if self.kind == "full":
            return -radius, radius
        return self.box[0], self.box[1]

    def contains(self, nodes: np.ndarray) -> np.ndarray:
        nodes = np.atleast_2d(nodes)
        x1 = nodes[:, 0]
        if self.kind == "half-space":
            return x1 > self.lam
        if self.kind == "interval":
            return (x1 > self.a) & (x1 < self.b)
        if self.kind == "full":
            return np.ones(len(x1), dtype=bool)
        lo1, hi1, lo2, hi2 = self.box
        return (x1 > lo1) & (x1 < hi1) & (nodes[:, 1] > lo2) & (nodes[:, 1] < hi2)

    def __repr__(self):
        return f"GaussianDomain({self.descriptor()}, measure={self.measure:.6g})"


def half_space(lam: float, dim: int = 1) -> GaussianDomain:
    if dim not in (1, 2):
        raise ConfigurationError(f"dimension {dim} not supported")
    if not np.isfinite(lam):
        raise ConfigurationError("half-space threshold must be finite")
    return GaussianDomain("half-space", dim, phi_tail(lam), lam=float(lam))


def interval(a: float, b: float) -> GaussianDomain:
    if not a < b:
        raise ConfigurationError(f"empty interval ({a}, {b})")
    if math.isinf(a) and math.isinf(b):
        raise ConfigurationError("the whole line has full measure")
    if math.isinf(b):
        return GaussianDomain("interval", 1, phi_tail(a), a=float(a), b=math.inf, lam=float(a))
    measure = gaussian_cell_mass(a, b) if np.isfinite(a) else float(phi_tail(-b))
    return GaussianDomain("interval", 1, float(measure), a=float(a), b=float(b))


def full_space(dim: int = 1) -> GaussianDomain:
    return GaussianDomain("full", dim, 1.0)


def _grid_axes(box, n):
    lo1, hi1, lo2, hi2 = box
    return np.linspace(lo1, hi1, n), np.linspace(lo2, hi2, n)


def grid2d(box, n: int, inside: Optional[Callable] = None, label: str = "") -> GaussianDomain:
    """Staircase domain: interior vertices of an n x n box grid where `inside` holds."""
    if n < 4:
        raise ConfigurationError("grid2d needs at least 4 points per side")
    box = tuple(float(v) for v in box)
    x1, x2 = _grid_axes(box, n)
    X1, X2 = np.meshgrid(x1, x2, indexing="ij")
    mask = np.zeros((n, n), dtype=bool)
    mask[1:-1, 1:-1] = True
    if inside is not None:
        mask &= np.asarray(inside(X1, X2), dtype=bool)
    if not mask.any():
        raise ConfigurationError("grid2d mask selects no nodes")
    h1, h2 = x1[1] - x1[0], x2[1] - x2[0]
    pts = np.column_stack([X1[mask], X2[mask]])
    measure = float(np.sum(gaussian_density(pts)) * h1 * h2)
    if measure >= 1.0:
        raise ConfigurationError("grid2d measure must be < 1")
    return GaussianDomain("grid2d", 2, measure, box=box, n=n, mask=mask, label=label)


# --------------------------- quadrature ------------------------------------

@dataclass(frozen=True, eq=False)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray
    order: int
    scheme: str = "panels"
    boundary: Optional[Tuple[float, float]] = None
    resolution: Optional[int] = None

    @property
    def size(self) -> int:
        return len(self.weights)

    @property
    def dim(self) -> int:
        return self.nodes.shape[1]

    @property
    def x(self) -> np.ndarray:
        return self.nodes[:, 0]

    @property
    def total(self) -> float:
        return float(np.sum(self.weights))

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, np.asarray(values, dtype=float)))

    def same_as(self, other: "QuadratureRule") -> bool:
        return (self is other) or (
            self.nodes.shape == other.nodes.shape
            and np.array_equal(self.nodes, other.nodes)
            and np.array_equal(self.weights, other.weights)
        )

    def fingerprint(self) -> str:
        return sha256_of_array(np.column_stack([self.nodes, self.weights]))


def panel_rule(lo: float, hi: float, order: int, width: float = PANEL_WIDTH):
    """Composite Gauss-Legendre on [lo, hi] with `order` points per panel (Lebesgue weights)."""
    n_panels = max(1, int(math.ceil((hi - lo) / width - 1e-12)))
    edges = np.linspace(lo, hi, n_panels + 1)
    t, w = np.polynomial.legendre.leggauss(order)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    nodes = (mid[:, None] + half[:, None] * t[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def _gamma_line(lo, hi, order, width):
    x, w = panel_rule(lo, hi, order, width)
    return x, w * gaussian_density(x)


def build_quadrature(domain: GaussianDomain, order: int, scheme: str = "panels",
                     radius: float = TRUNCATION_RADIUS, width: float = PANEL_WIDTH) -> QuadratureRule:
    """Quadrature rule for gamma-integrals over `domain`.

    Args:
        domain: target domain; grid2d domains return their own vertex rule.
        order: Gauss points per panel, or the Gauss-Hermite order for scheme "hermite".
        scheme: "panels" (Gauss-Legendre against the explicit density) or "hermite"
            (full space only).
        radius: truncation of unbounded directions.

    Returns:
        QuadratureRule whose weights already include the Gaussian density.
    """
    if order < 2:
        raise ConfigurationError(f"quadrature order must be >= 2, got {order}")
    if domain.kind == "grid2d":
        return build_grid(domain, domain.n)
    if scheme == "hermite":
        if domain.kind != "full":
            raise ConfigurationError("Gauss-Hermite rules only cover the full space")
        x, w = np.polynomial.hermite_e.hermegauss(order)
        w = w / SQRT2PI
        lines = [(x, w)] * domain.dim
    elif scheme == "panels":
        lo, hi = domain.support(radius)
        if not lo < hi:
            raise ConfigurationError(f"domain {domain!r} has empty truncated support")
        first = _gamma_line(lo, hi, order, width)
        lines = [first]
        if domain.dim == 2:
            lines.append(_gamma_line(-radius, radius, order, width))
    else:
        raise ConfigurationError(f"unknown quadrature scheme {scheme!r}")

    if domain.dim == 1:
        nodes, weights = lines[0][0][:, None], lines[0][1]
    else:
        (x1, w1), (x2, w2) = lines
        X1, X2 = np.meshgrid(x1, x2, indexing="ij")
        nodes = np.column_stack([X1.ravel(), X2.ravel()])
        weights = np.outer(w1, w2).ravel()
    return QuadratureRule(nodes, weights, order, scheme)


def graded_nodes(lo: float, hi: float, count: int, grading: float = GRID_GRADING) -> np.ndarray:
    """`count` + 2 points on [lo, hi] (endpoints included), clustered around x = 0."""
    fine = np.linspace(lo, hi, 20001)
    density = 1.0 + grading * np.exp(-fine * fine / 8.0)
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (density[1:] + density[:-1]) * np.diff(fine))])
    targets = np.linspace(0.0, cum[-1], count + 2)
    xs = np.interp(targets, cum, fine)
    xs[0], xs[-1] = lo, hi
    return xs


def lumped_weights(xs: np.ndarray) -> np.ndarray:
    """Lumped gamma-mass of the interior nodes of the full node array `xs`."""
    return gaussian_density(xs[1:-1]) * 0.5 * (xs[2:] - xs[:-2])


def build_grid(domain: GaussianDomain, resolution: int, radius: float = TRUNCATION_RADIUS) -> QuadratureRule:
    """Node grid for the spectral models: graded 1D grid or the grid2d vertex grid."""
    if domain.kind == "grid2d":
        x1, x2 = _grid_axes(domain.box, domain.n)
        X1, X2 = np.meshgrid(x1, x2, indexing="ij")
        nodes = np.column_stack([X1[domain.mask], X2[domain.mask]])
        h = (x1[1] - x1[0]) * (x2[1] - x2[0])
        return QuadratureRule(nodes, gaussian_density(nodes) * h, 1, "vertex",
                              resolution=domain.n)
    if domain.dim != 1:
        raise ConfigurationError("graded grids are one-dimensional")
    if resolution < 3:
        raise ConfigurationError(f"resolution too small: {resolution}")
    lo, hi = domain.support(radius)
    xs = graded_nodes(lo, hi, resolution)
    return grid_from_nodes(xs)


def grid_from_nodes(xs: np.ndarray) -> QuadratureRule:
    xs = np.asarray(xs, dtype=float)
    return QuadratureRule(xs[1:-1, None], lumped_weights(xs), 1, "lumped",
                          boundary=(float(xs[0]), float(xs[-1])), resolution=len(xs) - 2)


def full_nodes(rule: QuadratureRule) -> np.ndarray:
    """Interior nodes of a 1D graded rule with its two boundary points attached."""
    if rule.boundary is None:
        raise ConfigurationError("rule carries no boundary points")
    return np.concatenate([[rule.boundary[0]], rule.x, [rule.boundary[1]]])


# --------------------------- fields ----------------------------------------

@dataclass(eq=False)
class GridField:
    domain: GaussianDomain
    rule: QuadratureRule
    values: np.ndarray
    label: str = ""
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.rule.size,):
            raise ConfigurationError(
                f"field {self.label!r} has {self.values.size} values for {self.rule.size} nodes")

    @classmethod
    def from_function(cls, domain: GaussianDomain, rule: QuadratureRule, func, label: str = "") -> "GridField":
        pts = rule.x if rule.dim == 1 else rule.nodes
        return cls(domain, rule, np.broadcast_to(func(pts), (rule.size,)).astype(float), label)

    def norm(self, p: float = 2.0) -> float:
        v = np.abs(self.values)
        if math.isinf(p):
            return float(v.max()) if v.size else 0.0
        return float(np.dot(self.rule.weights, v ** p) ** (1.0 / p))

    def inner(self, other: "GridField") -> float:
        if not self.rule.same_as(other.rule):
            raise ConfigurationError("inner product of fields on different rules")
        return float(np.dot(self.rule.weights, self.values * other.values))

    def with_values(self, values, label: Optional[str] = None, diagnostics: Optional[dict] = None) -> "GridField":
        return GridField(self.domain, self.rule, values, self.label if label is None else label,
                         dict(self.diagnostics if diagnostics is None else diagnostics))

    def warn(self, message: str) -> None:
        self.diagnostics.setdefault("warnings", []).append(message)
        logger.warning("%s: %s", self.label or "field", message)

    @property
    def warnings(self):
        return list(self.diagnostics.get("warnings", []))
