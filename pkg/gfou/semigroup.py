"""
semigroup.py

Mehler kernel and the Ornstein-Uhlenbeck semigroup e^{-tL} on R^n (n = 1, 2),
plus the Dirichlet semigroup of the half-space {x1 > 0} by odd reflection in x1.
"""

from __future__ import annotations

import logging
from typing import Tuple

import numpy as np

from gfou.config import SEMIGROUP_CHUNK, SEMIGROUP_MIN_T
from gfou.errors import ConfigurationError, DomainError
from gfou.gausscore import GridField, QuadratureRule, full_space

logger = logging.getLogger(__name__)


def _check_time(t: float, minimum: float = 0.0) -> None:
    if not t > minimum:
        if minimum > 0.0 and t > 0.0:
            raise DomainError(f"t = {t} below the supported minimum {minimum}")
        raise DomainError(f"semigroup time must be positive, got {t}")


def _as_points(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        return x.reshape(1, 1)
    if x.ndim == 1:
        return x[:, None]
    return x


def _exponent(X: np.ndarray, Y: np.ndarray, t: float) -> Tuple[np.ndarray, float]:
    q = np.exp(-t)
    d = -np.expm1(-2.0 * t)
    xx = np.sum(X * X, axis=1)[:, None]
    yy = np.sum(Y * Y, axis=1)[None, :]
    xy = X @ Y.T
    return -(q * q * (xx + yy) - 2.0 * q * xy) / (2.0 * d), d


def mehler_matrix(X, Y, t: float) -> np.ndarray:
    """Kernel matrix M_t(x_i, y_j) for point arrays of shape (N, n)."""
    _check_time(t)
    X, Y = _as_points(X), _as_points(Y)
    if X.shape[1] != Y.shape[1]:
        raise ConfigurationError("kernel points of different dimensions")
    expo, d = _exponent(X, Y, t)
    return d ** (-X.shape[1] / 2.0) * np.exp(expo)


def mehler_kernel(x, y, t: float) -> float:
    """M_t(x, y) for a single pair of points (scalars are 1D points)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))[None, :]
    y = np.atleast_1d(np.asarray(y, dtype=float))[None, :]
    return float(mehler_matrix(x, y, t)[0, 0])


def mehler_difference(x, y, t) -> np.ndarray:
    """M_t(x, y) - M_t(x, -y) in 1D, broadcasting over x, y and t."""
    x, y, t = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (x, y, t)))
    if np.any(t <= 0.0):
        raise DomainError("semigroup time must be positive")
    q = np.exp(-t)
    d = -np.expm1(-2.0 * t)
    e_plus = -(q * q * (x * x + y * y) - 2.0 * q * x * y) / (2.0 * d)
    return d ** -0.5 * np.exp(e_plus) * -np.expm1(-2.0 * q * x * y / d)


def _quadrature_apply(points: np.ndarray, rule: QuadratureRule, weighted: np.ndarray, t: float,
                      reflect: bool = False) -> np.ndarray:
    out = np.empty(len(points))
    Y = rule.nodes
    Yr = Y.copy()
    Yr[:, 0] *= -1.0
    for start in range(0, len(points), SEMIGROUP_CHUNK):
        X = points[start:start + SEMIGROUP_CHUNK]
        K = mehler_matrix(X, Y, t)
        if reflect:
            K = K - mehler_matrix(X, Yr, t)
        out[start:start + SEMIGROUP_CHUNK] = K @ weighted
    return out


def semigroup_at(g: GridField, t: float, points) -> np.ndarray:
    """(e^{-tL} g)(x) at arbitrary points, for g on the full space."""
    if g.domain.kind != "full":
        raise ConfigurationError(f"apply_semigroup needs a full-space field, got {g.domain.kind}")
    _check_time(t, SEMIGROUP_MIN_T)
    points = _as_points(points)
    if points.shape[1] != g.rule.dim:
        raise ConfigurationError("evaluation points do not match the field dimension")
    return _quadrature_apply(points, g.rule, g.rule.weights * g.values, t)


def apply_semigroup(g: GridField, t: float) -> GridField:
    vals = semigroup_at(g, t, g.rule.nodes)
    return g.with_values(vals, label=f"e^(-{t:g}L) {g.label}".strip())


def _check_halfspace(f: GridField) -> None:
    dom = f.domain
    if dom.kind not in ("half-space", "interval") or abs(dom.lam) > 0.0:
        raise ConfigurationError(f"half-space semigroup needs {{x1 > 0}}, got {dom!r}")
    if dom.kind == "interval" and np.isfinite(dom.b):
        raise ConfigurationError(f"half-space semigroup needs {{x1 > 0}}, got {dom!r}")


def halfspace_semigroup_at(f: GridField, t: float, points) -> np.ndarray:
    """Dirichlet semigroup of {x1 > 0} by odd reflection in x1, at arbitrary points."""
    _check_halfspace(f)
    _check_time(t, SEMIGROUP_MIN_T)
    points = _as_points(points)
    if np.any(f.rule.x < 0.0):
        raise ConfigurationError("half-space field has nodes with x1 < 0")
    return _quadrature_apply(points, f.rule, f.rule.weights * f.values, t, reflect=True)


def apply_halfspace_semigroup(f: GridField, t: float) -> GridField:
    vals = halfspace_semigroup_at(f, t, f.rule.nodes)
    return f.with_values(vals, label=f"e^(-{t:g}L_H) {f.label}".strip())


# --------------------------- extensions of fields --------------------------

def odd_extension(f: GridField) -> GridField:
    """Odd extension in x1 of a field on {x1 > 0}; lives on the full space."""
    _check_halfspace(f)
    rule = f.rule
    mirrored = rule.nodes.copy()
    mirrored[:, 0] *= -1.0
    nodes = np.vstack([mirrored[::-1], rule.nodes])
    weights = np.concatenate([rule.weights[::-1], rule.weights])
    values = np.concatenate([-f.values[::-1], f.values])
    ext_rule = QuadratureRule(nodes, weights, rule.order, rule.scheme)
    return GridField(full_space(rule.dim), ext_rule, values, f"odd({f.label})")


def zero_extension(f: GridField, target=None) -> GridField:
    """Extension by zero to a larger domain (the full space by default).

    Nodes outside the original domain carry zero values, so the original rule
    remains a valid rule for the extended field.
    """
    target = full_space(f.rule.dim) if target is None else target
    if target.kind != "full" and not np.all(target.contains(f.rule.nodes)):
        raise ConfigurationError("target domain does not contain the field's nodes")
    return GridField(target, f.rule, f.values.copy(), f"zero({f.label})", dict(f.diagnostics))


def positive_part(f: GridField) -> GridField:
    return f.with_values(np.maximum(f.values, 0.0), label=f"({f.label})+")
