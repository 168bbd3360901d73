"""
spectral.py

Dirichlet eigen-decompositions of L = -Delta + x.grad on a GaussianDomain and the
functional calculus built on them (L^sigma, H^s norms, e^{-tL_Omega}).

Discretization: the weak form  int phi u'v' = lambda int phi u v  with P1 stiffness
(mean density per cell) and lumped mass on a graded grid in 1D; the 5-point
scheme on the staircase vertex grid in 2D. Both give a symmetric pencil (A, M)
which is solved through the symmetric matrix M^{-1/2} A M^{-1/2}.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy import sparse
from scipy.linalg import eigh_tridiagonal
from scipy.sparse.linalg import eigsh

from gfou.config import MAX_K_2D, NODES_PER_MODE, TAIL_WARNING
from gfou.errors import ConfigurationError, DomainError, NumericalError, SpectralTruncationError
from gfou.gausscore import (GaussianDomain, GridField, QuadratureRule, build_grid, full_nodes,
                            gaussian_cell_mass, gaussian_density, grid_from_nodes)

logger = logging.getLogger(__name__)


@dataclass(eq=False)
class SpectralModel:
    domain: GaussianDomain
    rule: QuadratureRule
    eigenvalues: np.ndarray
    vectors: np.ndarray
    method: str = "fd"
    residuals: Optional[np.ndarray] = None
    stiffness: Optional[sparse.spmatrix] = None
    info: dict = field(default_factory=dict)

    @property
    def K(self) -> int:
        return len(self.eigenvalues)

    @property
    def eigenfields(self) -> List[GridField]:
        return [GridField(self.domain, self.rule, self.vectors[:, k], f"psi_{k + 1}")
                for k in range(self.K)]

    @property
    def poincare_proxy(self) -> float:
        """1 / lambda_1, reported as a numerical stand-in for the Poincare constant."""
        return 1.0 / float(self.eigenvalues[0])

    def mode(self, k: int) -> GridField:
        """The k-th eigenfield, 1-based."""
        return GridField(self.domain, self.rule, self.vectors[:, k - 1], f"psi_{k}")

    def field(self, values, label: str = "") -> GridField:
        return GridField(self.domain, self.rule, values, label)

    def check_field(self, u: GridField) -> None:
        if not self.rule.same_as(u.rule):
            raise ConfigurationError(f"field {u.label!r} is not sampled on the model grid")

    def coefficients(self, u: GridField) -> np.ndarray:
        self.check_field(u)
        return self.vectors.T @ (self.rule.weights * u.values)

    def synthesize(self, coefficients, label: str = "") -> GridField:
        return self.field(self.vectors @ np.asarray(coefficients, dtype=float), label)

    def apply_operator(self, values) -> np.ndarray:
        """Discrete L v = M^{-1} A v (finite-difference models only)."""
        if self.stiffness is None:
            raise ConfigurationError(f"{self.method} model carries no assembled operator")
        return (self.stiffness @ np.asarray(values, dtype=float)) / self.rule.weights


# --------------------------- assembly --------------------------------------

def assemble_1d(xs: np.ndarray):
    """Tridiagonal stiffness (diag, off) and lumped mass for the full node array xs."""
    h = np.diff(xs)
    c = gaussian_cell_mass(xs[:-1], xs[1:]) / (h * h)
    diag = c[:-1] + c[1:]
    off = -c[1:-1]
    mass = gaussian_density(xs[1:-1]) * 0.5 * (xs[2:] - xs[:-2])
    return diag, off, mass


def assemble_2d(domain: GaussianDomain):
    n = domain.n
    lo1, hi1, lo2, hi2 = domain.box
    x1, x2 = np.linspace(lo1, hi1, n), np.linspace(lo2, hi2, n)
    h1, h2 = x1[1] - x1[0], x2[1] - x2[0]
    mask = domain.mask
    idx = -np.ones((n, n), dtype=int)
    count = int(mask.sum())
    idx[mask] = np.arange(count)
    I, J = np.nonzero(mask)
    diag = np.zeros(count)
    rows, cols, vals = [], [], []
    for di, dj, ratio in ((1, 0, h2 / h1), (-1, 0, h2 / h1), (0, 1, h1 / h2), (0, -1, h1 / h2)):
        mid = np.column_stack([x1[I] + 0.5 * di * h1, x2[J] + 0.5 * dj * h2])
        c = gaussian_density(mid) * ratio
        diag += c
        nb = idx[I + di, J + dj]
        ok = nb >= 0
        rows.append(np.arange(count)[ok])
        cols.append(nb[ok])
        vals.append(-c[ok])
    rows.append(np.arange(count))
    cols.append(np.arange(count))
    vals.append(diag)
    A = sparse.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(count, count)).tocsr()
    return 0.5 * (A + A.T)


def _check_resolution(K: int, available: int) -> None:
    if K < 1:
        raise ConfigurationError(f"K must be >= 1, got {K}")
    if available < NODES_PER_MODE * K:
        raise SpectralTruncationError(
            f"K = {K} modes need at least {NODES_PER_MODE * K} nodes, grid has {available}")


def _normalize_signs(vectors: np.ndarray) -> np.ndarray:
    pivots = vectors[np.argmax(np.abs(vectors), axis=0), np.arange(vectors.shape[1])]
    return vectors * np.where(pivots < 0.0, -1.0, 1.0)


def _fd_1d(domain: GaussianDomain, K: Optional[int], rule: QuadratureRule) -> SpectralModel:
    xs = full_nodes(rule)
    diag, off, mass = assemble_1d(xs)
    N = len(mass)
    root = np.sqrt(mass)
    d = diag / mass
    e = off / (root[:-1] * root[1:])
    if K is None:
        lam, vec = eigh_tridiagonal(d, e)
    else:
        lam, vec = eigh_tridiagonal(d, e, select="i", select_range=(0, K - 1))
    vectors = _normalize_signs(vec / root[:, None])
    A = sparse.diags([off, diag, off], [-1, 0, 1], shape=(N, N), format="csr")
    return SpectralModel(domain, rule, lam, vectors, "fd", stiffness=A)


def _fd_2d(domain: GaussianDomain, K: int) -> SpectralModel:
    rule = build_grid(domain, domain.n)
    A = assemble_2d(domain)
    root = np.sqrt(rule.weights)
    S = sparse.diags(1.0 / root) @ A @ sparse.diags(1.0 / root)
    try:
        lam, vec = eigsh(S.tocsc(), k=K, sigma=0.0, which="LM")
    except Exception as exc:  # ARPACK failures surface as several exception types
        raise NumericalError(f"2D eigensolve failed: {exc}") from exc
    order = np.argsort(lam)
    vectors = _normalize_signs(vec[:, order] / root[:, None])
    return SpectralModel(domain, rule, lam[order], vectors, "fd", stiffness=A)


def odd_hermite_values(x: np.ndarray, K: int) -> np.ndarray:
    """Columns sqrt(2) h_{2k-1}(x), k = 1..K, with h_n the normalized probabilists' Hermite functions."""
    x = np.asarray(x, dtype=float)
    cols = []
    h_prev, h = np.ones_like(x), x.copy()
    for n in range(1, 2 * K):
        if n % 2 == 1:
            cols.append(h)
        h_prev, h = h, (x * h - math.sqrt(n) * h_prev) / math.sqrt(n + 1)
    return math.sqrt(2.0) * np.column_stack(cols)


def _hermite(domain: GaussianDomain, K: int, rule: QuadratureRule) -> SpectralModel:
    if domain.dim != 1 or domain.lam != 0.0 or domain.kind not in ("half-space", "interval") \
            or math.isfinite(domain.b):
        raise ConfigurationError("the odd-Hermite model only describes the half-line (0, inf)")
    raw = odd_hermite_values(rule.x, K)
    root = np.sqrt(rule.weights)
    Q, R = np.linalg.qr(root[:, None] * raw)
    Q = Q * np.sign(np.diag(R))[None, :]
    vectors = Q / root[:, None]
    lam = 2.0 * np.arange(1, K + 1) - 1.0
    return SpectralModel(domain, rule, lam, vectors, "hermite")


def build_spectral_model(domain: GaussianDomain, K: Optional[int], resolution: int = 0,
                         method: str = "fd", nodes: Optional[np.ndarray] = None) -> SpectralModel:
    """First K Dirichlet eigenpairs of the OU operator on `domain`.

    Args:
        domain: 1D half-space/interval or grid2d domain.
        K: number of modes; None keeps the whole discrete spectrum (1D only).
        resolution: interior node count of the graded 1D grid (ignored in 2D).
        method: "fd" or "hermite" (analytic odd-Hermite basis on (0, inf)).
        nodes: explicit 1D node array including both boundary points.

    Raises:
        SpectralTruncationError: when the grid cannot resolve K modes.
    """
    if domain.kind == "full":
        raise ConfigurationError("the full space has no Dirichlet problem")
    if domain.dim == 2:
        if domain.kind != "grid2d":
            raise ConfigurationError("2D spectral models need a grid2d domain")
        if K is None or K > MAX_K_2D:
            raise ConfigurationError(f"2D models support at most {MAX_K_2D} modes")
        _check_resolution(K, int(domain.mask.sum()))
        model = _fd_2d(domain, K)
    else:
        rule = grid_from_nodes(nodes) if nodes is not None else build_grid(domain, resolution)
        if K is not None:
            _check_resolution(K, rule.size)
        if method == "fd":
            model = _fd_1d(domain, K, rule)
        elif method == "hermite":
            if K is None:
                raise ConfigurationError("the odd-Hermite model needs an explicit K")
            model = _hermite(domain, K, rule)
        else:
            raise ConfigurationError(f"unknown spectral method {method!r}")
    if model.stiffness is not None:
        model.residuals = rayleigh_residuals(model)
    if model.eigenvalues[0] <= 0.0:
        raise NumericalError(f"nonpositive first eigenvalue {model.eigenvalues[0]}")
    logger.debug("built %s model on %r: K=%d N=%d lambda_1=%.10g", model.method, domain,
                 model.K, model.rule.size, model.eigenvalues[0])
    return model


def rayleigh_residuals(model: SpectralModel) -> np.ndarray:
    """Relative residual |A psi - lambda M psi| / (lambda |M psi|) per mode."""
    A, w = model.stiffness, model.rule.weights
    out = np.empty(model.K)
    for k in range(model.K):
        psi = model.vectors[:, k]
        lam = model.eigenvalues[k]
        Mpsi = w * psi
        out[k] = np.linalg.norm(A @ psi - lam * Mpsi) / (lam * np.linalg.norm(Mpsi))
    return out


# --------------------------- functional calculus ---------------------------

def truncation_report(model: SpectralModel, u: GridField, coefficients: Optional[np.ndarray] = None) -> dict:
    c = model.coefficients(u) if coefficients is None else coefficients
    energy = float(np.dot(model.rule.weights, u.values ** 2))
    tail = max(energy - float(np.dot(c, c)), 0.0)
    return {
        "K": model.K,
        "lambda_K": float(model.eigenvalues[-1]),
        "tail_energy": tail,
        "tail_fraction": tail / energy if energy > 0.0 else 0.0,
    }


def _attach(out: GridField, report: dict) -> GridField:
    out.diagnostics["truncation"] = report
    if report["tail_fraction"] > TAIL_WARNING:
        out.warn(f"spectral tail holds {100 * report['tail_fraction']:.2f}% of the energy "
                 f"beyond K = {report['K']}")
    return out


def fractional_apply(model: SpectralModel, u: GridField, sigma: float) -> GridField:
    """Sum_k lambda_k^sigma <u, psi_k> psi_k."""
    c = model.coefficients(u)
    vals = model.vectors @ (model.eigenvalues ** sigma * c)
    out = u.with_values(vals, label=f"L^({sigma:g}) {u.label}".strip())
    return _attach(out, truncation_report(model, u, c))


def hs_norm(model: SpectralModel, u: GridField, s: float) -> float:
    c = model.coefficients(u)
    report = truncation_report(model, u, c)
    if report["tail_fraction"] > TAIL_WARNING:
        logger.warning("hs_norm of %s: %.2f%% of the energy beyond K", u.label,
                       100 * report["tail_fraction"])
    return float(np.sqrt(np.sum(model.eigenvalues ** s * c * c)))


def dirichlet_semigroup(model: SpectralModel, f: GridField, t: float) -> GridField:
    if not t > 0.0:
        raise DomainError(f"semigroup time must be positive, got {t}")
    c = model.coefficients(f)
    vals = model.vectors @ (np.exp(-model.eigenvalues * t) * c)
    out = f.with_values(vals, label=f"e^(-{t:g}L_Omega) {f.label}".strip())
    return _attach(out, truncation_report(model, f, c))


def is_rearranged(u: GridField, tol: float = 1e-10) -> bool:
    """Whether a field on a 1D half-space is nondecreasing in x1 (up to tol times its sup)."""
    if u.domain.dim != 1 or u.domain.kind not in ("half-space", "interval") or math.isfinite(u.domain.b):
        raise ConfigurationError("rearranged fields live on a 1D half-space")
    v = np.abs(u.values[np.argsort(u.rule.x)])
    scale = max(float(np.max(v)), 1e-300) if v.size else 1.0
    return bool(np.all(np.diff(v) >= -tol * scale))


def semigroup_preserves_rearrangement(model: SpectralModel, f: GridField, t: float,
                                      tol: float = 1e-10) -> bool:
    """e^{-t L} f is again rearranged when f is, on a half-space model."""
    if not is_rearranged(f, tol):
        raise ConfigurationError(f"{f.label!r} is not rearranged")
    return is_rearranged(dirichlet_semigroup(model, f, t), tol)
