"""
cli.py

Command-line front end. Every subcommand reads an ExperimentConfig built from
an optional YAML file (a `common` mapping plus one mapping per subcommand)
overridden by flags, writes CSV tables under --out and returns an exit code:

  0 ok, 1 configuration error, 2 inequality violated beyond budget,
  3 inconclusive, 4 numerical failure.

Example config:

    common:
      s: 0.5
      resolution: 400
    compare:
      domain: {kind: interval, a: 1, b: 3}
      datum: {family: constant, value: 1}
"""

from __future__ import annotations

import argparse
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import yaml
from scipy.spatial import cKDTree

from gfou import config
from gfou.comparison import default_k, solve_problem, truncation_allowance, verify_comparison
from gfou.datacontroller import get_spectral_model
from gfou.errors import (ComparisonViolation, ConfigurationError, GfouError, describe, exit_code_for,
                         register_error_handlers)
from gfou.extension import build_extension, default_levels
from gfou.gausscore import (FractionalParams, GaussianDomain, GridField, QuadratureRule, build_grid,
                            grid2d, half_space, interval)
from gfou.rearrange import decreasing_rearrangement
from gfou.regularity import greens_kernel, kernel_table, random_datum, regularity_ratio
from gfou.semigroup import mehler_matrix
from gfou.utils import config_hash, ensure_dir, fmt, read_csv, write_csv, write_matrix

logger = logging.getLogger(__name__)

SUBCOMMANDS = ("solve", "extend", "rearrange", "compare", "regularity", "kernel")


# --------------------------- configuration ---------------------------------

@dataclass
class ExperimentConfig:
    subcommand: str
    domain: Dict[str, Any] = field(default_factory=lambda: {"kind": "half-space", "lam": 0.0})
    datum: Dict[str, Any] = field(default_factory=lambda: {"family": "constant", "value": 1.0})
    s: float = 0.5
    p: float = 2.0
    alpha: float = 0.0
    K: Optional[int] = None
    resolution: int = 400
    out: str = "out"
    seed: int = 0
    options: Dict[str, Any] = field(default_factory=dict)

    def validate(self) -> "ExperimentConfig":
        if self.subcommand not in SUBCOMMANDS:
            raise ConfigurationError(f"unknown subcommand {self.subcommand!r}")
        FractionalParams(self.s)
        if self.resolution < config.MIN_RESOLUTION:
            raise ConfigurationError(f"resolution must be >= {config.MIN_RESOLUTION}, got {self.resolution}")
        if self.K is not None and self.K < 1:
            raise ConfigurationError(f"K must be >= 1, got {self.K}")
        return self

    def to_dict(self) -> Dict[str, Any]:
        d = asdict(self)
        d.pop("out")
        return d

    @property
    def digest(self) -> str:
        return config_hash(self.to_dict())


_KNOWN = {"domain", "datum", "s", "p", "alpha", "K", "resolution", "out", "seed"}


def load_config(path: Optional[str]) -> Dict[str, Any]:
    if not path:
        return {}
    try:
        data = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigurationError(f"config {path} must be a mapping of sections")
    return data


def build_config(subcommand: str, data: Dict[str, Any], flags: Dict[str, Any]) -> ExperimentConfig:
    merged: Dict[str, Any] = {}
    for section in ("common", subcommand):
        part = data.get(section) or {}
        if not isinstance(part, dict):
            raise ConfigurationError(f"config section {section!r} must be a mapping")
        merged.update(part)
    merged.update({k: v for k, v in flags.items() if v is not None})
    known = {k: merged.pop(k) for k in list(merged) if k in _KNOWN}
    try:
        cfg = ExperimentConfig(subcommand, options=merged, **known)
        cfg.s, cfg.p, cfg.alpha = float(cfg.s), float(cfg.p), float(cfg.alpha)
        cfg.resolution, cfg.seed = int(cfg.resolution), int(cfg.seed)
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"invalid configuration: {exc}") from exc
    return cfg.validate()


# --------------------------- domains and data ------------------------------

def build_domain(desc: Dict[str, Any]) -> GaussianDomain:
    kind = desc.get("kind", "half-space")
    if kind == "half-space":
        return half_space(float(desc.get("lam", 0.0)))
    if kind == "interval":
        return interval(float(desc["a"]), float(desc.get("b", math.inf)))
    n = int(desc.get("n", 41))
    if kind == "square":
        lo, hi = float(desc.get("lo", 0.0)), float(desc.get("hi", 1.0))
        return grid2d((lo, hi, lo, hi), n, label="square")
    if kind == "disk":
        c1, c2 = (float(v) for v in desc.get("center", (1.0, 1.0)))
        r = float(desc.get("radius", 0.5))
        return grid2d((c1 - r, c1 + r, c2 - r, c2 + r), n,
                      lambda x1, x2: (x1 - c1) ** 2 + (x2 - c2) ** 2 < r * r, label="disk")
    raise ConfigurationError(f"unknown domain preset {kind!r}")


def grid_for(domain: GaussianDomain, resolution: int) -> QuadratureRule:
    return build_grid(domain, domain.n if domain.dim == 2 else resolution)


def modes_for(domain: GaussianDomain, rule: QuadratureRule, K: Optional[int]) -> int:
    K = default_k(domain) if K is None else K
    return max(1, min(K, rule.size // config.NODES_PER_MODE))


def build_datum(desc: Dict[str, Any], domain: GaussianDomain, rule: QuadratureRule, K: int,
                rng: np.random.Generator) -> GridField:
    family = desc.get("family", "constant")
    if family == "constant":
        value = float(desc.get("value", 1.0))
        return GridField.from_function(domain, rule, lambda x: value, f"const({value:g})")
    if family == "mode":
        k = int(desc.get("k", 1))
        model = get_spectral_model(domain, max(K, k), rule.resolution or 0)
        return model.mode(k)
    if family == "bump":
        c, w = float(desc.get("center", 1.0)), float(desc.get("width", 0.5))
        if rule.dim == 1:
            fn = lambda x: np.exp(-(x - c) ** 2 / (2 * w * w))
        else:
            c2 = float(desc.get("center2", c))
            fn = lambda x: np.exp(-((x[:, 0] - c) ** 2 + (x[:, 1] - c2) ** 2) / (2 * w * w))
        return GridField.from_function(domain, rule, fn, f"bump({c:g},{w:g})")
    if family == "random":
        datum = random_datum(rng, int(desc.get("bumps", 3)))
        lo = domain.support()[0]
        return GridField.from_function(domain, rule, lambda x: datum(x, lo), "random")
    if family == "csv":
        return load_field_csv(desc["path"], domain, rule)
    raise ConfigurationError(f"unknown datum family {family!r}")


# --------------------------- field CSV -------------------------------------

def export_field_csv(f: GridField, path, comments=()) -> Path:
    coords = ["x1", "x2"][:f.rule.dim]
    return write_matrix(path, coords + ["value"], np.column_stack([f.rule.nodes, f.values]), comments)


def load_field_csv(path, domain: GaussianDomain, rule: QuadratureRule) -> GridField:
    """Field on `rule` from a (node..., value) CSV, nodes matched within 1e-9."""
    _, data, _ = read_csv(path)
    if data.shape[0] == 0:
        raise ConfigurationError(f"{path}: empty field")
    dim = rule.dim
    if data.shape[1] != dim + 1:
        raise ConfigurationError(f"{path}: expected {dim + 1} columns, got {data.shape[1]}")
    dist, idx = cKDTree(rule.nodes).query(data[:, :dim])
    far = np.flatnonzero(dist > 1e-9)
    if far.size:
        i = int(far[0])
        raise ConfigurationError(f"{path}: row {i + 1} node {data[i, :dim].tolist()} matches no grid node")
    values = np.full(rule.size, np.nan)
    values[idx] = data[:, dim]
    if np.isnan(values).any():
        missing = int(np.flatnonzero(np.isnan(values))[0])
        raise ConfigurationError(f"{path}: no value for grid node {rule.nodes[missing].tolist()}")
    return GridField(domain, rule, values, Path(path).stem)


# --------------------------- subcommands -----------------------------------

def _comments(cfg: ExperimentConfig, tolerance: float, extra: Optional[Dict[str, Any]] = None) -> List[str]:
    lines = [f"config_hash: {cfg.digest}", f"tolerance: {fmt(tolerance)}"]
    for k, v in (extra or {}).items():
        lines.append(f"{k}: {v}")
    return lines


def _truncation_note(u: GridField) -> str:
    rep = u.diagnostics.get("truncation")
    if not rep:
        return "none"
    return f"K={rep['K']} lambda_K={fmt(rep['lambda_K'])} tail_fraction={fmt(rep['tail_fraction'])}"


def _setup(cfg: ExperimentConfig):
    rng = np.random.default_rng(cfg.seed)
    domain = build_domain(cfg.domain)
    rule = grid_for(domain, cfg.resolution)
    K = modes_for(domain, rule, cfg.K)
    f = build_datum(cfg.datum, domain, rule, K, rng)
    return domain, rule, K, f


def cmd_solve(cfg: ExperimentConfig, out: Path) -> int:
    domain, rule, K, f = _setup(cfg)
    u = solve_problem(domain, f, cfg.s, K)
    coords = ["x1", "x2"][:rule.dim]
    table = np.column_stack([rule.nodes, f.values, u.values])
    write_matrix(out / "solution.csv", coords + ["f", "u"], table,
              _comments(cfg, truncation_allowance(u, cfg.s, domain.measure), {"truncation": _truncation_note(u)}))
    return 0


def cmd_extend(cfg: ExperimentConfig, out: Path) -> int:
    domain, rule, K, u = _setup(cfg)
    model = get_spectral_model(domain, K, rule.resolution or 0)
    levels = cfg.options.get("y")
    levels = default_levels(model) if levels is None else [float(y) for y in levels]
    ext = build_extension(model, u, FractionalParams(cfg.s), levels)
    coords = ["x1", "x2"][:rule.dim]
    table = np.vstack([np.column_stack([rule.nodes, np.full(rule.size, y), ext.values[i]])
                       for i, y in enumerate(ext.y_levels)])
    rep = ext.diagnostics["truncation"]
    write_matrix(out / "extension.csv", coords + ["y", "w"], table,
              _comments(cfg, rep["tail_fraction"], {"truncation": _truncation_note(ext)}))
    return 0


def cmd_rearrange(cfg: ExperimentConfig, out: Path) -> int:
    domain, rule, _, f = _setup(cfg)
    prof = decreasing_rearrangement(f, domain.measure)
    prof.to_csv(out / "profile.csv", comments=_comments(cfg, 0.0, {"measure": fmt(domain.measure)}))
    return 0


def cmd_compare(cfg: ExperimentConfig, out: Path) -> int:
    domain, rule, K, f = _setup(cfg)
    report = verify_comparison(domain, f, cfg.s, K)
    text = report.to_text()
    ensure_dir(out)
    (out / "report.txt").write_text(text + "\n", encoding="utf-8")
    print(text)
    write_csv(out / "profiles.csv", ["r", "U", "Psi", "u_star", "psi_star"], report.profile_rows(),
              _comments(cfg, report.tolerance_budget,
                        {"truncation_u": _truncation_note(report.solution),
                         "truncation_psi": _truncation_note(report.symmetrized)}))
    if not report.confirmed:
        raise ComparisonViolation(f"max gap {report.max_gap:.3e} exceeds budget {report.tolerance_budget:.3e}"
                                  f" at r = {report.worst_r:.6g}")
    return 0


def cmd_regularity(cfg: ExperimentConfig, out: Path) -> int:
    rng = np.random.default_rng(cfg.seed)
    domain = build_domain(cfg.domain)
    rule = grid_for(domain, cfg.resolution)
    K = modes_for(domain, rule, cfg.K)
    count = int(cfg.options.get("count", 1))
    route = cfg.options.get("route", "spectral")
    ratios, label = [], ""
    for _ in range(count):
        f = build_datum(cfg.datum, domain, rule, K, rng)
        label = f.label
        ratios.append(regularity_ratio(domain, f, cfg.s, cfg.p, cfg.alpha, K, route).ratio)
    write_csv(out / "ratios.csv", ["datum", "ratio"], enumerate(ratios),
              _comments(cfg, 0.0, {"datum": label, "empirical_constant": fmt(max(ratios)), "route": route}))
    return 0


def cmd_kernel(cfg: ExperimentConfig, out: Path) -> int:
    xs = [float(v) for v in cfg.options.get("x", np.linspace(0.25, 5.0, 20))]
    ys = [float(v) for v in cfg.options.get("y", xs)]
    FractionalParams(cfg.s)
    if cfg.options.get("table", "greens") == "mehler":
        t = float(cfg.options.get("t", 1.0))
        M = mehler_matrix(np.array(xs), np.array(ys), t)
        rows = ((x, y, t, M[i, j]) for i, x in enumerate(xs) for j, y in enumerate(ys))
        write_csv(out / "mehler.csv", ["x", "y", "t", "M"], rows, _comments(cfg, 0.0))
        return 0
    k = greens_kernel(cfg.s, cfg.p)
    rows = kernel_table(k, xs, ys)
    write_csv(out / "kernel.csv", ["x", "y", "G", "G1", "G2", "G3"], rows,
              _comments(cfg, 1e-9, {"c_p": fmt(k.c_p)}))
    return 0


COMMANDS = {
    "solve": cmd_solve,
    "extend": cmd_extend,
    "rearrange": cmd_rearrange,
    "compare": cmd_compare,
    "regularity": cmd_regularity,
    "kernel": cmd_kernel,
}


def run(cfg: ExperimentConfig) -> int:
    """Dispatch one validated config; errors map to exit codes."""
    try:
        out = Path(cfg.out)
        ensure_dir(out)
        return COMMANDS[cfg.subcommand](cfg, out)
    except GfouError as exc:
        logger.error(describe(exc))
        return exit_code_for(exc)


# --------------------------- entry -----------------------------------------

def _make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gfou", description="Gaussian fractional OU laboratory")
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("--config", help="YAML experiment file")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--resolution", type=int)
    p.add_argument("--s", type=float, help="fractional order in (0, 1)")
    p.add_argument("--verbose", action="store_true")
    return p


def main(argv: Optional[List[str]] = None) -> int:
    args = _make_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(message)s")
    register_error_handlers()
    try:
        cfg = build_config(args.subcommand, load_config(args.config),
                           {"out": args.out, "seed": args.seed, "resolution": args.resolution, "s": args.s})
    except GfouError as exc:
        logger.error(describe(exc))
        return exit_code_for(exc)
    try:
        return run(cfg)
    except Exception as exc:  # anything outside the error hierarchy is a numerical failure
        logger.exception("unexpected failure: %s", exc)
        return 4
