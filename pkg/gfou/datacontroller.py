"""
datacontroller.py

On-disk cache of SpectralModels so repeated CLI runs skip the eigensolve.

Storage layout (under config.CACHE_DIR, i.e. $GFOU_CACHE_DIR):
  CACHE_DIR/<key[:2]>/<key>/
    - meta.json          (format version, domain descriptor, K, method, hashes)
    - eigenvalues.csv    (k, lambda)
    - nodes.csv          (x1[, x2], weight)
    - eigenvectors.csv   (N rows x K columns)

Every numeric block is written with 17 significant digits, so a reloaded model
is bit-identical to the one that was stored.

Public API:
- model_key(domain, K, resolution, method) -> str
- model_dir_for(key) -> Path
- save_model(model, key) -> Path
- load_model(domain, key) -> SpectralModel | None
- get_spectral_model(domain, K, resolution, method="fd") -> SpectralModel
- list_models() -> list[(key, meta)]

The module also has a small CLI for maintenance.
"""

from __future__ import annotations

import argparse
import json
import logging
import shutil
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from scipy import sparse

from gfou import config
from gfou.gausscore import GaussianDomain, QuadratureRule, full_nodes
from gfou.spectral import (SpectralModel, assemble_1d, assemble_2d, build_spectral_model,
                           rayleigh_residuals)
from gfou.utils import ensure_dir, now_iso, read_matrix, sha256_of_text, write_matrix

logger = logging.getLogger(__name__)

_MEMORY: Dict[str, SpectralModel] = {}

# --------------------------- path helpers ----------------------------------


def cache_root() -> Optional[Path]:
    return config.CACHE_DIR


def model_key(domain: GaussianDomain, K, resolution: int, method: str) -> str:
    payload = json.dumps({
        "version": config.MODEL_FORMAT_VERSION,
        "domain": domain.fingerprint(),
        "K": K,
        "resolution": resolution,
        "method": method,
        "radius": config.TRUNCATION_RADIUS,
        "grading": config.GRID_GRADING,
    }, sort_keys=True)
    return sha256_of_text(payload)


def model_dir_for(key: str) -> Path:
    root = cache_root()
    if root is None:
        raise RuntimeError("GFOU_CACHE_DIR is not set")
    return Path(root) / key[:2] / key

# --------------------------- metadata helpers ------------------------------


def _meta_path(model_dir: Path) -> Path:
    return model_dir / "meta.json"


def load_meta(model_dir: Path) -> Dict[str, Any]:
    p = _meta_path(model_dir)
    if not p.exists():
        return {}
    try:
        return json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError:
        return {}


def save_meta(model_dir: Path, meta: Dict[str, Any]) -> None:
    ensure_dir(model_dir)
    tmp = _meta_path(model_dir).with_suffix(".json.tmp")
    tmp.write_text(json.dumps(meta, indent=2, ensure_ascii=False), encoding="utf-8")
    tmp.replace(_meta_path(model_dir))

# --------------------------- core ops --------------------------------------


def save_model(model: SpectralModel, key: str) -> Path:
    model_dir = model_dir_for(key)
    ensure_dir(model_dir)
    rule = model.rule
    K = model.K
    write_matrix(model_dir / "eigenvalues.csv", ["k", "lambda"],
                 np.column_stack([np.arange(1, K + 1), model.eigenvalues]))
    coords = ["x1", "x2"][:rule.dim]
    write_matrix(model_dir / "nodes.csv", coords + ["weight"], np.column_stack([rule.nodes, rule.weights]))
    write_matrix(model_dir / "eigenvectors.csv", [f"psi_{k}" for k in range(1, K + 1)], model.vectors)
    meta = {
        "version": config.MODEL_FORMAT_VERSION,
        "createdAt": now_iso(),
        "domain": model.domain.descriptor(),
        "measure": model.domain.measure,
        "K": K,
        "N": rule.size,
        "method": model.method,
        "order": rule.order,
        "scheme": rule.scheme,
        "boundary": list(rule.boundary) if rule.boundary else None,
        "resolution": rule.resolution,
        "nodes_sha256": rule.fingerprint(),
        "max_residual": float(np.max(model.residuals)) if model.residuals is not None else None,
    }
    save_meta(model_dir, meta)
    logger.debug("stored spectral model %s", key)
    return model_dir


def load_model(domain: GaussianDomain, key: str) -> Optional[SpectralModel]:
    """Reload a stored model, or None when absent, stale or unreadable."""
    if cache_root() is None:
        return None
    model_dir = model_dir_for(key)
    meta = load_meta(model_dir)
    if meta.get("version") != config.MODEL_FORMAT_VERSION:
        return None
    try:
        lam = read_matrix(model_dir / "eigenvalues.csv")[:, 1]
        nodes_w = read_matrix(model_dir / "nodes.csv")
        vectors = read_matrix(model_dir / "eigenvectors.csv")
    except (OSError, ValueError, IndexError) as exc:
        logger.warning("ignoring unreadable cached model %s: %s", key, exc)
        return None
    boundary = tuple(meta["boundary"]) if meta.get("boundary") else None
    rule = QuadratureRule(nodes_w[:, :-1], nodes_w[:, -1], meta.get("order", 1), meta.get("scheme", "lumped"),
                          boundary=boundary, resolution=meta.get("resolution"))
    if rule.fingerprint() != meta.get("nodes_sha256"):
        logger.warning("cached model %s fails its node checksum", key)
        return None
    model = SpectralModel(domain, rule, lam, vectors.reshape(rule.size, -1), meta["method"])
    if model.method == "fd":
        # stiffness is rebuilt from the nodes, not stored
        rebuilt = _rebuild_stiffness(domain, rule)
        if rebuilt is not None:
            model.stiffness = rebuilt
            model.residuals = rayleigh_residuals(model)
    return model


def _rebuild_stiffness(domain: GaussianDomain, rule: QuadratureRule):
    if domain.dim == 2:
        return assemble_2d(domain)
    diag, off, _ = assemble_1d(full_nodes(rule))
    n = len(diag)
    return sparse.diags([off, diag, off], [-1, 0, 1], shape=(n, n), format="csr")


def get_spectral_model(domain: GaussianDomain, K, resolution: int = 0, method: str = "fd") -> SpectralModel:
    """Memoized build_spectral_model backed by the disk cache when configured."""
    key = model_key(domain, K, resolution, method)
    if key in _MEMORY:
        return _MEMORY[key]
    model = load_model(domain, key)
    if model is not None:
        logger.debug("spectral model cache hit %s", key[:12])
    else:
        model = build_spectral_model(domain, K, resolution, method)
        if cache_root() is not None:
            save_model(model, key)
    _MEMORY[key] = model
    return model


def clear_memory() -> None:
    _MEMORY.clear()


def list_models() -> List[Tuple[str, Dict[str, Any]]]:
    root = cache_root()
    if root is None or not Path(root).exists():
        return []
    out = []
    for meta_file in sorted(Path(root).glob("*/*/meta.json")):
        out.append((meta_file.parent.name, load_meta(meta_file.parent)))
    return out

# --------------------------- CLI -------------------------------------------


def _make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(description="Spectral model cache maintenance")
    sub = p.add_subparsers(dest="cmd", required=True)
    sub.add_parser("list", help="List cached models")
    show = sub.add_parser("show", help="Show a model's metadata")
    show.add_argument("key")
    purge = sub.add_parser("purge", help="Delete one model, or all with --all")
    purge.add_argument("key", nargs="?")
    purge.add_argument("--all", action="store_true")
    return p


def main(argv: Optional[List[str]] = None) -> int:
    parser = _make_parser()
    args = parser.parse_args(argv)
    if cache_root() is None:
        print("GFOU_CACHE_DIR is not set")
        return 1
    if args.cmd == "list":
        for key, meta in list_models():
            print(key, meta.get("method"), "K=%s" % meta.get("K"), json.dumps(meta.get("domain")))
        return 0
    if args.cmd == "show":
        meta = load_meta(model_dir_for(args.key))
        if not meta:
            print("not found")
            return 1
        print(json.dumps(meta, indent=2, ensure_ascii=False))
        return 0
    if args.cmd == "purge":
        if args.all:
            for key, _ in list_models():
                shutil.rmtree(model_dir_for(key), ignore_errors=True)
            _MEMORY.clear()
            return 0
        if not args.key:
            parser.error("purge needs a key or --all")
        shutil.rmtree(model_dir_for(args.key), ignore_errors=True)
        _MEMORY.pop(args.key, None)
        return 0
    parser.print_help()
    return 1


if __name__ == "__main__":
    raise SystemExit(main())
