"""Versioned on-disk formats for fitted learners.

Linear models and forests are single JSON documents (forest node arrays are
base64-encoded little-endian buffers). A network is a JSON header plus a flat
binary blob of float64 parameters stored next to it with a ``.bin`` suffix.
"""

from __future__ import annotations

import base64
import json
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .ffnn import FfnnConfig, FfnnModel
from .forest import ForestConfig, ForestModel, Tree
from .linear import LinearModel

FORMAT_VERSION = 1


def _b64(a: np.ndarray, dtype: str) -> str:
    return base64.b64encode(np.ascontiguousarray(a, dtype=dtype).tobytes()).decode("ascii")


def _unb64(s: str, dtype: str, shape=None) -> np.ndarray:
    a = np.frombuffer(base64.b64decode(s), dtype=dtype).copy()
    return a.reshape(shape) if shape is not None else a


def _tree_to_dict(t: Tree) -> dict:
    return {
        "n_nodes": t.n_nodes,
        "feature": _b64(t.feature, "<i8"),
        "threshold": _b64(t.threshold, "<f8"),
        "left": _b64(t.left, "<i8"),
        "right": _b64(t.right, "<i8"),
        "value": _b64(t.value, "<f8"),
        "n_samples": _b64(t.n_samples, "<f8"),
        "impurity_decrease": _b64(t.impurity_decrease, "<f8"),
    }


def _tree_from_dict(d: dict, K: int) -> Tree:
    n = d["n_nodes"]
    return Tree(
        _unb64(d["feature"], "<i8"),
        _unb64(d["threshold"], "<f8"),
        _unb64(d["left"], "<i8"),
        _unb64(d["right"], "<i8"),
        _unb64(d["value"], "<f8", (n, K)),
        _unb64(d["n_samples"], "<f8"),
        _unb64(d["impurity_decrease"], "<f8"),
    )


def save_model(model, path) -> list[Path]:
    """Write ``model`` to ``path``; returns the files written."""
    path = Path(path)
    if isinstance(model, LinearModel):
        doc = {"format": "hybridtherm.linear", "version": FORMAT_VERSION,
               "W": model.W.tolist(), "intercept": model.intercept.tolist()}
        path.write_text(json.dumps(doc, indent=1))
        return [path]
    if isinstance(model, ForestModel):
        doc = {"format": "hybridtherm.forest", "version": FORMAT_VERSION,
               "n_features": model.n_features, "n_targets": model.n_targets,
               "config": asdict(model.config),
               "trees": [_tree_to_dict(t) for t in model.trees]}
        path.write_text(json.dumps(doc))
        return [path]
    if isinstance(model, FfnnModel):
        blob = path.with_suffix(".bin")
        doc = {"format": "hybridtherm.ffnn", "version": FORMAT_VERSION,
               "weights_file": blob.name, "dtype": "<f8",
               "layers": [{"fan_in": i, "fan_out": o, "activation": a}
                          for (i, o), a in zip(model.shapes, model.activations)],
               "layout": "per layer: W row-major (fan_in, fan_out), then b",
               "config": {**asdict(model.config), "hidden": list(model.config.hidden)}}
        path.write_text(json.dumps(doc, indent=1))
        blob.write_bytes(np.ascontiguousarray(model.theta, dtype="<f8").tobytes())
        return [path, blob]
    raise TypeError(f"cannot serialise {type(model).__name__}")


def load_model(path):
    path = Path(path)
    doc = json.loads(path.read_text())
    fmt, version = doc.get("format"), doc.get("version")
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported model version {version!r}")
    if fmt == "hybridtherm.linear":
        return LinearModel(np.array(doc["W"], dtype=np.float64), np.array(doc["intercept"], dtype=np.float64))
    if fmt == "hybridtherm.forest":
        K = doc["n_targets"]
        trees = tuple(_tree_from_dict(t, K) for t in doc["trees"])
        return ForestModel(trees, doc["n_features"], K, ForestConfig(**doc["config"]))
    if fmt == "hybridtherm.ffnn":
        theta = np.frombuffer((path.parent / doc["weights_file"]).read_bytes(), dtype=doc["dtype"]).astype(np.float64)
        shapes = tuple((ly["fan_in"], ly["fan_out"]) for ly in doc["layers"])
        acts = tuple(ly["activation"] for ly in doc["layers"])
        cfg = doc["config"]
        cfg["hidden"] = tuple(cfg["hidden"])
        return FfnnModel(shapes, acts, theta, FfnnConfig(**cfg))
    raise ValueError(f"unknown model format {fmt!r}")
