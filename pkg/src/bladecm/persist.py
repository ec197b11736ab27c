"""Versioned text files for trained models.

A model file is a JSON document. Arrays are stored row-major as
``{"shape": [...], "data": [...]}`` with every number written to 17
significant digits, so a save/load cycle reproduces the weights exactly.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Optional

import numpy as np

from .autoencoder.layers import LayerSpec
from .autoencoder.model import AeModel
from .data import NormalizerState, RegionLabel
from .dpca import DpcaModel
from .errors import DataError, ModelVersionMismatch
from .glr import GlrConfig

FORMAT = "bladecm-model"
VERSION = 1


class _Array:
    __slots__ = ("a",)

    def __init__(self, a):
        self.a = np.asarray(a, dtype=float)


def _fmt(x: float) -> str:
    return "%.17g" % x


def _dumps(doc) -> str:
    """JSON text with arrays spelled out at full precision and one array per line."""
    arrays = []

    def swap(v):
        if isinstance(v, _Array):
            arrays.append(v.a)
            return f"@@ARRAY{len(arrays) - 1}@@"
        if isinstance(v, dict):
            return {k: swap(x) for k, x in v.items()}
        if isinstance(v, (list, tuple)):
            return [swap(x) for x in v]
        if isinstance(v, float):
            arrays.append(v)
            return f"@@ARRAY{len(arrays) - 1}@@"
        return v

    text = json.dumps(swap(doc), indent=1)
    for i, a in enumerate(arrays):
        if isinstance(a, float):
            body = _fmt(a)
        else:
            data = ", ".join(_fmt(x) for x in a.ravel())
            body = f'{{"shape": [{", ".join(str(s) for s in a.shape)}], "data": [{data}]}}'
        text = text.replace(f'"@@ARRAY{i}@@"', body, 1)
    return text + "\n"


def _array(d) -> np.ndarray:
    try:
        return np.asarray(d["data"], dtype=float).reshape(d["shape"])
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed array in model file: {exc}") from exc


def _glr_doc(cfg: Optional[GlrConfig]):
    if cfg is None:
        return None
    return {"mu0": float(cfg.mu0), "sigma": float(cfg.sigma), "M": cfg.M, "h": float(cfg.h),
            "stride": cfg.stride}


def _glr_load(d) -> Optional[GlrConfig]:
    return None if d is None else GlrConfig(d["mu0"], d["sigma"], d["M"], d["h"], d["stride"])


def _norm_doc(norm: NormalizerState):
    return {"channels": list(norm.channels), "mean": _Array(norm.mean), "std": _Array(norm.std)}


def _norm_load(d) -> NormalizerState:
    return NormalizerState(_array(d["mean"]), _array(d["std"]), tuple(d["channels"]))


def dpca_document(model: DpcaModel) -> dict:
    return {
        "format": FORMAT,
        "version": VERSION,
        "kind": "dpca",
        "region": int(model.region),
        "window": model.window,
        "n_components": model.n_components,
        "normalizer": _norm_doc(model.normalizer),
        "eigenvalues": _Array(model.eigenvalues),
        "loadings": _Array(model.loadings),
        "spe_threshold": float(model.spe_threshold),
        "lpf_alpha": float(model.lpf_alpha),
        "glr": _glr_doc(model.glr),
    }


def ae_document(model: AeModel) -> dict:
    specs = [{"kind": s.kind, "units": s.units, "kernel": s.kernel, "stride": s.stride,
              "shape": list(s.shape), "activation": s.activation} for s in model.specs]
    params = [{k: _Array(p[k]) for k in sorted(p)} for p in model.params]
    meta = {k: (float(v) if isinstance(v, (float, np.floating)) else v)
            for k, v in sorted(model.meta.items())}
    return {
        "format": FORMAT,
        "version": VERSION,
        "kind": "ae",
        "window": model.window,
        "layers": specs,
        "params": params,
        "normalizer": _norm_doc(model.normalizer),
        "mae_threshold": float(model.mae_threshold),
        "lpf_alpha": float(model.lpf_alpha),
        "meta": meta,
        "glr": _glr_doc(model.glr),
    }


def dumps_model(model) -> str:
    if isinstance(model, DpcaModel):
        return _dumps(dpca_document(model))
    if isinstance(model, AeModel):
        return _dumps(ae_document(model))
    raise TypeError(f"cannot serialize {type(model).__name__}")


def loads_model(text: str):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DataError(f"model file is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format") != FORMAT:
        raise DataError("not a model file")
    if doc.get("version") != VERSION:
        raise ModelVersionMismatch(f"model file version {doc.get('version')}, expected {VERSION}")
    try:
        if doc["kind"] == "dpca":
            loadings = _array(doc["loadings"])
            if loadings.shape[1] != doc["n_components"]:
                raise DataError("loadings do not match the stored component count")
            return DpcaModel(RegionLabel(doc["region"]), _norm_load(doc["normalizer"]), doc["window"],
                             loadings, _array(doc["eigenvalues"]), doc["spe_threshold"],
                             doc["lpf_alpha"], _glr_load(doc["glr"]))
        if doc["kind"] == "ae":
            specs = tuple(LayerSpec(s["kind"], s["units"], s["kernel"], s["stride"], tuple(s["shape"]),
                                    s["activation"]) for s in doc["layers"])
            params = tuple({k: _array(v) for k, v in p.items()} for p in doc["params"])
            return AeModel(specs, doc["window"], _norm_load(doc["normalizer"]), params,
                           doc["mae_threshold"], doc["lpf_alpha"], dict(doc["meta"]),
                           _glr_load(doc["glr"]))
    except KeyError as exc:
        raise DataError(f"model file lacks field {exc}") from exc
    raise DataError(f"unknown model kind {doc.get('kind')!r}")


def save_model(model, path) -> Path:
    path = Path(path)
    path.write_text(dumps_model(model), encoding="utf-8", newline="\n")
    return path


def load_model(path):
    return loads_model(Path(path).read_text(encoding="utf-8"))
