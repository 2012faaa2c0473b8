"""JSON documents: networks, dictionaries, and single matrices.

Indices inside documents are 0-based.  Floats are written with Python's
shortest round-trip representation, so a save/load cycle is bit-exact.

Network::

    {"kind": "1d" | "2d", "input_dim": int,
     "layers": [{"filter_size": int, "stride": int, "in_channels": int,
                 "out_channels": int, "activation": "linear" | "relu",
                 "biases": [...], "filters": [out][in][s] or [out][in][s][s]}]}

Dictionary::

    {"d": int, "vectors": [[...], ...]}        # 1D features
    {"d": int, "matrices": [[[...]], ...]}     # 2D features
"""

from __future__ import annotations

import json
from pathlib import Path

import jsonschema
import numpy as np

from .errors import FormatError, PreconditionError
from .tensor import ConvLayer, ConvNet1D, ConvNet2D

_POS_INT = {"type": "integer", "minimum": 1}

NET_SCHEMA = {
    "type": "object",
    "required": ["kind", "input_dim", "layers"],
    "properties": {
        "kind": {"enum": ["1d", "2d"]},
        "input_dim": _POS_INT,
        "layers": {
            "type": "array",
            "items": {
                "type": "object",
                "required": [
                    "filter_size", "stride", "in_channels", "out_channels",
                    "activation", "biases", "filters",
                ],
                "properties": {
                    "filter_size": _POS_INT,
                    "stride": _POS_INT,
                    "in_channels": _POS_INT,
                    "out_channels": _POS_INT,
                    "activation": {"enum": ["linear", "relu"]},
                    "biases": {"type": "array", "items": {"type": "number"}},
                    "filters": {"type": "array"},
                },
            },
        },
    },
}

DICT_SCHEMA = {
    "type": "object",
    "required": ["d"],
    "properties": {
        "d": _POS_INT,
        "vectors": {
            "type": "array",
            "minItems": 1,
            "items": {"type": "array", "items": {"type": "number"}},
        },
        "matrices": {"type": "array", "minItems": 1, "items": {"type": "array"}},
    },
    "oneOf": [{"required": ["vectors"]}, {"required": ["matrices"]}],
}


def read_json(path) -> object:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"cannot read JSON from {path}: {exc}") from exc


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")


def _validate(obj, schema, what: str) -> None:
    try:
        jsonschema.validate(obj, schema)
    except jsonschema.ValidationError as exc:
        raise FormatError(f"malformed {what}: {exc.message}") from exc


def net_to_dict(net: ConvNet1D | ConvNet2D) -> dict:
    return {
        "kind": "2d" if isinstance(net, ConvNet2D) else "1d",
        "input_dim": net.input_dim,
        "layers": [
            {
                "filter_size": layer.filter_size,
                "stride": layer.stride,
                "in_channels": layer.in_channels,
                "out_channels": layer.out_channels,
                "activation": layer.activation.value,
                "biases": layer.biases.tolist(),
                "filters": layer.filters.tolist(),
            }
            for layer in net.layers
        ],
    }


def net_from_dict(obj) -> ConvNet1D | ConvNet2D:
    _validate(obj, NET_SCHEMA, "network")
    kind = obj["kind"]
    layers = []
    for j, entry in enumerate(obj["layers"], start=1):
        try:
            filters = np.array(entry["filters"], dtype=float)
        except (TypeError, ValueError) as exc:
            raise FormatError(f"layer {j}: filters are not a numeric array") from exc
        s = entry["filter_size"]
        shape = (entry["out_channels"], entry["in_channels"]) + ((s,) if kind == "1d" else (s, s))
        if filters.shape != shape:
            raise FormatError(f"layer {j}: filters have shape {filters.shape}, expected {shape}")
        try:
            layers.append(ConvLayer(filters, entry["stride"], entry["biases"], entry["activation"]))
        except PreconditionError as exc:
            raise FormatError(f"layer {j}: {exc}") from exc
    cls = ConvNet1D if kind == "1d" else ConvNet2D
    try:
        return cls(obj["input_dim"], tuple(layers))
    except PreconditionError as exc:
        raise FormatError(str(exc)) from exc


def dictionary_to_dict(dictionary) -> dict:
    D = np.asarray(dictionary, dtype=float)
    key = "vectors" if D.ndim == 2 else "matrices"
    return {"d": int(D.shape[-1]), key: D.tolist()}


def dictionary_from_dict(obj) -> np.ndarray:
    """Return an ``(m, d)`` array for vectors or an ``(m, d, d)`` array for matrices."""
    if isinstance(obj, dict) and (obj.get("vectors") == [] or obj.get("matrices") == []):
        raise FormatError("dictionary is empty")
    _validate(obj, DICT_SCHEMA, "dictionary")
    d = obj["d"]
    key = "vectors" if "vectors" in obj else "matrices"
    try:
        D = np.array(obj[key], dtype=float)
    except (TypeError, ValueError) as exc:
        raise FormatError(f"dictionary {key} are ragged or non-numeric") from exc
    expected = 2 if key == "vectors" else 3
    if D.ndim != expected or D.shape[1:] != (d,) * (expected - 1):
        raise FormatError(f"dictionary {key} have shape {D.shape}, expected d={d}")
    return D


def matrix_from_json(obj) -> np.ndarray:
    """A square matrix given either as a bare nested list or as ``{"matrix": ...}``."""
    if isinstance(obj, dict):
        if "matrix" not in obj:
            raise FormatError('matrix document needs a "matrix" field')
        obj = obj["matrix"]
    try:
        M = np.array(obj, dtype=float)
    except (TypeError, ValueError) as exc:
        raise FormatError("matrix is ragged or non-numeric") from exc
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.size == 0:
        raise FormatError(f"expected a nonempty square matrix, got shape {M.shape}")
    return M
