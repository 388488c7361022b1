"""Versioned binary serialization for trained models ("HCM1" blobs).

Layout mirrors the HCF container conventions: little-endian, length-prefixed
UTF-8 names, u8 dtype codes, u8 rank, u32 dims, raw payload.  A blob is

    magic "HCM1" | version u16 | kind string | record_count u32 | records

where composite models (voting, stacking) nest member blobs as byte records.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .classifiers.base import Scaler
from .classifiers.forest import RandomForestModel, Tree
from .classifiers.linear_svc import LinearSvcModel
from .classifiers.logistic import LogisticModel
from .classifiers.rbf_svc import RbfSvcModel
from .ensembles import StackingModel, VotingModel

MAGIC = b"HCM1"
VERSION = 1

_CODES = {"<f4": 0, "|u1": 1, "<f8": 2, "<i4": 3, "<i8": 4}
_BYTES_CODE = 5  # raw bytes: nested blobs, JSON documents
_DTYPES = {v: np.dtype(k) for k, v in _CODES.items()}


class ModelFormatError(ValueError):
    """Stream does not parse as an HCM model blob."""


def _pack_str(s: str) -> bytes:
    raw = s.encode("utf-8")
    return struct.pack("<H", len(raw)) + raw


def _array_record(name: str, arr: np.ndarray) -> bytes:
    arr = np.ascontiguousarray(arr)
    key = arr.dtype.newbyteorder("<").str if arr.dtype.byteorder == ">" else arr.dtype.str
    key = key.replace("=", "<")
    if key == "|i1":
        key = "<i4"
        arr = arr.astype(np.int32)
    if key not in _CODES:
        raise ValueError(f"cannot serialize dtype {arr.dtype}")
    head = _pack_str(name) + struct.pack("<BB", _CODES[key], arr.ndim)
    head += struct.pack(f"<{arr.ndim}I", *arr.shape)
    return head + arr.astype(_DTYPES[_CODES[key]]).tobytes()


def _bytes_record(name: str, blob: bytes) -> bytes:
    head = _pack_str(name) + struct.pack("<BB", _BYTES_CODE, 1)
    head += struct.pack("<I", len(blob))
    return head + blob


def _json_record(name: str, obj) -> bytes:
    return _bytes_record(name, json.dumps(obj, sort_keys=True).encode("utf-8"))


def _scaler_records(scaler) -> list[bytes]:
    if scaler is None:
        return []
    return [_array_record("scaler_mean", scaler.mean),
            _array_record("scaler_scale", scaler.scale)]


def _blob(kind: str, records: list[bytes]) -> bytes:
    return (MAGIC + struct.pack("<H", VERSION) + _pack_str(kind)
            + struct.pack("<I", len(records)) + b"".join(records))


def dump_model(model) -> bytes:
    """Serialize any trained model (base or ensemble) to an HCM1 blob."""
    if isinstance(model, (LogisticModel, LinearSvcModel)):
        recs = [
            _array_record("weights", model.weights),
            _array_record("intercept", np.array([model.intercept])),
            _json_record("meta", {"dim": model.dim, "seed": model.seed,
                                  "iterations": model.iterations}),
        ]
        recs += _scaler_records(model.scaler)
        return _blob(model.kind, recs)
    if isinstance(model, RbfSvcModel):
        recs = [
            _array_record("support_vectors", model.support_vectors),
            _array_record("dual_coef", model.dual_coef),
            _array_record("intercept", np.array([model.intercept])),
            _array_record("gamma", np.array([model.gamma])),
            _array_record("platt", np.array([model.platt_a, model.platt_b])),
            _json_record("meta", {"dim": model.dim, "seed": model.seed,
                                  "iterations": model.iterations}),
        ]
        recs += _scaler_records(model.scaler)
        return _blob(model.kind, recs)
    if isinstance(model, RandomForestModel):
        recs = [_json_record("meta", {"dim": model.dim, "seed": model.seed,
                                      "n_trees": len(model.trees)})]
        for k, tree in enumerate(model.trees):
            recs += [
                _array_record(f"tree{k}_feature", tree.feature),
                _array_record(f"tree{k}_threshold", tree.threshold),
                _array_record(f"tree{k}_left", tree.left),
                _array_record(f"tree{k}_right", tree.right),
                _array_record(f"tree{k}_value", tree.value),
            ]
        recs += _scaler_records(model.scaler)
        return _blob(model.kind, recs)
    if isinstance(model, VotingModel):
        recs = [
            _array_record("weights", model.weights),
            _json_record("meta", {"dim": model.dim, "seed": model.seed,
                                  "members": [m.kind for m in model.members]}),
        ]
        recs += [_bytes_record(f"member{k}", dump_model(m))
                 for k, m in enumerate(model.members)]
        return _blob("voting", recs)
    if isinstance(model, StackingModel):
        recs = [_json_record("meta", {"dim": model.dim, "seed": model.seed,
                                      "base_kinds": list(model.base_kinds)})]
        recs += [_bytes_record(f"base{k}", dump_model(b))
                 for k, b in enumerate(model.bases)]
        recs.append(_bytes_record("meta_model", dump_model(model.meta)))
        return _blob("stacking", recs)
    raise ValueError(f"cannot serialize model of type {type(model).__name__}")


def _parse_records(data: bytes, pos: int) -> dict:
    (count,) = struct.unpack_from("<I", data, pos)
    pos += 4
    records = {}
    for _ in range(count):
        (nlen,) = struct.unpack_from("<H", data, pos)
        pos += 2
        name = data[pos : pos + nlen].decode("utf-8")
        pos += nlen
        code, rank = struct.unpack_from("<BB", data, pos)
        pos += 2
        dims = struct.unpack_from(f"<{rank}I", data, pos)
        pos += 4 * rank
        if code == _BYTES_CODE:
            size = dims[0]
            records[name] = data[pos : pos + size]
            pos += size
        else:
            dt = _DTYPES.get(code)
            if dt is None:
                raise ModelFormatError(f"unknown dtype code {code} in record {name!r}")
            size = int(np.prod(dims, dtype=np.int64)) * dt.itemsize
            records[name] = np.frombuffer(data[pos : pos + size], dtype=dt).reshape(dims).copy()
            pos += size
        if pos > len(data):
            raise ModelFormatError(f"truncated record {name!r}")
    if pos != len(data):
        raise ModelFormatError(f"{len(data) - pos} trailing bytes in model blob")
    return records


def _load_scaler(records):
    if "scaler_mean" in records:
        return Scaler(mean=records["scaler_mean"], scale=records["scaler_scale"])
    return None


def load_model(data: bytes):
    """Reconstruct a model from dump_model bytes."""
    if data[:4] != MAGIC:
        raise ModelFormatError("bad magic: not an HCM model blob")
    (version,) = struct.unpack_from("<H", data, 4)
    if version != VERSION:
        raise ModelFormatError(f"unsupported model blob version {version}")
    (klen,) = struct.unpack_from("<H", data, 6)
    kind = data[8 : 8 + klen].decode("utf-8")
    records = _parse_records(data, 8 + klen)

    if kind in ("lr", "linear_svc"):
        meta = json.loads(records["meta"])
        cls = LogisticModel if kind == "lr" else LinearSvcModel
        return cls(kind=kind, dim=meta["dim"], weights=records["weights"],
                   intercept=float(records["intercept"][0]),
                   iterations=meta["iterations"], seed=meta["seed"],
                   scaler=_load_scaler(records))
    if kind == "rbf_svc":
        meta = json.loads(records["meta"])
        return RbfSvcModel(
            kind=kind, dim=meta["dim"],
            support_vectors=records["support_vectors"],
            dual_coef=records["dual_coef"],
            intercept=float(records["intercept"][0]),
            gamma=float(records["gamma"][0]),
            platt_a=float(records["platt"][0]),
            platt_b=float(records["platt"][1]),
            iterations=meta["iterations"], seed=meta["seed"],
            scaler=_load_scaler(records))
    if kind == "rf":
        meta = json.loads(records["meta"])
        trees = [
            Tree(feature=records[f"tree{k}_feature"],
                 threshold=records[f"tree{k}_threshold"],
                 left=records[f"tree{k}_left"],
                 right=records[f"tree{k}_right"],
                 value=records[f"tree{k}_value"])
            for k in range(meta["n_trees"])
        ]
        return RandomForestModel(kind=kind, dim=meta["dim"], trees=trees,
                                 seed=meta["seed"], scaler=_load_scaler(records))
    if kind == "voting":
        meta = json.loads(records["meta"])
        members = [load_model(records[f"member{k}"])
                   for k in range(len(meta["members"]))]
        return VotingModel(kind=kind, dim=meta["dim"], members=members,
                           weights=records["weights"], seed=meta["seed"])
    if kind == "stacking":
        meta = json.loads(records["meta"])
        bases = [load_model(records[f"base{k}"])
                 for k in range(len(meta["base_kinds"]))]
        return StackingModel(kind=kind, dim=meta["dim"], bases=bases,
                             base_kinds=tuple(meta["base_kinds"]),
                             meta=load_model(records["meta_model"]),
                             seed=meta["seed"])
    raise ModelFormatError(f"unknown model kind {kind!r}")


def save_model_file(model, path) -> None:
    with open(path, "wb") as fh:
        fh.write(dump_model(model))


def load_model_file(path):
    with open(path, "rb") as fh:
        return load_model(fh.read())
