"""HCF container format: per-image multi-scale feature maps plus a binary mask.

One file holds one image's tensors.  Byte layout (all little-endian):

    magic   4 bytes  ASCII "HCF1"
    version u16      currently 1
    image_id         u16 length + UTF-8 bytes
    tensor_count     u32
    per tensor:
        name         u16 length + UTF-8 ("tap0".."tapK" in depth order, "mask")
        dtype        u8   0 = float32, 1 = uint8
        rank         u8
        dims         u32 each (taps: [C, H, W]; mask: [H, W])
        payload      raw row-major bytes

Taps are written first, in order, then the mask.  Writing is deterministic:
the same sample always produces identical bytes.  The original image size is
informative metadata and is not serialized; readers report the mask size.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

MAGIC = b"HCF1"
VERSION = 1
DTYPE_F32 = 0
DTYPE_U8 = 1

_DTYPES = {DTYPE_F32: np.dtype("<f4"), DTYPE_U8: np.dtype("<u1")}


class FormatError(ValueError):
    """Stream does not parse as an HCF container."""


class UnsupportedError(ValueError):
    """Container uses a version or dtype this reader does not know."""


class SampleValidationError(ValueError):
    """Parsed container violates sample invariants."""


@dataclass(eq=False)
class Sample:
    """One image's tap feature maps and ground-truth mask.

    ``taps`` are (C, H, W) float32 arrays in network depth order; ``mask`` is
    an (H, W) uint8 grid of {0, 1} at the pipeline input resolution.
    ``source_h``/``source_w`` record the pre-resize image size when known.
    """

    image_id: str
    taps: list[np.ndarray]
    mask: np.ndarray
    source_h: int = 0
    source_w: int = 0

    def __post_init__(self):
        self.taps = [np.ascontiguousarray(t, dtype=np.float32) for t in self.taps]
        self.mask = np.ascontiguousarray(self.mask, dtype=np.uint8)
        if self.source_h <= 0:
            self.source_h = int(self.mask.shape[0])
        if self.source_w <= 0:
            self.source_w = int(self.mask.shape[1])

    def __eq__(self, other):
        if not isinstance(other, Sample):
            return NotImplemented
        return (
            self.image_id == other.image_id
            and self.source_h == other.source_h
            and self.source_w == other.source_w
            and len(self.taps) == len(other.taps)
            and all(
                a.shape == b.shape and np.array_equal(a, b)
                for a, b in zip(self.taps, other.taps)
            )
            and self.mask.shape == other.mask.shape
            and np.array_equal(self.mask, other.mask)
        )

    def check(self) -> None:
        """Raise SampleValidationError on any intrinsic invariant violation."""
        problems = self._intrinsic_violations()
        if problems:
            raise SampleValidationError("; ".join(problems))

    def _intrinsic_violations(self) -> list[str]:
        out = []
        if self.mask.ndim != 2:
            out.append(f"mask must be 2-D, got shape {self.mask.shape}")
            return out
        mh, mw = self.mask.shape
        if mh < 1 or mw < 1:
            out.append(f"mask dimensions must be positive, got {self.mask.shape}")
        bad = np.setdiff1d(np.unique(self.mask), [0, 1])
        if bad.size:
            out.append(f"mask contains non-binary values {bad.tolist()}")
        for k, tap in enumerate(self.taps):
            if tap.ndim != 3:
                out.append(f"tap{k} must be 3-D (C, H, W), got shape {tap.shape}")
                continue
            c, th, tw = tap.shape
            if min(c, th, tw) < 1:
                out.append(f"tap{k} dimensions must be positive, got {tap.shape}")
                continue
            if mh % th != 0 or mw % tw != 0:
                out.append(
                    f"tap{k} size {th}x{tw} does not evenly divide mask size {mh}x{mw}"
                )
            if not np.isfinite(tap).all():
                out.append(f"tap{k} contains non-finite values")
        return out


def _pack_str(s: str) -> bytes:
    raw = s.encode("utf-8")
    if len(raw) > 0xFFFF:
        raise ValueError(f"string too long for u16 length prefix: {len(raw)} bytes")
    return struct.pack("<H", len(raw)) + raw


def _tensor_record(name: str, arr: np.ndarray, dtype_code: int) -> bytes:
    dims = struct.pack(f"<{arr.ndim}I", *arr.shape)
    head = _pack_str(name) + struct.pack("<BB", dtype_code, arr.ndim) + dims
    payload = np.ascontiguousarray(arr, dtype=_DTYPES[dtype_code]).tobytes()
    return head + payload


def write_container(sample: Sample, destination) -> int:
    """Serialize ``sample`` to a binary file object; returns bytes written."""
    sample.check()
    parts = [MAGIC, struct.pack("<H", VERSION), _pack_str(sample.image_id)]
    parts.append(struct.pack("<I", len(sample.taps) + 1))
    for k, tap in enumerate(sample.taps):
        parts.append(_tensor_record(f"tap{k}", tap, DTYPE_F32))
    parts.append(_tensor_record("mask", sample.mask, DTYPE_U8))
    blob = b"".join(parts)
    destination.write(blob)
    return len(blob)


def write_container_file(sample: Sample, path) -> int:
    with open(path, "wb") as fh:
        return write_container(sample, fh)


class _Cursor:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise FormatError(
                f"truncated container: needed {n} bytes for {what}, "
                f"{len(self.data) - self.pos} remain"
            )
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def u8(self, what):
        return self.take(1, what)[0]

    def u16(self, what):
        return struct.unpack("<H", self.take(2, what))[0]

    def u32(self, what):
        return struct.unpack("<I", self.take(4, what))[0]

    def string(self, what):
        n = self.u16(what + " length")
        return self.take(n, what).decode("utf-8")


def read_container(source) -> Sample:
    """Parse an HCF byte stream back into a Sample (inverse of write)."""
    data = source.read() if hasattr(source, "read") else bytes(source)
    cur = _Cursor(data)

    if cur.take(4, "magic") != MAGIC:
        raise FormatError("bad magic: not an HCF container")
    version = cur.u16("version")
    if version != VERSION:
        raise UnsupportedError(f"unsupported container version {version}")
    image_id = cur.string("image_id")
    count = cur.u32("tensor_count")

    tensors: dict[str, np.ndarray] = {}
    order: list[str] = []
    for _ in range(count):
        name = cur.string("tensor name")
        dtype_code = cur.u8("dtype")
        if dtype_code not in _DTYPES:
            raise UnsupportedError(f"unknown dtype code {dtype_code} for {name!r}")
        rank = cur.u8("rank")
        dims = [cur.u32(f"{name} dim {i}") for i in range(rank)]
        n_items = int(np.prod(dims, dtype=np.int64)) if dims else 1
        dt = _DTYPES[dtype_code]
        payload = cur.take(n_items * dt.itemsize, f"{name} payload")
        if name in tensors:
            raise FormatError(f"duplicate tensor name {name!r}")
        tensors[name] = np.frombuffer(payload, dtype=dt).reshape(dims).copy()
        order.append(name)
    if cur.pos != len(data):
        raise FormatError(f"{len(data) - cur.pos} trailing bytes after last tensor")

    if "mask" not in tensors:
        raise FormatError("container has no mask tensor")
    tap_names = [n for n in order if n != "mask"]
    expected = [f"tap{k}" for k in range(len(tap_names))]
    if tap_names != expected:
        raise FormatError(f"tap tensors misnamed or out of order: {tap_names}")
    mask = tensors["mask"]
    if mask.ndim != 2:
        raise SampleValidationError(f"mask rank {mask.ndim} != 2")
    for name in tap_names:
        if tensors[name].ndim != 3:
            raise SampleValidationError(f"{name} rank {tensors[name].ndim} != 3")

    sample = Sample(image_id=image_id, taps=[tensors[n] for n in tap_names], mask=mask)
    sample.check()
    return sample


def read_container_file(path) -> Sample:
    with open(path, "rb") as fh:
        return read_container(fh)


def read_header(path) -> dict:
    """Cheap metadata peek: image_id and tensor shapes (payloads skipped)."""
    with open(path, "rb") as fh:
        if fh.read(4) != MAGIC:
            raise FormatError(f"{path}: not an HCF container")
        version = struct.unpack("<H", fh.read(2))[0]
        if version != VERSION:
            raise UnsupportedError(f"{path}: unsupported version {version}")
        id_len = struct.unpack("<H", fh.read(2))[0]
        image_id = fh.read(id_len).decode("utf-8")
        count = struct.unpack("<I", fh.read(4))[0]
        shapes: dict[str, tuple] = {}
        for _ in range(count):
            name_len = struct.unpack("<H", fh.read(2))[0]
            name = fh.read(name_len).decode("utf-8")
            dtype_code, rank = struct.unpack("<BB", fh.read(2))
            dims = struct.unpack(f"<{rank}I", fh.read(4 * rank))
            shapes[name] = dims
            dt = _DTYPES.get(dtype_code)
            if dt is None:
                raise UnsupportedError(f"{path}: unknown dtype code {dtype_code}")
            fh.seek(int(np.prod(dims, dtype=np.int64)) * dt.itemsize, 1)
        return {"image_id": image_id, "shapes": shapes}


def read_mask(path) -> np.ndarray:
    """Read only the mask tensor, seeking past tap payloads."""
    with open(path, "rb") as fh:
        if fh.read(4) != MAGIC:
            raise FormatError(f"{path}: not an HCF container")
        version = struct.unpack("<H", fh.read(2))[0]
        if version != VERSION:
            raise UnsupportedError(f"{path}: unsupported version {version}")
        id_len = struct.unpack("<H", fh.read(2))[0]
        fh.seek(id_len, 1)
        count = struct.unpack("<I", fh.read(4))[0]
        for _ in range(count):
            name_len = struct.unpack("<H", fh.read(2))[0]
            name = fh.read(name_len).decode("utf-8")
            dtype_code, rank = struct.unpack("<BB", fh.read(2))
            dims = struct.unpack(f"<{rank}I", fh.read(4 * rank))
            dt = _DTYPES.get(dtype_code)
            if dt is None:
                raise UnsupportedError(f"{path}: unknown dtype code {dtype_code}")
            n_bytes = int(np.prod(dims, dtype=np.int64)) * dt.itemsize
            if name == "mask":
                payload = fh.read(n_bytes)
                if len(payload) != n_bytes:
                    raise FormatError(f"{path}: truncated mask payload")
                return np.frombuffer(payload, dtype=dt).reshape(dims).copy()
            fh.seek(n_bytes, 1)
    raise FormatError(f"{path}: container has no mask tensor")


def validate_sample(sample: Sample, cfg) -> list[str]:
    """Check a sample against a hypercolumn configuration.

    Returns human-readable violation strings (empty list = valid).  ``cfg``
    needs input_h, input_w, expected_taps and expected_channels attributes.
    """
    problems = sample._intrinsic_violations()
    mh, mw = sample.mask.shape if sample.mask.ndim == 2 else (0, 0)
    if (mh, mw) != (cfg.input_h, cfg.input_w):
        problems.append(
            f"mask is {mh}x{mw}, configured input is {cfg.input_h}x{cfg.input_w}"
        )
    if len(sample.taps) != cfg.expected_taps:
        problems.append(
            f"sample has {len(sample.taps)} taps, expected {cfg.expected_taps}"
        )
    total_c = sum(t.shape[0] for t in sample.taps if t.ndim == 3)
    if total_c != cfg.expected_channels:
        problems.append(
            f"taps sum to {total_c} channels, expected {cfg.expected_channels}"
        )
    for k, tap in enumerate(sample.taps):
        if tap.ndim != 3:
            continue
        _, th, tw = tap.shape
        if th > cfg.input_h or tw > cfg.input_w:
            problems.append(
                f"tap{k} size {th}x{tw} exceeds input {cfg.input_h}x{cfg.input_w}"
            )
        elif cfg.input_h % th != 0 or cfg.input_w % tw != 0:
            problems.append(
                f"tap{k} size {th}x{tw} does not evenly divide input "
                f"{cfg.input_h}x{cfg.input_w}"
            )
    return problems
