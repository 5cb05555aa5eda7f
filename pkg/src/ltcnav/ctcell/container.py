"""Versioned binary container for parameter bundles.

Layout (little endian)::

    b"LNAV" | u16 version | u32 meta_len | meta (utf-8 key=value lines)
    | u32 n_arrays | n_arrays x (u16 name_len | name | u8 ndim | ndim x u32 | float64 data)

Arrays are stored row-major as 64-bit floats.
"""
from __future__ import annotations

import io
import os
import struct

import numpy as np

from ltcnav.ctcell.params import CellKind, CellParams, TENSOR_NAMES
from ltcnav.errors import ContractViolation

MAGIC = b"LNAV"
VERSION = 1


def dumps(arrays: dict[str, np.ndarray], meta: dict[str, str] | None = None) -> bytes:
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<H", VERSION))
    meta_bytes = "".join(f"{k}={v}\n" for k, v in (meta or {}).items()).encode()
    buf.write(struct.pack("<I", len(meta_bytes)))
    buf.write(meta_bytes)
    buf.write(struct.pack("<I", len(arrays)))
    for name, arr in arrays.items():
        arr = np.ascontiguousarray(arr, dtype="<f8")
        nb = name.encode()
        buf.write(struct.pack("<H", len(nb)))
        buf.write(nb)
        buf.write(struct.pack("<B", arr.ndim))
        buf.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        buf.write(arr.tobytes(order="C"))
    return buf.getvalue()


def loads(data: bytes) -> tuple[dict[str, np.ndarray], dict[str, str]]:
    view = memoryview(data)
    if bytes(view[:4]) != MAGIC:
        raise ContractViolation("not an LNAV container (bad magic)")
    (version,) = struct.unpack_from("<H", view, 4)
    if version != VERSION:
        raise ContractViolation(f"unsupported LNAV version {version}")
    pos = 6
    (meta_len,) = struct.unpack_from("<I", view, pos)
    pos += 4
    meta = {}
    for line in bytes(view[pos:pos + meta_len]).decode().splitlines():
        key, _, value = line.partition("=")
        meta[key] = value
    pos += meta_len
    (n,) = struct.unpack_from("<I", view, pos)
    pos += 4
    arrays = {}
    for _ in range(n):
        (nl,) = struct.unpack_from("<H", view, pos)
        pos += 2
        name = bytes(view[pos:pos + nl]).decode()
        pos += nl
        (ndim,) = struct.unpack_from("<B", view, pos)
        pos += 1
        shape = struct.unpack_from(f"<{ndim}I", view, pos)
        pos += 4 * ndim
        count = int(np.prod(shape)) if ndim else 1
        arr = np.frombuffer(view, dtype="<f8", count=count, offset=pos).reshape(shape).copy()
        pos += 8 * count
        arrays[name] = arr.astype(float)
    if pos != len(data):
        raise ContractViolation("trailing bytes after LNAV payload")
    return arrays, meta


def save(path: str | os.PathLike, arrays: dict[str, np.ndarray], meta: dict[str, str] | None = None) -> None:
    with open(path, "wb") as fh:
        fh.write(dumps(arrays, meta))


def load(path: str | os.PathLike) -> tuple[dict[str, np.ndarray], dict[str, str]]:
    with open(path, "rb") as fh:
        return loads(fh.read())


def cell_to_arrays(params: CellParams, prefix: str = "cell.") -> tuple[dict, dict]:
    arrays = {prefix + k: params.tensors[k] for k in TENSOR_NAMES[params.kind]}
    if params.wiring_mask is not None:
        arrays[prefix + "wiring_mask"] = params.wiring_mask
    if params.input_mask is not None:
        arrays[prefix + "input_mask"] = params.input_mask
    for k, v in params.extra.items():
        arrays[prefix + "extra." + k] = v
    meta = {"cell_kind": params.kind.value, "state_dim": str(params.state_dim),
            "input_dim": str(params.input_dim)}
    return arrays, meta


def cell_from_arrays(arrays: dict, meta: dict, prefix: str = "cell.") -> CellParams:
    kind = CellKind(meta["cell_kind"])
    tensors = {k: arrays[prefix + k] for k in TENSOR_NAMES[kind]}
    extra = {k[len(prefix) + 6:]: v for k, v in arrays.items() if k.startswith(prefix + "extra.")}
    params = CellParams(kind, int(meta["state_dim"]), int(meta["input_dim"]), tensors,
                        wiring_mask=arrays.get(prefix + "wiring_mask"),
                        input_mask=arrays.get(prefix + "input_mask"), extra=extra)
    params.validate()
    return params


def save_cell(path, params: CellParams) -> None:
    arrays, meta = cell_to_arrays(params)
    save(path, arrays, meta)


def load_cell(path) -> CellParams:
    arrays, meta = load(path)
    return cell_from_arrays(arrays, meta)
