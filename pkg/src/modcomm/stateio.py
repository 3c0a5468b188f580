"""Binary state container: one JSON header line, then a little-endian payload.

The header records the kind (``pure``, ``density`` or ``covariance``), the
layout and the payload shape.  Complex data is stored as float64
(real, imag) pairs, row-major.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .dense import DensityOp, PureState, SiteLayout
from .gaussian import MajoranaCovariance

MAGIC = "modcomm-state/1"


def _label(s):
    return list(s) if isinstance(s, tuple) else s


def _unlabel(s):
    return tuple(_unlabel(v) for v in s) if isinstance(s, list) else s


def dumps(obj) -> bytes:
    if isinstance(obj, PureState):
        kind, data, layout = "pure", obj.amplitudes, obj.layout.to_dict()
    elif isinstance(obj, DensityOp):
        kind, data, layout = "density", obj.matrix, obj.layout.to_dict()
    elif isinstance(obj, MajoranaCovariance):
        kind, data = "covariance", obj.gamma
        layout = {"modes": [_label(m) for m in obj.modes]}
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")
    dtype = "<f8" if kind == "covariance" else "<c16"
    header = {"format": MAGIC, "kind": kind, "layout": layout,
              "shape": list(data.shape), "dtype": dtype}
    return (json.dumps(header, sort_keys=True) + "\n").encode() + \
        np.ascontiguousarray(data, dtype=dtype).tobytes()


def loads(blob: bytes):
    head, _, payload = blob.partition(b"\n")
    header = json.loads(head)
    if header.get("format") != MAGIC:
        raise ValueError("not a modcomm state file")
    data = np.frombuffer(payload, dtype=header["dtype"]).reshape(header["shape"])
    lay = header["layout"]
    if header["kind"] == "covariance":
        return MajoranaCovariance(data.astype(float), [_unlabel(m) for m in lay["modes"]])
    layout = SiteLayout(tuple(_unlabel(s) for s in lay["sites"]), tuple(lay["dims"]),
                        lay["statistics"])
    if header["kind"] == "pure":
        return PureState(data.astype(complex), layout)
    return DensityOp(data.astype(complex), layout)


def save(obj, path: str | Path) -> None:
    Path(path).write_bytes(dumps(obj))


def load(path: str | Path):
    return loads(Path(path).read_bytes())
