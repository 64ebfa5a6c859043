"""Grid-stack container: a small binary format for gridded channel stacks.

Layout: one line of JSON (magic "GSTK1", dims, channel names, georeference,
dtype tag, free-form metadata) terminated by a newline, followed by the raw
payload: channel-sequential, row-major, little-endian float64. Round trips
are bit-identical, including NaN payloads, because the payload is written
and read as raw bytes. Headers carry no timestamps so regenerating a file
from the same inputs reproduces it byte for byte.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .lattice import LatticeGrid
from .sar import ParamFields

MAGIC = "GSTK1"
DTYPE_TAG = "f64le"

PARAM_CHANNELS = ("log_kappa2", "rho", "theta")


@dataclass(frozen=True)
class GridStack:
    """In-memory stack of equally shaped 2-D channels.

    values has shape (channels, h, w), float64. origin is the (x, y) of
    the first (row 0, col 0) pixel center; spacing is (dx, dy).
    """

    channels: tuple
    values: np.ndarray
    origin: tuple = (0.0, 0.0)
    spacing: tuple = (1.0, 1.0)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        vals = np.ascontiguousarray(np.asarray(self.values, dtype=np.float64))
        names = tuple(str(c) for c in self.channels)
        if vals.ndim != 3:
            raise ValidationError(f"stack values must be 3-D (c,h,w), got {vals.shape}")
        if len(names) != vals.shape[0]:
            raise ValidationError(
                f"{len(names)} channel names for {vals.shape[0]} channels"
            )
        if len(set(names)) != len(names):
            raise ValidationError(f"duplicate channel names in {names}")
        object.__setattr__(self, "channels", names)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))
        object.__setattr__(self, "spacing", (float(self.spacing[0]), float(self.spacing[1])))

    @property
    def h(self) -> int:
        return self.values.shape[1]

    @property
    def w(self) -> int:
        return self.values.shape[2]

    def channel(self, name: str) -> np.ndarray:
        """2-D view of one channel by name."""
        if name not in self.channels:
            raise ValidationError(f"no channel {name!r}; have {self.channels}")
        return self.values[self.channels.index(name)]


def write_gridstack(stack: GridStack, path) -> None:
    """Serialize a GridStack; the write is atomic (temp file + rename)."""
    header = {
        "magic": MAGIC,
        "dtype": DTYPE_TAG,
        "h": stack.h,
        "w": stack.w,
        "channels": list(stack.channels),
        "origin": list(stack.origin),
        "spacing": list(stack.spacing),
        "metadata": stack.metadata,
    }
    try:
        head = json.dumps(header, sort_keys=True, separators=(",", ":"))
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"stack metadata is not JSON-serializable: {exc}") from exc
    payload = stack.values.astype("<f8", copy=False).tobytes(order="C")
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(head.encode("utf-8"))
        fh.write(b"\n")
        fh.write(payload)
    os.replace(tmp, path)


def read_gridstack(path) -> GridStack:
    """Read a GridStack written by write_gridstack."""
    with open(path, "rb") as fh:
        blob = fh.read()
    nl = blob.find(b"\n")
    if nl < 0:
        raise ValidationError(f"{path}: missing header line")
    try:
        header = json.loads(blob[:nl].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ValidationError(f"{path}: unreadable header ({exc})") from exc
    if header.get("magic") != MAGIC:
        raise ValidationError(f"{path}: bad magic {header.get('magic')!r}")
    if header.get("dtype") != DTYPE_TAG:
        raise ValidationError(f"{path}: unsupported dtype {header.get('dtype')!r}")
    h, w = int(header["h"]), int(header["w"])
    channels = [str(c) for c in header["channels"]]
    payload = blob[nl + 1 :]
    expect = len(channels) * h * w * 8
    if len(payload) != expect:
        raise ValidationError(
            f"{path}: payload is {len(payload)} bytes, header implies {expect}"
        )
    vals = np.frombuffer(payload, dtype="<f8").reshape(len(channels), h, w).copy()
    return GridStack(
        channels=tuple(channels),
        values=vals,
        origin=tuple(header.get("origin", (0.0, 0.0))),
        spacing=tuple(header.get("spacing", (1.0, 1.0))),
        metadata=header.get("metadata", {}),
    )


def params_to_stack(grid: LatticeGrid, params: ParamFields, metadata: dict | None = None) -> GridStack:
    """Pack (kappa2, rho, theta) node fields as a 3-channel stack.

    kappa2 is stored on the log scale (channel "log_kappa2"); the grid is
    the full padded lattice, row-major.
    """
    if params.m != grid.m:
        raise ValidationError(f"{params.m} parameter nodes for a {grid.m}-node lattice")
    shape = (grid.nrows, grid.ncols)
    vals = np.stack(
        [
            np.log(params.kappa2).reshape(shape),
            params.rho.reshape(shape),
            params.theta.reshape(shape),
        ]
    )
    x00, y00 = grid.node_xy(0, 0)
    return GridStack(
        channels=PARAM_CHANNELS,
        values=vals,
        origin=(float(x00), float(y00)),
        spacing=(grid.dx, grid.dy),
        metadata=metadata or {},
    )


def params_from_stack(stack: GridStack) -> ParamFields:
    """Inverse of params_to_stack (kappa2 exponentiated back)."""
    for name in PARAM_CHANNELS:
        if name not in stack.channels:
            raise ValidationError(f"parameter stack lacks channel {name!r}")
    return ParamFields(
        kappa2=np.exp(stack.channel("log_kappa2").ravel()),
        rho=stack.channel("rho").ravel().copy(),
        theta=stack.channel("theta").ravel().copy(),
    )
