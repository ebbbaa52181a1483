"""Binary checkpoints for model parameters and their averaged mirror.

Format (all integers little-endian):

  magic    8 bytes  b"WBCHKPT\\x00"
  version  uint32   currently 1
  header   uint32 x 5: input_len, input_features, output_len,
                       output_features, n_layers
  layers   per layer uint32 x 3: out_dim, in_dim, activation code
                       (index into nn.ACTIVATIONS)
  mirror   uint32 has_mirror (0/1), float64 decay
  payload  float64 little-endian tensors in (w0, b0, w1, b1, ...) order,
           row-major; source network first, then the mirror target if
           present

The byte count is fully determined by the header, so truncation and
trailing garbage are both detected.  Round-trips are bit-exact.
"""

from __future__ import annotations

import struct

import numpy as np

from .ema import EmaMirror
from .errors import DataError
from .nn import ACTIVATIONS, ModelParams

MAGIC = b"WBCHKPT\x00"
VERSION = 1


def _params_payload(params: ModelParams) -> bytes:
    return b"".join(np.ascontiguousarray(t, dtype="<f8").tobytes() for t in params.tensors())


def checkpoint_save(path, params: ModelParams, mirror: EmaMirror | None = None) -> None:
    """Write params (and optionally its mirror) to path in one blob."""
    head = [MAGIC, struct.pack("<I", VERSION)]
    head.append(
        struct.pack(
            "<5I",
            params.input_shape[0],
            params.input_shape[1],
            params.output_shape[0],
            params.output_shape[1],
            params.n_layers,
        )
    )
    for w, act in zip(params.weights, params.activations):
        head.append(struct.pack("<3I", w.shape[0], w.shape[1], ACTIVATIONS.index(act)))
    if mirror is None:
        head.append(struct.pack("<Id", 0, 0.0))
    else:
        head.append(struct.pack("<Id", 1, mirror.decay))
    blob = b"".join(head) + _params_payload(params)
    if mirror is not None:
        blob += _params_payload(mirror.target)
    try:
        with open(path, "wb") as fh:
            fh.write(blob)
    except OSError as exc:
        raise DataError(f"cannot write checkpoint {path}: {exc}") from None


class _Cursor:
    def __init__(self, blob: bytes, path):
        self.blob = blob
        self.pos = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.blob):
            raise DataError(f"{self.path}: truncated checkpoint")
        out = self.blob[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def _read_tensors(cur: _Cursor, shapes: list[tuple[int, ...]]) -> list[np.ndarray]:
    out = []
    for shape in shapes:
        n = int(np.prod(shape))
        raw = cur.take(8 * n)
        out.append(np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(shape))
    return out


def checkpoint_load(path) -> tuple[ModelParams, EmaMirror | None]:
    """Read a checkpoint; errors name the path and what was wrong."""
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise DataError(f"cannot read checkpoint {path}: {exc}") from None
    cur = _Cursor(blob, path)
    if cur.take(len(MAGIC)) != MAGIC:
        raise DataError(f"{path}: not a checkpoint file (bad magic)")
    (version,) = cur.unpack("<I")
    if version != VERSION:
        raise DataError(f"{path}: unsupported checkpoint version {version}")
    in_len, in_feat, out_len, out_feat, n_layers = cur.unpack("<5I")
    shapes = []
    activations = []
    for _ in range(n_layers):
        out_dim, in_dim, act_code = cur.unpack("<3I")
        if act_code >= len(ACTIVATIONS):
            raise DataError(f"{path}: unknown activation code {act_code}")
        shapes.extend([(out_dim, in_dim), (out_dim,)])
        activations.append(ACTIVATIONS[act_code])
    has_mirror, decay = cur.unpack("<Id")
    tensors = _read_tensors(cur, shapes)
    params = ModelParams(
        weights=tensors[0::2],
        biases=tensors[1::2],
        activations=activations,
        input_shape=(in_len, in_feat),
        output_shape=(out_len, out_feat),
    )
    mirror = None
    if has_mirror:
        target_tensors = _read_tensors(cur, shapes)
        target = params.with_tensors(target_tensors)
        mirror = EmaMirror(target=target, decay=decay)
    if cur.pos != len(blob):
        raise DataError(f"{path}: {len(blob) - cur.pos} trailing bytes after checkpoint payload")
    return params, mirror
