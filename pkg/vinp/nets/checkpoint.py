"""Parameter checkpoints.

File layout (little-endian):

    magic b"EDGC", version uint32 (= 1), record count uint32
    per record: name length uint32, UTF-8 name, rank uint32,
                rank x extent uint32, float32 payload (C order)

Besides the parameters themselves a checkpoint carries `<name>.m1` and
`<name>.m2` (Adam moments), `opt.t` (step counter, rank 0) and per batch-norm
layer `<layer>.running_mean`, `<layer>.running_var` and `<layer>.updates`.
Records follow declaration order. Counters travel as float32 like everything
else, so `opt.t` and `.updates` are exact only up to 2**24 (MAX_COUNTER).
"""
import logging
import struct
from pathlib import Path

import numpy as np

from vinp.errors import BadMagicError, ContractError, FormatError, TruncatedPayloadError, UnsupportedVersionError
from vinp.grad.norm import BatchNormState
from vinp.grad.params import ModelParams

MAGIC = b"EDGC"
VERSION = 1
HEADER = struct.Struct("<4sII")
U32 = struct.Struct("<I")
STEP_KEY = "opt.t"
BN_SUFFIXES = (".running_mean", ".running_var", ".updates")
# float32 represents every integer up to here
MAX_COUNTER = 2 ** 24


def _counter(name: str, value: int) -> np.ndarray:
    if not 0 <= value <= MAX_COUNTER:
        raise ContractError("encode_checkpoint", f"{name}={value} is outside [0, {MAX_COUNTER}]")
    return np.asarray(value)


def _records(params: ModelParams) -> list[tuple[str, np.ndarray]]:
    out = []
    for name, t in params.tensors.items():
        out.append((name, t.data))
    for name in params.tensors:
        if name in params.m1:
            out.append((f"{name}.m1", params.m1[name]))
            out.append((f"{name}.m2", params.m2[name]))
    out.append((STEP_KEY, _counter(STEP_KEY, params.t)))
    for layer, state in params.bn.items():
        if state.initialized():
            out.append((f"{layer}.running_mean", state.running_mean))
            out.append((f"{layer}.running_var", state.running_var))
        out.append((f"{layer}.updates", _counter(f"{layer}.updates", state.updates)))
    return out


def encode_checkpoint(params: ModelParams) -> bytes:
    """Serializes parameters, Adam moments and batch-norm state.

    Raises:
        ContractError: If the step counter or a batch-norm update count exceeds MAX_COUNTER.
    """
    records = _records(params)
    chunks = [HEADER.pack(MAGIC, VERSION, len(records))]
    for name, arr in records:
        raw = name.encode("utf-8")
        arr = np.asarray(arr, dtype="<f4", order="C")
        chunks.append(U32.pack(len(raw)))
        chunks.append(raw)
        chunks.append(U32.pack(arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        chunks.append(arr.tobytes())
    return b"".join(chunks)


class _Reader:
    def __init__(self, blob: bytes, path: str):
        self.blob = blob
        self.pos = 0
        self.path = path

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.blob):
            raise TruncatedPayloadError(f"checkpoint ends inside {what}", self.path)
        chunk = self.blob[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def u32(self, what: str) -> int:
        return U32.unpack(self.take(4, what))[0]


def _read_counter(arrays: dict[str, np.ndarray], name: str, path: str) -> int:
    value = arrays.get(name)
    if value is None:
        return 0
    if value.shape != () or value < 0 or value != np.floor(value):
        raise FormatError(f"{name} is not a non-negative scalar count", path)
    return int(value)


def decode_checkpoint(blob: bytes, path: str = None, network: str = "", bn_momentum: float = 0.1) -> ModelParams:
    """Parses a checkpoint image back into parameters, moments and batch-norm state.

    Raises:
        TruncatedPayloadError: If a record runs past the end.
        BadMagicError: If the magic is not b"EDGC".
        UnsupportedVersionError: For a version other than 1.
        FormatError: For a bad name, a duplicate or orphan record, a malformed counter, or trailing bytes.
    """
    if len(blob) < HEADER.size:
        raise TruncatedPayloadError(f"header needs {HEADER.size} bytes, got {len(blob)}", path)
    magic, version, count = HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise BadMagicError(f"bad magic {magic!r}, expected {MAGIC!r}", path)
    if version != VERSION:
        raise UnsupportedVersionError(f"unsupported version {version}", path)

    reader = _Reader(blob, path)
    reader.pos = HEADER.size
    arrays: dict[str, np.ndarray] = {}
    for _ in range(count):
        size = reader.u32("name length")
        try:
            name = reader.take(size, "name").decode("utf-8")
        except UnicodeDecodeError:
            raise FormatError("record name is not UTF-8", path)
        rank = reader.u32(f"{name} rank")
        shape = struct.unpack(f"<{rank}I", reader.take(4 * rank, f"{name} extents"))
        n = int(np.prod(shape)) if rank else 1
        data = np.frombuffer(reader.take(4 * n, f"{name} payload"), dtype="<f4").reshape(shape).astype(np.float32)
        if name in arrays:
            raise FormatError(f"duplicate record {name!r}", path)
        arrays[name] = data
    if reader.pos != len(blob):
        raise FormatError(f"{len(blob) - reader.pos} trailing bytes after {count} records", path)

    params = ModelParams(network)
    layers = [name[:-len(".updates")] for name in arrays if name.endswith(".updates")]
    for name, data in arrays.items():
        if name == STEP_KEY or name.endswith((".m1", ".m2")) or any(name.endswith(s) for s in BN_SUFFIXES):
            continue
        params.add(name, data)
    for name in params.names():
        if f"{name}.m1" in arrays:
            params.m1[name] = arrays[f"{name}.m1"]
            params.m2[name] = arrays[f"{name}.m2"]
    params.t = _read_counter(arrays, STEP_KEY, path)
    for layer in layers:
        state = BatchNormState(momentum=bn_momentum, updates=_read_counter(arrays, f"{layer}.updates", path))
        if f"{layer}.running_mean" in arrays:
            state.running_mean = arrays[f"{layer}.running_mean"].astype(np.float64)
            state.running_var = arrays[f"{layer}.running_var"].astype(np.float64)
        params.bn[layer] = state

    orphans = [k[:-3] for k in arrays if k.endswith((".m1", ".m2")) and k[:-3] not in params]
    if orphans:
        raise FormatError(f"moment records without a parameter: {sorted(set(orphans))}", path)
    return params


def write_checkpoint(path: str | Path, params: ModelParams) -> None:
    Path(path).write_bytes(encode_checkpoint(params))
    logging.info(f"vinp: wrote {params.network or 'params'} checkpoint {path} ({len(params)} tensors)")


def read_checkpoint(path: str | Path, network: str = "", bn_momentum: float = 0.1) -> ModelParams:
    return decode_checkpoint(Path(path).read_bytes(), str(path), network, bn_momentum)
