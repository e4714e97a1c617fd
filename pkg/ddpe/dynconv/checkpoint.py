# Copyright 2024 The ddpe Contributors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""
Checkpoints are flat little-endian binaries:

* the magic bytes ``DDPE``
* the format version, ``u32``
* the length of the network configuration, ``u32``, followed by the
  configuration as canonical JSON (see :meth:`NetworkConfig.dumps`)
* for every parameter, in :meth:`Model.named_parameters` order: the name
  length (``u32``), the UTF-8 name, the rank (``u32``), one ``u64`` per
  extent and the values as ``f4``.
"""
import io
import json
import struct
from typing import BinaryIO, Dict, Tuple, Union

import numpy as np

from .network import Model, NetworkConfig
from ..common import AnyPath

MAGIC = b"DDPE"
FORMAT_VERSION = 1


class CheckpointError(ValueError):
    """
    A checkpoint is truncated, has an unknown format or does not match the
    network it describes.
    """

    pass


def _write_u32(stream: BinaryIO, value: int):
    stream.write(struct.pack("<I", value))


def _read_exact(stream: BinaryIO, count: int) -> bytes:
    data = stream.read(count)
    if len(data) != count:
        raise CheckpointError(
            f"Checkpoint truncated: expected {count} bytes, got {len(data)}"
        )
    return data


def _read_u32(stream: BinaryIO) -> int:
    return struct.unpack("<I", _read_exact(stream, 4))[0]


def dump_checkpoint(model: Model, stream: BinaryIO):
    stream.write(MAGIC)
    _write_u32(stream, FORMAT_VERSION)
    blob = model.config.dumps().encode("utf8")
    _write_u32(stream, len(blob))
    stream.write(blob)
    for name, parameter in model.named_parameters().items():
        encoded = name.encode("utf8")
        _write_u32(stream, len(encoded))
        stream.write(encoded)
        _write_u32(stream, parameter.ndim)
        for extent in parameter.shape:
            stream.write(struct.pack("<Q", extent))
        stream.write(np.ascontiguousarray(parameter.data, dtype="<f4").tobytes())


def read_checkpoint(stream: BinaryIO) -> Tuple[NetworkConfig, Dict[str, np.ndarray]]:
    """
    :returns: The network configuration and every stored parameter, in file
        order.
    """
    if _read_exact(stream, 4) != MAGIC:
        raise CheckpointError("Not a ddpe checkpoint: bad magic bytes")
    version = _read_u32(stream)
    if version != FORMAT_VERSION:
        raise CheckpointError(f"Unsupported checkpoint format version {version}")
    blob = _read_exact(stream, _read_u32(stream))
    try:
        config = NetworkConfig.from_dict(json.loads(blob.decode("utf8")))
    except (ValueError, TypeError) as e:
        raise CheckpointError(f"Invalid network configuration in checkpoint: {e}")
    state: Dict[str, np.ndarray] = {}
    while header := stream.read(4):
        if len(header) != 4:
            raise CheckpointError("Checkpoint truncated inside a parameter header")
        name = _read_exact(stream, struct.unpack("<I", header)[0]).decode("utf8")
        rank = _read_u32(stream)
        shape = tuple(
            struct.unpack("<Q", _read_exact(stream, 8))[0] for _ in range(rank)
        )
        count = int(np.prod(shape, dtype=np.int64))
        data = np.frombuffer(_read_exact(stream, 4 * count), dtype="<f4")
        state[name] = data.reshape(shape).copy()
    return config, state


def save_checkpoint(model: Model, path: AnyPath):
    with open(path, "wb") as f:
        dump_checkpoint(model, f)


def load_checkpoint(source: Union[AnyPath, bytes]) -> Model:
    """
    :param source: A path, or the bytes of a checkpoint.
    :returns: A model with the stored configuration and parameters.
    :raises CheckpointError: If the checkpoint is malformed or describes an
        invalid network.
    """
    if isinstance(source, bytes):
        origin = "<bytes>"
        config, state = read_checkpoint(io.BytesIO(source))
    else:
        origin = str(source)
        with open(source, "rb") as f:
            config, state = read_checkpoint(f)
    try:
        model = Model(config, np.random.default_rng(0))
        model.load_state_dict(state)
    except ValueError as e:
        raise CheckpointError(
            f"Checkpoint '{origin}' does not describe a valid network: {e}"
        )
    return model


def checkpoint_bytes(model: Model) -> bytes:
    stream = io.BytesIO()
    dump_checkpoint(model, stream)
    return stream.getvalue()
