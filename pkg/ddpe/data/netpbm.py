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
Binary Netpbm images: ``P5`` (grayscale) and ``P6`` (RGB) with at most 8
bits per sample.
"""
import os
from typing import List, Tuple

import numpy as np

from ..common import AnyPath


class NetpbmError(ValueError):
    """
    A Netpbm file could not be parsed.

    :param path: The offending file.
    :param message: What is wrong with it.
    """

    def __init__(self, path: AnyPath, message: str) -> None:
        self.path = str(path)
        super().__init__(f"{path}: {message}")


def _parse_header(path: AnyPath, data: bytes) -> Tuple[List[bytes], int]:
    tokens: List[bytes] = []
    i = 0
    while len(tokens) < 4:
        if i >= len(data):
            raise NetpbmError(path, "header ends prematurely")
        byte = data[i : i + 1]
        if byte == b"#":
            end = data.find(b"\n", i)
            if end == -1:
                raise NetpbmError(path, "header ends inside a comment")
            i = end + 1
        elif byte.isspace():
            i += 1
        else:
            start = i
            while i < len(data) and not data[i : i + 1].isspace() and data[i : i + 1] != b"#":
                i += 1
            tokens.append(data[start:i])
    if i >= len(data) or not data[i : i + 1].isspace():
        raise NetpbmError(path, "missing whitespace after the header")
    return tokens, i + 1


def read_netpbm(path: AnyPath) -> np.ndarray:
    """
    :returns: ``C×H×W`` values in ``[0, 1]``, ``C`` being 1 for ``P5`` and 3
        for ``P6``.
    :raises NetpbmError: On malformed files.
    """
    with open(path, "rb") as f:
        data = f.read()
    tokens, offset = _parse_header(path, data)
    magic = tokens[0]
    if magic == b"P5":
        channels = 1
    elif magic == b"P6":
        channels = 3
    else:
        raise NetpbmError(path, f"unsupported magic number {magic!r}")
    try:
        width, height, maxval = (int(token) for token in tokens[1:4])
    except ValueError:
        raise NetpbmError(path, f"non-numeric header fields {tokens[1:4]}")
    if width < 1 or height < 1:
        raise NetpbmError(path, f"invalid dimensions {width}×{height}")
    if not (0 < maxval < 256):
        raise NetpbmError(path, f"unsupported maxval {maxval}")
    expected = width * height * channels
    payload = data[offset : offset + expected]
    if len(payload) != expected:
        raise NetpbmError(
            path, f"expected {expected} bytes of pixel data, got {len(payload)}"
        )
    pixels = np.frombuffer(payload, dtype=np.uint8).reshape(height, width, channels)
    return (pixels.transpose(2, 0, 1).astype(np.float64) / maxval).astype(np.float32)


def write_netpbm(path: AnyPath, image: np.ndarray):
    """
    Writes a ``C×H×W`` image in ``[0, 1]`` as ``P5`` (``C == 1``) or ``P6``
    (``C == 3``), rounding to the nearest of 256 levels.
    """
    if image.ndim != 3 or image.shape[0] not in (1, 3):
        raise ValueError(f"Cannot write an image of shape {image.shape} as Netpbm")
    channels, height, width = image.shape
    magic = "P5" if channels == 1 else "P6"
    levels = np.rint(np.clip(image, 0, 1) * 255).astype(np.uint8)
    with open(path, "wb") as f:
        f.write(f"{magic}\n{width} {height}\n255\n".encode("ascii"))
        f.write(levels.transpose(1, 2, 0).tobytes())


def is_netpbm_file(path: str) -> bool:
    return os.path.splitext(path)[1].lower() in (".pgm", ".ppm")
