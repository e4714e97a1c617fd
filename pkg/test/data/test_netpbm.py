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
import os

import numpy as np
import pytest
from pyfakefs.fake_filesystem_unittest import Patcher


def test_read_p5():
    from ddpe.data import read_netpbm

    with Patcher() as patcher:
        patcher.fs.create_file(
            "/img.pgm", contents=b"P5 2 2 255\n" + bytes([0, 255, 128, 64])
        )
        image = read_netpbm("/img.pgm")
    assert image.shape == (1, 2, 2), "P5 images have one channel"
    assert np.allclose(image.reshape(-1), [0, 1, 128 / 255, 64 / 255], atol=1e-7)


def test_read_comments_and_p6():
    from ddpe.data import read_netpbm

    with Patcher() as patcher:
        patcher.fs.create_file(
            "/img.ppm",
            contents=b"P6\n# a comment\n1 1\n255\n" + bytes([255, 0, 51]),
        )
        image = read_netpbm("/img.ppm")
    assert image.shape == (3, 1, 1), "P6 images have three channels"
    assert np.allclose(image.reshape(-1), [1, 0, 0.2], atol=1e-7)


@pytest.mark.parametrize(
    "contents,message",
    [
        (b"P3 1 1 255\n\x00", "unsupported magic"),
        (b"P5 1 x 255\n\x00", "non-numeric"),
        (b"P5 1 1 65535\n\x00\x00", "maxval"),
        (b"P5 2 2 255\n\x00", "bytes of pixel data"),
        (b"P5 2", "prematurely"),
    ],
)
def test_read_malformed(contents: bytes, message: str):
    from ddpe.data import NetpbmError, read_netpbm

    with Patcher() as patcher:
        patcher.fs.create_file("/bad.pgm", contents=contents)
        with pytest.raises(NetpbmError, match=message) as e:
            read_netpbm("/bad.pgm")
    assert e.value.path == "/bad.pgm", "Error must carry the path"
    assert "/bad.pgm" in str(e.value), "Message must name the path"


def test_write_read_quantization(_chdir_tmp):
    from ddpe.data import (
        SyntheticSpec,
        generate_synthetic_domains,
        read_netpbm,
        write_netpbm,
    )

    sample = generate_synthetic_domains(SyntheticSpec(samples_per_cell=1))[-1]
    write_netpbm("sample.ppm", sample.image)
    restored = read_netpbm("sample.ppm")
    assert np.abs(restored - sample.image).max() <= 1 / 255 + 1e-7


def test_write_readable_by_pillow(_chdir_tmp):
    from PIL import Image
    from ddpe.data import write_netpbm

    image = np.random.default_rng(1).uniform(size=(3, 4, 5))
    write_netpbm("independent.ppm", image)
    with Image.open("independent.ppm") as decoded:
        pixels = np.asarray(decoded).transpose(2, 0, 1) / 255
    assert decoded.size == (5, 4), "Width and height swapped"
    assert np.abs(pixels - image).max() <= 0.5 / 255 + 1e-9


def test_load_image_folder():
    from ddpe.data import load_image_folder

    with Patcher() as patcher:
        for domain in ["art", "photo"]:
            for class_name in ["cat", "dog"]:
                patcher.fs.create_file(
                    f"/data/{domain}/{class_name}/0.pgm",
                    contents=b"P5 2 2 255\n" + bytes([1, 2, 3, 4]),
                )
        patcher.fs.create_file("/data/photo/dog/notes.txt", contents="ignored")
        samples = load_image_folder("/data")
    assert len(samples) == 4, "Expected one sample per directory"
    assert [(s.domain_label, s.class_label) for s in samples] == [
        (0, 0),
        (0, 1),
        (1, 0),
        (1, 1),
    ], "Ids must follow sorted directory names"
    assert samples[3].path == os.path.join("/data", "photo", "dog", "0.pgm")


def test_load_image_folder_inconsistent_sizes():
    from ddpe.tensor import DimensionError
    from ddpe.data import load_image_folder

    with Patcher() as patcher:
        patcher.fs.create_file(
            "/data/a/x/0.pgm", contents=b"P5 2 2 255\n" + bytes(4)
        )
        patcher.fs.create_file(
            "/data/a/x/1.pgm", contents=b"P5 3 1 255\n" + bytes(3)
        )
        with pytest.raises(DimensionError, match="differs"):
            load_image_folder("/data")


def test_export_round_trip(_chdir_tmp):
    from ddpe.data import (
        SHAPE_NAMES,
        STYLE_NAMES,
        SyntheticSpec,
        export_image_folder,
        generate_synthetic_domains,
        load_image_folder,
    )

    samples = generate_synthetic_domains(
        SyntheticSpec(classes=2, domains=3, samples_per_cell=2)
    )
    paths = export_image_folder(samples, "out", STYLE_NAMES, SHAPE_NAMES)
    assert paths[0] == os.path.join("out", "00-identity", "00-disk", "00000.ppm")
    restored = load_image_folder("out")
    assert [(s.domain_label, s.class_label) for s in restored] == [
        (s.domain_label, s.class_label) for s in samples
    ], "Ids must survive export"
    for a, b in zip(samples, restored):
        assert np.abs(a.image - b.image).max() <= 1 / 255 + 1e-7
