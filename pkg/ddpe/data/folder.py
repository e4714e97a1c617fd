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
from typing import List, Optional, Sequence, Tuple

from .netpbm import read_netpbm, write_netpbm, is_netpbm_file
from .samples import DomainSample
from ..common import AnyPath, mkdirp
from ..config import ConfigError
from ..tensor import DimensionError


def _subdirectories(path: str) -> List[str]:
    return sorted(
        entry for entry in os.listdir(path) if os.path.isdir(os.path.join(path, entry))
    )


def scan_image_folder(root: AnyPath) -> Tuple[List[str], List[str]]:
    """
    :returns: The sorted domain directory names and the sorted union of class
        directory names below them.
    """
    root = str(root)
    if not os.path.isdir(root):
        raise ConfigError(f"Image folder '{root}' does not exist.")
    domains = _subdirectories(root)
    classes = sorted(
        {name for domain in domains for name in _subdirectories(os.path.join(root, domain))}
    )
    return domains, classes


def load_image_folder(root: AnyPath) -> List[DomainSample]:
    """
    Loads ``root/<domain>/<class>/<name>.pgm|.ppm``.

    Domain and class ids are the indices of the directory names in sorted
    order; samples are ordered by path.

    :raises NetpbmError: On malformed images.
    :raises DimensionError: If images differ in shape.
    :raises ConfigError: If the folder holds no images.
    """
    domains, classes = scan_image_folder(root)
    samples: List[DomainSample] = []
    shape: Optional[Tuple[int, ...]] = None
    for domain_id, domain in enumerate(domains):
        for class_name in _subdirectories(os.path.join(str(root), domain)):
            directory = os.path.join(str(root), domain, class_name)
            for name in sorted(os.listdir(directory)):
                path = os.path.join(directory, name)
                if not os.path.isfile(path) or not is_netpbm_file(path):
                    continue
                image = read_netpbm(path)
                if shape is None:
                    shape = image.shape
                elif image.shape != shape:
                    raise DimensionError(
                        f"{path}: image shape {image.shape} differs from {shape}"
                    )
                samples.append(
                    DomainSample(image, classes.index(class_name), domain_id, path)
                )
    if len(samples) == 0:
        raise ConfigError(f"No .pgm or .ppm images found under '{root}'.")
    return samples


def export_image_folder(
    samples: Sequence[DomainSample],
    root: AnyPath,
    domain_names: Sequence[str],
    class_names: Sequence[str],
) -> List[str]:
    """
    Writes samples in the layout :func:`load_image_folder` reads. Directory
    names are prefixed with their zero-padded ids so that sorted order equals
    id order.

    :returns: The written paths, in sample order.
    """
    counters = {}
    paths = []
    for sample in samples:
        domain = f"{sample.domain_label:02d}-{domain_names[sample.domain_label]}"
        class_name = f"{sample.class_label:02d}-{class_names[sample.class_label]}"
        directory = os.path.join(str(root), domain, class_name)
        mkdirp(directory)
        index = counters.get(directory, 0)
        counters[directory] = index + 1
        extension = "pgm" if sample.image.shape[0] == 1 else "ppm"
        path = os.path.join(directory, f"{index:05d}.{extension}")
        write_netpbm(path, sample.image)
        paths.append(path)
    return paths
