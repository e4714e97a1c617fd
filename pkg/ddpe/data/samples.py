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
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from ..config import ConfigError

SHAPE_NAMES = ["disk", "cross", "bar", "ring"]
STYLE_NAMES = ["identity", "inverted", "gradient", "edges"]


@dataclass
class DomainSample:
    """
    :param image: ``C×H×W`` values in ``[0, 1]``.
    :param class_label: The content class.
    :param domain_label: The domain. Only protocols and probes read it;
        training never does.
    :param path: The file the image was read from, if any.
    """

    image: np.ndarray
    class_label: int
    domain_label: int
    path: Optional[str] = None


@dataclass
class SyntheticSpec:
    """
    :param classes: The number of shape classes, at most four: disk, cross,
        bar and ring.
    :param domains: The number of styles, at most four: identity, inverted
        contrast, a low-frequency color gradient and edge rendering.
    :param samples_per_cell: Samples per (class, domain) pair.
    :param image_size: The height and width of the square images.
    :param noise: The standard deviation of additive pixel noise.
    :param seed: The default generator seed.
    """

    classes: int = 4
    domains: int = 4
    samples_per_cell: int = 25
    image_size: int = 16
    noise: float = 0.05
    seed: int = 0

    def validate(self):
        for name in ["classes", "domains", "samples_per_cell", "image_size"]:
            if getattr(self, name) < 1:
                raise ConfigError(f"Synthetic dataset '{name}' must be positive.")
        if self.classes > len(SHAPE_NAMES):
            raise ConfigError(f"At most {len(SHAPE_NAMES)} synthetic classes exist.")
        if self.domains > len(STYLE_NAMES):
            raise ConfigError(f"At most {len(STYLE_NAMES)} synthetic domains exist.")
        if self.image_size < 8:
            raise ConfigError("Synthetic images must be at least 8×8.")
        if self.noise < 0:
            raise ConfigError("Synthetic noise must be non-negative.")


def render_shape(class_label: int, size: int, rng: np.random.Generator) -> np.ndarray:
    """
    Renders the binary mask of one shape with a jittered center and size.

    :returns: A ``size×size`` array of zeros and ones.
    """
    scale = size / 16
    center = (size - 1) / 2 + rng.uniform(-1, 1, size=2) * scale
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    dy, dx = yy - center[0], xx - center[1]
    name = SHAPE_NAMES[class_label]
    if name == "disk":
        radius = rng.uniform(3.5, 4.5) * scale
        mask = dy * dy + dx * dx <= radius * radius
    elif name == "cross":
        arm = rng.uniform(4.5, 5.5) * scale
        half = 1.0 * scale
        mask = ((np.abs(dy) <= half) & (np.abs(dx) <= arm)) | (
            (np.abs(dx) <= half) & (np.abs(dy) <= arm)
        )
    elif name == "bar":
        length = rng.uniform(5.5, 6.5) * scale
        half = 1.5 * scale
        mask = (np.abs(dy) <= half) & (np.abs(dx) <= length)
    else:
        outer = rng.uniform(6.0, 7.0) * scale
        inner = outer - 2.5 * scale
        distance = np.sqrt(dy * dy + dx * dx)
        mask = (distance >= inner) & (distance <= outer)
    return mask.astype(np.float64)


def _laplacian(mask: np.ndarray) -> np.ndarray:
    padded = np.pad(mask, 1, mode="edge")
    return (
        padded[:-2, 1:-1]
        + padded[2:, 1:-1]
        + padded[1:-1, :-2]
        + padded[1:-1, 2:]
        - 4 * mask
    )


def apply_domain_style(
    gray: np.ndarray,
    mask: np.ndarray,
    domain: int,
    rng: np.random.Generator,
    noise: float = 0.0,
) -> np.ndarray:
    """
    Renders a noisy grayscale shape in the style of a domain.

    :param gray: ``H×W`` values in ``[0, 1]``: the noisy mask.
    :param mask: The clean binary mask ``gray`` was made from.
    :param domain: The style index, see :data:`STYLE_NAMES`.
    :returns: ``3×H×W`` values in ``[0, 1]``.
    """
    style = STYLE_NAMES[domain]
    if style == "identity":
        channels = [gray] * 3
    elif style == "inverted":
        channels = [1.0 - gray] * 3
    elif style == "gradient":
        size = gray.shape[0]
        yy, xx = np.mgrid[0:size, 0:size].astype(np.float64) / max(size - 1, 1)
        channels = []
        for angle in rng.uniform(0, 2 * np.pi, size=3):
            ramp = np.cos(angle) * xx + np.sin(angle) * yy
            ramp = (ramp - ramp.min()) / max(ramp.max() - ramp.min(), 1e-12)
            channels.append(0.5 * gray + 0.3 * ramp + 0.1)
    else:
        edges = np.clip(np.abs(_laplacian(mask)), 0, 1)
        edges = np.clip(edges + rng.normal(0, noise, size=edges.shape), 0, 1)
        channels = [edges] * 3
    return np.clip(np.stack(channels), 0, 1)


def generate_synthetic_domains(
    spec: SyntheticSpec,
    seed: Optional[int] = None,
) -> List[DomainSample]:
    """
    Generates shapes (classes) rendered in several styles (domains).

    Samples are ordered by domain, then class, then index. The same spec and
    seed always produce identical samples.

    :param seed: Overrides ``spec.seed``.
    :raises ConfigError: On zero counts or unknown classes or domains.
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed if seed is None else seed)
    samples: List[DomainSample] = []
    for domain in range(spec.domains):
        for class_label in range(spec.classes):
            for _ in range(spec.samples_per_cell):
                mask = render_shape(class_label, spec.image_size, rng)
                gray = np.clip(
                    mask + rng.normal(0, spec.noise, size=mask.shape), 0, 1
                )
                image = apply_domain_style(gray, mask, domain, rng, spec.noise)
                samples.append(
                    DomainSample(image.astype(np.float32), class_label, domain)
                )
    return samples
