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
from typing import List, Sequence, Tuple

import numpy as np

from ..tensor import (
    Tensor,
    DimensionError,
    pad,
    stack,
    weighted_sum,
)

TemplateShape = Tuple[int, int]


def template_shapes(kernel_size: int, count: int) -> List[TemplateShape]:
    """
    :returns: The spatial shapes of ``count`` templates for a ``K×K`` kernel:
        ``K×K``, ``1×1``, ``K×1`` and ``1×K``, repeating in that order when
        more than four are requested.
    """
    patterns = [
        (kernel_size, kernel_size),
        (1, 1),
        (kernel_size, 1),
        (1, kernel_size),
    ]
    return [patterns[i % len(patterns)] for i in range(count)]


def _check_kernel_size(kernel_size: int):
    if kernel_size < 1 or kernel_size % 2 == 0:
        raise DimensionError(f"Kernel size must be a positive odd number: {kernel_size}")


def pad_template_to_dense(template: Tensor, kernel_size: int) -> Tensor:
    """
    Zero-pads an asymmetric template onto the central criss-cross of a
    ``K×K`` kernel.

    A ``1×1`` template lands on the center cell, ``K×1`` on the center column
    and ``1×K`` on the center row, the center being index ``K // 2``. ``K×K``
    templates are returned as-is.

    :param template: ``C_out×C_in×h×w``
    :param kernel_size: ``K``, odd.
    :returns: ``C_out×C_in×K×K``
    """
    _check_kernel_size(kernel_size)
    if template.ndim != 4:
        raise DimensionError(f"Templates must have rank 4, got shape {template.shape}")
    h, w = template.shape[2:]
    if (h, w) not in ((kernel_size, kernel_size), (1, 1), (kernel_size, 1), (1, kernel_size)):
        raise DimensionError(
            f"Template shape {h}×{w} is not a legal pattern for K={kernel_size}"
        )
    if (h, w) == (kernel_size, kernel_size):
        return template
    center = kernel_size // 2
    around = (center, kernel_size - 1 - center)
    rows = around if h == 1 else (0, 0)
    columns = around if w == 1 else (0, 0)
    return pad(template, [(0, 0), (0, 0), rows, columns])


def criss_cross_mask(kernel_size: int) -> np.ndarray:
    """
    :returns: A ``K×K`` boolean mask of the center row and column.
    """
    mask = np.zeros((kernel_size, kernel_size), dtype=bool)
    mask[kernel_size // 2, :] = True
    mask[:, kernel_size // 2] = True
    return mask


class KernelTemplateBank(object):
    """
    The trainable kernels of one dynamic block: a dense static kernel and
    ``M`` asymmetric templates.

    :param static_kernel: ``Θ_s``, ``C_out×C_in×K×K``.
    :param templates: ``Φ_1 … Φ_M``, each ``C_out×C_in×h×w`` with ``(h, w)``
        one of the patterns in :func:`template_shapes`.
    """

    def __init__(self, static_kernel: Tensor, templates: Sequence[Tensor]) -> None:
        if static_kernel.ndim != 4 or static_kernel.shape[2] != static_kernel.shape[3]:
            raise DimensionError(
                f"The static kernel must be C_out×C_in×K×K, got {static_kernel.shape}"
            )
        if len(templates) == 0:
            raise DimensionError("A template bank needs at least one template")
        self.kernel_size = static_kernel.shape[2]
        _check_kernel_size(self.kernel_size)
        for template in templates:
            if template.shape[:2] != static_kernel.shape[:2]:
                raise DimensionError(
                    f"Template channels {template.shape[:2]} do not match the static kernel {static_kernel.shape[:2]}"
                )
            pad_template_to_dense(template, self.kernel_size)
        self.static_kernel = static_kernel
        self.templates = list(templates)

    @property
    def count(self) -> int:
        return len(self.templates)

    @property
    def out_channels(self) -> int:
        return self.static_kernel.shape[0]

    @property
    def in_channels(self) -> int:
        return self.static_kernel.shape[1]

    def padded(self) -> Tensor:
        """
        :returns: The templates padded to dense kernels and stacked,
            ``M×C_out×C_in×K×K``.
        """
        return stack(
            [pad_template_to_dense(t, self.kernel_size) for t in self.templates]
        )


def assemble_dynamic_kernel(
    coefficients: Tensor,
    bank: KernelTemplateBank,
) -> Tensor:
    """
    ``Θ(x) = Θ_s + Σ_m λ_m(x) · pad(Φ_m)`` for every instance.

    :param coefficients: ``B×M``
    :returns: ``B×C_out×C_in×K×K``
    """
    if coefficients.ndim != 2 or coefficients.shape[1] != bank.count:
        raise DimensionError(
            f"Coefficients of shape {coefficients.shape} do not match a bank of {bank.count} templates"
        )
    static = bank.static_kernel.reshape(1, *bank.static_kernel.shape)
    return static + weighted_sum(coefficients, bank.padded())
