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
import itertools
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from .templates import (
    KernelTemplateBank,
    assemble_dynamic_kernel,
    template_shapes,
)
from ..tensor import (
    Tensor,
    DimensionError,
    conv2d_per_instance,
    global_avg_pool,
    instance_norm,
    linear,
    relu,
    softmax,
)

_pass_ids = itertools.count()


def next_pass_id() -> int:
    """
    :returns: A fresh identifier for one forward pass through a network.
    """
    return next(_pass_ids)


@dataclass
class DynamicCoefficients:
    """
    The coefficients ``λ`` one block used during one forward pass.

    :param values: ``B×M``; every row lies on the probability simplex unless
        it was overridden.
    :param block: The index of the block within its network.
    :param pass_id: Identifies the forward pass, see :func:`next_pass_id`.
    """

    values: Tensor
    block: int
    pass_id: int


@dataclass
class BlockConfig:
    """
    :param in_channels: ``C_in``
    :param out_channels: ``C_out``
    :param kernel_size: ``K``, odd.
    :param templates: ``M``, the number of asymmetric templates.
    :param stride: The convolution stride.
    :param padding: The zero padding of the convolution.
    :param meta_hidden: If set, the width of a ReLU hidden layer inside the
        meta-adjuster.
    """

    in_channels: int
    out_channels: int
    kernel_size: int = 3
    templates: int = 4
    stride: int = 1
    padding: int = 1
    meta_hidden: Optional[int] = None


def kaiming_uniform(
    rng: np.random.Generator,
    shape: Tuple[int, ...],
    fan_in: int,
) -> np.ndarray:
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape)


def fan_in_uniform(
    rng: np.random.Generator,
    shape: Tuple[int, ...],
    fan_in: int,
) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


class MetaAdjuster(object):
    """
    Maps block input features to one coefficient row per instance: global
    average pooling, a linear map ``C_in → M`` and a softmax.

    The output layer starts at zero so every row starts uniform.

    :param in_channels: ``C_in``
    :param templates: ``M``
    :param hidden: The width of an optional ReLU hidden layer.
    :param rng: Initializes the hidden layer, if any.
    """

    def __init__(
        self,
        in_channels: int,
        templates: int,
        hidden: Optional[int] = None,
        rng: Optional[np.random.Generator] = None,
    ) -> None:
        self.in_channels = in_channels
        self.templates = templates
        self.hidden = hidden
        self.hidden_weight: Optional[Tensor] = None
        self.hidden_bias: Optional[Tensor] = None
        width = in_channels
        if hidden is not None:
            rng = rng or np.random.default_rng(0)
            self.hidden_weight = Tensor(
                fan_in_uniform(rng, (hidden, in_channels), in_channels),
                requires_grad=True,
            )
            self.hidden_bias = Tensor(np.zeros(hidden), requires_grad=True)
            width = hidden
        self.weight = Tensor(np.zeros((templates, width)), requires_grad=True)
        self.bias = Tensor(np.zeros(templates), requires_grad=True)

    def named_parameters(self) -> Dict[str, Tensor]:
        result: Dict[str, Tensor] = {}
        if self.hidden_weight is not None and self.hidden_bias is not None:
            result["hidden_weight"] = self.hidden_weight
            result["hidden_bias"] = self.hidden_bias
        result["weight"] = self.weight
        result["bias"] = self.bias
        return result

    def logits(self, pooled: Tensor) -> Tensor:
        if self.hidden_weight is not None:
            pooled = relu(linear(pooled, self.hidden_weight, self.hidden_bias))
        return linear(pooled, self.weight, self.bias)


def meta_adjust(features: Tensor, adjuster: MetaAdjuster) -> Tensor:
    """
    ``softmax(linear(global_avg_pool(features)))``

    :param features: ``B×C_in×H×W``
    :returns: ``B×M`` coefficients.
    """
    if features.ndim != 4 or features.shape[1] != adjuster.in_channels:
        raise DimensionError(
            f"Meta-adjuster expects {adjuster.in_channels} channels, got features of shape {features.shape}"
        )
    return softmax(adjuster.logits(global_avg_pool(features)))


class DynamicBlock(object):
    """
    A convolution whose kernel is assembled per instance from a static kernel
    and coefficient-weighted templates, followed by instance normalization
    and a ReLU.

    :param config: The geometry of the block.
    :param rng: Initializes the kernels.
    :param index: The position of the block within its network.
    """

    def __init__(
        self,
        config: BlockConfig,
        rng: np.random.Generator,
        index: int = 0,
    ) -> None:
        self.config = config
        self.index = index
        c_out, c_in, k = config.out_channels, config.in_channels, config.kernel_size
        static = Tensor(
            kaiming_uniform(rng, (c_out, c_in, k, k), c_in * k * k),
            requires_grad=True,
        )
        templates = [
            Tensor(
                kaiming_uniform(rng, (c_out, c_in, h, w), c_in * h * w),
                requires_grad=True,
            )
            for h, w in template_shapes(k, config.templates)
        ]
        self.bank = KernelTemplateBank(static, templates)
        self.bias = Tensor(np.zeros(c_out), requires_grad=True)
        self.norm_weight = Tensor(np.ones(c_out), requires_grad=True)
        self.norm_bias = Tensor(np.zeros(c_out), requires_grad=True)
        self.adjuster = MetaAdjuster(
            c_in,
            config.templates,
            hidden=config.meta_hidden,
            rng=rng,
        )

    def named_parameters(self) -> Dict[str, Tensor]:
        result: Dict[str, Tensor] = {"static_kernel": self.bank.static_kernel}
        for i, template in enumerate(self.bank.templates):
            result[f"templates.{i}"] = template
        result["bias"] = self.bias
        result["norm_weight"] = self.norm_weight
        result["norm_bias"] = self.norm_bias
        for name, parameter in self.adjuster.named_parameters().items():
            result[f"adjuster.{name}"] = parameter
        return result

    def convolve(self, x: Tensor, coefficients: Tensor) -> Tensor:
        """
        The pre-normalization output for the given coefficients.
        """
        if coefficients.shape != (x.shape[0], self.bank.count):
            raise DimensionError(
                f"Coefficients of shape {coefficients.shape} do not fit a batch of {x.shape[0]} and {self.bank.count} templates"
            )
        kernels = assemble_dynamic_kernel(coefficients, self.bank)
        return self._add_bias(
            conv2d_per_instance(x, kernels, self.config.stride, self.config.padding)
        )

    def convolve_static(self, x: Tensor) -> Tensor:
        """
        The pre-normalization output with ``Θ_s`` shared by every instance.
        """
        static = self.bank.static_kernel
        broadcast = Tensor(np.zeros((x.shape[0], 1, 1, 1, 1)), dtype=static.dtype)
        kernels = static.reshape(1, *static.shape) + broadcast
        return self._add_bias(
            conv2d_per_instance(x, kernels, self.config.stride, self.config.padding)
        )

    def _add_bias(self, out: Tensor) -> Tensor:
        return out + self.bias.reshape(1, self.config.out_channels, 1, 1)

    def _activate(self, out: Tensor) -> Tensor:
        return relu(instance_norm(out, self.norm_weight, self.norm_bias))

    def forward(
        self,
        x: Tensor,
        override: Optional[Tensor] = None,
        *,
        pass_id: int = 0,
    ) -> Tuple[Tensor, DynamicCoefficients]:
        """
        :param x: ``B×C_in×H×W``
        :param override: ``B×M`` coefficients to use instead of the
            meta-adjuster's.
        :returns: The activated features and the coefficients used.
        """
        coefficients = override if override is not None else meta_adjust(x, self.adjuster)
        out = self._activate(self.convolve(x, coefficients))
        return out, DynamicCoefficients(coefficients, self.index, pass_id)

    def static_only_forward(self, x: Tensor) -> Tensor:
        """
        Same pipeline as :meth:`forward`, without the dynamic component.
        """
        return self._activate(self.convolve_static(x))


def dynamic_block_forward(
    x: Tensor,
    block: DynamicBlock,
    override: Optional[Tensor] = None,
) -> Tuple[Tensor, DynamicCoefficients]:
    return block.forward(x, override)


def static_only_forward(x: Tensor, block: DynamicBlock) -> Tensor:
    return block.static_only_forward(x)


def parameter_count(config: BlockConfig) -> int:
    """
    :returns: The number of scalars a block with this geometry trains.
    """
    c_out, c_in, k = config.out_channels, config.in_channels, config.kernel_size
    total = c_out * c_in * k * k
    total += sum(c_out * c_in * h * w for h, w in template_shapes(k, config.templates))
    total += 3 * c_out
    if config.meta_hidden is not None:
        total += config.meta_hidden * c_in + config.meta_hidden
        total += config.templates * config.meta_hidden + config.templates
    else:
        total += config.templates * c_in + config.templates
    return total

