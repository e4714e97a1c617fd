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
import json
import dataclasses
from dataclasses import dataclass, field
from typing import (
    Any,
    Callable,
    Dict,
    List,
    Mapping,
    Optional,
    Sequence,
)

import numpy as np

from .block import (
    BlockConfig,
    DynamicBlock,
    DynamicCoefficients,
    fan_in_uniform,
    meta_adjust,
    next_pass_id,
    parameter_count,
)
from ..config import ConfigError
from ..common import Stream, stream_rng
from ..tensor import (
    Tensor,
    avg_pool2x2,
    global_avg_pool,
    linear,
)

ExchangeHook = Callable[[int, Tensor], Tensor]


@dataclass
class NetworkConfig:
    """
    The geometry of a :class:`Model`.

    :param blocks: One entry per dynamic block, in order.
    :param classes: The number of output classes.
    :param input_channels: The channel count of input images.
    :param input_size: The height and width of input images.
    """

    blocks: List[BlockConfig] = field(
        default_factory=lambda: [BlockConfig(3, 16), BlockConfig(16, 32)]
    )
    classes: int = 4
    input_channels: int = 3
    input_size: int = 16

    def validate(self):
        """
        :raises ConfigError: If the blocks do not chain, a kernel size is
            even or the feature map would vanish.
        """
        if len(self.blocks) == 0:
            raise ConfigError("A network needs at least one block.")
        if self.classes < 1:
            raise ConfigError(f"Invalid class count {self.classes}.")
        channels = self.input_channels
        size = self.input_size
        for i, block in enumerate(self.blocks):
            if block.in_channels != channels:
                raise ConfigError(
                    f"Block {i} expects {block.in_channels} input channels, but receives {channels}."
                )
            if block.kernel_size < 1 or block.kernel_size % 2 == 0:
                raise ConfigError(
                    f"Block {i} has kernel size {block.kernel_size}: kernel sizes must be positive and odd."
                )
            if block.templates < 1 or block.out_channels < 1:
                raise ConfigError(f"Block {i} has no templates or no output channels.")
            if block.stride < 1 or block.padding < 0:
                raise ConfigError(f"Block {i} has an invalid stride or padding.")
            if block.meta_hidden is not None and block.meta_hidden < 1:
                raise ConfigError(f"Block {i} has an invalid meta-adjuster width.")
            if size + 2 * block.padding < block.kernel_size:
                raise ConfigError(f"Block {i} receives a {size}×{size} map, smaller than its kernel.")
            size = (size + 2 * block.padding - block.kernel_size) // block.stride + 1
            size //= 2
            if size < 1:
                raise ConfigError(f"The feature map vanishes after block {i}.")
            channels = block.out_channels

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)

    def dumps(self) -> str:
        """
        :returns: Canonical JSON: sorted keys, no whitespace.
        """
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_dict(Self, raw: Mapping[str, Any]) -> "NetworkConfig":
        raw = dict(raw)
        raw["blocks"] = [BlockConfig(**block) for block in raw.get("blocks", [])]
        return Self(**raw)


@dataclass
class ForwardResult:
    """
    :param logits: ``B×C``
    :param coefficients: The coefficients every dynamic block used, in block
        order. A block run statically contributes nothing.
    :param features: The globally pooled output of the last block,
        ``B×C_last``.
    """

    logits: Tensor
    coefficients: List[DynamicCoefficients]
    features: Tensor


class Model(object):
    """
    A stack of dynamic blocks, each followed by 2×2 average pooling, then
    global average pooling and a linear classifier.

    Use :func:`build_network` to construct one.
    """

    def __init__(self, config: NetworkConfig, rng: np.random.Generator) -> None:
        config.validate()
        self.config = config
        self.blocks = [
            DynamicBlock(block, rng, index=i) for i, block in enumerate(config.blocks)
        ]
        last = config.blocks[-1].out_channels
        self.classifier_weight = Tensor(
            fan_in_uniform(rng, (config.classes, last), last),
            requires_grad=True,
        )
        self.classifier_bias = Tensor(np.zeros(config.classes), requires_grad=True)
        for name, parameter in self.named_parameters().items():
            parameter.name = name

    def named_parameters(self) -> Dict[str, Tensor]:
        """
        :returns: Every trainable tensor keyed by a dotted name, in a fixed
            order.
        """
        result: Dict[str, Tensor] = {}
        for i, block in enumerate(self.blocks):
            for name, parameter in block.named_parameters().items():
                result[f"blocks.{i}.{name}"] = parameter
        result["classifier.weight"] = self.classifier_weight
        result["classifier.bias"] = self.classifier_bias
        return result

    def parameters(self) -> List[Tensor]:
        return list(self.named_parameters().values())

    def zero_grad(self):
        for parameter in self.parameters():
            parameter.zero_grad()

    def state_dict(self) -> Dict[str, np.ndarray]:
        """
        :returns: Copies of every parameter's values.
        """
        return {
            name: parameter.data.copy()
            for name, parameter in self.named_parameters().items()
        }

    def load_state_dict(self, state: Mapping[str, np.ndarray]):
        """
        Overwrites every parameter in place.

        :raises ValueError: On missing, extra or misshapen entries.
        """
        parameters = self.named_parameters()
        if set(state.keys()) != set(parameters.keys()):
            missing = sorted(set(parameters.keys()) - set(state.keys()))
            extra = sorted(set(state.keys()) - set(parameters.keys()))
            raise ValueError(f"State mismatch: missing {missing}, unexpected {extra}")
        for name, parameter in parameters.items():
            value = np.asarray(state[name])
            if value.shape != parameter.shape:
                raise ValueError(
                    f"State entry '{name}' has shape {value.shape}, expected {parameter.shape}"
                )
            parameter.data[...] = value

    def copy(self) -> "Model":
        clone = Model(self.config, np.random.default_rng(0))
        clone.load_state_dict(self.state_dict())
        return clone

    def parameter_count(self) -> int:
        return sum(parameter.data.size for parameter in self.parameters())

    def forward(
        self,
        x: Tensor,
        exchange: Optional[ExchangeHook] = None,
        *,
        static_last: bool = False,
    ) -> ForwardResult:
        """
        :param x: ``B×C×H×W`` images.
        :param exchange: Called as ``exchange(block_index, λ)`` with the
            coefficients each block computed from its actual input; the
            returned coefficients are used instead.
        :param static_last: Run the last block without its dynamic
            component.
        """
        pass_id = next_pass_id()
        coefficients: List[DynamicCoefficients] = []
        out = x
        for i, block in enumerate(self.blocks):
            if static_last and i == len(self.blocks) - 1:
                out = block.static_only_forward(out)
            elif exchange is not None:
                own = meta_adjust(out, block.adjuster)
                out, used = block.forward(out, exchange(i, own), pass_id=pass_id)
                coefficients.append(used)
            else:
                out, used = block.forward(out, pass_id=pass_id)
                coefficients.append(used)
            out = avg_pool2x2(out)
        features = global_avg_pool(out)
        logits = linear(features, self.classifier_weight, self.classifier_bias)
        return ForwardResult(logits, coefficients, features)

    __call__ = forward


def expected_parameter_count(config: NetworkConfig) -> int:
    """
    :returns: The closed-form parameter count of a network.
    """
    last = config.blocks[-1].out_channels
    return sum(parameter_count(block) for block in config.blocks) + (
        last * config.classes + config.classes
    )


def build_network(config: NetworkConfig, seed: int) -> Model:
    """
    Creates a freshly initialized network.

    Kernels and templates use Kaiming-uniform initialization, the classifier
    and any meta-adjuster hidden layer a ``1/sqrt(fan_in)`` bound; biases and
    the meta-adjuster output layers start at zero.

    :param config: The network geometry.
    :param seed: Identical seeds produce bitwise-identical parameters.
    :raises ConfigError: If ``config`` is invalid.
    """
    return Model(config, stream_rng(seed, Stream.INIT))


def network_config_from_channels(
    channels: Sequence[int],
    *,
    kernel_size: int = 3,
    templates: int = 4,
    stride: int = 1,
    padding: int = 1,
    meta_hidden: Optional[int] = None,
    classes: int = 4,
    input_channels: int = 3,
    input_size: int = 16,
) -> NetworkConfig:
    """
    Builds a :class:`NetworkConfig` whose blocks map
    ``input_channels → channels[0] → channels[1] …``.
    """
    blocks = []
    previous = input_channels
    for width in channels:
        blocks.append(
            BlockConfig(
                previous,
                width,
                kernel_size=kernel_size,
                templates=templates,
                stride=stride,
                padding=padding,
                meta_hidden=meta_hidden,
            )
        )
        previous = width
    return NetworkConfig(
        blocks=blocks,
        classes=classes,
        input_channels=input_channels,
        input_size=input_size,
    )
