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
The Dynamic Convolution Module
------------------------------

Dynamic blocks convolve every instance with its own kernel: a static kernel
plus asymmetric templates weighted by coefficients that a meta-adjuster
computes from the block input. :func:`build_network` stacks such blocks into
a small classifier.
"""
from .templates import (
    KernelTemplateBank,
    assemble_dynamic_kernel,
    criss_cross_mask,
    pad_template_to_dense,
    template_shapes,
)
from .block import (
    BlockConfig,
    DynamicBlock,
    DynamicCoefficients,
    MetaAdjuster,
    dynamic_block_forward,
    meta_adjust,
    parameter_count,
    static_only_forward,
)
from .network import (
    ExchangeHook,
    ForwardResult,
    Model,
    NetworkConfig,
    build_network,
    expected_parameter_count,
    network_config_from_channels,
)
from .checkpoint import (
    CheckpointError,
    checkpoint_bytes,
    load_checkpoint,
    save_checkpoint,
)
