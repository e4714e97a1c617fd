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
from typing import List, Optional

from .train import SWAConfig, TrainConfig
from ..analysis import ProbeConfig
from ..common import Path
from ..config import Config, Variable
from ..data import Protocol, Sampler, SyntheticSpec
from ..dynconv import NetworkConfig, network_config_from_channels
from ..perturb import PerturbationPlan

data_variables = [
    Variable(
        "DATA_ROOT",
        Optional[Path],
        "An image folder laid out as `ROOT/<domain>/<class>/<image>.ppm` (or `.pgm`). If unset, a synthetic dataset is generated instead.",
    ),
    Variable(
        "SYNTHETIC",
        SyntheticSpec,
        "The synthetic multi-domain dataset used when `DATA_ROOT` is unset.",
        default=SyntheticSpec(),
    ),
]

network_variables = [
    Variable(
        "BLOCK_CHANNELS",
        List[int],
        "The output channel count of every dynamic block, in order.",
        default=[16, 32],
    ),
    Variable(
        "KERNEL_SIZE",
        int,
        "The (odd) spatial extent of the static kernels.",
        default=3,
    ),
    Variable(
        "TEMPLATE_COUNT",
        int,
        "The number of asymmetric kernel templates per block.",
        default=4,
    ),
    Variable(
        "META_HIDDEN",
        Optional[int],
        "If set, the meta-adjusters get a ReLU hidden layer of this width.",
    ),
    Variable(
        "STRIDE",
        int,
        "The convolution stride of every block.",
        default=1,
    ),
    Variable(
        "PADDING",
        int,
        "The zero padding of every block's convolution.",
        default=1,
    ),
]

training_variables = [
    Variable(
        "EPOCHS",
        int,
        "The number of passes over the training samples.",
        default=50,
    ),
    Variable(
        "BATCH_SIZE",
        int,
        "The number of samples per optimizer step.",
        default=64,
    ),
    Variable(
        "LR0",
        float,
        "The initial learning rate, decayed to zero over all steps by a cosine schedule.",
        default=1e-3,
    ),
    Variable(
        "MOMENTUM",
        float,
        "The SGD momentum.",
        default=0.9,
    ),
    Variable(
        "WEIGHT_DECAY",
        float,
        "The L2 penalty added to every gradient.",
        default=5e-4,
    ),
    Variable(
        "SWA",
        SWAConfig,
        "Stochastic weight averaging. Evaluation uses the averaged weights when enabled.",
        default=SWAConfig(),
    ),
    Variable(
        "PERTURBATION",
        PerturbationPlan,
        "The parameter exchange applied to the dynamic coefficients, the partner rule and the weight of the perturbed loss.",
        default=PerturbationPlan(),
    ),
    Variable(
        "SAMPLER",
        Sampler,
        "How batches are drawn from the training samples.",
        default=Sampler.shuffle,
    ),
]

experiment_variables = [
    Variable(
        "SEEDS",
        List[int],
        "Every (seed, target) pair is trained and evaluated independently.",
        default=[0, 1, 2],
    ),
    Variable(
        "PROTOCOL",
        Protocol,
        "`leave_one_domain_out` trains on every domain but the target; `single_source` trains on the target only and tests on the rest.",
        default=Protocol.leave_one_domain_out,
    ),
    Variable(
        "TARGETS",
        Optional[List[int]],
        "The domain labels to use as protocol targets. All domains if unset.",
    ),
    Variable(
        "PROBE",
        ProbeConfig,
        "The shallow domain classifier of the `probe` command.",
        default=ProbeConfig(),
    ),
]

all_variables = (
    data_variables + network_variables + training_variables + experiment_variables
)


def train_config_from(config: Config, seed: int) -> TrainConfig:
    return TrainConfig(
        epochs=config["EPOCHS"],
        batch_size=config["BATCH_SIZE"],
        lr0=config["LR0"],
        momentum=config["MOMENTUM"],
        weight_decay=config["WEIGHT_DECAY"],
        swa=config["SWA"],
        perturbation=config["PERTURBATION"],
        sampler=config["SAMPLER"],
        seed=seed,
    )


def network_config_from(
    config: Config,
    classes: int,
    input_channels: int,
    input_size: int,
) -> NetworkConfig:
    return network_config_from_channels(
        config["BLOCK_CHANNELS"],
        kernel_size=config["KERNEL_SIZE"],
        templates=config["TEMPLATE_COUNT"],
        stride=config["STRIDE"],
        padding=config["PADDING"],
        meta_hidden=config["META_HIDDEN"],
        classes=classes,
        input_channels=input_channels,
        input_size=input_size,
    )
