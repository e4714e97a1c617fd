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
import math
from dataclasses import dataclass, field
from typing import Dict, Mapping, Optional, Sequence

import numpy as np

from ..tensor import Tensor, ContractError, DimensionError


def cosine_lr(step: int, total_steps: int, lr0: float) -> float:
    """
    ``lr0 · (1 + cos(π · step / total_steps)) / 2``

    :raises ContractError: If ``step`` lies outside ``[0, total_steps]`` or
        ``total_steps`` is not positive.
    """
    if total_steps < 1 or not (0 <= step <= total_steps):
        raise ContractError(
            f"Invalid schedule position {step} of {total_steps} steps"
        )
    return lr0 * (1.0 + math.cos(math.pi * step / total_steps)) / 2.0


@dataclass
class SGDState:
    """
    The momentum buffers of :func:`sgd_step`, one per parameter, created on
    first use.
    """

    velocities: Dict[int, np.ndarray] = field(default_factory=dict)


def sgd_step(
    params: Sequence[Tensor],
    grads: Sequence[Optional[np.ndarray]],
    lr: float,
    momentum: float,
    weight_decay: float,
    state: SGDState,
):
    """
    Updates ``params`` in place:

    .. code-block::

        v ← momentum · v + (grad + weight_decay · param)
        param ← param − lr · v

    A missing gradient counts as zero.

    :raises DimensionError: If a gradient does not have its parameter's
        shape.
    """
    if len(params) != len(grads):
        raise DimensionError(f"Got {len(grads)} gradients for {len(params)} parameters")
    for i, (param, grad) in enumerate(zip(params, grads)):
        if grad is None:
            grad = np.zeros_like(param.data)
        elif grad.shape != param.data.shape:
            raise DimensionError(
                f"Gradient of shape {grad.shape} for parameter {param.name or i} of shape {param.shape}"
            )
        update = grad + weight_decay * param.data
        velocity = state.velocities.get(i)
        if velocity is None:
            velocity = update
        else:
            velocity = momentum * velocity + update
        state.velocities[i] = velocity
        param.data[...] = param.data - lr * velocity


def swa_update(
    average: Optional[Mapping[str, np.ndarray]],
    current: Mapping[str, np.ndarray],
    collected: int,
) -> Dict[str, np.ndarray]:
    """
    Folds ``current`` into a running mean of ``collected`` checkpoints.

    The mean is kept in ``float64``; cast it back when loading it into a
    model.

    :param average: The mean so far. Ignored if ``collected`` is 0.
    :param current: The checkpoint to add.
    :param collected: How many checkpoints ``average`` holds.
    :returns: The new mean.
    """
    if collected < 0:
        raise ContractError(f"Invalid checkpoint count {collected}")
    if collected == 0 or average is None:
        return {
            name: np.array(value, dtype=np.float64) for name, value in current.items()
        }
    if set(average.keys()) != set(current.keys()):
        raise DimensionError("Checkpoints hold different parameters")
    result: Dict[str, np.ndarray] = {}
    for name, mean in average.items():
        value = np.asarray(current[name], dtype=np.float64)
        if value.shape != mean.shape:
            raise DimensionError(
                f"Checkpoint entry '{name}' has shape {value.shape}, expected {mean.shape}"
            )
        result[name] = mean + (value - mean) / (collected + 1)
    return result
