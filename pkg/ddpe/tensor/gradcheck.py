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
from typing import Callable, List, Sequence, Tuple

import numpy as np

from .tensor import Tensor, ContractError, no_grad


def finite_diff_check(
    fn: Callable[[], Tensor],
    params: Sequence[Tensor],
    eps: float = 1e-5,
    *,
    samples: int = 32,
    seed: int = 0,
) -> float:
    """
    Compares the gradients computed by :meth:`Tensor.backward` against
    central differences.

    ``fn`` is evaluated once with a graph to obtain the analytic gradients,
    then twice per sampled coordinate without one. It must be deterministic:
    any randomness should come from a generator re-seeded inside ``fn``.

    Use ``float64`` parameters, e.g. by building them inside
    ``with default_dtype(np.float64):``; the tolerances one expects from this
    check are unreachable in ``float32``.

    :param fn: A closure over fixed inputs returning a scalar loss.
    :param params: The leaf tensors to perturb.
    :param eps: The perturbation.
    :param samples: How many coordinates to probe, drawn without replacement
        over all parameters. Every coordinate is probed if there are fewer.
    :param seed: Seeds the coordinate sampling.
    :returns: The maximum over probed coordinates of
        ``|analytic − numeric| / (|analytic| + |numeric| + 1e-12)``.
    """
    if len(params) == 0:
        raise ContractError("finite_diff_check needs at least one parameter")
    for param in params:
        param.zero_grad()
    loss = fn()
    loss.backward()
    analytic = [
        param.grad.copy() if param.grad is not None else np.zeros_like(param.data)
        for param in params
    ]

    coordinates: List[Tuple[int, int]] = [
        (i, j) for i, param in enumerate(params) for j in range(param.data.size)
    ]
    rng = np.random.default_rng(seed)
    if len(coordinates) > samples:
        chosen = rng.choice(len(coordinates), size=samples, replace=False)
        coordinates = [coordinates[k] for k in sorted(chosen)]

    worst = 0.0
    with no_grad():
        for i, j in coordinates:
            flat = params[i].data.flat
            original = flat[j]
            flat[j] = original + eps
            plus = fn().item()
            flat[j] = original - eps
            minus = fn().item()
            flat[j] = original
            numeric = (plus - minus) / (2 * eps)
            exact = float(analytic[i].reshape(-1)[j])
            error = abs(exact - numeric) / (abs(exact) + abs(numeric) + 1e-12)
            worst = max(worst, error)
    return worst
