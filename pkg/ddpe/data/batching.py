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
from enum import Enum
from dataclasses import dataclass
from typing import Dict, List, Sequence

import numpy as np

from .samples import DomainSample
from ..config import ConfigError
from ..common import Stream, stream_rng


class Sampler(str, Enum):
    """
    ``shuffle`` draws a uniform permutation per epoch; ``domain_balanced``
    interleaves the shuffled samples of every domain so each batch holds
    near-equal counts per domain.
    """

    shuffle = "shuffle"
    domain_balanced = "domain_balanced"


@dataclass
class Batch:
    """
    :param images: ``B×C×H×W``
    :param labels: ``B`` class labels.
    :param domains: ``B`` domain labels.
    :param indices: The positions of the samples in the sequence they were
        batched from.
    """

    images: np.ndarray
    labels: np.ndarray
    domains: np.ndarray
    indices: np.ndarray

    @property
    def size(self) -> int:
        return len(self.labels)


def collate(samples: Sequence[DomainSample], indices: Sequence[int]) -> Batch:
    chosen = [samples[i] for i in indices]
    return Batch(
        images=np.stack([s.image for s in chosen]),
        labels=np.array([s.class_label for s in chosen], dtype=np.int64),
        domains=np.array([s.domain_label for s in chosen], dtype=np.int64),
        indices=np.asarray(indices, dtype=np.int64),
    )


def _balanced_order(
    samples: Sequence[DomainSample],
    rng: np.random.Generator,
) -> List[int]:
    queues: Dict[int, List[int]] = {}
    for i, sample in enumerate(samples):
        queues.setdefault(sample.domain_label, []).append(i)
    shuffled = [
        list(rng.permutation(queues[domain])) for domain in sorted(queues.keys())
    ]
    order: List[int] = []
    depth = 0
    while len(order) < len(samples):
        for queue in shuffled:
            if depth < len(queue):
                order.append(int(queue[depth]))
        depth += 1
    return order


def make_batches(
    samples: Sequence[DomainSample],
    batch_size: int,
    sampler: Sampler,
    seed: int,
    epoch: int,
    *,
    perturbation_active: bool = False,
) -> List[Batch]:
    """
    Splits one epoch of samples into batches. The final batch may be short.

    :param seed: Together with ``epoch``, fully determines the order.
    :param perturbation_active: Whether parameter exchange will be applied,
        which needs at least two instances per batch.
    :raises ConfigError: On a non-positive batch size, or a batch size below
        two with parameter exchange active.
    """
    if batch_size < 1:
        raise ConfigError(f"Invalid batch size {batch_size}.")
    if perturbation_active and batch_size < 2:
        raise ConfigError(
            "Parameter exchange needs a batch size of at least 2 to find partners."
        )
    if len(samples) == 0:
        return []
    rng = stream_rng(seed, Stream.BATCHING, epoch)
    if sampler == Sampler.domain_balanced:
        order = _balanced_order(samples, rng)
    else:
        order = [int(i) for i in rng.permutation(len(samples))]
    return [
        collate(samples, order[start : start + batch_size])
        for start in range(0, len(order), batch_size)
    ]
