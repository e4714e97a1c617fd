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
from typing import List, Sequence

from .samples import DomainSample
from ..config import ConfigError


class Protocol(str, Enum):
    """
    ``leave_one_domain_out`` holds one domain out for testing;
    ``single_source`` trains on one domain and tests on all others.
    """

    leave_one_domain_out = "leave_one_domain_out"
    single_source = "single_source"


@dataclass
class DatasetSplit:
    """
    :param train: The training samples.
    :param test: The held-out samples.
    :param protocol: How the split was made.
    :param domain: The target domain (leave-one-domain-out) or the source
        domain (single source).
    """

    train: List[DomainSample]
    test: List[DomainSample]
    protocol: Protocol
    domain: int

    @property
    def train_size(self) -> int:
        return len(self.train)


def domains_of(samples: Sequence[DomainSample]) -> List[int]:
    """
    :returns: The sorted distinct domain labels.
    """
    return sorted({sample.domain_label for sample in samples})


def _check_domain(samples: Sequence[DomainSample], domain: int):
    present = domains_of(samples)
    if domain not in present:
        raise ConfigError(f"Domain {domain} is not among the available domains {present}.")


def leave_one_domain_out_split(
    samples: Sequence[DomainSample],
    target_domain: int,
) -> DatasetSplit:
    """
    Trains on every domain but ``target_domain`` and tests on it.

    :raises ConfigError: If ``target_domain`` does not occur in ``samples``.
    """
    _check_domain(samples, target_domain)
    return DatasetSplit(
        train=[s for s in samples if s.domain_label != target_domain],
        test=[s for s in samples if s.domain_label == target_domain],
        protocol=Protocol.leave_one_domain_out,
        domain=target_domain,
    )


def single_source_split(
    samples: Sequence[DomainSample],
    source_domain: int,
) -> DatasetSplit:
    """
    Trains on ``source_domain`` only and tests on every other domain.

    :raises ConfigError: If ``source_domain`` does not occur in ``samples``.
    """
    _check_domain(samples, source_domain)
    return DatasetSplit(
        train=[s for s in samples if s.domain_label == source_domain],
        test=[s for s in samples if s.domain_label != source_domain],
        protocol=Protocol.single_source,
        domain=source_domain,
    )


def make_split(
    samples: Sequence[DomainSample],
    protocol: Protocol,
    domain: int,
) -> DatasetSplit:
    if protocol == Protocol.single_source:
        return single_source_split(samples, domain)
    return leave_one_domain_out_split(samples, domain)
