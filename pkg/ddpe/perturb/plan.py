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

import numpy as np

from ..common import is_real_number


class PerturbationMode(str, Enum):
    """
    * ``none``: train on the unperturbed forward pass only.
    * ``cross_instance``: swap coefficient rows between instances.
    * ``cross_kernel``: permute each instance's coefficients across
      templates.
    * ``mix``: convexly combine each instance's coefficients with a
      partner's.
    """

    none = "none"
    cross_instance = "cross_instance"
    cross_kernel = "cross_kernel"
    mix = "mix"


class PartnerRule(str, Enum):
    """
    How cross-instance partners are chosen: at random (``wRand``), with the
    same class (``wSC``), a different class (``wDC``), the same domain
    (``wSD``) or a different domain (``wDD``).
    """

    wRand = "wRand"
    wSC = "wSC"
    wDC = "wDC"
    wSD = "wSD"
    wDD = "wDD"


@dataclass
class PerturbationPlan:
    """
    :param mode: The exchange strategy.
    :param rule: The partner rule for ``cross_instance`` and ``mix``; ignored
        otherwise.
    :param beta: The weight of the perturbed loss term.
    """

    mode: PerturbationMode = PerturbationMode.none
    rule: PartnerRule = PartnerRule.wRand
    beta: float = 1.0

    def __post_init__(self):
        self.mode = PerturbationMode(self.mode)
        self.rule = PartnerRule(self.rule)
        if not is_real_number(self.beta) or self.beta < 0:
            raise ValueError(f"beta must be a non-negative real, got {self.beta}")

    @property
    def active(self) -> bool:
        return self.mode != PerturbationMode.none

    @property
    def uses_partners(self) -> bool:
        return self.mode in (PerturbationMode.cross_instance, PerturbationMode.mix)


@dataclass
class PartnerAssignment:
    """
    :param partners: ``partners[b]`` is the instance whose coefficients
        instance ``b`` receives. A bijection under ``wRand``; under
        constrained rules, a map that may repeat partners.
    :param fallbacks: How many instances had no eligible partner and kept
        their own coefficients.
    """

    partners: np.ndarray
    fallbacks: int = 0

    @property
    def is_permutation(self) -> bool:
        return bool(
            np.array_equal(np.sort(self.partners), np.arange(len(self.partners)))
        )

    def inverse(self) -> "PartnerAssignment":
        if not self.is_permutation:
            raise ValueError("Only permutations can be inverted")
        inverse = np.empty_like(self.partners)
        inverse[self.partners] = np.arange(len(self.partners))
        return PartnerAssignment(inverse)
