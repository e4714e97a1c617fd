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
from typing import Sequence

import numpy as np

from .plan import PartnerAssignment, PartnerRule
from ..tensor import (
    Tensor,
    ContractError,
    DimensionError,
    gather_rows,
    permute_columns,
)


def _eligibility(
    labels: np.ndarray,
    domains: np.ndarray,
    rule: PartnerRule,
) -> np.ndarray:
    if rule == PartnerRule.wSC:
        eligible = labels[:, None] == labels[None, :]
    elif rule == PartnerRule.wDC:
        eligible = labels[:, None] != labels[None, :]
    elif rule == PartnerRule.wSD:
        eligible = domains[:, None] == domains[None, :]
    elif rule == PartnerRule.wDD:
        eligible = domains[:, None] != domains[None, :]
    else:
        eligible = np.ones((len(labels), len(labels)), dtype=bool)
    np.fill_diagonal(eligible, False)
    return eligible


def _as_labels(labels: Sequence[int], domains: Sequence[int]):
    labels_array = np.asarray(labels, dtype=np.int64)
    domains_array = np.asarray(domains, dtype=np.int64)
    if labels_array.ndim != 1 or labels_array.shape != domains_array.shape:
        raise DimensionError(
            f"Got {labels_array.shape} class labels and {domains_array.shape} domain labels"
        )
    return labels_array, domains_array


def sample_partner_assignment(
    labels: Sequence[int],
    domains: Sequence[int],
    rule: PartnerRule,
    rng: np.random.Generator,
) -> PartnerAssignment:
    """
    Picks the instance whose coefficients each instance receives.

    ``wRand`` draws a uniform permutation of the batch. The constrained
    rules draw every partner uniformly among the *other* instances that
    satisfy the rule; an instance with no eligible partner keeps itself.

    :param labels: ``B`` class labels.
    :param domains: ``B`` domain labels.
    """
    labels_array, domains_array = _as_labels(labels, domains)
    batch = len(labels_array)
    if batch < 1:
        raise DimensionError("Cannot assign partners in an empty batch")
    if rule == PartnerRule.wRand:
        return PartnerAssignment(rng.permutation(batch).astype(np.int64))
    eligible = _eligibility(labels_array, domains_array, rule)
    partners = np.arange(batch, dtype=np.int64)
    fallbacks = 0
    for b in range(batch):
        candidates = np.flatnonzero(eligible[b])
        if len(candidates) == 0:
            fallbacks += 1
            continue
        partners[b] = candidates[rng.integers(len(candidates))]
    return PartnerAssignment(partners, fallbacks)


def audit_assignment(
    labels: Sequence[int],
    domains: Sequence[int],
    rule: PartnerRule,
    assignment: PartnerAssignment,
) -> int:
    """
    :returns: How many instances received a partner that breaks ``rule``.
        Keeping oneself counts as a violation unless no other instance
        was eligible (or, for ``wRand``, unless the assignment is a
        permutation).
    """
    labels_array, domains_array = _as_labels(labels, domains)
    partners = assignment.partners
    if partners.shape != labels_array.shape:
        return len(labels_array)
    if rule == PartnerRule.wRand:
        return 0 if assignment.is_permutation else len(labels_array)
    eligible = _eligibility(labels_array, domains_array, rule)
    violations = 0
    for b, partner in enumerate(partners):
        if partner == b:
            if eligible[b].any():
                violations += 1
        elif not (0 <= partner < len(partners)) or not eligible[b, partner]:
            violations += 1
    return violations


def cross_instance_exchange(
    coefficients: Tensor,
    assignment: PartnerAssignment,
) -> Tensor:
    """
    Row ``b`` of the result is row ``partners[b]`` of ``coefficients``.
    Gradients flow back to the partner's row.
    """
    if coefficients.ndim != 2 or len(assignment.partners) != coefficients.shape[0]:
        raise DimensionError(
            f"Assignment for {len(assignment.partners)} instances does not fit coefficients {coefficients.shape}"
        )
    return gather_rows(coefficients, assignment.partners)


def sample_kernel_permutations(
    batch: int,
    templates: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """
    :returns: ``batch×templates``: one uniform permutation of the template
        indices per instance.
    """
    return np.stack([rng.permutation(templates) for _ in range(batch)]).astype(
        np.int64
    )


def cross_kernel_exchange(coefficients: Tensor, permutations: np.ndarray) -> Tensor:
    """
    ``out[b][m] = coefficients[b][permutations[b][m]]``.

    :raises ContractError: If a row of ``permutations`` is not a bijection.
    """
    return permute_columns(coefficients, permutations)


def parameter_mix(
    coefficients: Tensor,
    partner_coefficients: Tensor,
    eta: float,
) -> Tensor:
    """
    ``η·λ + (1 − η)·λ_partner``

    :raises ContractError: If ``eta`` lies outside ``[0, 1]``.
    """
    if not (0.0 <= eta <= 1.0):
        raise ContractError(f"Mixing weight must lie in [0, 1], got {eta}")
    if coefficients.shape != partner_coefficients.shape:
        raise DimensionError(
            f"Cannot mix coefficients of shapes {coefficients.shape} and {partner_coefficients.shape}"
        )
    return coefficients * eta + partner_coefficients * (1.0 - eta)
