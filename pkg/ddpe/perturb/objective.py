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
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from .plan import PartnerAssignment, PerturbationMode, PerturbationPlan
from .exchange import (
    audit_assignment,
    cross_instance_exchange,
    cross_kernel_exchange,
    parameter_mix,
    sample_kernel_permutations,
    sample_partner_assignment,
)
from ..data import Batch
from ..dynconv import Model
from ..tensor import (
    Tensor,
    ContractError,
    cross_entropy_loss,
    no_grad,
)


@dataclass
class LossDiagnostics:
    """
    :param ce_clean: The cross entropy of the unperturbed pass.
    :param ce_perturbed: The cross entropy of the perturbed pass, if one ran.
    :param correct: Correct argmax predictions of the unperturbed pass.
    :param count: The batch size.
    :param fallbacks: Instances that kept their own coefficients for lack of
        an eligible partner.
    :param eta: The mixing weight drawn for this step, if any.
    """

    ce_clean: float
    ce_perturbed: Optional[float]
    correct: int
    count: int
    fallbacks: int = 0
    eta: Optional[float] = None


def predict(logits: np.ndarray) -> np.ndarray:
    """
    :returns: The argmax per row; ties go to the lowest class index.
    """
    return np.argmax(logits, axis=1)


def joint_loss(
    model: Model,
    batch: Batch,
    plan: PerturbationPlan,
    rng: np.random.Generator,
    *,
    _identity_kernel_permutations: bool = False,
) -> Tuple[Tensor, LossDiagnostics]:
    """
    ``CE(unperturbed) + β·CE(perturbed)``.

    The perturbed pass computes every block's coefficients from that pass's
    own input features, then exchanges them: cross-instance exchange uses one
    assignment shared by all blocks, cross-kernel exchange draws fresh
    permutations per instance and block, and mixing draws one ``η`` per
    call.

    With ``β = 0`` the perturbed pass still runs (and consumes ``rng``) for
    its diagnostics, but the returned loss is the unperturbed cross entropy
    itself.

    :param rng: The perturbation stream. Nothing else should draw from it.
    :param _identity_kernel_permutations: Replaces cross-kernel permutations
        with the identity. For testing only.
    """
    x = Tensor(batch.images)
    labels = batch.labels
    clean = model.forward(x)
    ce_clean = cross_entropy_loss(clean.logits, labels)
    correct = int((predict(clean.logits.data) == labels).sum())

    if plan.mode == PerturbationMode.none:
        return ce_clean, LossDiagnostics(ce_clean.item(), None, correct, batch.size)

    assignment: Optional[PartnerAssignment] = None
    eta: Optional[float] = None
    if plan.uses_partners:
        assignment = sample_partner_assignment(labels, batch.domains, plan.rule, rng)
        violations = audit_assignment(labels, batch.domains, plan.rule, assignment)
        if violations != 0:
            raise ContractError(
                f"{violations} partner(s) violate rule {plan.rule.value}"
            )
    if plan.mode == PerturbationMode.mix:
        eta = float(rng.uniform(0.0, 1.0))

    permutations: Dict[int, np.ndarray] = {}

    def exchange(block: int, coefficients: Tensor) -> Tensor:
        if plan.mode == PerturbationMode.cross_kernel:
            batch_size, templates = coefficients.shape
            if _identity_kernel_permutations:
                permutations[block] = np.tile(np.arange(templates), (batch_size, 1))
            else:
                permutations[block] = sample_kernel_permutations(
                    batch_size, templates, rng
                )
            return cross_kernel_exchange(coefficients, permutations[block])
        assert assignment is not None
        partner = cross_instance_exchange(coefficients, assignment)
        if plan.mode == PerturbationMode.mix:
            assert eta is not None
            return parameter_mix(coefficients, partner, eta)
        return partner

    if plan.beta == 0:
        with no_grad():
            perturbed = model.forward(x, exchange)
        ce_perturbed = cross_entropy_loss(perturbed.logits, labels)
        loss = ce_clean
    else:
        perturbed = model.forward(x, exchange)
        ce_perturbed = cross_entropy_loss(perturbed.logits, labels)
        loss = ce_clean + ce_perturbed * plan.beta

    return loss, LossDiagnostics(
        ce_clean.item(),
        ce_perturbed.item(),
        correct,
        batch.size,
        fallbacks=assignment.fallbacks if assignment is not None else 0,
        eta=eta,
    )
