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
import numpy as np
import pytest


def test_plan_validation():
    from ddpe.perturb import PerturbationPlan, PerturbationMode, PartnerRule

    plan = PerturbationPlan("mix", "wDD", 0.5)
    assert plan.mode == PerturbationMode.mix and plan.rule == PartnerRule.wDD
    assert plan.active and plan.uses_partners
    assert not PerturbationPlan().active, "Default plan must be inactive"
    assert not PerturbationPlan("cross_kernel").uses_partners
    with pytest.raises(ValueError, match="beta"):
        PerturbationPlan(beta=-1.0)
    with pytest.raises(ValueError, match="beta"):
        PerturbationPlan(beta=float("nan"))
    with pytest.raises(ValueError):
        PerturbationPlan(mode="shuffle")


def test_same_class_without_partners_falls_back():
    from ddpe.perturb import PartnerRule, audit_assignment, sample_partner_assignment

    labels, domains = [0, 1, 2, 3], [0, 0, 0, 0]
    assignment = sample_partner_assignment(
        labels, domains, PartnerRule.wSC, np.random.default_rng(0)
    )
    assert assignment.partners.tolist() == [0, 1, 2, 3], "No partner means self"
    assert assignment.fallbacks == 4, "Every instance fell back"
    assert audit_assignment(labels, domains, PartnerRule.wSC, assignment) == 0


def test_different_class_pair_swaps():
    from ddpe.perturb import PartnerRule, sample_partner_assignment

    for seed in range(5):
        assignment = sample_partner_assignment(
            [0, 1], [0, 0], PartnerRule.wDC, np.random.default_rng(seed)
        )
        assert assignment.partners.tolist() == [1, 0], "Only the other instance fits"
        assert assignment.fallbacks == 0


@pytest.mark.parametrize("rule", ["wSC", "wDC", "wSD", "wDD"])
def test_constrained_rules_hold(rule):
    from ddpe.perturb import PartnerRule, audit_assignment, sample_partner_assignment

    rng = np.random.default_rng(42)
    labels = rng.integers(0, 3, size=12)
    domains = rng.integers(0, 3, size=12)
    for _ in range(20):
        assignment = sample_partner_assignment(labels, domains, PartnerRule(rule), rng)
        assert audit_assignment(labels, domains, PartnerRule(rule), assignment) == 0
        for b, partner in enumerate(assignment.partners):
            if partner == b:
                continue
            if rule == "wSC":
                assert labels[partner] == labels[b]
            elif rule == "wDC":
                assert labels[partner] != labels[b]
            elif rule == "wSD":
                assert domains[partner] == domains[b]
            else:
                assert domains[partner] != domains[b]


def test_random_rule_is_uniform():
    from ddpe.perturb import PartnerRule, sample_partner_assignment

    rng = np.random.default_rng(7)
    batch = 4
    counts = np.zeros((batch, batch))
    draws = 60000
    for _ in range(draws):
        assignment = sample_partner_assignment(
            np.zeros(batch), np.zeros(batch), PartnerRule.wRand, rng
        )
        assert assignment.is_permutation
        counts[np.arange(batch), assignment.partners] += 1
    frequencies = counts / draws
    assert np.all(np.abs(frequencies - 1 / batch) < 0.01), frequencies


def test_audit_detects_violations():
    from ddpe.perturb import PartnerAssignment, PartnerRule, audit_assignment

    labels, domains = [0, 0, 1, 1], [0, 1, 0, 1]
    bad = PartnerAssignment(np.array([2, 0, 3, 2]))
    assert audit_assignment(labels, domains, PartnerRule.wSC, bad) == 1
    lazy = PartnerAssignment(np.array([0, 1, 2, 3]))
    assert audit_assignment(labels, domains, PartnerRule.wDD, lazy) == 4
    repeated = PartnerAssignment(np.array([1, 1, 2, 3]))
    assert audit_assignment(labels, domains, PartnerRule.wRand, repeated) == 4


def test_assignment_length_mismatch():
    from ddpe.perturb import PartnerRule, sample_partner_assignment
    from ddpe.tensor import DimensionError

    with pytest.raises(DimensionError, match="labels"):
        sample_partner_assignment(
            [0, 1], [0, 1, 2], PartnerRule.wRand, np.random.default_rng(0)
        )


def test_cross_instance_exchange():
    from ddpe.perturb import PartnerAssignment, cross_instance_exchange
    from ddpe.tensor import Tensor

    coefficients = Tensor(np.arange(6.0).reshape(3, 2))
    identity = cross_instance_exchange(coefficients, PartnerAssignment(np.arange(3)))
    assert np.array_equal(identity.data, coefficients.data), "Identity must not change λ"
    swap = PartnerAssignment(np.array([1, 0, 2]))
    swapped = cross_instance_exchange(coefficients, swap)
    assert swapped.data.tolist() == [[2, 3], [0, 1], [4, 5]]

    permutation = PartnerAssignment(np.array([2, 0, 1]))
    once = cross_instance_exchange(coefficients, permutation)
    back = cross_instance_exchange(once, permutation.inverse())
    assert np.array_equal(back.data, coefficients.data), "Inverse must restore λ"


def test_cross_instance_gradient_reaches_partner():
    from ddpe.perturb import PartnerAssignment, cross_instance_exchange
    from ddpe.tensor import Tensor

    coefficients = Tensor(np.ones((2, 3)), requires_grad=True)
    weights = Tensor(np.array([[1.0, 2.0, 3.0], [0.0, 0.0, 0.0]]))
    exchanged = cross_instance_exchange(coefficients, PartnerAssignment(np.array([1, 0])))
    (exchanged * weights).sum().backward()
    assert coefficients.grad.tolist() == [[0, 0, 0], [1, 2, 3]], "Gradient must follow the swap"


def test_cross_instance_gradient_routing_through_block():
    from ddpe.dynconv import BlockConfig, DynamicBlock, meta_adjust
    from ddpe.perturb import PartnerAssignment, cross_instance_exchange
    from ddpe.tensor import (
        Tensor,
        cross_entropy_loss,
        default_dtype,
        global_avg_pool,
        linear,
    )

    rng = np.random.default_rng(21)
    batch, classes = 3, 3
    partners = np.array([1, 2, 0])
    labels = [0, 2, 1]
    with default_dtype(np.float64):
        block = DynamicBlock(BlockConfig(2, 3, templates=4), rng)
        block.adjuster.weight.data[...] = rng.normal(size=block.adjuster.weight.shape)
        block.adjuster.bias.data[...] = rng.normal(size=block.adjuster.bias.shape)
        adjuster_parameters = block.adjuster.named_parameters()
        for name, parameter in block.named_parameters().items():
            if not name.startswith("adjuster."):
                parameter.requires_grad = False
        head = Tensor(rng.normal(size=(classes, 3)))
        images = rng.normal(size=(batch, 2, 6, 6))

        def head_loss(x: Tensor, coefficients: Tensor, targets) -> Tensor:
            out, _ = block.forward(x, coefficients)
            return cross_entropy_loss(linear(global_avg_pool(out), head), targets)

        adjuster_input = Tensor(images.copy(), requires_grad=True)
        coefficients = meta_adjust(adjuster_input, block.adjuster)
        exchanged = cross_instance_exchange(coefficients, PartnerAssignment(partners))
        head_loss(Tensor(images), exchanged, labels).backward()
        batched = {
            name: parameter.grad.copy()
            for name, parameter in adjuster_parameters.items()
        }
        batched_input = adjuster_input.grad.copy()

        expected = {
            name: np.zeros_like(grad) for name, grad in batched.items()
        }
        expected_input = np.zeros_like(images)
        for b in range(batch):
            for parameter in adjuster_parameters.values():
                parameter.zero_grad()
            partner = partners[b]
            single_input = Tensor(
                images[partner : partner + 1].copy(), requires_grad=True
            )
            single = meta_adjust(single_input, block.adjuster)
            head_loss(Tensor(images[b : b + 1]), single, [labels[b]]).backward()
            for name, parameter in adjuster_parameters.items():
                expected[name] += parameter.grad / batch
            expected_input[partner] += single_input.grad[0] / batch

    for name, grad in batched.items():
        assert np.allclose(
            grad, expected[name], atol=1e-6, rtol=0
        ), f"Adjuster gradient '{name}' differs from the single-instance graphs"
        assert np.any(grad != 0), f"Adjuster gradient '{name}' vanished"
    assert np.allclose(
        batched_input, expected_input, atol=1e-6, rtol=0
    ), "Each instance's coefficients must only reach its partner's output"


def test_cross_kernel_exchange():
    from ddpe.perturb import cross_kernel_exchange, sample_kernel_permutations
    from ddpe.tensor import Tensor, ContractError

    coefficients = Tensor(np.array([[0.1, 0.2, 0.3, 0.4], [0.4, 0.3, 0.2, 0.1]]))
    identity = np.tile(np.arange(4), (2, 1))
    assert np.array_equal(
        cross_kernel_exchange(coefficients, identity).data, coefficients.data
    )
    shift = np.array([[1, 2, 3, 0], [1, 2, 3, 0]])
    shifted = cross_kernel_exchange(coefficients, shift)
    assert np.allclose(shifted.data[0], [0.2, 0.3, 0.4, 0.1]), "Expected a cyclic shift"

    rng = np.random.default_rng(3)
    permutations = sample_kernel_permutations(2, 4, rng)
    permuted = cross_kernel_exchange(coefficients, permutations)
    for row, original in zip(permuted.data, coefficients.data):
        assert sorted(row.tolist()) == sorted(original.tolist()), "Multiset changed"
        assert np.isclose(row.sum(), 1.0), "Rows must stay on the simplex"

    with pytest.raises(ContractError):
        cross_kernel_exchange(coefficients, np.array([[0, 0, 1, 2], [0, 1, 2, 3]]))


def test_parameter_mix():
    from ddpe.perturb import parameter_mix
    from ddpe.tensor import Tensor, ContractError

    own = Tensor(np.array([[1.0, 0.0]]))
    partner = Tensor(np.array([[0.0, 1.0]]))
    assert np.array_equal(parameter_mix(own, partner, 1.0).data, own.data)
    assert np.array_equal(parameter_mix(own, partner, 0.0).data, partner.data)
    assert np.allclose(parameter_mix(own, partner, 0.5).data, [[0.5, 0.5]])
    with pytest.raises(ContractError, match="Mixing weight"):
        parameter_mix(own, partner, 1.5)
