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


def make_block(seed: int = 0, c_in: int = 2, c_out: int = 3, templates: int = 4):
    from ddpe.dynconv import BlockConfig, DynamicBlock

    return DynamicBlock(
        BlockConfig(c_in, c_out, kernel_size=3, templates=templates),
        np.random.default_rng(seed),
    )


def test_template_shapes():
    from ddpe.dynconv import template_shapes

    assert template_shapes(5, 4) == [(5, 5), (1, 1), (5, 1), (1, 5)]
    assert template_shapes(3, 6)[4:] == [(3, 3), (1, 1)], "Patterns must cycle"


def test_pad_point_template():
    from ddpe.tensor import Tensor
    from ddpe.dynconv import pad_template_to_dense

    dense = pad_template_to_dense(Tensor(np.full((1, 1, 1, 1), 2.5)), 3).data
    expected = np.zeros((1, 1, 3, 3))
    expected[0, 0, 1, 1] = 2.5
    assert np.array_equal(dense, expected), "1×1 template must land on the center"


def test_pad_column_template():
    from ddpe.tensor import Tensor
    from ddpe.dynconv import pad_template_to_dense

    column = np.array([1.0, 2.0, 3.0]).reshape(1, 1, 3, 1)
    dense = pad_template_to_dense(Tensor(column), 3).data[0, 0]
    assert dense[:, 1].tolist() == [1.0, 2.0, 3.0], "Column must be the center column"
    assert np.all(dense[:, [0, 2]] == 0), "Off-center columns must be zero"

    row = pad_template_to_dense(Tensor(column.reshape(1, 1, 1, 3)), 3).data[0, 0]
    assert row[1].tolist() == [1.0, 2.0, 3.0], "Row must be the center row"


def test_pad_dense_template_unchanged():
    from ddpe.tensor import Tensor
    from ddpe.dynconv import pad_template_to_dense

    template = Tensor(np.random.default_rng(1).normal(size=(2, 3, 5, 5)))
    assert pad_template_to_dense(template, 5) is template, "K×K must pass through"


def test_pad_illegal_template():
    from ddpe.tensor import Tensor, DimensionError
    from ddpe.dynconv import pad_template_to_dense

    with pytest.raises(DimensionError, match="not a legal pattern"):
        pad_template_to_dense(Tensor(np.zeros((1, 1, 3, 2))), 3)
    with pytest.raises(DimensionError, match="odd"):
        pad_template_to_dense(Tensor(np.zeros((1, 1, 4, 4))), 4)


def test_padded_templates_criss_cross_support():
    from ddpe.dynconv import criss_cross_mask

    block = make_block(2)
    padded = block.bank.padded().data
    outside = ~criss_cross_mask(3)
    for m in range(1, 4):
        assert np.all(padded[m][..., outside] == 0), f"Template {m} leaked off the criss-cross"
    assert np.any(padded[0][..., outside] != 0), "The dense template should fill the kernel"


def test_assemble_one_hot():
    from ddpe.tensor import Tensor
    from ddpe.dynconv import assemble_dynamic_kernel, pad_template_to_dense

    block = make_block(3)
    block.bank.static_kernel.data[...] = 0
    for m in range(4):
        one_hot = np.zeros((1, 4))
        one_hot[0, m] = 1
        kernel = assemble_dynamic_kernel(Tensor(one_hot), block.bank).data[0]
        expected = pad_template_to_dense(block.bank.templates[m], 3).data
        assert np.array_equal(kernel, expected), f"One-hot at {m} must select template {m}"


def test_assemble_without_templates():
    from ddpe.tensor import Tensor
    from ddpe.dynconv import assemble_dynamic_kernel

    block = make_block(4)
    for template in block.bank.templates:
        template.data[...] = 0
    coefficients = np.random.default_rng(4).dirichlet(np.ones(4), size=3)
    kernels = assemble_dynamic_kernel(Tensor(coefficients), block.bank).data
    for kernel in kernels:
        assert np.array_equal(kernel, block.bank.static_kernel.data)


def test_assemble_linearity_and_decomposition():
    from ddpe.tensor import Tensor, default_dtype
    from ddpe.dynconv import assemble_dynamic_kernel, pad_template_to_dense

    with default_dtype(np.float64):
        block = make_block(5)
        rng = np.random.default_rng(5)
        coefficients = rng.dirichlet(np.ones(4), size=3)

        def assemble(values):
            return assemble_dynamic_kernel(Tensor(values), block.bank).data

        double, single, zero = (
            assemble(2 * coefficients),
            assemble(coefficients),
            assemble(0 * coefficients),
        )
        assert np.allclose(double - single, single - zero, atol=1e-6), "Not linear in λ"

        dynamic = sum(
            coefficients[:, m, None, None, None, None]
            * pad_template_to_dense(block.bank.templates[m], 3).data
            for m in range(4)
        )
        assert np.allclose(single - block.bank.static_kernel.data, dynamic, atol=1e-6)


def test_assemble_column_mismatch():
    from ddpe.tensor import Tensor, DimensionError
    from ddpe.dynconv import assemble_dynamic_kernel

    block = make_block(6)
    with pytest.raises(DimensionError, match="4 templates"):
        assemble_dynamic_kernel(Tensor(np.ones((2, 3)) / 3), block.bank)


def test_meta_adjust_zero_weights():
    from ddpe.tensor import Tensor
    from ddpe.dynconv import meta_adjust

    block = make_block(7)
    x = Tensor(np.random.default_rng(7).normal(size=(3, 2, 6, 6)))
    coefficients = meta_adjust(x, block.adjuster).data
    assert np.allclose(coefficients, 0.25, atol=1e-7), "Zero adjuster must be uniform"


def test_meta_adjust_identical_instances():
    from ddpe.tensor import Tensor
    from ddpe.dynconv import meta_adjust

    block = make_block(8)
    rng = np.random.default_rng(8)
    block.adjuster.weight.data[...] = rng.normal(size=block.adjuster.weight.shape)
    single = rng.normal(size=(1, 2, 5, 5))
    coefficients = meta_adjust(Tensor(np.concatenate([single, single])), block.adjuster)
    assert np.array_equal(coefficients.data[0], coefficients.data[1])


def test_meta_adjust_composition():
    from ddpe.tensor import Tensor, global_avg_pool, linear, softmax, default_dtype
    from ddpe.dynconv import meta_adjust

    with default_dtype(np.float64):
        block = make_block(9)
        rng = np.random.default_rng(9)
        block.adjuster.weight.data[...] = rng.normal(size=block.adjuster.weight.shape)
        block.adjuster.bias.data[...] = rng.normal(size=4)
        x = Tensor(rng.normal(size=(4, 2, 5, 5)))
        by_hand = softmax(
            linear(global_avg_pool(x), block.adjuster.weight, block.adjuster.bias)
        ).data
        composed = meta_adjust(x, block.adjuster).data
    assert np.allclose(composed, by_hand, atol=1e-7)
    assert np.allclose(composed.sum(axis=1), 1, atol=1e-6), "Rows must be on the simplex"
    assert np.all(composed >= 0), "Rows must be on the simplex"


def test_meta_adjust_channel_mismatch():
    from ddpe.tensor import Tensor, DimensionError
    from ddpe.dynconv import meta_adjust

    block = make_block(10)
    with pytest.raises(DimensionError, match="2 channels"):
        meta_adjust(Tensor(np.zeros((1, 3, 4, 4))), block.adjuster)


def test_meta_adjuster_hidden_layer():
    from ddpe.tensor import Tensor
    from ddpe.dynconv import BlockConfig, DynamicBlock, meta_adjust

    block = DynamicBlock(
        BlockConfig(2, 3, meta_hidden=5), np.random.default_rng(11)
    )
    names = list(block.adjuster.named_parameters().keys())
    assert names == ["hidden_weight", "hidden_bias", "weight", "bias"]
    x = Tensor(np.random.default_rng(11).normal(size=(2, 2, 4, 4)))
    assert np.allclose(meta_adjust(x, block.adjuster).data, 0.25, atol=1e-7)


def test_block_override_self_substitution():
    from ddpe.tensor import Tensor
    from ddpe.dynconv import meta_adjust

    block = make_block(12)
    rng = np.random.default_rng(12)
    block.adjuster.weight.data[...] = rng.normal(size=block.adjuster.weight.shape)
    x = Tensor(rng.normal(size=(3, 2, 6, 6)))
    plain, used = block.forward(x)
    overridden, _ = block.forward(x, meta_adjust(x, block.adjuster))
    assert np.array_equal(plain.data, overridden.data), "Self-substitution must be exact"
    assert used.values.shape == (3, 4), "λ_used must be returned"


def test_block_without_templates_ignores_override():
    from ddpe.tensor import Tensor

    block = make_block(13)
    for template in block.bank.templates:
        template.data[...] = 0
    rng = np.random.default_rng(13)
    x = Tensor(rng.normal(size=(2, 2, 6, 6)))
    a, _ = block.forward(x, Tensor(rng.dirichlet(np.ones(4), size=2)))
    b, _ = block.forward(x, Tensor(rng.dirichlet(np.ones(4), size=2)))
    assert np.array_equal(a.data, b.data), "Output must not depend on λ without templates"


def test_block_swapped_coefficients():
    from ddpe.tensor import Tensor, default_dtype
    from ddpe.dynconv import meta_adjust

    with default_dtype(np.float64):
        block = make_block(14)
        rng = np.random.default_rng(14)
        block.adjuster.weight.data[...] = rng.normal(size=block.adjuster.weight.shape)
        x = rng.normal(size=(2, 2, 6, 6))
        own = meta_adjust(Tensor(x), block.adjuster).data
        swapped, _ = block.forward(Tensor(x), Tensor(own[::-1].copy()))
        for b in range(2):
            single, _ = block.forward(
                Tensor(x[b : b + 1]), Tensor(own[1 - b : 2 - b].copy())
            )
            assert np.allclose(swapped.data[b], single.data[0], atol=1e-12)


def test_static_only_forward():
    from ddpe.tensor import Tensor
    from ddpe.dynconv import static_only_forward, dynamic_block_forward

    rng = np.random.default_rng(15)
    x = Tensor(rng.normal(size=(2, 2, 6, 6)))

    block = make_block(15)
    zeros = Tensor(np.zeros((2, 4)))
    static = static_only_forward(x, block)
    dynamic, _ = dynamic_block_forward(x, block, zeros)
    assert np.array_equal(static.data, dynamic.data), "λ=0 must reduce to the static path"

    for template in block.bank.templates:
        template.data[...] = 0
    plain, _ = dynamic_block_forward(x, block)
    assert np.array_equal(static_only_forward(x, block).data, plain.data)

    block = make_block(16)
    block.bank.static_kernel.data[...] = 0
    assert np.all(block.convolve_static(x).data == 0), "Θ_s=0 must give zero pre-activation"


def test_static_kernel_gradient_is_sum_over_instances():
    from ddpe.tensor import (
        Tensor,
        conv2d_per_instance,
        cross_entropy_loss,
        global_avg_pool,
        linear,
        default_dtype,
    )
    from ddpe.dynconv import assemble_dynamic_kernel, meta_adjust

    with default_dtype(np.float64):
        block = make_block(17)
        rng = np.random.default_rng(17)
        x = Tensor(rng.normal(size=(3, 2, 6, 6)))
        head = Tensor(rng.normal(size=(4, 3)))
        kernels = assemble_dynamic_kernel(meta_adjust(x, block.adjuster), block.bank)
        kernels.retain_grad()
        out = conv2d_per_instance(x, kernels, 1, 1)
        cross_entropy_loss(linear(global_avg_pool(out), head), [0, 1, 2]).backward()
    assert np.allclose(
        block.bank.static_kernel.grad, kernels.grad.sum(axis=0), atol=1e-5
    ), "∂loss/∂Θ_s must sum the per-instance kernel gradients"


def test_block_gradient_check():
    from ddpe.tensor import (
        Tensor,
        cross_entropy_loss,
        global_avg_pool,
        linear,
        default_dtype,
        finite_diff_check,
    )

    with default_dtype(np.float64):
        block = make_block(18)
        rng = np.random.default_rng(18)
        block.adjuster.weight.data[...] = rng.normal(size=block.adjuster.weight.shape)
        x = Tensor(rng.normal(size=(2, 2, 5, 5)))
        head = Tensor(rng.normal(size=(3, 3)))

        def loss():
            out, _ = block.forward(x)
            return cross_entropy_loss(linear(global_avg_pool(out), head), [0, 2])

        parameters = list(block.named_parameters().values())
        error = finite_diff_check(loss, parameters, 1e-5, samples=64)
    assert error < 1e-4, f"Dynamic block gradient off by {error}"
