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
"""
The Tensor Module
-----------------

A small reverse-mode automatic differentiation engine on top of numpy,
limited to the operations the dynamic networks in :mod:`ddpe.dynconv` need.

Tensors are created in ``float32`` by default. Wrap code in
``with default_dtype(np.float64):`` for gradient checks.
"""
from .tensor import (
    Tensor,
    Graph,
    Node,
    DimensionError,
    NumericError,
    ContractError,
    default_dtype,
    get_default_dtype,
    no_grad,
    is_grad_enabled,
    add,
    mul,
    matmul,
    reshape,
    total,
)
from .ops import (
    linear,
    relu,
    softmax,
    cross_entropy_loss,
    global_avg_pool,
    avg_pool2x2,
    instance_norm,
    conv2d_per_instance,
    pad,
    stack,
    weighted_sum,
    gather_rows,
    permute_columns,
)
from .gradcheck import finite_diff_check
