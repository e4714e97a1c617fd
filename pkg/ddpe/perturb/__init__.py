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
The Perturbation Module
-----------------------

Parameter exchange perturbs the dynamic coefficients of a forward pass:
across instances, across templates, or by mixing with a partner. The joint
objective adds the cross entropy of such a perturbed pass to that of the
unperturbed one.
"""
from .plan import (
    PartnerAssignment,
    PartnerRule,
    PerturbationMode,
    PerturbationPlan,
)
from .exchange import (
    audit_assignment,
    cross_instance_exchange,
    cross_kernel_exchange,
    parameter_mix,
    sample_kernel_permutations,
    sample_partner_assignment,
)
from .objective import LossDiagnostics, joint_loss, predict
