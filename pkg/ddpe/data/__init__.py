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
The Data Module
---------------

Samples carry an image, a class label and a domain label. This module
generates synthetic multi-domain datasets, reads and writes image folders of
Netpbm files, splits samples by domain protocols and batches them.
"""
from .samples import (
    DomainSample,
    SyntheticSpec,
    SHAPE_NAMES,
    STYLE_NAMES,
    apply_domain_style,
    generate_synthetic_domains,
    render_shape,
)
from .netpbm import NetpbmError, read_netpbm, write_netpbm
from .folder import load_image_folder, export_image_folder, scan_image_folder
from .split import (
    DatasetSplit,
    Protocol,
    domains_of,
    leave_one_domain_out_split,
    make_split,
    single_source_split,
)
from .batching import Batch, Sampler, collate, make_batches
