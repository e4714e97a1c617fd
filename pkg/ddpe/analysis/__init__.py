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
The Analysis Module
-------------------

Diagnostics of how domain information splits between the static and the
dynamic components of a trained network: feature extraction, shallow domain
probes and principal-component embeddings, with CSV export.
"""
from .features import (
    FeatureMatrix,
    FeatureSource,
    extract_coefficients,
    extract_features,
    extract_static_features,
)
from .probe import (
    ProbeConfig,
    ProbeResult,
    domain_probe,
    standardize,
    stratified_split,
)
from .embed import pca_embed, principal_directions
from .export import (
    probe_summary,
    write_embedding_csv,
    write_features_csv,
    write_probe_csv,
)
