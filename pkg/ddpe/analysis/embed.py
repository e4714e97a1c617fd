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
from typing import Tuple, Union

import numpy as np

from .features import FeatureMatrix
from ..config import ConfigError


def principal_directions(rows: np.ndarray, dims: int = 2) -> Tuple[np.ndarray, np.ndarray]:
    """
    :returns: The top-``dims`` eigenvectors of the covariance of ``rows`` as
        the columns of a ``D×dims`` matrix, by descending eigenvalue, each
        flipped so its largest-magnitude loading is positive; and the
        matching eigenvalues.
    :raises ConfigError: If there are fewer rows or columns than ``dims``.
    """
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim != 2:
        raise ConfigError(f"PCA expects a matrix, got shape {rows.shape}.")
    count, columns = rows.shape
    if dims < 1 or count < dims or columns < dims:
        raise ConfigError(
            f"Cannot embed {count} rows of {columns} features in {dims} dimensions."
        )
    centered = rows - rows.mean(axis=0)
    covariance = centered.T @ centered / max(count - 1, 1)
    eigenvalues, eigenvectors = np.linalg.eigh(covariance)
    order = np.argsort(eigenvalues, kind="stable")[::-1][:dims]
    components = eigenvectors[:, order]
    for k in range(dims):
        pivot = np.argmax(np.abs(components[:, k]))
        if components[pivot, k] < 0:
            components[:, k] = -components[:, k]
    return components, eigenvalues[order]


def pca_embed(features: Union[FeatureMatrix, np.ndarray], dims: int = 2) -> np.ndarray:
    """
    Projects centered rows onto their top principal directions.

    :returns: ``N×dims`` coordinates with zero column means.
    """
    rows = features.rows if isinstance(features, FeatureMatrix) else features
    rows = np.asarray(rows, dtype=np.float64)
    components, _ = principal_directions(rows, dims)
    coordinates = (rows - rows.mean(axis=0)) @ components
    return coordinates - coordinates.mean(axis=0)
