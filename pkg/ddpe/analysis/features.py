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
from typing import Iterator, List, Optional, Sequence

import numpy as np

from ..data import DomainSample, collate
from ..dynconv import Model
from ..tensor import Tensor, DimensionError, no_grad


class FeatureSource(str, Enum):
    """
    * ``static``: the globally pooled output of the last block, run without
      its dynamic component.
    * ``dynamic``: the coefficients of every block, concatenated.
    """

    static = "static"
    dynamic = "dynamic"


@dataclass
class FeatureMatrix:
    """
    :param rows: ``N×D``
    :param class_labels: ``N`` class labels.
    :param domain_labels: ``N`` domain labels.
    :param source: What the columns hold.
    :param splits: An optional ``N``-vector of split tags, e.g. ``train``.
    """

    rows: np.ndarray
    class_labels: np.ndarray
    domain_labels: np.ndarray
    source: FeatureSource
    splits: Optional[np.ndarray] = None

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=np.float64)
        self.class_labels = np.asarray(self.class_labels, dtype=np.int64)
        self.domain_labels = np.asarray(self.domain_labels, dtype=np.int64)
        self.source = FeatureSource(self.source)
        if self.rows.ndim != 2:
            raise DimensionError(f"Feature rows must be a matrix, got {self.rows.shape}")
        count = self.rows.shape[0]
        if self.class_labels.shape != (count,) or self.domain_labels.shape != (count,):
            raise DimensionError(
                f"{count} feature rows with {len(self.class_labels)} class and {len(self.domain_labels)} domain labels"
            )
        if self.splits is not None:
            self.splits = np.asarray(self.splits, dtype=str)
            if self.splits.shape != (count,):
                raise DimensionError(f"{count} feature rows with {len(self.splits)} split tags")

    @property
    def count(self) -> int:
        return self.rows.shape[0]

    @property
    def dims(self) -> int:
        return self.rows.shape[1]

    @classmethod
    def concatenate(Self, matrices: Sequence["FeatureMatrix"]) -> "FeatureMatrix":
        if len(matrices) == 0:
            raise DimensionError("Nothing to concatenate")
        sources = {matrix.source for matrix in matrices}
        if len(sources) != 1:
            raise DimensionError("Cannot concatenate features of different sources")
        splits = None
        if all(matrix.splits is not None for matrix in matrices):
            splits = np.concatenate([matrix.splits for matrix in matrices])
        return Self(
            np.concatenate([matrix.rows for matrix in matrices]),
            np.concatenate([matrix.class_labels for matrix in matrices]),
            np.concatenate([matrix.domain_labels for matrix in matrices]),
            matrices[0].source,
            splits,
        )


def _chunks(samples: Sequence[DomainSample], batch_size: int) -> Iterator[List[int]]:
    for start in range(0, len(samples), batch_size):
        yield list(range(start, min(start + batch_size, len(samples))))


def _extract(
    model: Model,
    samples: Sequence[DomainSample],
    source: FeatureSource,
    split: Optional[str],
    batch_size: int,
) -> FeatureMatrix:
    if len(samples) == 0:
        raise DimensionError("Cannot extract features of zero samples")
    rows = []
    with no_grad():
        for indices in _chunks(samples, batch_size):
            batch = collate(samples, indices)
            x = Tensor(batch.images)
            if source == FeatureSource.static:
                rows.append(model.forward(x, static_last=True).features.data)
            else:
                result = model.forward(x)
                rows.append(
                    np.concatenate(
                        [used.values.data for used in result.coefficients], axis=1
                    )
                )
    splits = None if split is None else np.full(len(samples), split)
    return FeatureMatrix(
        np.concatenate(rows),
        np.array([s.class_label for s in samples]),
        np.array([s.domain_label for s in samples]),
        source,
        splits,
    )


def extract_coefficients(
    model: Model,
    samples: Sequence[DomainSample],
    *,
    split: Optional[str] = None,
    batch_size: int = 64,
) -> FeatureMatrix:
    """
    Runs every sample through ``model`` without perturbation and collects the
    coefficients of every block.

    :returns: One row per sample, ``Σ M`` columns: each block's segment lies on
        the probability simplex.
    """
    return _extract(model, samples, FeatureSource.dynamic, split, batch_size)


def extract_static_features(
    model: Model,
    samples: Sequence[DomainSample],
    *,
    split: Optional[str] = None,
    batch_size: int = 64,
) -> FeatureMatrix:
    """
    Runs every block but the last normally, the last one with its static
    kernel only, then pools globally.

    :returns: One row per sample, ``C_out`` of the last block columns.
    """
    return _extract(model, samples, FeatureSource.static, split, batch_size)


def extract_features(
    model: Model,
    samples: Sequence[DomainSample],
    source: FeatureSource,
    *,
    split: Optional[str] = None,
    batch_size: int = 64,
) -> FeatureMatrix:
    return _extract(model, samples, FeatureSource(source), split, batch_size)
