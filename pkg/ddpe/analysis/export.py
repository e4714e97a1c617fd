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
import csv
import json
import dataclasses
from typing import List

import numpy as np

from .features import FeatureMatrix
from .probe import ProbeResult
from ..common import AnyPath, GenericDictEncoder


def write_embedding_csv(path: AnyPath, coordinates: np.ndarray, features: FeatureMatrix):
    """
    Writes one ``x,y,class,domain`` line per row.
    """
    if coordinates.shape[0] != features.count or coordinates.shape[1] < 2:
        raise ValueError(
            f"Coordinates of shape {coordinates.shape} do not fit {features.count} rows"
        )
    with open(path, "w", encoding="utf8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["x", "y", "class", "domain"])
        for (x, y), class_label, domain_label in zip(
            coordinates[:, :2], features.class_labels, features.domain_labels
        ):
            writer.writerow([repr(float(x)), repr(float(y)), int(class_label), int(domain_label)])


def write_features_csv(path: AnyPath, features: FeatureMatrix):
    header: List[str] = [f"f{i}" for i in range(features.dims)] + ["class", "domain"]
    if features.splits is not None:
        header.append("split")
    with open(path, "w", encoding="utf8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for i, row in enumerate(features.rows):
            line = [repr(float(value)) for value in row]
            line += [int(features.class_labels[i]), int(features.domain_labels[i])]
            if features.splits is not None:
                line.append(str(features.splits[i]))
            writer.writerow(line)


def write_probe_csv(path: AnyPath, result: ProbeResult):
    """
    Writes the accuracy curve as ``epoch,accuracy`` lines, epochs 1-based.
    """
    with open(path, "w", encoding="utf8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["epoch", "accuracy"])
        for epoch, accuracy in enumerate(result.curve, start=1):
            writer.writerow([epoch, repr(accuracy)])


def probe_summary(result: ProbeResult) -> str:
    return json.dumps(
        {
            "final_accuracy": result.final_accuracy,
            "train_size": result.train_size,
            "test_size": result.test_size,
            "config": dataclasses.asdict(result.config),
        },
        cls=GenericDictEncoder,
        indent=4,
    )
