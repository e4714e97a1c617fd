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
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Sequence

import numpy as np
from rich.table import Table

from ..common import AnyPath, GenericDictEncoder
from ..data import Protocol


@dataclass
class CellResult:
    """
    The outcome of training and evaluating one model.

    :param seed: The seed of the run.
    :param target: The protocol target domain.
    :param accuracy: The test accuracy; under ``single_source``, the mean of
        ``per_domain``.
    :param per_domain: The accuracy on every held-out domain, for
        ``single_source`` runs.
    """

    seed: int
    target: int
    accuracy: float
    per_domain: Optional[Dict[int, float]] = None

    def to_dict(self) -> Dict[str, Any]:
        result: Dict[str, Any] = {
            "seed": self.seed,
            "target": self.target,
            "accuracy": self.accuracy,
        }
        if self.per_domain is not None:
            result["per_domain"] = {
                str(domain): accuracy for domain, accuracy in self.per_domain.items()
            }
        return result

    @classmethod
    def from_dict(Self, raw: Mapping[str, Any]) -> "CellResult":
        per_domain = raw.get("per_domain")
        return Self(
            int(raw["seed"]),
            int(raw["target"]),
            float(raw["accuracy"]),
            (
                {int(domain): float(value) for domain, value in per_domain.items()}
                if per_domain is not None
                else None
            ),
        )


@dataclass
class RunReport:
    """
    The accuracies of one experiment variant over its (seed, target) grid.

    Means and standard deviations are always recomputed from :attr:`cells`;
    the standard deviation is the population one.

    :param variant: The name of the variant.
    :param protocol: The domain split protocol.
    :param seeds: The seeds of the grid, in order.
    :param targets: The targets of the grid, in order.
    :param cells: The finished cells in grid order.
    :param config_text: The configuration the variant ran with, verbatim.
    :param complete: ``False`` if the run aborted before finishing every
        cell.
    """

    variant: str
    protocol: Protocol
    seeds: List[int]
    targets: List[int]
    cells: List[CellResult] = field(default_factory=list)
    config_text: str = ""
    complete: bool = True

    def accuracies(self, target: int) -> List[float]:
        return [cell.accuracy for cell in self.cells if cell.target == target]

    def mean(self, target: int) -> Optional[float]:
        values = self.accuracies(target)
        return float(np.mean(values)) if len(values) else None

    def std(self, target: int) -> Optional[float]:
        values = self.accuracies(target)
        return float(np.std(values)) if len(values) else None

    @property
    def overall_mean(self) -> Optional[float]:
        """
        The mean over targets of the per-target means.
        """
        means = [m for m in (self.mean(target) for target in self.targets) if m is not None]
        return float(np.mean(means)) if len(means) else None

    @property
    def overall_std(self) -> Optional[float]:
        """
        The population standard deviation over seeds of the per-seed average
        across targets. Only defined for complete grids.
        """
        width = len(self.targets)
        if width == 0 or len(self.cells) != len(self.seeds) * width:
            return None
        averages = [
            np.mean([cell.accuracy for cell in self.cells[i * width : (i + 1) * width]])
            for i in range(len(self.seeds))
        ]
        return float(np.std(averages))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "variant": self.variant,
            "protocol": self.protocol.value,
            "complete": self.complete,
            "seeds": self.seeds,
            "targets": self.targets,
            "cells": [cell.to_dict() for cell in self.cells],
            "mean": {str(target): self.mean(target) for target in self.targets},
            "std": {str(target): self.std(target) for target in self.targets},
            "overall_mean": self.overall_mean,
            "overall_std": self.overall_std,
            "config": self.config_text,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), cls=GenericDictEncoder, indent=4) + "\n"

    def write(self, path: AnyPath):
        with open(path, "w", encoding="utf8") as f:
            f.write(self.dumps())

    @classmethod
    def from_dict(Self, raw: Mapping[str, Any]) -> "RunReport":
        return Self(
            variant=raw["variant"],
            protocol=Protocol(raw["protocol"]),
            seeds=[int(seed) for seed in raw["seeds"]],
            targets=[int(target) for target in raw["targets"]],
            cells=[CellResult.from_dict(cell) for cell in raw["cells"]],
            config_text=raw.get("config", ""),
            complete=bool(raw.get("complete", True)),
        )


def load_report(path: AnyPath) -> RunReport:
    """
    :raises ValueError: If the file is not a report.
    """
    with open(path, encoding="utf8") as f:
        raw = json.load(f)
    try:
        return RunReport.from_dict(raw)
    except (KeyError, TypeError) as e:
        raise ValueError(f"'{path}' is not a valid report: missing {e}")


def summary_dict(reports: Sequence[RunReport]) -> Dict[str, Optional[float]]:
    """
    :returns: Every variant's overall mean accuracy.
    """
    return {report.variant: report.overall_mean for report in reports}


def write_summary(reports: Sequence[RunReport], path: AnyPath):
    with open(path, "w", encoding="utf8") as f:
        f.write(json.dumps(summary_dict(reports), indent=4) + "\n")


def _format(mean: Optional[float], std: Optional[float]) -> str:
    if mean is None or std is None:
        return "-"
    return f"{mean * 100:.2f} ± {std * 100:.2f}"


def render_table(reports: Sequence[RunReport]) -> Table:
    """
    :returns: Targets as rows, variants as columns, cells as ``mean ± std``
        in percent.
    """
    table = Table(title="Target accuracy (%)")
    table.add_column("Target", style="cyan")
    for report in reports:
        title = report.variant if report.complete else f"{report.variant} (partial)"
        table.add_column(title, justify="right")
    targets: List[int] = []
    for report in reports:
        for target in report.targets:
            if target not in targets:
                targets.append(target)
    for target in targets:
        row = [str(target)]
        for report in reports:
            row.append(_format(report.mean(target), report.std(target)))
        table.add_row(*row)
    table.add_row(
        "Average",
        *[_format(report.overall_mean, report.overall_std) for report in reports],
        style="bold",
    )
    return table


def write_summary_csv(reports: Sequence[RunReport], path: AnyPath):
    """
    Writes one ``variant,target,mean,std,n`` line per variant and target.
    """
    with open(path, "w", encoding="utf8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["variant", "target", "mean", "std", "n"])
        for report in reports:
            for target in report.targets:
                mean, std = report.mean(target), report.std(target)
                writer.writerow(
                    [
                        report.variant,
                        target,
                        "" if mean is None else repr(mean),
                        "" if std is None else repr(std),
                        len(report.accuracies(target)),
                    ]
                )
