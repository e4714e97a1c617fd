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
import json

import numpy as np
import pytest


def _report(accuracies, seeds=(0, 1, 2), targets=(0, 1)):
    from ddpe.data import Protocol
    from ddpe.harness import CellResult, RunReport

    grid = [(seed, target) for seed in seeds for target in targets]
    cells = [
        CellResult(seed, target, accuracy)
        for (seed, target), accuracy in zip(grid, accuracies)
    ]
    return RunReport("pe", Protocol.leave_one_domain_out, list(seeds), list(targets), cells)


def test_report_statistics():
    report = _report([0.5, 0.7, 0.6, 0.9, 0.7, 0.8])

    assert report.accuracies(0) == [0.5, 0.6, 0.7]
    assert report.mean(0) == pytest.approx(0.6)
    assert report.std(0) == pytest.approx(np.std([0.5, 0.6, 0.7]))
    assert report.mean(1) == pytest.approx(0.8)
    assert report.overall_mean == pytest.approx(0.7)
    assert report.overall_std == pytest.approx(
        np.std([0.6, 0.75, 0.75])
    ), "Overall deviation is over per-seed averages"


def test_report_duplicate_seeds():
    report = _report([0.25, 0.75] * 3, seeds=(4, 4, 4))
    assert report.std(0) == 0.0, "Repeated identical cells have no spread"
    assert report.overall_std == 0.0


def test_incomplete_report():
    report = _report([0.5, 0.7, 0.6])
    report.complete = False
    assert report.overall_std is None, "No overall deviation for a partial grid"
    assert report.mean(1) == pytest.approx(0.7)
    assert report.mean(5) is None
    assert report.to_dict()["complete"] is False


def test_report_file_round_trip(_chdir_tmp):
    from ddpe.harness import load_report

    report = _report([0.5, 0.7, 0.6, 0.9, 0.7, 0.8])
    report.write("report.json")
    raw = json.load(open("report.json", encoding="utf8"))
    assert raw["mean"]["0"] == pytest.approx(0.6), "Means must be serialized"
    assert set(raw.keys()) == {
        "variant",
        "protocol",
        "complete",
        "seeds",
        "targets",
        "cells",
        "mean",
        "std",
        "overall_mean",
        "overall_std",
        "config",
    }

    # Stored statistics are ignored in favor of the cells.
    raw["mean"]["0"] = 42.0
    json.dump(raw, open("tampered.json", "w", encoding="utf8"))
    loaded = load_report("tampered.json")
    assert loaded.mean(0) == pytest.approx(0.6), "Statistics must be recomputed"
    assert loaded.dumps() == report.dumps()


def test_single_source_cells():
    from ddpe.harness import CellResult

    cell = CellResult(0, 1, 0.5, {0: 0.25, 2: 0.75})
    raw = cell.to_dict()
    assert raw["per_domain"] == {"0": 0.25, "2": 0.75}
    assert CellResult.from_dict(raw) == cell


def test_invalid_report(_chdir_tmp):
    from ddpe.harness import load_report

    with open("bad.json", "w") as f:
        f.write('{"variant": "x"}')
    with pytest.raises(ValueError, match="not a valid report"):
        load_report("bad.json")


def test_summary_outputs(_chdir_tmp):
    from rich.console import Console

    from ddpe.harness import render_table, write_summary, write_summary_csv

    complete = _report([0.5, 0.7, 0.6, 0.9, 0.7, 0.8])
    partial = _report([0.5])
    partial.variant = "baseline"
    partial.complete = False

    write_summary([complete, partial], "summary.json")
    summary = json.load(open("summary.json", encoding="utf8"))
    assert summary["pe"] == pytest.approx(0.7)
    assert summary["baseline"] == pytest.approx(0.5)

    write_summary_csv([complete, partial], "summary.csv")
    lines = open("summary.csv", encoding="utf8").read().splitlines()
    assert lines[0] == "variant,target,mean,std,n"
    assert lines[3].startswith("baseline,0,0.5,0.0,1")
    assert lines[4] == "baseline,1,,,0", "Empty targets leave blank statistics"

    console = Console(record=True, width=120)
    console.print(render_table([complete, partial]))
    text = console.export_text()
    assert "60.00 ± 8.16" in text, "Per-target cell missing"
    assert "baseline (partial)" in text
    assert "Average" in text
