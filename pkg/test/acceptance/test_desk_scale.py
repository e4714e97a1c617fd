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
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from unittest import mock

import pytest

pytestmark = pytest.mark.slow

ARMS = ["none", "cross_instance", "cross_kernel"]


def _load_example(name: str, **overrides):
    from ddpe.common import get_examples_dir
    from ddpe.config import Config
    from ddpe.harness import all_variables

    config = Config.load(
        os.path.join(get_examples_dir(), name), all_variables, quiet=True
    )
    return config.with_overrides(all_variables, overrides)


def _run(config, variants, run_dir):
    from ddpe.common import get_tpe, set_tpe
    from ddpe.harness import Experiment, experiment

    previous = get_tpe()
    set_tpe(ThreadPoolExecutor(max_workers=os.cpu_count() or 1))
    try:
        with mock.patch.object(experiment, "Progress", mock.MagicMock()):
            return Experiment(config, variants, name="desk-scale").start(run_dir)
    finally:
        get_tpe().shutdown()
        set_tpe(previous)


@pytest.fixture(scope="module")
def arm_runs(tmp_path_factory):
    from ddpe.harness import Variant
    from ddpe.perturb import PerturbationMode

    config = _load_example(
        "synthetic_loo.toml",
        BATCH_SIZE=16,
        SEEDS=[0, 1, 2],
        TARGETS=[0, 1, 2, 3],
    )
    plan = config["PERTURBATION"]
    variants = [
        Variant(arm, {"PERTURBATION": replace(plan, mode=PerturbationMode(arm))})
        for arm in ARMS
    ]
    run_dir = str(tmp_path_factory.mktemp("arms"))
    return config, run_dir, _run(config, variants, run_dir)


def test_exchange_does_not_hurt_accuracy(arm_runs):
    _, _, reports = arm_runs
    for arm in ARMS:
        assert reports[arm].complete, f"{arm} did not finish every cell"
        assert len(reports[arm].cells) == 12, f"{arm} is missing cells"

    baseline = reports["none"].overall_mean
    exchanged = [reports[arm].overall_mean for arm in ARMS[1:]]
    for arm, mean in zip(ARMS[1:], exchanged):
        assert (
            mean >= baseline - 0.005
        ), f"{arm} fell below the baseline: {mean:.4f} vs. {baseline:.4f}"
    assert (
        max(exchanged) >= baseline + 0.01
    ), f"no exchange arm beat the baseline ({baseline:.4f}) by a point: {exchanged}"


def _domain_accuracies(config, run_dir, arm):
    import numpy as np

    from ddpe.analysis import (
        domain_probe,
        extract_coefficients,
        extract_static_features,
    )
    from ddpe.common import slugify
    from ddpe.data import make_split
    from ddpe.dynconv import load_checkpoint
    from ddpe.harness import load_samples

    train = make_split(load_samples(config), config["PROTOCOL"], 0).train
    dynamic = []
    static = []
    for i, seed in enumerate(config["SEEDS"]):
        cell_dir = os.path.join(run_dir, slugify(arm), f"{i}-seed-{seed}_target-0")
        path = os.path.join(cell_dir, "swa.ddpe")
        if not os.path.isfile(path):
            path = os.path.join(cell_dir, "model.ddpe")
        model = load_checkpoint(path)
        dynamic.append(
            domain_probe(extract_coefficients(model, train), config["PROBE"])
            .final_accuracy
        )
        static.append(
            domain_probe(extract_static_features(model, train), config["PROBE"])
            .final_accuracy
        )
    return float(np.median(dynamic)), float(np.median(static))


def test_exchange_moves_domain_information_into_coefficients(arm_runs):
    config, run_dir, _ = arm_runs
    base_dynamic, base_static = _domain_accuracies(config, run_dir, "none")
    pe_dynamic, pe_static = _domain_accuracies(config, run_dir, "cross_instance")

    assert (
        pe_dynamic > pe_static
    ), f"coefficients carry less domain information than static features: {pe_dynamic:.3f} vs. {pe_static:.3f}"
    assert (
        pe_static <= base_static + 0.02
    ), f"static features grew more domain-specific: {pe_static:.3f} vs. {base_static:.3f}"
    assert (
        pe_dynamic >= base_dynamic - 0.02
    ), f"coefficients lost domain information: {pe_dynamic:.3f} vs. {base_dynamic:.3f}"


def test_every_partner_rule_trains(tmp_path):
    from ddpe.harness import ablation_variants
    from ddpe.perturb import PartnerRule

    config = _load_example("synthetic_loo.toml", SEEDS=[0], TARGETS=[0])
    variants = ablation_variants("rules", config)
    reports = _run(config, variants, str(tmp_path))

    assert set(reports.keys()) == {rule.value for rule in PartnerRule}
    for name, report in reports.items():
        assert report.complete, f"rule {name} did not finish"
        assert len(report.cells) == 1, f"rule {name} is missing its cell"


def test_swa_grid(tmp_path):
    from ddpe.harness import ablation_variants

    config = _load_example("synthetic_loo.toml", SEEDS=[0], TARGETS=[0])
    reports = _run(config, ablation_variants("swa", config), str(tmp_path))

    assert len(reports) == 6, "the SWA grid has two settings times three modes"
    for name, report in reports.items():
        assert report.complete, f"{name} did not finish"
        assert len(report.cells) == 1, f"{name} is missing its cell"
    assert os.path.isfile(tmp_path / "summary.json"), "no summary was written"


def test_single_source_reports_unseen_domains(tmp_path):
    from ddpe.harness import Variant

    config = _load_example("single_source.yaml", TARGETS=[0])
    reports = _run(config, [Variant("single-source")], str(tmp_path))

    (cell,) = reports["single-source"].cells
    assert set(cell.per_domain.keys()) == {
        1,
        2,
        3,
    }, "per-domain accuracies must cover exactly the unseen domains"
    assert cell.accuracy == pytest.approx(
        sum(cell.per_domain.values()) / 3
    ), "the cell accuracy is the mean over unseen domains"
