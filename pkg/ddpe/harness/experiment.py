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
from __future__ import annotations

import os
import time
import shutil
import logging
from concurrent.futures import Future
from dataclasses import dataclass, field, replace
from functools import wraps
from typing import (
    Any,
    Callable,
    Dict,
    List,
    Optional,
    Sequence,
    TypeVar,
)

from rich.progress import (
    Progress,
    TextColumn,
    BarColumn,
    MofNCompleteColumn,
    TimeElapsedColumn,
    TaskID,
)

from .errors import HarnessException
from .report import CellResult, RunReport, write_summary
from .train import evaluate, evaluate_by_domain, train
from .variables import all_variables, network_config_from, train_config_from
from ..config import Config, ConfigError
from ..data import (
    DomainSample,
    Protocol,
    domains_of,
    generate_synthetic_domains,
    load_image_folder,
    make_split,
)
from ..dynconv import build_network, save_checkpoint
from ..logging import (
    LevelFilter,
    console,
    info,
    rule,
    verbose,
    warn,
    register_additional_handler,
    deregister_additional_handler,
    options,
)
from ..common import format_elapsed_time, get_tpe, mkdirp, slugify
from ..perturb import PartnerRule, PerturbationMode

T = TypeVar("T", bound=Callable)


def ensure_progress_started(method: T) -> Callable:
    """
    If a method of :class:`ExperimentProgressBar` decorated with
    ``ensure_progress_started`` is called before :meth:`start`, a
    :class:`HarnessException` is raised.
    """

    @wraps(method)
    def _impl(obj: ExperimentProgressBar, *method_args, **method_kwargs):
        if not obj.started:
            raise HarnessException(
                f"Attempted to call method '{method}' before initializing progress bar"
            )
        return method(obj, *method_args, **method_kwargs)

    if method.__doc__ is None:
        method.__doc__ = ""

    method.__doc__ = (
        "This method may not be called before the progress bar is started.\n"
        + method.__doc__
    )

    return _impl


class ExperimentProgressBar(object):
    """
    An experiment's progress bar, rendered using Rich at the bottom of
    interactive terminals. Every (seed, target) cell is one stage.
    """

    def __init__(self, name: str) -> None:
        self.__name: str = name
        self.__stages_completed: int = 0
        self.__task_id: TaskID = TaskID(-1)
        self.__progress = Progress(
            TextColumn("[progress.description]{task.description}"),
            BarColumn(),
            MofNCompleteColumn(),
            TimeElapsedColumn(),
            console=console,
            disable=not options.get_show_progress_bar(),
        )

    def start(self):
        self.__progress.start()
        self.__task_id = self.__progress.add_task(f"{self.__name}")

    def end(self):
        self.__progress.stop()
        self.__task_id = TaskID(-1)

    @property
    def started(self) -> bool:
        return self.__task_id != TaskID(-1)

    @property
    def stages_completed(self) -> int:
        return self.__stages_completed

    @ensure_progress_started
    def set_max_stage_count(self, count: int):
        self.__progress.update(self.__task_id, total=count)

    @ensure_progress_started
    def start_stage(self, name: str):
        self.__progress.update(
            self.__task_id,
            description=f"{self.__name} - Cell {self.__stages_completed + 1} - {name}",
        )

    @ensure_progress_started
    def end_stage(self):
        self.__stages_completed += 1
        self.__progress.update(
            self.__task_id, completed=float(self.__stages_completed)
        )


@dataclass
class Variant:
    """
    One arm of an experiment.

    :param name: Names the variant's directory and report.
    :param overrides: Validated replacements for configuration variables.
    """

    name: str
    overrides: Dict[str, Any] = field(default_factory=dict)


ABLATIONS = ["swa", "mix", "rules"]


def ablation_variants(kind: str, config: Config) -> List[Variant]:
    """
    * ``swa``: {SWA on, SWA off} × {no exchange, cross-instance,
      cross-kernel}
    * ``mix``: cross-instance exchange against mixing
    * ``rules``: cross-instance exchange under each partner rule

    Settings not named keep their configured values.
    """
    plan = config["PERTURBATION"]
    swa = config["SWA"]
    if kind == "swa":
        return [
            Variant(
                f"swa-{'on' if enabled else 'off'}_{mode.value}",
                {
                    "SWA": replace(swa, enabled=enabled),
                    "PERTURBATION": replace(plan, mode=mode),
                },
            )
            for enabled in [True, False]
            for mode in [
                PerturbationMode.none,
                PerturbationMode.cross_instance,
                PerturbationMode.cross_kernel,
            ]
        ]
    elif kind == "mix":
        return [
            Variant(mode.value, {"PERTURBATION": replace(plan, mode=mode)})
            for mode in [PerturbationMode.cross_instance, PerturbationMode.mix]
        ]
    elif kind == "rules":
        mode = plan.mode if plan.uses_partners else PerturbationMode.cross_instance
        return [
            Variant(
                rule.value,
                {"PERTURBATION": replace(plan, mode=mode, rule=rule)},
            )
            for rule in PartnerRule
        ]
    raise ConfigError(f"Unknown ablation '{kind}': expected one of {ABLATIONS}.")


def load_samples(config: Config) -> List[DomainSample]:
    """
    :returns: The image folder at ``DATA_ROOT`` if set, otherwise the
        ``SYNTHETIC`` dataset.
    """
    if root := config["DATA_ROOT"]:
        verbose(f"Loading image folder '{root}'…")
        return load_image_folder(str(root))
    spec = config["SYNTHETIC"]
    verbose(f"Generating synthetic dataset {spec}…")
    return generate_synthetic_domains(spec)


def image_geometry(samples: Sequence[DomainSample]) -> Dict[str, int]:
    """
    :returns: The ``classes``, ``input_channels`` and ``input_size``
        keyword arguments :func:`network_config_from` needs.
    :raises ConfigError: On non-square images.
    """
    if len(samples) == 0:
        raise ConfigError("The dataset holds no samples.")
    channels, height, width = samples[0].image.shape
    if height != width:
        raise ConfigError(f"Images must be square, got {height}×{width}.")
    return {
        "classes": max(sample.class_label for sample in samples) + 1,
        "input_channels": channels,
        "input_size": height,
    }


def config_echo(config: Config) -> str:
    """
    :returns: The configuration file text if there is one, else a JSON
        rendition of the values.
    """
    if config.source_text is not None:
        return config.source_text
    return config.dumps(include_meta=False)


def run_cell(
    config: Config,
    samples: Sequence[DomainSample],
    seed: int,
    target: int,
    cell_dir: Optional[str] = None,
) -> CellResult:
    """
    Trains a fresh network for one (seed, target) pair and evaluates it on
    the held-out samples, with SWA weights if enabled.

    If ``cell_dir`` is set, ``history.csv``, ``model.ddpe`` and (with SWA)
    ``swa.ddpe`` are written to it.
    """
    protocol: Protocol = config["PROTOCOL"]
    split = make_split(samples, protocol, target)
    model = build_network(
        network_config_from(config, **image_geometry(samples)),
        seed,
    )
    model, swa_model, history = train(model, split, train_config_from(config, seed))
    if cell_dir is not None:
        mkdirp(cell_dir)
        history.write_csv(os.path.join(cell_dir, "history.csv"))
        save_checkpoint(model, os.path.join(cell_dir, "model.ddpe"))
        if swa_model is not None:
            save_checkpoint(swa_model, os.path.join(cell_dir, "swa.ddpe"))
    evaluated = swa_model or model
    if protocol == Protocol.single_source:
        per_domain = evaluate_by_domain(evaluated, split.test)
        accuracy = sum(per_domain.values()) / len(per_domain)
        return CellResult(seed, target, accuracy, per_domain)
    return CellResult(seed, target, evaluate(evaluated, split.test))


class Experiment(object):
    """
    Trains and evaluates a fresh network for every seed, protocol target and
    variant, then reports the accuracies.

    :param config: The base configuration.
    :param variants: The arms of the experiment. A single unmodified arm
        named ``default`` if unset.
    :param name: Shown on the progress bar.
    """

    def __init__(
        self,
        config: Config,
        variants: Optional[Sequence[Variant]] = None,
        *,
        name: str = "Experiment",
    ) -> None:
        self.config = config
        self.variants = list(variants or [Variant("default")])
        names = [slugify(variant.name) for variant in self.variants]
        if len(set(names)) != len(names):
            raise HarnessException(f"Variant names are not unique: {names}")
        self.name = name
        self.run_dir: Optional[str] = None
        self.reports: Dict[str, RunReport] = {}

    def targets(self, config: Config, samples: Sequence[DomainSample]) -> List[int]:
        present = domains_of(samples)
        targets = config["TARGETS"]
        if targets is None:
            return list(present)
        for target in targets:
            if target not in present:
                raise ConfigError(
                    f"Target domain {target} is not among the available domains {list(present)}."
                )
        return list(targets)

    def start(
        self,
        run_dir: str,
        *,
        overwrite: bool = False,
    ) -> Dict[str, RunReport]:
        """
        The entry point for an experiment.

        Writes ``<variant>/report.json`` per variant, ``summary.json``, and
        the wall-clock time to ``runtime.txt``, plus per-cell directories and
        logs.

        :param run_dir: The directory to run in.
        :param overwrite: Delete the contents of ``run_dir`` first.
        :returns: The report of every variant.
        """
        self.run_dir = os.path.abspath(run_dir)
        if os.path.isfile(self.run_dir):
            raise HarnessException(
                f"Run directory '{run_dir}' already exists as a file and not a directory."
            )
        if os.path.isdir(self.run_dir) and len(os.listdir(self.run_dir)):
            if overwrite:
                shutil.rmtree(self.run_dir)
            else:
                info(f"Using existing run directory '{run_dir}'.")
        mkdirp(self.run_dir)

        handlers: List[logging.Handler] = []
        for level in ["WARNING", "ERROR"]:
            path = os.path.join(self.run_dir, f"{level.lower()}.log")
            handler = logging.FileHandler(path, mode="a+")
            handler.setLevel(level)
            handler.addFilter(LevelFilter([level]))
            handlers.append(handler)
            register_additional_handler(handler)

        path = os.path.join(self.run_dir, "experiment.log")
        handler = logging.FileHandler(path, mode="a+")
        handler.setLevel("VERBOSE")
        handlers.append(handler)
        register_additional_handler(handler)

        started = time.perf_counter()
        self.reports = {}
        progress_bar = ExperimentProgressBar(self.name)
        try:
            samples = load_samples(self.config)
            grids = []
            for variant in self.variants:
                config = self.config.with_overrides(all_variables, variant.overrides)
                targets = self.targets(config, samples)
                grids.append((variant, config, targets))

            progress_bar.start()
            progress_bar.set_max_stage_count(
                sum(len(config["SEEDS"]) * len(targets) for _, config, targets in grids)
            )
            for variant, config, targets in grids:
                report = self.run_variant(
                    variant, config, samples, targets, progress_bar
                )
                self.reports[variant.name] = report
            progress_bar.end()
            write_summary(
                list(self.reports.values()),
                os.path.join(self.run_dir, "summary.json"),
            )
            return self.reports
        finally:
            if progress_bar.started:
                progress_bar.end()
            elapsed = format_elapsed_time(time.perf_counter() - started)
            with open(os.path.join(self.run_dir, "runtime.txt"), "w") as f:
                f.write(f"{elapsed}\n")
            for registered_handler in handlers:
                deregister_additional_handler(registered_handler)
                registered_handler.close()

    def run_variant(
        self,
        variant: Variant,
        config: Config,
        samples: Sequence[DomainSample],
        targets: List[int],
        progress_bar: ExperimentProgressBar,
    ) -> RunReport:
        """
        Runs the (seed, target) cells of one variant on the global thread
        pool, see :func:`ddpe.common.set_tpe`, collecting them in grid order.

        If a cell fails, the cells finished so far are still written to the
        report, marked incomplete, before the error propagates.
        """
        assert self.run_dir is not None
        variant_dir = os.path.join(self.run_dir, slugify(variant.name))
        mkdirp(variant_dir)
        with open(os.path.join(variant_dir, "resolved.json"), "w") as f:
            f.write(config.dumps())

        seeds: List[int] = config["SEEDS"]
        if len(seeds) == 0 or len(targets) == 0:
            raise ConfigError("An experiment needs at least one seed and one target.")
        if not options.get_condensed_mode():
            rule(variant.name)
        info(
            f"Running variant '{variant.name}': {len(seeds)} seed(s) × {len(targets)} target(s)."
        )
        report = RunReport(
            variant.name,
            config["PROTOCOL"],
            list(seeds),
            list(targets),
            config_text=config_echo(config),
        )
        futures: List[Future[CellResult]] = []
        for i, seed in enumerate(seeds):
            for target in targets:
                cell_dir = os.path.join(variant_dir, f"{i}-seed-{seed}_target-{target}")
                futures.append(
                    get_tpe().submit(run_cell, config, samples, seed, target, cell_dir)
                )
        report_path = os.path.join(variant_dir, "report.json")
        try:
            for future in futures:
                progress_bar.start_stage(variant.name)
                cell = future.result()
                report.cells.append(cell)
                verbose(
                    f"{variant.name}: seed {cell.seed}, target {cell.target}: {cell.accuracy:.4f}"
                )
                progress_bar.end_stage()
        except BaseException:
            for future in futures:
                future.cancel()
            report.complete = False
            report.write(report_path)
            warn(
                f"Variant '{variant.name}' aborted: partial report written to '{report_path}'."
            )
            raise
        report.write(report_path)
        return report
