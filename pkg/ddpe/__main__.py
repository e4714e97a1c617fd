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
import json
import traceback
from functools import partial, wraps
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional, Sequence, Tuple

from click import Choice, Parameter, Path, echo, pass_context
from cloup import (
    Context,
    argument,
    group,
    option,
)

from .__version__ import __version__
from .analysis import (
    FeatureSource,
    domain_probe,
    extract_features,
    pca_embed,
    probe_summary,
    write_embedding_csv,
    write_probe_csv,
)
from .common import GenericDictEncoder, cli as cli_types, mkdirp, set_tpe
from .common.cli import formatter_settings
from .config import Config, InvalidConfig
from .data import (
    SHAPE_NAMES,
    STYLE_NAMES,
    Protocol,
    export_image_folder,
    generate_synthetic_domains,
    make_split,
)
from .dynconv import build_network, load_checkpoint, save_checkpoint
from .harness import (
    ABLATIONS,
    Experiment,
    HarnessError,
    HarnessException,
    ablation_variants,
    all_variables,
    config_echo,
    evaluate,
    evaluate_by_domain,
    image_geometry,
    load_report,
    load_samples,
    network_config_from,
    render_table,
    train,
    train_config_from,
    write_summary_csv,
)
from .logging import (
    LogLevels,
    console,
    debug,
    err,
    info,
    options,
    set_log_level,
    success,
    warn,
)
from .tensor import NumericError

o = partial(option, show_default=True)


def set_log_level_cb(
    ctx: Context,
    param: Parameter,
    value: Optional[LogLevels],
):
    if value is None:
        return
    set_log_level(value)


def condensed_cb(ctx: Context, param: Parameter, value: bool):
    if value:
        options.set_condensed_mode(True)
        options.set_show_progress_bar(False)


def progressbar_cb(ctx: Context, param: Parameter, value: Optional[bool]):
    if value is not None:
        options.set_show_progress_bar(value)


def set_worker_count_cb(
    ctx: Context,
    param: Parameter,
    value: Optional[int],
):
    if value is None:
        return None
    set_tpe(ThreadPoolExecutor(max_workers=value))


def print_version(ctx: Context, param: Parameter, value: bool):
    if not value:
        return
    echo(f"ddpe v{__version__}")
    ctx.exit(0)


def exits_on_error(f: Callable) -> Callable:
    """
    Maps failures to exit codes: 1 for configuration errors and misuse, 2 for
    numeric failures and failed runs.
    """

    @wraps(f)
    def _impl(ctx: Context, *args, **kwargs):
        try:
            return f(ctx, *args, **kwargs)
        except InvalidConfig as e:
            if len(e.warnings) > 0:
                warn("The following warnings have been generated:")
                for warning in e.warnings:
                    warn(warning)
            err(f"Errors have occurred while loading the {e.config}.")
            for error in e.errors:
                err(error)
            err("ddpe will now quit. Please check your configuration.")
            ctx.exit(1)
        except HarnessException as e:
            err(f"The run has encountered an unexpected error:\n{e}")
            err("ddpe will now quit.")
            ctx.exit(1)
        except (HarnessError, NumericError) as e:
            err(f"The following error was encountered while running:\n{e}")
            err("ddpe will now quit.")
            ctx.exit(2)
        except ValueError as e:
            err(e)
            debug(traceback.format_exc())
            err("ddpe will now quit.")
            ctx.exit(1)

    return _impl


def load_config(
    config_file: Optional[str],
    override_strings: Sequence[str],
) -> Config:
    source = config_file if config_file is not None else {}
    return Config.load(
        source,
        all_variables,
        config_override_strings=list(override_strings),
    )


def config_options(f: Callable) -> Callable:
    return o(
        "-c",
        "--override",
        "override_strings",
        type=cli_types.OverrideString(),
        multiple=True,
        help="Overrides a configuration variable: KEY=VALUE, or SECTION.FIELD=VALUE for sections such as PERTURBATION. May be passed multiple times.",
    )(f)


def write_json(data, path: Optional[str]):
    text = json.dumps(data, cls=GenericDictEncoder, indent=4) + "\n"
    if path is None:
        echo(text, nl=False)
    else:
        with open(path, "w", encoding="utf8") as f:
            f.write(text)


@group(formatter_settings=formatter_settings)
@o(
    "--log-level",
    type=cli_types.IntEnumChoice(LogLevels),
    default=None,
    help="A logging level. Set to EPOCH or lower to see per-epoch training lines. [default: VERBOSE]",
    callback=set_log_level_cb,
    expose_value=False,
    show_default=False,
)
@o(
    "--show-progress-bar/--hide-progress-bar",
    type=bool,
    help="Whether to show the progress bar when running experiments. [default: show]",
    default=None,
    callback=progressbar_cb,
    expose_value=False,
)
@o(
    "--condensed/--full",
    type=bool,
    help="In condensed mode, per-epoch lines are suppressed regardless of log level, --hide-progress-bar is the default, and the log messages themselves are a bit more terse.",
    default=False,
    is_eager=True,
    callback=condensed_cb,
    expose_value=False,
)
@o(
    "--version",
    is_flag=True,
    is_eager=True,
    expose_value=False,
    help="Prints version information and exits",
    callback=print_version,
)
def cli():
    """
    Trains and analyzes dynamic convolution networks with parameter exchange
    for domain generalization.

    Try 'ddpe COMMAND --help' for help with a specific command.
    """
    pass


@cli.command("generate-data")
@argument("config_file", required=False, type=Path(exists=True, dir_okay=False))
@o(
    "--out",
    "out_dir",
    required=True,
    type=Path(file_okay=False),
    help="The image folder to create.",
)
@config_options
@pass_context
@exits_on_error
def generate_data(
    ctx: Context,
    config_file: Optional[str],
    out_dir: str,
    override_strings: Tuple[str, ...],
):
    """
    Writes the SYNTHETIC dataset as an image folder that DATA_ROOT can read
    back, plus a samples.json index.
    """
    config = load_config(config_file, override_strings)
    spec = config["SYNTHETIC"]
    samples = generate_synthetic_domains(spec)
    mkdirp(out_dir)
    paths = export_image_folder(
        samples,
        out_dir,
        STYLE_NAMES[: spec.domains],
        SHAPE_NAMES[: spec.classes],
    )
    index = [
        {
            "path": os.path.relpath(path, out_dir).replace(os.sep, "/"),
            "class": sample.class_label,
            "domain": sample.domain_label,
        }
        for path, sample in zip(paths, samples)
    ]
    write_json(index, os.path.join(out_dir, "samples.json"))
    success(f"Wrote {len(samples)} samples to '{out_dir}'.")


@cli.command("train")
@argument("config_file", type=Path(exists=True, dir_okay=False))
@o("--target", required=True, type=int, help="The protocol target domain.")
@o("--seed", default=0, type=int, help="Seeds initialization, batching and perturbation.")
@o(
    "--out",
    "out_dir",
    required=True,
    type=Path(file_okay=False),
    help="The directory to write the history, checkpoints and summary to.",
)
@config_options
@pass_context
@exits_on_error
def train_cmd(
    ctx: Context,
    config_file: str,
    target: int,
    seed: int,
    out_dir: str,
    override_strings: Tuple[str, ...],
):
    """
    Trains one network for a single (seed, target) pair.
    """
    config = load_config(config_file, override_strings)
    samples = load_samples(config)
    split = make_split(samples, config["PROTOCOL"], target)
    model = build_network(network_config_from(config, **image_geometry(samples)), seed)
    model, swa_model, history = train(model, split, train_config_from(config, seed))

    mkdirp(out_dir)
    history.write_csv(os.path.join(out_dir, "history.csv"))
    save_checkpoint(model, os.path.join(out_dir, "model.ddpe"))
    summary = {
        "seed": seed,
        "target": target,
        "protocol": config["PROTOCOL"].value,
        "accuracy": evaluate(model, split.test),
        "swa_accuracy": None,
        "config": config_echo(config),
    }
    if swa_model is not None:
        save_checkpoint(swa_model, os.path.join(out_dir, "swa.ddpe"))
        summary["swa_accuracy"] = evaluate(swa_model, split.test)
    write_json(summary, os.path.join(out_dir, "train.json"))
    success(f"Target accuracy: {summary['accuracy']:.4f}")


@cli.command("eval")
@argument("checkpoint", type=Path(exists=True, dir_okay=False))
@argument("config_file", type=Path(exists=True, dir_okay=False))
@o("--target", required=True, type=int, help="The protocol target domain.")
@o(
    "--out",
    "out_file",
    default=None,
    type=Path(dir_okay=False),
    help="Write the accuracy JSON here instead of to stdout.",
)
@config_options
@pass_context
@exits_on_error
def eval_cmd(
    ctx: Context,
    checkpoint: str,
    config_file: str,
    target: int,
    out_file: Optional[str],
    override_strings: Tuple[str, ...],
):
    """
    Evaluates a checkpoint on the held-out samples of a protocol target.
    """
    config = load_config(config_file, override_strings)
    model = load_checkpoint(checkpoint)
    split = make_split(load_samples(config), config["PROTOCOL"], target)
    result = {
        "target": target,
        "protocol": config["PROTOCOL"].value,
        "count": len(split.test),
        "accuracy": evaluate(model, split.test),
    }
    if config["PROTOCOL"] == Protocol.single_source:
        result["per_domain"] = {
            str(domain): accuracy
            for domain, accuracy in evaluate_by_domain(model, split.test).items()
        }
    write_json(result, out_file)


@cli.command("experiment")
@argument("config_file", type=Path(exists=True, dir_okay=False))
@o(
    "--run-dir",
    required=True,
    type=Path(file_okay=False),
    help="The directory to write reports, cells and logs to.",
)
@o(
    "--ablation",
    type=Choice(ABLATIONS),
    default=None,
    help="Runs a grid of variants instead of the configuration alone.",
)
@o(
    "-j",
    "--jobs",
    type=int,
    default=None,
    help="The number of (seed, target) cells to run concurrently. [default: 1]",
    callback=set_worker_count_cb,
    expose_value=False,
)
@o(
    "--overwrite",
    is_flag=True,
    default=False,
    help="Delete the contents of the run directory first.",
)
@config_options
@pass_context
@exits_on_error
def experiment_cmd(
    ctx: Context,
    config_file: str,
    run_dir: str,
    ablation: Optional[str],
    overwrite: bool,
    override_strings: Tuple[str, ...],
):
    """
    Trains and evaluates every seed × target (× variant) cell and writes
    report.json files and a summary.json.
    """
    config = load_config(config_file, override_strings)
    variants = ablation_variants(ablation, config) if ablation is not None else None
    experiment = Experiment(config, variants)
    reports = experiment.start(run_dir, overwrite=overwrite)
    console.print(render_table(list(reports.values())))


def _feature_inputs(
    checkpoint: str,
    config_file: str,
    target: Optional[int],
    override_strings: Sequence[str],
):
    config = load_config(config_file, override_strings)
    model = load_checkpoint(checkpoint)
    samples = load_samples(config)
    if target is not None:
        samples = make_split(samples, config["PROTOCOL"], target).train
    return config, model, samples


feature_source = o(
    "--source",
    type=Choice([source.value for source in FeatureSource]),
    default=FeatureSource.dynamic.value,
    help="Probe the coefficients of every block, or the static-only features of the last block.",
)
feature_target = o(
    "--target",
    type=int,
    default=None,
    help="Only use the training samples of this protocol target. [default: all samples]",
)


@cli.command("probe")
@argument("checkpoint", type=Path(exists=True, dir_okay=False))
@argument("config_file", type=Path(exists=True, dir_okay=False))
@feature_source
@feature_target
@o(
    "--out",
    "out_dir",
    required=True,
    type=Path(file_okay=False),
    help="The directory to write probe.csv and probe.json to.",
)
@config_options
@pass_context
@exits_on_error
def probe_cmd(
    ctx: Context,
    checkpoint: str,
    config_file: str,
    source: str,
    target: Optional[int],
    out_dir: str,
    override_strings: Tuple[str, ...],
):
    """
    Trains a shallow domain classifier on frozen features and records its
    held-out accuracy after every epoch.
    """
    config, model, samples = _feature_inputs(
        checkpoint, config_file, target, override_strings
    )
    features = extract_features(model, samples, FeatureSource(source))
    result = domain_probe(features, config["PROBE"])
    mkdirp(out_dir)
    write_probe_csv(os.path.join(out_dir, "probe.csv"), result)
    with open(os.path.join(out_dir, "probe.json"), "w", encoding="utf8") as f:
        f.write(probe_summary(result) + "\n")
    info(f"Final {source} domain accuracy: {result.final_accuracy:.4f}")


@cli.command("embed")
@argument("checkpoint", type=Path(exists=True, dir_okay=False))
@argument("config_file", type=Path(exists=True, dir_okay=False))
@feature_source
@feature_target
@o(
    "--out",
    "out_file",
    required=True,
    type=Path(dir_okay=False),
    help="The CSV file to write x,y,class,domain lines to.",
)
@config_options
@pass_context
@exits_on_error
def embed_cmd(
    ctx: Context,
    checkpoint: str,
    config_file: str,
    source: str,
    target: Optional[int],
    out_file: str,
    override_strings: Tuple[str, ...],
):
    """
    Projects features onto their two principal directions.
    """
    _, model, samples = _feature_inputs(
        checkpoint, config_file, target, override_strings
    )
    features = extract_features(model, samples, FeatureSource(source))
    write_embedding_csv(out_file, pca_embed(features), features)


@cli.command("report")
@argument("reports", nargs=-1, required=True, type=Path(exists=True, dir_okay=False))
@o(
    "--csv",
    "csv_file",
    default=None,
    type=Path(dir_okay=False),
    help="Also write a variant,target,mean,std,n summary here.",
)
@pass_context
@exits_on_error
def report_cmd(ctx: Context, reports: Tuple[str, ...], csv_file: Optional[str]):
    """
    Renders one or more report.json files as a table.
    """
    loaded: List = [load_report(path) for path in reports]
    console.print(render_table(loaded))
    if csv_file is not None:
        write_summary_csv(loaded, csv_file)


if __name__ == "__main__":
    cli()
