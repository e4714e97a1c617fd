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
import io
import csv
import math
from dataclasses import dataclass, field
from typing import Collection, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import TrainingDiverged
from .optim import SGDState, cosine_lr, sgd_step, swa_update
from ..common import AnyPath, Filter, Stream, is_real_number, stream_rng
from ..config import ConfigError
from ..data import DatasetSplit, DomainSample, Sampler, collate, make_batches
from ..dynconv import Model
from ..logging import debug, epoch as log_epoch
from ..perturb import PerturbationPlan, joint_loss, predict
from ..tensor import Tensor, NumericError, no_grad


@dataclass
class SWAConfig:
    """
    :param enabled: Whether to keep a running average of the weights.
    :param start_fraction: Averaging starts at the end of epoch
        ``⌈start_fraction · epochs⌉`` and then happens at the end of every
        epoch.
    """

    enabled: bool = True
    start_fraction: float = 0.5

    def __post_init__(self):
        if not (0 < self.start_fraction < 1):
            raise ValueError(
                f"SWA start fraction must lie in (0, 1), got {self.start_fraction}"
            )

    def first_epoch(self, epochs: int) -> int:
        """
        :returns: The 1-based epoch after which averaging begins.
        """
        return max(1, math.ceil(self.start_fraction * epochs))


@dataclass
class TrainConfig:
    """
    Everything that determines one training run besides the network and the
    data.

    :param seed: Seeds the batching and perturbation streams.
    """

    epochs: int = 50
    batch_size: int = 64
    lr0: float = 1e-3
    momentum: float = 0.9
    weight_decay: float = 5e-4
    swa: SWAConfig = field(default_factory=SWAConfig)
    perturbation: PerturbationPlan = field(default_factory=PerturbationPlan)
    sampler: Sampler = Sampler.shuffle
    seed: int = 0

    def __post_init__(self):
        self.sampler = Sampler(self.sampler)
        if self.epochs < 1:
            raise ConfigError(f"Invalid epoch count {self.epochs}.")
        if not is_real_number(self.lr0) or self.lr0 < 0:
            raise ConfigError(f"Invalid initial learning rate {self.lr0}.")
        if self.momentum < 0 or self.weight_decay < 0:
            raise ConfigError("Momentum and weight decay must be non-negative.")
        if self.batch_size < 1:
            raise ConfigError(f"Invalid batch size {self.batch_size}.")
        if self.perturbation.active and self.batch_size < 2:
            raise ConfigError(
                "Parameter exchange needs a batch size of at least 2 to find partners."
            )


@dataclass
class EpochRecord:
    """
    :param epoch: 1-based.
    :param ce_clean: The mean unperturbed cross entropy over the epoch's
        batches.
    :param ce_perturbed: The mean perturbed cross entropy, if a perturbed
        pass ran.
    :param train_acc: The share of correct unperturbed predictions.
    :param lr: The learning rate of the epoch's last step.
    :param fallbacks: Instances that kept their own coefficients for lack of
        an eligible partner.
    """

    epoch: int
    ce_clean: float
    ce_perturbed: Optional[float]
    train_acc: float
    lr: float
    fallbacks: int = 0


HISTORY_COLUMNS = ["epoch", "ce_clean", "ce_perturbed", "train_acc", "lr"]


@dataclass
class History:
    records: List[EpochRecord] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def __getitem__(self, index: int) -> EpochRecord:
        return self.records[index]

    def append(self, record: EpochRecord):
        self.records.append(record)

    def column(self, name: str) -> List[Optional[float]]:
        return [getattr(record, name) for record in self.records]

    def to_csv(self) -> str:
        """
        :returns: One line per epoch. Reals are written with ``repr`` so they
            read back bit for bit; a missing perturbed loss is left empty.
        """
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(HISTORY_COLUMNS)
        for record in self.records:
            writer.writerow(
                [
                    record.epoch,
                    repr(record.ce_clean),
                    "" if record.ce_perturbed is None else repr(record.ce_perturbed),
                    repr(record.train_acc),
                    repr(record.lr),
                ]
            )
        return buffer.getvalue()

    def write_csv(self, path: AnyPath):
        with open(path, "w", encoding="utf8", newline="") as f:
            f.write(self.to_csv())


def _split_samples(data) -> Sequence[DomainSample]:
    if isinstance(data, DatasetSplit):
        return data.train
    return data


def train(
    model: Model,
    data,
    config: TrainConfig,
    *,
    frozen: Collection[str] = (),
) -> Tuple[Model, Optional[Model], History]:
    """
    Optimizes ``model`` in place with the joint objective, SGD with momentum
    and a cosine learning rate schedule over all steps.

    :param data: A :class:`DatasetSplit`, whose training samples are used, or
        a sequence of samples.
    :param config: The training settings.
    :param frozen: Wildcards of parameter names (see
        :meth:`Model.named_parameters`) to leave untouched.
    :returns: The trained model, the weight-averaged copy if SWA is enabled
        and the per-epoch history.
    :raises TrainingDiverged: If any value becomes non-finite.
    """
    samples = _split_samples(data)
    if len(samples) == 0:
        raise ConfigError("Cannot train on zero samples.")
    plan = config.perturbation
    perturbation_rng = stream_rng(config.seed, Stream.PERTURBATION)

    named = model.named_parameters()
    frozen_names = set(Filter(frozen).filter(named.keys()))
    trainable = [
        parameter for name, parameter in named.items() if name not in frozen_names
    ]
    state = SGDState()

    batches_per_epoch = len(
        make_batches(
            samples,
            config.batch_size,
            config.sampler,
            config.seed,
            0,
            perturbation_active=plan.active,
        )
    )
    total_steps = config.epochs * batches_per_epoch
    swa_start = config.swa.first_epoch(config.epochs)
    average: Optional[Dict[str, np.ndarray]] = None
    collected = 0

    history = History()
    step = 0
    for epoch in range(1, config.epochs + 1):
        batches = make_batches(
            samples,
            config.batch_size,
            config.sampler,
            config.seed,
            epoch - 1,
            perturbation_active=plan.active,
        )
        ce_clean: List[float] = []
        ce_perturbed: List[float] = []
        correct = 0
        count = 0
        fallbacks = 0
        lr = config.lr0
        for batch in batches:
            lr = cosine_lr(step, total_steps, config.lr0)
            model.zero_grad()
            try:
                loss, diagnostics = joint_loss(model, batch, plan, perturbation_rng)
                loss.backward()
                sgd_step(
                    trainable,
                    [parameter.grad for parameter in trainable],
                    lr,
                    config.momentum,
                    config.weight_decay,
                    state,
                )
            except NumericError as e:
                raise TrainingDiverged(epoch, step, e) from None
            if not all(np.all(np.isfinite(p.data)) for p in trainable):
                raise TrainingDiverged(epoch, step)
            ce_clean.append(diagnostics.ce_clean)
            if diagnostics.ce_perturbed is not None:
                ce_perturbed.append(diagnostics.ce_perturbed)
            correct += diagnostics.correct
            count += diagnostics.count
            fallbacks += diagnostics.fallbacks
            step += 1
        record = EpochRecord(
            epoch,
            float(np.mean(ce_clean)),
            float(np.mean(ce_perturbed)) if len(ce_perturbed) else None,
            correct / count,
            lr,
            fallbacks,
        )
        history.append(record)
        perturbed = (
            f"{record.ce_perturbed:.4f}" if record.ce_perturbed is not None else "n/a"
        )
        log_epoch(
            f"Epoch {epoch}/{config.epochs}: ce {record.ce_clean:.4f}, perturbed {perturbed}, acc {record.train_acc:.4f}, lr {lr:.3g}"
        )
        if config.swa.enabled and epoch >= swa_start:
            average = swa_update(average, model.state_dict(), collected)
            collected += 1
            debug(f"Averaged checkpoint {collected} after epoch {epoch}.")

    swa_model: Optional[Model] = None
    if config.swa.enabled and average is not None:
        swa_model = model.copy()
        swa_model.load_state_dict(average)
    return model, swa_model, history


def predict_samples(
    model: Model,
    samples: Sequence[DomainSample],
    *,
    batch_size: int = 256,
) -> np.ndarray:
    """
    :returns: The unperturbed argmax prediction of every sample, in order.
    """
    predictions: List[np.ndarray] = []
    with no_grad():
        for start in range(0, len(samples), batch_size):
            indices = list(range(start, min(start + batch_size, len(samples))))
            batch = collate(samples, indices)
            predictions.append(predict(model(Tensor(batch.images)).logits.data))
    return np.concatenate(predictions)


def evaluate(
    model: Model,
    samples: Sequence[DomainSample],
    *,
    batch_size: int = 256,
) -> float:
    """
    :returns: The share of samples whose argmax prediction is their class;
        ties go to the lowest class index.
    :raises ConfigError: If ``samples`` is empty.
    """
    if len(samples) == 0:
        raise ConfigError("Cannot evaluate on zero samples.")
    predictions = predict_samples(model, samples, batch_size=batch_size)
    labels = np.array([sample.class_label for sample in samples])
    return float((predictions == labels).mean())


def evaluate_by_domain(
    model: Model,
    samples: Sequence[DomainSample],
    *,
    batch_size: int = 256,
) -> Dict[int, float]:
    """
    :returns: The accuracy on the samples of every domain present, keyed by
        domain label in ascending order.
    """
    if len(samples) == 0:
        raise ConfigError("Cannot evaluate on zero samples.")
    predictions = predict_samples(model, samples, batch_size=batch_size)
    labels = np.array([sample.class_label for sample in samples])
    domains = np.array([sample.domain_label for sample in samples])
    return {
        int(domain): float((predictions[domains == domain] == labels[domains == domain]).mean())
        for domain in np.unique(domains)
    }
