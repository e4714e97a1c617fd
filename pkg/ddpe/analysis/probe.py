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
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from .features import FeatureMatrix
from ..config import ConfigError
from ..common import Stream, stream_rng
from ..dynconv.block import fan_in_uniform
from ..logging import debug
from ..tensor import (
    Tensor,
    cross_entropy_loss,
    default_dtype,
    linear,
    no_grad,
    relu,
)


@dataclass
class ProbeConfig:
    """
    The shallow classifier used to measure how much domain information a set
    of features carries.

    :param hidden: The width of its ReLU hidden layer.
    :param lr: The full-batch gradient descent step size.
    :param epochs: The number of gradient descent steps.
    :param test_fraction: The share of every domain held out for testing.
    :param seed: Seeds the split and the initialization.
    """

    hidden: int = 32
    lr: float = 0.1
    epochs: int = 200
    test_fraction: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if self.hidden < 1:
            raise ValueError(f"Probe width must be positive, got {self.hidden}")
        if self.epochs < 1:
            raise ValueError(f"Probe epochs must be positive, got {self.epochs}")
        if not (self.lr > 0):
            raise ValueError(f"Probe learning rate must be positive, got {self.lr}")
        if not (0 < self.test_fraction < 1):
            raise ValueError(
                f"Probe test fraction must lie in (0, 1), got {self.test_fraction}"
            )


@dataclass
class ProbeResult:
    """
    :param curve: The held-out domain accuracy after every epoch.
    :param config: The probe configuration used.
    :param train_size: Rows the probe was fit on.
    :param test_size: Rows it was evaluated on.
    """

    curve: List[float]
    config: ProbeConfig = field(default_factory=ProbeConfig)
    train_size: int = 0
    test_size: int = 0

    @property
    def final_accuracy(self) -> float:
        return self.curve[-1]


def stratified_split(
    domains: np.ndarray,
    test_fraction: float,
    rng: np.random.Generator,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Holds out ``round(test_fraction · n)`` rows of every domain, at least one
    when a domain has two or more rows.

    :returns: Sorted train and test row indices.
    """
    train: List[int] = []
    test: List[int] = []
    for domain in np.unique(domains):
        rows = rng.permutation(np.flatnonzero(domains == domain))
        held = int(round(test_fraction * len(rows)))
        if len(rows) >= 2:
            held = min(max(held, 1), len(rows) - 1)
        else:
            held = 0
        test.extend(rows[:held].tolist())
        train.extend(rows[held:].tolist())
    return np.array(sorted(train), dtype=np.int64), np.array(sorted(test), dtype=np.int64)


def standardize(
    train: np.ndarray, *others: np.ndarray
) -> Tuple[np.ndarray, ...]:
    """
    Z-scores every matrix with the column statistics of ``train``. Constant
    columns keep a scale of 1.
    """
    mean = train.mean(axis=0)
    std = train.std(axis=0)
    std[std == 0] = 1.0
    return tuple((matrix - mean) / std for matrix in (train, *others))


def domain_probe(features: FeatureMatrix, config: ProbeConfig) -> ProbeResult:
    """
    Trains a one-hidden-layer classifier on frozen ``features`` to predict
    their domain labels, holding out a stratified share of every domain.

    :raises ConfigError: If fewer than two domains are present, or a split
        ends up empty.
    """
    domains, labels = np.unique(features.domain_labels, return_inverse=True)
    if len(domains) < 2:
        raise ConfigError(
            f"Domain probes need at least two domains, got {domains.tolist()}."
        )
    rng = stream_rng(config.seed, Stream.PROBE)
    train_rows, test_rows = stratified_split(labels, config.test_fraction, rng)
    if len(train_rows) == 0 or len(test_rows) == 0:
        raise ConfigError("Too few feature rows to hold out a probe test set.")
    x_train, x_test = standardize(
        features.rows[train_rows], features.rows[test_rows]
    )
    y_train, y_test = labels[train_rows], labels[test_rows]

    dims = features.dims
    with default_dtype(np.float64):
        hidden_weight = Tensor(
            fan_in_uniform(rng, (config.hidden, dims), dims), requires_grad=True
        )
        hidden_bias = Tensor(np.zeros(config.hidden), requires_grad=True)
        weight = Tensor(
            fan_in_uniform(rng, (len(domains), config.hidden), config.hidden),
            requires_grad=True,
        )
        bias = Tensor(np.zeros(len(domains)), requires_grad=True)
        parameters = [hidden_weight, hidden_bias, weight, bias]

        def logits(x: Tensor) -> Tensor:
            return linear(relu(linear(x, hidden_weight, hidden_bias)), weight, bias)

        train_input = Tensor(x_train)
        test_input = Tensor(x_test)
        curve: List[float] = []
        for epoch in range(config.epochs):
            for parameter in parameters:
                parameter.zero_grad()
            loss = cross_entropy_loss(logits(train_input), y_train)
            loss.backward()
            for parameter in parameters:
                assert parameter.grad is not None
                parameter.data -= config.lr * parameter.grad
            with no_grad():
                predicted = np.argmax(logits(test_input).data, axis=1)
            curve.append(float((predicted == y_test).mean()))
            debug(f"Probe epoch {epoch + 1}: loss {loss.item():.4f}, accuracy {curve[-1]:.4f}")
    return ProbeResult(curve, config, len(train_rows), len(test_rows))
