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
from collections import Counter

import numpy as np
import pytest


@pytest.fixture
def samples():
    from ddpe.data import SyntheticSpec, generate_synthetic_domains

    return generate_synthetic_domains(SyntheticSpec(samples_per_cell=25))


def _keys(samples):
    return Counter((id(s)) for s in samples)


def test_leave_one_domain_out(samples):
    from ddpe.data import leave_one_domain_out_split, Protocol

    split = leave_one_domain_out_split(samples, 3)
    assert (len(split.train), len(split.test)) == (300, 100), "Expected 300/100"
    assert split.train_size == 300
    assert split.protocol == Protocol.leave_one_domain_out
    assert all(s.domain_label != 3 for s in split.train), "Target leaked into training"
    assert all(s.domain_label == 3 for s in split.test), "Test holds a source domain"
    assert _keys(split.train) + _keys(split.test) == _keys(samples), "Not a partition"


def test_single_source(samples):
    from ddpe.data import make_split, Protocol

    split = make_split(samples, Protocol.single_source, 0)
    assert (len(split.train), len(split.test)) == (100, 300), "Expected 100/300"
    assert all(s.domain_label == 0 for s in split.train)
    assert all(s.domain_label != 0 for s in split.test)
    assert _keys(split.train) + _keys(split.test) == _keys(samples), "Not a partition"


def test_unknown_domain(samples):
    from ddpe.config import ConfigError
    from ddpe.data import leave_one_domain_out_split, single_source_split

    with pytest.raises(ConfigError, match="Domain 7"):
        leave_one_domain_out_split(samples, 7)
    with pytest.raises(ConfigError, match="Domain 7"):
        single_source_split(samples, 7)


def test_single_batch(samples):
    from ddpe.data import make_batches, Sampler

    batches = make_batches(samples, len(samples), Sampler.shuffle, 0, 0)
    assert len(batches) == 1, "batch_size = N gives one batch"
    assert sorted(batches[0].indices.tolist()) == list(range(len(samples)))


@pytest.mark.parametrize("sampler", ["shuffle", "domain_balanced"])
def test_epoch_coverage(samples, sampler):
    from ddpe.data import make_batches, Sampler

    batches = make_batches(samples, 16, Sampler(sampler), 3, 1)
    indices = np.concatenate([b.indices for b in batches])
    assert sorted(indices.tolist()) == list(range(len(samples))), "Each sample once"
    assert [b.size for b in batches[:-1]] == [16] * (len(batches) - 1)
    assert batches[-1].size == len(samples) - 16 * (len(batches) - 1), "Short batch kept"
    for batch in batches:
        assert batch.images.shape[1:] == (3, 16, 16)
        assert batch.labels.tolist() == [samples[i].class_label for i in batch.indices]


def test_domain_balanced(samples):
    from ddpe.data import make_batches, leave_one_domain_out_split, Sampler

    train = leave_one_domain_out_split(samples, 0).train
    for batch in make_batches(train, 6, Sampler.domain_balanced, 0, 0):
        if batch.size == 6:
            counts = Counter(batch.domains.tolist())
            assert sorted(counts.values()) == [2, 2, 2], "Expected 2 per domain"


def test_batches_deterministic(samples):
    from ddpe.data import make_batches, Sampler

    a = make_batches(samples, 32, Sampler.shuffle, 9, 2)
    b = make_batches(samples, 32, Sampler.shuffle, 9, 2)
    c = make_batches(samples, 32, Sampler.shuffle, 9, 3)
    assert all(np.array_equal(x.indices, y.indices) for x, y in zip(a, b))
    assert not all(np.array_equal(x.indices, y.indices) for x, y in zip(a, c))


def test_batch_size_errors(samples):
    from ddpe.config import ConfigError
    from ddpe.data import make_batches, Sampler

    with pytest.raises(ConfigError, match="at least 2"):
        make_batches(samples, 1, Sampler.shuffle, 0, 0, perturbation_active=True)
    with pytest.raises(ConfigError, match="Invalid batch size"):
        make_batches(samples, 0, Sampler.shuffle, 0, 0)
    assert len(make_batches(samples[:3], 1, Sampler.shuffle, 0, 0)) == 3
