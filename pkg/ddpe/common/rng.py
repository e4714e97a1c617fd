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
from enum import IntEnum

import numpy as np


class Stream(IntEnum):
    """
    Independent random streams derived from one experiment seed. Changing how
    one concern consumes randomness never shifts the draws of another.
    """

    INIT = 0
    BATCHING = 1
    PERTURBATION = 2
    PROBE = 3


def stream_rng(seed: int, stream: Stream, *extra: int) -> np.random.Generator:
    """
    :param seed: The experiment (or run) seed.
    :param stream: The concern the generator serves.
    :param extra: Further integers mixed into the seed, e.g. an epoch.
    :returns: A generator seeded from ``SeedSequence([seed, stream, *extra])``.
    """
    return np.random.default_rng(
        np.random.SeedSequence([int(seed), int(stream), *[int(e) for e in extra]])
    )
