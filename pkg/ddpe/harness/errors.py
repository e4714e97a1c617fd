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
from typing import Optional


class HarnessError(RuntimeError):
    """
    A ``RuntimeError`` that occurs when training, evaluation or an experiment
    fails to finish execution properly.
    """

    pass


class HarnessException(HarnessError):
    """
    A variant of :class:`HarnessError` for unexpected failures or failures due
    to misuse, such as:

    * Calling progress bar methods before starting it
    * Running an experiment into a path that exists as a file
    * Other unexpected failures
    """

    pass


class TrainingDiverged(HarnessError):
    """
    Raised when a training step produces non-finite values.

    :param epoch: The (1-based) epoch in which training diverged.
    :param step: The global (0-based) optimizer step.
    :param cause: The underlying error.
    """

    def __init__(
        self,
        epoch: int,
        step: int,
        cause: Optional[BaseException] = None,
    ) -> None:
        self.epoch = epoch
        self.step = step
        self.cause = cause
        message = f"Training diverged at epoch {epoch}, step {step}"
        if cause is not None:
            message += f": {cause}"
        super().__init__(message)
