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
from concurrent.futures import ThreadPoolExecutor

TPE = ThreadPoolExecutor(max_workers=1)


def set_tpe(tpe: ThreadPoolExecutor):
    """
    Replaces ddpe's global ``ThreadPoolExecutor``, which runs the
    (seed, target) cells of an experiment.

    Cells must not submit work to this executor themselves.

    :param tpe: The replacement ThreadPoolExecutor
    """
    global TPE
    TPE = tpe


def get_tpe() -> ThreadPoolExecutor:
    """
    :returns: ddpe's global ``ThreadPoolExecutor``. A single worker by
        default; see :func:`set_tpe`.
    """
    global TPE
    return TPE

