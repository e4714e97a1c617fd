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
"""
Common Utilities Module
-----------------------

A number of common utility functions and classes used throughout the codebase.
"""
from .generic_dict import (
    GenericDictEncoder,
    GenericDict,
    GenericImmutableDict,
)
from .misc import (
    get_ddpe_root,
    get_examples_dir,
    slugify,
    mkdirp,
    zip_first,
    format_elapsed_time,
    Filter,
)
from .types import (
    is_number,
    is_real_number,
    is_string,
    Path,
    AnyPath,
)
from . import cli
from .tpe import get_tpe, set_tpe
from .rng import Stream, stream_rng
