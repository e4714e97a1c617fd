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
The Configuration Module
------------------------

This module includes typed configuration variables and the loader that
validates configuration files against them. Configuration objects are the
primary input to an experiment.
"""
from .variable import Variable
from .config import (
    Meta,
    Config,
    ConfigError,
    InvalidConfig,
    AnyConfig,
    PassedDirectoryError,
    UnknownExtensionError,
)
