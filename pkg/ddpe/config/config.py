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
import sys
import json
import dataclasses
from dataclasses import dataclass
from typing import (
    Any,
    Dict,
    List,
    Literal,
    Mapping,
    Optional,
    Sequence,
    Tuple,
    Union,
)

import yaml

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .variable import Variable
from ..logging import info, warn
from ..__version__ import __version__
from ..common import (
    GenericDict,
    GenericImmutableDict,
    AnyPath,
    is_string,
)

AnyConfig = Union[AnyPath, Mapping[str, Any]]

ConfigFormat = Literal["toml", "json", "yaml"]


class ConfigError(ValueError):
    """
    A configuration value is unusable for the requested operation, such as
    a zero sample count, an unknown domain or a perturbation mode that
    needs a larger batch.
    """

    pass


class UnknownExtensionError(ConfigError):
    """
    When a passed configuration file has an unrecognized extension, i.e.,
    not .toml, .json, .yaml or .yml.
    """

    def __init__(self, config: AnyPath) -> None:
        self.config = str(config)
        _, ext = os.path.splitext(config)
        super().__init__(
            f"Unsupported configuration file extension '{ext}' for '{config}'."
        )


class PassedDirectoryError(ConfigError):
    """
    When a passed configuration file is in fact a directory.
    """

    def __init__(self, config: AnyPath) -> None:
        self.config = str(config)
        super().__init__(
            f"'{config}' is a directory: please pass the configuration file itself."
        )


def _validate_config_file(config: AnyPath) -> ConfigFormat:
    config = str(config)
    if config.endswith(".toml"):
        return "toml"
    elif config.endswith(".json"):
        return "json"
    elif config.endswith(".yaml") or config.endswith(".yml"):
        return "yaml"
    elif os.path.isdir(config):
        raise PassedDirectoryError(config)
    else:
        raise UnknownExtensionError(config)


def _parse_config_text(text: str, format: ConfigFormat) -> Dict[str, Any]:
    if format == "toml":
        return tomllib.loads(text)
    elif format == "json":
        return json.loads(text)
    result = yaml.safe_load(text)
    if result is None:
        return {}
    return result


class InvalidConfig(ConfigError):
    """
    An error raised when a configuration under resolution is invalid.

    :param config: A human-readable name for the particular configuration
        causing this exception.
    :param warnings: A list of warnings generated during the loading of this
        configuration.
    :param errors: A list of errors generated during the loading of this
        configuration.
    :param message: An optional override for the Exception message.
    """

    def __init__(
        self,
        config: str,
        warnings: List[str],
        errors: List[str],
        message: Optional[str] = None,
        *args,
        **kwargs,
    ) -> None:
        self.config = config
        self.warnings = warnings
        self.errors = errors
        if message is None:
            message = "The following errors were encountered: \n"
            for error in self.errors:
                message += f"\t* {error}\n"
            message = message.strip()
        super().__init__(message, *args, **kwargs)


@dataclass
class Meta:
    """
    Constitutes metadata for a configuration object.
    """

    version: int = 1
    ddpe_version: Optional[str] = __version__

    def copy(self) -> "Meta":
        return dataclasses.replace(self)


class Config(GenericImmutableDict[str, Any]):
    """
    A map from ddpe configuration variable keys to their values.

    Use :meth:`load` to create new, validated configurations from dictionaries
    or files.

    :param meta: The :class:`Meta` object for this configuration.
    :param source_text: The verbatim text of the configuration file, if the
        configuration was loaded from one. Reports echo it for provenance.
    :param source_path: The path of said file.
    """

    meta: Meta
    source_text: Optional[str]
    source_path: Optional[str]

    def __init__(
        self,
        *args,
        meta: Optional[Meta] = None,
        source_text: Optional[str] = None,
        source_path: Optional[str] = None,
        **kwargs,
    ):
        self.meta = meta or Meta()
        self.source_text = source_text
        self.source_path = source_path
        super().__init__(*args, **kwargs)

    def copy(self, **overrides) -> "Config":
        """
        Produces a *shallow* copy of the configuration object.

        :param overrides: A series of configuration overrides as key-value pairs.
            These values are NOT validated; use :meth:`with_overrides` for
            validated overrides.
        """
        return Config(
            self,
            meta=self.meta,
            source_text=self.source_text,
            source_path=self.source_path,
            overrides=overrides,
        )

    def to_raw_dict(self, include_meta: bool = True) -> Dict[str, Any]:
        final = super().to_raw_dict()
        if include_meta:
            final["meta"] = self.meta
        return final

    def dumps(self, include_meta: bool = True, **kwargs) -> str:
        """
        :param include_meta: Whether to include the ``meta`` object in the
            serialized string.
        :param kwargs: Passed to ``json.dumps``.
        :returns: A JSON string representing the configuration.
        """
        if "indent" not in kwargs:
            kwargs["indent"] = 4
        kwargs.setdefault("sort_keys", True)
        return json.dumps(
            self.to_raw_dict(include_meta), cls=self.get_encoder(), **kwargs
        )

    def with_overrides(
        self,
        variables: Sequence[Variable],
        overrides: Mapping[str, Any],
    ) -> "Config":
        """
        Creates a new ``Config`` object by copying all values from the
        original and replacing some of them. All values are re-validated.

        :param variables: The variables to validate against.
        :param overrides: The replacement values, keyed by variable name.
        :returns: The new ``Config`` object
        """
        mutable: GenericDict[str, Any] = GenericDict(self.to_raw_dict(False))
        mutable.update(overrides)
        processed, errors = Config.__process_variable_list(
            mutable,
            [],
            variables,
        )
        if len(errors) != 0:
            raise InvalidConfig("configuration overrides", [], errors)
        return Config(
            processed,
            meta=self.meta.copy(),
            source_text=self.source_text,
            source_path=self.source_path,
        )

    @classmethod
    def load(
        Self,
        config_in: AnyConfig,
        variables: Sequence[Variable],
        *,
        config_override_strings: Optional[Sequence[str]] = None,
        base_dir: Optional[str] = None,
        quiet: bool = False,
    ) -> "Config":
        """
        Creates a new Config object based on a TOML, JSON or YAML file, or a
        dictionary.

        The returned config object is locked and cannot be modified.

        :param config_in: Either a file path or a Python Mapping object
            (such as ``dict``) representing an unprocessed configuration.
        :param variables: The variables the configuration is validated
            against. Keys that match no variable are errors.
        :param config_override_strings: A list of "overrides" in the form of
            NAME=VALUE strings. These are primarily for running ddpe from
            the command-line. Values are parsed permissively: strings are
            converted to numbers, lists and Booleans as needed. A
            dotted NAME, such as ``SWA.ENABLED``, sets one field of a section.
        :param base_dir: The directory relative paths are resolved against.
            Defaults to the directory of the configuration file, or the
            current working directory for mappings.
        :returns: The Config object.
        """
        source_text: Optional[str] = None
        source_path: Optional[str] = None
        identifier = "configuration dict"
        if isinstance(config_in, Mapping):
            raw = dict(config_in)
        elif is_string(config_in) or isinstance(config_in, os.PathLike):
            source_path = os.path.abspath(str(config_in))
            format = _validate_config_file(source_path)
            identifier = os.path.relpath(source_path)
            try:
                source_text = open(source_path, encoding="utf8").read()
            except OSError as e:
                raise InvalidConfig(identifier, [], [f"Could not be read: {e}"])
            try:
                raw = _parse_config_text(source_text, format)
            except (ValueError, yaml.YAMLError) as e:
                raise InvalidConfig(identifier, [], [f"Could not be parsed: {e}"])
            if not isinstance(raw, dict):
                raise InvalidConfig(identifier, [], ["Top level is not a table."])
            base_dir = base_dir or os.path.dirname(source_path)
        else:
            raise TypeError(f"Unsupported configuration input {type(config_in)}")

        base_dir = base_dir or os.getcwd()

        meta = Meta()
        if meta_raw := raw.pop("meta", None):
            try:
                meta = Meta(**meta_raw)
            except TypeError as e:
                raise InvalidConfig(identifier, [], [f"'meta' object is invalid: {e}"])

        override_keys = set()
        for string in config_override_strings or []:
            if "=" not in string:
                raise InvalidConfig(
                    "configuration overrides",
                    [],
                    [f"Override '{string}' is not in the format KEY=VALUE."],
                )
            key, value = string.split("=", 1)
            if "." in key:
                section, member = key.split(".", 1)
                existing = raw.get(section)
                existing = dict(existing) if isinstance(existing, dict) else {}
                existing[member.lower()] = value
                raw[section] = existing
                override_keys.add(section)
            else:
                raw[key] = value
                override_keys.add(key)

        permissive_variables = []
        strict_variables = []
        for variable in variables:
            if variable.name in override_keys:
                permissive_variables.append(variable)
            else:
                strict_variables.append(variable)

        warnings: List[str] = []
        if meta.ddpe_version is not None and meta.ddpe_version != __version__:
            warnings.append(
                f"The configuration was written for ddpe {meta.ddpe_version}; this is ddpe {__version__}."
            )

        processed, errors = Config.__process_variable_list(
            GenericDict(raw),
            permissive_variables,
            strict_variables,
            base_dir=base_dir,
        )

        if len(errors) != 0:
            raise InvalidConfig(identifier, warnings, errors)

        if not quiet:
            if len(warnings) > 0:
                info(
                    f"Loading {identifier} has generated the following warnings:"
                )
            for warning in warnings:
                warn(warning)

        return Config(
            processed,
            meta=meta,
            source_text=source_text,
            source_path=source_path,
        )

    @staticmethod
    def __process_variable_list(
        mutable: GenericDict[str, Any],
        variables: Sequence[Variable],
        strict_variables: Sequence[Variable],
        *,
        base_dir: Optional[str] = None,
    ) -> Tuple[GenericDict[str, Any], List[str]]:
        """
        Verifies a configuration object against a list of variables, returning
        an object with the variables normalized according to their types.

        :returns: A tuple of:
            [0] A final, processed configuration.
            [1] A list of errors.

            If the second element is non-empty, the first object is invalid.
        """
        errors: List[str] = []
        final: GenericDict[str, Any] = GenericDict()

        for variable_list, permissive in [(variables, True), (strict_variables, False)]:
            for variable in variable_list:
                try:
                    key, value_processed = variable.compile(
                        mutable_config=mutable,
                        permissive_typing=permissive,
                        base_dir=base_dir,
                    )
                    if key is not None:
                        del mutable[key]
                    final[variable.name] = value_processed
                except ValueError as e:
                    errors.append(str(e))
                if variable.name in mutable:
                    del mutable[variable.name]

        for key in sorted(mutable.keys()):
            errors.append(f"Unknown key '{key}' provided.")

        return (final, errors)
