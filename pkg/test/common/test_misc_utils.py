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
import pytest


def test_slugify():
    from ddpe.common import slugify

    assert slugify("ABCD efg.xy-Z") == "abcd-efg-xy-z", "Failed slugify test"
    assert (
        slugify("Lorem ipsum   dolor sit amet") == "lorem-ipsum-dolor-sit-amet"
    ), "Failed slugify test"
    assert slugify("swa-on_cross_instance") == "swa-on_cross_instance"


@pytest.mark.parametrize(
    ("seconds", "expected"),
    [
        (0, "00:00:00.000"),
        (61.5, "00:01:01.500"),
        (3725.25, "01:02:05.250"),
    ],
)
def test_format_elapsed_time(seconds, expected):
    from ddpe.common import format_elapsed_time

    assert format_elapsed_time(seconds) == expected, "Elapsed time misformatted"


def test_zip_first():
    from ddpe.common import zip_first

    assert list(zip_first([1, 2, 3], ["a"], None)) == [
        (1, "a"),
        (2, None),
        (3, None),
    ], "zip_first did not pad the second iterable"
    assert list(zip_first([1], ["a", "b"], None)) == [
        (1, "a")
    ], "zip_first did not stop at the end of the first iterable"


def test_filter_filter():
    from ddpe.common import Filter

    assert (
        list(Filter([]).filter(["a", "b", "c"])) == []
    ), "filter with no wildcards matches nothing"

    assert (
        list(Filter(["*", "!b"]).filter(["b"])) == []
    ), "filter with deny wildcard did not work properly"

    assert list(Filter(["*", "!b"]).filter(["b", "be"])) == [
        "be"
    ], "filter with deny wildcard matched too many elements"

    assert list(
        Filter(["blocks.*", "!*adjuster*"]).filter(
            ["blocks.0.templates.0", "blocks.0.adjuster.weight", "classifier.bias"]
        )
    ) == ["blocks.0.templates.0"], "filter with a mixture of wildcards failed"


def test_mkdirp(_chdir_tmp):
    import os

    from ddpe.common import mkdirp

    mkdirp(os.path.join("a", "b", "c"))
    mkdirp(os.path.join("a", "b", "c"))
    assert os.path.isdir(os.path.join("a", "b", "c")), "mkdirp failed"


def test_examples_dir():
    import os

    from ddpe.common import get_examples_dir

    assert os.path.isfile(
        os.path.join(get_examples_dir(), "synthetic_loo.toml")
    ), "Bundled examples not found"
