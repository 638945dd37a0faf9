# Copyright Amazon.com, Inc. or its affiliates. All Rights Reserved.

import re
from pathlib import Path

import pytest

_copyright_header_re = re.compile(
    r"Copyright Amazon\.com, Inc\. or its affiliates\. All Rights Reserved\.", re.IGNORECASE
)
_generated_by_scm = re.compile(r"# file generated by (setuptools_scm|hatch-vcs)", re.IGNORECASE)

_HEADER_WINDOW = 10


def _project_root() -> Path:
    root = Path(__file__).parent
    while not (root / "pyproject.toml").exists():
        root = root.parent
    return root


def _head(path: Path) -> list[str]:
    with open(path, encoding="utf-8") as f:
        return [line for _, line in zip(range(_HEADER_WINDOW + 1), f)]


def _source_files() -> list[Path]:
    root = _project_root()
    files = [
        path
        for top_level_dir in ("src", "test")
        for path in sorted((root / top_level_dir).glob("**/*.py"))
    ]
    return [
        path
        for path in files
        if not (path.name == "_version.py" and any(_generated_by_scm.search(l) for l in _head(path)))
    ]


@pytest.mark.parametrize("path", _source_files(), ids=lambda p: f"{p.parent.name}/{p.name}")
def test_copyright_header(path: Path) -> None:
    assert any(
        _copyright_header_re.search(line) for line in _head(path)
    ), f"Could not find a valid Amazon.com copyright header in the top of {path}. Please add one."
