"""Tests for cli package version resolution."""

from __future__ import annotations

import importlib.util
import tomllib
from importlib.metadata import PackageNotFoundError
from pathlib import Path


def _load_isolated(project_root: Path):
    spec = importlib.util.spec_from_file_location(
        "cli_init_isolated", project_root / "cli" / "__init__.py"
    )
    assert spec and spec.loader
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    return mod


class TestCliVersion:
    """Test __version__ and the source-tree fallback."""

    def test_dev_version_reads_pyproject(self, project_root: Path) -> None:
        """From a checkout the version comes from pyproject.toml."""
        import cli

        with open(project_root / "pyproject.toml", "rb") as f:
            expected = tomllib.load(f)["project"]["version"]
        assert cli._dev_version() == expected

    def test_dev_version_without_pyproject(self, monkeypatch, tmp_path: Path) -> None:
        """No pyproject next to the package gives the placeholder."""
        import cli

        monkeypatch.setattr(cli, "__file__", str(tmp_path / "cli" / "__init__.py"))
        assert cli._dev_version() == "0.0.0-dev"

    def test_fallback_when_not_installed(self, monkeypatch, project_root: Path) -> None:
        """Without distribution metadata the pyproject version is used."""

        def _missing(_name: str) -> str:
            raise PackageNotFoundError()

        monkeypatch.setattr("importlib.metadata.version", _missing)
        mod = _load_isolated(project_root)
        assert mod.__version__ == mod._dev_version()
