import pytest
from typer.testing import CliRunner

from app.config import settings
from app.main import create_app


@pytest.fixture(scope="session")
def model_b_code():
    from app.physics.code_akl import build_code

    return build_code("B")


@pytest.fixture(scope="session")
def model_a_code():
    from app.physics.code_akl import build_code

    return build_code("A")


@pytest.fixture(scope="function")
def output_dir(tmp_path, monkeypatch):
    """Send run artifacts to a per-test directory."""
    target = tmp_path / "output"
    monkeypatch.setattr(settings, "OUTPUT_DIR", str(target))
    return target


@pytest.fixture(scope="function")
def small_budget(monkeypatch):
    monkeypatch.setattr(settings, "ENUMERATION_BUDGET", 50)
    return 50


@pytest.fixture(scope="session")
def cli_app():
    return create_app()


@pytest.fixture(scope="function")
def runner():
    return CliRunner()
