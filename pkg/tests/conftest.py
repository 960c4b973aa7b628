import pytest

from multiscan.calibrate import CalibrationTable


@pytest.fixture()
def table(tmp_path):
    return CalibrationTable(tmp_path / "tables")


@pytest.fixture(scope="session")
def session_table(tmp_path_factory):
    """Shared persisted calibrations for the expensive experiment tests."""
    return CalibrationTable(tmp_path_factory.mktemp("tables"))
