import pytest

from gliotrial import median_patient


@pytest.fixture(scope="session")
def mvp():
    """Median virtual patient under the shipped defaults."""
    return median_patient()
