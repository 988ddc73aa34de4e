import pytest

from fusionbench import Dataset

from benchlib import random_dataset


@pytest.fixture
def tiny_dataset() -> Dataset:
    return random_dataset(6, 4, seed=23)
