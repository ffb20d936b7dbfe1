import pytest

from qsdse.cli_io import parse_accuracy_csv, parse_hw_csv
from qsdse.published import data_path, published_models

# Published hardware rows: (q, s, P, M, BRAM, power W, GOPJ, latency ms)
HW_ROWS = [
    (4, 1.0, 16, 8, 18, 0.28, 40.1, 0.31),
    (4, 2.0, 32, 8, 51, 0.38, 79.6, 0.42),
    (4, 4.0, 64, 8, 165, 0.76, 98.9, 0.65),
    (4, 4.5, 72, 8, 185, 0.83, 104.9, 0.70),
    (8, 1.0, 16, 8, 27, 0.45, 24.9, 0.31),
    (8, 2.0, 32, 8, 85, 0.68, 44.5, 0.42),
    (8, 4.0, 64, 8, 296, 1.47, 51.1, 0.65),
]

# Published energy/accuracy rows: (q, s, energy actual mJ, energy pred mJ, accuracy actual, accuracy pred)
ENERGY_ROWS = [
    (4, 2.5, 0.21, 0.23, 86.5, 86.4),
    (4, 3.5, 0.39, 0.41, 88.7, 84.3),
    (4, 4.5, 0.58, 0.60, 90.3, 90.1),
    (8, 2.5, 0.41, 0.42, 88.7, 88.5),
    (8, 3.0, 0.56, 0.59, 89.6, 89.4),
    (8, 3.5, 0.74, 0.76, 90.2, 90.0),
]


@pytest.fixture(scope="session")
def hw_samples():
    return parse_hw_csv(data_path("table2.csv"))


@pytest.fixture(scope="session")
def accuracy_samples():
    return parse_accuracy_csv(data_path("published_accuracy.csv"))


@pytest.fixture(scope="session")
def cal_models():
    return published_models()
