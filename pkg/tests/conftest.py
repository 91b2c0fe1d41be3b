import numpy as np
import pytest

from slicedrift.data_model import CATEGORICAL, NUMERIC, Dataset, Feature, FeatureSchema
from slicedrift.synthetic import make_synthetic

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def report_criterion():
    def record(number, passed, detail):
        ACCEPTANCE_LINES.append(f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {detail}")

    return record


def toy_dataset(x, theta=None, cat=None, labels=("a", "b", "c")):
    features = [Feature("x", NUMERIC)]
    columns = {"x": np.asarray(x, dtype=float)}
    categories = {}
    if cat is not None:
        features.append(Feature("g", CATEGORICAL))
        columns["g"] = np.asarray(cat)
        categories["g"] = labels
    schema = FeatureSchema(tuple(features), "wrong", categories)
    return Dataset(schema, columns, theta, name="toy")


@pytest.fixture(scope="session")
def synthetic_small():
    return make_synthetic(2000, seed=11)


@pytest.fixture(scope="session")
def synthetic_10k():
    return make_synthetic(10_000, seed=0)
