import csv

import numpy as np
import pytest

from chronoflow.dataset import Dataset, Series


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    return str(path)


def dataset_from_arrays(values_by_id, variable_names=("v",)):
    """Build a Dataset from {series_id: (times, values)} pairs."""
    series = tuple(Series(sid, times, vals)
                   for sid, (times, vals) in values_by_id.items())
    return Dataset(series, tuple(variable_names))


@pytest.fixture
def rng():
    return np.random.default_rng(0)
