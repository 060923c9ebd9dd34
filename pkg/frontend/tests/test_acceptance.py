"""Acceptance for the figure package against real simulation outputs.

Point POROPERM_DATA at a directory of full-profile CLI outputs (records,
curve, sweep and field CSVs); without it these tests are skipped and the
fixture-based suite in test_figures.py covers rendering.
"""

import os
import warnings
from pathlib import Path

import numpy as np
import pytest

from poroperm_figures.cli import KINDS, render_directory
from poroperm_figures.readers import read_records

DATA_DIR = os.environ.get("POROPERM_DATA")

pytestmark = pytest.mark.skipif(
    not DATA_DIR, reason="set POROPERM_DATA to a directory of CLI outputs")

REFERENCE_BINS = {
    "rectangular": {0.1: (0.4789, 0.0037), 0.5: (0.2717, 0.0019),
                    0.9: (0.0777, 0.0012)},
    "triangular": {0.1: (0.6226, 0.0077), 0.5: (0.3604, 0.0105),
                   0.9: (0.1052, 0.0103)},
    "unstructured": {0.1: (0.6030, 0.0066), 0.5: (0.3555, 0.0062),
                     0.9: (0.1024, 0.0049)},
}


def test_all_available_kinds_render(tmp_path):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        written = render_directory(Path(DATA_DIR), tmp_path, KINDS)
    assert written, f"no renderable inputs in {DATA_DIR}"
    assert all(p.stat().st_size > 0 for p in written)


@pytest.mark.parametrize("topology", list(REFERENCE_BINS))
def test_histogram_peaks_near_reference_means(topology):
    path = Path(DATA_DIR) / f"records_{topology}.csv"
    if not path.exists():
        pytest.skip(f"{path.name} not present")
    table = read_records(path)
    kappa = table.floats("kappa_n")
    f_c = table.floats("f_c")
    for center, (mean, std) in REFERENCE_BINS[topology].items():
        sel = (kappa > center - 0.05) & (kappa < center + 0.05)
        values = f_c[sel]
        assert values.size > 0, f"bin {center} empty"
        counts, edges = np.histogram(values, bins=25)
        peak = 0.5 * (edges[counts.argmax()] + edges[counts.argmax() + 1])
        assert abs(peak - mean) <= 3.0 * std, (
            f"bin {center}: peak {peak:.4f} vs {mean} +/- {3 * std:.4f}")
