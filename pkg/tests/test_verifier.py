import csv
import io
import math
import xml.etree.ElementTree as ET

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gluelab import estimate_verifier as ev
from gluelab import exponent_ledger as el
from gluelab.fields_and_transforms import ProfileField, xi_box


@settings(max_examples=30, deadline=None)
@given(slope=st.floats(0.01, 3) | st.floats(-3, -0.01), c=st.floats(0.1, 10))
def test_ratefit_exact_power_law(slope, c):
    s = 2.0 ** -np.arange(3, 9)
    fit = ev.RateFit("p", s, c * s ** slope, slope, 1e-9)
    assert fit.slope == pytest.approx(slope, abs=1e-9)
    assert fit.r2 == pytest.approx(1.0)
    assert fit.passed


def test_ratefit_errors_and_flags():
    s = 2.0 ** -np.arange(6)
    fit = ev.RateFit("rel", s, s ** 0.55, 0.5, 0.15, relative=True)
    assert fit.error == pytest.approx(0.1)
    assert fit.passed
    noisy = ev.RateFit("noisy", s, np.array([1, 9, 2, 8, 3, 7.0]), 0.0, 10.0)
    assert noisy.flagged and not noisy.passed
    with pytest.raises(ValueError):
        ev.RateFit("short", s[:3], s[:3], 1.0, 0.1)
    bad = ev.RateFit("nan", s, np.array([1, 1, 0, 1, 1, 1.0]), 0.0, 1.0)
    assert bad.flagged and not bad.passed


def test_csv_and_svg(tmp_path):
    s = 2.0 ** -np.arange(3, 9)
    fits = [ev.RateFit("a", s, s ** 0.5, 0.5, 0.05, anchor="x, y"), ev.RateFit("b", s, s, 2.0, 0.1)]
    text = ev.fits_to_csv(fits, tmp_path / "r.csv")
    assert (tmp_path / "r.csv").read_text() == text == ev.fits_to_csv(fits)
    rows = list(csv.DictReader(io.StringIO(text)))
    assert list(rows[0]) == ev.CSV_COLUMNS
    assert [r["passed"] for r in rows] == ["1", "0"]
    assert rows[0]["anchor"] == "x, y"
    root = ET.fromstring(ev.fit_svg(fits[1]))
    assert root.tag.endswith("svg")
    assert "FAIL" in ET.tostring(root, encoding="unicode")


def test_leray_suite():
    out = ev.verify_leray(16, seed=3)
    assert max(out.values()) <= 1e-10


def test_elementary_estimates():
    out = ev.verify_elementary(el.derive(10, 100, 100))
    assert out["holder_equality"] == pytest.approx(1.0, abs=1e-12)
    assert all(x <= 1 for x in out["holder_power_ratios"])
    b = out["boundary"]
    assert b["rel_error"] <= 0.05 and b["r2"] >= 0.99
    assert out["dyadic_ok"]
    assert np.allclose([r for _, r in out["dyadic_ratios"]], out["dyadic_closed_form"], rtol=1e-6)


def test_deriv5_exact_on_quartics():
    x = np.linspace(0, 2, 21)
    y = 1 - 2 * x + 0.5 * x ** 3 - 0.25 * x ** 4
    dy = -2 + 1.5 * x ** 2 - x ** 3
    assert np.allclose(ev._deriv5(y, x[1] - x[0]), dy, atol=1e-11)


def test_forcing_scaling_gaussian():
    g = xi_box(32, 4.0)
    r2 = g.radius() ** 2
    F = ProfileField(g, 0.0, np.stack([np.exp(-2 * r2), 0 * r2, np.exp(-3 * r2)]))
    out = ev.forcing_scaling(F, 2.0 ** -np.arange(6, 10))
    assert out["max_rel_dev"] <= 0.01
    with pytest.raises(ValueError):
        ev.forcing_scaling(F, [0.5])


def test_background_energy_identity(swirl_bg):
    assert ev.ubar_energy_residual(swirl_bg) <= 1e-6


def test_measure_functions_positive(swirl_bg):
    for name in ("Gi", "Go"):
        v = ev.MEASURES[name](swirl_bg, 2.0 ** -4)
        assert math.isfinite(v) and v > 0
