from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from gluelab import exponent_ledger as el

F = Fraction


def _kappa_oracle(r, p):
    # expanded by hand: 3/2 - 3/r + 3/(r p)
    return F(3, 2) - F(3) / r + F(3) / (r * p)


def test_default_point_exact_values():
    pr = el.derive(10, 100, 100)
    assert pr.gamma == F(1, 100)
    assert pr.kappa == F(14703, 10000)
    assert pr.beta == F(14703, 10000) + 10 - F(1, 200)
    assert pr.alpha - pr.beta == F(1, 8)
    assert pr.as_floats()["kappa"] == pytest.approx(1.4703, abs=1e-15)


def test_default_point_rows():
    rep = el.check_all(el.derive(10, 100, 100))
    assert rep["Li"].margin == F(1, 8)
    assert rep["Gi"].margin == 20 - rep.params.alpha
    # outer forcing row: the chain gives -gamma/2, a known sign slip recorded as a failing row
    assert rep["Go"].margin == -F(1, 200)
    assert rep.failed() == ["Go"]
    assert not rep.passed


def test_rows_fail_where_expected():
    rep = el.check_all(el.derive(10, 4, 4))
    assert "subcritical" in rep.failed()
    rep = el.check_all(el.derive("0.05", 100, 100))
    assert "Gi" in rep.failed() and "spectral_floor" in rep.failed()


def test_bad_parameters_raise():
    for args in ((10, 1, 100), (10, 100, 3), (0, 100, 100)):
        with pytest.raises(el.LedgerError):
            el.derive(*args)


def test_float_inputs_read_as_decimals():
    assert el.derive(0.1, 100, 100).a == F(1, 10)


def test_kappa_limit():
    assert el.kappa_of(10 ** 9, 10 ** 9) == _kappa_oracle(10 ** 9, 10 ** 9)
    assert abs(el.kappa_of(10 ** 9, 10 ** 9) - F(3, 2)) < F(1, 10 ** 8)


def test_kappa_increases_toward_limit():
    vals = el.sweep(lambda pr: pr.kappa, [10], [2, 5, 10, 50, 100, 1000, 10 ** 6], [1000])
    seq = [vals[(10, r, 1000)] for r in (2, 5, 10, 50, 100, 1000, 10 ** 6)]
    assert all(x < y for x, y in zip(seq, seq[1:]))
    assert all(x < F(3, 2) for x in seq)


def test_beta_increases_with_a():
    vals = el.sweep(lambda pr: pr.beta, [10, 12, 20], [100], [100])
    assert vals[(10, 100, 100)] < vals[(12, 100, 100)] < vals[(20, 100, 100)]


def test_rate_formulas():
    pr = el.derive(10, 100, 100)
    rates = el.rate_formulas(pr)
    assert rates["Go"] == pr.gamma / 2
    assert rates["Li"] == F(1, 8)
    assert rates["Bo"] == pr.beta + F(1, 100)
    assert rates["Gi"] == 2 * pr.a - pr.alpha
    with pytest.raises(el.LedgerError, match="Go"):
        el.predicted_rates(pr)
    assert el.predicted_rates(pr, strict=False) == rates


def test_report_text():
    txt = el.check_all(el.derive(10, 100, 100)).to_text()
    assert txt.startswith("# exponent ledger v1")
    assert "# overall: FAIL" in txt
    assert len(el.check_all(el.derive(10, 100, 100)).table()) == txt.count("\n") - 4


@settings(max_examples=80, deadline=None)
@given(a=st.integers(1, 5000).map(lambda n: F(n, 100)),
       r=st.integers(11, 5000).map(lambda n: F(n, 10)),
       p=st.integers(31, 5000).map(lambda n: F(n, 10)))
def test_identities_exact(a, r, p):
    pr = el.derive(a, r, p)
    assert isinstance(pr.beta, Fraction)
    assert pr.kappa == _kappa_oracle(r, p)
    assert pr.beta == pr.kappa + a - 1 / (2 * r)
    rep = el.check_all(pr)
    for name in ("gamma_link", "kappa_def", "alpha_gap", "Bi_aux", "Li_aux"):
        assert rep[name].passed
    assert rep["Li"].margin == F(1, 8)
    assert rep["Go"].margin == -pr.gamma / 2
    assert rep["subcritical"].passed == (2 / r + 3 / p < 1)
