"""One test per acceptance criterion; each records a PASS/FAIL line printed at the end of the run.

Runtimes include the shared fixtures a criterion depends on (background, glued run).
"""
import time
from fractions import Fraction

import numpy as np
import pytest

from conftest import record
from gluelab import estimate_verifier as ev
from gluelab import exponent_ledger as el
from gluelab import gluing_engine as ge
from gluelab import inner_space as isp
from gluelab.fields_and_transforms import xi_box

# dense eigen-solve of the 16^3 side-4 box operator at zero background, frozen from an offline run
DENSE_ZERO_16 = -1.5639198527499198


def _fmt_fit(f):
    return f"{f.slope:.4f} vs {float(f.predicted):.4f} (r2 {f.r2:.4f})"


def test_criterion_01_exponent_ledger():
    t0 = time.perf_counter()
    rep = el.check_all(el.derive(10, 100, 100))
    ineq = [e for e in rep.entries if e.relation != "="]
    li = rep["Li"].margin
    gi_fails = not el.check_all(el.derive(1, 100, 100))["Gi"].passed
    dt = time.perf_counter() - t0
    ok = all(e.passed for e in ineq) and li == Fraction(1, 8) and gi_fails and dt < 1
    bad = [e.name for e in ineq if not e.passed]
    record(1, "exponent ledger", ok, f"{len(ineq)} inequality rows, failing {bad or 'none'}; Li margin {li}; "
           f"Gi fails at a=1: {gi_fails}", dt)
    assert ok


def test_criterion_02_leray():
    t0 = time.perf_counter()
    out = ev.verify_leray(32)
    dt = time.perf_counter() - t0
    keys = ("idempotence", "gradient", "self_adjoint")
    ok = all(out[k] <= 1e-10 for k in keys) and dt < 10
    record(2, "Leray projection", ok, ", ".join(f"{k} {out[k]:.1e}" for k in keys), dt)
    assert ok


@pytest.fixture(scope="module")
def smoothing(cache):
    return cache.get("smoothing", ev.verify_smoothing_rates)


def test_criterion_03_torus_smoothing(smoothing, cache):
    f1, f2 = smoothing["fits"][:2]
    dt = cache.seconds["smoothing"]
    ok = f1.passed and f2.passed and f1.r2 >= 0.98 and f2.r2 >= 0.98 and dt < 120
    record(3, "torus smoothing rates", ok, f"Pdiv L2->L2 {_fmt_fit(f1)}; P L2->Linf {_fmt_fit(f2)}", dt)
    assert ok


def test_criterion_04_weighted_semigroup(smoothing, cache):
    f3 = smoothing["fits"][2]
    dt = cache.seconds["smoothing"]
    ok = f3.passed and smoothing["long_bounded"] and dt < 300
    record(4, "weighted whole-space semigroup", ok,
           f"short-time slope {_fmt_fit(f3)}; long-time growth over tau in [1,5] "
           f"{smoothing['long_growth']:.3f} (< 2), spread {smoothing['long_spread']:.3g}", dt)
    assert ok


def test_criterion_05_convolution_lemma():
    t0 = time.perf_counter()
    cv = ev.verify_convolution_lemma()
    dt = time.perf_counter() - t0
    bad = [f.name for f in cv["fits"] if not f.passed]
    ok = not bad and cv["bounded"] and cv["oracle_error"] <= 1e-6 and dt < 60
    worst = max(cv["fits"], key=lambda f: f.error)
    record(5, "convolution lemma", ok,
           f"{len(cv['fits']) - len(bad)}/{len(cv['fits'])} slope fits in window (worst {worst.name}: "
           f"{worst.slope:.3f} vs {float(worst.predicted):.3f}); ratios bounded {cv['bounded']}; "
           f"pi/2 oracle error {cv['oracle_error']:.1e}", dt)
    assert ok


def test_criterion_06_eigensolver(swirl_bg, cache):
    t0 = time.perf_counter()
    lam0, _, rep0 = isp.dominant_eigenpair(isp.zero_background(xi_box(16, 4.0)).Ubar)
    dt = time.perf_counter() - t0 + cache.seconds["swirl"]
    gap = abs(lam0.real - DENSE_ZERO_16)
    ok = swirl_bg.residual <= 1e-6 and lam0.real <= 0 and gap <= 0.05 and dt < 600
    record(6, "eigensolver", ok, f"swirl 32^3 lambda {swirl_bg.lam.real:.6f}{swirl_bg.lam.imag:+.6f}i residual "
           f"{swirl_bg.residual:.1e}; zero background Re {lam0.real:.5f} vs dense {DENSE_ZERO_16:.5f}", dt)
    assert ok


def test_criterion_07_gluing_run(glue_run, cache):
    st, eng = glue_run
    t0 = time.perf_counter()
    defect = ge.fixed_point_defect(eng, st)
    asm = ge.assemble(eng, st)
    gaps = [ge.splitting_identity(n)["relative_gap"] for n in (16, 32, 64)]
    dt = time.perf_counter() - t0 + cache.seconds["glue"]
    ratios = st.contraction
    split_ok = gaps[0] > gaps[1] > gaps[2] and gaps[2] < 0.01
    ok = (len(ratios) > 0 and max(ratios) < 0.5 and defect <= 2e-6 and max(asm.div_max) <= 1e-8 and split_ok
          and dt < 600)
    record(7, "gluing run", ok, f"{st.iterate} iterations, max ratio {max(ratios):.2e}, defect {defect:.1e}, "
           f"max div {max(asm.div_max):.1e}, splitting gap n=16/32/64 "
           + "/".join(f"{g:.2e}" for g in gaps), dt)
    assert ok


def test_criterion_08_rate_table(swirl_bg):
    t0 = time.perf_counter()
    fits = ev.verify_operator_rates(swirl_bg, ("Go", "Gi", "Bo"))
    dt = time.perf_counter() - t0
    ok = all(f.passed for f in fits) and dt < 1800
    record(8, "decay-rate table", ok, "; ".join(f"{f.name} {f.slope:.4g} vs {float(f.predicted):.4g} "
                                                 f"({100 * f.error:.1f}%)" for f in fits), dt)
    assert ok


def test_criterion_09_leray_hopf(glue_run):
    st, eng = glue_run
    t0 = time.perf_counter()
    out = ev.verify_energy_and_integrability(eng, st)
    dt = time.perf_counter() - t0
    dec = out["decay"]
    ok = (out["ubar_energy"] <= 1e-6 and out["run_energy"] <= 1e-6 and out["forcing"]["max_rel_dev"] <= 0.01
          and dec["monotone"] and dec["slope"] >= 0.2)
    record(9, "Leray-Hopf facts", ok, f"energy residual {max(out['ubar_energy'], out['run_energy']):.1e}; "
           f"t^(3/4)||f|| deviation {out['forcing']['max_rel_dev']:.1e}; L2 decay slope {dec['slope']:.3f}, "
           f"monotone {dec['monotone']}", dt)
    assert ok


def test_criterion_10_nontriviality(glue_run):
    st, eng = glue_run
    t0 = time.perf_counter()
    m = ge.nontriviality_margin(eng, st)
    taus = np.array([t for t, _ in m])
    vals = np.array([v for _, v in m])[ge.oscillation_subsequence(eng.bg, taus)]
    dt = time.perf_counter() - t0
    lo, med = float(vals.min()), float(np.median(vals))
    ok = eng.bg.a > 0 and lo > 0 and lo >= 0.5 * med
    record(10, "nontriviality margin", ok, f"a = {eng.bg.a:.4f}; min {lo:.4e}, median {med:.4e} "
           f"over {len(vals)} times", dt)
    assert ok
