"""Acceptance suite: one test per criterion, each printing its PASS/FAIL
line with the runtime against the stated budget."""

import pytest

from torsionlab import acceptance as A


def _run(fn):
    res = fn()
    status = "PASS" if res["passed"] else "FAIL"
    print(
        f"\n[{status}] {res['name']} ({res['seconds']:.1f}s / budget "
        f"{res['budget']:.0f}s): {res['detail']}"
    )
    assert res["functional"], res["detail"]
    assert res["seconds"] <= res["budget"], (
        f"runtime {res['seconds']:.1f}s exceeds budget {res['budget']:.0f}s"
    )


def test_criterion_1_birth_death_census():
    _run(A.criterion_1_birth_death_census)


def test_criterion_2_separation_stability():
    _run(A.criterion_2_separation_stability)


def test_criterion_3_anomaly_formula():
    _run(A.criterion_3_anomaly_formula)


def test_criterion_4_cheeger_muller():
    _run(A.criterion_4_cheeger_muller)


def test_criterion_5_spectral_gluing():
    _run(A.criterion_5_spectral_gluing)


def test_criterion_6_small_eigenvalue_decay():
    _run(A.criterion_6_small_eigenvalue_decay)


def test_criterion_7_agmon_decay():
    _run(A.criterion_7_agmon_decay)


def test_criterion_8_cubic_scaling():
    _run(A.criterion_8_cubic_scaling)


def test_criterion_9_mayer_vietoris_ranks():
    _run(A.criterion_9_mayer_vietoris_ranks)


def test_criterion_10_property_suites():
    _run(A.criterion_10_property_suites)
