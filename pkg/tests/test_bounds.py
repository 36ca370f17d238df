import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

import magspec as ms
from magspec import bounds as bd
from magspec import cheeger as ch


def _indep_lich(K, d, n):
    disc = (K - d) ** 2 - 4 * (n - 1) / n * d * d
    r = math.sqrt(max(disc, 0.0))
    return n * (K - d - r) / (2 * (n - 1)), n * (K - d + r) / (2 * (n - 1)), n / (n - 1) * r


def test_lichnerowicz_classical():
    for n in (2, 3, 5):
        b = bd.lichnerowicz_bounds(1.5, 0.0, n)
        assert b["applicable"]
        assert b["a_minus"] == 0.0
        assert b["a_plus"] == pytest.approx(n * 1.5 / (n - 1))
        assert b["gap"] == pytest.approx(n * 1.5 / (n - 1))


def test_lichnerowicz_boundary():
    d = 1 / (1 + math.sqrt(2))
    b = bd.lichnerowicz_bounds(1.0, d, 2)
    assert b["applicable"]
    assert b["gap"] == pytest.approx(0.0, abs=1e-7)
    assert b["a_minus"] == pytest.approx(1 - d, abs=1e-7)
    assert b["a_plus"] == pytest.approx(1 - d, abs=1e-7)


def test_lichnerowicz_arithmetic():
    b = bd.lichnerowicz_bounds(1.0, 0.2, 2)
    assert b["a_minus"] == pytest.approx(0.8 - math.sqrt(0.56), rel=1e-14)
    assert b["a_plus"] == pytest.approx(0.8 + math.sqrt(0.56), rel=1e-14)
    assert b["gap"] == pytest.approx(1.4966629547095764, rel=1e-14)


@given(st.floats(0.1, 10), st.floats(0, 1), st.integers(2, 6))
def test_lichnerowicz_matches_independent_formula(K, frac, n):
    d = frac * K / (1 + 2 * math.sqrt((n - 1) / n))
    b = bd.lichnerowicz_bounds(K, d, n)
    am, ap, gap = _indep_lich(K, d, n)
    # the square root of a vanishing discriminant amplifies rounding to sqrt(eps)
    tol = 1e-7 * K
    assert b["applicable"]
    assert b["a_minus"] == pytest.approx(am, abs=tol)
    assert b["a_plus"] == pytest.approx(ap, abs=tol)
    assert b["gap"] == pytest.approx(b["a_plus"] - b["a_minus"], abs=1e-12 * K)
    assert b["gap"] == pytest.approx(gap, abs=tol)


def test_lichnerowicz_not_applicable():
    assert not bd.lichnerowicz_bounds(1.0, 0.5, 2)["applicable"]
    r = bd.check_lichnerowicz([0.1, 2.0], 1.0, 0.5, 2)
    assert r.verdict == "not-applicable"
    assert bd.check_lichnerowicz([0.0, 1.0], 0.0, 0.0, 2).verdict == "not-applicable"


def test_lichnerowicz_errors():
    with pytest.raises(ValueError):
        bd.lichnerowicz_bounds(1.0, 0.1, 1)
    with pytest.raises(ValueError):
        bd.lichnerowicz_bounds(1.0, -0.1, 2)


def test_check_lichnerowicz_verdicts():
    assert bd.check_lichnerowicz([1e-12, 2.0], 1.0, 0.0, 2).verdict == "holds"
    assert bd.check_lichnerowicz([0.0, 1.5], 1.0, 0.0, 2).verdict == "violated"
    assert bd.check_lichnerowicz([0.2, 2.0], 1.0, 0.2, 2).verdict == "violated"
    with pytest.raises(ValueError):
        bd.check_lichnerowicz([0.0], 1.0, 0.0, 2)


def test_quadratic():
    assert bd.check_quadratic_inequality([0.0], 1.0, 0.0, 2).verdict == "holds"
    lam = 0.5 * 2 / (2 - 1)
    r = bd.check_quadratic_inequality([lam], 1.0, 0.0, 2)
    assert r.verdict == "violated" and r.lhs == pytest.approx(-0.5)
    assert bd.check_quadratic_inequality([0.00665568], 1.0, 0.2, 2).verdict == "holds"


def test_buser_k_examples():
    r = bd.check_buser_k([0.0625], 0.25, 0.0, 1, [0.0, 16.0])
    assert r.verdict == "holds"
    assert r.lhs == pytest.approx([0.0, 2.0])
    assert r.rhs[1] == pytest.approx(1 - math.exp(-1))
    # t = 0 gives 1/k - 1 <= 0
    r = bd.check_buser_k([0.0, 5.0], 0.0, 0.0, 2, [0.0])
    assert r.verdict == "holds" and r.rhs == [-0.5]


def test_buser_k_detects_violation():
    r = bd.check_buser_k([1.0], 0.01, 0.0, 1, [1.0])
    assert r.verdict == "violated" and r.margin < 0


def test_buser_k_hypotheses():
    assert bd.check_buser_k([1.0], 0.1, 0.0, 1, [1.0], dsup=0.3).verdict == "not-applicable"
    with pytest.raises(ValueError):
        bd.check_buser_k([1.0], 0.1, 0.0, 1, [])
    with pytest.raises(ValueError):
        bd.check_buser_k([1.0], 0.1, 1.0, 1, [0.6])
    with pytest.raises(ValueError):
        bd.check_buser_k([1.0], 0.1, 0.0, 1, [-1.0])


def test_default_t_grid():
    t = bd.default_t_grid(0.0)
    assert t[0] == pytest.approx(1e-3) and t[-1] == pytest.approx(1e3)
    assert bd.default_t_grid(2.0)[-1] == pytest.approx(0.25)


def test_buser1_constants():
    assert bd.BUSER_CONST == pytest.approx(4 * math.exp(2) / math.expm1(1) ** 2, rel=1e-15)
    assert bd.BUSER_CONST == pytest.approx(10.010601204308475, rel=1e-12)
    assert bd.buser1_upper(0.0, 0.25) == pytest.approx(bd.BUSER_CONST * 0.0625)
    assert bd.buser1_upper(1.0, 1.0) == pytest.approx(bd.BUSER_CONST)
    assert bd.buser1_upper(1.0, 0.1) == pytest.approx(4 * math.sqrt(2) * 0.1)
    assert bd.check_buser1([0.0625], 0.25, 0.0).verdict == "holds"
    assert bd.check_buser1([1e-12], 0.0, 0.0).verdict == "holds"
    assert bd.check_buser1([0.5], 0.1, 0.0).verdict == "violated"
    assert bd.check_buser1([0.5], 0.1, 0.0, dsup=1.0).verdict == "not-applicable"


def test_higher_buser():
    assert bd.higher_buser_upper(0.5, 1, 0.3) == pytest.approx(2 * math.log(2) * 0.5)
    assert bd.higher_buser_upper(0.0, 1, 0.25) == pytest.approx(0.17328679513998632)
    assert bd.check_higher_buser([0.0625], 0.25, 0.0, 1).verdict == "holds"
    assert bd.check_higher_buser([0.0, 10.0], 0.1, 0.0, 2).verdict == "violated"
    with pytest.raises(ValueError):
        bd.higher_buser_upper(0.0, 0, 1.0)


def _circle_report(A):
    M = ms.circle_grid(2 * math.pi, 512)
    P = ms.circle_constant(M, A)
    S = ms.smallest_k(ms.assemble(M, P), 2)
    return S, ch.estimate_h1(M, P, S)


def test_cheeger_inequality_circle():
    S, r = _circle_report(0.25)
    rep = bd.check_cheeger_inequality(S, r)
    assert rep.verdict == "holds"
    assert rep.rhs == pytest.approx(2 * math.sqrt(2 * 0.0625), rel=1e-5)
    S, r = _circle_report(0.0)
    assert bd.check_cheeger_inequality(S, r).verdict == "holds"


def test_cheeger_inequality_report_only(sphere3):
    P = ms.sphere_axial(sphere3, 0.1)
    S = ms.smallest_k(ms.assemble(sphere3, P), 2)
    r = ch.estimate_h1(sphere3, P, S)
    rep = bd.check_cheeger_inequality(S, r)
    assert rep.verdict == "not-applicable" and "report-only" in rep.soundness
    rep = bd.report_higher_cheeger(S, ch.estimate_hk(sphere3, P, S, 2), 2)
    assert rep.theorem == "Cheeger-2.5b-report-only" and rep.verdict == "not-applicable"


def test_report_k_mismatch():
    S, r = _circle_report(0.25)
    with pytest.raises(ValueError):
        bd.check_buser_k(S, r, 0.0, 2, [1.0])


def test_shigekawa():
    assert bd.check_shigekawa([1e-13], True).verdict == "holds"
    assert bd.check_shigekawa([0.2], True).verdict == "violated"
    assert bd.check_shigekawa([0.2], False).verdict == "holds"
    assert bd.check_shigekawa([0.0], False).verdict == "violated"


def test_report_schema_and_purity():
    S, r = _circle_report(0.25)
    a = bd.check_buser_k(S, r, 0.0, 1).to_json()
    b = bd.check_buser_k(S, r, 0.0, 1).to_json()
    assert a == b
    d = json.loads(a)
    for key in ("theorem", "inputs", "lhs", "rhs", "margin", "verdict", "soundness", "tolerances",
                "model_descriptor"):
        assert key in d
    assert d["model_descriptor"].startswith("circle")


@pytest.mark.parametrize("s", [0.0, 0.1])
def test_sphere_lichnerowicz(s, sphere4):
    P = ms.sphere_axial(sphere4, s)
    S = ms.smallest_k(ms.assemble(sphere4, P), 2)
    d = ms.d_alpha_sup_norm(sphere4, P)
    assert bd.check_lichnerowicz(S, 1.0, d, 2).verdict == "holds"
    assert bd.check_quadratic_inequality(S, 1.0, d, 2).verdict == "holds"


def test_torus_buser_family(torus32):
    P = ms.torus_constant(torus32, 0.3, 0.4)
    S = ms.smallest_k(ms.assemble(torus32, P), 3)
    for k in (1, 2, 3):
        r = ch.estimate_hk(torus32, P, S, k) if k > 1 else ch.estimate_h1(torus32, P, S)
        assert bd.check_buser_k(S, r, 0.0, k, [0.5, 1, 2, 4]).verdict == "holds"
        assert bd.check_higher_buser(S, r, 0.0, k).verdict == "holds"
    assert bd.check_buser1(S, ch.estimate_h1(torus32, P, S), 0.0).verdict == "holds"


def test_lambda_array_input():
    assert bd.check_buser1(np.array([0.01]), 0.1, 0.0).inputs["lambda_1"] == 0.01
