import math

import numpy as np
import pytest

from mcflab import inequality_oracle as io
from mcflab.errors import ConfigError
from mcflab.inequality_oracle import SampleDomain

QUICK = 20_000


def _dom(constraint, **kw):
    kw.setdefault("sample_count", QUICK)
    return SampleDomain(n=kw.pop("n", 2), m=kw.pop("m", 2), lambda_constraint=constraint, **kw)


def _margin(terms, key="final"):
    lhs, rhs = terms[key]
    return lhs - rhs


# ------------------------------------------------------------- I >= delta A2


def _term_I_by_hand(lam, h):
    # A2 + sum_i lam_i^2 sum_k (h^{n+i}_{ik})^2 + 2 sum_{i<j} lam_i lam_j sum_k h^{n+j}_{ik} h^{n+i}_{jk}
    n = len(lam)
    total = float(np.sum(h * h))
    for i in range(n):
        total += lam[i] ** 2 * sum(h[i, i, k] ** 2 for k in range(n))
        for j in range(i + 1, n):
            total += 2 * lam[i] * lam[j] * sum(h[j, i, k] * h[i, j, k] for k in range(n))
    return total


def test_zero_h_gives_zero_margin():
    d = _dom("DetRatioBelow")
    lam = np.array([[0.5, 0.3]])
    terms = io._eval_I_geq_deltaA2(d, lam, np.zeros((1, 2, 2, 2)))
    assert all(_margin(terms, k)[0] == 0.0 for k in terms)


def test_I_geq_deltaA2_worked_example():
    lam = np.array([0.9, 0.9])
    h = np.zeros((2, 2, 2))
    h[0, 0, 0] = 1.0  # h^3_11
    h[1, 1, 0] = h[1, 0, 1] = 1.0  # h^4_21 and its mirror
    d = _dom("DetRatioBelow", epsilon=0.5)
    assert io.contains(d, lam[None])[0]
    I = _term_I_by_hand(lam, h)
    assert I == pytest.approx(3 + 2 * 0.81)
    terms = io._eval_I_geq_deltaA2(d, lam[None], h[None])
    assert terms["final"][0][0] == pytest.approx(I, rel=1e-14)
    assert _margin(terms)[0] == pytest.approx(I - 0.5 / 8 * 3, rel=1e-14)


def test_term_I_matches_hand_formula():
    rng = np.random.default_rng(8)
    d = _dom("DetRatioBelow", n=3, m=3)
    lam, h = io.sample(d, rng, 50)
    got = io._eval_I_geq_deltaA2(d, lam, h)["final"][0]
    want = [_term_I_by_hand(l, x) for l, x in zip(lam, h)]
    assert np.allclose(got, want, rtol=1e-12)


def test_check_I_geq_deltaA2_quick():
    rep = io.check_I_geq_deltaA2(_dom("DetRatioBelow", seed=42))
    assert rep.checked >= QUICK and rep.passed and rep.worst_margin >= -io.TOL


# ------------------------------------------------------------------ II >= 0


def test_II_zero_at_origin():
    for k2 in (0.0, 1.0):
        d = _dom("PairProductBelow", k2=k2)
        terms = io._eval_II_nonneg(d, np.zeros((1, 2)))
        assert all(_margin(terms, k)[0] == 0.0 for k in terms)


def test_II_boundary_tightness():
    d = _dom("PairProductBelow", k2=1.0)
    margins = []
    for gap in (1e-2, 1e-4, 1e-6):
        x = math.sqrt(1 - gap)
        margins.append(_margin(io._eval_II_nonneg(d, np.array([[x, x]])), "step3_pairwise_nonneg")[0])
    assert margins[0] > margins[1] > margins[2] > 0
    assert margins[2] < 1e-5


@pytest.mark.parametrize("k2", [0.0, -1.0, 1.0])
def test_check_II_nonneg_quick(k2):
    rep = io.check_II_nonneg(_dom("PairProductBelow", k2=k2, seed=7))
    assert rep.passed, rep.steps
    assert rep.identity_max_err <= io.TOL


# ------------------------------------------------------------- lower bound


def test_c0_values():
    assert io.thm1_c0(2, 1.0, 0.5, "a") == 0.25
    assert io.thm1_c0(2, 1.0, 0.5, "b") == 1.0 / 32


def test_lower_bound_zero_at_origin():
    terms = io._eval_II_lower_bound(_dom("DetRatioBelow", k2=1.0), np.zeros((1, 2)))
    assert terms["final"] == (0.0, 0.0)


@pytest.mark.parametrize("k2", [0.0, 1.0])
def test_check_II_lower_bound_quick(k2):
    assert io.check_II_lower_bound(_dom("DetRatioBelow", k2=k2, seed=5)).passed


# ----------------------------------------------------------- Theorem 2 terms


def test_thm2_termI_zero_at_origin():
    d = _dom("Thm2NullConfig", k2=1.0)
    assert io._eval_thm2_termI(d, np.zeros((1, 2)))["final"][0][0] == 0.0


def test_thm2_termI_tight_on_diagonal():
    d = _dom("Thm2NullConfig", k2=1.0)
    vals = [_margin(io._eval_thm2_termI(d, np.array([[x, x]])))[0] for x in (0.99, 0.9999, 0.999999)]
    assert vals[0] > vals[1] > vals[2] >= 0 and vals[2] < 1e-5


def test_thm2_chain_step3_counterexample():
    # lam_1^2 = 1.2, lam_2^2 = 0.8: the common-denominator step fails, the final claim holds
    d = _dom("Thm2NullConfig", k2=1.0)
    lam = np.sqrt(np.array([[1.2, 0.8]]))
    assert io.contains(d, lam)[0]
    terms = io._eval_thm2_termI(d, lam)
    lhs, rhs = terms["step3_common_denominator"]
    assert lhs[0] == pytest.approx(0.010203, abs=1e-6)
    assert rhs[0] == pytest.approx(0.015026, abs=1e-6)
    assert _margin(terms)[0] >= 0


def test_check_thm2_termI_reports_only_step3():
    rep = io.check_thm2_termI(_dom("Thm2NullConfig", n=3, k2=1.0, seed=11))
    assert not rep.passed
    bad = {k for k, v in rep.step_violations.items() if v}
    assert bad == {"step3_common_denominator"}
    assert rep.steps["final"] >= -io.TOL
    assert io.check_thm2_termI(_dom("Thm2NullConfig", n=3, k2=0.0, seed=11)).passed


def _termII_by_hand(lam, h):
    # the four sums with S assembled as a full (n+m) square matrix
    n, m = len(lam), h.shape[0]
    S = np.zeros((n + m, n + m))
    for i in range(n):
        l2 = lam[i] ** 2 if i < m else 0.0
        S[i, i] = (1 - l2) / (1 + l2)
    for a in range(m):
        l2 = lam[a] ** 2 if a < n else None
        S[n + a, n + a] = -(1 - l2) / (1 + l2) if l2 is not None else -1.0
    out = 0.0
    for a in range(m):
        for k in range(n):
            for j in range(n):
                out += 2 * h[a, k, j] * h[a, k, 0] * S[j, 0]
                out += 2 * h[a, k, j] * h[a, k, 1] * S[j, 1]
            for b in range(m):
                out -= 2 * h[a, k, 0] * h[b, k, 0] * S[n + a, n + b]
                out -= 2 * h[a, k, 1] * h[b, k, 1] * S[n + a, n + b]
    return out


def test_thm2_termII_direct_evaluation():
    lam = np.array([[1.0, 1.0]])
    h = np.zeros((1, 2, 2, 2))
    assert io.thm2_termII_value(lam, h)[0] == 0.0
    h[0, 0, 0, 0] = 1.0  # single h^{n+1}_{11}
    assert io.thm2_termII_value(lam, h)[0] == pytest.approx(_termII_by_hand(lam[0], h[0]), abs=1e-15)
    rng = np.random.default_rng(1)
    for n, m in ((2, 2), (3, 2), (2, 3)):
        d = _dom("Thm2NullConfig", n=n, m=m, null_exact=True)
        lam, hh = io.sample(d, rng, 20)
        got = io.thm2_termII_value(lam, hh)
        want = [_termII_by_hand(l, x) for l, x in zip(lam, hh)]
        assert np.allclose(got, want, rtol=1e-11, atol=1e-12)


def test_probe_is_report_only():
    rep = io.probe_thm2_termII(_dom("Thm2NullConfig", seed=3, sample_count=5_000))
    assert not rep.asserted and rep.as_dict()["passed"] is None
    assert math.isfinite(rep.worst_margin)


# ------------------------------------------------------------ harness pieces


@pytest.mark.parametrize("constraint,kw", [
    ("DetRatioBelow", {}), ("PairProductBelow", {"n": 3}), ("Thm2NullConfig", {"n": 3}),
    ("Thm2NullConfig", {"null_exact": True}), ("DetRatioBelow", {"n": 3, "m": 1}),
])
def test_samples_stay_in_domain(constraint, kw):
    d = _dom(constraint, **kw)
    lam, h = io.sample(d, np.random.default_rng(0), 10_000)
    assert io.contains(d, lam).all()
    assert np.array_equal(h, np.swapaxes(h, -1, -2))


def test_reports_deterministic():
    d = _dom("DetRatioBelow", seed=9, sample_count=3_000)
    a, b = io.check_I_geq_deltaA2(d), io.check_I_geq_deltaA2(d)
    assert a.worst_margin == b.worst_margin and a.as_dict() == b.as_dict()


def test_domain_validation():
    with pytest.raises(ConfigError):
        _dom("DetRatioBelow", epsilon=0.0)
    with pytest.raises(ConfigError):
        _dom("Nope")
    with pytest.raises(ConfigError):
        _dom("DetRatioBelow", sample_count=0)
    with pytest.raises(ConfigError):
        io.check_II_nonneg(_dom("DetRatioBelow"))
