import math
from fractions import Fraction

import mpmath
import pytest
from hypothesis import given
from hypothesis import strategies as st

from vftsim.bounds import (
    BoundDomainError,
    SAWTable,
    TableCoverageError,
    enumerate_saw,
    p0_fault,
    rm_acceptance_bound,
    rm_fault_recursion,
    sf_rejection_bound,
    theorem1_bound,
    trace_distance_bound,
    union_bound,
)


def close(a, b, rel=1e-12):
    return abs(a - b) <= rel * max(abs(a), abs(b), 1e-300)


# -- significance-level bounds ----------------------------------------------


def test_membership_floor_examples():
    assert theorem1_bound(1, 0) == 0
    assert close(theorem1_bound(1 / math.sqrt(81), 40), 8 / 9)
    assert close(theorem1_bound(0.5, 1), 1 / 3)


def test_membership_floor_domain():
    with pytest.raises(BoundDomainError):
        theorem1_bound(0.2, 1)
    with pytest.raises(BoundDomainError):
        theorem1_bound(0.0, 3)
    assert theorem1_bound(1 / 3, 1) == 0  # exactly at the floor


def test_trace_distance_examples():
    assert close(trace_distance_bound(1 / 9, 40), 1 / 3)
    assert trace_distance_bound(1, 0) == 1
    vals = [trace_distance_bound(1 / math.sqrt(2 * k + 1), k) for k in range(0, 200, 7)]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    assert close(vals[-1], (2 * 196 + 1) ** -0.25)


# -- surface-code rejection --------------------------------------------------


def test_sf_rejection_examples():
    assert sf_rejection_bound(100, 0.0, 3).value == 0
    rep = sf_rejection_bound(375, 1e-4, 5)
    n = 375
    assert close(float(rep.extras["closed_form"]), n * 1.2 * 1e-5 / 0.9, 1e-10)
    assert not rep.flags["diverges"]
    big = sf_rejection_bound(100, 0.04, 3)
    assert big.flags["diverges"] and big.value == 1 and big.saturated


def explicit_oracle(n, p, d, nu_max):
    p = Fraction(p)
    total = Fraction(0)
    for nu in range(d, nu_max + 1):
        for mu in range(-(-nu // 2), nu + 1):
            total += n * Fraction(6, 5) * 5**nu * math.comb(nu, mu) * p**mu * (1 - p) ** (n - mu)
    return total


def test_sf_explicit_sum_matches_rational_oracle():
    n, p, d, nu_max = 40, Fraction(1, 2000), 3, 12
    rep = sf_rejection_bound(n, float(p), d, nu_max)
    assert close(float(rep.extras["explicit"]), float(explicit_oracle(n, p, d, nu_max)), 1e-13)
    x = 10 * math.sqrt(float(p))
    assert close(float(rep.extras["tail"]), n * 1.2 * x ** (nu_max + 1) / (1 - x), 1e-12)


@given(st.floats(1e-7, 0.0099), st.integers(1, 20))
def test_sf_bound_decreases_with_distance(p, d):
    a = sf_rejection_bound(500, p, d).raw
    b = sf_rejection_bound(500, p, d + 1).raw
    assert b < a


# -- chain counts ------------------------------------------------------------


def test_p0_fault_examples():
    t = SAWTable.from_counts([7, 1, 1])
    assert p0_fault(0.0, 2, t, 10).value == 0
    assert close(p0_fault(0.01, 1, t, 10).value, 7 * 0.01 * 0.99**9)
    t2 = SAWTable.from_counts([1, 1])
    p = Fraction(1, 100)
    want = sum(math.comb(nu, mu) * p**mu * (1 - p) ** (10 - mu)
               for nu in (1, 2) for mu in range(-(-nu // 2), nu + 1))
    assert close(p0_fault(0.01, 2, t2, 10).value, float(want), 1e-15)


def test_table_coverage_and_csv(tmp_path):
    with pytest.raises(TableCoverageError):
        p0_fault(0.01, 4, SAWTable.from_counts([6, 30]), 10)
    f = tmp_path / "saw.csv"
    f.write_text("nu,C\n1,6\n2,30\n3,150\n")
    assert [int(c) for c in SAWTable.from_csv(f).counts] == [6, 30, 150]
    f.write_text("1,6\n3,150\n")
    with pytest.raises(TableCoverageError):
        SAWTable.from_csv(f)


def test_upper_bound_table():
    t = SAWTable.upper_bound_6x5(5, sites=2)
    assert [int(c) for c in t.counts] == [2 * 6 * 5 ** (nu - 1) for nu in range(1, 6)]
    assert t.source == "upper_bound_6x5"


def test_saw_enumeration_known_counts():
    assert enumerate_saw(8) == [6, 30, 150, 726, 3534, 16926, 81390, 387966]
    bound = SAWTable.upper_bound_6x5(8)
    assert all(c <= b for c, b in zip(enumerate_saw(8), bound.counts))


# -- concatenation -----------------------------------------------------------


def test_rm_fault_examples():
    assert rm_fault_recursion(1e-5, 0).value == 1e-5
    assert close(rm_fault_recursion(1e-5, 1).value, 1.1025e-6)
    assert close(rm_fault_recursion(1e-5, 2).value, 0.11025**4 / 11025)
    assert f"{rm_fault_recursion(1e-5, 2).value:.4e}" == "1.3401e-08"


@pytest.mark.parametrize("p0", [1e-6, 1e-5, 5e-5, 9e-5, 1e-4, 1e-3])
@pytest.mark.parametrize("l", range(7))
def test_rm_closed_form_matches_steps(p0, l):
    rep = rm_fault_recursion(p0, l)
    assert close(float(rep.raw), float(rep.extras["steps"][-1]))
    if not rep.saturated:
        assert close(rep.value, float(rep.extras["steps"][-1]))


def test_rm_monotonicity_threshold():
    below = [rm_fault_recursion(5e-5, l).value for l in range(5)]
    assert all(a > b for a, b in zip(below, below[1:]))
    above = rm_fault_recursion(1e-4, 1)
    assert above.value > 1e-4 and above.flags["grows"]
    up = [float(rm_fault_recursion(1e-4, l).raw) for l in range(5)]
    assert all(a < b for a, b in zip(up, up[1:]))


def test_rm_acceptance_examples():
    assert rm_acceptance_bound(0.0, 2, 50).value == 1
    v = rm_acceptance_bound(1e-5, 1, 100).value
    assert close(v, (1 - 1.1025e-6) ** 100, 1e-12)
    assert abs(v - (1 - 1.1025e-4)) < 1e-7


def test_union_bound_examples():
    assert union_bound(1, 1).value == 1
    assert close(union_bound(0.99, 0.98).value, 0.97)
    r = union_bound(0.5, 0.4)
    assert r.value == 0 and r.saturated
    assert r.row()["saturated"] is True
    with pytest.raises(BoundDomainError):
        union_bound(1.2, 0.5)


def test_extended_precision_for_tiny_values():
    rep = rm_fault_recursion(1e-8, 6)
    assert rep.value > 0 and float(mpmath.log10(rep.raw)) < -200
