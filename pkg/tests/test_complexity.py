from __future__ import annotations

import csv
import math

import pytest

from oracles import coverage_mp, hoeffding_mp
from smcmdp.complexity import (
    coverage_curve,
    coverage_infimum,
    exact_coverage,
    interval_table,
    ratio_grid,
    required_n_at_phat,
    smallest_n,
    width,
    worst_case_n,
    write_ratio_grid,
)
from smcmdp.intervals import CiMethod


def test_hoeffding_worst_case_golden():
    n = worst_case_n("hoeffding", 0.01, 0.1)
    assert n == 1060
    assert 2 * hoeffding_mp(n, 0.01) <= 0.1 < 2 * hoeffding_mp(n - 1, 0.01)


@pytest.mark.parametrize("method", ["hoeffding", "cp"])
def test_worst_case_n_is_minimal(method):
    n = worst_case_n(method, 0.05, 0.08)
    assert width(method, n, n // 2, 0.05) <= 0.08
    assert width(method, n - 1, (n - 1) // 2, 0.05) > 0.08


def test_trivial_precision_needs_one_sample():
    assert worst_case_n("cp", 0.1, 1.0) == 1
    assert required_n_at_phat("cp", 0.1, 1.5, 0.3) == 1


def test_phat_half_matches_worst_case_for_hoeffding():
    # Hoeffding width does not depend on k
    assert required_n_at_phat("hoeffding", 0.01, 0.05, 0.5) == worst_case_n("hoeffding", 0.01, 0.05)


def test_zero_phat_clopper_pearson_closed_form():
    delta, eps = 0.01, 0.05
    n = required_n_at_phat("cp", delta, eps, 0.0)
    # width at k = 0 is 1 - (delta/2)^(1/n)
    expected = math.ceil(math.log(delta / 2) / math.log1p(-eps))
    assert abs(n - expected) <= 1
    assert 1 - (delta / 2) ** (1 / n) <= eps + 1e-12


def test_required_n_rejects_bad_phat():
    with pytest.raises(ValueError):
        required_n_at_phat("cp", 0.1, 0.1, 1.5)


def test_smallest_n_search():
    assert smallest_n(lambda n: n >= 1) == 1
    assert smallest_n(lambda n: n >= 12345) == 12345


def test_coverage_curve_matches_scipy():
    lo, hi = interval_table("cp", 60, 0.1)
    ps = [0.0, 0.003, 0.2, 0.5, 0.91, 1.0]
    ours = coverage_curve("cp", 60, 0.1, ps)
    for p, c in zip(ps, ours):
        assert c == pytest.approx(coverage_mp(lo, hi, 60, p), abs=1e-12)


def test_coverage_infimum_is_below_every_grid_point():
    inf, p = coverage_infimum("wilson-cc", 50, 0.05)
    grid = coverage_curve("wilson-cc", 50, 0.05, [i / 500 for i in range(501)])
    assert inf <= grid.min() + 1e-15
    assert exact_coverage("wilson-cc", 50, 0.05, p) == pytest.approx(inf)


def test_sound_methods_keep_coverage():
    for method in ("hoeffding", "cp"):
        inf, _ = coverage_infimum(method, 80, 0.05)
        assert inf >= 0.95


def test_ratio_grid_csv(tmp_path):
    cells = ratio_grid([0.01], [0.1, 0.05])
    assert all(c.ratio > 1 for c in cells)
    path = tmp_path / "grid.csv"
    write_ratio_grid(path, cells)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["delta", "epsilon", "n_hoeffding", "n_cp", "ratio"]
    assert rows[1][:3] == ["0.01", "0.1", "1060"]
    assert CiMethod.parse(rows[0][2].split("_")[1]) is CiMethod.HOEFFDING
