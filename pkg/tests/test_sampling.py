import csv

import numpy as np
import pytest

from relaxnn.sampling import DEFAULT_COUNTS, sample_points
from relaxnn.systems import CATALOG, ProblemSpec, Kind, get_problem


def test_default_sizes():
    pts = sample_points(get_problem("euler-sod"))
    assert pts.sizes == (2540, 320, 160) == DEFAULT_COUNTS


def test_deterministic_in_seed():
    p = get_problem("swe-dam")
    a, b = sample_points(p, seed=1), sample_points(p, seed=1)
    for x, y in zip((a.interior, a.ic, a.bc), (b.interior, b.ic, b.bc)):
        assert np.array_equal(x, y)
    assert not np.array_equal(a.interior, sample_points(p, seed=2).interior)


@pytest.mark.parametrize("name", sorted(CATALOG))
def test_points_inside_domain_and_on_boundaries(name):
    p = get_problem(name)
    pts = sample_points(p, (500, 50, 51), seed=3)
    for arr in (pts.interior, pts.ic, pts.bc):
        assert np.all((arr[:, 0] >= p.t0) & (arr[:, 0] <= p.t_end))
        assert np.all((arr[:, 1] >= p.x_min) & (arr[:, 1] <= p.x_max))
    assert np.all(pts.ic[:, 0] == p.t0)
    assert set(np.unique(pts.bc[:, 1])) == {p.x_min, p.x_max}
    assert np.sum(pts.bc[:, 1] == p.x_min) == 26


def test_interior_mean_on_unit_square():
    p = ProblemSpec("unit", Kind.BURGERS, 0.0, 1.0, 0.0, 1.0, "sine")
    pts = sample_points(p, (100_000, 1, 1), seed=5)
    sigma = np.sqrt(1 / 12 / 100_000)
    assert np.all(np.abs(pts.interior.mean(axis=0) - 0.5) < 3 * sigma)


def test_stochastic_problems_append_z():
    p = get_problem("euler-sod-uq")
    pts = sample_points(p, (40, 10, 10), seed=1)
    assert pts.interior.shape == (40, 7)
    z = np.concatenate([pts.interior[:, 2:], pts.ic[:, 2:], pts.bc[:, 2:]])
    assert np.all(np.abs(z) <= 1.0)
    assert sample_points(get_problem("burgers-riemann-uq"), (5, 5, 5)).ic.shape == (5, 102)


def test_nonpositive_counts_rejected():
    with pytest.raises(ValueError):
        sample_points(get_problem("swe-dam"), (0, 1, 1))


def test_csv_export(tmp_path):
    pts = sample_points(get_problem("swe-2shock-uq"), (3, 2, 2), seed=1)
    path = tmp_path / "pts.csv"
    pts.to_csv(path)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["set", "t", "x", "z1", "z2", "z3", "z4", "z5"]
    assert [r[0] for r in rows[1:]] == ["interior"] * 3 + ["ic"] * 2 + ["bc"] * 2
    assert float(rows[1][1]) == pts.interior[0, 0]
