import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fairspace.geometry import ConvexCell, HalfSpace
from fairspace.measures import (
    DegenerateSpecError,
    Measure,
    MeasureSpec,
    RestrictionError,
    cell_mass,
    load_measure,
    measure_from_dict,
    measure_to_dict,
    realize,
    restrict,
    save_measure,
    value_table,
)

WHOLE = ConvexCell(2)
RIGHT = ConvexCell(2, (HalfSpace((1.0, 0.0), 0.0, ">="),))


def square4():
    return Measure(np.array([[-1, -1], [1, -1], [1, 1], [-1, 1]], float), np.full(4, 0.25))


def line3():
    return Measure(np.array([[0.0, 0], [1, 0], [2, 0]]), np.array([0.2, 0.3, 0.5]))


def test_measure_invariants():
    with pytest.raises(ValueError):
        Measure(np.zeros((2, 2)), np.array([0.5, 0.6]))
    with pytest.raises(ValueError):
        Measure(np.zeros((2, 2)), np.array([1.5, -0.5]))
    with pytest.raises(ValueError):
        Measure(np.zeros((0, 2)), np.zeros(0))
    mu = square4()
    with pytest.raises(ValueError):
        mu.points[0, 0] = 5.0


def test_grid_uniform():
    mu = realize(MeasureSpec("grid", origin=(0, 0), spacing=(1, 1), values=[[1, 1], [1, 1]]))
    assert len(mu) == 4
    np.testing.assert_allclose(mu.weights, 0.25)
    np.testing.assert_allclose(sorted(map(tuple, mu.points)), [(0.5, 0.5), (0.5, 1.5), (1.5, 0.5), (1.5, 1.5)])


def test_grid_drops_zero_cells():
    mu = realize(MeasureSpec("grid", origin=(0, 0), spacing=(1, 1), values=[[3, 1], [0, 0]]))
    assert len(mu) == 2
    np.testing.assert_allclose(sorted(mu.weights), [0.25, 0.75])


def test_mixture_equal_weights_and_determinism():
    spec = MeasureSpec("gaussian-mixture", components=[((0.0, 0.0), (1.0, 1.0), 1.0)], sample_count=1000, seed=7)
    a, b = realize(spec), realize(spec)
    assert len(a) == 1000
    np.testing.assert_allclose(a.weights, 0.001)
    np.testing.assert_array_equal(a.points, b.points)


def test_degenerate_specs():
    with pytest.raises(DegenerateSpecError):
        realize(MeasureSpec("grid", origin=(0, 0), spacing=(1, 1), values=[[0, 0], [0, 0]]))
    with pytest.raises(ValueError):
        realize(MeasureSpec("gaussian-mixture", components=[((0, 0), (0.0, 1.0), 1.0)], sample_count=10))
    with pytest.raises(ValueError):
        realize(MeasureSpec("grid", origin=(0, 0), spacing=(1, 1), values=[[-1, 2]]))


def test_cell_mass_examples():
    assert cell_mass(square4(), RIGHT) == pytest.approx(0.5)
    assert cell_mass(line3(), WHOLE) == pytest.approx(1.0)
    right_two = ConvexCell(2, (HalfSpace((1.0, 0.0), 0.5, ">="),))
    assert cell_mass(line3(), right_two) == pytest.approx(0.8)
    with pytest.raises(ValueError):
        cell_mass(line3(), ConvexCell(3))


def test_cell_mass_counts_boundary():
    mu = Measure(np.array([[0.0, 0.0], [1.0, 0.0]]), np.array([0.5, 0.5]))
    left = ConvexCell(2, (HalfSpace((1.0, 0.0), 0.0, "<="),))
    assert cell_mass(mu, RIGHT) + cell_mass(mu, left) == pytest.approx(1.5)


def test_restrict_examples():
    r = restrict(square4(), RIGHT)
    assert len(r) == 2
    np.testing.assert_allclose(r.weights, 0.5)
    assert r.root_mass == pytest.approx(0.5)
    mu = line3()
    np.testing.assert_array_equal(restrict(mu, WHOLE).weights, mu.weights)
    r = restrict(mu, ConvexCell(2, (HalfSpace((1.0, 0.0), 0.5, ">="),)))
    np.testing.assert_allclose(r.weights, [0.375, 0.625])
    with pytest.raises(RestrictionError):
        restrict(mu, ConvexCell(2, (HalfSpace((1.0, 0.0), 10.0, ">="),)))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.floats(-0.5, 0.5), st.floats(-0.5, 0.5))
def test_restrict_chain_rule(seed, a, b):
    rng = np.random.default_rng(seed)
    pts = rng.standard_normal((200, 2))
    mu = Measure.from_unnormalized(pts, rng.uniform(0.1, 1, 200))
    outer = ConvexCell(2, (HalfSpace((1.0, 0.0), a, ">="),))
    inner = ConvexCell(2, (HalfSpace.make((0.3, 1.0), b, "<="),))
    m_outer = cell_mass(mu, outer)
    if m_outer == 0:
        return
    lhs = cell_mass(restrict(mu, outer), inner)
    rhs = cell_mass(mu, outer.intersect(inner)) / m_outer
    assert abs(lhs - rhs) <= 1e-12


def test_value_table_matches_cell_mass(rng):
    ms = [Measure.from_unnormalized(rng.standard_normal((50, 2))) for _ in range(3)]
    cells = [RIGHT, ConvexCell(2, (RIGHT.constraints[0].flipped(),)), WHOLE]
    V = value_table(ms, cells)
    for j, mu in enumerate(ms):
        for i, c in enumerate(cells):
            assert V[j, i] == cell_mass(mu, c)


def test_json_round_trip(tmp_path):
    mu = line3()
    again = measure_from_dict(json.loads(json.dumps(measure_to_dict(mu))))
    np.testing.assert_array_equal(again.points, mu.points)
    np.testing.assert_allclose(again.weights, mu.weights)
    path = tmp_path / "m.json"
    save_measure(mu, path)
    np.testing.assert_allclose(load_measure(path).weights, mu.weights)
    d = {"kind": "gaussian-mixture", "components": [{"mean": [0, 0], "cov": [1, 2], "weight": 1}],
         "sample_count": 50, "seed": 3}
    np.testing.assert_array_equal(measure_from_dict(d).points, measure_from_dict(d).points)
