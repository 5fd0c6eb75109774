import json

import pytest

from distmorse.topology import (
    BUILTIN_BETTI,
    IndexCensus,
    MissingTopologyError,
    attachment_spheres,
    builtin_betti,
    check_duality,
    check_euler_identity,
    euler_characteristic,
    euler_sum,
    load_census,
    morse_inequalities,
    ovals_betti,
)


def test_builtin_spaces():
    assert [euler_characteristic(BUILTIN_BETTI[s]) for s in ("point", "circle", "sphere", "torus", "empty")] == [
        1,
        0,
        2,
        0,
        0,
    ]
    with pytest.raises(MissingTopologyError):
        builtin_betti("klein bottle")
    assert ovals_betti(3) == (3, 3) and ovals_betti(0) == ()


def test_euler_sum_examples():
    assert euler_sum(IndexCensus({(0, 0): 1, (0, 1): 1})) == 0
    assert euler_sum(IndexCensus({(0, 0): 3, (1, 0): 3, (2, 0): 1})) == 1
    assert euler_sum(IndexCensus()) == 0


def test_census_validation_and_zero_entries():
    with pytest.raises(ValueError):
        IndexCensus({(-1, 0): 1})
    c = IndexCensus({(0, 0): 0, (1, 0): 2})
    assert c.counts == {(1, 0): 2} and c.total == 2


def test_duality_circle_and_point():
    xy = IndexCensus({(0, 0): 1, (0, 1): 1}, chi_x=0, chi_y=1)
    yx = IndexCensus({(0, 0): 1}, chi_x=1, chi_y=0)
    v = check_duality(xy, yx)
    assert v.holds and (v.lhs, v.rhs) == (1, 1)
    assert v.message() == "duality holds: 1 = 1"


def test_duality_symmetric_swap():
    a = IndexCensus({(0, 0): 2, (0, 1): 2}, chi_x=0, chi_y=0)
    assert check_duality(a, a).holds


def test_duality_failure_and_missing_data():
    xy = IndexCensus({(0, 0): 1}, chi_x=0, chi_y=1)
    yx = IndexCensus({(0, 0): 1}, chi_x=1, chi_y=0)
    v = check_duality(xy, yx)
    assert not v.holds and "FAILS" in v.message()
    with pytest.raises(MissingTopologyError):
        check_duality(IndexCensus({(0, 0): 1}), yx)
    with pytest.raises(ValueError):
        check_duality(xy, IndexCensus({}, chi_x=5, chi_y=0))


def test_euler_identity():
    c = IndexCensus({(0, 0): 1, (0, 1): 1}, chi_x=0)
    assert check_euler_identity(c).holds
    c = IndexCensus({(0, 0): 1, (0, 2): 1}, chi_x=2)
    assert check_euler_identity(c).holds


def test_morse_circle():
    c = IndexCensus({(0, 0): 1, (0, 1): 1}, betti_x=(1, 1))
    mv = morse_inequalities(c)
    assert [(m.strong_lhs, m.strong_rhs) for m in mv] == [(1, 1), (0, 0)]
    assert all(m.strong and m.weak for m in mv)


def test_morse_sphere_weak_equality():
    c = IndexCensus({(0, 0): 1, (0, 2): 1}, betti_x=(1, 0, 1))
    mv = morse_inequalities(c)
    assert mv[2].weak_lhs == mv[2].weak_rhs == 1
    assert mv[0].weak_equality and mv[2].weak_equality
    assert all(m.strong for m in mv)


def test_morse_detects_missing_points():
    c = IndexCensus({(0, 0): 1}, betti_x=(1, 1))
    mv = morse_inequalities(c)
    assert not mv[1].weak


def test_morse_inflated_counts_still_hold():
    base = {(0, 0): 1, (0, 1): 1}
    for extra in range(1, 4):
        c = IndexCensus({**base, (0, 0): 1 + extra, (0, 1): 1 + extra}, betti_x=(1, 1))
        assert all(m.weak for m in morse_inequalities(c))


def test_morse_needs_betti():
    with pytest.raises(MissingTopologyError):
        morse_inequalities(IndexCensus({(0, 0): 1}))


def test_attachment_spheres():
    assert attachment_spheres(IndexCensus({(1, 0): 1})) == [1]
    assert attachment_spheres(IndexCensus({(0, 0): 1})) == [0]
    assert attachment_spheres(IndexCensus({(0, 2): 1, (0, 0): 2})) == [0, 0, 2]


def test_census_json(tmp_path):
    c = IndexCensus({(0, 1): 2, (1, 0): 1}, chi_x=0, chi_y=1, betti_x=(1, 1))
    path = tmp_path / "c.json"
    path.write_text(c.dumps())
    back = load_census(path)
    assert back == c
    data = json.loads(c.dumps())
    assert {"k": 0, "iota": 1, "n": 2} in data["counts"]
    with pytest.raises(ValueError, match="iota"):
        IndexCensus.from_dict({"counts": [{"k": 0, "n": 1}]})
    with pytest.raises(ValueError, match="counts"):
        IndexCensus.from_dict({})
