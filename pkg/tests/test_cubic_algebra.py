import json

import numpy as np
import pytest

from superint.cubic_algebra import (Level, StructureFunction, build_rational1_model, casimir_mismatch,
                                    check_commutation, closed_form_levels, physical_levels, solve_spectrum)
from superint.errors import NoSolution, ValidationError

CASES = [("i", 1.0, 1.0), (1.0, None, 1.0), (0.7, None, 2.0), (1.3j, None, 1.0)]


@pytest.mark.parametrize("a,a0,hbar", CASES)
def test_physical_ladder_matches_closed_form(a, a0, hbar):
    m, sf = build_rational1_model(a, hbar, a0)
    res = solve_spectrum(sf, 10)
    got = [lv.E for lv in physical_levels(res, 10)]
    assert np.max(np.abs(np.array(got) - closed_form_levels(m.params["a2"], hbar, 10))) < 1e-10


def test_explicit_ladders():
    _, sf = build_rational1_model("i", 1.0, 1.0)
    assert [lv.E for lv in physical_levels(solve_spectrum(sf, 4))] == pytest.approx([1, 1.5, 2, 2.5, 3])
    _, sf = build_rational1_model(1.0, 1.0)
    assert [lv.E for lv in physical_levels(solve_spectrum(sf, 3))] == pytest.approx([1.5, 2, 2.5, 3])


def test_factored_equals_expanded():
    _, sf = build_rational1_model("i", 1.0, 1.0)
    X = np.random.default_rng(0).uniform(-3, 3, (200, 3))
    rel = [abs(sf(*x) - sf.from_factors(*x)) / max(1.0, abs(sf(*x))) for x in X]
    assert max(rel) < 1e-12


def test_root_offsets_and_sign():
    for a, a0 in (("i", 1.0), (0.7, None)):
        m, sf = build_rational1_model(a, 1.0, a0)
        assert sorted(c for _, c in sf.factored_roots) == [-0.5, 0.5, 1.5, 2.5]
        assert sf.coefficient < 0
        assert m.alpha > 0 and m.beta == -8


def test_bad_length():
    with pytest.raises(ValidationError):
        build_rational1_model("i", 1.0)
    with pytest.raises(ValidationError):
        build_rational1_model(1 + 1j, 1.0)


def test_synthetic_structure_has_no_solution():
    syn = StructureFunction(lambda x, u, E: x + u - E, name="syn")
    with pytest.raises(NoSolution):
        solve_spectrum(syn, 0)


def test_commutation_relations():
    m, sf = build_rational1_model("i", 1.0, 1.0)
    res = solve_spectrum(sf, 10)
    lv0 = [lv for lv in res.levels if lv.p == 0][0]
    assert check_commutation(m, lv0) == 0.0
    lv2 = [lv for lv in physical_levels(res) if lv.p == 2][0]
    assert check_commutation(m, lv2) < 1e-10
    assert check_commutation(m, lv2, sf.shifted(1e-3)) > 1e-4
    assert max(check_commutation(m, lv) for lv in res.levels) < 1e-10


@pytest.mark.parametrize("a,a0,hbar", CASES)
def test_casimir_constant(a, a0, hbar):
    m, sf = build_rational1_model(a, hbar, a0)
    for lv in physical_levels(solve_spectrum(sf, 6)):
        mis, spread = casimir_mismatch(m, lv)
        assert mis < 1e-9 and spread < 1e-8 * max(1.0, abs(m.casimir(lv.E)))


def test_physical_levels_rejects_ambiguity():
    _, sf = build_rational1_model("i", 1.0, 1.0)
    res = solve_spectrum(sf, 3)
    lv = physical_levels(res)
    res.levels = res.levels + [Level(p=l.p, u=l.u, E=l.E, branch=("copy",), positivity=True) for l in lv]
    with pytest.raises(NoSolution):
        physical_levels(res)


def test_json_roundtrip():
    _, sf = build_rational1_model("i", 1.0, 1.0)
    res = solve_spectrum(sf, 2, model_id="rational-1")
    d = json.loads(res.to_json())
    assert d["model"] == "rational-1"
    assert {"p", "u", "E", "branch", "positivity"} == set(d["levels"][0])
    assert len(d["levels"]) == len(res.levels)
