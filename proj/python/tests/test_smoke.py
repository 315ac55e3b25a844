from fractions import Fraction

import pytest

import mtmgossip


def test_line_expansion():
    line = mtmgossip.generate("line", 8)
    assert mtmgossip.vertex_expansion(line) == Fraction(1, 4)


def test_matching_lemma_on_ring():
    report = mtmgossip.check_matching_lemma(mtmgossip.generate("ring", 10))
    assert report["violations"] == 0
    num, den = report["gamma"]
    anum, aden = report["alpha"]
    assert Fraction(num, den) >= Fraction(anum, aden) / 4


def test_figure_bands():
    assert [mtmgossip.band_for_count(32, c) for c in (4, 31, 32)] == [2, 8, 9]


def test_sync_clique_completes():
    res = mtmgossip.run_sync(mtmgossip.generate("clique", 8), k=1, seed=7)
    assert res["completed"]
    assert res["upgrades"] <= res["upgrade_bound"]
    assert res["counts"][-1] == [8]


def test_sync_without_band_analysis():
    res = mtmgossip.run_sync(mtmgossip.generate("grid", 9), k=2, seed=1)
    assert res["completed"]
    assert res["upgrades"] is None


def test_async_and_synchronized():
    topo = mtmgossip.generate("clique", 8)
    a = mtmgossip.run_async(topo, k=2, seed=3)
    assert a["completed"] and a["contract_violations"] == 0
    s = mtmgossip.run_synchronized(topo, k=2, rounds=20, seed=3)
    assert s["finished"] and s["violations"] == 0 and s["legality_problems"] == 0


def test_cli_topo_analyze():
    code, out, _ = mtmgossip.cli(["topo", "--kind", "line", "--n", "8", "--analyze"])
    assert code == 0
    assert "alpha = 1/4" in out


def test_bad_kind_raises():
    with pytest.raises(Exception):
        mtmgossip.generate("hypercube", 8)
