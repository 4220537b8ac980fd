import json
import math

import pytest

import cgbench


def test_default_config_shape():
    cfg = cgbench.default_config()
    assert len(cfg["pieces"]) == 24
    assert len(cfg["trials"]) == 4
    assert len(cfg["practice"]) == 4
    catalog_hash, trial_hash = cgbench.config_hashes()
    assert len(catalog_hash) == 64 and len(trial_hash) == 64


def test_canonical_dump_is_stable():
    text = cgbench.canonical_dump({"b": 1, "a": [2, 1]})
    assert text.index('"a"') < text.index('"b"')
    assert json.loads(text) == {"a": [2, 1], "b": 1}
    assert cgbench.canonical_dump(json.loads(text)) == text


def test_dsl_round_trip_and_errors():
    parsed = cgbench.parse_commands("ok PLACE 10 AT 1,0 then DONE")
    assert [c["op"] for c in parsed["commands"]] == ["place", "done"]
    assert parsed["errors"] == []
    assert cgbench.format_command(parsed["commands"][0]) == "PLACE 10 AT 1,0"
    bad = cgbench.parse_commands("PLACE eighteen AT 0,0")
    assert bad["commands"] == []
    assert bad["errors"][0]["keyword"] == "PLACE"


def test_grounding_classifiers():
    refs = cgbench.references("Move the yellow piece next to a red one.")
    assert [(r["surface"], r["definiteness"]) for r in refs] == [
        ("the yellow piece", "definite"),
        ("a red one", "indefinite"),
    ]
    assert cgbench.dialogue_act("which red piece?", actor="worker") == "clarification"
    assert cgbench.word_count("  two\twords ") == 2


def test_statistics():
    r = cgbench.mann_whitney_u([1, 2, 3], [4, 5, 6])
    assert r["value"] == 0.0
    assert math.isclose(r["p"], 0.1, abs_tol=1e-12)
    chi = cgbench.chi_square_2x2([[9, 1], [3, 7]])
    assert abs(chi["value"] - 7.5) <= 1e-9
    perm = cgbench.permutation_test([10, 10], [0, 0])
    assert math.isclose(perm["p"], 3 / 7)
    with pytest.raises(cgbench.BenchError, match="ZeroMarginal"):
        cgbench.chi_square_2x2([[5, 5], [0, 0]])


def test_selfplay_analyze_audit(tmp_path):
    corpus = tmp_path / "corpus"
    run = cgbench.selfplay(corpus, sessions_per_cell=1, seed=3, worker="noisy:0.3")
    assert run["exit_code"] == 0
    assert len(run["sessions"]) == 4
    # shared-view repairs always recover; nonshared sessions may end unsolved
    assert all(o["success"] for s in run["sessions"] if s["view"] == "shared" for o in s["outcomes"])
    assert all(len(s["outcomes"]) == 5 for s in run["sessions"])

    out = tmp_path / "analysis"
    first = cgbench.analyze(corpus, out_dir=out, n_perm=500)
    second = cgbench.analyze(corpus, n_perm=500, jobs=3)
    assert first["exit_code"] == 0
    assert first["analyzed"] == 4
    assert json.dumps(first["report"], sort_keys=True) == json.dumps(second["report"], sort_keys=True)
    assert (out / "report.json").exists()
    assert {t["name"] for t in first["report"]["tests"]} >= {"success_by_view", "pair_words_trend"}

    audits = cgbench.audit(corpus)
    assert len(audits) == 4
    assert all(a["violations"] == [] for a in audits)
    for a in audits:
        if a["view"] == "nonshared":
            assert a["snapshots"] == 0
        else:
            assert a["snapshots"] == a["worker_messages_with_actions"]


def test_missing_corpus_raises(tmp_path):
    with pytest.raises(cgbench.BenchError):
        cgbench.analyze(tmp_path / "nope")


def test_imported_copy():
    import os

    staged = os.environ.get("CGBENCH_PYPKG")
    if staged:
        assert cgbench.__file__.startswith(staged)
