import json
import logging

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from twotime import io as tio
from twotime.channels import Instrument
from twotime.cli import main
from twotime.errors import ParseError
from twotime.process import ProcessMatrix, random_valid_w, trivial_w
from twotime.sampling import make_rng, random_instrument
from twotime.states import w_to_eta
from twotime.tensor import A1, A2p, B1, LabeledTensor

from conftest import violators

finite = st.floats(allow_nan=False, allow_infinity=False, width=64)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(finite, finite), min_size=12, max_size=12))
def test_tensor_round_trip_is_bit_exact(pairs):
    data = np.array([complex(a, b) for a, b in pairs]).reshape(2, 3, 2)
    t = LabeledTensor([A1.up, A2p.down, B1.dag.down], data)
    back = tio.loads(tio.dumps(t))
    assert back.labels == t.labels
    assert np.array_equal(back.data.view(np.uint64), t.data.view(np.uint64))


def test_instrument_round_trip():
    inst = random_instrument(2, 3, make_rng(1), n_outcomes=3, kraus_per_outcome=2)
    back = tio.loads(tio.dumps(inst))
    assert len(back) == 3
    for g1, g2 in zip(inst.outcomes, back.outcomes):
        for E1, E2 in zip(g1, g2):
            assert np.array_equal(E1, E2)


def test_w_round_trip_and_conversion(tmp_path):
    W = random_valid_w(seed=9)
    tio.save(W, tmp_path / "w.json")
    assert tio.load(tmp_path / "w.json") == W
    eta = tio.loads(tio.dumps(w_to_eta(W)))
    assert eta == w_to_eta(W).tensor


def test_documents_are_plain_json():
    doc = json.loads(tio.dumps(trivial_w((1, 2, 1, 2))))
    assert doc["kind"] == "process_matrix" and doc["dims"] == [1, 2, 1, 2]
    assert doc["data"][0] == [1.0, 0.0]
    slot = json.loads(tio.dumps(w_to_eta(trivial_w())))["slots"][0]
    assert set(slot) == {"party", "stage", "variance", "dagger", "dim"}


@pytest.mark.parametrize("text,field", [
    ('{"dims": [2, 2, 2], "data": []}', "dims"),
    ('{"dims": [1, 1, 1, 1], "data": [[1, 0], [2]]}', "data"),
    ('{"slots": [{"party": "Q", "stage": "1", "variance": "raised", "dagger": false, "dim": 2}], "data": []}',
     "slots[0]"),
    ('{"kind": "instrument", "input_dim": 2, "output_dim": 2}', "outcomes"),
    ('{"kind": "mystery"}', "kind"),
    ('{"dims": [1, 1, 1, 1], "data": [[1, 0]', "document"),
])
def test_parse_errors_name_field_and_offset(text, field):
    with pytest.raises(ParseError) as info:
        tio.loads(text)
    assert info.value.field.startswith(field)
    assert info.value.offset is not None


def test_byte_offsets_count_utf8():
    with pytest.raises(ParseError) as info:
        tio.loads('{"note": "éé", "dims": [1, 1, 1, 1], "data": [[1, 0]')
    text = '{"note": "éé", "dims": [1, 1, 1, 1], "data": [[1, 0]'
    assert info.value.offset == len(text.encode())


# -- command line ----------------------------------------------------------------------

def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def write_instruments(tmp_path, dims=(2, 2, 2, 2)):
    tio.save(random_instrument(dims[0], dims[1], make_rng(1), n_outcomes=2), tmp_path / "a.json")
    tio.save(random_instrument(dims[2], dims[3], make_rng(2), n_outcomes=3), tmp_path / "b.json")


def test_gen_then_validate(tmp_path, capsys):
    w = tmp_path / "w.json"
    assert run(capsys, "gen", "w", "--dims", "2,2,2,2", "--seed", 7, "--out", w)[0] == 0
    code, out, err = run(capsys, "validate-w", "--in", w)
    assert code == 0
    report = json.loads(out)
    assert set(report) == {"manifest", "checks", "tables"}
    assert report["manifest"]["subcommand"] == "validate-w"
    assert all(c["pass"] for c in report["checks"])
    assert {"name", "residual", "tol", "pass"} == set(report["checks"][0])
    assert "ok" in err


def test_validate_failure_exit_1(tmp_path, capsys):
    tio.save(violators()["bob_reduced"], tmp_path / "bad.json")
    code, out, _ = run(capsys, "validate-w", "--in", tmp_path / "bad.json")
    assert code == 1
    failed = [c["name"] for c in json.loads(out)["checks"] if not c["pass"]]
    assert failed == ["bob_reduced"]


def test_conversion_round_trip_is_bit_identical(tmp_path, capsys):
    w, eta, back = tmp_path / "w.json", tmp_path / "eta.json", tmp_path / "back.json"
    run(capsys, "gen", "w", "--seed", 3, "--out", w)
    assert run(capsys, "w2eta", "--in", w, "--out", eta)[0] == 0
    assert run(capsys, "eta2w", "--in", eta, "--out", back)[0] == 0
    assert w.read_bytes() == back.read_bytes()
    assert run(capsys, "validate-eta", "--in", eta, "--seed", 1, "--trials", 5)[0] == 0


def test_prob_both_representations(tmp_path, capsys):
    W = random_valid_w(seed=4)
    tio.save(W, tmp_path / "w.json")
    tio.save(w_to_eta(W), tmp_path / "eta.json")
    write_instruments(tmp_path)
    code, out_w, _ = run(capsys, "prob", "--w", tmp_path / "w.json", "--alice", tmp_path / "a.json",
                         "--bob", tmp_path / "b.json")
    assert code == 0
    code, out_eta, _ = run(capsys, "prob", "--eta", tmp_path / "eta.json", "--alice", tmp_path / "a.json",
                           "--bob", tmp_path / "b.json")
    assert code == 0
    pw = np.array(json.loads(out_w)["tables"][0]["values"])
    pe = np.array(json.loads(out_eta)["tables"][0]["values"])
    assert pw.shape == (2, 3)
    np.testing.assert_allclose(pw, pe, atol=1e-12)


def test_prob_dimension_mismatch_exit_2(tmp_path, capsys):
    tio.save(trivial_w(), tmp_path / "w.json")
    write_instruments(tmp_path, (3, 2, 2, 2))
    code, _, err = run(capsys, "prob", "--w", tmp_path / "w.json", "--alice", tmp_path / "a.json",
                       "--bob", tmp_path / "b.json")
    assert code == 2
    assert "DimensionMismatch" in err


def test_parse_error_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"dims": [2, 2, 2, 2], "data": [[1, 0], ')
    code, _, err = run(capsys, "validate-w", "--in", bad)
    assert code == 2 and "ParseError" in err and "offset=" in err


def test_missing_file_and_usage_errors(tmp_path, capsys):
    assert run(capsys, "validate-w", "--in", tmp_path / "nope.json")[0] == 2
    with pytest.raises(SystemExit) as info:
        main(["frobnicate"])
    assert info.value.code == 2
    assert run(capsys, "gen", "w", "--dims", "2,2", "--seed", 1)[0] == 2


def test_non_finite_input_exit_1(tmp_path, capsys):
    W = trivial_w().matrix.copy()
    W[0, 0] = np.nan
    doc = tio.w_to_dict(ProcessMatrix(W))
    (tmp_path / "nan.json").write_text(json.dumps(doc))
    code, out, _ = run(capsys, "validate-w", "--in", tmp_path / "nan.json")
    assert code == 1
    assert json.loads(out)["numerical_failure"]["error"] == "NumericalFailure"


def test_simulate_mixed_protocol_with_shots(tmp_path, capsys):
    tio.save(random_valid_w(seed=2), tmp_path / "w.json")
    write_instruments(tmp_path)
    code, out, _ = run(capsys, "simulate", "--protocol", "fig3", "--state", tmp_path / "w.json",
                       "--alice", tmp_path / "a.json", "--bob", tmp_path / "b.json",
                       "--shots", 20000, "--seed", 5)
    assert code == 0
    tables = {t["name"]: t["values"] for t in json.loads(out)["tables"]}
    assert tables["success_probability"] == pytest.approx(1 / 16)
    assert sum(map(sum, tables["kept_counts"])) + sum(map(sum, tables["discarded_counts"])) == 20000


def test_simulate_ancilla_protocol(tmp_path, capsys):
    from twotime.states import product_state
    tio.save(product_state(np.array([1, 1]) / np.sqrt(2), np.array([1, 0])), tmp_path / "s.json")
    tio.save(Instrument.projective(np.eye(2)), tmp_path / "z.json")
    code, out, _ = run(capsys, "simulate", "--protocol", "fig1", "--state", tmp_path / "s.json",
                       "--alice", tmp_path / "z.json")
    assert code == 0
    tables = {t["name"]: t["values"] for t in json.loads(out)["tables"]}
    assert tables["conditional"] == pytest.approx([1, 0])


def test_check_theorem_report(tmp_path, capsys):
    tio.save(random_valid_w(seed=6), tmp_path / "w.json")
    code, out, _ = run(capsys, "check-theorem", "--target", tmp_path / "w.json", "--trials", 5,
                       "--seed", 2, "--tol", 1e-8)
    assert code == 0
    report = json.loads(out)
    names = {c["name"] for c in report["checks"]}
    assert "representation_agreement" in names and "eta.proof_mechanism" in names
    hist = [t for t in report["tables"] if t["name"].endswith("_log10_histogram")]
    assert hist and sum(hist[0]["values"]) == 5
    assert report["manifest"]["parameters"] == {"tol": 1e-8, "seed": 2, "trials": 5}


def test_check_theorem_detects_violation(tmp_path, capsys):
    tio.save(violators()["output_splitting"], tmp_path / "w.json")
    code, _, _ = run(capsys, "check-theorem", "--target", tmp_path / "w.json", "--trials", 3, "--seed", 0)
    assert code == 1


def test_missing_seed_is_logged(tmp_path, capsys, caplog):
    with caplog.at_level(logging.WARNING, logger="twotime"):
        code, _, err = run(capsys, "gen", "w", "--out", tmp_path / "w.json")
    assert code == 0
    assert "no --seed given" in caplog.text
    assert "with seed" in err
