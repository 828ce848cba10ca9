import json

import numpy as np
import pytest

from lassoagg.cli import (ParseError, canonical_json, load_matrix_csv,
                          load_vector_csv, main, save_matrix_csv)


@pytest.fixture
def data_files(tmp_path):
    rng = np.random.default_rng(0)
    Xm = rng.standard_normal((20, 5))
    beta = np.zeros(5)
    beta[0] = 2.0
    y = Xm @ beta + 0.3 * rng.standard_normal(20)
    xpath = tmp_path / "x.csv"
    ypath = tmp_path / "y.csv"
    save_matrix_csv(str(xpath), Xm)
    save_matrix_csv(str(ypath), y.reshape(-1, 1))
    return str(xpath), str(ypath), Xm, y


def test_matrix_csv_round_trip(tmp_path, data_files):
    xpath, ypath, Xm, y = data_files
    assert np.array_equal(load_matrix_csv(xpath).entries, Xm)
    assert np.array_equal(load_vector_csv(ypath), y)


def test_csv_errors_carry_line_numbers(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("1.0,2.0\n3.0,oops\n")
    with pytest.raises(ParseError, match=r"bad\.csv:2.*column 2"):
        load_matrix_csv(str(bad))

    ragged = tmp_path / "ragged.csv"
    ragged.write_text("1.0,2.0\n3.0\n")
    with pytest.raises(ParseError, match=r"ragged\.csv:2.*ragged"):
        load_matrix_csv(str(ragged))

    inf = tmp_path / "inf.csv"
    inf.write_text("1.0\ninf\n")
    with pytest.raises(ParseError, match=r"inf\.csv:2.*non-finite"):
        load_vector_csv(str(inf))

    empty = tmp_path / "empty.csv"
    empty.write_text("")
    with pytest.raises(ParseError, match="empty"):
        load_vector_csv(str(empty))

    with pytest.raises(ParseError, match="cannot open"):
        load_vector_csv(str(tmp_path / "missing.csv"))


def test_header_row_skipped(tmp_path):
    f = tmp_path / "h.csv"
    f.write_text("value\n1.5\n2.5\n")
    assert load_vector_csv(str(f), header=True).tolist() == [1.5, 2.5]


def test_canonical_json_is_sorted_and_exact():
    text = canonical_json({"b": 0.1, "a": np.float64(1.0 / 3.0)})
    assert text == '{"a":0.3333333333333333,"b":0.1}'
    # floats survive a round trip exactly
    assert json.loads(text)["a"] == 1.0 / 3.0


def test_path_command_writes_report(tmp_path, data_files, capsys):
    xpath, ypath, *_ = data_files
    out = tmp_path / "report.json"
    pcsv = tmp_path / "path.csv"
    code = main(["path", "--x", xpath, "--y", ypath, "--out", str(out),
                 "--path-csv", str(pcsv)])
    assert code == 0
    report = json.loads(out.read_text())
    assert report["schema_version"] == "1"
    assert report["config"]["command"] == "path"
    assert len(report["results"]["knots"]) >= 1
    # supports are reported with 1-based indices
    flat = [j for T in report["results"]["supports"] for j in T]
    assert flat and min(flat) >= 1 and max(flat) <= 5
    rows = load_matrix_csv(str(pcsv))
    assert rows.entries.shape[1] == 3


def test_aggregate_command_q_and_crit(tmp_path, data_files):
    xpath, ypath, *_ = data_files
    for method in ("q", "crit"):
        out = tmp_path / f"agg_{method}.json"
        code = main(["aggregate", "--x", xpath, "--y", ypath, "--method", method,
                     "--sigma", "0.09", "--out", str(out)])
        assert code == 0
        report = json.loads(out.read_text())
        assert report["results"]["result"]["kind"] == method
        assert report["results"]["sigma_hat_sq"] == 0.09


def test_aggregate_requires_sigma_in_known_mode(data_files, capsys):
    xpath, ypath, *_ = data_files
    code = main(["aggregate", "--x", xpath, "--y", ypath])
    assert code == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "InvalidInputError"
    assert "--sigma" in err["message"]


def test_sqrt_pipeline_command(tmp_path, data_files):
    xpath, ypath, *_ = data_files
    out = tmp_path / "sqrt.json"
    code = main(["sqrt-pipeline", "--x", xpath, "--y", ypath,
                 "--grid-size", "5", "--out", str(out)])
    assert code == 0
    report = json.loads(out.read_text())
    assert len(report["results"]["grid_meta"]["grid"]) == 5
    assert report["results"]["sigma_hat_sq"] > 0


def test_degenerate_variance_exits_2(tmp_path, capsys):
    xpath = tmp_path / "x.csv"
    ypath = tmp_path / "y.csv"
    xpath.write_text("1.0\n0.0\n")
    ypath.write_text("3.0\n0.0\n")
    code = main(["sqrt-pipeline", "--x", str(xpath), "--y", str(ypath)])
    assert code == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "DegenerateVarianceError"


def test_parse_error_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("1.0\nnope\n")
    code = main(["path", "--x", str(bad), "--y", str(bad)])
    assert code == 2
    assert json.loads(capsys.readouterr().err)["error"] == "ParseError"


def test_simulate_command_and_thread_invariance(tmp_path):
    args = ["simulate", "--n", "20", "--p", "6", "--s", "1", "--sigma", "0.5",
            "--reps", "3", "--seed", "7"]
    out1 = tmp_path / "s1.json"
    out2 = tmp_path / "s2.json"
    assert main(args + ["--threads", "1", "--out", str(out1)]) == 0
    assert main(args + ["--threads", "4", "--out", str(out2)]) == 0
    r1 = json.loads(out1.read_text())
    r2 = json.loads(out2.read_text())
    # the results section is identical regardless of parallelism
    assert canonical_json(r1["results"]) == canonical_json(r2["results"])
    assert r1["results"]["reps"] == 3
    assert len(r1["results"]["lhs"]) == 3


def test_results_section_byte_stable(tmp_path, data_files):
    xpath, ypath, *_ = data_files
    outs = []
    for name in ("a.json", "b.json"):
        out = tmp_path / name
        main(["aggregate", "--x", xpath, "--y", ypath, "--sigma", "0.09",
              "--out", str(out)])
        outs.append(json.loads(out.read_text()))
    assert canonical_json(outs[0]["results"]) == canonical_json(outs[1]["results"])
    assert canonical_json(outs[0]["config"]) == canonical_json(outs[1]["config"])


def test_weights_command_stdout(capsys):
    assert main(["weights", "--p", "6"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["results"]["bounds_hold"] is True
    assert report["results"]["total_mass"] == pytest.approx(1.0, abs=1e-10)
    assert len(report["results"]["log_inv_weight_by_size"]) == 7
