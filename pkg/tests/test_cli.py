import json

import numpy as np
import pytest

from natcf.cli import main, worker_count
from natcf.data import read_csv
from natcf.specfile import read_scm, write_scm
from natcf.bench import toy_scm
from natcf.scm import sample
from natcf.data import write_csv


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_generate_writes_deterministic_csvs(tmp_path, capsys):
    train = tmp_path / "train.csv"
    test = tmp_path / "test.csv"
    code, out, _ = run(
        capsys, "generate", "--toy", "1", "--n", "200", "--seed", "0",
        "--out", f"{train},{test}",
    )
    assert code == 0
    a = read_csv(train)
    code, _, _ = run(
        capsys, "generate", "--toy", "1", "--n", "200", "--seed", "0",
        "--out", f"{train},{test}",
    )
    assert code == 0
    b = read_csv(train)
    assert np.array_equal(a.values, b.values)
    assert a.columns == ("n1", "n2", "n3")


def test_fit_then_query_natural(tmp_path, capsys):
    train = tmp_path / "train.csv"
    test = tmp_path / "test.csv"
    fitted = tmp_path / "fitted.scm"
    row = tmp_path / "row.csv"
    assert run(capsys, "generate", "--toy", "1", "--n", "2000", "--seed", "0",
               "--out", f"{train},{test}")[0] == 0
    assert run(capsys, "fit", "--data", str(train), "--toy", "1",
               "--out", str(fitted), "--degree", "3")[0] == 0
    scm = read_scm(fitted)
    assert scm.graph.nodes == ("n1", "n2", "n3")

    data = read_csv(test)
    write_csv(type(data)(data.columns, data.values[:1]), row)
    code, out, err = run(
        capsys, "query", "--scm", str(fitted), "--evidence", str(row),
        "--change", "n2=0.19", "--mode", "natural", "--eps", "1e-4",
        "--stats-from", str(train),
    )
    assert code == 0, err
    assert "status: feasible" in out
    assert "lbf_intervention" in out
    assert "distance:" in out


def test_query_do_mode_and_infeasible_exit(tmp_path, capsys):
    scm_path = tmp_path / "toy1.scm"
    write_scm(toy_scm(1), scm_path)
    row = tmp_path / "row.csv"
    data = sample(toy_scm(1), 1, seed=3)
    write_csv(data, row)

    code, out, _ = run(
        capsys, "query", "--scm", str(scm_path), "--evidence", str(row),
        "--change", "n2=0.5", "--mode", "do",
    )
    assert code == 0
    assert "counterfactual:" in out

    code, out, _ = run(
        capsys, "query", "--scm", str(scm_path), "--evidence", str(row),
        "--change", "n2=0.5", "--mode", "natural", "--eps", "0.49",
    )
    assert code == 1
    assert "no feasible intervention" in out


def test_query_partial_evidence_completed(tmp_path, capsys):
    scm_path = tmp_path / "toy1.scm"
    write_scm(toy_scm(1), scm_path)
    row = tmp_path / "partial.csv"
    row.write_text("n1\n0.25\n")
    code, out, _ = run(
        capsys, "query", "--scm", str(scm_path), "--evidence", str(row),
        "--change", "n2=0.1", "--mode", "natural",
    )
    assert code in (0, 1)
    assert "evidence completed by rejection sampling" in out
    assert "n1=0.25" in out


def test_bench_writes_reports_and_figures(tmp_path, capsys):
    out_dir = tmp_path / "out"
    code, out, err = run(
        capsys, "bench", "--toy", "2", "--n", "400", "--seed", "1",
        "--change", "n2", "--outcomes", "n2", "--steps", "4000",
        "--out-dir", str(out_dir), "--figures",
    )
    assert code == 0, err
    assert (out_dir / "report.json").exists()
    assert (out_dir / "mae.csv").exists()
    assert (out_dir / "audit.csv").exists()
    assert (out_dir / "mae_bars.png").exists()
    assert (out_dir / "scatter_n2.png").exists()
    report = json.loads((out_dir / "report.json").read_text())
    assert report["n_queries"] == 400
    assert "non_backtracking" in out


def test_ablate_outputs(tmp_path, capsys):
    out_dir = tmp_path / "ab"
    code, out, err = run(
        capsys, "ablate", "--toy", "2", "--n", "300", "--seed", "2",
        "--change", "n2", "--outcomes", "n2", "--steps", "3000",
        "--eps-list", "1e-3,1e-2", "--out-dir", str(out_dir), "--figures",
    )
    assert code == 0, err
    lines = (out_dir / "ablation.csv").read_text().strip().splitlines()
    assert lines[0].startswith("epsilon,feasible,infeasible")
    assert len(lines) == 3
    assert (out_dir / "ablation.png").exists()
    counts = [int(l.split(",")[2]) for l in lines[1:]]
    assert counts == sorted(counts)


def test_verify_small_run(capsys):
    code, out, err = run(
        capsys, "verify", "--toy", "2", "--cases", "25", "--seed", "1",
        "--steps", "20000", "--restarts", "4",
    )
    assert code == 0, err
    assert "agreement 25/25" in out


def test_experiment_spec_file_with_flag_override(tmp_path, capsys):
    spec = tmp_path / "exp.json"
    train = tmp_path / "tr.csv"
    test = tmp_path / "te.csv"
    spec.write_text(json.dumps({"toy": 2, "n": 120, "seed": 5,
                                "out": f"{train},{test}"}))
    code, _, _ = run(capsys, "--spec", str(spec), "generate", "--n", "80")
    assert code == 0
    assert read_csv(train).n_rows == 80  # flag wins over the file
    assert read_csv(train).columns == ("n1", "n2")  # toy 2 from the file


def test_usage_and_data_error_codes(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["bogus-command"])
    assert exc.value.code == 2

    code, _, err = run(
        capsys, "query", "--scm", str(tmp_path / "missing.scm"),
        "--evidence", str(tmp_path / "missing.csv"), "--change", "n2=0",
    )
    assert code == 3
    assert "error:" in err

    code, _, err = run(capsys, "query", "--change", "n2=0")
    assert code == 2


def test_byte_identical_stdout(tmp_path, capsys):
    args = ["bench", "--toy", "2", "--n", "150", "--seed", "3", "--change", "n2",
            "--outcomes", "n2", "--steps", "2000"]
    code1, out1, _ = run(capsys, *args)
    code2, out2, _ = run(capsys, *args)
    assert code1 == code2 == 0
    assert out1 == out2


def test_worker_count_env(monkeypatch):
    monkeypatch.setenv("NATCF_THREADS", "3")
    assert worker_count() == 3
    monkeypatch.setenv("NATCF_THREADS", "0")
    assert worker_count() >= 1
    monkeypatch.delenv("NATCF_THREADS")
    assert worker_count() >= 1
