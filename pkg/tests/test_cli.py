import json
import os

import pytest

from arborwalk import cli
from arborwalk.errors import ManifestError
from arborwalk.manifest import load, validate


def write_manifest(tmp_path, doc, name="m.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc), encoding="utf-8")
    return str(path)


LYAP_DOC = {"schema_version": 1, "kind": "lyapunov", "q": 3,
            "grid": {"r": [0.4, 0.7]}, "n_matrices": 2000, "seed": 5}

RETURN_DOC = {"schema_version": 1, "kind": "return_prob", "q": 3,
              "coin": {"family": "q3_localizing_1", "params": {"r": 0.5}},
              "nmax": 12, "realizations": 2, "seed": 1}


def read_outputs(out_dir):
    out = {}
    for name in ("results.csv", "summary.json", "manifest.json"):
        with open(os.path.join(out_dir, name), "rb") as fh:
            out[name] = fh.read()
    return out


def test_validate_ok(tmp_path, capsys):
    path = write_manifest(tmp_path, LYAP_DOC)
    assert cli.main(["validate", path]) == cli.EXIT_OK
    assert "manifest ok" in capsys.readouterr().out


def test_validate_missing_file(tmp_path):
    assert cli.main(["validate", str(tmp_path / "nope.json")]) == cli.EXIT_MANIFEST


def test_validate_bad_manifest(tmp_path):
    doc = dict(LYAP_DOC, kind="not_a_kind")
    path = write_manifest(tmp_path, doc)
    assert cli.main(["validate", path]) == cli.EXIT_MANIFEST


def test_validate_invalid_json(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json", encoding="utf-8")
    assert cli.main(["validate", str(path)]) == cli.EXIT_MANIFEST


def test_manifest_error_field_paths():
    with pytest.raises(ManifestError) as err:
        validate({"schema_version": 1, "kind": "return_prob", "q": 3,
                  "coin": {"family": "q4_reducing"}, "nmax": 10})
    assert "coin.family" in str(err.value)
    with pytest.raises(ManifestError) as err:
        validate({"schema_version": 1, "kind": "green_moments", "q": 3,
                  "coin": {"family": "q3_localizing_1"}, "L": 3, "s": 2.0,
                  "z": [0.3, 0.1]})
    assert str(err.value).startswith("s")


def test_run_is_byte_deterministic(tmp_path):
    path = write_manifest(tmp_path, LYAP_DOC)
    out1, out2 = str(tmp_path / "a"), str(tmp_path / "b")
    assert cli.main(["run", path, "--out", out1]) == cli.EXIT_OK
    assert cli.main(["run", path, "--out", out2]) == cli.EXIT_OK
    assert read_outputs(out1) == read_outputs(out2)
    assert not os.path.exists(os.path.join(out1, "partial.jsonl"))


def test_run_threads_deterministic(tmp_path):
    path = write_manifest(tmp_path, RETURN_DOC)
    out1, out2 = str(tmp_path / "t1"), str(tmp_path / "t4")
    assert cli.main(["run", path, "--out", out1]) == cli.EXIT_OK
    assert cli.main(["run", path, "--out", out2, "--threads", "4"]) == cli.EXIT_OK
    assert read_outputs(out1) == read_outputs(out2)


def test_resume_reproduces_full_run(tmp_path):
    from arborwalk import experiments
    path = write_manifest(tmp_path, RETURN_DOC)
    doc = load(path)
    full_dir = str(tmp_path / "full")
    cli.main(["run", path, "--out", full_dir])

    part_dir = str(tmp_path / "part")
    partial = experiments.run(doc, part_dir, stop_after=1)
    assert partial.summary["partial"] and partial.summary["units_done"] == 1
    assert os.path.exists(os.path.join(part_dir, "partial.jsonl"))
    assert cli.main(["run", path, "--out", part_dir, "--resume"]) == cli.EXIT_OK
    assert read_outputs(full_dir) == read_outputs(part_dir)


def test_csv_format(tmp_path):
    path = write_manifest(tmp_path, RETURN_DOC)
    out = str(tmp_path / "fmt")
    cli.main(["run", path, "--out", out])
    raw = open(os.path.join(out, "results.csv"), "rb").read()
    lines = raw.decode("utf-8").split("\r\n")
    assert lines[0].startswith("grid_index,realization,seed,n")
    # floats are written with 17 significant digits
    prob = lines[1].split(",")[-1]
    assert prob == format(float(prob), ".17g")


def test_capacity_cap_exit_code(tmp_path, monkeypatch):
    doc = {"schema_version": 1, "kind": "wiener", "q": 3,
           "coin": {"family": "q3_localizing_1", "params": {"r": 0.5}},
           "nmax": 50, "L": 3, "seed": 0}
    path = write_manifest(tmp_path, doc)
    monkeypatch.setenv("ARBORWALK_CAP_DIM", "10")
    assert cli.main(["run", path, "--out", str(tmp_path / "cap")]) == cli.EXIT_CAPACITY
    monkeypatch.delenv("ARBORWALK_CAP_DIM")
    assert cli.main(["run", path, "--out", str(tmp_path / "ok")]) == cli.EXIT_OK


def test_failure_budget_exit_code(tmp_path):
    # z on the unit circle makes every realization ill conditioned
    doc = {"schema_version": 1, "kind": "green_moments", "q": 3,
           "coin": {"family": "q3_localizing_1", "params": {"r": 0.5}},
           "L": 1, "s": 0.5, "z": [1.0, 0.0], "realizations": 3, "seed": 0}
    path = write_manifest(tmp_path, doc)
    assert cli.main(["run", path, "--out", str(tmp_path / "bad")]) == cli.EXIT_NUMERICAL


def test_plot_outputs_are_deterministic(tmp_path):
    path = write_manifest(tmp_path, LYAP_DOC)
    out = str(tmp_path / "res")
    cli.main(["run", path, "--out", out])
    files1 = cli_plot_bytes(out)
    files2 = cli_plot_bytes(out)
    assert files1 and files1 == files2
    for name in files1:
        assert name.endswith(".svg")


def cli_plot_bytes(out_dir):
    from arborwalk import plots
    data = {}
    for path in plots.emit_plots(out_dir):
        with open(path, "rb") as fh:
            data[os.path.basename(path)] = fh.read()
    return data


def test_default_output_directory(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    path = write_manifest(tmp_path, dict(RETURN_DOC, nmax=4, realizations=1),
                          name="tiny.json")
    assert cli.main(["run", path]) == cli.EXIT_OK
    assert os.path.exists(tmp_path / "tiny_out" / "results.csv")
