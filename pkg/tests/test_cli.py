import json
import subprocess
import sys
from importlib import resources

import pytest

from subset_equalizing.cli import main

EXAMPLE4 = str(resources.files("subset_equalizing") / "data" / "example4.json")
EXAMPLE3 = str(resources.files("subset_equalizing") / "data" / "example3.json")


def write(path, doc):
    path.write_text(json.dumps(doc))
    return str(path)


@pytest.fixture
def small_sweep(tmp_path):
    return write(
        tmp_path / "s1.json",
        {"kind": "sweep", "scenarios": 2, "values": [20], "base": {"N": 20, "avg_degree": 6, "n": 2}},
    )


def test_sweep_writes_csv_next_to_config(small_sweep, tmp_path):
    assert main(["sweep", "--config", small_sweep]) == 0
    text = (tmp_path / "s1.csv").read_text()
    assert text.startswith("param_value,algorithm,")
    assert main(["sweep", "--config", small_sweep, "--seed", "9", "--out", str(tmp_path / "o.csv")]) == 0
    assert (tmp_path / "o.csv").read_text() != text


def test_sweep_step_cap_is_failure(tmp_path, capsys):
    path = write(
        tmp_path / "cap.json",
        {"kind": "sweep", "scenarios": 1, "values": [20], "base": {"N": 20, "avg_degree": 6, "n": 2}, "algorithms": ["PE"], "step_cap": 2},
    )
    assert main(["sweep", "--config", path]) == 1
    assert "converged" in capsys.readouterr().err


def test_volatile(tmp_path):
    config = write(tmp_path / "v.json", {"kind": "volatile", "M": 10, "founders": 5, "horizon": 20, "n": 2, "tracked": [1]})
    out, actions = tmp_path / "v.csv", tmp_path / "a.csv"
    assert main(["volatile", "--config", config, "--out", str(out), "--actions-out", str(actions)]) == 0
    assert out.read_text().splitlines()[0] == "k,num_members,V,max_error,min_eigenvalue"
    assert len(out.read_text().splitlines()) == 22
    assert len(actions.read_text().splitlines()) == 21


def test_wrong_kind(small_sweep, capsys):
    assert main(["volatile", "--config", small_sweep]) == 1
    assert "volatile" in capsys.readouterr().err


def test_validate_sequence(capsys):
    assert main(["validate", "--seq", EXAMPLE4]) == 0
    assert capsys.readouterr().out.strip() == "ok"


def test_validate_bad_sequence(tmp_path, capsys):
    seq = write(tmp_path / "bad.json", {"M": 3, "founders": [1], "steps": [{"interact": [2]}], "period": None})
    assert main(["validate", "--seq", seq]) == 1
    assert "k=1" in capsys.readouterr().err


def test_validate_config(small_sweep, tmp_path):
    assert main(["validate", "--config", small_sweep]) == 0
    assert main(["validate", "--config", write(tmp_path / "x.json", {"kind": "sweep", "vary": "q"})]) == 1


def test_connectivity_json(capsys):
    assert main(["connectivity", "--seq", EXAMPLE4, "--k", "1"]) == 0
    assert json.loads(capsys.readouterr().out)["h_values"] == {"1": 3}
    assert main(["connectivity", "--seq", EXAMPLE4, "--window", "12"]) == 0
    assert json.loads(capsys.readouterr().out)["h_star"] == {"kind": "finite", "value": 3, "certified": True}
    assert main(["connectivity", "--seq", EXAMPLE3]) == 0
    assert json.loads(capsys.readouterr().out)["h_values"]["0"] == "inf"


def test_missing_config_file(tmp_path, capsys):
    assert main(["sweep", "--config", str(tmp_path / "nope.json")]) != 0
    assert "error" in capsys.readouterr().err


def test_missing_config_flag_prints_usage(capsys):
    with pytest.raises(SystemExit) as exit_info:
        main(["sweep"])
    assert exit_info.value.code != 0
    assert "usage" in capsys.readouterr().err


def test_unknown_flag():
    with pytest.raises(SystemExit) as exit_info:
        main(["validate", "--seq", EXAMPLE4, "--bogus"])
    assert exit_info.value.code != 0


def test_module_entry_point():
    done = subprocess.run([sys.executable, "-m", "subset_equalizing", "validate", "--seq", EXAMPLE4], capture_output=True, text=True)
    assert done.returncode == 0 and done.stdout.strip() == "ok"
