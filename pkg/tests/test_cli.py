import subprocess
import sys

import numpy as np
import pytest
import yaml

from perskern import kernels as kn
from perskern.cli import EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC, EXIT_OK, main


def write_config(tmp_path, **over):
    d = {
        "dataset": {"source": "orbits", "r_values": [2.5, 4.3], "n_orbits": 4, "n_points": 40, "seed": 2},
        "filtration": {"kind": "rips", "max_dim": 1},
        "diagrams": {"dims": [1], "cap": "max_value", "top_k": 5},
        "kernels": [{"kind": "swk", "grid": {"eta": [1]}}],
        "C_grid": [1],
        "folds": 2,
        "runs": 1,
        "output": str(tmp_path / "out"),
    }
    d.update(over)
    p = tmp_path / "cfg.yaml"
    p.write_text(yaml.safe_dump(d))
    return str(p)


def test_generate_orbits(tmp_path, capsys):
    out = tmp_path / "o.csv"
    assert main(["generate-orbits", "--n-orbits", "2", "--n-points", "5", "--out", str(out)]) == EXIT_OK
    assert len(out.read_text().splitlines()) == 1 + 5 * 2 * 5


def test_full_chain(tmp_path, capsys):
    cfg = write_config(tmp_path)
    assert main(["diagrams", "--config", cfg, "--out", str(tmp_path / "d")]) == EXIT_OK
    assert len(list((tmp_path / "d").glob("r*.txt"))) == 8
    gram = tmp_path / "g.csv"
    assert main(["gram", "--config", cfg, "--kernel", "pssk", "--param", "sigma=0.1", "--out", str(gram),
                 "--condition"]) == EXIT_OK
    assert "condition number" in capsys.readouterr().out
    G, ids = kn.load_gram_csv(gram)
    assert G.shape == (8, 8) and np.array_equal(G, G.T)
    model = tmp_path / "m.txt"
    assert main(["train", "--gram", str(gram), "--labels", str(tmp_path / "d" / "labels.csv"), "--C", "10",
                 "--out", str(model)]) == EXIT_OK
    assert model.read_text().startswith("classes 0 1")
    assert main(["bench", "--config", cfg]) == EXIT_OK
    assert (tmp_path / "out" / "results.csv").is_file()
    assert main(["sweep", "--config", cfg, "--kernel", "pssk", "--values", "0.1", "1"]) == EXIT_OK
    assert (tmp_path / "out" / "sweep_pssk_sigma.csv").is_file()


def test_config_errors_exit_1(tmp_path, capsys):
    assert main(["bench"]) == EXIT_CONFIG
    assert main(["bench", "--config", str(tmp_path / "missing.yaml")]) == EXIT_CONFIG
    assert main(["bench", "--config", write_config(tmp_path, folds=1)]) == EXIT_CONFIG
    cfg = write_config(tmp_path)
    assert main(["gram", "--config", cfg, "--kernel", "pssk"]) == EXIT_CONFIG
    assert main(["gram", "--config", cfg, "--kernel", "pssk", "--param", "sigma"]) == EXIT_CONFIG


def test_data_errors_exit_2(tmp_path, capsys):
    bad = tmp_path / "g.txt"
    bad.write_text("n=2 label=0\n0 7\n")
    cfg = write_config(tmp_path, dataset={"source": "file", "loader": "graphs", "path": str(bad)},
                       filtration={"kind": "graph"})
    assert main(["diagrams", "--config", cfg]) == EXIT_DATA
    assert main(["train", "--gram", str(tmp_path / "none.csv"), "--labels", "x", "--out", "y"]) == EXIT_DATA
    gram = tmp_path / "g.csv"
    kn.save_gram_csv(np.eye(2), ["a", "b"], gram)
    labels = tmp_path / "l.csv"
    labels.write_text("id,label\na,0\n")
    assert main(["train", "--gram", str(gram), "--labels", str(labels), "--out", str(tmp_path / "m")]) == EXIT_DATA


def test_numerical_failure_exit_3(tmp_path, capsys):
    cfg = write_config(tmp_path, diagrams={"dims": [1], "cap": "max_value", "top_k": 5})
    # a vanishing scale overflows the heat kernel normalisation
    assert main(["gram", "--config", cfg, "--kernel", "pssk", "--param", "sigma=1e-320"]) == EXIT_NUMERIC


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "perskern.cli", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "generate-orbits" in r.stdout
