import csv
import json
import subprocess
import sys

import pytest

from expander_ncut import generators as gen
from expander_ncut.cli import main
from expander_ncut.graph import load_graph, read_partition, write_metis

from conftest import barbell_graph, two_triangles_graph


@pytest.fixture
def barbell_file(tmp_path):
    path = tmp_path / "barbell.graph"
    write_metis(barbell_graph(), path)
    return path


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_solve_barbell_runs(tmp_path, barbell_file):
    out = tmp_path / "out"
    assert main(["solve", "--graph", str(barbell_file), "-k", "2,4", "--runs", "3", "--out", str(out)]) == 0
    parts = sorted(p.name for p in out.glob("part.*"))
    assert len(parts) == 6
    rows = read_csv(out / "stats.csv")
    assert len(rows) == 6
    for r in rows:
        if r["k"] == "2":
            assert float(r["theta_exact"]) == pytest.approx(2 / 7)
    timing = read_csv(out / "timings.csv")
    assert set(timing[0]) == {"run", "seed", "k", "hierarchy_s", "solve_s", "refine_s", "total_s"}
    summary = read_csv(out / "summary.csv")
    assert [r["k"] for r in summary] == ["2", "4"]


def test_solve_disconnected(tmp_path):
    path = tmp_path / "tt.graph"
    write_metis(two_triangles_graph(), path)
    assert main(["solve", "--graph", str(path), "-k", "2", "--out", str(tmp_path / "o")]) == 0
    assert float(read_csv(tmp_path / "o" / "stats.csv")[0]["theta_exact"]) == 0


def test_solve_k1(tmp_path, barbell_file):
    assert main(["solve", "--graph", str(barbell_file), "-k", "1", "--out", str(tmp_path / "o")]) == 0
    assert read_partition(tmp_path / "o" / "part.seed0.k1").tolist() == [0] * 6
    assert float(read_csv(tmp_path / "o" / "stats.csv")[0]["theta_exact"]) == 0


def test_solve_json_and_dp(tmp_path, barbell_file):
    out = tmp_path / "o"
    assert main(["solve", "--graph", str(barbell_file), "-k", "2", "--heuristic", "dp", "--stats", "json",
                 "--no-refine", "--out", str(out)]) == 0
    rows = json.loads((out / "stats.json").read_text())
    assert rows[0]["theta_exact"] == pytest.approx(2 / 7) and rows[0]["moves"] == 0


def test_solve_k_too_large(tmp_path, barbell_file):
    assert main(["solve", "--graph", str(barbell_file), "-k", "7", "--out", str(tmp_path / "o")]) == 1


def test_decompose_examples(tmp_path, barbell_file):
    out = tmp_path / "d"
    assert main(["decompose", "--graph", str(barbell_file), "--out", str(out)]) == 0
    row = read_csv(out / "decomposition.csv")[0]
    assert row["components"] == "2" and float(row["cut_edges"]) == 1
    assert read_partition(out / "components").tolist() == [0, 0, 0, 1, 1, 1]

    k8 = tmp_path / "k8.graph"
    write_metis(gen.complete(8), k8)
    assert main(["decompose", "--graph", str(k8), "--out", str(tmp_path / "k")]) == 0
    assert read_csv(tmp_path / "k" / "decomposition.csv")[0]["components"] == "1"

    empty = tmp_path / "e.graph"
    empty.write_text("4 0\n\n\n\n\n")
    assert main(["decompose", "--graph", str(empty), "--out", str(tmp_path / "e")]) == 0
    assert read_csv(tmp_path / "e" / "decomposition.csv")[0]["components"] == "4"


def test_hierarchy_command(tmp_path, barbell_file):
    out = tmp_path / "h"
    assert main(["hierarchy", "--graph", str(barbell_file), "--out", str(out)]) == 0
    assert len((out / "tree.txt").read_text().splitlines()) == 9
    assert [r["vertices"] for r in read_csv(out / "levels.csv")] == ["6", "2", "1"]


def test_generate_examples(tmp_path):
    assert main(["generate", "barbell", "--size", "3", "--out", str(tmp_path / "b")]) == 0
    assert (load_graph(tmp_path / "b").to_dense() == barbell_graph().to_dense()).all()
    assert main(["generate", "complete", "--n", "8", "--out", str(tmp_path / "k")]) == 0
    assert load_graph(tmp_path / "k").m == 28
    for i in range(2):
        assert main(["generate", "sbm", "--blocks", "4", "--size", "50", "--seed", "3",
                     "--out", str(tmp_path / f"s{i}")]) == 0
    assert (tmp_path / "s0").read_bytes() == (tmp_path / "s1").read_bytes()
    assert main(["generate", "cycle", "--n", "2", "--out", str(tmp_path / "c")]) == 1


def test_oracle_barbell(barbell_file, capsys):
    assert main(["oracle", "--graph", str(barbell_file)]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and out.count("PASS") >= 5


def test_oracle_refusal(tmp_path, capsys):
    path = tmp_path / "p.graph"
    write_metis(gen.path(30), path)
    assert main(["oracle", "--graph", str(path)]) == 1
    assert "exceeds the limit" in capsys.readouterr().err


def test_oracle_k2(tmp_path, capsys):
    path = tmp_path / "k2.graph"
    write_metis(gen.path(2), path)
    main(["oracle", "--graph", str(path)])
    assert "phi(0) = 1\n" in capsys.readouterr().out


def test_parse_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.graph"
    bad.write_text("3 2\n2\n1 x\n2\n")
    assert main(["solve", "--graph", str(bad), "--out", str(tmp_path / "o")]) == 2
    assert "line 3" in capsys.readouterr().err
    assert main(["decompose", "--graph", str(tmp_path / "missing"), "--out", str(tmp_path / "o")]) == 2


def test_module_entry_point(tmp_path, barbell_file):
    res = subprocess.run([sys.executable, "-m", "expander_ncut", "decompose", "--graph", str(barbell_file),
                          "--out", str(tmp_path / "m")], capture_output=True, text=True)
    assert res.returncode == 0 and "components=2" in res.stdout


@pytest.mark.parametrize("cmd", [
    ["solve", "-k", "2,3", "--runs", "2"],
    ["decompose"],
    ["hierarchy"],
])
def test_byte_identical_outputs(tmp_path, cmd):
    g, _ = gen.sbm(3, 12, 0.6, 0.05, seed=1)
    path = tmp_path / "g.graph"
    write_metis(g, path)
    dirs = []
    for i in range(2):
        d = tmp_path / f"run{i}"
        assert main([cmd[0], "--graph", str(path), "--seed", "5", "--out", str(d)] + cmd[1:]) == 0
        dirs.append(d)
    files = sorted(p.name for p in dirs[0].iterdir() if not p.name.startswith("timings"))
    assert files
    for name in files:
        assert (dirs[0] / name).read_bytes() == (dirs[1] / name).read_bytes()
