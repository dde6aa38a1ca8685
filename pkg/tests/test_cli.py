import json
import math

import pytest

from lelab.cli import (EXIT_FAILED, EXIT_MISSING, EXIT_OK, EXIT_USAGE, CliError, file_hash, main,
                       p_grid, parse_p_range, read_config)


@pytest.fixture(scope="module")
def solved(tmp_path_factory):
    out = tmp_path_factory.mktemp("solve")
    code = main(["solve", "--domain", "disk", "--h", "0.05", "--p", "5:20:1.15", "--out", str(out)])
    assert code == EXIT_OK
    return out


def test_parse_p_range():
    assert parse_p_range("5:80:1.15") == (5.0, 80.0, 1.15)
    assert parse_p_range("100") == (100.0, 100.0, 1.15)
    with pytest.raises(CliError) as info:
        parse_p_range("0.5:2")
    assert info.value.code == EXIT_USAGE and "p > 1" in str(info.value)


def test_p_grid_endpoints():
    g = p_grid(5, 80, 1.15)
    assert g[0] == 5 and g[-1] == 80
    assert all(b > a for a, b in zip(g, g[1:]))


def test_invalid_p_range_exit(tmp_path, capsys):
    assert main(["solve", "--p", "0.5:2", "--out", str(tmp_path)]) == EXIT_USAGE
    assert "p > 1" in capsys.readouterr().err


def test_solve_outputs(solved):
    man = json.loads((solved / "manifest.json").read_text())
    head = (solved / "path.csv").read_text().splitlines()[0].split(",")
    assert head[:5] == ["p", "u_max_plus", "u_max_minus", "J_p", "mass"]
    for name, digest in man["files"].items():
        assert file_hash(solved / name) == digest
    listed = set(man["files"]) | {"manifest.json"}
    assert {f.name for f in solved.iterdir()} == listed


def test_radial_solve(tmp_path):
    assert main(["solve", "--mode", "radial-nodal", "--p", "100", "--out", str(tmp_path)]) == EXIT_OK
    text = next(tmp_path.glob("radial_p*.csv")).read_text()
    alpha = float(text.splitlines()[2].split(",")[1])
    assert alpha == pytest.approx(2.46, rel=0.05)


def test_green_singular_pair(capsys):
    assert main(["green", "--domain", "disk", "--pair", "0,0", "0,0"]) == EXIT_USAGE
    assert "singular" in capsys.readouterr().err


def test_green_pair_report(capsys):
    r = "0.485868"
    assert main(["green", "--domain", "disk", "--pair", f"{r},0", f"-{r},0"]) == EXIT_OK
    rep = json.loads(capsys.readouterr().out)["kirchhoff_routh"]
    assert abs(rep["det_w"]) <= 1e-6


def test_green_find_critical(capsys):
    assert main(["green", "--domain", "disk", "--find-critical"]) == EXIT_OK
    crit = json.loads(capsys.readouterr().out)["critical"]
    assert crit["radius"] == pytest.approx(math.sqrt(math.sqrt(5) - 2), abs=1e-4)


def test_profiles_command(tmp_path, capsys):
    assert main(["profiles", "--out", str(tmp_path)]) == EXIT_OK
    moments = (tmp_path / "moments.csv").read_text()
    row = {l.split(",")[0]: l.split(",") for l in moments.splitlines()[1:]}
    assert float(row["mass"][1]) == pytest.approx(25.132741, abs=1e-6)
    assert float(row["w0_flux"][1]) == pytest.approx(75.398, abs=0.08)
    for line in (tmp_path / "psi2.csv").read_text().splitlines()[2:]:
        r, v, _ = line.split(",")
        if float(r) == math.sqrt(8):
            assert float(v) == pytest.approx(1.0, abs=1e-12)
            break
    else:
        pytest.fail("no row at r = sqrt(8)")


def test_verify_greenforms_row(tmp_path, capsys):
    code = main(["verify", "--suite", "greenforms", "--domain", "disk", "--out", str(tmp_path)])
    assert code == EXIT_OK
    csv = (tmp_path / "greenforms_greenforms.csv").read_text()
    assert "-0.159154943092,-0.159154943092" in csv


def test_verify_empty_dir(tmp_path):
    empty = tmp_path / "empty"
    empty.mkdir()
    assert main(["verify", "--suite", "all", "--in", str(empty), "--out", str(tmp_path / "o")]) == EXIT_MISSING


def test_verify_detects_tampering(tmp_path, solved):
    import shutil

    copy = tmp_path / "copy"
    shutil.copytree(solved, copy)
    victim = sorted(copy.glob("solution_*.json"))[0]
    victim.write_text(victim.read_text().replace('"p": ', '"p":  '))
    assert main(["verify", "--suite", "nodal", "--in", str(copy), "--out", str(tmp_path / "o")]) == EXIT_MISSING


def test_verify_is_deterministic(tmp_path, solved):
    runs = []
    for k in range(2):
        out = tmp_path / f"v{k}"
        code = main(["verify", "--suite", "all", "--in", str(solved), "--out", str(out), "--p-local", "15"])
        # a short coarse path cannot pass the large-p suites
        assert code == EXIT_FAILED
        runs.append({f.name: f.read_bytes() for f in out.iterdir() if f.name != "manifest.json"})
    assert runs[0] == runs[1]
    assert "summary.txt" in runs[0]


def test_config_file(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# green run\ndomain = disk\nfind_critical = true\n")
    assert read_config(cfg) == ["--domain", "disk", "--find-critical"]
    assert main(["green", "--config", str(cfg)]) == EXIT_OK
    assert "critical" in json.loads(capsys.readouterr().out)


def test_missing_config(tmp_path):
    assert main(["green", "--config", str(tmp_path / "nope.cfg")]) == EXIT_MISSING


def test_thread_cap(monkeypatch, tmp_path):
    monkeypatch.setenv("LEL_THREADS", "zero")
    assert main(["green", "--find-critical"]) == EXIT_USAGE
