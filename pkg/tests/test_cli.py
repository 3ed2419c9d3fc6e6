import csv
import io
import json
import math
import subprocess
import sys
from pathlib import Path

import pytest

from hyperfuse.cli import main

FIXTURES = Path(__file__).parent / "fixtures"


def run(args, capsys):
    code = main(args)
    out, err = capsys.readouterr()
    return code, out, err


def summary_rows(out):
    rows = {}
    for line in out.splitlines()[1:]:
        parts = line.split()
        if len(parts) == 4:
            rows[parts[0]] = parts
    return rows


def test_fuse_two(capsys, tmp_path):
    path = tmp_path / "r.json"
    code, out, _ = run(["fuse", "--scheme", "2", "--n", "2", "--m", "2", "--out", str(path)], capsys)
    assert code == 0
    rows = summary_rows(out)
    assert rows["4"][1:3] == ["0.2500", "S"]
    records = json.loads(path.read_text(encoding="utf-8"))
    assert {"scheme", "n", "m", "t", "class", "pattern", "feedforward", "label", "probability", "fidelity"} <= set(records[0])
    assert math.fsum(r["probability"] for r in records) == pytest.approx(1.0, abs=1e-12)


def test_fuse_three(capsys):
    code, out, _ = run(["fuse", "--scheme", "3", "--n", "2", "--m", "2", "--t", "2"], capsys)
    assert code == 0
    failure = [line for line in out.splitlines() if line.split()[2:3] == ["F"]]
    assert failure and failure[0].split()[1] == "0.0156"


def test_fuse_with_imperfections_and_homodyne(capsys):
    code, out, _ = run(
        ["fuse", "--scheme", "2", "--n", "3", "--m", "3", "--eps", "0.05", "--rdev", "0.01", "--alpha", "2500", "--theta", "0.01"],
        capsys,
    )
    assert code == 0
    assert "homodyne success probability" in out


@pytest.mark.parametrize(
    "args",
    [
        ["fuse", "--scheme", "2", "--n", "2"],
        ["fuse", "--scheme", "4", "--n", "2", "--m", "2"],
        ["fuse", "--scheme", "2", "--n", "1", "--m", "2"],
        ["fuse", "--scheme", "3", "--n", "2", "--m", "2"],
        ["sweep", "--n-range", "1..4"],
        ["homodyne", "--theta", "0.1"],
        ["verify", "--only", "nonsense"],
    ],
)
def test_usage_errors_exit_2(args, capsys):
    with pytest.raises(SystemExit) as exc:
        code = main(args)
        raise SystemExit(code)
    assert exc.value.code == 2
    err = capsys.readouterr().err
    assert err.strip().splitlines()[-1].startswith("hyperfuse: error: usage:")


def test_invariant_failure_exit_1(capsys, monkeypatch):
    import hyperfuse.cli as cli

    orig = cli.run_fusion
    monkeypatch.setattr(cli, "run_fusion", lambda cfg, **kw: orig(cfg, **kw)[:-1])
    code, _, err = run(["fuse", "--scheme", "2", "--n", "2", "--m", "2"], capsys)
    assert code == 1
    assert err.strip().startswith("hyperfuse: error: invariant:")
    assert len(err.strip().splitlines()) == 1


def test_tolerance_env_is_used_by_fuse(capsys, monkeypatch):
    monkeypatch.setenv("HYPERFUSE_TOL", "not-a-number")
    code, _, err = run(["fuse", "--scheme", "2", "--n", "2", "--m", "2"], capsys)
    assert code == 1 and "HYPERFUSE_TOL" in err


def test_sweep_values(capsys, tmp_path):
    path = tmp_path / "s.csv"
    assert main(["sweep", "--quantity", "S", "--out", str(path)]) == 0
    raw = path.read_bytes()
    assert raw.count(b"\r\n") == 82
    rows = list(csv.reader(io.StringIO(raw.decode("utf-8"))))
    assert rows[0] == ["n", "m", "value"]
    assert len(rows) == 82
    assert ["10", "10", "0.0324"] in rows
    code, out, _ = run(["sweep", "--quantity", "F", "--n-range", "2..2", "--m-range", "2..2"], capsys)
    assert out.splitlines()[1] == "2,2,0.0625"


def test_sweep_three_axis(capsys):
    code, out, _ = run(["sweep", "--n-range", "2", "--m-range", "2", "--t-range", "2"], capsys)
    assert out.splitlines() == ["n,m,t,value", "2,2,2,0.140625"]


def test_sweep_is_byte_stable(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    main(["sweep", "--quantity", "PS_PR", "--t-range", "2..4", "--out", str(a)])
    main(["sweep", "--quantity", "PS_PR", "--t-range", "2..4", "--out", str(b)])
    assert a.read_bytes() == b.read_bytes()


def test_sweep_unwritable_path(capsys, tmp_path):
    code, _, err = run(["sweep", "--out", str(tmp_path / "missing" / "x.csv")], capsys)
    assert code == 1
    assert err.startswith("hyperfuse: error: io:") and err.count("\n") == 1


def test_homodyne_cube_and_limit(capsys):
    _, one, _ = run(["homodyne", "--alpha-range", "0..400", "--points", "5", "--theta", "0.3"], capsys)
    _, three, _ = run(["homodyne", "--alpha-range", "0..400", "--points", "5", "--theta", "0.3", "--probes", "3"], capsys)
    r1 = list(csv.reader(io.StringIO(one)))[1:]
    r3 = list(csv.reader(io.StringIO(three)))[1:]
    for a, b in zip(r1, r3):
        assert float(b[1]) == pytest.approx(float(a[1]) ** 3, rel=1e-11)
    assert float(r1[-1][1]) == pytest.approx(1.0)


def test_homodyne_curves_peak_positions(capsys, tmp_path):
    path = tmp_path / "c.csv"
    ks = ",".join(str(k) for k in range(9))
    code = main(["homodyne", "--alpha", "2500", "--theta", "0.01", "--curves", ks, "--samples", "20001", "--curves-out", str(path)])
    assert code == 0
    rows = list(csv.reader(io.StringIO(path.read_text(encoding="utf-8"))))
    header, data = rows[0], [[float(x) for x in r] for r in rows[1:]]
    assert header == ["x"] + [f"k{k}" for k in range(9)]
    xs = [r[0] for r in data]
    step = xs[1] - xs[0]
    for j, k in enumerate(range(9), start=1):
        col = [r[j] for r in data]
        peak = xs[col.index(max(col))]
        assert abs(peak - 2 * 2500 * math.cos(k * 0.01)) <= step


def test_verify_only_appendix(capsys):
    code, out, _ = run(["verify", "--only", "appendix"], capsys)
    assert code == 0
    assert out.splitlines()[0].startswith("PASS 1 appendix")


def test_verify_ignores_tolerance_env(capsys, monkeypatch):
    # A value that makes ``fuse`` fail has no effect on ``verify``.
    monkeypatch.setenv("HYPERFUSE_TOL", "not-a-number")
    code, out, _ = run(["verify", "--only", "probabilities"], capsys)
    assert code == 0 and out.startswith("PASS 2")


def test_verify_corrupted_table_names_class(capsys):
    code, out, _ = run(
        ["verify", "--only", "feedforward", "--table", str(FIXTURES / "corrupted_feedforward.json")], capsys
    )
    assert code == 1
    assert "FAIL 3 feedforward" in out and "class 4" in out


def test_verify_missing_table_file(capsys, tmp_path):
    code, _, err = run(["verify", "--table", str(tmp_path / "none.json")], capsys)
    assert code == 1 and err.startswith("hyperfuse: error: io:")


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "hyperfuse", "sweep", "--n-range", "2", "--m-range", "2"],
        capture_output=True,
        text=True,
        check=True,
    )
    assert proc.stdout.splitlines()[1] == "2,2,0.25"
