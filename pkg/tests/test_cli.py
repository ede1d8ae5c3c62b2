import json

import numpy as np
import pytest

from dvkinetic import checkpoint
from dvkinetic.cli import main, parse_grid
from dvkinetic.config import parse_config_text
from dvkinetic.errors import ConfigurationError
from dvkinetic.simulation import initial_state, run

SMALL = """\
[grid]
dim = 1
n = 64

[model]
kind = {kind}
{extra}

[initial]
preset = sine
m = 1.0
amp = 0.5

[time]
t_end = {t_end}
"""


def write(tmp_path, name="gt.ini", kind="constant", extra="", t_end=2.0):
    p = tmp_path / name
    p.write_text(SMALL.format(kind=kind, extra=extra, t_end=t_end))
    return p


def test_simulate_writes_outputs(tmp_path, capsys, monkeypatch):
    monkeypatch.chdir(tmp_path)
    cfg = write(tmp_path)
    assert main(["simulate", str(cfg)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["steps"] == 64
    header = (tmp_path / "gt.csv").read_text().splitlines()[0]
    assert header.split(",") == ["t", "mass", "dist_sq", "H", "D", "E", "bound_value"]
    state, hdr = checkpoint.load(tmp_path / "gt.ckpt")
    assert hdr["step"] == 64 and state.t == pytest.approx(2.0)


def test_identical_runs_identical_csv(tmp_path):
    cfg = write(tmp_path, extra="", kind="carleman")
    main(["simulate", str(cfg), "--csv", str(tmp_path / "a.csv"), "--checkpoint", str(tmp_path / "a.ck")])
    main(["simulate", str(cfg), "--csv", str(tmp_path / "b.csv"), "--checkpoint", str(tmp_path / "b.ck")])
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert (tmp_path / "a.ck").read_bytes() == (tmp_path / "b.ck").read_bytes()


def test_checkpoint_roundtrip_and_restart(tmp_path):
    cfg = parse_config_text(SMALL.format(kind="carleman", extra="", t_end=1.0))
    half = run(cfg)
    data = checkpoint.dumps(half.state, half.model, half.report.steps)
    state, header = checkpoint.loads(data)
    assert state.dev.tobytes() == half.state.dev.tobytes()
    assert state.offset == half.state.offset and state.ticks == half.state.ticks
    assert header["model"] == half.model.descriptor()
    resumed = run(cfg, state=state)
    full = run(parse_config_text(SMALL.format(kind="carleman", extra="", t_end=2.0)))
    assert resumed.state.dev.tobytes() == full.state.dev.tobytes()
    with pytest.raises(ValueError):
        checkpoint.loads(b"garbage")
    with pytest.raises(ValueError):
        checkpoint.loads(data + b"x")
    with pytest.raises(ValueError):
        checkpoint.loads(data.replace(b"DVKCHK 1", b"DVKCHK 9", 1))


def test_restore_flag(tmp_path):
    cfg = write(tmp_path, t_end=1.0)
    ck = tmp_path / "x.ck"
    assert main(["simulate", str(cfg), "--csv", str(tmp_path / "x.csv"), "--checkpoint", str(ck)]) == 0
    assert main(["simulate", str(cfg), "--restore", str(ck), "--csv", str(tmp_path / "y.csv"),
                 "--checkpoint", str(tmp_path / "y.ck")]) == 0
    state, _ = checkpoint.load(tmp_path / "y.ck")
    assert state.t == pytest.approx(2.0)


def test_verify_passes(tmp_path, capsys):
    assert main(["verify", str(write(tmp_path))]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["passed"]
    assert set(report["checks"]) >= {"mass", "max_principle", "entropy_monotone",
                                      "certificate:T1D_type3"}


def test_bound_without_certificate(tmp_path, capsys):
    assert main(["bound", str(write(tmp_path, extra="k0 = 0"))]) == 1
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "no-certificate"
    assert main(["verify", str(write(tmp_path, extra="k0 = 0"))]) == 1


def test_bound_json(tmp_path, capsys):
    assert main(["bound", str(write(tmp_path, kind="carleman")), "--theorem", "all"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert [b["theorem"] for b in out] == ["T1D_type3", "T1D_type1"]
    assert all(b["lambda"] > 0 and b["schema_version"] == 1 for b in out)


def test_bad_config_exit_code(tmp_path, capsys):
    p = tmp_path / "bad.ini"
    p.write_text(SMALL.format(kind="constant", extra="wobble = 1", t_end=2.0))
    assert main(["simulate", str(p)]) == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "configuration" and ":7:" in err["message"]
    assert main(["bound", str(tmp_path / "nope.ini")]) == 2
    assert main(["fit", str(tmp_path / "nope.csv")]) == 2


def test_fit_command(tmp_path, capsys):
    cfg = write(tmp_path, t_end=4.0)
    csv = tmp_path / "r.csv"
    main(["simulate", str(cfg), "--csv", str(csv), "--checkpoint", str(tmp_path / "r.ck")])
    capsys.readouterr()
    assert main(["fit", str(csv), "--window", "1", "4"]) == 0
    fit = json.loads(capsys.readouterr().out)
    assert fit["lambda_emp"] > 0.5 and fit["window"] == [1.0, 4.0]


def test_parse_grid():
    pts = parse_grid(["model.alpha=0,0.5", "n=32,64"])
    assert pts == [{"model.alpha": "0", "n": "32"}, {"model.alpha": "0", "n": "64"},
                   {"model.alpha": "0.5", "n": "32"}, {"model.alpha": "0.5", "n": "64"}]
    with pytest.raises(ConfigurationError):
        parse_grid(["alpha"])


@pytest.mark.parametrize("single", [True, False])
def test_sweep_alpha(tmp_path, capsys, monkeypatch, single):
    if single:
        monkeypatch.setenv("DVK_SINGLE_THREAD", "1")
    cfg = write(tmp_path, kind="power_law", t_end=4.0)
    out = tmp_path / "sweep.csv"
    code = main(["sweep", str(cfg), "--grid", "model.alpha=0,0.5,1", "--workers", "2",
                 "--out", str(out)])
    assert code == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 4
    header = lines[0].split(",")
    rows = [dict(zip(header, ln.split(","))) for ln in lines[1:]]
    assert [r["model.alpha"] for r in rows] == ["0", "0.5", "1"]
    for r in rows:
        assert float(r["lambda_emp"]) >= float(r["lambda"]) > 0
        assert r["passed"] == "True"


def test_state_stats_from_checkpoint(tmp_path):
    cfg = parse_config_text(SMALL.format(kind="constant", extra="", t_end=2.0))
    state, stats = initial_state(cfg)
    back, _ = checkpoint.loads(checkpoint.dumps(state))
    assert np.array_equal(back.species, state.species)
