import json
import os
import xml.etree.ElementTree as ET

import pytest

from duodecay import _accel, io
from duodecay.cli import COMMANDS, main

HERE = os.path.dirname(__file__)
GOLDEN = os.path.join(HERE, "golden")
CONFIGS = os.path.join(GOLDEN, "configs")


def _run(command, out, *extra, config=None):
    argv = [command, "--out", str(out)]
    if config is not None:
        argv += ["--config", str(config)]
    return main(argv + list(extra))


def _write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


def _tree(root):
    out = {}
    for d, _, files in os.walk(root):
        for f in files:
            path = os.path.join(d, f)
            with open(path, "rb") as fh:
                out[os.path.relpath(path, root)] = fh.read()
    return out


@pytest.mark.parametrize("command", COMMANDS)
def test_golden_output(command, tmp_path, capsys):
    cfg = os.path.join(CONFIGS, f"{command}.ini")
    extra = ["--format", "both"]
    if command == "plot":
        extra = ["--input", os.path.join(GOLDEN, "simulate", "observables.csv")]
    assert _run(command, tmp_path / "a", *extra, config=cfg) == 0
    got = _tree(tmp_path / "a")
    assert got == _tree(os.path.join(GOLDEN, command))
    # a rerun into a fresh directory is byte-identical as well
    capsys.readouterr()
    assert _run(command, tmp_path / "b", *extra, config=cfg) == 0
    assert _tree(tmp_path / "b") == got


def test_metadata_and_csv_layout():
    meta = json.load(open(os.path.join(GOLDEN, "simulate", "observables.json")))
    assert set(io.METADATA_KEYS) <= set(meta)
    assert meta["schema_version"] == io.SCHEMA_VERSION
    lines = open(os.path.join(GOLDEN, "simulate", "observables.csv")).read().splitlines()
    assert lines[0].split(",")[0] == "t"
    value = lines[2].split(",")[1]
    assert len(value.replace(".", "").replace("-", "").lstrip("0").split("e")[0]) <= 17


def test_uncoupled_compare_has_zero_residuals(tmp_path, capsys):
    for sector in (1, 2):
        cfg = _write(tmp_path, f"g0_{sector}.ini",
                     f"[model]\nL = 62\ng = 0\ndelta = 0.3\nsector = {sector}\n"
                     "[grid]\nt_max = 4\nn_samples = 9\n[engine]\nengine = dense\nlevels = 2\n")
        assert _run("compare", tmp_path / str(sector), config=cfg) == 0
        res = json.load(open(tmp_path / str(sector) / "compare.json"))["residuals"]
        assert max(res.values()) < 1e-15


def test_bound_states_without_coupling_is_empty(tmp_path, capsys):
    cfg = _write(tmp_path, "c.ini", "[model]\ng = 0\n")
    assert _run("bound-states", tmp_path / "o", config=cfg) == 0
    lines = (tmp_path / "o" / "bound_states.csv").read_text().splitlines()
    assert lines == ["sector,parity,energy,weight,localization_length,residual"]


def test_sweep_runs_have_distinct_hashes():
    meta = json.load(open(os.path.join(GOLDEN, "sweep", "sweep.json")))
    hashes = [r["config_hash"] for r in meta["runs"]]
    assert len(hashes) == 3 == len(set(hashes))
    assert all(r["ok"] for r in meta["runs"])


def test_plot_is_valid_svg():
    root = ET.parse(os.path.join(GOLDEN, "plot", "plot.svg")).getroot()
    paths = [e for e in root.iter() if e.tag.endswith("path")]
    assert len(paths) == 3 and all(len(p.get("d")) > 10 for p in paths)


_CORRUPTIONS = ["propagator_phase", "g", "pair_normalization", "parity_order", "J"]


@pytest.mark.parametrize("field", _CORRUPTIONS)
def test_compare_detects_corrupted_transform_metadata(field, tmp_path, capsys):
    text = open(os.path.join(CONFIGS, "compare.ini")).read() + f"\n[debug]\ncorrupt_metadata = {field}\n"
    cfg = _write(tmp_path, "c.ini", text)
    assert _run("compare", tmp_path / "o", config=cfg) == 1
    err = json.loads(capsys.readouterr().out)
    assert err["error"] == "reconstruction-mismatch"
    assert json.load(open(tmp_path / "o" / "error.json"))["error"] == "reconstruction-mismatch"


@pytest.mark.parametrize(
    "text, code",
    [
        ("[model]\nbogus = 1\n", "invalid-config"),
        ("[nope]\n", "invalid-config"),
        ("[model]\ng = abc\n", "invalid-config"),
        ("[model]\ng = -1\n", "invalid-coupling"),
        ("[grid]\nn_samples = 1\n", "invalid-grid"),
        ("[model]\nsector = 1\n[initial]\nstate = ee\n", "invalid-initial-state"),
    ],
)
def test_invalid_input_exit_code(text, code, tmp_path, capsys):
    cfg = _write(tmp_path, "c.ini", text)
    assert _run("simulate", tmp_path / "o", config=cfg) == 2
    assert json.loads(capsys.readouterr().out)["error"] == code


def test_light_cone_violation_is_rejected(tmp_path, capsys):
    cfg = _write(tmp_path, "c.ini", "[model]\nL = 30\n[grid]\nt_max = 10\n")
    assert _run("compare", tmp_path / "o", config=cfg) == 2
    assert json.loads(capsys.readouterr().out)["error"] == "light-cone"


def test_format_and_engine_flags(tmp_path, capsys):
    cfg = os.path.join(CONFIGS, "simulate.ini")
    assert _run("simulate", tmp_path / "j", "--format", "json", "--engine", "krylov", "--tol", "1e-11",
                config=cfg) == 0
    assert sorted(os.listdir(tmp_path / "j")) == ["observables.json"]
    meta = json.load(open(tmp_path / "j" / "observables.json"))
    assert meta["tolerances"]["krylov_tol"] == 1e-11
    assert "t" in meta["data"]


def test_stale_error_file_is_removed(tmp_path, capsys):
    out = tmp_path / "o"
    assert _run("plot", out) == 2  # no --input
    assert (out / "error.json").exists()
    assert _run("plot", out, "--input", os.path.join(GOLDEN, "simulate", "observables.csv")) == 0
    assert not (out / "error.json").exists()


def test_thread_cap(monkeypatch):
    monkeypatch.setenv("DUODECAY_THREADS", "1")
    assert _accel.thread_cap() == 1
    monkeypatch.setenv("DUODECAY_THREADS", "junk")
    assert _accel.thread_cap() == (os.cpu_count() or 1)
