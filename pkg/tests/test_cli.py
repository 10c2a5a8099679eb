import csv
import json
import re
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from chiralrouter.cli import KINDS, REQUIRED, SCHEMA, ConfigError, load_config, main, resolve, schema_markdown

ROOT = Path(__file__).resolve().parents[1]
SCENARIOS = sorted((ROOT / "scenarios").glob("*.toml"))


def _write(tmp_path, text, name="cfg.toml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def _rows(path):
    return list(csv.reader(open(path)))


def _run(args, capsys):
    code = main(args)
    out = capsys.readouterr()
    return code, out.out, out.err


# --- schema ------------------------------------------------------------------

def test_nine_kinds_listed(capsys):
    code, out, _ = _run(["list"], capsys)
    assert code == 0
    listed = [line.split()[0] for line in out.splitlines()]
    assert listed == list(KINDS) and len(listed) == 9


def test_list_unknown_kind_names_valid_kinds(capsys):
    code, _, err = _run(["list", "bogus"], capsys)
    assert code == 2
    assert all(k in err for k in KINDS)


def test_list_one_kind_shows_keys(capsys):
    code, out, _ = _run(["list", "full_router"], capsys)
    assert code == 0 and "pulses.peak_2piMHz" in out and "aux.active" in out


def test_schema_doc_is_current():
    assert (ROOT / "docs" / "schema.md").read_text() == schema_markdown()


def test_required_keys_match_schema_doc():
    doc = (ROOT / "docs" / "schema.md").read_text()
    sections = re.split(r"^## ", doc, flags=re.M)[1:]
    for sec in sections:
        kind = sec.splitlines()[0].strip()
        required = set(re.findall(r"^\| `([^`]+)` \| [^|]+ \| required \|", sec, flags=re.M))
        assert required == {k.name for k in SCHEMA[kind] if k.default is REQUIRED}


def test_physical_keys_carry_units():
    unitless = {"kind", "title", "output.csv_path", "output.trajectories"}
    suffixes = ("_um", "_gauss", "_us", "_2piMHz", "_per_us", "_K", "_pi", "_over_J", "_over_V")
    for kind, keys in SCHEMA.items():
        for k in keys:
            if k.kind in ("float", "list[float]") and k.name not in unitless:
                assert k.name.endswith(suffixes) or k.name.startswith(("solver.", "time.", "triangle.mu")), k.name


def test_unknown_key_is_named(tmp_path, capsys):
    p = _write(tmp_path, 'kind = "full_model"\n[geometry]\na_nm = 17.0\nb_um = 9\nc_um = 10\n[field]\nB_gauss = 20\n')
    code, _, err = _run(["validate", str(p)], capsys)
    assert code == 2 and "geometry.a_nm" in err
    with pytest.raises(ConfigError) as exc:
        load_config(p)
    assert exc.value.key == "geometry.a_nm"


def test_missing_required_key_is_named():
    with pytest.raises(ConfigError, match="geometry.b_um"):
        resolve({"kind": "full_model", "geometry": {"c_um": 10.0}, "field": {"B_gauss": 1.0}})


@pytest.mark.parametrize("raw,key", [
    ({"kind": "spectrum", "chain": {"N": "ten"}}, "chain.N"),
    ({"kind": "spectrum", "chain": {"N": 5, "models": ["ring"]}}, "chain.models"),
    ({"kind": "triangle", "triangle": {"initial_site": 4}}, "triangle.initial_site"),
    ({"kind": "blockade", "control": {"alpha": [1, 2, 3]}}, "control.alpha"),
    ({"kind": "nothing"}, "kind"),
    ({}, "kind"),
    ({"kind": "full_router", "geometry": {"b_um": 9, "c_um": 10}, "field": {"B_gauss": 1},
      "pulses": {"t_m_us": 1, "T_us": 1, "peak_2piMHz": 1},
      "decay": {"temperature_K": 0, "gamma_tot_per_us": 0.1}}, "decay.gamma_tot_per_us"),
])
def test_bad_values_are_named(raw, key):
    with pytest.raises(ConfigError) as exc:
        resolve(raw)
    assert exc.value.key == key


def test_malformed_toml(tmp_path, capsys):
    p = _write(tmp_path, "kind = \n")
    code, _, err = _run(["validate", str(p)], capsys)
    assert code == 2 and "error" in err


def test_missing_file(capsys):
    code, _, _ = _run(["run", "/nonexistent/x.toml"], capsys)
    assert code == 2


def test_seed_range(tmp_path, capsys):
    p = _write(tmp_path, 'kind = "spectrum"\n[chain]\nN = 3\n')
    code, _, err = _run(["run", str(p), "--seed", str(2**64), "--output-dir", str(tmp_path)], capsys)
    assert code == 2 and "--seed" in err


def test_physics_errors_exit_3(tmp_path, capsys):
    p = _write(tmp_path, 'kind = "full_model"\n[geometry]\nb_um = 5\nc_um = 10\n[field]\nB_gauss = 20\n')
    code, _, err = _run(["run", str(p), "--output-dir", str(tmp_path), "--quiet"], capsys)
    assert code == 3 and "physics" in err and "b and c must exceed a/2" in err


def test_zero_detuning_guess_named(tmp_path, capsys):
    p = _write(tmp_path, 'kind = "effective_solve"\n[solver]\ninitial_detuning_2piMHz = 0.0\n')
    code, _, err = _run(["run", str(p), "--output-dir", str(tmp_path)], capsys)
    assert code == 2 and "solver.initial_detuning_2piMHz" in err


# --- shipped scenarios -------------------------------------------------------

def test_every_figure_has_a_scenario():
    names = [p.stem for p in SCENARIOS]
    for k in range(1, 9):
        assert any(n.startswith(f"fig{k}") for n in names), k


@pytest.mark.parametrize("path", SCENARIOS, ids=lambda p: p.stem)
def test_shipped_scenarios_validate(path, capsys):
    code, out, _ = _run(["validate", str(path)], capsys)
    assert code == 0 and "valid" in out


# --- runs --------------------------------------------------------------------

def test_triangle_scenario_visit_order(tmp_path, capsys):
    code, _, _ = _run(["run", str(ROOT / "scenarios" / "fig1_triangle.toml"), "--output-dir", str(tmp_path),
                       "--quiet"], capsys)
    assert code == 0
    rows = _rows(tmp_path / "fig1_triangle.csv")
    head = rows[0]
    data = np.array(rows[1:], dtype=float)
    t, p2, p3 = data[:, 0], data[:, head.index("site_2_pop")], data[:, head.index("site_3_pop")]
    assert t[np.argmax(p2)] < t[np.argmax(p3)]
    assert p2.max() > 0.999
    man = json.loads((tmp_path / "fig1_triangle.manifest.json").read_text())
    assert man["kind"] == "triangle" and man["parameters"]["triangle.gamma_tot_pi"] == -0.5
    assert man["results"]["circulation_metric"] > 0.99
    assert set(man["versions"]) >= {"chiralrouter", "numpy", "scipy", "python"}


def test_chain_transfer_scenario(tmp_path, capsys):
    code, _, _ = _run(["run", str(ROOT / "scenarios" / "fig2_chain_transfer.toml"), "--output-dir",
                       str(tmp_path), "--quiet"], capsys)
    assert code == 0
    rows = _rows(tmp_path / "fig2_chain_transfer.csv")
    assert float(rows[-1][rows[0].index("site_r_pop")]) >= 0.95
    man = json.loads((tmp_path / "fig2_chain_transfer.manifest.json").read_text())
    assert man["results"]["P_T"] >= 0.95 and man["results"]["scanned"]


def test_runs_are_byte_identical(tmp_path, capsys):
    cfg = _write(tmp_path, 'kind = "chain_transfer"\n[chain]\nN = 7\n[pulses]\nt_m_us = 11.51\nT_us = 19.71\n'
                           '[time]\nsamples = 50\n')
    for d in ("a", "b"):
        assert _run(["run", str(cfg), "--output-dir", str(tmp_path / d), "--quiet"], capsys)[0] == 0
    for name in ("cfg.csv", "cfg.manifest.json"):
        a = (tmp_path / "a" / name).read_bytes()
        b = (tmp_path / "b" / name).read_bytes()
        if name.endswith(".json"):
            a, b = (json.loads(x) for x in (a, b))
            a.pop("outputs"), b.pop("outputs")
        assert a == b


def test_seeded_optimizer_restarts_are_reproducible(tmp_path, capsys):
    cfg = _write(tmp_path, 'kind = "optimize"\n[optimize]\nmax_evaluations = 6\nrestarts = 1\n')
    outs = []
    for d, seed in (("a", "7"), ("b", "7"), ("c", "8")):
        assert _run(["run", str(cfg), "--seed", seed, "--output-dir", str(tmp_path / d), "--quiet"], capsys)[0] == 0
        outs.append((tmp_path / d / "cfg.csv").read_bytes())
    assert outs[0] == outs[1]
    assert outs[0] != outs[2]


def test_spectrum_run_and_output_path(tmp_path, capsys):
    cfg = _write(tmp_path, 'kind = "spectrum"\n[chain]\nN = 3\n[output]\ncsv_path = "sub/spec.csv"\n')
    assert _run(["run", str(cfg), "--output-dir", str(tmp_path), "--quiet"], capsys)[0] == 0
    rows = _rows(tmp_path / "sub" / "spec.csv")
    assert rows[0] == ["n", "E_nearest_neighbor_over_J", "E_dipolar_r3_over_J"]
    assert float(rows[2][1]) == pytest.approx(0.0, abs=1e-12) and float(rows[2][2]) == pytest.approx(-0.25)
    assert (tmp_path / "sub" / "spec.manifest.json").exists()


def test_blockade_run(tmp_path, capsys):
    cfg = _write(tmp_path, 'kind = "blockade"\n[control]\nalpha = 0.6\nbeta = [0.0, 0.8]\n'
                           '[blockade]\nmode = "finite_blockade"\nV_2piMHz = 10.0\n')
    assert _run(["run", str(cfg), "--output-dir", str(tmp_path), "--quiet"], capsys)[0] == 0
    man = json.loads((tmp_path / "cfg.manifest.json").read_text())
    assert man["results"]["ideal_max_error"] < 1e-12
    leak = [man["results"]["leakage"][k] for k in ("0.2", "0.1", "0.05")]
    assert leak[0] > leak[1] > leak[2]


def test_console_entry_point(tmp_path):
    cfg = _write(tmp_path, 'kind = "spectrum"\n[chain]\nN = 5\n')
    proc = subprocess.run([sys.executable, "-m", "chiralrouter", "run", str(cfg), "--output-dir", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "wrote" in proc.stdout
    proc = subprocess.run([sys.executable, "-m", "chiralrouter", "run", str(cfg), "--quiet",
                           "--output-dir", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout == ""
