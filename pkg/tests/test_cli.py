import json
from pathlib import Path

import pytest

from stochwave.cli import (
    ENERGY_HEADER,
    main,
    parse_config,
    read_csv,
    scenario_from_dict,
    serialize_config,
)
from stochwave.domain import ConfigurationError

BUNDLED = ["fig1", "fig2", "fig3", "fig4", "fig5", "fig6", "fig6_5", "fig7", "fig8"]


def write(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc) if not isinstance(doc, str) else doc)
    return p


def tiny(**kw):
    d = {"id": "t", "f": "sin", "g": "sin", "T": 0.5, "dt": "1/10", "M": 6, "space": "cfd",
         "schemes": ["pade1", "cnm"]}
    d.update(kw)
    return d


def test_fig1_bundled():
    sc = parse_config("fig1")
    cfd = sc[0]
    assert (cfd.f, cfd.g, cfd.dt, cfd.M, cfd.T) == ("zero", "one", 0.05, 10, 100.0)
    assert cfd.scheme_ids() == ["cfd-pade1", "cfd-pade2", "cfd-bem"]
    assert sc[1].space == "dg"
    assert cfd.run_config("pade1").N == 2000


def test_fig5_bundled():
    sc = parse_config("fig5")[0]
    assert (sc.f, sc.g, sc.dt, 1 / sc.M) == ("sin", "sin", 0.1, 1 / 20)
    assert "cnm" in sc.schemes


@pytest.mark.parametrize("name", BUNDLED)
def test_bundled_round_trip(name, tmp_path):
    first = parse_config(name)
    p = write(tmp_path, serialize_config(first))
    assert parse_config(p) == first


def test_missing_dt_named():
    d = tiny()
    del d["dt"]
    with pytest.raises(ConfigurationError, match="'dt'"):
        scenario_from_dict(d)


def test_unknown_key_rejected():
    with pytest.raises(ConfigurationError, match="'colour'"):
        scenario_from_dict(tiny(colour="red"))


@pytest.mark.parametrize("bad", [dict(f="exp"), dict(g="cos"), dict(space="fem"), dict(schemes=["rk4"]),
                                 dict(M=6.5), dict(dt="abc"), dict(boundary="neumann"), dict(dt=0.3),
                                 dict(kind="spectral")])
def test_invalid_fields(bad):
    with pytest.raises(ConfigurationError):
        scenario_from_dict(tiny(**bad))


def test_order_needs_n_list():
    d = tiny(kind="order")
    del d["dt"]
    with pytest.raises(ConfigurationError, match="'N'"):
        scenario_from_dict(d)


def test_json_syntax_error_has_line(tmp_path):
    p = write(tmp_path, '{\n "scenarios": [\n  {"id": 1,}\n ]\n}')
    with pytest.raises(ConfigurationError, match="line 3"):
        parse_config(p)


def test_cli_energy_run(tmp_path, capsys):
    cfg = write(tmp_path, {"scenarios": [tiny()]})
    out = tmp_path / "out"
    assert main(["--config", str(cfg), "--samples", "3", "--seed", "5", "--out", str(out)]) == 0
    csv_path = out / "t_pade1.csv"
    lines = csv_path.read_text().splitlines()
    assert lines[0] == ",".join(ENERGY_HEADER)
    assert len(lines) == 1 + 5
    row = lines[1].split(",")
    assert row[0] == "1" and row[4] == ""  # multiplicative noise: no reference line
    assert (out / "t.svg").exists()
    assert "cfd-cnm" in capsys.readouterr().out


def test_cli_rerun_identical_and_threads(tmp_path):
    cfg = write(tmp_path, {"scenarios": [tiny(g="one", schemes=["pade2"])]})
    outs = []
    for i, threads in enumerate(("1", "2")):
        out = tmp_path / f"o{i}"
        assert main(["--config", str(cfg), "--samples", "70", "--out", str(out), "--threads", threads]) == 0
        outs.append((out / "t_pade2.csv").read_bytes())
    assert outs[0] == outs[1]
    cols = read_csv(tmp_path / "o0" / "t_pade2.csv")
    assert all(v is not None for v in cols["theory_energy"])


def test_cli_scheme_filter_and_replot(tmp_path):
    cfg = write(tmp_path, {"scenarios": [tiny()]})
    out = tmp_path / "out"
    assert main(["--config", str(cfg), "--samples", "2", "--out", str(out), "--scheme", "cfd-cnm"]) == 0
    assert sorted(p.name for p in out.glob("*.csv")) == ["t_cnm.csv"]
    svg = out / "t.svg"
    first = svg.read_bytes()
    svg.unlink()
    assert main(["--config", str(cfg), "--out", str(out), "--replot"]) == 0
    assert svg.read_bytes() == first


def test_cli_order_run(tmp_path):
    d = tiny(kind="order", T=1.0, N=[4, 8], N_ref=32, samples=3)
    del d["dt"]
    cfg = write(tmp_path, {"scenarios": [d]})
    out = tmp_path / "out"
    assert main(["--config", str(cfg), "--out", str(out), "--no-truncation"]) == 0
    cols = read_csv(out / "t_pade1_order.csv")
    assert cols["N"] == [4.0, 8.0] and all(e > 0 for e in cols["rmse"])


def test_exit_codes(tmp_path):
    assert main(["--config", str(tmp_path / "nope.json")]) == 1
    bad = write(tmp_path, {"scenarios": [tiny(f="exp")]})
    assert main(["--config", str(bad)]) == 1
    assert main(["--config", "fig1", "--samples", "0"]) == 1
    failing = write(tmp_path, {"scenarios": [tiny(f="cubic", g="one", dt=0.5, T=5.0, v0=20.0,
                                                   max_iterations=1, schemes=["pade1"])]}, "f.json")
    assert main(["--config", str(failing), "--samples", "4", "--out", str(tmp_path / "x")]) == 2


def test_bundled_files_present():
    from importlib import resources
    names = sorted(Path(str(p)).stem for p in (resources.files("stochwave") / "scenarios").iterdir()
                   if str(p).endswith(".json"))
    assert names == sorted(BUNDLED)
