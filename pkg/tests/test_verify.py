import json
import math

import pytest

from esdl import cli, verify
from esdl.evalcore import FamilyParams
from esdl.verify import (
    CHECK_IDS,
    ConfigError,
    RunConfig,
    UnknownCheck,
    exit_status,
    hair_window,
    parse_config,
    run_all,
    run_check,
    skip_reason,
)


def _write(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return path


# -- configuration -----------------------------------------------------------------

def test_parse_minimal(tmp_path):
    cfg = parse_config(_write(tmp_path, "p = 4\nlambda = 0.25\n"))
    assert cfg.params == FamilyParams(4, 0.25)
    assert cfg.budget == 24 and cfg.resolution == (512, 512)


def test_parse_comments_and_all_keys(tmp_path):
    text = """# a comment
p = 6   # trailing comment
lambda = 2
nu = 1.5
q = 10
escape_radius = 2
budget = 12
viewport = -5, 5, -2, 2
resolution = 64x32
t_max = 30
out = reports
cache = cachedir
threads = 2
"""
    cfg = parse_config(_write(tmp_path, text))
    assert cfg == RunConfig(p=6, lam=2.0, nu=1.5, q=10.0, R=2.0, budget=12, viewport=(-5.0, 5.0, -2.0, 2.0),
                            resolution=(64, 32), t_max=30.0, out_dir="reports", cache_dir="cachedir", threads=2)


def test_flags_win(tmp_path):
    cfg = parse_config(_write(tmp_path, "p = 4\nlambda = 0.25\n"), {"lambda": 1.0, "budget": None, "escape-radius": 8})
    assert cfg.lam == 1.0 and cfg.budget == 24 and cfg.R == 8.0


def test_small_p_rejected(tmp_path):
    with pytest.raises(ConfigError, match="p ≥ 3"):
        parse_config(_write(tmp_path, "p = 2\n"))


def test_zero_lambda_rejected(tmp_path):
    with pytest.raises(ConfigError, match="nonzero"):
        parse_config(_write(tmp_path, "lambda = 0\n"))


def test_unknown_key_reports_line(tmp_path):
    with pytest.raises(ConfigError, match="line 3: unknown key 'colour'"):
        parse_config(_write(tmp_path, "p = 4\n\ncolour = red\n"))


def test_malformed_line_reports_line(tmp_path):
    with pytest.raises(ConfigError, match="line 2"):
        parse_config(_write(tmp_path, "p = 4\njust words\n"))
    with pytest.raises(ConfigError, match="line 1: bad value"):
        parse_config(_write(tmp_path, "budget = many\n"))


@pytest.mark.parametrize("kw", [dict(budget=2), dict(q=0.5), dict(nu=-1.0), dict(viewport=(1, 0, 0, 1)),
                                dict(resolution=(8, 8)), dict(t_max=0.0), dict(R=0.0), dict(threads=0)])
def test_constraints(kw):
    with pytest.raises(ConfigError):
        RunConfig(**kw)


def test_unknown_flag():
    with pytest.raises(ConfigError):
        parse_config(None, {"colour": "red"})


# -- dispatch ------------------------------------------------------------------------

def test_skip_rules():
    unit, quarter, odd = RunConfig(), RunConfig(lam=0.25), RunConfig(p=5)
    assert skip_reason(unit, "THM2-GROWTH") is None
    assert "lambda" in skip_reason(unit, "PROP-BASIN")
    assert skip_reason(quarter, "PROP-BASIN") is None
    assert skip_reason(quarter, "THM2-GROWTH") == "lambda < 1"
    assert skip_reason(odd, "THM2-GROWTH") == "p odd"
    assert skip_reason(odd, "SYM-EVEN") == "p odd"
    assert skip_reason(odd, "SR-MAP") == "p odd"
    for cid in ("SYM-OMEGA", "SERIES", "CVS-ZEROS", "CVS-REAL", "CVS-INTERLACE"):
        for cfg in (unit, quarter, odd):
            assert skip_reason(cfg, cid) is None


@pytest.fixture
def quick_checks(monkeypatch):
    """Replace every check with a constant so dispatch can be tested quickly."""
    table = {cid: (lambda cfg, cid=cid: (cid != "SERIES", {"x": 1.0}, {"x": "== 1"}, "stub")) for cid in CHECK_IDS}
    monkeypatch.setattr(verify, "CHECKS", table)


def test_run_all_statuses(tmp_path, quick_checks):
    reps = run_all(RunConfig(p=5, out_dir=str(tmp_path)))
    status = {r.check_id: r.status for r in reps}
    assert [r.check_id for r in reps] == list(CHECK_IDS)
    assert status["THM2-GROWTH"] == status["SYM-EVEN"] == "SKIPPED"
    assert status["SERIES"] == "FAIL"
    assert exit_status(reps) == 1
    assert sorted(p.name for p in tmp_path.iterdir()) == sorted(f"{c}.json" for c in CHECK_IDS)


def test_parallel_matches_sequential(tmp_path, quick_checks):
    a = run_all(RunConfig(out_dir=str(tmp_path / "a")))
    b = run_all(RunConfig(out_dir=str(tmp_path / "b")), parallel=True)
    assert [(r.check_id, r.status, r.metrics) for r in a] == [(r.check_id, r.status, r.metrics) for r in b]


def test_exit_status_ignores_skips():
    R = verify.VerificationReport
    P = FamilyParams(4, 1.0)
    assert exit_status([R("A", P, "PASS"), R("B", P, "SKIPPED")]) == 0
    assert exit_status([R("A", P, "PASS"), R("B", P, "FAIL")]) == 1


def test_unknown_check(tmp_path):
    with pytest.raises(UnknownCheck):
        run_check(RunConfig(out_dir=str(tmp_path)), "NOPE")


# -- individual checks -----------------------------------------------------------------

def test_prop_basin_report(tmp_path):
    rep = run_check(RunConfig(out_dir=str(tmp_path)), "PROP-BASIN")
    assert rep.status == "PASS"
    assert rep.params == FamilyParams(4, 0.25)
    assert rep.metrics["x_star"] == pytest.approx(1.050846496251640, abs=1e-11)
    assert rep.metrics["multiplier"] == pytest.approx(0.193685316526, rel=1e-9)
    assert rep.metrics["residual"] <= 1e-10
    flat = json.loads((tmp_path / "PROP-BASIN.json").read_text())
    assert flat["status"] == "PASS" and flat["metric.x_star"] == rep.metrics["x_star"]
    assert all(not isinstance(v, (dict, list)) for v in flat.values())


def test_gmin_report(tmp_path):
    rep = run_check(RunConfig(out_dir=str(tmp_path)), "THM2-GMIN")
    assert rep.status == "PASS"
    assert rep.metrics["g_min_p4"] == pytest.approx(3.171218973340590, rel=1e-13)
    assert rep.metrics["g_min_min"] > 1 and rep.metrics["worst_p"] == 20


def test_growth_fails_outside_hypothesis(tmp_path):
    rep = run_check(RunConfig(lam=0.25, out_dir=str(tmp_path)), "THM2-GROWTH")
    assert rep.status == "FAIL"
    assert rep.metrics["min_margin"] < 0
    assert "hypothesis violated" in rep.notes
    assert run_check(RunConfig(out_dir=str(tmp_path)), "THM2-GROWTH").status == "PASS"


@pytest.mark.parametrize("cid", ["SYM-OMEGA", "SYM-EVEN", "SERIES", "CVS-REAL", "PSING-REAL"])
def test_cheap_checks_pass_and_repeat(tmp_path, cid):
    cfg = RunConfig(p=6, out_dir=str(tmp_path))
    a, b = run_check(cfg, cid), run_check(cfg, cid)
    assert a.status == "PASS"
    assert a.metrics == b.metrics


def test_interlace_warm_cache_matches_cold(tmp_path, monkeypatch):
    monkeypatch.delenv("ESDL_CACHE_DIR", raising=False)
    cfg = RunConfig(out_dir=str(tmp_path / "out"), cache_dir=str(tmp_path / "cache"))
    cold = run_check(cfg, "CVS-INTERLACE")
    assert any((tmp_path / "cache").iterdir())
    warm = run_check(cfg, "CVS-INTERLACE")
    assert cold.status == warm.status == "PASS"
    assert cold.metrics == warm.metrics


def test_hair_window_clears_central_strip():
    x_lo, x_hi = hair_window(4, 3.4309, 1)
    assert x_lo == 20.0 and x_hi == 60.0
    # for p=6 the strip Q_0 leaves R(1) beyond x = 20
    assert hair_window(6, verify.min_strip_half_width(6), 1)[0] > 20


def test_sr_map_violations_below_threshold():
    # r0 = 1 is too small for p=4 while 3 passes
    P = FamilyParams(4, 1.0)
    assert verify.sr_map_violations(P, 1.0, 1.0) > 0
    assert verify.sr_map_violations(P, 1.0, 3.0) == 0


# -- command line -------------------------------------------------------------------

def test_cli_render_deterministic_across_threads(tmp_path):
    args = ["render", "--resolution", "64", "--viewport", "4", "--budget", "12"]
    assert cli.main(args + ["--out", str(tmp_path / "a"), "--threads", "1"]) == 0
    assert cli.main(args + ["--out", str(tmp_path / "b"), "--threads", "3"]) == 0
    a, b = (tmp_path / "a" / "render.pgm").read_bytes(), (tmp_path / "b" / "render.pgm").read_bytes()
    assert a == b and a.startswith(b"P5\n64 64\n255\n")
    assert (tmp_path / "a" / "classification.esdl").read_bytes()[:4] == b"ESDL"


def test_cli_fixed_points(tmp_path, capsys):
    assert cli.main(["fixed-points", "--lambda", "0.25", "--out", str(tmp_path)]) == 0
    assert "ATTRACTING" in capsys.readouterr().out
    rows = (tmp_path / "fixed_points.csv").read_text().splitlines()
    assert rows[0] == "x_star,multiplier,kind" and len(rows) == 2


def test_cli_orbit_and_regions(tmp_path, capsys):
    assert cli.main(["orbit", "--z", "10", "--escape-radius", "10", "--out", str(tmp_path)]) == 0
    assert "FAST_ESCAPING" in capsys.readouterr().out
    assert cli.main(["regions", "--nu", "1", "--viewport", "2", "--resolution", "32", "--z", "1e6", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "1e6: SECTOR(0)" in out
    assert (tmp_path / "regions.ppm").read_bytes().startswith(b"P6\n32 32\n255\n")


def test_cli_singular(tmp_path, monkeypatch):
    monkeypatch.setenv("ESDL_CACHE_DIR", str(tmp_path / "cache"))
    assert cli.main(["singular", "--t-max", "20", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "singular.csv").exists() and (tmp_path / "postsingular.csv").exists()
    assert any((tmp_path / "cache").iterdir())


def test_cli_verify_exit_codes(tmp_path, capsys):
    assert cli.main(["verify", "--check", "PROP-BASIN", "--out", str(tmp_path)]) == 0
    assert cli.main(["verify", "--check", "THM2-GROWTH", "--lambda", "0.25", "--out", str(tmp_path)]) == 1
    assert cli.main(["verify", "--check", "BOGUS", "--out", str(tmp_path)]) == 2
    assert cli.main(["verify", "--p", "2", "--out", str(tmp_path)]) == 2
    err = capsys.readouterr().err
    assert "unknown check" in err and "p ≥ 3" in err


def test_cli_config_file(tmp_path, capsys):
    cfg = _write(tmp_path, "lambda = 0.25\nout = " + str(tmp_path / "o") + "\n")
    assert cli.main(["fixed-points", "--config", str(cfg), "--b", str(math.pi / 2)]) == 0
    assert (tmp_path / "o" / "fixed_points.csv").exists()
