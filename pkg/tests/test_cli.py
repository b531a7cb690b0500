"""Tests for the command-line interface and its config files."""

import importlib
import json
from fractions import Fraction as F

import pytest

import nilcyc.cli as cli
from nilcyc.cli import (
    EXIT_INCONCLUSIVE,
    EXIT_OK,
    EXIT_PARSE,
    EXIT_PRECONDITION,
    RunConfig,
    SystemFileError,
    main,
    parse_schedule_file,
    parse_system_file,
)
from nilcyc.exactalg import PolyParseError
from nilcyc.sysmodel import SwitchingSystem, Z2CubicParams


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


# -- system file parsing -----------------------------------------------------

def test_parse_z2cubic_single_line(tmp_path):
    path = write(tmp_path, "sys.toml", '[z2cubic] a21="-1" a03="-1"\n')
    loaded = parse_system_file(path)
    assert loaded == Z2CubicParams(a21=F(-1), a03=F(-1))


def test_parse_rational_exact(tmp_path):
    path = write(tmp_path, "sys.toml", '[z2cubic]\nb21 = "3/10"\n')
    loaded = parse_system_file(path)
    assert loaded.b21 == F(3, 10)
    assert isinstance(loaded.b21, F)


def test_parse_error_position(tmp_path):
    path = write(tmp_path, "sys.toml", '[upper]\nP = "x^^2"\nQ = "x"\n')
    with pytest.raises(PolyParseError) as err:
        parse_system_file(path)
    assert err.value.line == 2
    assert err.value.column == 8


def test_unknown_parameter_name(tmp_path):
    path = write(tmp_path, "sys.toml", '[z2cubic]\nc77 = "1"\n')
    with pytest.raises(SystemFileError, match="unknown parameter"):
        parse_system_file(path)


def test_malformed_rational(tmp_path):
    path = write(tmp_path, "sys.toml", '[z2cubic]\nb21 = "3/0"\n')
    with pytest.raises(SystemFileError, match="malformed rational"):
        parse_system_file(path)


def test_raw_half_fields_round_trip(tmp_path):
    from nilcyc.exactalg import format_poly, parse_poly

    text = ('[upper]\nP = "-y + 2x*y"\nQ = "x - 1/2y^2"\n'
            '[lower]\nP = "-y"\nQ = "x + y^3"\n')
    path = write(tmp_path, "sys.toml", text)
    loaded = parse_system_file(path)
    assert isinstance(loaded, SwitchingSystem)
    for poly in (loaded.upper.P, loaded.upper.Q,
                 loaded.lower.P, loaded.lower.Q):
        again = parse_poly(format_poly(poly))
        assert again.terms == poly.terms


def test_params_section_builds_perturbed_system(tmp_path):
    text = ('[z2cubic] a21="-1" a03="-1"\n'
            '[params] eps="1/10" delta1="1/10" b="1/100"\n')
    path = write(tmp_path, "sys.toml", text)
    loaded = parse_system_file(path)
    assert isinstance(loaded, SwitchingSystem)
    assert not loaded.is_smooth()


def test_params_requires_eps(tmp_path):
    text = '[z2cubic] a21="-1"\n[params] delta1="1/10"\n'
    path = write(tmp_path, "sys.toml", text)
    with pytest.raises(ValueError, match="eps"):
        parse_system_file(path)


def test_mixed_sections_rejected(tmp_path):
    text = '[z2cubic] a21="-1"\n[upper]\nP = "x"\nQ = "y"\n'
    path = write(tmp_path, "sys.toml", text)
    with pytest.raises(ValueError, match="mix"):
        parse_system_file(path)


def test_half_section_missing_component(tmp_path):
    text = '[upper]\nP = "x"\n[lower]\nP = "x"\nQ = "y"\n'
    path = write(tmp_path, "sys.toml", text)
    with pytest.raises(ValueError, match="missing"):
        parse_system_file(path)


def test_assignment_before_section(tmp_path):
    path = write(tmp_path, "sys.toml", 'a21 = "1"\n')
    with pytest.raises(SystemFileError, match="before any"):
        parse_system_file(path)


def test_unterminated_tokens(tmp_path):
    with pytest.raises(SystemFileError, match="unterminated section"):
        parse_system_file(write(tmp_path, "a.toml", "[z2cubic\n"))
    with pytest.raises(SystemFileError, match="unterminated string"):
        parse_system_file(write(tmp_path, "b.toml", '[z2cubic] a21="1\n'))


def test_comments_and_blank_lines(tmp_path):
    text = '# header\n\n[z2cubic]  # section\na21 = "-1"  # trailing\n'
    path = write(tmp_path, "sys.toml", text)
    assert parse_system_file(path) == Z2CubicParams(a21=F(-1))


def test_schedule_file_preserves_order(tmp_path):
    text = ('[schedule]\ndelta1 = "-1/1000"\nb02 = "1/100"\n'
            'b03 = "-2/5"\n')
    path = write(tmp_path, "sched.toml", text)
    assert parse_schedule_file(path) == [
        ("delta1", F(-1, 1000)), ("b02", F(1, 100)), ("b03", F(-2, 5))]


def test_schedule_file_rejects_other_sections(tmp_path):
    path = write(tmp_path, "sched.toml", '[z2cubic] a21="1"\n')
    with pytest.raises(SystemFileError, match="unknown section"):
        parse_schedule_file(path)


# -- config validation -------------------------------------------------------

def test_runconfig_validation():
    with pytest.raises(ValueError, match="order"):
        RunConfig(command="lyapunov", order=0)
    with pytest.raises(ValueError, match="precision"):
        RunConfig(command="lyapunov", precision=-1)
    with pytest.raises(ValueError, match="distinct"):
        RunConfig(command="lyapunov", eps_samples=(F(1, 10), F(1, 10)))


def test_env_overrides_default_precision(monkeypatch):
    monkeypatch.setenv("NILCYC_PRECISION_BITS", "128")
    try:
        mod = importlib.reload(cli)
        assert mod.DEFAULT_PRECISION == 128
    finally:
        monkeypatch.undo()
        importlib.reload(cli)


# -- command dispatch --------------------------------------------------------

@pytest.fixture()
def fig3b_file(tmp_path):
    return write(tmp_path, "cond2.toml", '[z2cubic] a21="-1" a03="-1"\n')


@pytest.fixture()
def cusp_file(tmp_path):
    return write(tmp_path, "ex41.toml",
                 '[z2cubic]\na21 = "1"\na12 = "3"\na02 = "-3"\n'
                 'a03 = "-3"\nb12 = "-1"\nb03 = "-1"\n')


def test_classify_reports_cusp(cusp_file, capsys):
    code = main(["classify", "--system", cusp_file, "--point", "1,0"])
    assert code == EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert report["lower"]["kind"] == "Cusp"
    assert report["point"] == ["1", "0"]


def test_resultant_demo_golden(capsys):
    code = main(["resultant-demo", "v6"])
    assert code == EXIT_OK
    assert capsys.readouterr().out == "9011459133227925504*b21^8\n"


def test_lyapunov_center_below_tolerance(fig3b_file, capsys):
    code = main(["lyapunov", "--system", fig3b_file, "--order", "5",
                 "--eps", "1/10", "--precision", "160"])
    assert code == EXIT_OK
    report = json.loads(capsys.readouterr().out)
    (entry,) = report["reports"]
    assert entry["eps"] == "1/10"
    for v_text, tol_text in zip(entry["V"], entry["tol"]):
        assert abs(float(v_text)) <= float(tol_text)


def test_lyapunov_json_deterministic(fig3b_file, tmp_path):
    out_a = tmp_path / "a.json"
    out_b = tmp_path / "b.json"
    args = ["lyapunov", "--system", fig3b_file, "--order", "4",
            "--eps", "1/10", "--precision", "160"]
    assert main(args + ["--output", str(out_a)]) == EXIT_OK
    assert main(args + ["--output", str(out_b)]) == EXIT_OK
    assert out_a.read_bytes() == out_b.read_bytes()


def test_center_verify_passes(fig3b_file, capsys):
    code = main(["center-verify", "--system", fig3b_file,
                 "--condition", "II", "--order", "5",
                 "--precision", "160"])
    assert code == EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert report["condition"] == "II"
    assert report["spotcheck"]["passed"] is True


def test_center_verify_membership_failure(cusp_file, capsys):
    code = main(["center-verify", "--system", cusp_file,
                 "--condition", "II", "--order", "4",
                 "--precision", "160"])
    assert code == EXIT_PRECONDITION


def test_unfold_reports_brackets(fig3b_file, tmp_path, capsys):
    sched = write(tmp_path, "sched.toml",
                  '[schedule]\ndelta1 = "-425/1000000000000000000"\n'
                  'b02 = "1/100000000"\nb03 = "-1/1000"\n')
    code = main(["unfold", "--system", fig3b_file, "--schedule", sched,
                 "--order", "4", "--precision", "256",
                 "--expected-count", "2"])
    assert code == EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert report["count"] >= 2
    assert len(report["brackets"]) == report["count"]
    for lo_text, hi_text in report["brackets"]:
        assert F(lo_text) < F(hi_text)


def test_unfold_low_order_inconclusive(fig3b_file, tmp_path, capsys):
    sched = write(tmp_path, "sched.toml",
                  '[schedule]\ndelta1 = "-425/1000000000000000000"\n'
                  'b02 = "1/100000000"\nb03 = "-1/1000"\n')
    code = main(["unfold", "--system", fig3b_file, "--schedule", sched,
                 "--order", "2", "--precision", "192",
                 "--expected-count", "3"])
    assert code == EXIT_INCONCLUSIVE


def test_portrait_writes_svg(fig3b_file, tmp_path):
    seeds = write(tmp_path, "seeds.txt", "1.5,0\n# comment\n1.2 0\n")
    out = tmp_path / "fig.svg"
    code = main(["portrait", "--system", fig3b_file,
                 "--window=-2.5,2.5,-2,2", "--seeds", seeds,
                 "--tol", "1e-8", "--t-end", "30",
                 "--output", str(out)])
    assert code == EXIT_OK
    text = out.read_text()
    assert text.startswith("<svg ")
    assert text.count("<polyline") == 2


def test_exit_code_parse_error(tmp_path, capsys):
    bad = write(tmp_path, "bad.toml", '[upper]\nP = "x^^2"\nQ = "x"\n')
    code = main(["classify", "--system", bad])
    assert code == EXIT_PARSE
    assert "parse error" in capsys.readouterr().err


def test_exit_code_missing_file(capsys):
    code = main(["classify", "--system", "does-not-exist.toml"])
    assert code == EXIT_PRECONDITION


def test_exit_code_point_off_manifold(cusp_file, capsys):
    code = main(["classify", "--system", cusp_file, "--point", "1,1"])
    assert code == EXIT_PRECONDITION


def test_lyapunov_z2cubic_needs_eps(fig3b_file, capsys):
    code = main(["lyapunov", "--system", fig3b_file, "--order", "4"])
    assert code == EXIT_PRECONDITION
    assert "--eps" in capsys.readouterr().err


def test_seed_file_validation(fig3b_file, tmp_path):
    seeds = write(tmp_path, "seeds.txt", "1.5,0,7\n")
    code = main(["portrait", "--system", fig3b_file,
                 "--window=-2,2,-2,2", "--seeds", seeds,
                 "--output", str(tmp_path / "x.svg")])
    assert code == EXIT_PARSE
