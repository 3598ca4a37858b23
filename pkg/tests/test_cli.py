import csv
import json
from pathlib import Path

import pytest

from rachsim import analysis
from rachsim.cli import build_parser, main


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.mark.parametrize(
    "sub", ["analyze", "evolve", "simulate", "compare", "pmf", "optimal-density"]
)
def test_help_exits_zero(sub, capsys):
    with pytest.raises(SystemExit) as exc:
        main([sub, "--help"])
    assert exc.value.code == 0
    assert "--" in capsys.readouterr().out


def test_unknown_flag_rejected(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["analyze", "--config", "fig3", "--frobnicate"])
    assert exc.value.code == 1


def test_missing_config_reports_path(tmp_path, capsys):
    code = main(["analyze", "--config", str(tmp_path / "nope.yaml"), "--out", "x.csv"])
    assert code == 1
    assert "nope.yaml" in capsys.readouterr().err


def test_analyze_contract_columns(tmp_path):
    out = tmp_path / "fig3.csv"
    code = main(["analyze", "--config", "fig3", "--out", str(out)])
    assert code == 0
    rows = read_csv(out)
    assert list(rows[0]) == ["sweep_var", "T", "R", "P", "P_det", "C", "lambda_B_star"]
    assert len(rows) == 41
    # detection dominates success along the whole threshold grid
    for row in rows:
        assert float(row["P_det"]) >= float(row["P"])
    assert out.with_suffix(".manifest.json").exists()


def test_analyze_closed_form_flag_adds_column(tmp_path):
    out = tmp_path / "fig3cf.csv"
    main(["analyze", "--config", "fig3", "--lemma3-closed-form", "--out", str(out)])
    rows = read_csv(out)
    assert "P_det_closed_form" in rows[0]


def test_analyze_set_override_changes_results(tmp_path):
    base = tmp_path / "a.csv"
    denser = tmp_path / "b.csv"
    main(["analyze", "--config", "fig3", "--grid", "-10", "--out", str(base)])
    main([
        "analyze", "--config", "fig3", "--grid", "-10",
        "--set", "network.lambda_dp_per_km2=200", "--out", str(denser),
    ])
    p_base = float(read_csv(base)[0]["P"])
    p_denser = float(read_csv(denser)[0]["P"])
    assert p_denser < p_base


def test_print_normalized(tmp_path, capsys):
    out = tmp_path / "n.csv"
    main(["analyze", "--config", "fig3", "--print-normalized", "--out", str(out)])
    dump = capsys.readouterr().out
    payload = json.loads(dump[: dump.rindex("}") + 1])
    assert payload["network"]["gamma_th"] == pytest.approx(0.1)
    assert payload["network"]["lambda_b_per_m2"] == pytest.approx(1e-5)


def test_evolve_contract_columns(tmp_path):
    out = tmp_path / "evolve.csv"
    code = main(["evolve", "--config", "fig7", "--out", str(out)])
    assert code == 0
    rows = read_csv(out)
    assert list(rows[0]) == ["scheme", "m", "mu_new", "mu_cum", "T", "R", "P", "C", "EQ"]
    schemes = {r["scheme"] for r in rows}
    assert schemes == {"acb(0.5)", "backoff(1)", "acb(0.9)", "baseline"}
    assert sum(1 for r in rows if r["scheme"] == "baseline") == 10


def test_pmf_contract(tmp_path):
    out = tmp_path / "pmf.csv"
    assert main(["pmf", "--config", "fig4", "--out", str(out)]) == 0
    rows = read_csv(out)
    assert list(rows[0]) == ["scheme", "slot", "y", "cdf_exact", "cdf_poisson"]
    assert {r["slot"] for r in rows} == {"2", "3"}
    for row in rows:
        assert abs(float(row["cdf_exact"]) - float(row["cdf_poisson"])) < 0.1


def test_simulate_smoke(tmp_path):
    out = tmp_path / "sim.csv"
    code = main([
        "simulate", "--config", "fig4", "--slots", "2", "--realizations", "2",
        "--side-km", "3", "--seed", "5", "--out", str(out),
    ])
    assert code == 0
    rows = read_csv(out)
    assert len(rows) == 2
    assert 0.0 <= float(rows[0]["P_hat"]) <= 1.0


def test_compare_unknown_experiment(capsys):
    assert main(["compare", "--config", "fig99"]) == 1
    assert "fig99" in capsys.readouterr().err


def test_compare_deterministic_across_jobs(tmp_path):
    # same seed, different --jobs: byte-identical CSV bodies
    bodies = {}
    for tag, jobs in (("a", "1"), ("b", "2"), ("c", "2")):
        outdir = tmp_path / tag
        code = main([
            "compare", "--config", "fig4", "--seed", "7", "--jobs", jobs,
            "--realizations", "3", "--side-km", "3", "--out-dir", str(outdir),
        ])
        assert code == 0
        bodies[tag] = {
            name: (outdir / "fig4" / name).read_bytes()
            for name in ("comparison.csv", "cdf.csv")
        }
    assert bodies["a"] == bodies["b"] == bodies["c"]


def test_default_outdir_from_env(tmp_path, monkeypatch):
    monkeypatch.setenv("RACHSIM_OUT", str(tmp_path))
    code = main(["analyze", "--config", "fig3", "--grid", "-10", "--out", "env.csv"])
    assert code == 0
    assert (tmp_path / "env.csv").exists()


def test_numeric_failure_exit_code(monkeypatch, tmp_path):
    def boom(*args, **kwargs):
        raise analysis.NumericError("quadrature failed")

    monkeypatch.setattr(analysis, "preamble_success", boom)
    code = main(["analyze", "--config", "fig3", "--grid", "-10",
                 "--out", str(tmp_path / "x.csv")])
    assert code == 2


def test_parser_rejects_missing_subcommand():
    with pytest.raises(SystemExit) as exc:
        build_parser().parse_args([])
    assert exc.value.code == 1
