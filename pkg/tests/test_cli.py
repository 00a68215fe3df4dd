import json

import pytest
from click.testing import CliRunner

from dpnoise.cli import RunConfig, main
from dpnoise.distributions import NoiseDistribution, point_mass
from dpnoise.partition import PrivacyBudget, uniform_partition


@pytest.fixture
def run():
    runner = CliRunner()

    def go(*args):
        return runner.invoke(main, [str(a) for a in args], catch_exceptions=False)
    return go


def test_fixed_grid_bounds_write_every_artifact(run, tmp_path):
    res = run("bounds", "--eps", 1, "--delta", 0.2, "--L", 8, "--k", 2, "--out-dir", tmp_path)
    assert res.exit_code == 0, res.output
    assert res.output.startswith("UB=")
    for name in ("upper.json", "lower.json", "bounds.csv", "certificate.csv", "density.csv"):
        assert (tmp_path / name).stat().st_size > 0
    dens = (tmp_path / "density.csv").read_text().splitlines()
    assert dens[0] == "left,right,midpoint,height,probability" and len(dens) == 1 + 17


def test_exported_upper_distribution_passes_audit(run, tmp_path):
    run("bounds", "--eps", 1, "--delta", 0.2, "--L", 8, "--k", 2, "--out-dir", tmp_path)
    res = run("audit", tmp_path / "upper.json")
    assert res.exit_code == 0 and res.output.strip().endswith("feasible")


def test_same_invocation_writes_identical_files(run, tmp_path):
    for d in ("a", "b"):
        run("bounds", "--eps", 0.5, "--delta", 0.1, "--L", 6, "--k", 1, "--out-dir", tmp_path / d)
    assert (tmp_path / "a/upper.json").read_bytes() == (tmp_path / "b/upper.json").read_bytes()


def test_point_mass_fails_audit(run, tmp_path):
    f = tmp_path / "pm.json"
    f.write_text(point_mass(uniform_partition(2, 1), 2, PrivacyBudget(1, 0.1)).to_json())
    res = run("audit", f)
    assert res.exit_code == 1
    assert "shortfall=0.9" in res.output


@pytest.mark.parametrize("args", [
    ("bounds", "--eps", 1, "--delta", 1.5, "--L", 4),
    ("bounds", "--eps", 1, "--delta", 0.2),
    ("bounds", "--eps", 1, "--delta", 0.2, "--L", 4, "--loss", "l7"),
    ("compare", "--grid", "1-0.2"),
])
def test_bad_usage_exits_two(run, args):
    assert run(*args).exit_code == 2


def test_malformed_json_reports_location(run, tmp_path):
    f = tmp_path / "broken.json"
    f.write_text('{"beta": "1",\n "breakpoints": [0, 1,]}')
    res = run("audit", f)
    assert res.exit_code == 2 and "line 2" in res.output


def test_too_narrow_grid_is_a_domain_failure(run, tmp_path):
    res = run("bounds", "--eps", 1, "--delta", 0.05, "--L", 1, "--out-dir", tmp_path)
    assert res.exit_code == 1


def test_sample_emits_one_line_per_draw(run, tmp_path):
    f = tmp_path / "u.json"
    part = uniform_partition(3, 1)
    f.write_text(NoiseDistribution(part, [1 / 7] * 7, PrivacyBudget(1, 0.3)).to_json())
    res = run("sample", f, "-n", 25, "--seed", 4)
    lines = res.output.splitlines()
    assert res.exit_code == 0 and len(lines) == 25
    assert all(-3 <= float(x) < 4 for x in lines)
    assert run("sample", f, "-n", 25, "--seed", 4).output == res.output
    assert run("sample", f, "-n", 0).output == ""


def test_empty_compare_grid_prints_only_the_header(run):
    res = run("compare")
    assert res.exit_code == 0
    assert res.output.splitlines() == [
        "epsilon,delta,delta_f,loss,UB,LB,O,B_UB,B_UB_name,B_LB,gap,ub_gap,lb_gap"]


def test_run_config_round_trips_through_flags():
    cfg = RunConfig(epsilon=1.0, delta=0.2, delta_f="70/194", loss="pinball:0.9", L=12, k=3,
                    target_gap=0.02, time_limit=30.0, out_dir="x", jobs=2)
    assert RunConfig.from_argv(cfg.to_argv()) == cfg


def test_dependent_bounds_command(run, tmp_path):
    res = run("bounds-dep", "--eps", 1, "--delta", 0.2, "--phi-lo", 0, "--phi-hi", 2,
              "--L", 3, "--out-dir", tmp_path)
    assert res.exit_code == 0, res.output
    fam = json.loads((tmp_path / "upper_family.json").read_text())
    assert len(fam["weights"]) == 2


def test_learner_commands_emit_error_tables(run, tmp_path):
    res = run("nb", "--synthetic", 300, "--noise", "none", "--noise", "laplace",
              "--splits", 2, "--reps", 3)
    assert res.exit_code == 0
    assert res.output.splitlines()[0].startswith("mechanism,")
    assert len(res.output.splitlines()) == 3
    out = tmp_path / "pcd.csv"
    res = run("pcd", "--synthetic", 200, "--noise", "laplace", "--splits", 1, "--reps", 2,
              "--T", 5, "--out", out)
    assert res.exit_code == 0 and out.read_text().count("\n") == 2


def test_learner_needs_data(run):
    assert run("nb", "--noise", "none").exit_code == 2
    assert run("nb", "--synthetic", 50, "--noise", "cauchy").exit_code == 2
