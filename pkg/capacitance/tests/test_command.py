import json
from io import StringIO

import pytest
from django.core.management import CommandError, call_command

from capacitance.constants import EXIT_NUMERICAL, EXIT_USAGE, EXIT_VERIFICATION
from capacitance.models import ConvergencePoint, SolverRun
from capacitance.oracle import VerificationCase, VerificationReport


def run(*args):
    out = StringIO()
    call_command("capacitance", *args, stdout=out)
    return out.getvalue()


def test_cube_scenario_writes_artifacts(tmp_path):
    output = run("--scenario", "cube", "--n", "1", "--out", str(tmp_path))
    assert (tmp_path / "cube_quad.csv").exists()
    assert (tmp_path / "cube_quad_n1_charge_map.csv").exists()
    assert (tmp_path / "cube_summary.json").exists()
    assert f"wrote {tmp_path / 'cube_summary.json'}" in output
    summary = json.loads(output[: output.index("wrote")])
    assert summary["reference_4pie0"] == pytest.approx(0.660678)


def test_sweep_option(tmp_path):
    run("--scenario", "parallel-plate", "--n-sweep", "1,2", "--tier", "all", "--out", str(tmp_path))
    for tier in ("point", "double", "quad"):
        assert (tmp_path / f"parallel-plate_{tier}.csv").exists()


@pytest.mark.parametrize("args", [
    ["--scenario", "cube", "--bogus"],
    ["--scenario", "sphere"],
    ["--scenario", "cube", "--tier", "triple"],
    ["--scenario", "cube", "--n", "2", "--n-sweep", "1,2"],
])
def test_argument_errors_use_usage_code(args):
    with pytest.raises(CommandError) as info:
        run(*args)
    assert info.value.returncode == EXIT_USAGE


@pytest.mark.parametrize("args", [
    ["--scenario", "cube", "--n-sweep", "8,4"],
    ["--scenario", "parallel-plate", "--n", "2", "--gap", "0"],
    ["--scenario", "custom"],
])
def test_invalid_configuration_uses_usage_code(args, tmp_path):
    with pytest.raises(CommandError) as info:
        run(*args, "--out", str(tmp_path))
    assert info.value.returncode == EXIT_USAGE


def test_missing_geometry_file(tmp_path):
    with pytest.raises(CommandError) as info:
        run("--scenario", "custom", "--geometry", str(tmp_path / "missing.json"), "--out", str(tmp_path))
    assert info.value.returncode == EXIT_USAGE


def test_memory_cap_uses_numerical_code(tmp_path):
    with pytest.raises(CommandError) as info:
        run("--scenario", "cube", "--n", "48", "--memory-cap-gib", "0.5", "--out", str(tmp_path))
    assert info.value.returncode == EXIT_NUMERICAL
    assert "GiB" in str(info.value)


def test_failed_verification_exits_with_verification_code(tmp_path, monkeypatch):
    failing = VerificationReport(seed=0, rng_algorithm="PCG64", cases=[
        VerificationCase(
            case_id="parallel-0000", relation="parallel-offset", limits=[0.0, 1.0] * 4, y_c=None, z_c=1.0,
            analytic=1.0, oracle=1.1, error_bound=1e-8, passed=False, method="tensor-quadrature",
        ),
    ])
    monkeypatch.setattr("capacitance.experiments.verify_kernels", lambda *args, **kwargs: failing)
    with pytest.raises(CommandError) as info:
        run("--scenario", "verify", "--out", str(tmp_path))
    assert info.value.returncode == EXIT_VERIFICATION
    assert (tmp_path / "verification.json").exists()


def test_verify_scenario_writes_report(tmp_path, settings):
    settings.CAPACITANCE = {"MONTE_CARLO": {"samples": 20_000}}
    try:
        run("--scenario", "verify", "--trials", "2", "--seed", "1", "--out", str(tmp_path))
    except CommandError as exc:
        # a touching case may miss its 3 sigma bound at this sample count
        assert exc.returncode == EXIT_VERIFICATION
    payload = json.loads((tmp_path / "verification.json").read_text())
    assert payload["summary"]["seed"] == 1
    assert all(isinstance(case["pass"], bool) for case in payload["cases"])


def test_empty_sweep_uses_usage_code(tmp_path):
    with pytest.raises(CommandError) as info:
        run("--scenario", "cube", "--n-sweep", ",", "--out", str(tmp_path))
    assert info.value.returncode == EXIT_USAGE


@pytest.mark.django_db
def test_migrations_match_models():
    call_command("makemigrations", "capacitance", "--check", "--dry-run", stdout=StringIO())


@pytest.mark.django_db
def test_record_stores_run(tmp_path):
    output = run("--scenario", "cube", "--n-sweep", "1,2", "--out", str(tmp_path), "--record", "--seed", "5")
    run_obj = SolverRun.objects.get()
    assert f"Recorded run #{run_obj.pk}" in output
    assert run_obj.scenario == "cube"
    assert run_obj.seed == 5
    assert run_obj.passed
    assert list(ConvergencePoint.objects.filter(run=run_obj).values_list("n", flat=True)) == [1, 2]
