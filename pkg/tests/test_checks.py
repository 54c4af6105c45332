import math

from spherectl.checks import CheckResult, gradient_fd_error, run_checks, speed_bound_excess


def test_gradient_and_speed_checks(six_star):
    assert gradient_fd_error(six_star, count=60) < 1e-5
    assert speed_bound_excess(six_star, count=500) <= 1e-12


def test_run_checks_on_s3(s3):
    results = run_checks(s3, samples=40, grid=1000)
    failed = [r.row() for r in results if not r.passed]
    assert not failed, failed
    names = [r.name for r in results]
    assert "beta C1 at knots" in names
    assert any(n.startswith("eigenstructure target") for n in names)


def test_check_row_format():
    row = CheckResult("demo", False, math.pi, 1e-3, "note").row()
    assert row.startswith("FAIL  demo")
    assert "note" in row
