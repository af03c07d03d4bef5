import numpy as np
import pytest

from graphvar.montecarlo import (EstimatorConfig, McReport, derive_seed,
                                 rate_slope, run_monte_carlo)
from graphvar.scenarios import ScenarioSpec, chain_threepiece_spec
from graphvar.solvers import SolverOptions
from graphvar.validation import SolverError


def small_homo_spec(n=64, seed=0):
    return ScenarioSpec(id="S3", graph_kind="grid2d", n=n, v_star=1.0, seed=seed)


def test_report_fields_and_mean():
    report = run_monte_carlo(small_homo_spec(), EstimatorConfig(), reps=5,
                             base_seed=7)
    assert report.reps == 5
    assert len(report.per_rep) == 5
    assert report.mean == pytest.approx(float(np.mean(report.per_rep)))
    assert report.metric == "abs_err_homoscedastic"
    assert report.std_error is not None and report.std_error > 0
    assert report.wall_time >= 0


def test_single_replicate_flags_std_error():
    report = run_monte_carlo(small_homo_spec(), EstimatorConfig(), reps=1,
                             base_seed=3)
    assert report.mean == report.per_rep[0]
    assert report.std_error is None


def test_reps_zero_rejected():
    with pytest.raises(ValueError):
        run_monte_carlo(small_homo_spec(), EstimatorConfig(), reps=0)


def test_same_seed_bit_identical_across_worker_counts():
    spec = small_homo_spec()
    cfg = EstimatorConfig()
    a = run_monte_carlo(spec, cfg, reps=8, base_seed=11, workers=1)
    b = run_monte_carlo(spec, cfg, reps=8, base_seed=11, workers=4)
    assert a.per_rep == b.per_rep
    assert a.mean == b.mean


def test_worker_env_cap(monkeypatch):
    monkeypatch.setenv("GRAPHVAR_THREADS", "2")
    spec = small_homo_spec()
    report = run_monte_carlo(spec, EstimatorConfig(), reps=4, base_seed=1)
    baseline = run_monte_carlo(spec, EstimatorConfig(), reps=4, base_seed=1,
                               workers=1)
    assert report.per_rep == baseline.per_rep


def test_heteroscedastic_metric_and_failure_aborts(rng):
    spec = ScenarioSpec(id="S4", graph_kind="grid2d", n=16 * 16, seed=0)
    cfg = EstimatorConfig(kind="heteroscedastic", grid=(1.0, 10.0))
    report = run_monte_carlo(spec, cfg, reps=2, base_seed=5)
    assert report.metric == "mse_variance_field"
    assert all(v >= 0 for v in report.per_rep)
    # an impossible tolerance must abort the report, not drop replicates
    bad = EstimatorConfig(kind="heteroscedastic", grid=(1.0,),
                          opts=SolverOptions(max_iters=2, gap_tol=1e-16,
                                             polish=False))
    with pytest.raises(SolverError):
        run_monte_carlo(spec, bad, reps=2, base_seed=5)


def test_homoscedastic_requires_constant_variance():
    spec = ScenarioSpec(id="S4", graph_kind="grid2d", n=64, seed=0)
    with pytest.raises(ValueError):
        run_monte_carlo(spec, EstimatorConfig(kind="homoscedastic"), reps=1)


@pytest.mark.parametrize("law,param", [("laplace", None), ("student_t", 9.0),
                                       ("stretched_exp", 0.7)])
def test_heavy_tailed_error_families_run_end_to_end(law, param):
    spec = ScenarioSpec(id="S4", graph_kind="grid2d", n=20 * 20,
                        error_law=law, law_param=param)
    cfg = EstimatorConfig(kind="heteroscedastic", grid=(1.0, 10.0, 100.0))
    report = run_monte_carlo(spec, cfg, reps=2, base_seed=9)
    assert all(np.isfinite(v) and v >= 0 for v in report.per_rep)


def test_estimator_config_validation():
    with pytest.raises(ValueError):
        EstimatorConfig(kind="bootstrap")
    with pytest.raises(ValueError):
        EstimatorConfig(kind="heteroscedastic", lam=1.0, lam_prime="auto")


def test_mc_report_json_round_trip():
    report = run_monte_carlo(small_homo_spec(), EstimatorConfig(), reps=3,
                             base_seed=2)
    again = McReport.from_dict(__import__("json").loads(report.to_json()))
    assert again.per_rep == report.per_rep
    assert again.spec.n == report.spec.n


def test_derive_seed_splittable():
    seeds = {derive_seed(0, r, k) for r in range(50) for k in range(2)}
    assert len(seeds) == 100
    assert derive_seed(0, 3, 1) == derive_seed(0, 3, 1)
    assert derive_seed(0, 3, 1) != derive_seed(1, 3, 1)


# ---------------------------------------------------------------------------
# rate slope
# ---------------------------------------------------------------------------


def fake_report(n, mean, sid="Custom"):
    spec = chain_threepiece_spec(n, v0=1.0, seed=0)
    return McReport(spec=spec, reps=1, metric="abs_err_homoscedastic",
                    per_rep=[mean], mean=mean, std_error=None, wall_time=0.0)


def test_rate_slope_exact_half_power():
    reports = [fake_report(n, 3.0 * n**-0.5) for n in (100, 1000, 10000)]
    assert rate_slope(reports) == pytest.approx(-0.5, abs=1e-12)


def test_rate_slope_constant_is_zero():
    reports = [fake_report(n, 0.7) for n in (100, 1000, 10000)]
    assert rate_slope(reports) == pytest.approx(0.0, abs=1e-12)


def test_rate_slope_needs_three_points():
    with pytest.raises(ValueError):
        rate_slope([fake_report(100, 1.0), fake_report(200, 0.9)])


def test_rate_slope_rejects_mixed_families():
    r1 = fake_report(100, 1.0)
    spec2 = ScenarioSpec(id="S3", graph_kind="grid2d", n=400, v_star=1.0)
    r2 = McReport(spec=spec2, reps=1, metric="abs_err_homoscedastic",
                  per_rep=[0.5], mean=0.5, std_error=None, wall_time=0.0)
    r3 = fake_report(900, 0.4)
    with pytest.raises(ValueError):
        rate_slope([r1, r2, r3])


def test_rate_slope_rejects_duplicate_n():
    reports = [fake_report(100, 1.0), fake_report(100, 0.9),
               fake_report(400, 0.5)]
    with pytest.raises(ValueError):
        rate_slope(reports)
