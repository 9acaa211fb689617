import csv
import math
import warnings

import numpy as np
import pytest

from divrate import dilation
from divrate.direct import exact_constant_B
from divrate.errors import DegenerateDataError, DomainError
from divrate.experiments import ExperimentPlan, TailWarning, run_direct
from divrate.grid import Grid, GridFunction, resample
from divrate.inverse import (
    METHODS,
    InverseConfig,
    build_L_filter,
    central_difference,
    forward_difference,
    recover_B,
    solve,
    solve_brute,
    solve_filter,
    solve_mixed,
    solve_qr,
    write_inverse_csv,
)
from divrate.metrics import delta_metric
from divrate.noise import NoiseSpec, perturb
from divrate.regularization import OVERRIDE, lambda_ratio_plain, regularized_derivative

ALPHAS = np.logspace(-3, 0, 13)


def _direct(plan):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TailWarning)
        return run_direct(plan)


@pytest.fixture(scope="module")
def noiseless():
    """B = 1 data from the 1000-interval direct solve, on the 10x finer inverse grid."""
    plan = ExperimentPlan.noiseless()
    N = resample(_direct(plan).N, plan.inverse_grid)
    return N, plan.inverse_grid.sample(lambda x: np.ones_like(x))


@pytest.fixture(scope="module")
def noisy_base():
    plan = ExperimentPlan()
    N = resample(_direct(plan).N, plan.inverse_grid)
    return N, plan.inverse_grid.sample(lambda x: np.ones_like(x))


class TestCommonInvariants:
    @pytest.mark.parametrize("method", METHODS)
    @pytest.mark.parametrize("alpha", [0.0, 0.01, 0.3])
    def test_boundary_residual_and_ratio(self, noisy_base, method, alpha):
        N, _ = noisy_base
        N_eps = perturb(N, NoiseSpec(0.05, 4))
        res = solve(method, N_eps, InverseConfig(alpha))
        assert res.H.values[0] == 0.0
        assert np.abs(res.residual()).max() <= 1e-10 * max(1.0, np.abs(res.L.values).max())
        defined = ~np.isnan(res.B.values)
        assert defined.any()
        np.testing.assert_allclose((res.B * N_eps).values[defined], res.H.values[defined], rtol=1e-15)
        assert np.all(N_eps.values[defined] > 0.01)
        assert np.all(N_eps.values[~defined] <= 0.01)
        assert res.method == method and res.alpha == alpha

    def test_unknown_method(self, noisy_base):
        with pytest.raises(DomainError):
            solve("tikhonov", noisy_base[0], InverseConfig())

    def test_negative_alpha(self):
        with pytest.raises(DomainError):
            InverseConfig(alpha=-0.1)
        with pytest.raises(DomainError):
            InverseConfig(b_threshold=0.0)

    @pytest.mark.parametrize("method", METHODS)
    def test_override_is_used(self, noisy_base, method):
        res = solve(method, noisy_base[0], InverseConfig(0.02, lambda_override=1.0))
        assert res.lambda_used.value == 1.0 and res.lambda_used.variant == OVERRIDE


class TestDifferences:
    def test_forward_uses_zero_beyond_grid(self):
        g = Grid.from_intervals(2.0, 2)
        np.testing.assert_array_equal(forward_difference(GridFunction(g, [0.0, 1.0, 3.0])), [1.0, 2.0, -3.0])

    def test_central_exact_on_quadratics(self):
        g = Grid.from_intervals(2.0, 20)
        d = central_difference(g.sample(lambda x: x**2 - x))
        np.testing.assert_allclose(d, 2 * g.nodes - 1, atol=1e-12)


class TestBrute:
    def test_noiseless_level(self, noiseless):
        N, B = noiseless
        assert 0.6e-2 <= delta_metric(B, N, solve_brute(N, InverseConfig()).H) <= 2.6e-2

    def test_constant_data_matches_dense_oracle(self):
        g = Grid.from_intervals(4.0, 64)
        N = g.sample(lambda x: np.full_like(x, 0.5))
        res = solve_brute(N, InverseConfig())
        lam = lambda_ratio_plain(N).value
        np.testing.assert_allclose(res.L.values, lam * N.values, atol=1e-12)
        # the brute scheme keeps L_0; compare with the oracle on data whose origin value is zero
        L0 = res.L.copy()
        L0.values[0] = 0.0
        np.testing.assert_allclose(dilation.sweep(L0.values), dilation.solve_dense_oracle(L0).H.values, atol=1e-12)
        # constant right side: H = lam * 0.5 / 3 away from the origin
        assert res.H.values[-1] == pytest.approx(lam * 0.5 / 3, rel=1e-3)

    def test_alpha_is_ignored(self, noisy_base):
        N, _ = noisy_base
        a = solve_brute(N, InverseConfig(0.0)).H.values
        np.testing.assert_array_equal(solve_brute(N, InverseConfig(0.5)).H.values, a)

    def test_qr_sweep_without_transport_reproduces_brute(self, noisy_base):
        N, _ = noisy_base
        res = solve_brute(N, InverseConfig())
        np.testing.assert_array_equal(dilation.sweep(res.L.values, 0.0 / N.grid.dx), res.H.values)

    def test_regularization_wins_under_noise(self, noisy_base):
        N, B = noisy_base
        N_eps = perturb(N, NoiseSpec(0.1, 0))
        brute = delta_metric(B, N_eps, solve_brute(N_eps, InverseConfig()).H)
        best = min(delta_metric(B, N_eps, solve_filter(N_eps, InverseConfig(a)).H) for a in ALPHAS)
        assert brute > best


class TestFilter:
    def test_noiseless_level(self, noiseless):
        N, B = noiseless
        assert delta_metric(B, N, solve_filter(N, InverseConfig(1e-2)).H) <= 2e-2

    def test_recovered_rate_in_bulk(self, noiseless):
        N, _ = noiseless
        res = solve_filter(N, InverseConfig(1e-2))
        bulk = (N.x >= 0.5) & ~np.isnan(res.B.values)
        assert bulk.sum() > 1000
        assert np.abs(res.B.values[bulk] - 1).max() <= 0.1

    def test_exact_data_and_rate(self):
        g = Grid.from_intervals(4.0, 2000)
        N = resample(exact_constant_B(Grid.from_intervals(8.0, 4000), 1.0), g)
        res = solve_filter(N, InverseConfig(0.0, lambda_override=1.0))
        assert np.abs(res.H.values - N.values).max() <= 1e-3

    def test_L_has_zero_origin_and_balances(self, noiseless):
        N, _ = noiseless
        L, lam = build_L_filter(N, 0.01)
        assert L.values[0] == 0.0
        assert lam.value == pytest.approx(1.0, abs=1e-2)
        H = solve_filter(N, InverseConfig(0.01)).H.values
        x, half = N.x, N.grid.intervals // 2
        Lv = L.values
        assert abs(H.sum() - Lv[1:].sum()) <= 2 * np.abs(H[half:]).sum()
        assert abs(np.dot(x[1 : half + 1], Lv[1 : half + 1])) <= np.dot(x[half:], np.abs(H[half:]))

    def test_L_uses_regularized_derivative(self, noisy_base):
        N, _ = noisy_base
        L, lam = build_L_filter(N, 0.1)
        expected = regularized_derivative(N, 0.1).values + lam.value * N.values
        np.testing.assert_allclose(L.values[1:], expected[1:], rtol=1e-15)

    def test_zero_data(self):
        with pytest.raises(DegenerateDataError):
            build_L_filter(Grid.from_intervals(4.0, 40).zeros(), 0.1)


class TestQuasiReversibility:
    def test_noiseless_level(self, noiseless):
        N, B = noiseless
        assert delta_metric(B, N, solve_qr(N, InverseConfig(1e-2)).H) <= 2e-2

    def test_zero_data_gives_zero(self):
        g = Grid.from_intervals(4.0, 40)
        res = solve_qr(g.zeros(), InverseConfig(0.1, lambda_override=1.0))
        np.testing.assert_array_equal(res.H.values, 0.0)

    def test_first_node_closed_form(self, noisy_base):
        N, _ = noisy_base
        cfg = InverseConfig(0.05)
        res = solve_qr(N, cfg)
        t = cfg.alpha / N.grid.dx
        L = res.L.values
        assert res.H.values[1] == pytest.approx(0.5 * (L[0] + L[1]) / (t + 3.5), rel=1e-14)

    def test_alpha_zero_lambda_is_plain(self, noisy_base):
        N, _ = noisy_base
        assert solve_qr(N, InverseConfig(0.0)).lambda_used.value == lambda_ratio_plain(N).value


class TestMixed:
    def test_noiseless_level(self, noiseless):
        N, B = noiseless
        assert delta_metric(B, N, solve_mixed(N, InverseConfig(1e-2)).H) <= 2e-2

    def test_alpha_zero_is_brute_with_spectral_derivative(self, noisy_base):
        N, _ = noisy_base
        res = solve_mixed(N, InverseConfig(0.0))
        lam = lambda_ratio_plain(N).value
        L = regularized_derivative(N, 0.0).values + lam * N.values
        np.testing.assert_allclose(res.H.values, dilation.sweep(L, 0.0), atol=1e-10)
        assert res.lambda_used.value == pytest.approx(lam, rel=1e-12)

    def test_smoother_than_qr_under_noise(self, noisy_base):
        N, _ = noisy_base
        for seed in range(3):
            N_eps = perturb(N, NoiseSpec(0.1, seed))
            for alpha in (0.03, 0.1, 0.3):
                tv_qr = np.abs(np.diff(solve_qr(N_eps, InverseConfig(alpha)).H.values)).sum()
                tv_mixed = np.abs(np.diff(solve_mixed(N_eps, InverseConfig(alpha)).H.values)).sum()
                assert tv_mixed < tv_qr


class TestRecoverB:
    def test_identity(self):
        g = Grid.from_intervals(1.0, 10)
        N = g.sample(lambda x: 0.5 + x)
        np.testing.assert_array_equal(recover_B(N, N, 0.01).values, 1.0)

    def test_all_absent(self):
        g = Grid.from_intervals(1.0, 10)
        N = g.sample(lambda x: np.full_like(x, 0.005))
        assert np.isnan(recover_B(N, N, 0.01).values).all()


class TestCsv:
    def test_layout(self, tmp_path, noisy_base):
        N, _ = noisy_base
        res = solve("qr", N, InverseConfig(0.1))
        path = tmp_path / "inv.csv"
        write_inverse_csv(res, N, path, ["seed=3"])
        lines = path.read_text().splitlines()
        assert lines[0].startswith("# method=qr, alpha=0.10000000000000001, lambda=")
        assert lines[1] == "# seed=3"
        assert lines[2] == "x,N_eps,H,B"
        rows = list(csv.reader(lines[3:]))
        assert len(rows) == N.grid.n_points
        assert rows[0][3] == ""  # N = 0 at the origin: B absent
        assert float(rows[500][2]) == res.H.values[500]
