import numpy as np
import pytest

from spectrum_market.best_response import Regime
from spectrum_market.equilibrium import (
    Stage,
    compare_delivered_prices,
    market_stage,
    solve,
    solve_generic,
    solve_heterogeneous_single,
    solve_homogeneous_single,
    solve_symmetric_N,
    verify_equilibrium,
)
from spectrum_market.exceptions import ConvergenceError, RegimeError
from spectrum_market.wardrop import Allocation, PriceProfile

from conftest import make_market


class TestHomogeneous:
    def test_monopoly(self, b1_market, settings):
        result = solve(b1_market, settings)
        assert result.prices.licensed["incumbent"] == pytest.approx(0.5)
        assert result.report.social_welfare == pytest.approx(0.25)
        assert result.prices.unlicensed == {"incumbent": 0.0, "entrant": 0.0}
        assert result.diagnostics.wardrop_residual <= 1e-9
        assert result.stage is None

    def test_interior(self, b1_market, settings):
        result = solve(b1_market.with_capacity(1.0), settings)
        assert result.regime == Regime.INTERIOR
        assert result.prices.licensed["incumbent"] == pytest.approx(0.5)
        assert result.allocation.licensed_load("incumbent") == pytest.approx(0.25)
        assert result.delivered[0] == pytest.approx(0.75)

    def test_large_capacity(self, b1_market, settings):
        result = solve(b1_market.with_capacity(2.0), settings)
        assert result.prices.licensed["incumbent"] == pytest.approx(0.25)
        assert result.report.social_welfare == pytest.approx(0.625)
        assert result.report.consumer_surplus == pytest.approx(7.0 / 12.0)
        assert result.report.revenues["incumbent"] == pytest.approx(1.0 / 24.0)

    def test_nonlinear_goes_generic(self, settings):
        result = solve(make_market(d1=2.0), settings)
        assert result.prices.licensed["incumbent"] == pytest.approx(2.0 / 3.0, abs=1e-6)
        assert result.diagnostics.method == "golden"

    def test_closed_form_falls_back(self, settings):
        result = solve_homogeneous_single(make_market(valuation=3.0, capacity=1.0), settings)
        assert "fallback to generic" in result.diagnostics.flags
        assert result.diagnostics.wardrop_residual <= 1e-9

    def test_single_provider_is_flagged(self, settings):
        result = solve(make_market(entrant=False, capacity=1.0), settings)
        assert "single provider" in result.diagnostics.flags


class TestHeterogeneous:
    def test_monopoly_stage(self, heterogeneous_market, settings):
        result = solve(heterogeneous_market, settings)
        assert result.prices.licensed["incumbent"] == pytest.approx(0.62)
        assert result.stage == Stage.MONOPOLY
        assert result.regime == Regime.SERVE_BOTH
        assert result.report.social_welfare == pytest.approx(1.486)
        assert result.delivered[0] == pytest.approx(1.54)
        assert result.delivered[1] == pytest.approx(0.85)

    def test_sorted_stage(self, heterogeneous_market, settings):
        result = solve(heterogeneous_market.with_capacity(0.2), settings)
        assert result.prices.licensed["incumbent"] == pytest.approx(1.2)
        assert result.stage == Stage.SORTED
        assert result.regime == Regime.SERVE_HIGH

    def test_row_has_both_classes(self, heterogeneous_market, settings):
        row = solve(heterogeneous_market, settings).to_row(heterogeneous_market)
        assert row["x_licensed_h"] == pytest.approx(1.0)
        assert row["x_licensed_l"] == pytest.approx(1.3)
        assert row["stage"] == "Monopoly"
        assert row["regime"] == "ServeBothTypes"

    def test_direct_solver(self, heterogeneous_market, settings):
        result = solve_heterogeneous_single(heterogeneous_market.with_capacity(0.2), settings)
        assert result.prices.licensed["incumbent"] == pytest.approx(1.2)
        assert result.diagnostics.iterations == 1

    @pytest.mark.parametrize("licensed, entrant, stage", [
        ([0.0, 0.5], [0.0, 0.3], Stage.COMPETE_LOW),
        ([1.0, 0.0], [0.0, 0.3], Stage.SORTED),
        ([0.5, 0.0], [0.2, 0.0], Stage.COMPETE_HIGH),
        ([0.0, 0.0], [0.4, 0.3], Stage.UNLICENSED_ONLY),
        ([1.0, 1.3], [0.0, 0.0], Stage.MONOPOLY),
    ])
    def test_market_stage(self, heterogeneous_market, licensed, entrant, stage):
        market = heterogeneous_market.with_capacity(0.5)
        allocation = Allocation(licensed={"incumbent": licensed},
                                unlicensed={"incumbent": [0.0, 0.0], "entrant": entrant})
        assert market_stage(market, allocation) == stage


class TestSymmetric:
    def test_duopoly_without_band(self, symmetric_market, settings):
        result = solve(symmetric_market, settings)
        assert result.prices.licensed["sp1"] == pytest.approx(1.0 / 6.0, abs=1e-7)
        assert result.prices.licensed["sp2"] == pytest.approx(1.0 / 6.0, abs=1e-7)
        assert result.report.social_welfare == pytest.approx(72.5 / 729.0, abs=1e-8)

    def test_duopoly_with_band(self, symmetric_market, settings):
        result = solve(symmetric_market.with_capacity(0.1), settings)
        assert result.prices.licensed["sp1"] == pytest.approx(1.0 / 6.8, abs=1e-7)
        assert result.report.social_welfare == pytest.approx(0.098663, abs=1e-5)

    def test_not_converged(self, symmetric_market, settings):
        with pytest.raises(ConvergenceError) as excinfo:
            solve_symmetric_N(symmetric_market, settings.with_overrides(max_iterations=1))
        assert len(excinfo.value.trace) == 2

    def test_requires_identical_incumbents(self, b1_market, settings):
        with pytest.raises(RegimeError):
            solve_symmetric_N(b1_market, settings)

    def test_row_columns(self, symmetric_market, settings):
        row = solve(symmetric_market, settings).to_row(symmetric_market)
        assert list(row)[:4] == ["C", "price_sp1", "price_sp2", "p_w"]
        assert "revenue_sp2" in row


def test_symmetric_iteration_from_random_starts(symmetric_market, settings):
    rng = np.random.default_rng(7)
    for start in rng.uniform(0.0, 1.0, size=20):
        result = solve_symmetric_N(symmetric_market, settings, initial_price=float(start))
        assert result.prices.licensed["sp1"] == pytest.approx(1.0 / 6.0, abs=1e-6)


def test_generic_duopoly_from_random_starts(symmetric_market, settings):
    rng = np.random.default_rng(8)
    market = symmetric_market.with_capacity(0.1)
    for start in rng.uniform(0.0, 1.0, size=(20, 2)):
        result = solve_generic(market, settings, {"sp1": float(start[0]), "sp2": float(start[1])})
        assert result.prices.licensed["sp1"] == pytest.approx(1.0 / 6.8, abs=1e-6)
        assert result.prices.licensed["sp2"] == pytest.approx(1.0 / 6.8, abs=1e-6)
        assert result.diagnostics.iterations > 1


def test_compare_delivered_prices(b1_market, settings):
    before, after = compare_delivered_prices(b1_market, 1.0, settings)
    assert before == pytest.approx(1.0)
    assert after == pytest.approx(0.75)


def test_compare_delivered_prices_needs_one_class(heterogeneous_market, settings):
    with pytest.raises(RegimeError):
        compare_delivered_prices(heterogeneous_market, 1.0, settings)


class TestVerification:
    def test_equilibrium_passes(self, b1_market, settings):
        market = b1_market.with_capacity(0.6)
        result = solve(market, settings)
        report = verify_equilibrium(market, result, 0.01, settings)
        assert report.passed
        assert report.unlicensed_prices_zero
        assert report.certificate.gains["entrant:unlicensed"] <= 1e-6

    def test_perturbed_price_fails(self, b1_market, settings):
        market = b1_market.with_capacity(0.6)
        result = solve(market, settings)
        perturbed = result.model_copy(update={"prices": PriceProfile.pinned(market, 0.7)})
        report = verify_equilibrium(market, perturbed, 0.01, settings)
        assert not report.passed
        assert report.certificate.max_gain > 0.01
        assert report.certificate.worst_deviator == "incumbent"

    def test_unused_band(self, settings):
        market = make_market(T2=2.0, capacity=1.0)
        result = solve(market, settings)
        assert result.allocation.unlicensed_total == 0.0
        report = verify_equilibrium(market, result, 0.01, settings)
        assert report.no_service_ok is True
        assert report.passed
