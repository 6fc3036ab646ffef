import math

import numpy as np
import pytest

from spectrum_market.model import MarketConfig
from spectrum_market.wardrop import (
    Allocation,
    PriceProfile,
    allocate,
    delivered_prices,
    price_pieces,
    wardrop_residual,
)

from conftest import make_market


def test_monopoly_allocation(b1_market, settings):
    prices = PriceProfile.pinned(b1_market, 0.5)
    allocation = allocate(b1_market, prices, settings)
    assert allocation.licensed_load("incumbent") == pytest.approx(0.5)
    assert allocation.unlicensed_total == 0.0
    assert delivered_prices(b1_market, prices, allocation)[0] == pytest.approx(1.0)


def test_shared_allocation(b1_market, settings):
    market = b1_market.with_capacity(2.0)
    prices = PriceProfile.pinned(market, 0.25)
    allocation = allocate(market, prices, settings)
    assert allocation.licensed_load("incumbent") == pytest.approx(1.0 / 6.0)
    assert allocation.unlicensed_total == pytest.approx(5.0 / 6.0)
    # 同价的两个服务商平分非授权客户
    assert allocation.unlicensed["incumbent"][0] == pytest.approx(5.0 / 12.0)
    assert allocation.unlicensed["entrant"][0] == pytest.approx(5.0 / 12.0)
    assert delivered_prices(market, prices, allocation)[0] == pytest.approx(5.0 / 12.0)
    assert wardrop_residual(market, prices, allocation) <= 1e-9


def test_heterogeneous_full_coverage(heterogeneous_market, settings):
    prices = PriceProfile.pinned(heterogeneous_market, 0.62)
    allocation = allocate(heterogeneous_market, prices, settings)
    assert allocation.licensed["incumbent"][0] == pytest.approx(1.0)
    assert allocation.licensed["incumbent"][1] == pytest.approx(1.3)
    delivered = delivered_prices(heterogeneous_market, prices, allocation)
    assert delivered[0] == pytest.approx(1.54)
    assert delivered[1] == pytest.approx(0.85)


def test_prices_above_valuation(b1_market, settings):
    market = b1_market.with_capacity(1.0)
    prices = PriceProfile(licensed={"incumbent": 5.0}, unlicensed={"incumbent": 5.0, "entrant": 5.0})
    allocation = allocate(market, prices, settings)
    assert allocation.served(0) == 0.0
    assert wardrop_residual(market, prices, allocation) <= 1e-9


def test_cheapest_unlicensed_provider_takes_all(b1_market, settings):
    market = b1_market.with_capacity(1.0)
    prices = PriceProfile(licensed={"incumbent": 0.5}, unlicensed={"incumbent": 0.0, "entrant": 0.1})
    allocation = allocate(market, prices, settings)
    assert allocation.unlicensed["entrant"][0] == 0.0
    assert allocation.unlicensed["incumbent"][0] > 0.0


def test_unlicensed_only_split(b1_market, settings):
    market = b1_market.with_capacity(1.0)
    prices = PriceProfile(licensed={}, unlicensed={"incumbent": 0.0, "entrant": 0.0})
    allocation = allocate(market, prices, settings)
    assert allocation.licensed_load("incumbent") == 0.0
    assert allocation.unlicensed["incumbent"][0] == pytest.approx(0.5)
    assert allocation.unlicensed["entrant"][0] == pytest.approx(0.5)


def test_absent_band_gets_no_mass(b1_market, settings):
    prices = PriceProfile.pinned(b1_market, 2.0)
    allocation = allocate(b1_market, prices, settings)
    assert allocation.unlicensed_total == 0.0


def test_convex_latency_bisection(settings):
    market = make_market(d1=2.0)
    prices = PriceProfile.pinned(market, 0.5)
    allocation = allocate(market, prices, settings)
    assert allocation.licensed_load("incumbent") == pytest.approx(math.sqrt(0.5), abs=1e-6)
    assert allocation.pattern == "bisection"


def test_convex_latency_shared_band(settings):
    market = make_market(d1=2.0, d2=2.0, capacity=1.0)
    prices = PriceProfile.pinned(market, 0.2)
    allocation = allocate(market, prices, settings)
    assert wardrop_residual(market, prices, allocation) <= 1e-6


def test_linear_demand(symmetric_market, settings):
    prices = PriceProfile.pinned(symmetric_market, 1.0 / 6.0)
    allocation = allocate(symmetric_market, prices, settings)
    assert allocation.licensed_load("sp1") == pytest.approx(5.0 / 54.0)
    assert allocation.licensed_load("sp2") == pytest.approx(5.0 / 54.0)
    assert wardrop_residual(symmetric_market, prices, allocation) <= 1e-9


def test_two_class_with_unlicensed_band(heterogeneous_market, settings):
    market = heterogeneous_market.with_capacity(0.2)
    prices = PriceProfile.pinned(market, 1.2)
    allocation = allocate(market, prices, settings)
    assert allocation.licensed["incumbent"][0] == pytest.approx(1.0)
    assert allocation.licensed["incumbent"][1] == pytest.approx(0.0, abs=1e-12)
    assert allocation.unlicensed_by_class(1) == pytest.approx(1.3)
    assert wardrop_residual(market, prices, allocation) <= 1e-9


class TestPricePieces:
    def test_piece_reproduces_allocation(self, b1_market, settings):
        market = b1_market.with_capacity(2.0)
        pieces = price_pieces(market, PriceProfile.pinned(market, 0.0), "incumbent", settings)
        assert pieces
        covering = [p for p in pieces if p.lower <= 0.25 <= p.upper]
        assert covering
        assert covering[0].mass(0.25) == pytest.approx(1.0 / 6.0)

    def test_pieces_span_heterogeneous_prices(self, heterogeneous_market, settings):
        prices = PriceProfile.pinned(heterogeneous_market, 0.0)
        pieces = price_pieces(heterogeneous_market, prices, "incumbent", settings)
        best = max(piece.revenue(p) for piece in pieces for p in piece.candidates())
        assert best == pytest.approx(1.426)

    def test_requires_linear_latencies(self, settings):
        from spectrum_market.exceptions import RegimeError

        market = make_market(d1=2.0)
        with pytest.raises(RegimeError):
            price_pieces(market, PriceProfile.pinned(market, 0.0), "incumbent", settings)


def test_missing_price_means_not_offered(b1_market, settings):
    market: MarketConfig = b1_market.with_capacity(1.0)
    prices = PriceProfile(licensed={"incumbent": 0.3}, unlicensed={})
    allocation = allocate(market, prices, settings)
    assert allocation.unlicensed_total == 0.0
    assert allocation.licensed_load("incumbent") == pytest.approx(0.7)


def test_residual_detects_perturbed_allocation(b1_market, settings):
    market = b1_market.with_capacity(1.0)
    prices = PriceProfile.pinned(market, 0.5)
    allocation = allocate(market, prices, settings)
    assert wardrop_residual(market, prices, allocation) <= 1e-9

    moved = Allocation(
        licensed={"incumbent": [allocation.licensed["incumbent"][0] - 0.1]},
        unlicensed={"incumbent": list(allocation.unlicensed["incumbent"]),
                    "entrant": [allocation.unlicensed["entrant"][0] + 0.1]},
    )
    assert wardrop_residual(market, prices, moved) > 0.05


def test_own_price_never_raises_own_mass(heterogeneous_market, settings):
    rng = np.random.default_rng(13)
    for _ in range(50):
        market = heterogeneous_market.with_capacity(float(rng.uniform(0.0, 1.5)))
        low, high = sorted(rng.uniform(0.0, 1.8, size=2))
        before = allocate(market, PriceProfile.pinned(market, float(low)), settings)
        after = allocate(market, PriceProfile.pinned(market, float(high)), settings)
        assert after.licensed_load("incumbent") <= before.licensed_load("incumbent") + 1e-9


def test_own_price_in_duopoly(symmetric_market, settings):
    market = symmetric_market.with_capacity(0.5)
    loads = [
        allocate(market, PriceProfile.pinned(market, {"sp1": p, "sp2": 0.15}), settings).licensed_load("sp1")
        for p in np.linspace(0.0, 1.0, 41)
    ]
    assert np.all(np.diff(loads) <= 1e-9)


def _convex_two_class(slope, capacity, band_exponent):
    return MarketConfig.model_validate({
        "providers": [
            {"id": "incumbent", "kind": "incumbent", "licensed": {"slope": slope, "exponent": 2.0}},
            {"id": "entrant", "kind": "entrant"},
        ],
        "unlicensed": {"capacity": capacity, "latency": {"slope": 1.0, "exponent": band_exponent}},
        "classes": [
            {"name": "h", "weight": 0.4, "demand": {"kind": "box", "valuation": 1.6, "mass": 1.0}},
            {"name": "l", "weight": 0.1, "demand": {"kind": "box", "valuation": 0.85, "mass": 1.3}},
        ],
    })


def test_two_class_convex_latency(settings):
    market = _convex_two_class(0.7758, 1.0522, 1.0)
    prices = PriceProfile.pinned(market, 0.8581)
    allocation = allocate(market, prices, settings)
    assert allocation.pattern != "potential"
    assert wardrop_residual(market, prices, allocation) <= settings.bisection_tol


def test_two_class_convex_latency_random_markets(settings):
    rng = np.random.default_rng(11)
    for _ in range(200):
        market = _convex_two_class(float(rng.uniform(0.2, 2.0)), float(rng.uniform(0.05, 2.0)),
                                   float(rng.choice([1.0, 2.0])))
        prices = PriceProfile.pinned(market, float(rng.uniform(0.0, 1.6)))
        allocation = allocate(market, prices, settings)
        assert wardrop_residual(market, prices, allocation) <= settings.bisection_tol, market.model_dump()
