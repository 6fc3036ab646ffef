import pytest

from spectrum_market.config.presets import get_preset
from spectrum_market.config.solver_config import SolverSettings
from spectrum_market.model import MarketConfig


def make_market(valuation=1.0, T1=0.0, T2=0.0, b=1.0, kappa=1.0, capacity=0.0, d1=1.0, d2=1.0,
                weight=1.0, mass=1.0, entrant=True) -> MarketConfig:
    """单一在位者、单一 Box 客户类的市场"""
    providers = [{"id": "incumbent", "kind": "incumbent", "licensed": {"offset": T1, "slope": b, "exponent": d1}}]
    if entrant:
        providers.append({"id": "entrant", "kind": "entrant"})
    return MarketConfig.model_validate({
        "providers": providers,
        "unlicensed": {"capacity": capacity, "latency": {"offset": T2, "slope": kappa, "exponent": d2}},
        "classes": [{"name": "h", "weight": weight, "demand": {"kind": "box", "valuation": valuation, "mass": mass}}],
    })


@pytest.fixture
def settings():
    return SolverSettings()


@pytest.fixture
def b1_market():
    return get_preset("b1-w1").market


@pytest.fixture
def b1_w2_market():
    return get_preset("b1-w2").market


@pytest.fixture
def symmetric_market():
    return get_preset("b2-symmetric").market


@pytest.fixture
def heterogeneous_market():
    return get_preset("b3-heterogeneous").market
