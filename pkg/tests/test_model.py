import json
import math

import numpy as np
import pytest
from pydantic import ValidationError

from spectrum_market.exceptions import MarketConfigError, NoLicensedBandError
from spectrum_market.model import (
    BoxDemand,
    LatencySpec,
    LinearDemand,
    MarketConfig,
    ServiceProvider,
    UnlicensedBand,
    inverse_demand,
    licensed_latency,
    load_market,
    monopoly_mass,
    unlicensed_latency,
    validate_market,
)

from conftest import make_market


def _config(**overrides):
    config = {
        "providers": [
            {"id": "incumbent", "kind": "incumbent", "licensed": {"offset": 0.0, "slope": 1.0}},
            {"id": "entrant", "kind": "entrant"},
        ],
        "unlicensed": {"capacity": 1.0, "latency": {"offset": 0.0, "slope": 1.0}},
        "classes": [{"name": "h", "weight": 1.0, "demand": {"kind": "box", "valuation": 1.0, "mass": 1.0}}],
    }
    config.update(overrides)
    return config


class TestLatency:
    def test_evaluate_and_integral(self):
        latency = LatencySpec(offset=1.0, slope=2.0, exponent=2.0)
        assert latency.evaluate(3.0) == pytest.approx(19.0)
        assert latency.integral(3.0) == pytest.approx(21.0)
        assert latency.derivative(3.0) == pytest.approx(12.0)

    def test_rejects_negative_offset(self):
        with pytest.raises(ValidationError):
            LatencySpec(offset=-0.1, slope=1.0)

    def test_rejects_concave_exponent(self):
        with pytest.raises(ValidationError):
            LatencySpec(slope=1.0, exponent=0.5)

    def test_unlicensed_band_scales_with_capacity(self):
        band = UnlicensedBand(capacity=2.0, latency=LatencySpec(slope=1.0))
        assert band.effective_slope == pytest.approx(0.5)
        assert unlicensed_latency(band, 1.0) == pytest.approx(0.5)

    def test_absent_band_is_infinite(self):
        band = UnlicensedBand(capacity=0.0)
        assert band.is_absent
        assert math.isinf(band.evaluate(0.0))

    def test_random_latencies_are_increasing_and_convex(self):
        rng = np.random.default_rng(1)
        loads = np.linspace(0.0, 2.0, 41)
        for _ in range(100):
            latency = LatencySpec(offset=float(rng.uniform(0.0, 1.0)), slope=float(rng.uniform(0.1, 3.0)),
                                  exponent=float(rng.uniform(1.0, 3.0)))
            values = np.array([latency.evaluate(x) for x in loads])
            assert np.all(np.diff(values) > 0)
            assert np.all(np.diff(values, 2) >= -1e-12)

    def test_unlicensed_latency_falls_with_capacity(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            latency = LatencySpec(offset=float(rng.uniform(0.0, 0.5)), slope=float(rng.uniform(0.1, 2.0)),
                                  exponent=float(rng.choice([1.0, 2.0])))
            load = float(rng.uniform(0.01, 2.0))
            values = [unlicensed_latency(UnlicensedBand(capacity=c, latency=latency), load)
                      for c in np.sort(rng.uniform(0.01, 10.0, size=5))]
            assert np.all(np.diff(values) < 0)


class TestDemand:
    def test_linear_inverse(self):
        demand = LinearDemand(intercept=1.0, elasticity=4.0)
        assert demand.inverse(0.2) == pytest.approx(0.2)
        assert demand.inverse(1.0) == 0.0
        assert demand.max_mass == pytest.approx(0.25)
        assert demand.gross_value(0.25) == pytest.approx(0.125)

    def test_box_inverse(self):
        demand = BoxDemand(valuation=1.6, mass=1.0)
        assert demand.inverse(0.5) == 1.6
        assert demand.inverse(1.5) == 0.0
        assert demand.gross_value(2.0) == pytest.approx(1.6)

    def test_discriminated_union(self):
        market = MarketConfig.model_validate(_config(classes=[
            {"weight": 1.0, "demand": {"kind": "linear", "intercept": 1.0, "elasticity": 4.0}}]))
        assert isinstance(market.classes[0].demand, LinearDemand)

    def test_inverse_demand_is_non_increasing(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            demand = (BoxDemand(valuation=float(rng.uniform(0.1, 3.0)), mass=float(rng.uniform(0.1, 2.0)))
                      if rng.uniform() < 0.5 else
                      LinearDemand(intercept=float(rng.uniform(0.1, 3.0)), elasticity=float(rng.uniform(0.1, 5.0))))
            market = make_market()
            cls = market.classes[0].model_copy(update={"demand": demand})
            low, high = sorted(rng.uniform(0.0, 3.0, size=2))
            assert inverse_demand(cls, float(high)) <= inverse_demand(cls, float(low))

    def test_inverse_demand_of_class(self):
        market = make_market(valuation=1.6, mass=1.3)
        assert inverse_demand(market.classes[0], 1.0) == 1.6
        assert inverse_demand(market.classes[0], 1.4) == 0.0


class TestProviders:
    def test_entrant_has_no_licensed_band(self):
        with pytest.raises(ValidationError):
            ServiceProvider(id="e", kind="entrant", licensed=LatencySpec())

    def test_licensed_latency_of_entrant(self):
        with pytest.raises(NoLicensedBandError):
            licensed_latency(ServiceProvider(id="e", kind="entrant"), 0.5)

    def test_licensed_latency(self):
        sp = ServiceProvider(id="i", licensed=LatencySpec(offset=0.1, slope=2.0))
        assert licensed_latency(sp, 0.5) == pytest.approx(1.1)

    def test_convex_licensed_latency(self):
        sp = ServiceProvider(id="i", licensed=LatencySpec(offset=0.1, slope=2.0, exponent=2.0))
        assert licensed_latency(sp, 0.5) == pytest.approx(0.1 + 2.0 * 0.5 ** 2)
        assert licensed_latency(sp, 0.5) == pytest.approx(0.6)

    def test_with_capacity(self, b1_market):
        market = b1_market.with_capacity(2.0)
        assert market.capacity == 2.0
        assert b1_market.capacity == 0.0
        assert [sp.id for sp in market.incumbents] == ["incumbent"]
        assert [sp.id for sp in market.entrants] == ["entrant"]


class TestValidation:
    def test_valid_config(self):
        report = validate_market(_config())
        assert report.ok
        assert report.errors == []
        assert "partial coverage at C=0" in report.notes

    def test_missing_field_has_path(self):
        config = _config(classes=[{"weight": 1.0, "demand": {"kind": "box"}}])
        report = validate_market(config)
        assert not report.ok
        assert ("classes[0].demand.valuation", "Field required") in report.errors

    def test_duplicate_ids(self):
        config = _config(providers=[
            {"id": "a", "kind": "incumbent", "licensed": {"slope": 1.0}},
            {"id": "a", "kind": "entrant"},
        ])
        report = validate_market(config)
        assert [path for path, _ in report.errors] == ["providers[1].id"]

    def test_no_incumbent(self):
        report = validate_market(_config(providers=[{"id": "e", "kind": "entrant"}]))
        assert report.errors[0][0] == "providers"

    def test_class_order(self):
        classes = [
            {"name": "h", "weight": 0.1, "demand": {"kind": "box", "valuation": 1.6}},
            {"name": "l", "weight": 0.4, "demand": {"kind": "box", "valuation": 0.85}},
        ]
        assert not validate_market(_config(classes=classes)).ok

    def test_single_provider_warns(self):
        config = _config(providers=[{"id": "i", "kind": "incumbent", "licensed": {"slope": 1.0}}])
        report = validate_market(config)
        assert report.ok
        assert any(path == "providers" for path, _ in report.warnings)

    def test_class_mass_order_warns(self, heterogeneous_market):
        config = heterogeneous_market.model_dump(mode="json")
        assert not any("mass" in message for _, message in validate_market(config).warnings)
        config["classes"][1]["demand"]["mass"] = 0.8
        report = validate_market(config)
        assert report.ok
        assert ("classes", "high class mass is not smaller than the low class mass") in report.warnings

    def test_full_monopoly_coverage_warns(self):
        report = validate_market(make_market(valuation=3.0))
        assert any("monopoly serves all demand" in message for _, message in report.warnings)

    def test_load_market_malformed_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{\"providers\": [", encoding="utf-8")
        with pytest.raises(MarketConfigError) as excinfo:
            load_market(path)
        assert excinfo.value.violations[0][0] == "<root>"

    def test_load_market_from_file(self, tmp_path):
        path = tmp_path / "market.json"
        path.write_text(json.dumps(_config()), encoding="utf-8")
        market = load_market(path)
        assert market.capacity == 1.0

    def test_load_market_structural_error(self):
        with pytest.raises(MarketConfigError) as excinfo:
            load_market(_config(classes=[]))
        assert excinfo.value.violations


class TestMonopolyMass:
    def test_linear(self):
        assert monopoly_mass(LatencySpec(slope=1.0), 1.0, 1.0, 1.0) == pytest.approx(0.5)

    def test_capped_at_mass(self):
        assert monopoly_mass(LatencySpec(slope=1.0), 3.0, 1.0, 1.0) == 1.0

    def test_convex(self):
        x = monopoly_mass(LatencySpec(slope=1.0, exponent=2.0), 1.0, 1.0, 1.0)
        assert x == pytest.approx(1.0 / math.sqrt(3.0), abs=1e-10)

    def test_unattractive_band(self):
        assert monopoly_mass(LatencySpec(offset=2.0, slope=1.0), 1.0, 1.0, 1.0) == 0.0
