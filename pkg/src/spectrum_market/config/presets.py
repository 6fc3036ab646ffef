# -*- coding: utf-8 -*-
"""
复现预设

内置四个数值场景：市场配置、容量网格以及期望值与容差，
reproduce 命令不需要任何用户输入。
"""

import math
from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, Field

from ..model import MarketConfig

SQRT2 = math.sqrt(2.0)
SQRT5 = math.sqrt(5.0)


class Expectation(BaseModel):
    """一个期望值：approx 取 |computed - expected| <= tolerance，at_least / at_most 为单边比较"""

    quantity: str
    expected: float
    tolerance: float = 0.0
    comparison: Literal["approx", "at_least", "at_most"] = "approx"

    def check(self, computed: float) -> bool:
        if computed is None or not math.isfinite(computed):
            return self.expected == computed
        if self.comparison == "at_least":
            return computed >= self.expected - self.tolerance
        if self.comparison == "at_most":
            return computed <= self.expected + self.tolerance
        return abs(computed - self.expected) <= self.tolerance


class Preset(BaseModel):
    name: str
    description: str
    market: MarketConfig
    c_grid: Optional[List[float]] = None   # None 表示默认对数网格
    expectations: List[Expectation] = Field(default_factory=list)


def uniform_grid(c_max: float, step: float) -> List[float]:
    """[0, c_max] 上步长为 step 的网格，端点按 10 位小数取整"""
    count = int(round(c_max / step))
    return [round(k * step, 10) for k in range(count + 1)]


def _homogeneous_market(valuation: float) -> MarketConfig:
    return MarketConfig.model_validate({
        "providers": [
            {"id": "incumbent", "kind": "incumbent", "licensed": {"offset": 0.0, "slope": 1.0}},
            {"id": "entrant", "kind": "entrant"},
        ],
        "unlicensed": {"capacity": 0.0, "latency": {"offset": 0.0, "slope": 1.0}},
        "classes": [{"name": "h", "weight": 1.0, "demand": {"kind": "box", "valuation": valuation, "mass": 1.0}}],
    })


def _symmetric_market() -> MarketConfig:
    return MarketConfig.model_validate({
        "providers": [
            {"id": "sp1", "kind": "incumbent", "licensed": {"offset": 0.0, "slope": 1.0}},
            {"id": "sp2", "kind": "incumbent", "licensed": {"offset": 0.0, "slope": 1.0}},
        ],
        "unlicensed": {"capacity": 0.0, "latency": {"offset": 0.0, "slope": 1.0}},
        "classes": [{"name": "h", "weight": 1.0, "demand": {"kind": "linear", "intercept": 1.0, "elasticity": 4.0}}],
    })


def _heterogeneous_market() -> MarketConfig:
    return MarketConfig.model_validate({
        "providers": [
            {"id": "incumbent", "kind": "incumbent", "licensed": {"offset": 0.0, "slope": 1.0}},
            {"id": "entrant", "kind": "entrant"},
        ],
        "unlicensed": {"capacity": 0.0, "latency": {"offset": 0.0, "slope": 1.0}},
        "classes": [
            {"name": "h", "weight": 0.4, "demand": {"kind": "box", "valuation": 1.6, "mass": 1.0}},
            {"name": "l", "weight": 0.1, "demand": {"kind": "box", "valuation": 0.85, "mass": 1.3}},
        ],
    })


def _build_presets() -> Dict[str, Preset]:
    b1_grid = uniform_grid(2.0, 0.01)
    return {
        "b1-w1": Preset(
            name="b1-w1",
            description="同质市场 W=1, T1=T2=0, b=κ=1",
            market=_homogeneous_market(1.0),
            c_grid=b1_grid,
            expectations=[
                Expectation(quantity="C1", expected=0.5, tolerance=1e-9),
                Expectation(quantity="C2", expected=SQRT2 / 2.0, tolerance=1e-9),
                Expectation(quantity="S(0)", expected=0.25, tolerance=1e-9),
                Expectation(quantity="S(C2)", expected=SQRT2 / 2.0 - 0.5, tolerance=1e-9),
                Expectation(quantity="efficiency", expected=0.8284, tolerance=1e-3),
                Expectation(quantity="price at C=0", expected=0.5, tolerance=1e-6),
                Expectation(quantity="C1 from sweep", expected=0.5, tolerance=0.01),
                Expectation(quantity="C2 from sweep", expected=SQRT2 / 2.0, tolerance=0.01),
                Expectation(quantity="breakpoints", expected=2, tolerance=0),
                Expectation(quantity="max |SW - S(C)|", expected=0.0, tolerance=1e-6, comparison="at_most"),
            ],
        ),
        "b1-w2": Preset(
            name="b1-w2",
            description="同质市场 W=2, T1=T2=0, b=κ=1",
            market=_homogeneous_market(2.0),
            c_grid=b1_grid,
            expectations=[
                Expectation(quantity="C1", expected=0.0, tolerance=1e-9),
                Expectation(quantity="C2", expected=(SQRT5 - 1.0) / 4.0, tolerance=1e-9),
                Expectation(quantity="S(0)", expected=1.0, tolerance=1e-9),
                Expectation(quantity="efficiency", expected=0.6180, tolerance=1e-3),
                Expectation(quantity="price at C=0", expected=1.0, tolerance=1e-6),
                Expectation(quantity="C2 from sweep", expected=(SQRT5 - 1.0) / 4.0, tolerance=0.01),
                Expectation(quantity="max |SW - S(C)|", expected=0.0, tolerance=1e-6, comparison="at_most"),
            ],
        ),
        "b2-symmetric": Preset(
            name="b2-symmetric",
            description="两个相同在位者，线性需求 P(q) = 1 - 4q",
            market=_symmetric_market(),
            c_grid=uniform_grid(3.0, 0.02),
            expectations=[
                Expectation(quantity="price at C=0", expected=1.0 / 6.0, tolerance=1e-6),
                Expectation(quantity="SW at C=0", expected=72.5 / 729.0, tolerance=1e-6),
                Expectation(quantity="SW at C=0.1", expected=0.098663, tolerance=1e-5),
                Expectation(quantity="max deviation gain at C=0", expected=0.0, tolerance=1e-6, comparison="at_most"),
                Expectation(quantity="Braess intervals", expected=1, tolerance=0, comparison="at_least"),
                Expectation(quantity="min divided SW step", expected=0.0, tolerance=1e-9, comparison="at_least"),
                Expectation(quantity="min SW(divided) - SW(unlicensed)", expected=0.0, tolerance=1e-9, comparison="at_least"),
            ],
        ),
        "b3-heterogeneous": Preset(
            name="b3-heterogeneous",
            description="高低两类客户：W_h=1.6, Q_h=1, W_l=0.85, Q_l=1.3, λ_h=0.4, λ_l=0.1",
            market=_heterogeneous_market(),
            expectations=[
                Expectation(quantity="price at C=0", expected=0.62, tolerance=1e-3),
                Expectation(quantity="revenue at C=0", expected=1.426, tolerance=1e-3),
                Expectation(quantity="price jumps", expected=1, tolerance=0),
                Expectation(quantity="upward price jumps", expected=1, tolerance=0),
                Expectation(quantity="regime switches", expected=1, tolerance=0),
                Expectation(quantity="jump at regime switch", expected=1, tolerance=0),
                Expectation(quantity="CS drop at jump", expected=1e-12, tolerance=0.0, comparison="at_least"),
            ],
        ),
    }


PRESETS: Dict[str, Preset] = _build_presets()
PRESET_ORDER = ("b1-w1", "b1-w2", "b2-symmetric", "b3-heterogeneous")


def get_preset(name: str) -> Preset:
    """按名称取预设，未知名称抛出 KeyError"""
    if name not in PRESETS:
        raise KeyError(f"unknown preset '{name}', choose from {', '.join(PRESET_ORDER)}")
    return PRESETS[name]
