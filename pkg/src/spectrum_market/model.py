"""
Domain types for spectrum markets: latency functions, demand curves,
service providers and the market configuration, plus config validation.
"""

import json
import logging
import math
from pathlib import Path
from typing import Annotated, Any, Dict, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator
from scipy.optimize import brentq

from .exceptions import MarketConfigError, NoLicensedBandError

logger = logging.getLogger(__name__)

# 容量为 0 的非授权频段不存在，任何负载下的延迟都视为 +inf
BAND_ABSENT = math.inf


class LatencySpec(BaseModel):
    """凸延迟函数 offset + slope * load ** exponent"""

    model_config = ConfigDict(frozen=True)

    offset: float = Field(0.0, ge=0)
    slope: float = Field(1.0, gt=0)
    exponent: float = Field(1.0, ge=1)

    @property
    def is_linear(self) -> bool:
        return self.exponent == 1.0

    def evaluate(self, load: float) -> float:
        return self.offset + self.slope * load ** self.exponent

    def derivative(self, load: float) -> float:
        if self.is_linear:
            return self.slope
        return self.slope * self.exponent * load ** (self.exponent - 1.0)

    def integral(self, load: float) -> float:
        """从 0 到 load 的积分"""
        d = self.exponent
        return self.offset * load + self.slope * load ** (d + 1.0) / (d + 1.0)

    def scaled(self, factor: float) -> "LatencySpec":
        """斜率乘以 factor 的副本"""
        return self.model_copy(update={"slope": self.slope * factor})


class UnlicensedBand(BaseModel):
    """
    非授权频段

    有效斜率为 slope / capacity；capacity = 0 表示频段不存在，
    capacity = inf 时延迟退化为常数 offset。
    """

    model_config = ConfigDict(frozen=True)

    capacity: float = Field(0.0, ge=0)
    latency: LatencySpec = Field(default_factory=LatencySpec)

    @property
    def is_absent(self) -> bool:
        return self.capacity == 0.0

    @property
    def effective_slope(self) -> float:
        if self.is_absent:
            return math.inf
        return self.latency.slope / self.capacity

    def evaluate(self, load: float) -> float:
        if self.is_absent:
            return BAND_ABSENT
        return self.latency.offset + self.effective_slope * load ** self.latency.exponent

    def integral(self, load: float) -> float:
        if self.is_absent:
            return 0.0 if load == 0 else math.inf
        d = self.latency.exponent
        return self.latency.offset * load + self.effective_slope * load ** (d + 1.0) / (d + 1.0)


class BoxDemand(BaseModel):
    """估值为 W、总量为 Q 的阶梯型需求"""

    model_config = ConfigDict(frozen=True)

    kind: Literal["box"] = "box"
    valuation: float = Field(..., gt=0)
    mass: float = Field(1.0, gt=0)

    @property
    def choke_price(self) -> float:
        return self.valuation

    @property
    def max_mass(self) -> float:
        return self.mass

    def inverse(self, q: float) -> float:
        return self.valuation if q <= self.mass else 0.0

    def gross_value(self, q: float) -> float:
        return self.valuation * min(max(q, 0.0), self.mass)


class LinearDemand(BaseModel):
    """线性逆需求 P(q) = max(A - beta * q, 0)"""

    model_config = ConfigDict(frozen=True)

    kind: Literal["linear"] = "linear"
    intercept: float = Field(1.0, gt=0)
    elasticity: float = Field(..., gt=0)

    @property
    def choke_price(self) -> float:
        return self.intercept

    @property
    def max_mass(self) -> float:
        return self.intercept / self.elasticity

    def inverse(self, q: float) -> float:
        return max(self.intercept - self.elasticity * q, 0.0)

    def gross_value(self, q: float) -> float:
        q = min(max(q, 0.0), self.max_mass)
        return self.intercept * q - 0.5 * self.elasticity * q * q


DemandSpec = Annotated[Union[BoxDemand, LinearDemand], Field(discriminator="kind")]


class CustomerClass(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str = "h"
    weight: float = Field(1.0, gt=0)
    demand: DemandSpec


class ServiceProvider(BaseModel):
    """服务商：在位者拥有授权频段，新进入者只能使用非授权频段"""

    model_config = ConfigDict(frozen=True)

    id: str
    kind: Literal["incumbent", "entrant"] = "incumbent"
    licensed: Optional[LatencySpec] = None

    @model_validator(mode="after")
    def _check_band(self) -> "ServiceProvider":
        if self.kind == "incumbent" and self.licensed is None:
            raise ValueError("incumbent requires a licensed latency")
        if self.kind == "entrant" and self.licensed is not None:
            raise ValueError("entrants have no licensed band")
        return self

    @property
    def is_incumbent(self) -> bool:
        return self.kind == "incumbent"


class MarketConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    providers: List[ServiceProvider]
    unlicensed: UnlicensedBand = Field(default_factory=UnlicensedBand)
    classes: List[CustomerClass] = Field(..., min_length=1, max_length=2)

    @property
    def incumbents(self) -> List[ServiceProvider]:
        return [sp for sp in self.providers if sp.is_incumbent]

    @property
    def entrants(self) -> List[ServiceProvider]:
        return [sp for sp in self.providers if not sp.is_incumbent]

    @property
    def capacity(self) -> float:
        return self.unlicensed.capacity

    @property
    def is_homogeneous(self) -> bool:
        return len(self.classes) == 1

    @property
    def all_linear(self) -> bool:
        return all(sp.licensed.is_linear for sp in self.incumbents) and self.unlicensed.latency.is_linear

    def provider(self, sp_id: str) -> ServiceProvider:
        for sp in self.providers:
            if sp.id == sp_id:
                return sp
        raise KeyError(sp_id)

    def with_capacity(self, capacity: float) -> "MarketConfig":
        band = self.unlicensed.model_copy(update={"capacity": float(capacity)})
        return self.model_copy(update={"unlicensed": band})


# === 求值函数 ===

def licensed_latency(sp: ServiceProvider, load: float) -> float:
    """授权频段延迟 l_i(load)"""
    if not sp.is_incumbent:
        raise NoLicensedBandError(sp.id)
    return sp.licensed.evaluate(load)


def unlicensed_latency(band: UnlicensedBand, load: float) -> float:
    """非授权频段延迟 g(load)，频段不存在时返回 BAND_ABSENT"""
    return band.evaluate(load)


def inverse_demand(customer_class: CustomerClass, q: float) -> float:
    return customer_class.demand.inverse(q)


def monopoly_mass(latency: LatencySpec, valuation: float, weight: float, mass: float) -> float:
    """
    C = 0 时单一在位者的最优服务量 x*

    x* 使 x * (W - weight * l(x)) 最大，即 W = weight * (l(x) + x l'(x))，上限为 mass。
    """
    if valuation <= weight * latency.offset:
        return 0.0
    if latency.is_linear:
        return min((valuation - weight * latency.offset) / (2.0 * weight * latency.slope), mass)

    def marginal(x: float) -> float:
        return valuation - weight * (latency.evaluate(x) + x * latency.derivative(x))

    if marginal(mass) >= 0:
        return mass
    return brentq(marginal, 0.0, mass, xtol=1e-14)


# === 配置校验 ===

class ValidationReport(BaseModel):
    """校验结果：结构错误、规则警告与说明"""

    config: Optional[MarketConfig] = None
    errors: List[Tuple[str, str]] = Field(default_factory=list)
    warnings: List[Tuple[str, str]] = Field(default_factory=list)
    notes: List[str] = Field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors and self.config is not None


def _error_path(loc: Tuple[Any, ...]) -> str:
    parts = []
    for item in loc:
        if isinstance(item, int):
            parts.append(f"[{item}]")
        elif item in ("box", "linear"):
            # 判别联合的标签不属于字段路径
            continue
        else:
            parts.append(("." if parts else "") + str(item))
    return "".join(parts) or "<root>"


def validate_market(config: Union[MarketConfig, Dict[str, Any]]) -> ValidationReport:
    """
    校验市场配置

    结构错误（字段非法、没有在位者、重复 id、客户类顺序）作为 errors 返回；
    均衡分析所需的规则假设只作为 warnings 报告。
    """
    report = ValidationReport()

    if isinstance(config, MarketConfig):
        market = config
    else:
        try:
            market = MarketConfig.model_validate(config)
        except ValidationError as e:
            report.errors = [(_error_path(err["loc"]), err["msg"]) for err in e.errors()]
            return report

    # 1. 结构检查
    if not market.incumbents:
        report.errors.append(("providers", "at least one incumbent is required"))
    ids = [sp.id for sp in market.providers]
    for i, sp_id in enumerate(ids):
        if ids.index(sp_id) != i:
            report.errors.append((f"providers[{i}].id", f"duplicate provider id '{sp_id}'"))
    if len(market.classes) == 2 and market.classes[0].weight <= market.classes[1].weight:
        report.errors.append(("classes", "two classes must be ordered high-first (weight_h > weight_l)"))
    if report.errors:
        return report

    report.config = market

    # 2. 规则假设
    if len(market.providers) < 2:
        report.warnings.append(("providers", "fewer than two providers: zero unlicensed price is not implied"))

    band = market.unlicensed
    reference = market.classes[0]
    total_mass = sum(c.demand.max_mass for c in market.classes)
    for i, sp in enumerate(market.providers):
        if not sp.is_incumbent:
            continue
        if not band.is_absent and not band.evaluate(total_mass) > sp.licensed.offset:
            report.warnings.append((f"providers[{i}].licensed", "g(Q) <= l(0): unlicensed band never congests past the licensed band"))
        if not sp.licensed.evaluate(total_mass) > band.latency.offset:
            report.warnings.append((f"providers[{i}].licensed", "l(Q) <= g(0): licensed band never congests past the unlicensed band"))

    if market.is_homogeneous and isinstance(reference.demand, BoxDemand) and len(market.incumbents) == 1:
        latency = market.incumbents[0].licensed
        demand = reference.demand
        marginal_at_full = demand.valuation - reference.weight * (latency.evaluate(demand.mass) + demand.mass * latency.derivative(demand.mass))
        if marginal_at_full > 1e-12:
            report.warnings.append(("classes[0].demand", "monopoly serves all demand at C=0; the capacity threshold regime does not apply"))
        else:
            report.notes.append("partial coverage at C=0")

    if len(market.classes) == 2:
        high, low = market.classes
        for i, sp in enumerate(market.providers):
            if sp.is_incumbent and high.demand.choke_price < high.weight * sp.licensed.offset:
                report.warnings.append((f"providers[{i}].licensed", "P_h(0) < weight_h * l(0): high class never served on the licensed band"))
        if high.demand.choke_price <= low.demand.choke_price:
            report.warnings.append(("classes", "high class valuation does not exceed the low class valuation"))
        if high.demand.max_mass >= low.demand.max_mass:
            report.warnings.append(("classes", "high class mass is not smaller than the low class mass"))

    for path, message in report.warnings:
        logger.warning(f"[Model] {path}: {message}")
    return report


def load_market(source: Union[str, Path, Dict[str, Any], MarketConfig]) -> MarketConfig:
    """从 JSON 文件或字典读取市场配置，结构错误抛出 MarketConfigError"""
    if isinstance(source, MarketConfig):
        data: Any = source
    elif isinstance(source, dict):
        data = source
    else:
        try:
            with open(source, "r", encoding="utf-8") as f:
                data = json.load(f)
        except json.JSONDecodeError as e:
            raise MarketConfigError([("<root>", f"malformed JSON at line {e.lineno} column {e.colno}: {e.msg}")]) from e

    report = validate_market(data)
    if not report.ok:
        raise MarketConfigError(report.errors)
    return report.config
