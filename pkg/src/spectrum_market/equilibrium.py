"""
Nash equilibrium computation for the supported market families and
equilibrium verification.
"""

import logging
import math
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

from pydantic import BaseModel, Field

from .best_response import (
    Regime,
    best_response_generic,
    best_response_heterogeneous,
    best_response_homogeneous,
    classify_regime,
)
from .config.solver_config import SolverSettings, get_settings
from .exceptions import ConvergenceError, RegimeError
from .metrics import WelfareReport, welfare_report
from .model import BoxDemand, MarketConfig
from .oracle import Certificate, GridSpec, certify_equilibrium
from .wardrop import Allocation, DeliveredPrices, PriceProfile, allocate, delivered_prices, wardrop_residual

logger = logging.getLogger(__name__)

CLASS_SUFFIXES = ("h", "l")


class Stage(str, Enum):
    """两类客户市场中频段与客户类的对应关系"""

    MONOPOLY = "Monopoly"
    COMPETE_LOW = "CompeteLow"
    SORTED = "Sorted"
    COMPETE_HIGH = "CompeteHigh"
    UNLICENSED_ONLY = "UnlicensedOnly"


class Diagnostics(BaseModel):
    iterations: int = 0
    wardrop_residual: float = 0.0
    deviation_margin: Optional[float] = None
    certificate: Optional[Certificate] = None
    flags: List[str] = Field(default_factory=list)
    tied_regimes: List[Regime] = Field(default_factory=list)
    method: str = ""
    trace: List[float] = Field(default_factory=list)


class EquilibriumResult(BaseModel):
    capacity: float
    prices: PriceProfile
    allocation: Allocation
    delivered: DeliveredPrices
    report: WelfareReport
    regime: Regime
    stage: Optional[Stage] = None
    diagnostics: Diagnostics = Field(default_factory=Diagnostics)

    def with_certificate(self, certificate: Certificate) -> "EquilibriumResult":
        diagnostics = self.diagnostics.model_copy(update={
            "certificate": certificate,
            "deviation_margin": -certificate.max_gain,
        })
        return self.model_copy(update={"diagnostics": diagnostics})

    def to_row(self, market: MarketConfig) -> Dict[str, Any]:
        """扫描 CSV 的一行，列顺序固定"""
        row: Dict[str, Any] = {"C": self.capacity}
        for sp in market.incumbents:
            row[f"price_{sp.id}"] = self.prices.licensed.get(sp.id, math.inf)
        row["p_w"] = self.prices.min_unlicensed()
        n = len(market.classes)
        for prefix, getter in (("x_licensed", self.allocation.licensed_by_class),
                               ("X_w", self.allocation.unlicensed_by_class)):
            for t, suffix in enumerate(CLASS_SUFFIXES):
                row[f"{prefix}_{suffix}"] = getter(t) if t < n else math.nan
        for t, suffix in enumerate(CLASS_SUFFIXES):
            row[f"delivered_{suffix}"] = self.delivered[t] if t < n else math.nan
        row["SW"] = self.report.social_welfare
        row["CS"] = self.report.consumer_surplus
        for sp in market.providers:
            row[f"revenue_{sp.id}"] = self.report.revenues.get(sp.id, 0.0)
        row["regime"] = self.regime.value
        row["stage"] = self.stage.value if self.stage else ""
        return row


# === 组装 ===

def market_stage(market: MarketConfig, allocation: Allocation) -> Stage:
    """两类客户的阶段：竞争低类、分离、竞争高类"""
    eps = 1e-12
    if market.unlicensed.is_absent or allocation.unlicensed_total <= eps:
        return Stage.MONOPOLY
    x_h, x_l = allocation.licensed_by_class(0), allocation.licensed_by_class(1)
    w_h, w_l = allocation.unlicensed_by_class(0), allocation.unlicensed_by_class(1)
    if x_h + x_l <= eps:
        return Stage.UNLICENSED_ONLY
    if x_h > eps and w_h > eps:
        return Stage.COMPETE_HIGH
    if x_l > eps and w_l > eps:
        return Stage.COMPETE_LOW
    return Stage.SORTED


def _assemble(market: MarketConfig, prices: PriceProfile, regime: Regime, settings: SolverSettings,
              diagnostics: Diagnostics) -> EquilibriumResult:
    allocation = allocate(market, prices, settings)
    delivered = delivered_prices(market, prices, allocation)
    report = welfare_report(market, prices, allocation, delivered)
    diagnostics.wardrop_residual = wardrop_residual(market, prices, allocation)
    stage = market_stage(market, allocation) if len(market.classes) == 2 else None
    return EquilibriumResult(
        capacity=market.capacity,
        prices=prices,
        allocation=allocation,
        delivered=delivered,
        report=report,
        regime=regime,
        stage=stage,
        diagnostics=diagnostics,
    )


def _warn_single_provider(market: MarketConfig, diagnostics: Diagnostics) -> None:
    if not market.entrants and len(market.providers) < 2:
        logger.warning("[Equilibrium] 只有一个服务商，非授权价格为 0 不再成立")
        diagnostics.flags.append("single provider")


# === 求解器 ===

def solve_homogeneous_single(market: MarketConfig, settings: Optional[SolverSettings] = None) -> EquilibriumResult:
    """一个在位者、单一 Box 客户类：闭式均衡，假设不成立时退回通用路径"""
    settings = settings or get_settings()
    try:
        response = best_response_homogeneous(market, market.capacity)
    except RegimeError as e:
        logger.warning(f"[Equilibrium] 闭式解不适用 ({e.reason})，改用通用路径")
        result = solve_generic(market, settings)
        result.diagnostics.flags.append("fallback to generic")
        return result

    diagnostics = Diagnostics(iterations=1, method=response.method)
    _warn_single_provider(market, diagnostics)
    prices = PriceProfile.pinned(market, {market.incumbents[0].id: response.price})
    return _assemble(market, prices, response.regime, settings, diagnostics)


def solve_heterogeneous_single(market: MarketConfig, settings: Optional[SolverSettings] = None) -> EquilibriumResult:
    """一个在位者、高低两类 Box 客户：在位者最优反应即均衡"""
    settings = settings or get_settings()
    try:
        response = best_response_heterogeneous(market, market.capacity, settings)
    except RegimeError as e:
        logger.warning(f"[Equilibrium] 异质路径不适用 ({e.reason})，改用通用路径")
        result = solve_generic(market, settings)
        result.diagnostics.flags.append("fallback to generic")
        return result

    diagnostics = Diagnostics(iterations=1, method=response.method, tied_regimes=list(response.tied))
    _warn_single_provider(market, diagnostics)
    if response.regime == Regime.SERVE_LOW:
        diagnostics.flags.append("ServeLowOnly won")
    if response.tied:
        diagnostics.flags.append("tied regimes")
    prices = PriceProfile.pinned(market, {market.incumbents[0].id: response.price})
    return _assemble(market, prices, response.regime, settings, diagnostics)


def _identical_incumbents(market: MarketConfig) -> bool:
    incumbents = market.incumbents
    return len(incumbents) >= 2 and all(sp.licensed == incumbents[0].licensed for sp in incumbents)


def solve_symmetric_N(market: MarketConfig, settings: Optional[SolverSettings] = None,
                      initial_price: Optional[float] = None) -> EquilibriumResult:
    """
    N 个相同在位者的对称均衡

    对共同授权价格做阻尼同步最优反应迭代：每一步第一个在位者对其余在位者
    处于当前价格时做最优反应，新价格为 p + damping * (BR(p) - p)。
    """
    settings = settings or get_settings()
    if not _identical_incumbents(market) or not market.is_homogeneous:
        raise RegimeError("symmetric path needs N >= 2 identical incumbents and one class")

    incumbents = market.incumbents
    choke = market.classes[0].demand.choke_price
    price = choke / 2.0 if initial_price is None else float(initial_price)
    trace = [price]
    response = None

    for iteration in range(1, settings.max_iterations + 1):
        rivals = PriceProfile.pinned(market, {sp.id: price for sp in incumbents})
        response = best_response_generic(market, None, rivals, incumbents[0].id, settings)
        target = response.price if math.isfinite(response.price) else choke
        updated = price + settings.damping * (target - price)
        trace.append(updated)
        change = abs(updated - price)
        price = updated
        if change < settings.convergence_tol:
            break
    else:
        raise ConvergenceError(f"symmetric iteration did not converge in {settings.max_iterations} steps", trace)

    logger.info(f"[Equilibrium] 对称均衡 C={market.capacity:g}: p={price:.10g}, 迭代 {iteration} 次")
    diagnostics = Diagnostics(iterations=iteration, method=response.method, trace=trace[-10:])
    prices = PriceProfile.pinned(market, {sp.id: price for sp in incumbents})
    regime, _ = classify_regime(market, prices, incumbents[0].id, settings)
    return _assemble(market, prices, regime, settings, diagnostics)


def solve_generic(market: MarketConfig, settings: Optional[SolverSettings] = None,
                  initial_prices: Optional[Dict[str, float]] = None) -> EquilibriumResult:
    """
    所有在位者的阻尼 Gauss-Seidel 最优反应迭代，非授权价格固定为 0

    对手价格不变时最优反应被缓存，单一在位者只需一次最优反应。
    """
    settings = settings or get_settings()
    incumbents = market.incumbents
    if not incumbents:
        raise RegimeError("at least one incumbent is required")
    choke = max(c.demand.choke_price for c in market.classes)
    prices = {sp.id: choke / 2.0 for sp in incumbents}
    if initial_prices:
        prices.update({k: float(v) for k, v in initial_prices.items() if k in prices})

    cache: Dict[Tuple[str, Tuple[Tuple[str, float], ...]], Any] = {}
    trace: List[float] = [prices[incumbents[0].id]]
    last = {}
    for iteration in range(1, settings.max_iterations + 1):
        max_change = 0.0
        for sp in incumbents:
            key = (sp.id, tuple((k, round(v, 14)) for k, v in sorted(prices.items()) if k != sp.id))
            if key not in cache:
                cache[key] = best_response_generic(market, None, PriceProfile.pinned(market, prices), sp.id, settings)
            response = cache[key]
            last[sp.id] = response
            target = response.price if math.isfinite(response.price) else choke
            updated = prices[sp.id] + settings.damping * (target - prices[sp.id])
            max_change = max(max_change, abs(updated - prices[sp.id]))
            prices[sp.id] = updated
        trace.append(prices[incumbents[0].id])
        if max_change < settings.convergence_tol:
            break
    else:
        raise ConvergenceError(f"best-response iteration did not converge in {settings.max_iterations} steps", trace)

    # 卖不出去的在位者价格记为 +inf
    for sp in incumbents:
        if not math.isfinite(last[sp.id].price):
            prices[sp.id] = math.inf

    diagnostics = Diagnostics(iterations=iteration, method=last[incumbents[0].id].method, trace=trace[-10:])
    _warn_single_provider(market, diagnostics)
    profile = PriceProfile.pinned(market, prices)
    regime, _ = classify_regime(market, profile, incumbents[0].id, settings)
    return _assemble(market, profile, regime, settings, diagnostics)


def solve(market: MarketConfig, settings: Optional[SolverSettings] = None) -> EquilibriumResult:
    """按市场类型选择求解器"""
    n_incumbents = len(market.incumbents)
    box = all(isinstance(c.demand, BoxDemand) for c in market.classes)
    if n_incumbents == 1 and market.is_homogeneous and box and market.all_linear:
        return solve_homogeneous_single(market, settings)
    if n_incumbents == 1 and len(market.classes) == 2 and box and market.all_linear:
        return solve_heterogeneous_single(market, settings)
    if _identical_incumbents(market) and market.is_homogeneous:
        return solve_symmetric_N(market, settings)
    return solve_generic(market, settings)


# === 验证 ===

class DeviationReport(BaseModel):
    certificate: Certificate
    unlicensed_prices_zero: bool
    no_service_ok: Optional[bool] = None
    passed: bool


def verify_equilibrium(market: MarketConfig, result: EquilibriumResult, grid_resolution: Optional[float] = None,
                       settings: Optional[SolverSettings] = None) -> DeviationReport:
    """
    单边偏离检验与零非授权价格检查

    非授权频段未被使用时，额外检查每类客户满足 λ_t g(0) >= P_t(Q_t)。
    """
    settings = settings or get_settings()
    resolution = grid_resolution or settings.verification_resolution
    m = market.with_capacity(result.capacity)
    p_max = max(c.demand.choke_price for c in m.classes)
    certificate = certify_equilibrium(m, result, GridSpec.from_resolution(0.0, p_max, resolution), settings)

    prices_zero = all(result.prices.unlicensed.get(sp.id, math.inf) == 0.0 for sp in m.providers)
    no_service_ok = None
    if result.allocation.unlicensed_total <= 1e-12:
        g0 = m.unlicensed.evaluate(0.0)
        no_service_ok = all(
            cls.weight * g0 >= cls.demand.inverse(result.allocation.served(t)) - 1e-12
            for t, cls in enumerate(m.classes)
        )
    lemma_ok = prices_zero or bool(no_service_ok)
    passed = certificate.passed(settings.deviation_tol) and lemma_ok
    if not passed:
        logger.warning(f"[Equilibrium] 验证失败: 最大偏离收益 {certificate.max_gain:.3e}, 非授权价格为零 {prices_zero}")
    return DeviationReport(
        certificate=certificate,
        unlicensed_prices_zero=prices_zero,
        no_service_ok=no_service_ok,
        passed=passed,
    )


def compare_delivered_prices(market: MarketConfig, C: float,
                             settings: Optional[SolverSettings] = None) -> Tuple[float, float]:
    """
    单一客户类市场在 C = 0 与给定 C 下的均衡交付价格 (Δ0, Δ1)

    未被服务时交付价格按估值上限截断。
    """
    if not market.is_homogeneous:
        raise RegimeError("delivered price comparison needs one class")
    choke = market.classes[0].demand.choke_price
    levels = []
    for capacity in (0.0, C):
        result = solve(market.with_capacity(capacity), settings)
        levels.append(min(result.delivered[0], choke))
    return levels[0], levels[1]
