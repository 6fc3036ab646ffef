"""
Incumbent revenue maximization against a fixed competitive environment.

Unlicensed prices are pinned at zero.  Three paths are provided: the closed
form for one incumbent facing one Box class, exact maximization over the
piecewise-quadratic revenue for linear latencies, and a bounded scalar search
(or grid fallback) for convex latencies.
"""

import logging
import math
from enum import Enum
from typing import Callable, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field
from scipy.optimize import minimize_scalar

from .config.solver_config import SolverSettings, get_settings
from .exceptions import RegimeError
from .metrics import revenues
from .model import BoxDemand, MarketConfig, monopoly_mass
from .wardrop import Allocation, PriceProfile, allocate, delivered_prices, price_pieces

logger = logging.getLogger(__name__)


class Regime(str, Enum):
    SERVE_BOTH = "ServeBothTypes"
    SERVE_HIGH = "ServeHighOnly"
    SERVE_LOW = "ServeLowOnly"
    BOUNDARY = "BoundaryDeliveredW"
    INTERIOR = "Interior"

    @property
    def is_coverage(self) -> bool:
        return self in (Regime.SERVE_BOTH, Regime.SERVE_HIGH, Regime.SERVE_LOW)


class BestResponse(BaseModel):
    price: float
    regime: Regime
    revenue: float
    method: str
    tied: List[Regime] = Field(default_factory=list)
    concave: Optional[bool] = None


# === 收入求值 ===

def revenue_at_price(market: MarketConfig, C: Optional[float], prices: PriceProfile,
                     sp_id: Optional[str] = None, settings: Optional[SolverSettings] = None) -> float:
    """给定完整价格组合时某一服务商（默认第一个在位者）的收入"""
    if C is not None:
        market = market.with_capacity(C)
    sp_id = sp_id or market.incumbents[0].id
    allocation = allocate(market, prices, settings)
    return revenues(prices, allocation).get(sp_id, 0.0)


def _coverage_regime(allocation: Allocation, sp_id: str) -> Optional[Regime]:
    masses = allocation.licensed.get(sp_id, [0.0, 0.0])
    high, low = masses[0] > 1e-12, masses[1] > 1e-12
    if high and low:
        return Regime.SERVE_BOTH
    if high:
        return Regime.SERVE_HIGH
    if low:
        return Regime.SERVE_LOW
    return None


def classify_regime(market: MarketConfig, prices: PriceProfile, sp_id: str, settings: SolverSettings) -> Tuple[Regime, Allocation]:
    allocation = allocate(market, prices, settings)
    if len(market.classes) == 2:
        return _coverage_regime(allocation, sp_id) or Regime.SERVE_HIGH, allocation
    delivered = delivered_prices(market, prices, allocation)
    choke = market.classes[0].demand.choke_price
    regime = Regime.BOUNDARY if delivered[0] >= choke - 1e-9 else Regime.INTERIOR
    return regime, allocation


# === 同质闭式解 ===

def monopoly_outcome(market: MarketConfig) -> Tuple[float, float]:
    """C = 0 时单一在位者面对 Box 需求的 (价格, 服务量)"""
    if len(market.incumbents) != 1 or not market.is_homogeneous or not isinstance(market.classes[0].demand, BoxDemand):
        raise RegimeError("monopoly outcome needs one incumbent and one Box class")
    latency = market.incumbents[0].licensed
    cls = market.classes[0]
    x_star = monopoly_mass(latency, cls.demand.valuation, cls.weight, cls.demand.mass)
    return cls.demand.valuation - cls.weight * latency.evaluate(x_star), x_star


def best_response_homogeneous(market: MarketConfig, C: float) -> BestResponse:
    """
    单一在位者、单一 Box 客户类、线性延迟的闭式最优反应

    C <= C1 时保持垄断价格；否则比较内点候选 λ((T2-T1)+αQ)/2
    与交付价格恰为 W 的边界候选，取较小者。
    """
    m = market.with_capacity(C)
    if len(m.incumbents) != 1:
        raise RegimeError("closed form needs exactly one incumbent")
    if not m.is_homogeneous or not isinstance(m.classes[0].demand, BoxDemand):
        raise RegimeError("closed form needs one Box class")
    if not m.all_linear:
        raise RegimeError("closed form needs linear latencies")

    cls = m.classes[0]
    lam, W, Q = cls.weight, cls.demand.valuation, cls.demand.mass
    T1, b = m.incumbents[0].licensed.offset, m.incumbents[0].licensed.slope
    band = m.unlicensed
    T2 = band.latency.offset

    # 1. 垄断结果
    x_star = monopoly_mass(m.incumbents[0].licensed, W, lam, math.inf)
    if x_star > Q + 1e-12:
        raise RegimeError("monopoly serves all demand at C=0")
    if x_star <= 0:
        raise RegimeError("licensed band cannot attract customers")
    p_mono = W - lam * (T1 + b * x_star)
    if band.is_absent or W <= lam * T2:
        return BestResponse(price=p_mono, regime=Regime.BOUNDARY, revenue=p_mono * x_star, method="closed-form")

    alpha = band.effective_slope
    x_w_at_w = (W / lam - T2) / alpha
    if x_star + x_w_at_w <= Q:
        return BestResponse(price=p_mono, regime=Regime.BOUNDARY, revenue=p_mono * x_star, method="closed-form")

    # 2. 全覆盖区域：内点候选与边界候选
    x_int = ((T2 - T1) + alpha * Q) / (2.0 * (b + alpha))
    p_int = lam * ((T2 - T1) + alpha * Q) / 2.0
    if x_int <= 0:
        raise RegimeError("licensed band priced out by the unlicensed band")
    x_bound = Q - x_w_at_w
    if x_bound < 0:
        return BestResponse(price=p_int, regime=Regime.INTERIOR, revenue=p_int * x_int, method="closed-form")
    p_bound = W - lam * (T1 + b * x_bound)

    if p_int < p_bound:
        return BestResponse(price=p_int, regime=Regime.INTERIOR, revenue=p_int * x_int, method="closed-form")
    return BestResponse(price=p_bound, regime=Regime.BOUNDARY, revenue=p_bound * x_bound, method="closed-form")


# === 分段二次收入的精确最大化 ===

def _maximize_over_pieces(market: MarketConfig, prices: PriceProfile, sp_id: str,
                          settings: SolverSettings) -> BestResponse:
    pieces = price_pieces(market, prices, sp_id, settings)
    candidates = sorted({round(p, 15): piece.revenue(p) for piece in pieces for p in piece.candidates()}.items())
    if not candidates or max(r for _, r in candidates) <= 1e-15:
        regime = Regime.SERVE_HIGH if len(market.classes) == 2 else Regime.BOUNDARY
        return BestResponse(price=math.inf, regime=regime, revenue=0.0, method="pieces")

    best_revenue = max(r for _, r in candidates)
    tie_tol = 1e-12 * max(1.0, best_revenue)
    tied_prices = [p for p, r in candidates if r >= best_revenue - tie_tol]

    # 重新用 Wardrop 求解器核对胜出价格
    price = tied_prices[0]
    trial = prices.with_licensed(sp_id, price)
    regime, allocation = classify_regime(market, trial, sp_id, settings)
    verified = revenues(trial, allocation).get(sp_id, 0.0)
    if abs(verified - best_revenue) > 1e-9 * max(1.0, best_revenue):
        logger.warning(f"[BestResponse] 分段收入 {best_revenue:.12g} 与 Wardrop 复核 {verified:.12g} 不一致，逐点复核")
        checked = [(revenue_at_price(market, None, prices.with_licensed(sp_id, p), sp_id, settings), -p) for p, _ in candidates]
        verified, neg_price = max(checked)
        price = -neg_price
        trial = prices.with_licensed(sp_id, price)
        regime, allocation = classify_regime(market, trial, sp_id, settings)
        tied_prices = [price]

    tied = []
    for other in tied_prices[1:]:
        if other - price > 1e-9:
            other_regime, _ = classify_regime(market, prices.with_licensed(sp_id, other), sp_id, settings)
            if other_regime != regime and other_regime not in tied:
                tied.append(other_regime)
    if tied:
        logger.info(f"[BestResponse] 价格 {price:.6g} 处收入并列，其他区制: {[r.value for r in tied]}")
    return BestResponse(price=price, regime=regime, revenue=verified, method="pieces", tied=tied)


def best_response_heterogeneous(market: MarketConfig, C: float,
                                settings: Optional[SolverSettings] = None) -> BestResponse:
    """
    单一在位者面对高低两类 Box 客户的最优反应

    每个 Wardrop 模式上收入是价格的二次函数，取各段顶点与端点中的全局最优，
    并列时取较低价格。在位者无人可服务时返回价格 +inf、收入 0。
    """
    settings = settings or get_settings()
    m = market.with_capacity(C)
    if len(m.incumbents) != 1 or len(m.classes) != 2:
        raise RegimeError("heterogeneous path needs one incumbent and two classes")
    if not all(isinstance(c.demand, BoxDemand) for c in m.classes) or not m.all_linear:
        raise RegimeError("heterogeneous path needs Box demand and linear latencies")

    sp_id = m.incumbents[0].id
    response = _maximize_over_pieces(m, PriceProfile.pinned(m, {sp_id: 0.0}), sp_id, settings)
    if response.regime == Regime.SERVE_LOW:
        logger.warning(f"[BestResponse] C={C:g} 时只服务低类客户的区制胜出")
    return response


# === 通用路径 ===

def concavity_precondition(market: MarketConfig, C: Optional[float] = None, sp_id: Optional[str] = None,
                           settings: Optional[SolverSettings] = None) -> bool:
    """
    检查 x * (g(C, M - x) - l(x)) 在 [0, M] 上是否凹（二阶差分）

    M 为各客户类的最大质量之和；频段不存在时退化为垄断情形，总是成立。
    """
    settings = settings or get_settings()
    m = market.with_capacity(C) if C is not None else market
    sp = m.provider(sp_id) if sp_id else m.incumbents[0]
    band = m.unlicensed
    if band.is_absent:
        return True

    total = sum(c.demand.max_mass for c in m.classes)
    x = np.linspace(0.0, total, settings.concavity_mesh)
    offset, slope, d = sp.licensed.offset, sp.licensed.slope, sp.licensed.exponent
    g = band.latency.offset + band.effective_slope * (total - x) ** band.latency.exponent
    h = x * (g - (offset + slope * x ** d))
    second = h[2:] - 2.0 * h[1:-1] + h[:-2]
    scale = max(1.0, float(np.max(np.abs(h))))
    return bool(np.all(second <= 1e-10 * scale))


def _grid_argmax(objective: Callable[[float], float], lo: float, hi: float,
                 points: int, refinements: int) -> Tuple[float, float]:
    """稠密网格搜索并在最优点附近细化，并列时取最低价格"""
    best_p, best_v = lo, -math.inf
    for _ in range(refinements + 1):
        grid = np.linspace(lo, hi, points)
        values = np.array([objective(p) for p in grid])
        i = int(np.argmax(values))
        if values[i] > best_v:
            best_p, best_v = float(grid[i]), float(values[i])
        step = (hi - lo) / (points - 1)
        lo, hi = max(lo, best_p - step), min(hi, best_p + step)
        if hi <= lo:
            break
    return best_p, best_v


def best_response_generic(market: MarketConfig, C: Optional[float], rival_prices: Optional[PriceProfile] = None,
                          sp_id: Optional[str] = None, settings: Optional[SolverSettings] = None) -> BestResponse:
    """
    对固定对手价格的单一在位者最优反应

    线性延迟下收入分段二次，直接精确求解；凸延迟下先检查凹性前提，
    成立则做有界黄金分割搜索，否则退回稠密网格加细化。
    """
    settings = settings or get_settings()
    m = market.with_capacity(C) if C is not None else market
    sp_id = sp_id or m.incumbents[0].id
    base = PriceProfile.pinned(m, {sp.id: 0.0 for sp in m.incumbents})
    if rival_prices is not None:
        base = PriceProfile(licensed={**base.licensed, **rival_prices.licensed},
                            unlicensed=rival_prices.unlicensed or base.unlicensed)
    base = base.with_licensed(sp_id, 0.0)
    concave = concavity_precondition(m, None, sp_id, settings)

    if m.all_linear:
        response = _maximize_over_pieces(m, base, sp_id, settings)
        return response.model_copy(update={"concave": concave})

    def revenue(p: float) -> float:
        return revenue_at_price(m, None, base.with_licensed(sp_id, p), sp_id, settings)

    p_max = max(c.demand.choke_price for c in m.classes)
    if concave:
        result = minimize_scalar(lambda p: -revenue(p), bounds=(0.0, p_max), method="bounded",
                                 options={"xatol": settings.golden_tol})
        price, value, method = float(result.x), -float(result.fun), "golden"
    else:
        logger.info(f"[BestResponse] 凹性前提不成立，使用网格搜索 ({settings.fallback_grid_points} 点)")
        price, value = _grid_argmax(revenue, 0.0, p_max, settings.fallback_grid_points, settings.fallback_refinements)
        method = "grid"

    if value <= 1e-15:
        regime = Regime.SERVE_HIGH if len(m.classes) == 2 else Regime.BOUNDARY
        return BestResponse(price=math.inf, regime=regime, revenue=0.0, method=method, concave=concave)
    regime, _ = classify_regime(m, base.with_licensed(sp_id, price), sp_id, settings)
    return BestResponse(price=price, regime=regime, revenue=value, method=method, concave=concave)
