"""
Welfare, consumer surplus and revenue functionals over allocations.
"""

import logging
import math
from typing import Dict

from pydantic import BaseModel

from .model import MarketConfig
from .wardrop import Allocation, DeliveredPrices, PriceProfile

logger = logging.getLogger(__name__)


class WelfareReport(BaseModel):
    social_welfare: float
    consumer_surplus: float
    revenues: Dict[str, float]
    total_congestion_cost: float

    @property
    def total_revenue(self) -> float:
        return float(sum(self.revenues.values()))

    @property
    def identity_gap(self) -> float:
        """SW - (CS + Σπ)，在 Wardrop 分配上应为 0"""
        return self.social_welfare - self.consumer_surplus - self.total_revenue


def total_congestion_cost(market: MarketConfig, allocation: Allocation) -> float:
    """Σ_t λ_t (Σ_i x_i^t l_i(x_i) + X^{wt} g(X^w))"""
    cost = 0.0
    for sp in market.incumbents:
        load = allocation.licensed_load(sp.id)
        if load <= 0:
            continue
        latency = sp.licensed.evaluate(load)
        for t, cls in enumerate(market.classes):
            cost += cls.weight * allocation.licensed[sp.id][t] * latency

    x_w = allocation.unlicensed_total
    if x_w > 0:
        g = market.unlicensed.evaluate(x_w)
        for t, cls in enumerate(market.classes):
            cost += cls.weight * allocation.unlicensed_by_class(t) * g
    return cost


def social_welfare(market: MarketConfig, allocation: Allocation) -> float:
    """总消费价值减去加权拥塞成本"""
    gross = sum(cls.demand.gross_value(allocation.served(t)) for t, cls in enumerate(market.classes))
    return gross - total_congestion_cost(market, allocation)


def consumer_surplus(market: MarketConfig, allocation: Allocation, delivered: DeliveredPrices) -> float:
    """Σ_t ∫_0^{Q_t} (P_t(q) - Δ_t) dq，未被服务的类贡献 0"""
    surplus = 0.0
    for t, cls in enumerate(market.classes):
        q = allocation.served(t)
        if q <= 0 or not math.isfinite(delivered[t]):
            continue
        surplus += cls.demand.gross_value(q) - delivered[t] * q
    return surplus


def revenues(prices: PriceProfile, allocation: Allocation) -> Dict[str, float]:
    """π_i = p_i x_i + p_i^w x_i^w"""
    result: Dict[str, float] = {}
    for sp_id in sorted(set(allocation.licensed) | set(allocation.unlicensed)):
        x, x_w = allocation.provider_mass(sp_id)
        total = 0.0
        if x > 0:
            total += prices.licensed.get(sp_id, 0.0) * x
        if x_w > 0:
            total += prices.unlicensed.get(sp_id, 0.0) * x_w
        result[sp_id] = total
    return result


def welfare_report(market: MarketConfig, prices: PriceProfile, allocation: Allocation,
                   delivered: DeliveredPrices) -> WelfareReport:
    report = WelfareReport(
        social_welfare=social_welfare(market, allocation),
        consumer_surplus=consumer_surplus(market, allocation, delivered),
        revenues=revenues(prices, allocation),
        total_congestion_cost=total_congestion_cost(market, allocation),
    )
    if abs(report.identity_gap) > 1e-7:
        logger.warning(f"[Metrics] 会计恒等式偏差 {report.identity_gap:.3e}")
    return report
