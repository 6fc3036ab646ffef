"""
Brute-force reference implementations.

Grid best responses, a discretized Wardrop allocation found by greedy descent
on the congestion-game potential, and equilibrium certificates built from
unilateral price deviations.  These are deliberately simple and slow.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, model_validator

from .best_response import revenue_at_price
from .config.solver_config import SolverSettings, get_settings
from .metrics import revenues
from .model import MarketConfig
from .wardrop import Allocation, PriceProfile, allocate

logger = logging.getLogger(__name__)


class GridSpec(BaseModel):
    lo: float = 0.0
    hi: float
    points: int = Field(..., ge=2)
    refinement_passes: int = Field(0, ge=0)

    @model_validator(mode="after")
    def _check_bounds(self) -> "GridSpec":
        if not self.lo < self.hi:
            raise ValueError(f"grid requires lo < hi, got [{self.lo}, {self.hi}]")
        return self

    @classmethod
    def from_resolution(cls, lo: float, hi: float, resolution: float, refinement_passes: int = 0) -> "GridSpec":
        points = max(2, int(math.ceil((hi - lo) / resolution - 1e-9)) + 1)
        return cls(lo=lo, hi=hi, points=points, refinement_passes=refinement_passes)

    @property
    def step(self) -> float:
        return (self.hi - self.lo) / (self.points - 1)


class Certificate(BaseModel):
    """单边偏离检验结果"""

    max_gain: float
    worst_deviator: Optional[str] = None
    gains: Dict[str, float] = Field(default_factory=dict)
    resolution: float

    def passed(self, tol: float = 1e-6) -> bool:
        return self.max_gain <= tol


def _scan(objective: Callable[[float], float], grid: GridSpec, workers: int = 1) -> Tuple[float, float]:
    """在网格上求最大值并细化，并列时取最低价格"""
    lo, hi = grid.lo, grid.hi
    best_p, best_v = lo, -math.inf
    for _ in range(grid.refinement_passes + 1):
        xs = np.linspace(lo, hi, grid.points)
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                values = np.array(list(pool.map(objective, xs)))
        else:
            values = np.array([objective(x) for x in xs])
        i = int(np.argmax(values))
        if values[i] > best_v:
            best_p, best_v = float(xs[i]), float(values[i])
        step = (hi - lo) / (grid.points - 1)
        lo, hi = max(grid.lo, best_p - step), min(grid.hi, best_p + step)
        if hi <= lo:
            break
    return best_p, best_v


def grid_best_response(market: MarketConfig, C: Optional[float], rival_prices: PriceProfile, grid: GridSpec,
                       sp_id: Optional[str] = None, settings: Optional[SolverSettings] = None,
                       workers: int = 1) -> Tuple[float, float]:
    """
    穷举授权价格网格上的收入，返回 (价格, 收入)

    rival_prices 中该服务商自己的授权价格被网格值替换。
    """
    m = market.with_capacity(C) if C is not None else market
    sp_id = sp_id or m.incumbents[0].id

    def revenue(p: float) -> float:
        return revenue_at_price(m, None, rival_prices.with_licensed(sp_id, p), sp_id, settings)

    return _scan(revenue, grid, workers)


def grid_unlicensed_deviation(market: MarketConfig, prices: PriceProfile, grid: GridSpec, sp_id: str,
                              settings: Optional[SolverSettings] = None, workers: int = 1) -> Tuple[float, float]:
    """穷举某一服务商的非授权价格偏离，返回 (价格, 收入)"""

    def revenue(p: float) -> float:
        return revenue_at_price(market, None, prices.with_unlicensed(sp_id, p), sp_id, settings)

    return _scan(revenue, grid, workers)


# === 离散化 Wardrop 分配 ===

def potential(market: MarketConfig, prices: PriceProfile, allocation: Allocation) -> float:
    """
    拥塞博弈势函数

    Σ_e ∫l_e + Σ_{o,t} p_o x_o^t / λ_t - Σ_t U_t(Q_t) / λ_t，Wardrop 分配是它的最小点。
    """
    value = 0.0
    for sp in market.incumbents:
        load = allocation.licensed_load(sp.id)
        if load > 0:
            value += sp.licensed.integral(load)
    x_w = allocation.unlicensed_total
    if x_w > 0:
        value += market.unlicensed.integral(x_w)
    for t, cls in enumerate(market.classes):
        for sp_id, masses in allocation.licensed.items():
            if masses[t] > 0:
                value += prices.licensed.get(sp_id, math.inf) * masses[t] / cls.weight
        for sp_id, masses in allocation.unlicensed.items():
            if masses[t] > 0:
                value += prices.unlicensed.get(sp_id, math.inf) * masses[t] / cls.weight
        value -= cls.demand.gross_value(allocation.served(t)) / cls.weight
    return value


def discretized_wardrop(market: MarketConfig, prices: PriceProfile, mesh: int) -> Allocation:
    """
    贪心势函数下降求离散化 Wardrop 分配

    每类客户质量按 mesh 份量化（线性需求取 A/beta），从大步长开始把份额移到
    势函数严格下降的选项，步长减半直到单份；同等改进时移向质量最少的选项。
    同一价格的非授权服务商合并为一个选项，结束后均分。
    """
    if mesh < 1:
        raise ValueError("mesh must be positive")
    classes = market.classes
    n_classes = len(classes)
    quantum = np.array([c.demand.max_mass / mesh for c in classes])
    weights = np.array([c.weight for c in classes])

    # 1. 选项：授权频段、各非授权价格水平、不购买
    options: List[Tuple[str, object, float]] = []
    for sp in market.incumbents:
        price = prices.licensed.get(sp.id, math.inf)
        if math.isfinite(price):
            options.append(("licensed", sp, price))
    if not market.unlicensed.is_absent:
        levels = sorted({p for sp_id, p in prices.unlicensed.items() if math.isfinite(p)})
        for level in levels:
            options.append(("unlicensed", level, level))
    n_opt = len(options)
    outside = n_opt

    counts = np.zeros((n_classes, n_opt + 1), dtype=np.int64)
    counts[:, outside] = mesh
    option_prices = np.array([price for _, _, price in options] + [0.0])

    def phi(state: np.ndarray) -> float:
        x = state * quantum[:, None]
        value = 0.0
        unlicensed_load = 0.0
        for o, (kind, ref, _) in enumerate(options):
            load = x[:, o].sum()
            if kind == "licensed":
                if load > 0:
                    value += ref.licensed.integral(load)
            else:
                unlicensed_load += load
        if unlicensed_load > 0:
            value += market.unlicensed.integral(unlicensed_load)
        value += float(np.sum(x[:, :n_opt] * option_prices[None, :n_opt] / weights[:, None]))
        for t, cls in enumerate(classes):
            value -= cls.demand.gross_value(x[t, :n_opt].sum()) / cls.weight
        return value

    # 2. 多尺度贪心下降
    current = phi(counts)
    step = 1 << int(math.floor(math.log2(mesh)))
    moves = 0
    while step >= 1:
        while True:
            best = None
            for t in range(n_classes):
                for a in range(n_opt + 1):
                    if counts[t, a] < step:
                        continue
                    for b in range(n_opt + 1):
                        if b == a:
                            continue
                        counts[t, a] -= step
                        counts[t, b] += step
                        delta = phi(counts) - current
                        counts[t, a] += step
                        counts[t, b] -= step
                        key = (delta, counts[:, b].sum() if b != outside else math.inf, t, a, b)
                        if delta < -1e-15 and (best is None or _better(key, best)):
                            best = key
            if best is None:
                break
            delta, _, t, a, b = best
            counts[t, a] -= step
            counts[t, b] += step
            current += delta
            moves += 1
        step //= 2
    logger.debug(f"[Oracle] 势函数下降完成: {moves} 次移动, Φ={current:.12g}")

    # 3. 转换为分配
    x = counts * quantum[:, None]
    allocation = Allocation.empty(market, pattern=f"oracle-mesh-{mesh}")
    for o, (kind, ref, price) in enumerate(options):
        if kind == "licensed":
            allocation.licensed[ref.id] = [float(v) for v in x[:, o]]
        else:
            tied = [sp.id for sp in market.providers if prices.unlicensed.get(sp.id, math.inf) == price]
            for sp_id in tied:
                allocation.unlicensed[sp_id] = [float(v) / len(tied) for v in x[:, o]]
    return allocation


def _better(key: tuple, best: tuple) -> bool:
    """改进量更大者优先；改进量相同时移向质量更少的选项"""
    if key[0] < best[0] - 1e-15:
        return True
    if abs(key[0] - best[0]) <= 1e-15:
        return key[1] < best[1]
    return False


# === 均衡证书 ===

def certify_equilibrium(market: MarketConfig, result, grids: Optional[GridSpec] = None,
                        settings: Optional[SolverSettings] = None) -> Certificate:
    """
    对每个服务商做授权与非授权价格的单边偏离检验

    Args:
        market: 市场配置（容量取自 result）
        result: 均衡结果，需要 capacity、prices 与 report.revenues
        grids: 偏离价格网格，默认 [0, 最大估值] 上按 verification_resolution 取点

    Returns:
        包含最大收益增量与偏离者的证书
    """
    settings = settings or get_settings()
    m = market.with_capacity(result.capacity)
    p_max = max(c.demand.choke_price for c in m.classes)
    grid = grids or GridSpec.from_resolution(0.0, p_max, settings.verification_resolution)
    current = revenues(result.prices, allocate(m, result.prices, settings))

    gains: Dict[str, float] = {}
    for sp in m.providers:
        base = current.get(sp.id, 0.0)
        if sp.is_incumbent:
            _, best = grid_best_response(m, None, result.prices, grid, sp.id, settings, settings.workers)
            gains[f"{sp.id}:licensed"] = best - base
        if not m.unlicensed.is_absent:
            _, best = grid_unlicensed_deviation(m, result.prices, grid, sp.id, settings, settings.workers)
            gains[f"{sp.id}:unlicensed"] = best - base

    worst = max(gains, key=lambda k: gains[k]) if gains else None
    max_gain = gains[worst] if worst else 0.0
    logger.info(f"[Oracle] C={result.capacity:g} 最大偏离收益 {max_gain:.3e} ({worst})")
    return Certificate(
        max_gain=max_gain,
        worst_deviator=worst.split(":")[0] if worst else None,
        gains=gains,
        resolution=grid.step,
    )
