"""
Capacity sweeps, closed-form thresholds and breakpoint detection.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from enum import Enum
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field

from .config.solver_config import SolverSettings, get_settings
from .equilibrium import CLASS_SUFFIXES, EquilibriumResult, solve
from .exceptions import RegimeError, SpectrumMarketError
from .model import BoxDemand, MarketConfig, monopoly_mass

logger = logging.getLogger(__name__)


class BreakpointKind(str, Enum):
    FLAT_TO_DECREASING = "FlatToDecreasing"
    FLAT_TO_INCREASING = "FlatToIncreasing"
    DECREASING_TO_FLAT = "DecreasingToFlat"
    DECREASING_TO_INCREASING = "DecreasingToIncreasing"
    INCREASING_TO_FLAT = "IncreasingToFlat"
    INCREASING_TO_DECREASING = "IncreasingToDecreasing"
    PRICE_JUMP = "PriceJump"
    REGIME_SWITCH = "RegimeSwitch"


_SLOPE_NAMES = {"flat": "Flat", "dec": "Decreasing", "inc": "Increasing"}


class Breakpoint(BaseModel):
    capacity: float
    kind: BreakpointKind
    upper: float
    detail: str = ""


class ThresholdReport(BaseModel):
    c1: float
    c2: float
    s0: float
    s_c2: Optional[float] = None

    @property
    def efficiency(self) -> Optional[float]:
        if self.s_c2 is None or self.s0 <= 0:
            return None
        return self.s_c2 / self.s0


class SweepSample(BaseModel):
    capacity: float
    result: Optional[EquilibriumResult] = None
    error: Optional[str] = None


class SweepResult(BaseModel):
    market: MarketConfig
    family: str
    samples: List[SweepSample]
    breakpoints: List[Breakpoint] = Field(default_factory=list)
    closed_form: Optional[ThresholdReport] = None

    def columns(self) -> List[str]:
        cols = ["C"] + [f"price_{sp.id}" for sp in self.market.incumbents] + ["p_w"]
        cols += [f"x_licensed_{s}" for s in CLASS_SUFFIXES] + [f"X_w_{s}" for s in CLASS_SUFFIXES]
        cols += [f"delivered_{s}" for s in CLASS_SUFFIXES] + ["SW", "CS"]
        cols += [f"revenue_{sp.id}" for sp in self.market.providers] + ["regime", "stage", "error"]
        return cols

    def to_frame(self) -> pd.DataFrame:
        """固定列顺序的扫描表"""
        rows = []
        for sample in self.samples:
            if sample.result is None:
                rows.append({"C": sample.capacity, "error": sample.error or ""})
                continue
            row = sample.result.to_row(self.market)
            row["C"] = sample.capacity
            row["error"] = ""
            rows.append(row)
        return pd.DataFrame(rows, columns=self.columns())

    def breakpoints_payload(self) -> dict:
        payload = {
            "family": self.family,
            "breakpoints": [bp.model_dump() for bp in self.breakpoints],
            "errors": [{"C": s.capacity, "error": s.error} for s in self.samples if s.error],
        }
        if self.closed_form is not None:
            payload["closed_form"] = {**self.closed_form.model_dump(),
                                      "efficiency": self.closed_form.efficiency}
        return payload

    def count(self, kind: BreakpointKind) -> int:
        return sum(1 for bp in self.breakpoints if bp.kind == kind)


# === 闭式阈值 ===

def closed_form_thresholds(W: float, T1: float, T2: float, b: float, kappa: float,
                           mass: float = 1.0, weight: float = 1.0) -> ThresholdReport:
    """
    同质市场的阈值 C1、C2 与福利 S(0)、S(C2)

    C1 是垄断结果开始受非授权频段影响的容量；C2 是内点价格与交付价格为 W 的
    边界价格相等的容量，由 α = κ/C 的二次方程给出。
    """
    w = W / weight
    x_star = (w - T1) / (2.0 * b)
    if x_star <= 0:
        raise RegimeError("licensed band cannot attract customers")
    if x_star > mass + 1e-12:
        raise RegimeError("monopoly serves all demand at C=0")
    s0 = weight * x_star * (w - T1 - b * x_star)
    if w <= T2:
        return ThresholdReport(c1=math.inf, c2=math.inf, s0=s0)

    c1 = kappa * (mass - x_star) / (w - T2)
    B = 2.0 * b * mass + T1 + T2 - 2.0 * w
    alpha = (-B + math.sqrt(B * B + 8.0 * mass * b * (w - T2))) / (2.0 * mass)
    c_star = kappa / alpha
    if c_star <= c1:
        return ThresholdReport(c1=c1, c2=math.inf, s0=s0)

    x1 = mass - (w - T2) / alpha
    s_c2 = weight * x1 * (w - T1 - b * x1)
    return ThresholdReport(c1=c1, c2=c_star, s0=s0, s_c2=s_c2)


def closed_form_welfare(W: float, T1: float, T2: float, b: float, kappa: float, capacity: float,
                        mass: float = 1.0, weight: float = 1.0) -> float:
    """同质线性市场的均衡社会福利 S(C)：垄断、边界、内点三段"""
    thresholds = closed_form_thresholds(W, T1, T2, b, kappa, mass, weight)
    w = W / weight
    if capacity <= 0 or capacity <= thresholds.c1:
        return thresholds.s0
    alpha = kappa / capacity
    if capacity <= thresholds.c2:
        x1 = mass - (w - T2) / alpha
        return weight * x1 * (w - T1 - b * x1)
    x1 = ((T2 - T1) + alpha * mass) / (2.0 * (b + alpha))
    x_w = mass - x1
    return W * mass - weight * x1 * (T1 + b * x1) - weight * x_w * (T2 + alpha * x_w)


def thresholds_for_market(market: MarketConfig) -> ThresholdReport:
    """从单一在位者、单一 Box 类、线性延迟的市场读取参数计算闭式阈值"""
    if len(market.incumbents) != 1 or not market.is_homogeneous or not market.all_linear:
        raise RegimeError("closed-form thresholds need one incumbent, one class and linear latencies")
    demand = market.classes[0].demand
    if not isinstance(demand, BoxDemand):
        raise RegimeError("closed-form thresholds need Box demand")
    licensed = market.incumbents[0].licensed
    band = market.unlicensed.latency
    return closed_form_thresholds(demand.valuation, licensed.offset, band.offset, licensed.slope, band.slope,
                                  demand.mass, market.classes[0].weight)


def general_thresholds(market: MarketConfig, settings: Optional[SolverSettings] = None,
                       c_max: Optional[float] = None) -> ThresholdReport:
    """
    凸延迟下的阈值

    x* 使 x(W - λ l(x)) 最大，C1 满足 λ g(C1, Q - x*) = W；C2 从均衡数值上
    定位为 C1 之后交付价格首次低于 W 的容量（二分）。
    """
    settings = settings or get_settings()
    if len(market.incumbents) != 1 or not market.is_homogeneous:
        raise RegimeError("thresholds need one incumbent and one class")
    cls = market.classes[0]
    if not isinstance(cls.demand, BoxDemand):
        raise RegimeError("thresholds need Box demand")
    W, Q, lam = cls.demand.valuation, cls.demand.mass, cls.weight
    licensed = market.incumbents[0].licensed
    band = market.unlicensed.latency

    x_star = monopoly_mass(licensed, W, lam, Q)
    if x_star >= Q:
        raise RegimeError("monopoly serves all demand at C=0")
    s0 = x_star * (W - lam * licensed.evaluate(x_star))
    if W <= lam * band.offset:
        return ThresholdReport(c1=math.inf, c2=math.inf, s0=s0)
    c1 = band.slope * (Q - x_star) ** band.exponent / (W / lam - band.offset)

    def interior(capacity: float) -> bool:
        result = solve(market.with_capacity(capacity), settings)
        return result.delivered[0] < W - 1e-7

    # 1. 几何扫描定位第一个内点容量
    c_max = c_max or max(settings.sweep_c_max, 100.0 * c1)
    lo, hi = c1, None
    capacity = c1 * (1.0 + 1e-6) if c1 > 0 else settings.sweep_c_min
    while capacity <= c_max:
        if interior(capacity):
            hi = capacity
            break
        lo = capacity
        capacity *= 1.25
    if hi is None:
        return ThresholdReport(c1=c1, c2=math.inf, s0=s0)

    # 2. 二分
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if interior(mid):
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-10 * max(1.0, hi):
            break
    c2 = 0.5 * (lo + hi)
    s_c2 = solve(market.with_capacity(c2), settings).report.social_welfare
    return ThresholdReport(c1=c1, c2=c2, s0=s0, s_c2=s_c2)


# === 扫描 ===

def default_grid(settings: Optional[SolverSettings] = None) -> List[float]:
    """C = 0 加上对数均匀分布的容量点"""
    settings = settings or get_settings()
    points = np.logspace(math.log10(settings.sweep_c_min), math.log10(settings.sweep_c_max), settings.sweep_points)
    return [0.0] + [float(c) for c in points]


def _family(market: MarketConfig) -> str:
    n = len(market.incumbents)
    if n == 1 and market.is_homogeneous:
        return "homogeneous"
    if n == 1 and len(market.classes) == 2:
        return "heterogeneous"
    if n >= 2 and market.is_homogeneous and all(sp.licensed == market.incumbents[0].licensed for sp in market.incumbents):
        return "symmetric"
    return "generic"


def _solve_point(args: Tuple[MarketConfig, float, SolverSettings]) -> SweepSample:
    market, capacity, settings = args
    try:
        return SweepSample(capacity=capacity, result=solve(market, settings))
    except (SpectrumMarketError, ValueError, ArithmeticError) as e:
        logger.error(f"[Sweep] C={capacity:g} 求解失败: {e}")
        return SweepSample(capacity=capacity, error=str(e))


def _run(tasks: List[Tuple[MarketConfig, float, SolverSettings]], workers: int) -> List[SweepSample]:
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_solve_point, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    return [_solve_point(task) for task in tasks]


def _check_grid(grid: Sequence[float]) -> List[float]:
    grid = [float(c) for c in grid]
    if not grid:
        raise ValueError("capacity grid is empty")
    if any(c < 0 for c in grid):
        raise ValueError("capacity grid must be non-negative")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("capacity grid must be strictly increasing")
    return grid


def sweep_capacity(market: MarketConfig, c_grid: Optional[Iterable[float]] = None,
                   settings: Optional[SolverSettings] = None, workers: Optional[int] = None) -> SweepResult:
    """
    在容量网格上逐点求均衡

    求解器按市场类型自动选择；单点失败记录在样本中，扫描继续。
    同质线性市场附带闭式阈值。
    """
    settings = settings or get_settings()
    grid = _check_grid(default_grid(settings) if c_grid is None else list(c_grid))
    family = _family(market)
    logger.info(f"[Sweep] 开始扫描: {family} 市场, {len(grid)} 个容量点")

    samples = _run([(market.with_capacity(c), c, settings) for c in grid], workers or settings.workers)

    closed_form = None
    if family == "homogeneous" and market.all_linear and isinstance(market.classes[0].demand, BoxDemand):
        try:
            closed_form = thresholds_for_market(market)
        except RegimeError as e:
            logger.info(f"[Sweep] 不附带闭式阈值: {e.reason}")

    breakpoints = detect_breakpoints(samples, settings.jump_tol, settings.slope_tol)
    failed = sum(1 for s in samples if s.error)
    logger.info(f"[Sweep] 扫描完成: {len(breakpoints)} 个断点, {failed} 个失败点")
    return SweepResult(market=market, family=family, samples=samples, breakpoints=breakpoints, closed_form=closed_form)


def divided_market(market: MarketConfig, capacity: float, n: Optional[int] = None) -> MarketConfig:
    """新增容量平分给在位者：授权延迟斜率乘以 1/(1 + C/N)，没有非授权频段"""
    n = n or len(market.incumbents)
    factor = 1.0 / (1.0 + capacity / n)
    providers = [sp.model_copy(update={"licensed": sp.licensed.scaled(factor)}) if sp.is_incumbent else sp
                 for sp in market.providers]
    return market.model_copy(update={"providers": providers}).with_capacity(0.0)


def divided_capacity_sweep(market: MarketConfig, c_grid: Optional[Iterable[float]] = None, n: Optional[int] = None,
                           settings: Optional[SolverSettings] = None, workers: Optional[int] = None) -> SweepResult:
    """容量分给在位者时的对照扫描"""
    settings = settings or get_settings()
    grid = _check_grid(default_grid(settings) if c_grid is None else list(c_grid))
    n = n or len(market.incumbents)
    logger.info(f"[Sweep] 开始分配容量对照扫描: N={n}, {len(grid)} 个容量点")

    samples = _run([(divided_market(market, c, n), c, settings) for c in grid], workers or settings.workers)
    breakpoints = detect_breakpoints(samples, settings.jump_tol, settings.slope_tol)
    return SweepResult(market=market.with_capacity(0.0), family="divided", samples=samples, breakpoints=breakpoints)


# === 断点检测 ===

def _slope_runs(classes: List[str]) -> List[List]:
    """[类别, 起始段, 结束段] 的连续段，夹在两个不同非平坦段之间的单段平坦被吸收"""
    runs: List[List] = []
    for k, cls in enumerate(classes):
        if runs and runs[-1][0] == cls:
            runs[-1][2] = k
        else:
            runs.append([cls, k, k])
    merged: List[List] = []
    i = 0
    while i < len(runs):
        run = runs[i]
        if (run[0] == "flat" and run[1] == run[2] and merged and i + 1 < len(runs)
                and merged[-1][0] != "flat" and runs[i + 1][0] != "flat" and merged[-1][0] != runs[i + 1][0]):
            merged[-1][2] = run[2]
            i += 1
            continue
        if merged and merged[-1][0] == run[0]:
            merged[-1][2] = run[2]
        else:
            merged.append(list(run))
        i += 1
    return merged


def detect_breakpoints(samples: Sequence[SweepSample], jump_tol: float, slope_tol: float) -> List[Breakpoint]:
    """
    福利斜率类别变化、价格跳跃与覆盖区制切换

    Args:
        samples: 按容量递增的样本，失败样本被跳过
        jump_tol: 价格跳跃的绝对阈值，同时要求超过相邻变化的 10 倍
        slope_tol: |ΔSW/ΔC| 低于该值视为平坦

    Returns:
        按容量排序的断点列表
    """
    points = [(s.capacity, s.result) for s in samples if s.result is not None]
    if len(points) < 3:
        return []
    C = np.array([c for c, _ in points])
    sw = np.array([r.report.social_welfare for _, r in points])
    first = points[0][1].prices.licensed
    sp_id = next(iter(first)) if first else None
    price = np.array([r.prices.licensed.get(sp_id, math.nan) if sp_id else math.nan for _, r in points])
    price = np.where(np.isfinite(price), price, np.nan)

    breakpoints: List[Breakpoint] = []

    # 1. 福利斜率
    slopes = np.diff(sw) / np.diff(C)
    classes = ["flat" if abs(s) < slope_tol else ("inc" if s > 0 else "dec") for s in slopes]
    runs = _slope_runs(classes)
    for prev, nxt in zip(runs, runs[1:]):
        k = nxt[1]
        kind = BreakpointKind(f"{_SLOPE_NAMES[prev[0]]}To{_SLOPE_NAMES[nxt[0]]}")
        breakpoints.append(Breakpoint(capacity=float(C[k]), kind=kind, upper=float(C[k])))

    # 2. 价格跳跃
    dp = np.diff(price)
    for k, change in enumerate(dp):
        if not np.isfinite(change):
            continue
        neighbours = [abs(dp[j]) for j in (k - 1, k + 1) if 0 <= j < len(dp) and np.isfinite(dp[j])]
        threshold = max(jump_tol, 10.0 * max(neighbours, default=0.0))
        if abs(change) > threshold:
            direction = "up" if change > 0 else "down"
            breakpoints.append(Breakpoint(capacity=float(C[k]), kind=BreakpointKind.PRICE_JUMP, upper=float(C[k + 1]),
                                          detail=f"{direction} {change:+.6g}"))

    # 3. 覆盖区制切换
    for k in range(len(points) - 1):
        before, after = points[k][1].regime, points[k + 1][1].regime
        if before.is_coverage and after.is_coverage and before != after:
            breakpoints.append(Breakpoint(capacity=float(C[k]), kind=BreakpointKind.REGIME_SWITCH, upper=float(C[k + 1]),
                                          detail=f"{before.value}->{after.value}"))

    breakpoints.sort(key=lambda bp: (bp.capacity, bp.kind.value))
    return breakpoints
