"""
Wardrop demand allocation.

Given announced prices, customers of each class pick the option with the
lowest delivered price (price + weight * latency).  For linear latencies the
allocation is found exactly by enumerating assignment patterns and solving
the induced linear system; single-class markets with convex latencies are
solved by bisection on the delivered-price level, two-class ones by minimizing
the convex congestion potential and polishing the pattern it reveals.
"""

import itertools
import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator
from scipy.optimize import brentq, minimize, root

from .config.solver_config import SolverSettings, get_settings
from .exceptions import NoConsistentPatternError, RegimeError
from .model import BoxDemand, CustomerClass, MarketConfig

logger = logging.getLogger(__name__)

UNLICENSED = "w"

# 客户类状态
FULL = "full"            # 全部覆盖 Q = Qmax，Δ <= W
MARGINAL = "marginal"    # 边际客户无差异 Δ = W
DEMAND = "demand"        # 线性需求 Δ = A - beta Q
UNSERVED = "unserved"

_STATES = {"box": (FULL, MARGINAL), "linear": (DEMAND,)}
_USED = 1e-12
_MAX_CONDITION = 1e12


class PriceProfile(BaseModel):
    """各服务商公布的授权价格 p_i 与非授权价格 p_i^w（缺失表示不提供）"""

    model_config = ConfigDict(frozen=True)

    licensed: Dict[str, float] = Field(default_factory=dict)
    unlicensed: Dict[str, float] = Field(default_factory=dict)

    @field_validator("licensed", "unlicensed")
    @classmethod
    def _non_negative(cls, value: Dict[str, float]) -> Dict[str, float]:
        for sp_id, price in value.items():
            if not price >= 0:
                raise ValueError(f"price for '{sp_id}' must be >= 0, got {price}")
        return value

    @classmethod
    def pinned(cls, market: MarketConfig, licensed: Union[float, Mapping[str, float]]) -> "PriceProfile":
        """非授权价格全部为 0 的价格组合"""
        if isinstance(licensed, (int, float)):
            licensed = {sp.id: float(licensed) for sp in market.incumbents}
        return cls(licensed=dict(licensed), unlicensed={sp.id: 0.0 for sp in market.providers})

    def with_licensed(self, sp_id: str, price: float) -> "PriceProfile":
        return self.model_copy(update={"licensed": {**self.licensed, sp_id: float(price)}})

    def with_unlicensed(self, sp_id: str, price: float) -> "PriceProfile":
        return self.model_copy(update={"unlicensed": {**self.unlicensed, sp_id: float(price)}})

    def min_unlicensed(self) -> float:
        return min(self.unlicensed.values(), default=math.inf)


class Allocation(BaseModel):
    """每个服务商、频段、客户类的客户质量"""

    licensed: Dict[str, List[float]]
    unlicensed: Dict[str, List[float]]
    pattern: str = ""

    @classmethod
    def empty(cls, market: MarketConfig, pattern: str = "empty") -> "Allocation":
        n = len(market.classes)
        return cls(
            licensed={sp.id: [0.0] * n for sp in market.incumbents},
            unlicensed={sp.id: [0.0] * n for sp in market.providers},
            pattern=pattern,
        )

    def licensed_load(self, sp_id: str) -> float:
        return float(sum(self.licensed.get(sp_id, ())))

    def licensed_by_class(self, t: int) -> float:
        return float(sum(masses[t] for masses in self.licensed.values()))

    def unlicensed_by_class(self, t: int) -> float:
        return float(sum(masses[t] for masses in self.unlicensed.values()))

    @property
    def unlicensed_total(self) -> float:
        return float(sum(sum(masses) for masses in self.unlicensed.values()))

    def served(self, t: int) -> float:
        return self.licensed_by_class(t) + self.unlicensed_by_class(t)

    def provider_mass(self, sp_id: str) -> Tuple[float, float]:
        """(授权质量, 非授权质量)"""
        return self.licensed_load(sp_id), float(sum(self.unlicensed.get(sp_id, ())))


class DeliveredPrices(BaseModel):
    by_class: List[float]

    def __getitem__(self, t: int) -> float:
        return self.by_class[t]


class AllocationPiece(BaseModel):
    """
    某一服务商授权价格 p 在 [lower, upper] 上的仿射分配

    该服务商各类客户的授权质量为 mass_const[t] + p * mass_slope[t]。
    """

    pattern: str
    lower: float
    upper: float
    mass_const: List[float]
    mass_slope: List[float]

    def mass(self, price: float) -> float:
        return float(sum(c + price * s for c, s in zip(self.mass_const, self.mass_slope)))

    def revenue(self, price: float) -> float:
        return price * self.mass(price)

    def candidates(self) -> List[float]:
        """区间端点与（截断后的）收入抛物线顶点"""
        points = [self.lower]
        if math.isfinite(self.upper):
            points.append(self.upper)
        a = sum(self.mass_slope)
        b = sum(self.mass_const)
        if a < 0:
            vertex = -b / (2.0 * a)
            points.append(min(max(vertex, self.lower), self.upper))
        return points


# === 频段与模式 ===

@dataclass(frozen=True)
class _Band:
    key: str
    price: float
    offset: float
    slope: float
    exponent: float

    def latency(self, load: float) -> float:
        if load < 0:
            return self.offset - self.slope * (-load) ** self.exponent
        return self.offset + self.slope * load ** self.exponent

    def integral(self, load: float) -> float:
        load = max(load, 0.0)
        return self.offset * load + self.slope * load ** (self.exponent + 1.0) / (self.exponent + 1.0)

    def load_at(self, level: float) -> float:
        """延迟等于 level 时的负载"""
        if level <= self.offset:
            return 0.0
        if self.slope == 0:
            return math.inf
        return ((level - self.offset) / self.slope) ** (1.0 / self.exponent)


@dataclass(frozen=True)
class _Pattern:
    supports: Tuple[Tuple[int, ...], ...]
    states: Tuple[str, ...]

    @property
    def options(self) -> List[Tuple[int, int]]:
        return [(e, t) for t, support in enumerate(self.supports) for e in support]

    @property
    def served(self) -> List[int]:
        return [t for t, state in enumerate(self.states) if state != UNSERVED]

    def label(self, bands: Sequence[_Band], classes: Sequence[CustomerClass]) -> str:
        parts = []
        for t, (support, state) in enumerate(zip(self.supports, self.states)):
            used = "+".join(bands[e].key for e in support) or "-"
            parts.append(f"{classes[t].name}:{used}/{state}")
        return "|".join(parts)


@lru_cache(maxsize=64)
def _patterns(n_bands: int, kinds: Tuple[str, ...]) -> Tuple[_Pattern, ...]:
    """按支撑集大小降序枚举所有模式"""
    per_class = []
    for kind in kinds:
        choices = []
        for size in range(n_bands, 0, -1):
            for support in itertools.combinations(range(n_bands), size):
                for state in _STATES[kind]:
                    choices.append((support, state))
        choices.append(((), UNSERVED))
        per_class.append(choices)
    combos = sorted(itertools.product(*per_class), key=lambda combo: -sum(len(s) for s, _ in combo))
    return tuple(_Pattern(tuple(s for s, _ in combo), tuple(st for _, st in combo)) for combo in combos)


def _bands(market: MarketConfig, prices: PriceProfile, parametric: Optional[str] = None) -> List[_Band]:
    bands = []
    for sp in market.incumbents:
        price = 0.0 if sp.id == parametric else prices.licensed.get(sp.id, math.inf)
        if math.isfinite(price):
            lat = sp.licensed
            bands.append(_Band(sp.id, price, lat.offset, lat.slope, lat.exponent))
    band = market.unlicensed
    if not band.is_absent:
        p_w = min((prices.unlicensed.get(sp.id, math.inf) for sp in market.providers), default=math.inf)
        if math.isfinite(p_w):
            bands.append(_Band(UNLICENSED, p_w, band.latency.offset, band.effective_slope, band.latency.exponent))
    return bands


def _linear_system(pattern: _Pattern, bands: Sequence[_Band], classes: Sequence[CustomerClass],
                   param: Optional[int] = None) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    构造模式的线性系统 A z = b (+ p * db)

    z = [各使用选项的质量..., 各被服务类的交付价格 Δ_t...]
    """
    options = pattern.options
    served = pattern.served
    n_opt = len(options)
    n = n_opt + len(served)
    A = np.zeros((n, n))
    b = np.zeros(n)
    db = np.zeros(n)
    delta_col = {t: n_opt + j for j, t in enumerate(served)}

    # 1. 使用中的选项：p_e + λ_t (T_e + s_e y_e) = Δ_t
    for r, (e, t) in enumerate(options):
        lam = classes[t].weight
        band = bands[e]
        for c, (e2, _) in enumerate(options):
            if e2 == e:
                A[r, c] += lam * band.slope
        A[r, delta_col[t]] = -1.0
        b[r] = -band.price - lam * band.offset
        if e == param:
            db[r] = -1.0

    # 2. 需求条件
    for j, t in enumerate(served):
        r = n_opt + j
        demand = classes[t].demand
        cols = [c for c, (_, t2) in enumerate(options) if t2 == t]
        state = pattern.states[t]
        if state == FULL:
            A[r, cols] = 1.0
            b[r] = demand.mass
        elif state == MARGINAL:
            A[r, delta_col[t]] = 1.0
            b[r] = demand.valuation
        else:
            A[r, delta_col[t]] = 1.0
            A[r, cols] = demand.elasticity
            b[r] = demand.intercept
    return A, b, db


def _unpack(pattern: _Pattern, n_bands: int, n_classes: int, z: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    X = np.zeros((n_bands, n_classes))
    for value, (e, t) in zip(z, pattern.options):
        X[e, t] = value
    delta = np.full(n_classes, np.nan)
    offset = len(pattern.options)
    for j, t in enumerate(pattern.served):
        delta[t] = z[offset + j]
    return X, delta


def _constraints(pattern: _Pattern, bands: Sequence[_Band], classes: Sequence[CustomerClass],
                 z: np.ndarray, band_prices: Sequence[float]) -> np.ndarray:
    """有效性约束值，全部 >= 0 时模式一致"""
    X, delta = _unpack(pattern, len(bands), len(classes), z)
    loads = X.sum(axis=1)
    values = list(z[: len(pattern.options)])
    for t, state in enumerate(pattern.states):
        lam = classes[t].weight
        demand = classes[t].demand
        support = pattern.supports[t]
        if state == UNSERVED:
            for e, band in enumerate(bands):
                values.append(band_prices[e] + lam * band.latency(loads[e]) - demand.choke_price)
            continue
        if state == FULL:
            values.append(demand.valuation - delta[t])
        elif state == MARGINAL:
            values.append(demand.mass - X[:, t].sum())
        for e, band in enumerate(bands):
            if e not in support:
                values.append(band_prices[e] + lam * band.latency(loads[e]) - delta[t])
    return np.asarray(values, dtype=float)


def _solve_linear(A: np.ndarray, rhs: np.ndarray) -> Optional[np.ndarray]:
    if A.size == 0:
        return np.zeros(0)
    if np.linalg.cond(A) > _MAX_CONDITION:
        return None
    return np.linalg.solve(A, rhs)


def _solve_nonlinear(pattern: _Pattern, bands: Sequence[_Band], classes: Sequence[CustomerClass],
                     starts: Optional[Sequence[np.ndarray]] = None) -> Optional[np.ndarray]:
    """凸延迟下的模式求解，依次尝试各初值（默认为线性化解与常数初值）"""
    options = pattern.options
    served = pattern.served
    if not options and not served:
        return np.zeros(0)
    n_opt = len(options)
    if starts is None:
        linearized = [_Band(b.key, b.price, b.offset, b.slope, 1.0) for b in bands]
        A, rhs, _ = _linear_system(pattern, linearized, classes)
        constant = np.concatenate([np.full(n_opt, 0.1), [classes[t].demand.choke_price / 2 for t in served]])
        z_lin = _solve_linear(A, rhs)
        starts = [constant] if z_lin is None else [z_lin, constant]

    def residual(z: np.ndarray) -> np.ndarray:
        X, delta = _unpack(pattern, len(bands), len(classes), z)
        loads = X.sum(axis=1)
        out = []
        for e, t in options:
            out.append(bands[e].price + classes[t].weight * bands[e].latency(loads[e]) - delta[t])
        for j, t in enumerate(served):
            demand = classes[t].demand
            q = X[:, t].sum()
            state = pattern.states[t]
            if state == FULL:
                out.append(q - demand.mass)
            elif state == MARGINAL:
                out.append(z[n_opt + j] - demand.valuation)
            else:
                out.append(z[n_opt + j] + demand.elasticity * q - demand.intercept)
        return np.asarray(out)

    for z0 in starts:
        sol = root(residual, np.asarray(z0, dtype=float), method="hybr", tol=1e-13)
        if sol.success and np.max(np.abs(residual(sol.x))) <= 1e-9:
            return sol.x
    return None


def _potential_minimum(bands: Sequence[_Band], classes: Sequence[CustomerClass]) -> Optional[np.ndarray]:
    """
    最小化凸势函数，返回 X (频段 × 客户类)

    Φ = Σ_e ∫l_e + Σ_{e,t} p_e x_e^t / λ_t - Σ_t U_t(Q_t) / λ_t，约束 x >= 0、Q_t <= Qmax_t。
    """
    n_b, n_c = len(bands), len(classes)
    weights = np.array([c.weight for c in classes])
    prices = np.array([b.price for b in bands])
    caps = np.array([c.demand.max_mass for c in classes])
    class_sum = np.tile(np.eye(n_c), (1, n_b))

    def objective(v: np.ndarray) -> float:
        X = v.reshape(n_b, n_c)
        loads, q = X.sum(axis=1), X.sum(axis=0)
        value = sum(band.integral(y) for band, y in zip(bands, loads))
        value += float(np.sum(prices[:, None] * X / weights[None, :]))
        return value - sum(c.demand.gross_value(qt) / c.weight for c, qt in zip(classes, q))

    def gradient(v: np.ndarray) -> np.ndarray:
        X = v.reshape(n_b, n_c)
        loads, q = X.sum(axis=1), X.sum(axis=0)
        lat = np.array([band.latency(y) for band, y in zip(bands, loads)])
        marginal = np.array([c.demand.inverse(qt) for c, qt in zip(classes, q)])
        return (lat[:, None] + (prices[:, None] - marginal[None, :]) / weights[None, :]).ravel()

    v0 = np.tile(caps / (2.0 * n_b), n_b)
    sol = minimize(
        objective, v0, jac=gradient, method="SLSQP",
        bounds=[(0.0, None)] * (n_b * n_c),
        constraints=[{"type": "ineq", "fun": lambda v: caps - class_sum @ v, "jac": lambda v: -class_sum}],
        options={"ftol": 1e-15, "maxiter": 1000},
    )
    if not np.all(np.isfinite(sol.x)):
        return None
    if not sol.success:
        logger.debug(f"[Wardrop] 势函数最小化未完全收敛: {sol.message}")
    return np.maximum(sol.x.reshape(n_b, n_c), 0.0)


def _snap_full(pattern: _Pattern, classes: Sequence[CustomerClass], X: np.ndarray) -> np.ndarray:
    """全部覆盖的类按 Qmax 精确归一，消除求根的舍入误差"""
    X = np.maximum(X, 0.0)
    for t, state in enumerate(pattern.states):
        total = X[:, t].sum()
        if state == FULL and total > 0:
            X[:, t] *= classes[t].demand.mass / total
    return X


def _polish(bands: Sequence[_Band], classes: Sequence[CustomerClass], X: np.ndarray,
            tol: float) -> Optional[Tuple[np.ndarray, str]]:
    """由近似最小点读出模式，以其为初值精确求解该模式"""
    prices = [b.price for b in bands]
    loads = X.sum(axis=1)
    for threshold in (1e-6, 1e-8, 1e-4, 1e-3):
        supports, states = [], []
        for t, cls in enumerate(classes):
            support = tuple(e for e in range(len(bands)) if X[e, t] > threshold)
            supports.append(support)
            if not support:
                states.append(UNSERVED)
            elif cls.demand.kind == "linear":
                states.append(DEMAND)
            elif cls.demand.mass - X[:, t].sum() <= threshold:
                states.append(FULL)
            else:
                states.append(MARGINAL)
        pattern = _Pattern(tuple(supports), tuple(states))
        delta = [min(bands[e].price + classes[t].weight * bands[e].latency(loads[e]) for e in pattern.supports[t])
                 for t in pattern.served]
        z0 = np.array([X[e, t] for e, t in pattern.options] + delta, dtype=float)
        z = _solve_nonlinear(pattern, bands, classes, starts=[z0])
        if z is not None and np.all(_constraints(pattern, bands, classes, z, prices) >= -tol):
            X_exact, _ = _unpack(pattern, len(bands), len(classes), z)
            return _snap_full(pattern, classes, X_exact), pattern.label(bands, classes)
    return None


def _enumerate(bands: List[_Band], classes: Sequence[CustomerClass], settings: SolverSettings,
               nonlinear: bool) -> Tuple[np.ndarray, str]:
    kinds = tuple(c.demand.kind for c in classes)
    prices = [b.price for b in bands]
    scale = 1.0 + max(c.demand.choke_price for c in classes)
    tol = (settings.bisection_tol if nonlinear else settings.wardrop_tol) * scale

    approx = None
    if nonlinear:
        approx = _potential_minimum(bands, classes)
        if approx is not None:
            polished = _polish(bands, classes, approx, settings.bisection_tol)
            if polished is not None:
                return polished

    for pattern in _patterns(len(bands), kinds):
        if nonlinear:
            z = _solve_nonlinear(pattern, bands, classes)
        else:
            A, rhs, _ = _linear_system(pattern, bands, classes)
            z = _solve_linear(A, rhs)
        if z is None:
            continue
        if np.all(_constraints(pattern, bands, classes, z, prices) >= -tol):
            X, _ = _unpack(pattern, len(bands), len(classes), z)
            label = pattern.label(bands, classes)
            logger.debug(f"[Wardrop] 一致模式: {label}")
            return (_snap_full(pattern, classes, X) if nonlinear else np.maximum(X, 0.0)), label

    if approx is not None:
        logger.warning(f"[Wardrop] 模式求解失败，使用势函数最小点: {[(b.key, b.price) for b in bands]}")
        return approx, "potential"

    raise NoConsistentPatternError(
        f"no consistent pattern for bands {[(b.key, b.price) for b in bands]} "
        f"and classes {[c.name for c in classes]}"
    )


def _level_bisection(bands: List[_Band], customer_class: CustomerClass, settings: SolverSettings) -> np.ndarray:
    """单一客户类：对交付价格水平二分"""
    lam = customer_class.weight
    demand = customer_class.demand
    X = np.zeros((len(bands), 1))

    def loads(level: float) -> List[float]:
        return [band.load_at((level - band.price) / lam) for band in bands]

    floor = min(band.price + lam * band.offset for band in bands)
    choke = demand.choke_price
    if floor >= choke:
        return X

    if isinstance(demand, BoxDemand):
        if sum(loads(choke)) <= demand.mass:
            level = choke
        else:
            level = brentq(lambda v: sum(loads(v)) - demand.mass, floor, choke, xtol=settings.bisection_tol)
    else:
        level = brentq(
            lambda v: sum(loads(v)) - (demand.intercept - v) / demand.elasticity,
            floor, choke, xtol=settings.bisection_tol,
        )
    X[:, 0] = loads(level)
    return X


def _to_allocation(market: MarketConfig, prices: PriceProfile, bands: Sequence[_Band],
                   X: np.ndarray, label: str) -> Allocation:
    allocation = Allocation.empty(market, pattern=label)
    for e, band in enumerate(bands):
        masses = [float(v) for v in X[e]]
        if band.key != UNLICENSED:
            allocation.licensed[band.key] = masses
            continue
        # 非授权频段：以最低价格并列的服务商均分
        tied = [sp.id for sp in market.providers if prices.unlicensed.get(sp.id, math.inf) <= band.price + 1e-12]
        for sp_id in tied:
            allocation.unlicensed[sp_id] = [m / len(tied) for m in masses]
    return allocation


# === 公共接口 ===

def allocate(market: MarketConfig, prices: PriceProfile, settings: Optional[SolverSettings] = None) -> Allocation:
    """
    计算给定价格下的 Wardrop 分配

    Args:
        market: 已校验的市场配置
        prices: 公布的价格组合（无穷大或缺失的价格表示不提供该选项）
        settings: 求解器配置，默认使用全局配置

    Returns:
        满足互补条件的分配

    Raises:
        NoConsistentPatternError: 没有一致的模式（求解器缺陷）
    """
    settings = settings or get_settings()
    bands = _bands(market, prices)
    if not bands:
        return Allocation.empty(market, pattern="no-options")

    nonlinear = any(band.exponent != 1.0 for band in bands)
    if nonlinear and len(market.classes) == 1:
        X = _level_bisection(bands, market.classes[0], settings)
        label = "bisection"
    else:
        X, label = _enumerate(bands, market.classes, settings, nonlinear)
    return _to_allocation(market, prices, bands, X, label)


def _option_rows(market: MarketConfig, prices: PriceProfile, allocation: Allocation) -> List[Tuple[str, str, float, float]]:
    """(频段类型, 服务商, 价格, 当前延迟)"""
    rows = []
    for sp in market.incumbents:
        price = prices.licensed.get(sp.id, math.inf)
        if math.isfinite(price):
            rows.append(("licensed", sp.id, price, sp.licensed.evaluate(allocation.licensed_load(sp.id))))
    band = market.unlicensed
    if not band.is_absent:
        g = band.evaluate(allocation.unlicensed_total)
        for sp in market.providers:
            price = prices.unlicensed.get(sp.id, math.inf)
            if math.isfinite(price):
                rows.append(("unlicensed", sp.id, price, g))
    return rows


def _mass(allocation: Allocation, kind: str, sp_id: str, t: int) -> float:
    table = allocation.licensed if kind == "licensed" else allocation.unlicensed
    return table.get(sp_id, [0.0] * (t + 1))[t]


def delivered_prices(market: MarketConfig, prices: PriceProfile, allocation: Allocation) -> DeliveredPrices:
    """每类客户在已使用选项上的最低交付价格；未被服务的类取所有可用选项的最低值"""
    rows = _option_rows(market, prices, allocation)
    result = []
    for t, cls in enumerate(market.classes):
        costs = [(price + cls.weight * lat, _mass(allocation, kind, sp_id, t)) for kind, sp_id, price, lat in rows]
        used = [cost for cost, mass in costs if mass > _USED]
        if used:
            result.append(min(used))
        else:
            result.append(min((cost for cost, _ in costs), default=math.inf))
    return DeliveredPrices(by_class=result)


def wardrop_residual(market: MarketConfig, prices: PriceProfile, allocation: Allocation) -> float:
    """所有 (服务商, 频段, 客户类) 选项上的最大互补条件违反量"""
    rows = _option_rows(market, prices, allocation)
    available = {(kind, sp_id) for kind, sp_id, _, _ in rows}
    violation = 0.0

    # 不可用选项上的质量
    for kind, table in (("licensed", allocation.licensed), ("unlicensed", allocation.unlicensed)):
        for sp_id, masses in table.items():
            for m in masses:
                violation = max(violation, -m)
                if (kind, sp_id) not in available:
                    violation = max(violation, m)

    for t, cls in enumerate(market.classes):
        demand = cls.demand
        costs = [(price + cls.weight * lat, _mass(allocation, kind, sp_id, t)) for kind, sp_id, price, lat in rows]
        used = [cost for cost, mass in costs if mass > _USED]
        q = allocation.served(t)

        if not used:
            cheapest = min((cost for cost, _ in costs), default=math.inf)
            violation = max(violation, demand.choke_price - cheapest)
            continue

        level = min(used)
        violation = max(violation, max(used) - level)
        for cost, mass in costs:
            if mass <= _USED:
                violation = max(violation, level - cost)

        if isinstance(demand, BoxDemand):
            violation = max(violation, q - demand.mass)
            if q >= demand.mass - _USED:
                violation = max(violation, level - demand.valuation)
            else:
                violation = max(violation, abs(level - demand.valuation))
        else:
            violation = max(violation, abs(level - demand.inverse(q)))
    return max(violation, 0.0)


def price_pieces(market: MarketConfig, prices: PriceProfile, sp_id: str,
                 settings: Optional[SolverSettings] = None) -> List[AllocationPiece]:
    """
    对某一在位者授权价格的参数化模式求解

    其余价格固定，返回所有在 p >= 0 上非空的有效区间及其仿射授权质量。
    该服务商不被使用的模式收入为 0，不返回。
    """
    settings = settings or get_settings()
    if not market.all_linear:
        raise RegimeError("price pieces require linear latencies")
    bands = _bands(market, prices, parametric=sp_id)
    k = next(e for e, band in enumerate(bands) if band.key == sp_id)
    classes = market.classes
    kinds = tuple(c.demand.kind for c in classes)
    tol = settings.wardrop_tol * (1.0 + max(c.demand.choke_price for c in classes))

    base_prices = np.array([band.price for band in bands])
    unit_prices = base_prices.copy()
    unit_prices[k] = 1.0

    pieces = []
    for pattern in _patterns(len(bands), kinds):
        if not any(k in support for support in pattern.supports):
            continue
        A, rhs, drhs = _linear_system(pattern, bands, classes, param=k)
        z0 = _solve_linear(A, rhs)
        if z0 is None:
            continue
        z1 = np.linalg.solve(A, drhs)
        c0 = _constraints(pattern, bands, classes, z0, base_prices)
        c1 = _constraints(pattern, bands, classes, z0 + z1, unit_prices) - c0

        lower, upper = 0.0, math.inf
        feasible = True
        for const, slope in zip(c0, c1):
            if abs(slope) < 1e-13:
                if const < -tol:
                    feasible = False
                    break
                continue
            bound = -const / slope
            if slope > 0:
                lower = max(lower, bound)
            else:
                upper = min(upper, bound)
        if not feasible or upper <= lower:
            continue

        X0, _ = _unpack(pattern, len(bands), len(classes), z0)
        X1, _ = _unpack(pattern, len(bands), len(classes), z1)
        pieces.append(AllocationPiece(
            pattern=pattern.label(bands, classes),
            lower=float(lower),
            upper=float(upper),
            mass_const=[float(v) for v in X0[k]],
            mass_slope=[float(v) for v in X1[k]],
        ))
    logger.debug(f"[Wardrop] {sp_id} 的价格分段: {len(pieces)} 段")
    return pieces
