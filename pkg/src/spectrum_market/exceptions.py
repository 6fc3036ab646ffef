"""
Exception hierarchy for the spectrum market solvers.
"""

from typing import List, Optional, Sequence, Tuple


class SpectrumMarketError(Exception):
    """所有求解器异常的基类"""


class MarketConfigError(SpectrumMarketError, ValueError):
    """市场配置结构错误，携带 (字段路径, 说明) 列表"""

    def __init__(self, violations: Sequence[Tuple[str, str]]):
        self.violations: List[Tuple[str, str]] = list(violations)
        lines = [f"{path}: {message}" for path, message in self.violations]
        super().__init__("invalid market config:\n  " + "\n  ".join(lines))


class NoLicensedBandError(SpectrumMarketError, ValueError):
    """新进入者没有授权频段"""

    def __init__(self, sp_id: str):
        self.sp_id = sp_id
        super().__init__(f"no licensed band: provider '{sp_id}' is an entrant")


class NoConsistentPatternError(SpectrumMarketError, RuntimeError):
    """Wardrop 模式枚举没有找到一致解（求解器缺陷）"""


class RegimeError(SpectrumMarketError, ValueError):
    """闭式解路径在其假设之外被调用"""

    def __init__(self, reason: str):
        self.reason = reason
        super().__init__(f"use generic path: {reason}")


class ConvergenceError(SpectrumMarketError, RuntimeError):
    """最优反应迭代未收敛"""

    def __init__(self, message: str, trace: Optional[List[float]] = None):
        self.trace: List[float] = list(trace or [])
        super().__init__(f"{message} (last prices: {self.trace[-5:]})")
