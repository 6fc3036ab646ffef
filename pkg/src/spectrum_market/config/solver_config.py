# -*- coding: utf-8 -*-
"""
求解器配置

管理 Wardrop 分配、最优反应搜索、均衡迭代和容量扫描的容差与网格参数。
所有字段都可以通过 SPECTRUM_ 前缀的环境变量或 .env 文件覆盖。
"""

import logging
from functools import lru_cache
from typing import Any

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict

logger = logging.getLogger(__name__)

_INT_MINIMUMS = {"fallback_refinements": 0, "fallback_grid_points": 2, "concavity_mesh": 5, "oracle_mesh": 2}


class SolverSettings(BaseSettings):
    """求解器配置类"""

    model_config = SettingsConfigDict(
        env_prefix="SPECTRUM_",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
    )

    # Wardrop 分配
    wardrop_tol: float = Field(1e-9, gt=0)          # 线性系统互补条件容差
    bisection_tol: float = Field(1e-7, gt=0)        # 非线性延迟 (d > 1) 的水平二分容差

    # 最优反应
    golden_tol: float = Field(1e-9, gt=0)           # 有界黄金分割搜索的价格容差
    fallback_grid_points: int = Field(2000, ge=2)   # 非凹情形的网格点数
    fallback_refinements: int = Field(2, ge=0)      # 网格细化轮数
    concavity_mesh: int = Field(201, ge=5)          # 凹性前提检查的网格

    # 均衡迭代
    damping: float = Field(0.5, gt=0, le=1)
    max_iterations: int = Field(10_000, ge=1)
    convergence_tol: float = Field(1e-8, gt=0)

    # 容量扫描
    sweep_points: int = Field(400, ge=1)
    sweep_c_min: float = Field(1e-3, gt=0)
    sweep_c_max: float = Field(10.0, gt=0)
    jump_tol: float = Field(1e-2, gt=0)
    slope_tol: float = Field(1e-6, gt=0)

    # 验证与预言机
    verification_resolution: float = Field(1e-3, gt=0)
    deviation_tol: float = Field(1e-6, ge=0)
    oracle_mesh: int = Field(10_000, ge=2)

    workers: int = Field(1, ge=1)

    def summary(self) -> str:
        """获取配置摘要"""
        return f"""
求解器配置:
📐 Wardrop 容差: {self.wardrop_tol:g} (二分 {self.bisection_tol:g})
🔎 最优反应: 黄金分割 {self.golden_tol:g}, 回退网格 {self.fallback_grid_points} 点 × {self.fallback_refinements} 轮细化
🔁 均衡迭代: 阻尼 {self.damping}, 最多 {self.max_iterations} 次, 收敛阈值 {self.convergence_tol:g}
📈 扫描: {self.sweep_points} 点 [{self.sweep_c_min:g}, {self.sweep_c_max:g}], 跳跃阈值 {self.jump_tol:g}, 平坦阈值 {self.slope_tol:g}
✅ 验证: 网格分辨率 {self.verification_resolution:g}, 偏离容差 {self.deviation_tol:g}
⚙️ 并行进程: {self.workers}
        """.strip()

    def with_overrides(self, **overrides: Any) -> "SolverSettings":
        """验证并应用覆盖参数，不合理的值被调整并记录警告"""
        requested = {k: v for k, v in overrides.items() if v is not None}
        unknown = set(requested) - set(type(self).model_fields)
        if unknown:
            raise ValueError(f"unknown solver settings: {sorted(unknown)}")

        defaults = type(self).model_fields
        for key in list(requested):
            value = requested[key]
            default = defaults[key].default
            if isinstance(default, float) and key not in ("damping", "deviation_tol") and value <= 0:
                logger.warning(f"[SolverSettings] {key}={value} 必须为正数，调整为 {default}")
                requested[key] = default
            elif isinstance(default, int) and value < _INT_MINIMUMS.get(key, 1):
                logger.warning(f"[SolverSettings] {key}={value} 低于下限 {_INT_MINIMUMS.get(key, 1)}，调整为 {default}")
                requested[key] = default

        if "damping" in requested and not 0 < requested["damping"] <= 1:
            logger.warning(f"[SolverSettings] 阻尼 {requested['damping']} 超出 (0, 1]，调整为 0.5")
            requested["damping"] = 0.5
        if requested.get("deviation_tol", 0.0) < 0:
            requested["deviation_tol"] = defaults["deviation_tol"].default

        c_min = requested.get("sweep_c_min", self.sweep_c_min)
        c_max = requested.get("sweep_c_max", self.sweep_c_max)
        if c_min >= c_max:
            logger.warning(f"[SolverSettings] 扫描区间 [{c_min}, {c_max}] 无效，恢复为 [{self.sweep_c_min}, {self.sweep_c_max}]")
            requested.pop("sweep_c_min", None)
            requested.pop("sweep_c_max", None)

        return self.model_copy(update=requested)


@lru_cache(maxsize=1)
def get_settings() -> SolverSettings:
    """进程级共享的配置实例"""
    return SolverSettings()
