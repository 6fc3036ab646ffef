import logging
import math
from typing import Dict, List, Optional

import numpy as np
import pandas as pd

from ..config.presets import PRESET_ORDER, Preset, get_preset
from ..config.solver_config import SolverSettings, get_settings
from ..equilibrium import solve, verify_equilibrium
from ..exceptions import SpectrumMarketError
from ..model import BoxDemand
from ..store import FileManager
from ..sweep import (
    BreakpointKind,
    SweepResult,
    closed_form_welfare,
    divided_capacity_sweep,
    sweep_capacity,
    thresholds_for_market,
)
from .sweep_export_tool import SweepExportTool
from .tool_result import EXIT_ERROR, EXIT_FAILED, EXIT_OK, ToolResult

logger = logging.getLogger(__name__)

REPRODUCTION_COLUMNS = ["quantity", "expected", "computed", "tolerance", "status"]


def _first_capacity(sweep: SweepResult, kind: BreakpointKind) -> float:
    for bp in sweep.breakpoints:
        if bp.kind == kind:
            return bp.capacity
    return math.nan


def _solved(sweep: SweepResult):
    return [s for s in sweep.samples if s.result is not None]


def braess_intervals(welfare: np.ndarray, slope_tol: float) -> int:
    """福利严格下降的最大连续区间个数"""
    decreasing = np.diff(welfare) < -slope_tol
    count, inside = 0, False
    for flag in decreasing:
        if flag and not inside:
            count += 1
        inside = bool(flag)
    return count


class ReproductionTool:
    """复现工具 - 对内置预设计算关键数值并与期望值逐项比较"""
    name: str = "reproduce"
    description: str = "运行预设场景，写出 <preset>_reproduction.csv（quantity, expected, computed, tolerance, status）及扫描文件"

    def __init__(self, settings: Optional[SolverSettings] = None, workers: Optional[int] = None):
        self.settings = settings or get_settings()
        self.workers = workers
        self.file_manager = FileManager()
        self.sweep_tool = SweepExportTool(self.settings, workers)

    def _run(self, preset: str, output_dir: str = "outputs") -> ToolResult:
        """
        复现一个预设，preset 为 all 时按固定顺序复现全部四个

        Returns:
            任一期望未满足时 exit_code 为 1，未知预设为 2
        """
        names = list(PRESET_ORDER) if preset == "all" else [preset]
        try:
            presets = [get_preset(name) for name in names]
        except KeyError as e:
            return ToolResult(message=f"❌ {e.args[0]}", exit_code=EXIT_ERROR)

        messages, files, all_passed = [], [], True
        for item in presets:
            logger.info(f"[ReproductionTool] 开始复现预设 {item.name}")
            table, written = self._reproduce(item, output_dir)
            files += written
            passed = bool((table["status"] == "PASS").all())
            all_passed = all_passed and passed
            messages.append(self._format(item, table, passed))

        messages.append(f"📁 结果文件: {', '.join(files)}")
        return ToolResult(message="\n\n".join(messages), exit_code=EXIT_OK if all_passed else EXIT_FAILED, files=files)

    def _reproduce(self, preset: Preset, output_dir: str):
        computed: Dict[str, float] = {}
        written: List[str] = []
        try:
            if preset.name.startswith("b1"):
                written += self._homogeneous(preset, output_dir, computed)
            elif preset.name == "b2-symmetric":
                written += self._symmetric(preset, output_dir, computed)
            else:
                written += self._heterogeneous(preset, output_dir, computed)
        except SpectrumMarketError as e:
            logger.error(f"[ReproductionTool] 预设 {preset.name} 计算中断: {e}", exc_info=True)

        rows = []
        for expectation in preset.expectations:
            value = computed.get(expectation.quantity, math.nan)
            rows.append({
                "quantity": expectation.quantity,
                "expected": expectation.expected,
                "computed": value,
                "tolerance": expectation.tolerance,
                "status": "PASS" if expectation.check(value) else "FAIL",
            })
        table = pd.DataFrame(rows, columns=REPRODUCTION_COLUMNS)
        written.insert(0, self.file_manager.save_csv(table, output_dir, f"{preset.name}_reproduction"))
        return table, written

    # === 各预设的计算 ===

    def _homogeneous(self, preset: Preset, output_dir: str, computed: Dict[str, float]) -> List[str]:
        market = preset.market
        thresholds = thresholds_for_market(market)
        computed.update({
            "C1": thresholds.c1,
            "C2": thresholds.c2,
            "S(0)": thresholds.s0,
            "S(C2)": thresholds.s_c2 if thresholds.s_c2 is not None else math.nan,
            "efficiency": thresholds.efficiency if thresholds.efficiency is not None else math.nan,
        })

        sweep = sweep_capacity(market, preset.c_grid, self.settings, self.workers)
        samples = _solved(sweep)
        sp_id = market.incumbents[0].id
        computed["price at C=0"] = samples[0].result.prices.licensed[sp_id]
        computed["C1 from sweep"] = _first_capacity(sweep, BreakpointKind.FLAT_TO_DECREASING)
        computed["C2 from sweep"] = _first_capacity(sweep, BreakpointKind.DECREASING_TO_INCREASING)
        computed["breakpoints"] = len(sweep.breakpoints)

        licensed, band = market.incumbents[0].licensed, market.unlicensed.latency
        cls = market.classes[0]
        demand: BoxDemand = cls.demand
        gaps = [
            abs(s.result.report.social_welfare - closed_form_welfare(
                demand.valuation, licensed.offset, band.offset, licensed.slope, band.slope,
                s.capacity, demand.mass, cls.weight))
            for s in samples
        ]
        computed["max |SW - S(C)|"] = max(gaps)
        return self.sweep_tool.export(sweep, output_dir, preset.name)

    def _symmetric(self, preset: Preset, output_dir: str, computed: Dict[str, float]) -> List[str]:
        market = preset.market
        sweep = sweep_capacity(market, preset.c_grid, self.settings, self.workers)
        divided = divided_capacity_sweep(market, preset.c_grid, settings=self.settings, workers=self.workers)

        first = _solved(sweep)[0].result
        computed["price at C=0"] = first.prices.licensed[market.incumbents[0].id]
        computed["SW at C=0"] = first.report.social_welfare
        computed["SW at C=0.1"] = solve(market.with_capacity(0.1), self.settings).report.social_welfare
        computed["max deviation gain at C=0"] = verify_equilibrium(market, first, settings=self.settings).certificate.max_gain

        # 两组扫描共用网格，只比较两边都求解成功的点
        paired = [(a.result.report.social_welfare, b.result.report.social_welfare)
                  for a, b in zip(sweep.samples, divided.samples) if a.result is not None and b.result is not None]
        unlicensed = np.array([p[0] for p in paired])
        shared = np.array([p[1] for p in paired])
        computed["Braess intervals"] = braess_intervals(unlicensed, self.settings.slope_tol)
        computed["min divided SW step"] = float(np.min(np.diff(shared))) if len(shared) > 1 else math.nan
        computed["min SW(divided) - SW(unlicensed)"] = float(np.min(shared - unlicensed))

        files = self.sweep_tool.export(sweep, output_dir, preset.name)
        files += self.sweep_tool.export(divided, output_dir, f"{preset.name}_divided")
        return files

    def _heterogeneous(self, preset: Preset, output_dir: str, computed: Dict[str, float]) -> List[str]:
        market = preset.market
        sweep = sweep_capacity(market, preset.c_grid, self.settings, self.workers)
        samples = _solved(sweep)
        sp_id = market.incumbents[0].id
        first = samples[0].result
        computed["price at C=0"] = first.prices.licensed[sp_id]
        computed["revenue at C=0"] = first.report.revenues[sp_id]

        jumps = [bp for bp in sweep.breakpoints if bp.kind == BreakpointKind.PRICE_JUMP]
        upward = [bp for bp in jumps if bp.detail.startswith("up")]
        switches = [bp for bp in sweep.breakpoints if bp.kind == BreakpointKind.REGIME_SWITCH]
        computed["price jumps"] = len(jumps)
        computed["upward price jumps"] = len(upward)
        computed["regime switches"] = len(switches)
        computed["jump at regime switch"] = int(any(j.capacity == s.capacity for j in upward for s in switches))

        if upward:
            k = next(i for i, s in enumerate(samples) if s.capacity == upward[0].capacity)
            before, after = samples[k].result.report, samples[k + 1].result.report
            computed["CS drop at jump"] = before.consumer_surplus - after.consumer_surplus
        return self.sweep_tool.export(sweep, output_dir, preset.name)

    @staticmethod
    def _format(preset: Preset, table: pd.DataFrame, passed: bool) -> str:
        header = f"{'✅' if passed else '❌'} {preset.name}: {preset.description}"
        lines = [header]
        for row in table.itertuples(index=False):
            marker = "✅" if row.status == "PASS" else "❌"
            lines.append(f"   {marker} {row.quantity}: expected {row.expected:.6g}, computed {row.computed:.6g} (±{row.tolerance:g})")
        return "\n".join(lines)
