import logging
from typing import List, Optional, Sequence

from ..config.solver_config import SolverSettings, get_settings
from ..exceptions import MarketConfigError
from ..model import load_market
from ..store import FileManager
from ..sweep import SweepResult, divided_capacity_sweep, sweep_capacity
from .tool_result import EXIT_ERROR, EXIT_FAILED, EXIT_OK, ToolResult

logger = logging.getLogger(__name__)


class SweepExportTool:
    """容量扫描导出工具 - 扫描结果写成 CSV，断点写成 JSON 附属文件"""
    name: str = "sweep"
    description: str = "在容量网格上逐点求均衡，导出 <name>_sweep.csv 与 <name>_breakpoints.json"

    def __init__(self, settings: Optional[SolverSettings] = None, workers: Optional[int] = None):
        self.settings = settings or get_settings()
        self.workers = workers
        self.file_manager = FileManager()

    def _run(self, config_path: str, output_dir: str = "outputs", c_grid: Optional[Sequence[float]] = None,
             divided: bool = False, name: str = "sweep") -> ToolResult:
        """
        执行扫描并导出

        Args:
            config_path: JSON 配置路径
            output_dir: 输出目录
            c_grid: 容量网格，None 时使用默认对数网格
            divided: 改为容量平分给在位者的对照扫描
            name: 输出文件名前缀
        """
        try:
            market = load_market(config_path)
        except MarketConfigError as e:
            return ToolResult(message=f"❌ {e}", exit_code=EXIT_FAILED)
        except OSError as e:
            return ToolResult(message=f"❌ 无法读取配置文件: {e}", exit_code=EXIT_ERROR)

        try:
            if divided:
                sweep = divided_capacity_sweep(market, c_grid, settings=self.settings, workers=self.workers)
            else:
                sweep = sweep_capacity(market, c_grid, self.settings, self.workers)
        except ValueError as e:
            return ToolResult(message=f"❌ 容量网格无效: {e}", exit_code=EXIT_ERROR)

        files = self.export(sweep, output_dir, name)
        failed = [s for s in sweep.samples if s.error]
        lines = [
            "✅ 容量扫描完成！",
            "",
            f"📈 {sweep.family} 市场, {len(sweep.samples)} 个容量点",
        ]
        if sweep.closed_form is not None:
            lines.append(f"- 闭式阈值: C1={sweep.closed_form.c1:.6g}, C2={sweep.closed_form.c2:.6g}")
        lines += [f"- {bp.kind.value} @ C={bp.capacity:.6g} {bp.detail}".rstrip() for bp in sweep.breakpoints]
        if failed:
            lines.append(f"⚠️ {len(failed)} 个容量点求解失败，见 CSV 的 error 列")
        lines += ["", f"📁 结果文件: {', '.join(files)}"]
        # 求解失败的点已记录，扫描本身仍算完成
        return ToolResult(message="\n".join(lines), exit_code=EXIT_ERROR if len(failed) == len(sweep.samples) else EXIT_OK,
                          files=files)

    def export(self, sweep: SweepResult, output_dir: str, name: str) -> List[str]:
        """写出扫描表与断点文件"""
        csv_path = self.file_manager.save_csv(sweep.to_frame(), output_dir, f"{name}_sweep")
        json_path = self.file_manager.save_json(sweep.breakpoints_payload(), output_dir, f"{name}_breakpoints")
        logger.info(f"[SweepExportTool] 导出 {len(sweep.samples)} 行, {len(sweep.breakpoints)} 个断点")
        return [csv_path, json_path]
