import logging
from typing import Optional

import pandas as pd

from ..config.solver_config import SolverSettings, get_settings
from ..equilibrium import solve
from ..exceptions import MarketConfigError, SpectrumMarketError
from ..model import load_market
from ..store import FileManager
from .tool_result import EXIT_ERROR, EXIT_FAILED, ToolResult

logger = logging.getLogger(__name__)


class SolveTool:
    """均衡求解工具 - 对单个市场配置求 Nash 均衡并导出结果"""
    name: str = "solve"
    description: str = "按市场类型自动选择求解器，输出价格、分配、交付价格、福利与区制"

    def __init__(self, settings: Optional[SolverSettings] = None):
        self.settings = settings or get_settings()
        self.file_manager = FileManager()

    def _run(self, config_path: str, output_dir: str = "outputs", capacity: Optional[float] = None,
             fmt: str = "json") -> ToolResult:
        """
        求解并写出 equilibrium.json 或 equilibrium.csv

        Args:
            config_path: JSON 配置路径
            output_dir: 输出目录
            capacity: 覆盖配置中的非授权容量
            fmt: json 或 csv
        """
        try:
            market = load_market(config_path)
        except MarketConfigError as e:
            return ToolResult(message=f"❌ {e}", exit_code=EXIT_FAILED)
        except OSError as e:
            return ToolResult(message=f"❌ 无法读取配置文件: {e}", exit_code=EXIT_ERROR)

        if capacity is not None:
            market = market.with_capacity(capacity)

        try:
            logger.info(f"[SolveTool] 开始求解 C={market.capacity:g}")
            result = solve(market, self.settings)
        except SpectrumMarketError as e:
            logger.error(f"[SolveTool] 求解失败: {e}")
            return ToolResult(message=f"❌ 求解失败: {e}", exit_code=EXIT_ERROR)

        if fmt == "csv":
            path = self.file_manager.save_csv(pd.DataFrame([result.to_row(market)]), output_dir, "equilibrium")
        else:
            path = self.file_manager.save_json({"market": market, "result": result}, output_dir, "equilibrium")

        prices = ", ".join(f"{k}={v:.6g}" for k, v in sorted(result.prices.licensed.items()))
        flags = f"\n⚠️ 标记: {', '.join(result.diagnostics.flags)}" if result.diagnostics.flags else ""
        message = f"""✅ 均衡求解完成！

📊 C = {market.capacity:g}
- 授权价格: {prices}
- 区制: {result.regime.value}
- 社会福利 SW: {result.report.social_welfare:.10g}
- 消费者剩余 CS: {result.report.consumer_surplus:.10g}
- Wardrop 残差: {result.diagnostics.wardrop_residual:.2e}{flags}

📁 结果文件: {path}"""
        return ToolResult(message=message, files=[path])
