import logging
from typing import Optional

from ..config.solver_config import SolverSettings, get_settings
from ..equilibrium import solve, verify_equilibrium
from ..exceptions import MarketConfigError, SpectrumMarketError
from ..model import load_market
from ..store import FileManager
from .tool_result import EXIT_ERROR, EXIT_FAILED, EXIT_OK, ToolResult

logger = logging.getLogger(__name__)


class CertificationTool:
    """均衡证书工具 - 网格穷举单边价格偏离并检查非授权价格为零"""
    name: str = "certify"
    description: str = "求解均衡后对每个服务商做授权与非授权价格偏离检验，写出 certificate.json"

    def __init__(self, settings: Optional[SolverSettings] = None):
        self.settings = settings or get_settings()
        self.file_manager = FileManager()

    def _run(self, config_path: str, output_dir: str = "outputs", capacity: Optional[float] = None,
             resolution: Optional[float] = None) -> ToolResult:
        """
        生成均衡证书

        Args:
            config_path: JSON 配置路径
            output_dir: 输出目录
            capacity: 覆盖配置中的非授权容量
            resolution: 偏离价格网格分辨率，默认取配置

        Returns:
            证书未通过时 exit_code 为 1
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
            result = solve(market, self.settings)
            report = verify_equilibrium(market, result, resolution, self.settings)
        except SpectrumMarketError as e:
            logger.error(f"[CertificationTool] 证书生成失败: {e}")
            return ToolResult(message=f"❌ 证书生成失败: {e}", exit_code=EXIT_ERROR)

        certified = result.with_certificate(report.certificate)
        # 与 equilibrium.json 同构，证书位于 result.diagnostics
        path = self.file_manager.save_json({
            "market": market,
            "result": certified,
            "unlicensed_prices_zero": report.unlicensed_prices_zero,
            "no_service_ok": report.no_service_ok,
            "passed": report.passed,
        }, output_dir, "certificate")

        status = "✅ 证书通过" if report.passed else "❌ 证书未通过"
        message = f"""{status}

🔍 C = {market.capacity:g}
- 最大偏离收益: {report.certificate.max_gain:.3e} ({report.certificate.worst_deviator or '-'})
- 网格分辨率: {report.certificate.resolution:g}
- 非授权价格为零: {report.unlicensed_prices_zero}

📁 结果文件: {path}"""
        return ToolResult(message=message, exit_code=EXIT_OK if report.passed else EXIT_FAILED, files=[path])
