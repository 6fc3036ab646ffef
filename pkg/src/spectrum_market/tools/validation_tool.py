import json
import logging
from typing import Optional

from ..model import validate_market
from ..store import FileManager
from .tool_result import EXIT_ERROR, EXIT_FAILED, EXIT_OK, ToolResult

logger = logging.getLogger(__name__)


class ValidationTool:
    """配置校验工具 - 报告结构错误（带字段路径）与均衡分析假设的警告"""
    name: str = "validate"
    description: str = "读取 JSON 市场配置，列出结构错误和规则警告，可选写出 validation.json"

    def __init__(self):
        self.file_manager = FileManager()

    def _run(self, config_path: str, output_dir: Optional[str] = None) -> ToolResult:
        """
        校验配置文件

        Args:
            config_path: JSON 配置路径
            output_dir: 给出时把报告写到 output_dir/validation.json

        Returns:
            结构错误时 exit_code 为 1，文件不可读时为 2
        """
        logger.info(f"[ValidationTool] 校验配置: {config_path}")
        try:
            data = self.file_manager.read_json(config_path)
        except json.JSONDecodeError as e:
            violation = ("<root>", f"malformed JSON at line {e.lineno} column {e.colno}: {e.msg}")
            return ToolResult(message=self._format([violation], [], []), exit_code=EXIT_FAILED)
        except OSError as e:
            return ToolResult(message=f"❌ 无法读取配置文件: {e}", exit_code=EXIT_ERROR)

        report = validate_market(data)
        files = []
        if output_dir:
            files.append(self.file_manager.save_json({
                "ok": report.ok,
                "errors": [{"path": p, "message": m} for p, m in report.errors],
                "warnings": [{"path": p, "message": m} for p, m in report.warnings],
                "notes": report.notes,
            }, output_dir, "validation"))

        return ToolResult(
            message=self._format(report.errors, report.warnings, report.notes),
            exit_code=EXIT_OK if report.ok else EXIT_FAILED,
            files=files,
        )

    @staticmethod
    def _format(errors, warnings, notes) -> str:
        if errors:
            lines = [f"❌ 配置无效，{len(errors)} 处错误:"] + [f"   - {p}: {m}" for p, m in errors]
        else:
            lines = ["✅ 配置有效"]
        lines += [f"   ⚠️ {p}: {m}" for p, m in warnings]
        lines += [f"   📝 {n}" for n in notes]
        return "\n".join(lines)
