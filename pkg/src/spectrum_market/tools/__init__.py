from .certification_tool import CertificationTool
from .reproduction_tool import ReproductionTool
from .solve_tool import SolveTool
from .sweep_export_tool import SweepExportTool
from .tool_result import EXIT_ERROR, EXIT_FAILED, EXIT_OK, ToolResult
from .validation_tool import ValidationTool


__all__ = [
    'SolveTool',
    'SweepExportTool',
    'ReproductionTool',
    'ValidationTool',
    'CertificationTool',
    'ToolResult',
    'EXIT_OK',
    'EXIT_FAILED',
    'EXIT_ERROR',
]
