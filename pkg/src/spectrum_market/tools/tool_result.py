from typing import List

from pydantic import BaseModel, Field

# 命令行退出码
EXIT_OK = 0
EXIT_FAILED = 1      # 配置校验失败或复现/验证未通过
EXIT_ERROR = 2       # 求解器错误或用法错误


class ToolResult(BaseModel):
    """工具执行结果：给用户看的报告、退出码与写出的文件"""

    message: str
    exit_code: int = EXIT_OK
    files: List[str] = Field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.exit_code == EXIT_OK
