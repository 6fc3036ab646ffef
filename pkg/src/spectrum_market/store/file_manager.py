"""
File Manager for the spectrum market solvers

CSV 与 JSON 输出的统一入口。输出逐字节稳定：浮点数固定格式，JSON 键排序，
换行固定为 \\n，不写时间戳。
"""

import json
import logging
import math
import os
from enum import Enum
from typing import Any

import pandas as pd
from pydantic import BaseModel

logger = logging.getLogger(__name__)


def to_jsonable(data: Any) -> Any:
    """pydantic 模型、枚举与元组转为 JSON 结构；inf / nan 写成字符串"""
    if isinstance(data, BaseModel):
        return to_jsonable(data.model_dump())
    if isinstance(data, Enum):
        return data.value
    if isinstance(data, dict):
        return {str(k): to_jsonable(v) for k, v in data.items()}
    if isinstance(data, (list, tuple)):
        return [to_jsonable(v) for v in data]
    if isinstance(data, bool) or data is None or isinstance(data, (int, str)):
        return data
    if hasattr(data, "item"):
        # numpy 标量
        data = data.item()
    if isinstance(data, float):
        if math.isnan(data):
            return "nan"
        if math.isinf(data):
            return "inf" if data > 0 else "-inf"
        return data
    return str(data)


class DirectoryManager:
    """目录操作管理器"""

    @staticmethod
    def ensure_directory(dir_path: str) -> str:
        if dir_path and not os.path.isdir(dir_path):
            os.makedirs(dir_path, exist_ok=True)
            logger.info(f"[FileManager] 创建目录: {dir_path}")
        return dir_path

    @staticmethod
    def output_path(base_dir: str, filename: str, extension: str) -> str:
        suffix = f".{extension}"
        if not filename.endswith(suffix):
            filename += suffix
        return os.path.join(base_dir, filename)


class CSVManager:
    """CSV 写出，列顺序即 DataFrame 的列顺序"""

    FLOAT_FORMAT = "%.12g"

    def write_csv(self, df: pd.DataFrame, file_path: str) -> str:
        DirectoryManager.ensure_directory(os.path.dirname(file_path))
        try:
            df.to_csv(file_path, encoding="utf-8", index=False,
                      float_format=self.FLOAT_FORMAT, lineterminator="\n")
        except OSError as e:
            logger.error(f"[FileManager] 写入CSV失败 {file_path}: {e}")
            raise
        logger.info(f"[FileManager] CSV已保存: {file_path} ({len(df)} 行)")
        return file_path


class JSONManager:
    """JSON 读写，写出时键排序"""

    def read_json(self, file_path: str) -> Any:
        with open(file_path, "r", encoding="utf-8") as f:
            return json.load(f)

    def write_json(self, data: Any, file_path: str) -> str:
        DirectoryManager.ensure_directory(os.path.dirname(file_path))
        try:
            with open(file_path, "w", encoding="utf-8", newline="\n") as f:
                json.dump(to_jsonable(data), f, ensure_ascii=False, indent=2, sort_keys=True)
                f.write("\n")
        except OSError as e:
            logger.error(f"[FileManager] 写入JSON失败 {file_path}: {e}")
            raise
        logger.info(f"[FileManager] JSON已保存: {file_path}")
        return file_path


class FileManager:
    """统一文件管理器"""

    def __init__(self):
        self.csv = CSVManager()
        self.json = JSONManager()
        self.directory = DirectoryManager()

    def save_csv(self, df: pd.DataFrame, output_dir: str, filename: str) -> str:
        """保存 DataFrame 到 output_dir/filename.csv"""
        return self.csv.write_csv(df, self.directory.output_path(output_dir, filename, "csv"))

    def save_json(self, data: Any, output_dir: str, filename: str) -> str:
        """保存数据到 output_dir/filename.json"""
        return self.json.write_json(data, self.directory.output_path(output_dir, filename, "json"))

    def read_json(self, file_path: str) -> Any:
        return self.json.read_json(file_path)
