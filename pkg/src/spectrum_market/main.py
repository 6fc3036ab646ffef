#!/usr/bin/env python
import argparse
import logging
import sys
from typing import List, Optional

from dotenv import load_dotenv

from spectrum_market.config.presets import PRESET_ORDER, uniform_grid
from spectrum_market.config.solver_config import SolverSettings, get_settings
from spectrum_market.tools import (
    EXIT_ERROR,
    CertificationTool,
    ReproductionTool,
    SolveTool,
    SweepExportTool,
    ToolResult,
    ValidationTool,
)

logger = logging.getLogger(__name__)

# 加载环境变量（SPECTRUM_ 前缀的求解器配置）
load_dotenv()


# (参数, SolverSettings 字段, 类型, 说明)
_SETTING_FLAGS = [
    ("--wardrop-tol", "wardrop_tol", float, "Wardrop 互补条件容差"),
    ("--bisection-tol", "bisection_tol", float, "凸延迟水平二分容差"),
    ("--golden-tol", "golden_tol", float, "有界黄金分割搜索的价格容差"),
    ("--fallback-grid-points", "fallback_grid_points", int, "非凹情形的回退网格点数"),
    ("--damping", "damping", float, "最优反应迭代阻尼 (0, 1]"),
    ("--max-iterations", "max_iterations", int, "最优反应迭代上限"),
    ("--convergence-tol", "convergence_tol", float, "迭代收敛阈值"),
    ("--jump-tol", "jump_tol", float, "价格跳跃阈值"),
    ("--slope-tol", "slope_tol", float, "福利斜率视为平坦的阈值"),
    ("--resolution", "verification_resolution", float, "偏离检验的价格网格分辨率"),
    ("--deviation-tol", "deviation_tol", float, "偏离收益容差"),
    ("--c-min", "sweep_c_min", float, "对数网格的最小正容量"),
    ("--c-max", "sweep_c_max", float, "网格的最大容量"),
    ("--points", "sweep_points", int, "对数网格点数"),
    ("--workers", "workers", int, "扫描并行进程数"),
]


def _common_options() -> argparse.ArgumentParser:
    """所有子命令共享的全局参数"""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--verbose", action="store_true", help="输出 DEBUG 日志")
    common.add_argument("--output", default="outputs", help="输出目录")
    for flag, field, kind, text in _SETTING_FLAGS:
        default = SolverSettings.model_fields[field].default
        common.add_argument(flag, type=kind, dest=field, help=f"{text} (默认 {default:g})")
    common.add_argument("--grid-step", type=float, dest="grid_step", help="改用 [0, c-max] 上的等距网格")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_options()
    parser = argparse.ArgumentParser(prog="spectrum_market", description="带非授权频段的频谱市场价格竞争均衡求解器")
    verbs = parser.add_subparsers(dest="verb", required=True)

    solve = verbs.add_parser("solve", parents=[common], help="求解单个市场的均衡")
    solve.add_argument("config", help="JSON 市场配置")
    solve.add_argument("--capacity", type=float, help="覆盖非授权容量 C")
    solve.add_argument("--format", choices=["json", "csv"], default="json")

    sweep = verbs.add_parser("sweep", parents=[common], help="容量扫描并导出 CSV 与断点 JSON")
    sweep.add_argument("config", help="JSON 市场配置")
    sweep.add_argument("--divided", action="store_true", help="容量平分给在位者的对照扫描")
    sweep.add_argument("--name", default="sweep", help="输出文件名前缀")

    reproduce = verbs.add_parser("reproduce", parents=[common], help="复现内置预设")
    reproduce.add_argument("preset", help=f"{' | '.join(PRESET_ORDER)} | all")

    validate = verbs.add_parser("validate", parents=[common], help="校验市场配置")
    validate.add_argument("config", help="JSON 市场配置")

    certify = verbs.add_parser("certify", parents=[common], help="生成均衡偏离证书")
    certify.add_argument("config", help="JSON 市场配置")
    certify.add_argument("--capacity", type=float, help="覆盖非授权容量 C")
    return parser


def _settings(args: argparse.Namespace) -> SolverSettings:
    return get_settings().with_overrides(**{field: getattr(args, field) for _, field, _, _ in _SETTING_FLAGS})


def _dispatch(args: argparse.Namespace, settings: SolverSettings) -> ToolResult:
    if args.verb == "solve":
        return SolveTool(settings)._run(args.config, args.output, args.capacity, args.format)
    if args.verb == "sweep":
        grid = uniform_grid(settings.sweep_c_max, args.grid_step) if args.grid_step else None
        return SweepExportTool(settings, settings.workers)._run(args.config, args.output, grid, args.divided, args.name)
    if args.verb == "reproduce":
        return ReproductionTool(settings, settings.workers)._run(args.preset, args.output)
    if args.verb == "validate":
        return ValidationTool()._run(args.config, args.output)
    return CertificationTool(settings)._run(args.config, args.output, args.capacity, args.verification_resolution)


def main(argv: Optional[List[str]] = None) -> int:
    """命令行入口，返回退出码 0 / 1 / 2"""
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )

    try:
        settings = _settings(args)
    except ValueError as e:
        print(f"❌ 参数错误: {e}")
        return EXIT_ERROR
    if args.verbose:
        print(settings.summary())

    try:
        result = _dispatch(args, settings)
    except Exception as e:
        print(f"❌ 执行过程中出现错误: {e}")
        print("详细错误信息请查看日志")
        logger.error(f"执行异常: {str(e)}", exc_info=True)
        return EXIT_ERROR

    print(result.message)
    return result.exit_code


def run():
    sys.exit(main())


if __name__ == "__main__":
    run()
