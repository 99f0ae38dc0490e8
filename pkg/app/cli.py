# 命令行入口
"""
python -m app <子命令>

    exponents   输出五条解析误差指数曲线（CSV）
    simulate    运行蒙特卡洛仿真（结果 CSV），可选经验指数拟合与逐次试验记录
    crossover   线性方案与两阶段方案指数曲线的交叉点
    verify      运行验收套件

退出码：0 成功，1 验收失败，2 参数错误，3 内部约束被违反（能量账本）。
参数优先级：命令行 > --config JSON 文件 > 环境变量/.env > 默认值。
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from app.config import get_settings
from app.schemas.simulation import ExperimentConfig
from app.services import exponents as ex
from app.services import simulation_service
from app.services.channel import EnergyConstraintError
from app.services.montecarlo import results_to_csv
from app.services.verification import run_acceptance

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_USAGE = 2
EXIT_INVARIANT = 3

# 可由 JSON 配置文件提供的键（与命令行同名，下划线形式）
CONFIG_KEYS = (
    "scheme", "M", "P", "alpha", "n", "nP", "n_grid", "alpha_grid", "lam", "s", "delta",
    "schedule", "trials", "seed", "workers", "output", "zero_noise",
)


def _float_list(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"无法解析为浮点列表: {text}")


def _int_list(text: str) -> List[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"无法解析为整数列表: {text}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON 配置文件（命令行参数优先）")
    common.add_argument("--seed", type=int, help="随机种子，缺省取环境变量 DEFAULT_SEED")
    common.add_argument("--workers", type=int, help="并行进程数（不影响结果）")
    common.add_argument("--log-level", help="日志级别，缺省取 LOG_LEVEL")
    common.add_argument("--M", type=int, help="消息数")
    common.add_argument("--P", type=float, help="功率")
    common.add_argument("--output", help="输出路径，缺省写到 stdout")

    parser = argparse.ArgumentParser(prog="python -m app", description="带噪反馈 AWGN 误差指数实验")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("exponents", parents=[common], help="解析曲线")
    p.add_argument("--alpha-grid", type=_float_list, help="逗号分隔的 α 网格")
    p.add_argument("--alpha-max", type=float, default=0.25, help="等距网格上界（缺省 0.25）")
    p.add_argument("--points", type=int, default=26, help="等距网格点数（缺省 26）")
    p.add_argument("--weak", action="store_true", help="线性曲线只输出较弱的闭式下界")

    p = sub.add_parser("simulate", parents=[common], help="蒙特卡洛仿真")
    p.add_argument("--scheme", help="baseline / two_stage / linear")
    p.add_argument("--alpha", type=float, help="反馈噪声方差")
    p.add_argument("--n", type=int, help="码长")
    p.add_argument("--nP", type=float, help="总能量（n = nP/P）")
    p.add_argument("--n-grid", type=_int_list, help="逗号分隔的 n 网格")
    p.add_argument("--lam", "--lambda", dest="lam", type=float, help="λ 覆盖值")
    p.add_argument("--s", type=float, help="两阶段保护边距 s")
    p.add_argument("--delta", type=float, help="线性方案 δ")
    p.add_argument("--schedule", choices=["noisy", "noise_free"], help="线性方案调度")
    p.add_argument("--trials", type=int, help="每个网格点的试验次数")
    p.add_argument("--fit", action="store_true", help="在 --n-grid 上拟合经验指数")
    p.add_argument("--transcripts", type=Path, help="逐次试验记录 CSV 的输出路径")
    p.add_argument("--zero-noise", action="store_true", default=None, help="诊断开关：噪声置零")

    p = sub.add_parser("crossover", parents=[common], help="交叉点")
    p.add_argument("--weak", action="store_true", help="crossover_alpha 使用较弱的闭式下界")

    p = sub.add_parser("verify", parents=[common], help="验收套件")
    p.add_argument("--quick", action="store_true", help="运行缩小试验规模的子集")
    p.add_argument("--only", type=_int_list, help="只运行指定编号的准则")

    return parser


def load_config(args: argparse.Namespace) -> ExperimentConfig:
    """合并 JSON 配置文件与命令行参数"""
    merged: Dict[str, Any] = {}
    if args.config:
        try:
            data = json.loads(args.config.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise ValueError(f"无法读取配置文件 {args.config}: {e}") from e
        if not isinstance(data, dict):
            raise ValueError("配置文件顶层必须是 JSON 对象")
        merged.update({k: v for k, v in data.items() if k in CONFIG_KEYS})
    for key in CONFIG_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value

    settings = get_settings()
    merged.setdefault("M", settings.default_M)
    merged.setdefault("P", settings.default_P)
    merged.setdefault("seed", settings.default_seed)
    merged.setdefault("workers", settings.workers)
    return ExperimentConfig(**merged)


def _optional(value: Optional[float]) -> str:
    return "" if value is None else format(value, ".17g")


def _write(text: str, output: Optional[str]) -> None:
    if output:
        Path(output).write_text(text, encoding="utf-8")
        logger.info(f"已写入 {output}")
    else:
        sys.stdout.write(text)


# ============ 子命令 ============

def cmd_exponents(args: argparse.Namespace, config: ExperimentConfig) -> int:
    if config.alpha_grid:
        grid = config.alpha_grid
    else:
        if args.points < 2 or args.alpha_max <= 0:
            raise ValueError(f"网格参数无效: alpha_max={args.alpha_max}, points={args.points}")
        grid = np.linspace(0.0, args.alpha_max, args.points).tolist()

    table = ex.emit_curves(config.M, config.P, grid)
    if args.weak:
        table.rows = [r for r in table.rows if r.scheme != ex.Scheme.LINEAR]
    _write(table.to_csv(), config.output)
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace, config: ExperimentConfig) -> int:
    if args.transcripts:
        frame = simulation_service.transcripts(config)
        frame.to_csv(args.transcripts, index=False)
        logger.info(f"逐次试验记录已写入 {args.transcripts}")

    if args.fit:
        result, target = simulation_service.fit(config)
        seed = simulation_service.resolve_seed(config)
        rows = [
            simulation_service.SimulationOutcome(
                simulation_service.make_scheme(config, n), est, seed
            ).row
            for n, est in sorted(result.estimates.items())
        ]
        lines = [
            f"fit_slope={result.slope:.17g}",
            f"fit_stderr={result.stderr:.17g}",
            f"analytic_exponent={_optional(target)}",
            f"excluded_n={','.join(str(n) for n in result.excluded)}",
        ]
        if config.output:
            _write(results_to_csv(rows), config.output)
            print("\n".join(lines))
        else:
            sys.stdout.write(results_to_csv(rows))
            print("\n".join(f"# {line}" for line in lines))
        return EXIT_OK

    outcomes = simulation_service.simulate_grid(config)
    _write(results_to_csv([o.row for o in outcomes]), config.output)
    return EXIT_OK


def cmd_crossover(args: argparse.Namespace, config: ExperimentConfig) -> int:
    report = ex.crossover_report(config.M, config.P)
    alpha = report.weak_alpha if args.weak else report.strong_alpha
    lines = [f"M={config.M} P={config.P}"]
    if alpha is None:
        lines.append("在 (0, 1/4] 内两条曲线不相交")
    else:
        value = report.weak_exponent if args.weak else report.strong_exponent
        lines.append(f"crossover_alpha={alpha:.17g}")
        lines.append(f"crossover_exponent={value:.17g}")
    for tag, root, two_stage, linear in (
        ("strong", report.strong_alpha, report.strong_exponent, report.strong_linear_exponent),
        ("weak", report.weak_alpha, report.weak_exponent, report.weak_linear_exponent),
    ):
        lines.append(f"{tag}_crossover_alpha={_optional(root)}")
        lines.append(f"{tag}_two_stage_exponent={_optional(two_stage)}")
        lines.append(f"{tag}_linear_exponent={_optional(linear)}")
    lines.append(f"reference_alpha={report.reference_alpha:g}")
    discrepancy = report.discrepancy(weak=args.weak)
    if discrepancy is not None:
        lines.append(f"relative_discrepancy={discrepancy:+.6f}")
    _write("\n".join(lines) + "\n", config.output)
    return EXIT_OK


def cmd_verify(args: argparse.Namespace, config: ExperimentConfig) -> int:
    results = run_acceptance(
        seed=simulation_service.resolve_seed(config),
        workers=config.workers or 1,
        quick=args.quick,
        only=args.only,
    )
    for r in results:
        print(r.line())
    failed = [r.number for r in results if not r.passed]
    if failed:
        print(f"失败准则: {failed}")
        return EXIT_VERIFY_FAILED
    print(f"全部 {len(results)} 条准则通过")
    return EXIT_OK


COMMANDS = {
    "exponents": cmd_exponents,
    "simulate": cmd_simulate,
    "crossover": cmd_crossover,
    "verify": cmd_verify,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    settings = get_settings()
    logging.basicConfig(
        level=(args.log_level or settings.log_level).upper(),
        stream=sys.stderr,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )

    try:
        config = load_config(args)
        if args.command == "simulate" and config.n is None and not config.n_grid:
            raise ValueError("simulate 需要 --n、--nP 或 --n-grid")
        return COMMANDS[args.command](args, config)
    except EnergyConstraintError as e:
        logger.error(f"内部约束被违反: {e}")
        return EXIT_INVARIANT
    except ValueError as e:
        print(f"参数错误: {e}", file=sys.stderr)
        return EXIT_USAGE
