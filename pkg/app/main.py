# app/main.py - 命令行入口
import argparse
import asyncio
import json
import logging
import sys
import time
import uuid
from pathlib import Path
from typing import List, Optional

from pydantic import ValidationError

from app.config import get_settings, load_json_model
from app.core.random_utils import make_rng
from app.exceptions import ConfigError, handle_exception
from app.schemas.common import BaseResponse
from app.schemas.experiment import ExperimentKind, ExperimentSpec
from app.services.channel_service import channel_service
from app.services.experiment_service import experiment_service
from app.services.joint_service import joint_service
from app.services.zeroforcing_service import zeroforcing_service
from app.storage import result_store, scenario_store

settings = get_settings()
logger = logging.getLogger(__name__)

SWEEP_COMMANDS = {
    "sweep-n": ExperimentKind.SWEEP_N,
    "sweep-rank": ExperimentKind.SWEEP_RANK,
    "sweep-snr": ExperimentKind.SWEEP_SNR,
    "validate": ExperimentKind.VALIDATE,
}


def configure_logging(verbose: bool = False) -> None:
    """配置日志"""
    level = logging.DEBUG if verbose or settings.DEBUG else getattr(logging, settings.LOG_LEVEL, logging.INFO)
    logging.basicConfig(
        level=level,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        force=True,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="irs-noma", description=f"{settings.PROJECT_NAME} {settings.VERSION}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=str, help="experiment JSON file")
    common.add_argument("--seed", type=int, help="override the scenario seed")
    common.add_argument("--output", type=str, help="output file path")
    common.add_argument("--trials", type=int, help="number of random scenarios per sweep point")
    common.add_argument("-v", "--verbose", action="store_true", help="debug logging")

    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("generate", parents=[common], help="generate a scenario file")
    run = sub.add_parser("run", parents=[common], help="joint optimization on one scenario")
    run.add_argument("--scenario", type=str, help="scenario file written by 'generate'")
    run.add_argument("--dinkelbach-trace", type=str, help="write the last Dinkelbach trace of every pair to this CSV")
    for name in SWEEP_COMMANDS:
        p = sub.add_parser(name, parents=[common], help=f"{SWEEP_COMMANDS[name].value} experiment")
        p.add_argument("--values", type=float, nargs="+", help="override sweep values")
    return parser


def load_spec(args: argparse.Namespace, kind: ExperimentKind) -> ExperimentSpec:
    """读取配置并应用命令行覆盖"""
    spec = load_json_model(args.config, ExperimentSpec) if args.config else ExperimentSpec()
    changes = {"kind": kind}
    if args.seed is not None:
        changes["base"] = spec.base.with_updates(seed=args.seed)
    if args.trials is not None:
        changes["trials"] = args.trials
    if getattr(args, "values", None):
        changes["sweep_values"] = [int(v) if float(v).is_integer() else v for v in args.values]
    try:
        return spec.with_updates(**changes)
    except ValidationError as e:
        errors = [f"{'.'.join(str(p) for p in err['loc']) or '<root>'}: {err['msg']}" for err in e.errors()]
        raise ConfigError("Invalid experiment: " + "; ".join(errors), context={"errors": errors})


def default_output(name: str) -> Path:
    return Path(settings.OUTPUT_DIR) / name


async def cmd_generate(args: argparse.Namespace) -> dict:
    spec = load_spec(args, ExperimentKind.SINGLE_RUN)
    pairs = channel_service.build_scenario(spec.base)
    path = Path(args.output) if args.output else default_output(f"scenario_seed{spec.base.seed}.json")
    await scenario_store.dump_scenario(spec.base, pairs, path)
    return {"path": str(path), "num_pairs": len(pairs), "seed": spec.base.seed}


async def cmd_run(args: argparse.Namespace) -> dict:
    spec = load_spec(args, ExperimentKind.SINGLE_RUN)
    if args.scenario:
        cfg, pairs = await scenario_store.load_scenario(args.scenario)
        if args.seed is not None:
            cfg = cfg.with_updates(seed=args.seed)
    else:
        cfg = spec.base
        pairs = channel_service.build_scenario(cfg)
    beams = zeroforcing_service.zeroforcing_beams(pairs)
    solution = joint_service.joint_optimize(pairs, beams, cfg, spec.solver, make_rng(cfg.seed))

    path = Path(args.output) if args.output else default_output("run_trace.csv")
    await result_store.write_joint_trace(solution, path)
    if args.dinkelbach_trace:
        await result_store.write_dinkelbach_trace(solution.dinkelbach_traces, args.dinkelbach_trace)
    return {
        "converged": solution.converged,
        "iterations": solution.iterations,
        "total_power_w": solution.total_power,
        "min_rate_bps_hz": solution.min_rate,
        "p1_w": solution.powers.p1.tolist(),
        "p2_w": solution.powers.p2.tolist(),
        "sinr_strong": solution.sinr_strong.tolist(),
        "sinr_weak": solution.sinr_weak.tolist(),
        "pmax_w": solution.pmax,
        "trace": str(path),
        "dinkelbach_trace": args.dinkelbach_trace,
    }


async def cmd_experiment(args: argparse.Namespace) -> dict:
    kind = SWEEP_COMMANDS[args.command]
    spec = load_spec(args, kind)
    rows = await experiment_service.run(spec)
    path = Path(args.output or spec.output or default_output(f"{kind.value}.csv"))
    await result_store.write_results(rows, path)
    return {
        "kind": kind.value,
        "rows": len(rows),
        "failures": sum(r.failures for r in rows),
        "path": str(path),
    }


COMMANDS = {"generate": cmd_generate, "run": cmd_run, **{name: cmd_experiment for name in SWEEP_COMMANDS}}


def cli_main(argv: Optional[List[str]] = None) -> int:
    """执行子命令，返回退出码"""
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)
    trace_id = str(uuid.uuid4())
    start_time = time.time()

    try:
        data = asyncio.run(COMMANDS[args.command](args))
    except Exception as e:
        code, payload = handle_exception(e, trace_id)
        print(json.dumps(payload), file=sys.stderr)
        return code

    logger.info(f"{args.command} finished in {time.time() - start_time:.2f}s - Trace: {trace_id}")
    print(BaseResponse[dict](data=data, trace_id=trace_id).model_dump_json())
    return 0


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
