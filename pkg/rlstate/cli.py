# rlstate/cli.py
"""
Command-line surface. One subcommand per run; every handler reads its
inputs, calls into the library and writes reports. Errors surface on
stderr as `rlstate:error:<CODE>: <message>`.
"""

import argparse
import json
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, TextIO

import pandas as pd
from pydantic import BaseModel, ValidationError

from rlstate import analytics
from rlstate.errors import ErrorCode, InvalidInputError, RlStateError, UsageError
from rlstate.inference import GameStatePredictor
from rlstate.io import (load_checkpoint, read_events, save_checkpoint, to_json, write_events, write_json,
                        write_table)
from rlstate.log import get_logger
from rlstate.models import LeagueSpec, TackleEvent, TrainConfig, parse_context
from rlstate.settings import get_settings
from rlstate.synthdata import simulate_league
from rlstate.training import evaluate, history_frame, train_models

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2

COMMANDS = ("simulate", "train", "evaluate", "predict", "dvoa", "scoreline", "set-trace", "decisions", "spatial")


class _ArgumentParser(argparse.ArgumentParser):
    """argparse that raises UsageError instead of exiting."""

    def error(self, message: str):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog="rlstate", description="Rugby league game-state engine")
    sub = parser.add_subparsers(dest="command", parser_class=_ArgumentParser)

    p = sub.add_parser("simulate", help="generate a synthetic league as JSONL events")
    p.add_argument("--config", required=True, help="LeagueSpec JSON file")
    p.add_argument("--out", required=True, help="output JSONL path")
    p.add_argument("--seed", type=int, help="override the config seed")

    p = sub.add_parser("train", help="train the MDN and play-selection model")
    p.add_argument("--events", required=True)
    p.add_argument("--config", help="TrainConfig JSON file (defaults apply when omitted)")
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--history", required=True, help="loss history CSV path")

    p = sub.add_parser("evaluate", help="print the evaluation report of a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--events", required=True)

    p = sub.add_parser("predict", help="print the state distribution summary of one tackle context")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--event", required=True, help="JSON object or path to a JSON file")

    p = sub.add_parser("dvoa", help="league table with offensive/defensive DVOA")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--events", required=True)
    p.add_argument("--out", required=True)
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--cumulative", action="store_true", help="running DVOA through each round")
    mode.add_argument("--spatial", action="store_true", help="split at --threshold along the field")
    p.add_argument("--threshold", type=float, default=75.0)
    p.add_argument("--raw-context", action="store_true", help="expectations use the actual teams")

    p = sub.add_parser("scoreline", help="final-score distribution trace of one match")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--events", required=True)
    p.add_argument("--match-id", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--team", type=int)
    p.add_argument("--safe-margin", type=float, default=0.0,
                   help="also require the live margin to stay beyond this (e.g. 6)")

    p = sub.add_parser("set-trace", help="momentum and play values through one set")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--events", required=True)
    p.add_argument("--match-id", required=True)
    p.add_argument("--set-id", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--percentile", type=float)

    p = sub.add_parser("decisions", help="last-tackle decision valuation")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--events", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--zones", action="store_true", help="frequency and expected points beyond --x-min")
    p.add_argument("--x-min", type=float, default=80.0)
    p.add_argument("--min-support", type=int, default=analytics.MIN_SUPPORT)

    p = sub.add_parser("spatial", help="predicted meters of one context at every field location")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--event", required=True, help="JSON object or path to a JSON file")
    p.add_argument("--out", required=True)
    p.add_argument("--x-step", type=float, default=10.0)
    p.add_argument("--y-step", type=float, default=10.0)
    return parser


def _read_json(path: str) -> dict:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise InvalidInputError(f"{path}: no such file") from None
    except json.JSONDecodeError as e:
        raise InvalidInputError(f"{path}: malformed JSON ({e.msg} at line {e.lineno})") from None
    if not isinstance(data, dict):
        raise InvalidInputError(f"{path}: expected a JSON object")
    return data


def _validate_config(model: type, data: dict, source: str) -> BaseModel:
    try:
        return model.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        where = ".".join(str(p) for p in first.get("loc", ())) or "config"
        raise InvalidInputError(f"{source}: {where}: {first.get('msg')}") from None


def _write_report(path: str, report) -> None:
    """CSV for DataFrames unless the path ends in .json."""
    if isinstance(report, pd.DataFrame) and not path.endswith(".json"):
        write_table(path, report)
    else:
        write_json(path, report)


class CommandHandler:
    """Routes a parsed command line to its handle_<command> method."""

    def __init__(self, stdout: Optional[TextIO] = None):
        self.stdout = stdout or sys.stdout
        self.handlers: Dict[str, Callable[[argparse.Namespace], None]] = {
            name: getattr(self, "handle_" + name.replace("-", "_")) for name in COMMANDS
        }

    def emit(self, payload) -> None:
        self.stdout.write(to_json(payload) + "\n")

    def _predictor(self, args: argparse.Namespace) -> GameStatePredictor:
        return GameStatePredictor.from_checkpoint(load_checkpoint(args.checkpoint))

    def _events(self, path: str) -> List[TackleEvent]:
        try:
            return read_events(path)
        except FileNotFoundError:
            raise InvalidInputError(f"{path}: no such file") from None

    def _match_events(self, args: argparse.Namespace) -> List[TackleEvent]:
        events = [e for e in self._events(args.events) if e.match_id == args.match_id]
        if not events:
            raise InvalidInputError(f"no tackles for match '{args.match_id}'")
        return sorted(events, key=lambda e: -e.time_remaining)

    def handle_simulate(self, args: argparse.Namespace) -> None:
        spec = _validate_config(LeagueSpec, _read_json(args.config), args.config)
        if args.seed is not None:
            spec = spec.model_copy(update={"seed": args.seed})
        write_events(args.out, simulate_league(spec))

    def handle_train(self, args: argparse.Namespace) -> None:
        if args.config:
            config = _validate_config(TrainConfig, _read_json(args.config), args.config)
        else:
            config = TrainConfig(seed=get_settings().seed)
        run = train_models(self._events(args.events), config)
        save_checkpoint(args.out, run.checkpoint)
        write_table(args.history, history_frame(run.history))
        self.emit(run.report)

    def handle_evaluate(self, args: argparse.Namespace) -> None:
        self.emit(evaluate(load_checkpoint(args.checkpoint), self._events(args.events)))

    def _context(self, source: str) -> TackleEvent:
        if Path(source).is_file():
            data = _read_json(source)
        else:
            try:
                data = json.loads(source)
            except json.JSONDecodeError as e:
                raise InvalidInputError(f"--event: neither a file nor JSON ({e.msg})") from None
            if not isinstance(data, dict):
                raise InvalidInputError("--event: expected a JSON object")
        return parse_context(data)

    def handle_predict(self, args: argparse.Namespace) -> None:
        self.emit(self._predictor(args).predict(self._context(args.event)))

    def handle_dvoa(self, args: argparse.Namespace) -> None:
        model = self._predictor(args)
        events = self._events(args.events)
        neutral = not args.raw_context
        if args.cumulative:
            report = analytics.cumulative_dvoa(events, model, neutral_teams=neutral)
        elif args.spatial:
            splits = analytics.spatial_split_dvoa(events, model, args.threshold, neutral_teams=neutral)
            report = pd.concat([table.teams.assign(zone=name) for name, table in splits.items()],
                               ignore_index=True)
        else:
            dvoa = analytics.compute_dvoa(events, model, neutral_teams=neutral)
            report = analytics.league_table(events, dvoa)
        _write_report(args.out, report)

    def handle_scoreline(self, args: argparse.Namespace) -> None:
        trace = analytics.scoreline_trace(self._match_events(args), self._predictor(args), args.team)
        over = analytics.game_over_point(trace, args.safe_margin)
        if args.out.endswith(".json"):
            write_json(args.out, {"trace": trace, "game_over_point": over})
        else:
            write_table(args.out, trace.to_frame())
        self.emit({"match_id": trace.match_id, "team_idx": trace.team_idx, "final_diff": trace.final_diff,
                   "game_over_point": over})

    def handle_set_trace(self, args: argparse.Namespace) -> None:
        model = self._predictor(args)
        events = self._events(args.events)
        set_events = [e for e in events if e.match_id == args.match_id and e.set_id == args.set_id]
        if not set_events:
            raise InvalidInputError(f"no tackles for match '{args.match_id}' set {args.set_id}")
        baseline = analytics.baseline_table(events, model)
        trace = analytics.set_trace(set_events, model, baseline, args.percentile)
        _write_report(args.out, trace if args.out.endswith(".json") else trace.to_frame())

    def handle_decisions(self, args: argparse.Namespace) -> None:
        model = self._predictor(args)
        events = self._events(args.events)
        if args.zones:
            report = analytics.decision_zone_summary(events, model, args.x_min, min_support=args.min_support)
        else:
            report = analytics.decision_table(events, model, min_support=args.min_support)
        _write_report(args.out, report)

    def handle_spatial(self, args: argparse.Namespace) -> None:
        context = self._context(args.event)
        grid = analytics.spatial_meters_grid(context, self._predictor(args), args.x_step, args.y_step)
        _write_report(args.out, grid)

    def route(self, args: argparse.Namespace) -> None:
        handler = self.handlers.get(args.command)
        if handler is None:
            raise UsageError(f"unknown command '{args.command}'. Supported: {', '.join(COMMANDS)}")
        handler(args)

    def run(self, argv: Sequence[str], stderr: Optional[TextIO] = None) -> int:
        stderr = stderr or sys.stderr
        try:
            args = build_parser().parse_args(list(argv))
            if args.command is None:
                raise UsageError(f"a command is required: {', '.join(COMMANDS)}")
            self.route(args)
        except UsageError as e:
            stderr.write(f"rlstate:error:{e.code}: {e.message}\n")
            return EXIT_USAGE
        except RlStateError as e:
            stderr.write(f"rlstate:error:{e.code}: {e.message}\n")
            return EXIT_DATA
        except OSError as e:
            stderr.write(f"rlstate:error:{ErrorCode.DATA}: {e}\n")
            return EXIT_DATA
        return EXIT_OK


def cli(argv: Optional[Sequence[str]] = None, stdout: Optional[TextIO] = None,
        stderr: Optional[TextIO] = None) -> int:
    return CommandHandler(stdout).run(sys.argv[1:] if argv is None else argv, stderr)


def main() -> None:
    sys.exit(cli())
