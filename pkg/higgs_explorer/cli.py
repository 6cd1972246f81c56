import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional

import yaml

from higgs_explorer import bergman
from higgs_explorer.commands.balance import BalanceCommand
from higgs_explorer.commands.bergman import BergmanCommand
from higgs_explorer.commands.flow import FlowCommand
from higgs_explorer.commands.gram_oracle import GramOracleCommand
from higgs_explorer.commands.stability import StabilityCommand
from higgs_explorer.commands.sweep import SweepCommand
from higgs_explorer.commands.weight import WeightCommand
from higgs_explorer.config import ExperimentConfig, load_yaml, resolve_config, resolve_threads, validate_config
from higgs_explorer.errors import ConfigError, HiggsExplorerError

LOGGER = logging.getLogger(__name__)

EXIT_ERROR = 1
EXIT_CONFIG = 4


class ExperimentApp:
    def __init__(self) -> None:
        self.commands: Dict[str, Callable[[ExperimentConfig, Path], int]] = {}

    def add_command(self, name: str, func: Callable[[ExperimentConfig, Path], int]) -> None:
        self.commands[name] = func

    def run(self, name: str, config: ExperimentConfig, out_dir: Path) -> int:
        return self.commands[name](config, out_dir)


def build_app() -> ExperimentApp:
    app = ExperimentApp()
    app.add_command("balance", BalanceCommand())
    app.add_command("flow", FlowCommand())
    app.add_command("sweep", SweepCommand())
    app.add_command("bergman", BergmanCommand())
    app.add_command("weight", WeightCommand())
    app.add_command("stability", StabilityCommand())
    app.add_command("gram-oracle", GramOracleCommand())
    return app


def parse_args(argv: Optional[List[str]], commands: List[str]) -> argparse.Namespace:
    parser = argparse.ArgumentParser(description="Balanced metrics and the Hitchin equation on the Riemann sphere")
    parser.add_argument("command", choices=commands)
    parser.add_argument("--config", type=Path, help="YAML experiment config merged over the defaults")
    parser.add_argument("--out", type=Path, default=Path("results"), help="artifact directory")
    parser.add_argument("--seed", type=int, help="overrides the config seed")
    parser.add_argument("--threads", type=int, help="node-batch workers for Gram assembly")
    parser.add_argument("--verbose", action="store_true")
    return parser.parse_args(argv)


def load_config(args: argparse.Namespace) -> ExperimentConfig:
    overrides = {}
    if args.config is not None:
        try:
            overrides = load_yaml(str(args.config)) or {}
        except (OSError, yaml.YAMLError) as e:
            raise ConfigError(f"Cannot read config {args.config}: {e}")
    if not isinstance(overrides, dict):
        raise ConfigError(f"Config {args.config} is not a mapping")
    if args.seed is not None:
        overrides = {**overrides, "seed": args.seed}
    return validate_config(resolve_config(overrides))


def main(argv: Optional[List[str]] = None) -> int:
    app = build_app()
    args = parse_args(argv, list(app.commands))
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(name)s:%(levelname)s:%(message)s")
    try:
        config = load_config(args)
        bergman.set_n_jobs(resolve_threads(args.threads, config))
    except ConfigError as e:
        print(json.dumps({"error": "config", "message": str(e)}), file=sys.stderr)
        return EXIT_CONFIG

    try:
        return app.run(args.command, config, args.out)
    except HiggsExplorerError as e:
        LOGGER.error(f"{args.command} failed: {e}")
        print(json.dumps({"error": type(e).__name__, "message": str(e)}), file=sys.stderr)
        return EXIT_ERROR
