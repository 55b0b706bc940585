import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import torch

from application.use_cases.edit_use_case import EditUseCase
from application.use_cases.evaluate_dci_use_case import EvaluateDciUseCase
from application.use_cases.evaluate_flips_use_case import EvaluateFlipsUseCase
from application.use_cases.evaluate_separability_use_case import EvaluateSeparabilityUseCase
from application.use_cases.generate_synthetic_use_case import GenerateSyntheticUseCase
from application.use_cases.plot_projection_use_case import PlotProjectionUseCase
from application.use_cases.pretrain_classifiers_use_case import PretrainClassifiersUseCase
from application.use_cases.train_proxy_use_case import TrainProxyUseCase
from domain.model.entities.classifier import LatentSpace
from domain.model.entities.dataset import GenerateSyntheticRequest, WorldSpec
from domain.model.entities.editing import EditCommandRequest, EditMode, EditRequest
from domain.model.entities.errors import ConfigurationError
from domain.model.entities.metrics import EvaluationRequest, EvaluationSettings, SpaceSelector
from domain.model.entities.projection import PlotRequest
from domain.model.entities.training import PretrainRequest, TrainConfig, TrainProxyRequest, TrainingVariant

LOG_FORMAT = "%(asctime)s [%(levelname)s] %(name)s - %(message)s"
CONFIG_DIR = Path(__file__).resolve().parent.parent / "config"
WORLD_CONFIG = CONFIG_DIR / "synthetic" / "world_config.json"
TRAIN_CONFIG = CONFIG_DIR / "training" / "train_config.json"
EVALUATION_CONFIG = CONFIG_DIR / "evaluation" / "evaluation_config.json"

logger = logging.getLogger(__name__)

# Type for command handlers
CommandHandler = Callable[[argparse.Namespace], None]


class CommandProcessor:
    """Config loading and flag/config merging shared by the handlers"""

    @staticmethod
    def load_json_file(file_path: str) -> Dict[str, Any]:
        """Loads a JSON file and returns a dictionary."""
        with open(file_path, "r", encoding="utf-8") as f:
            return json.load(f)

    @staticmethod
    def load_config(args: argparse.Namespace, default_path: Path) -> Dict[str, Any]:
        """Loads --config when given, else the bundled default (empty if it is missing)."""
        if args.config:
            return CommandProcessor.load_json_file(args.config)
        if default_path.exists():
            return CommandProcessor.load_json_file(str(default_path))
        logger.debug("No default config at %s; using built-in defaults", default_path)
        return {}

    @staticmethod
    def pick(flag: Any, config: Dict[str, Any], key: str, default: Any) -> Any:
        """Flag value if given, else the config value, else the built-in default."""
        if flag is not None:
            return flag
        return config.get(key, default)

    @staticmethod
    def evaluation_request(args: argparse.Namespace, **extra) -> EvaluationRequest:
        config = CommandProcessor.load_config(args, EVALUATION_CONFIG)
        try:
            settings = EvaluationSettings.from_dict(config.get("settings", {}))
        except TypeError as e:
            raise ConfigurationError(f"Invalid evaluation settings: {e}") from e
        return EvaluationRequest(
            dataset_path=args.dataset,
            out_path=args.out,
            model_path=args.model,
            space=SpaceSelector(args.space),
            seed=CommandProcessor.pick(args.seed, config, "seed", 0),
            settings=settings,
            **extra
        )


class OutputFormatter:
    """Class for formatting command outputs on the console"""

    @staticmethod
    def print_summary(title: str, data: Dict[str, Any]):
        print(f"\n=== {title} ===")
        print(json.dumps(data, indent=2, sort_keys=True))

    @staticmethod
    def print_separability(report: Dict[str, Any]):
        print("\n=== Separability ===")
        for space, result in OutputFormatter._by_space(report["results"]):
            print(f"[{space}] min {result['min_accuracy']:.4f}  max {result['max_accuracy']:.4f}  "
                  f"mean {result['mean_accuracy']:.4f}")
            for name, accuracy in sorted(result["per_attribute"].items()):
                print(f"  {name}: {accuracy:.4f}")
            if result["skipped"]:
                print(f"  skipped: {', '.join(result['skipped'])}")

    @staticmethod
    def print_dci(report: Dict[str, Any]):
        print("\n=== DCI ===")
        for space, result in OutputFormatter._by_space(report["results"]):
            print(f"[{space}] D {result['disentanglement']:.4f}  C {result['completeness']:.4f}  "
                  f"I {result['informativeness']:.4f}" + ("  (degenerate)" if result["degenerate"] else ""))

    @staticmethod
    def print_flips(report: Dict[str, Any]):
        print("\n=== Flip rates ===")
        for space, result in OutputFormatter._by_space(report["results"]):
            print(f"[{space}] alpha {result['alpha']:g}  mean flip rate {result['mean_flip_rate']:.4f}")
            for name, entry in sorted(result["attributes"].items()):
                print(f"  {name}: {entry['flip_rate']:.4f} (target flipped {entry['target_flip_rate']:.4f})")

    @staticmethod
    def _by_space(results: Dict[str, Any]) -> List:
        if "orig" in results and "proxy" in results:
            return [("orig", results["orig"]), ("proxy", results["proxy"])]
        return [(results.get("space", "?"), results)]


def setup_arg_parser() -> argparse.ArgumentParser:
    """Sets up the command-line argument parser."""
    parser = argparse.ArgumentParser(description="Supervised proxy latent spaces for attribute editing")
    parser.add_argument("--log-level", default="INFO",
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
                        help="Logging verbosity")
    subparsers = parser.add_subparsers(dest="command", required=True)

    # Command registration
    commands = {
        "gen-synthetic": setup_gen_synthetic_parser,
        "pretrain-classifiers": setup_pretrain_parser,
        "train-proxy": setup_train_proxy_parser,
        "eval-separability": setup_evaluation_parser,
        "eval-dci": setup_evaluation_parser,
        "eval-flips": setup_eval_flips_parser,
        "edit": setup_edit_parser,
        "plot2d": setup_plot_parser
    }

    for cmd, setup_fn in commands.items():
        subparser = subparsers.add_parser(cmd, help=f"{cmd} command")
        subparser.add_argument("--config", help="Path to a JSON configuration overriding the defaults")
        subparser.add_argument("--seed", type=int)
        setup_fn(subparser)

    return parser


def setup_gen_synthetic_parser(parser: argparse.ArgumentParser):
    """Sets up the parser for the gen-synthetic command"""
    parser.add_argument("--out", required=True, help="LDS1 dataset to write")
    parser.add_argument("--n", type=int, help="Number of codes")
    parser.add_argument("--k", type=int, help="Number of attributes")
    parser.add_argument("--dim", type=int, help="Latent width D")
    parser.add_argument("--nonlinearity", type=float, help="a in psi(x) = x + a tanh(x)")
    parser.add_argument("--rho", type=float, help="Attribute correlation")
    parser.add_argument("--gamma", type=float, help="Factor magnitude")
    parser.add_argument("--nuisance-scale", type=float, help="Standard deviation of the nuisance coordinates")
    parser.add_argument("--no-rotation", action="store_true", help="Use the identity instead of a random rotation")


def setup_pretrain_parser(parser: argparse.ArgumentParser):
    """Sets up the parser for the pretrain-classifiers command"""
    parser.add_argument("--dataset", required=True)
    parser.add_argument("--out", required=True, help="NFM1 model to write")
    parser.add_argument("--epochs", type=int)
    parser.add_argument("--lr", type=float)
    parser.add_argument("--batch", type=int)
    parser.add_argument("--layers", type=int)
    parser.add_argument("--hidden", type=int)


def setup_train_proxy_parser(parser: argparse.ArgumentParser):
    """Sets up the parser for the train-proxy command"""
    parser.add_argument("--dataset", required=True)
    parser.add_argument("--model", required=True, help="NFM1 model from pretrain-classifiers")
    parser.add_argument("--out", required=True, help="NFM1 model to write")
    parser.add_argument("--epochs", type=int)
    parser.add_argument("--lambda-lm", type=float)
    parser.add_argument("--lambda-ap", type=float)
    parser.add_argument("--lr", type=float)
    parser.add_argument("--batch", type=int)
    parser.add_argument("--layers", type=int, help="Re-initialize the flow with this many layers")
    parser.add_argument("--hidden", type=int, help="Re-initialize the flow with this hidden width")
    parser.add_argument("--edit-range", type=float, help="Half-width of the sampled edit steps")
    parser.add_argument("--variant", choices=[v.value for v in TrainingVariant])
    parser.add_argument("--loss-log", help="JSON-lines loss log (default: <out>.losses.jsonl)")


def setup_evaluation_parser(parser: argparse.ArgumentParser):
    """Sets up the parser for the eval-separability and eval-dci commands"""
    parser.add_argument("--dataset", required=True)
    parser.add_argument("--model", help="NFM1 model, required for the proxy space")
    parser.add_argument("--out", required=True, help="JSON report to write")
    parser.add_argument("--space", choices=[s.value for s in SpaceSelector], default="orig")


def setup_eval_flips_parser(parser: argparse.ArgumentParser):
    """Sets up the parser for the eval-flips command"""
    parser.add_argument("--dataset", required=True)
    parser.add_argument("--model", required=True)
    parser.add_argument("--out", required=True, help="JSON report to write")
    parser.add_argument("--space", choices=[s.value for s in SpaceSelector], default="both")
    parser.add_argument("--attr", type=int, help="Edited attribute (default: every attribute)")
    parser.add_argument("--alpha", type=float, help="Edit step in distance units")


def setup_edit_parser(parser: argparse.ArgumentParser):
    """Sets up the parser for the edit command"""
    parser.add_argument("--dataset", required=True)
    parser.add_argument("--model", required=True)
    parser.add_argument("--out", required=True, help="LDS1 dataset of edited codes")
    parser.add_argument("--attr", type=int, required=True)
    parser.add_argument("--space", choices=[s.value for s in LatentSpace], default="proxy")
    magnitude = parser.add_mutually_exclusive_group()
    magnitude.add_argument("--alpha", type=float, help="Fixed step along the normal")
    magnitude.add_argument("--target-dist", type=float, help="Target signed distance")
    parser.add_argument("--report", help="Optional JSON summary")


def setup_plot_parser(parser: argparse.ArgumentParser):
    """Sets up the parser for the plot2d command"""
    parser.add_argument("--dataset", required=True)
    parser.add_argument("--model", required=True)
    parser.add_argument("--out", required=True, help="SVG file to write")
    parser.add_argument("--space", choices=[s.value for s in LatentSpace], default="proxy")
    parser.add_argument("--attr-x", type=int)
    parser.add_argument("--attr-y", type=int)
    parser.add_argument("--color-attr", type=int)
    parser.add_argument("--style-rows", type=int, help="Average this many style rows before projecting")
    parser.add_argument("--max-points", type=int)


def handle_gen_synthetic(args: argparse.Namespace):
    """Handler for the gen-synthetic command"""
    config = CommandProcessor.load_config(args, WORLD_CONFIG)
    pick = CommandProcessor.pick
    seed = pick(args.seed, config, "seed", 0)
    world = WorldSpec(
        num_attributes=pick(args.k, config, "num_attributes", 4),
        dim=pick(args.dim, config, "dim", 32),
        nonlinearity=pick(args.nonlinearity, config, "nonlinearity", 2.0),
        gamma=pick(args.gamma, config, "gamma", 1.0),
        rho=pick(args.rho, config, "rho", 0.3),
        random_rotation=False if args.no_rotation else config.get("random_rotation", True),
        seed=seed,
        nuisance_scale=pick(args.nuisance_scale, config, "nuisance_scale", 5.0),
        attribute_names=config.get("attribute_names")
    )
    response = GenerateSyntheticUseCase().execute(GenerateSyntheticRequest(
        world=world,
        num_samples=pick(args.n, config, "num_samples", 4000),
        seed=seed,
        out_path=args.out
    ))
    OutputFormatter.print_summary("Synthetic dataset", response.to_dict())


def handle_pretrain(args: argparse.Namespace):
    """Handler for the pretrain-classifiers command"""
    config = CommandProcessor.load_config(args, TRAIN_CONFIG)
    pick = CommandProcessor.pick
    pretrain, flow = config.get("pretrain", {}), config.get("flow", {})
    response = PretrainClassifiersUseCase().execute(PretrainRequest(
        dataset_path=args.dataset,
        out_path=args.out,
        epochs=pick(args.epochs, pretrain, "epochs", 50),
        lr=pick(args.lr, pretrain, "lr", 1e-2),
        batch_size=pick(args.batch, pretrain, "batch_size", 32),
        seed=pick(args.seed, config, "seed", 0),
        layers=pick(args.layers, flow, "layers", 3),
        hidden=pick(args.hidden, flow, "hidden", None)
    ))
    OutputFormatter.print_summary("Pretrained classifiers", response.to_dict())


def handle_train_proxy(args: argparse.Namespace):
    """Handler for the train-proxy command"""
    config = CommandProcessor.load_config(args, TRAIN_CONFIG)
    pick = CommandProcessor.pick
    values = dict(config.get("train", {}))
    overrides = {
        "lambda_lm": args.lambda_lm,
        "lambda_ap": args.lambda_ap,
        "lr": args.lr,
        "batch_size": args.batch,
        "epochs": args.epochs,
        "edit_step_range": args.edit_range,
        "variant": args.variant
    }
    values.update({key: value for key, value in overrides.items() if value is not None})
    values["seed"] = pick(args.seed, config, "seed", 0)
    try:
        train_config = TrainConfig.from_dict(values)
    except (TypeError, ValueError) as e:
        raise ConfigurationError(f"Invalid training configuration: {e}") from e

    hyperplanes = config.get("hyperplanes", {})
    response = TrainProxyUseCase().execute(TrainProxyRequest(
        dataset_path=args.dataset,
        model_path=args.model,
        out_path=args.out,
        config=train_config,
        layers=args.layers,
        hidden=args.hidden,
        loss_log_path=args.loss_log,
        svm_reg=hyperplanes.get("svm_reg", 1e-3),
        svm_epochs=hyperplanes.get("svm_epochs", 20),
        train_fraction=hyperplanes.get("train_fraction", 0.8)
    ))
    OutputFormatter.print_summary("Proxy training", response.to_dict())


def handle_eval_separability(args: argparse.Namespace):
    """Handler for the eval-separability command"""
    response = EvaluateSeparabilityUseCase().execute(CommandProcessor.evaluation_request(args))
    OutputFormatter.print_separability(response.report)


def handle_eval_dci(args: argparse.Namespace):
    """Handler for the eval-dci command"""
    response = EvaluateDciUseCase().execute(CommandProcessor.evaluation_request(args))
    OutputFormatter.print_dci(response.report)


def handle_eval_flips(args: argparse.Namespace):
    """Handler for the eval-flips command"""
    request = CommandProcessor.evaluation_request(args, attribute_index=args.attr, alpha=args.alpha)
    response = EvaluateFlipsUseCase().execute(request)
    OutputFormatter.print_flips(response.report)


def handle_edit(args: argparse.Namespace):
    """Handler for the edit command"""
    config = CommandProcessor.load_config(args, EVALUATION_CONFIG)
    if args.alpha is not None:
        edit = EditRequest(attribute_index=args.attr, mode=EditMode.FIXED_STEP,
                           space=LatentSpace(args.space), alpha=args.alpha)
    else:
        target = CommandProcessor.pick(args.target_dist, config.get("edit", {}), "target_distance", 3.0)
        edit = EditRequest(attribute_index=args.attr, mode=EditMode.TO_TARGET,
                           space=LatentSpace(args.space), target_distance=target)
    response = EditUseCase().execute(EditCommandRequest(
        dataset_path=args.dataset,
        model_path=args.model,
        out_path=args.out,
        edit=edit,
        report_path=args.report
    ))
    OutputFormatter.print_summary("Edit", response.to_dict())


def handle_plot2d(args: argparse.Namespace):
    """Handler for the plot2d command"""
    config = CommandProcessor.load_config(args, EVALUATION_CONFIG).get("plot", {})
    pick = CommandProcessor.pick
    response = PlotProjectionUseCase().execute(PlotRequest(
        dataset_path=args.dataset,
        model_path=args.model,
        out_path=args.out,
        space=LatentSpace(args.space),
        attr_x=pick(args.attr_x, config, "attr_x", 0),
        attr_y=pick(args.attr_y, config, "attr_y", 1),
        color_attr=pick(args.color_attr, config, "color_attr", 0),
        style_rows=pick(args.style_rows, config, "style_rows", 1),
        max_points=args.max_points
    ))
    OutputFormatter.print_summary("Projection plot", response.to_dict())


def main(argv: Optional[List[str]] = None):
    """Main function of the program"""
    command_handlers: Dict[str, CommandHandler] = {
        "gen-synthetic": handle_gen_synthetic,
        "pretrain-classifiers": handle_pretrain,
        "train-proxy": handle_train_proxy,
        "eval-separability": handle_eval_separability,
        "eval-dci": handle_eval_dci,
        "eval-flips": handle_eval_flips,
        "edit": handle_edit,
        "plot2d": handle_plot2d
    }

    parser = setup_arg_parser()
    args = parser.parse_args(argv)

    logging.basicConfig(level=getattr(logging, args.log_level), format=LOG_FORMAT, force=True)
    torch.use_deterministic_algorithms(True)

    try:
        logger.info("Starting execution of command: %s", args.command)
        command_handlers[args.command](args)
    except Exception as e:
        logger.debug("Error during command execution", exc_info=True)
        print(f"ERROR: {' '.join(str(e).split())}", file=sys.stderr)
        sys.exit(1)


if __name__ == "__main__":
    main()
