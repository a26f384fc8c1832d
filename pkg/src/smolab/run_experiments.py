import argparse
import logging
import sys
from typing import Dict, List, Optional

from smolab import __version__
from smolab.harness.config import PROFILES, ExperimentConfig, load_config
from smolab.harness.experiments import EXPERIMENTS, run as run_experiment
from smolab.misc.errors import ConfigError, MissingArtifactError

__author__ = "Danielle Benesch"
__copyright__ = "Thales"
__license__ = "Apache-2.0"

_logger = logging.getLogger(__name__)

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_USAGE = 2

# Subcommand flags mapped to configuration keys.
_SUBCOMMAND_FLAGS = {
    "simulate-coalescent": {"n": ("n", int), "init": ("init_mode", str)},
    "speed-cdi": {"n": ("speed_n", int), "t": ("speed_t", float)},
    "mc-weak": {
        "delta": ("delta", float),
        "replicates": ("mc_replicates", int),
        "probes": ("probes", str),
    },
    "cpp-mark": {"delta": ("delta", float)},
    # The grid solver is deterministic, so it has no replicate count.
    "solve-pde": {"delta": ("delta", float), "probes": ("probes", str)},
}


# ---- Python API ----
# The functions defined in this section can be imported by users in their
# Python scripts/interactive interpreter, e.g. via
# `from smolab.run_experiments import run_config`,
# when using this Python module as a library.


def run_config(config: ExperimentConfig) -> int:
    """Run one experiment and translate its report into an exit code.

    Args:
        config (ExperimentConfig): Validated configuration; ``config.experiment``
            names the subcommand.

    Returns:
        int: 0 if every check passed, 1 otherwise.
    """
    report = run_experiment(config)
    n_failed = sum(1 for check in report.checks if not check.passed)
    if n_failed:
        _logger.warning(f"{n_failed} of {len(report.checks)} checks failed")
        return EXIT_FAIL
    return EXIT_PASS


# ---- CLI ----
# The functions defined in this section are wrappers around the main Python
# API allowing them to be called directly from the terminal as a CLI
# executable/script.


def _parse_set(values: Optional[List[str]]) -> Dict[str, str]:
    overrides: Dict[str, str] = {}
    for item in values or []:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        overrides[key.strip()] = value.strip()
    return overrides


def _global_options(default: object = None) -> argparse.ArgumentParser:
    """Flags accepted before and after the subcommand.

    The subcommand copy uses ``argparse.SUPPRESS`` defaults so it does not reset
    values given before the subcommand name.
    """
    common = argparse.ArgumentParser(add_help=False, argument_default=default)
    common.add_argument("--config", dest="config", help="key=value config file")
    common.add_argument("--seed", dest="seed", type=int, help="seed of the run")
    common.add_argument("--out", dest="out", help="output directory")
    common.add_argument("--profile", dest="profile", choices=PROFILES)
    common.add_argument("--workers", dest="workers", type=int, help="worker pool size")
    common.add_argument(
        "--set",
        dest="set",
        action="append",
        metavar="KEY=VALUE",
        help="override any configuration key (repeatable)",
    )
    common.add_argument(
        "-v",
        "--verbose",
        dest="loglevel",
        help="set loglevel to INFO",
        action="store_const",
        const=logging.INFO,
    )
    common.add_argument(
        "-vv",
        "--very-verbose",
        dest="loglevel",
        help="set loglevel to DEBUG",
        action="store_const",
        const=logging.DEBUG,
    )
    return common


def parse_args(args: List[str]) -> argparse.Namespace:
    """Parse command line parameters.

    Args:
      args (List[str]): command line parameters as list of strings
          (for example  ``["acceptance", "--seed", "1"]``).

    Returns:
      :obj:`argparse.Namespace`: command line parameters namespace
    """
    parser = argparse.ArgumentParser(
        description="Nested coalescent, Smoluchowski and CPP experiments",
        parents=[_global_options()],
    )
    parser.add_argument(
        "--version",
        action="version",
        version=f"smolab {__version__}",
    )
    subparsers = parser.add_subparsers(dest="experiment", metavar="SUBCOMMAND")
    subparsers.required = True
    common = _global_options(argparse.SUPPRESS)
    for name, function in EXPERIMENTS.items():
        summary = (function.__doc__ or "").strip().splitlines()[0]
        sub = subparsers.add_parser(
            name, parents=[common], help=summary, description=summary
        )
        for flag, (_, kind) in _SUBCOMMAND_FLAGS.get(name, {}).items():
            sub.add_argument(f"--{flag}", dest=f"flag_{flag}", type=kind)
    return parser.parse_args(args)


def setup_logging(loglevel: int) -> None:
    """Setup basic logging

    Args:
      loglevel (int): minimum loglevel for emitting messages
    """
    logformat = "[%(asctime)s] %(levelname)s:%(name)s:%(message)s"
    logging.basicConfig(
        level=loglevel, stream=sys.stdout, format=logformat, datefmt="%Y-%m-%d %H:%M:%S"
    )


def _overrides(parsed_args: argparse.Namespace) -> Dict[str, object]:
    overrides: Dict[str, object] = _parse_set(parsed_args.set)
    for key in ("seed", "out", "workers"):
        overrides[key] = getattr(parsed_args, key)
    overrides["experiment"] = parsed_args.experiment
    for flag, (key, _) in _SUBCOMMAND_FLAGS.get(parsed_args.experiment, {}).items():
        value = getattr(parsed_args, f"flag_{flag}", None)
        if value is not None:
            overrides[key] = value
    return overrides


def main(args: List[str]) -> int:
    """Wrapper allowing :func:`run_config` to be called.

    Calls the function with string arguments in a CLI fashion.

    Args:
      args (List[str]): command line parameters as list of strings
          (for example  ``["--verbose", "acceptance", "--seed", "42"]``).

    Returns:
      int: exit code, 0 if every check passed, 1 if any failed, 2 on usage
      or configuration errors.
    """
    try:
        parsed_args = parse_args(args)
    except SystemExit as err:
        return int(err.code) if isinstance(err.code, int) else EXIT_USAGE
    setup_logging(parsed_args.loglevel or logging.WARNING)
    try:
        config = load_config(
            parsed_args.config, parsed_args.profile, _overrides(parsed_args)
        )
        code = run_config(config)
    except (ConfigError, MissingArtifactError) as err:
        _logger.error(str(err))
        return EXIT_USAGE

    _logger.info("Script ends here")
    return code


def run() -> None:
    """Calls :func:`main` passing the CLI arguments extracted from :obj:`sys.argv`

    This function can be used as entry point to create console scripts with setuptools.
    """
    sys.exit(main(sys.argv[1:]))


if __name__ == "__main__":
    run()
