from .config import ExperimentConfig, load_config, parse_config_text, profile_defaults
from .stats import CheckResult, StatReport, ks_two_sample, mc_mean, wasserstein_1

__all__ = [
    "CheckResult",
    "ExperimentConfig",
    "StatReport",
    "ks_two_sample",
    "load_config",
    "mc_mean",
    "parse_config_text",
    "profile_defaults",
    "wasserstein_1",
]
