import dataclasses
import logging
import typing
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

from importlib_resources import files

from .. import harness
from ..mechanism import BranchingMechanism
from ..misc.errors import ConfigError
from ..misc.utils import import_dict_from_json

_logger = logging.getLogger(__name__)

PROFILE_QUICK = "quick"
PROFILE_FULL = "full"
PROFILES = (PROFILE_QUICK, PROFILE_FULL)
INIT_MODES = ("minimal", "maximal", "constant")
_POSITIVE_FIELDS = (
    "mechanism_c",
    "c_gene",
    "kingman_c",
    "species_ratio",
    "speed_t",
    "speed_species_ratio",
    "measure_n",
)


def _get_harness_params() -> dict:
    parent_path = Path(str(files(harness)))
    return import_dict_from_json(Path(parent_path, "harness_params.json"))


def profile_defaults(profile: str) -> dict:
    """Packaged parameters of a run profile (``quick`` or ``full``)."""
    if profile not in PROFILES:
        raise ConfigError(f"Unknown profile {profile!r}, expected one of {PROFILES}")
    return dict(_get_harness_params()[f"{profile.upper()}_PARAMS"])


@dataclass(frozen=True)
class ExperimentConfig:
    """Complete, validated parameter set of a run.

    Field names double as keys of the ``key=value`` configuration format.
    ``mechanism_c`` is the rate of the depletion function ``psi``; the gene
    coalescence rate ``c_gene`` maps to ``psi(x) = (c_gene / 2) x^2`` only through
    :meth:`coalescent_mechanism`.
    """

    experiment: str
    seed: int
    out: str
    profile: str
    workers: int
    mechanism_c: float
    mechanism_gamma: float
    # nested coalescent
    n: int
    c_gene: float
    species_ratio: float
    init_mode: str
    init_value: int
    k_cap: int
    coalescent_times: Tuple[float, ...]
    coalescent_replicates: int
    kingman_n: int
    kingman_c: float
    kingman_replicates: int
    speed_t: float
    speed_n: int
    speed_species_ratio: float
    speed_k_cap: int
    speed_replicates: int
    speed_rtol: float
    measure_n: int
    measure_replicates: int
    measure_tol: float
    # Smoluchowski routes
    delta: float
    pde_times: Tuple[float, ...]
    probes: Tuple[float, ...]
    pde_n_lambda: int
    pde_lambda_max: float
    mc_replicates: int
    tree_replicates: int
    n_random_trees: int
    # csbp
    profile_x_max: float
    profile_tol: float
    extinction_x: float
    extinction_replicates: int
    depth_cap: int
    # cpp
    upsilon_replicates: int
    upsilon_times: Tuple[float, ...]
    upsilon_delta0: float
    upsilon_tol: float
    upsilon_k_max: int
    picard_ensemble: int
    picard_iterations: int
    picard_horizon: float
    picard_long_horizon: float
    cpp_replicates: int
    dust_deltas: Tuple[float, ...]
    dust_times: Tuple[float, ...]
    dust_replicates: int
    dust_threshold: float
    # statistics
    alpha: float

    def __post_init__(self) -> None:
        for name in _POSITIVE_FIELDS:
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if not self.mechanism_gamma > 1:
            raise ConfigError(f"mechanism_gamma must be > 1, got {self.mechanism_gamma}")
        if self.seed < 0:
            raise ConfigError(f"seed must be non-negative, got {self.seed}")
        if self.delta < 0:
            raise ConfigError(f"delta must be non-negative, got {self.delta}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        if self.profile not in PROFILES:
            raise ConfigError(f"profile must be one of {PROFILES}, got {self.profile!r}")
        if self.init_mode not in INIT_MODES:
            raise ConfigError(f"init_mode must be one of {INIT_MODES}")
        if self.measure_tol < 0 or self.speed_k_cap < 0 or self.k_cap < 0:
            raise ConfigError("measure_tol, speed_k_cap and k_cap must be non-negative")
        if not 0 < self.alpha < 1:
            raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha}")
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if f.name.endswith("replicates") and value < 1:
                raise ConfigError(f"{f.name} must be >= 1, got {value}")
            if isinstance(value, tuple) and (not value or any(v < 0 for v in value)):
                raise ConfigError(f"{f.name} must be a non-empty non-negative list")

    def mechanism(self) -> BranchingMechanism:
        """Depletion function of the Smoluchowski and CPP routes."""
        return BranchingMechanism.stable(self.mechanism_c, self.mechanism_gamma)

    def coalescent_mechanism(self) -> BranchingMechanism:
        """Quadratic mechanism ``(c_gene / 2) x^2`` matching the nested coalescent."""
        return BranchingMechanism.stable(self.c_gene / 2.0, 2.0)

    @property
    def out_dir(self) -> Path:
        return Path(self.out)

    def to_text(self) -> str:
        """Serialize to the ``key=value`` format read by :func:`parse_config_text`."""
        lines = []
        for f in dataclasses.fields(self):
            lines.append(f"{f.name}={_format_value(getattr(self, f.name))}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_mapping(cls, values: Dict[str, Any]) -> "ExperimentConfig":
        names = [f.name for f in dataclasses.fields(cls)]
        missing = [name for name in names if name not in values]
        if missing:
            raise ConfigError(f"Missing configuration keys: {', '.join(missing)}")
        unknown = sorted(set(values) - set(names))
        if unknown:
            raise ConfigError(f"Unknown configuration keys: {', '.join(unknown)}")
        typed = {
            f.name: _coerce(f.name, f.type, values[f.name])
            for f in dataclasses.fields(cls)
        }
        return cls(**typed)


def _format_value(value: Any) -> str:
    if isinstance(value, tuple):
        return ",".join(repr(float(v)) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _coerce(name: str, field_type: Any, raw: Any) -> Any:
    try:
        if typing.get_origin(field_type) is tuple:
            if isinstance(raw, str):
                raw = [part for part in raw.split(",") if part.strip()]
            elif not isinstance(raw, (list, tuple)):
                raw = [raw]
            return tuple(float(v) for v in raw)
        if field_type is int:
            if isinstance(raw, float) and not raw.is_integer():
                raise ValueError(raw)
            return int(str(raw).strip()) if isinstance(raw, str) else int(raw)
        if field_type is float:
            return float(raw)
        return str(raw).strip()
    except (TypeError, ValueError) as err:
        raise ConfigError(f"Invalid value {raw!r} for {name}") from err


def parse_config_text(text: str) -> Dict[str, str]:
    """Parse flat ``key=value`` text; ``#`` starts a comment, blank lines are skipped."""
    values: Dict[str, str] = {}
    names = {f.name for f in dataclasses.fields(ExperimentConfig)}
    for number, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"Line {number}: expected key=value, got {line!r}")
        key, value = (part.strip() for part in stripped.split("=", 1))
        if key not in names:
            raise ConfigError(f"Line {number}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"Line {number}: duplicate key {key!r}")
        values[key] = value
    return values


def load_config(
    path: Optional[Union[str, Path]] = None,
    profile: Optional[str] = None,
    overrides: Optional[Dict[str, Any]] = None,
) -> ExperimentConfig:
    """Build a config from profile defaults, a config file and CLI overrides.

    Later sources win. The profile is taken from ``profile``, else from the file,
    else ``quick``.

    Raises:
        ConfigError: On unreadable files, unknown keys, bad values or a missing seed.
    """
    from_file: Dict[str, str] = {}
    if path is not None:
        try:
            from_file = parse_config_text(Path(path).read_text())
        except OSError as err:
            raise ConfigError(f"Cannot read config file {path}: {err}") from err
    cli = {k: v for k, v in (overrides or {}).items() if v is not None}
    chosen = profile or from_file.get("profile") or PROFILE_QUICK
    merged: Dict[str, Any] = {"experiment": "acceptance", "out": "results", "workers": 1}
    merged.update(profile_defaults(chosen))
    merged.update(from_file)
    merged.update(cli)
    merged["profile"] = chosen
    if "seed" not in merged:
        raise ConfigError("A seed is mandatory: pass --seed or set seed= in the config")
    config = ExperimentConfig.from_mapping(merged)
    _logger.debug(f"Configuration:\n{config.to_text()}")
    return config
