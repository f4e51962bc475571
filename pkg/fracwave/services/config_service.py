import logging
from pathlib import Path
from typing import Any, Dict, List, Union

from pydantic import ValidationError

from fracwave.core.errors import ConfigError
from fracwave.schemas.experiment_config import RUN_KEYS, ExperimentConfig, ExperimentKind
from fracwave.schemas.sim_config import SimConfig

logger = logging.getLogger(__name__)

SIM_KEYS = tuple(name for name in SimConfig.model_fields if name != "potential") + ("potential", "k")
LIST_KEYS = frozenset({"t_checkpoints", "N_list", "n_list", "R_grid", "observables"})
GAUSSIAN_EXPERIMENTS = frozenset({ExperimentKind.INVARIANCE, ExperimentKind.CONVERGENCE, ExperimentKind.TAIL})


def validation_messages(exc: ValidationError) -> List[str]:
    """Flattens pydantic errors; model validators report several constraints joined by newlines"""
    messages = []
    for error in exc.errors():
        message = error["msg"]
        if message.startswith("Value error, "):
            messages.extend(message[len("Value error, "):].split("\n"))
            continue
        location = ".".join(str(part) for part in error["loc"])
        messages.append(f"{location}: {message}" if location else message)
    return messages


def _format(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (list, tuple)):
        return ",".join(_format(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


class ConfigService:
    KNOWN_KEYS = frozenset(SIM_KEYS + RUN_KEYS)

    @staticmethod
    def parse(text: str) -> Dict[str, Any]:
        """key = value lines into a raw dict; every syntax problem is reported with its line number"""
        values: Dict[str, Any] = {}
        first_seen: Dict[str, int] = {}
        problems = []
        for number, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                problems.append(f"line {number}: expected 'key = value', got '{raw.strip()}'")
                continue
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in ConfigService.KNOWN_KEYS:
                problems.append(f"line {number}: unknown key '{key}'")
                continue
            if key in first_seen:
                problems.append(f"line {number}: duplicate key '{key}' (first set on line {first_seen[key]})")
                continue
            first_seen[key] = number
            if key in LIST_KEYS:
                values[key] = [item.strip() for item in value.split(",") if item.strip()]
            elif value.lower() in ("true", "false"):
                values[key] = value.lower() == "true"
            elif value == "" or value.lower() == "none":
                continue
            else:
                values[key] = value
        if problems:
            raise ConfigError(problems)
        return values

    @staticmethod
    def build(values: Dict[str, Any]) -> ExperimentConfig:
        """Validates the sim and run parts together so every violation is reported at once"""
        sim_part = {key: value for key, value in values.items() if key in SIM_KEYS}
        run_part = {key: value for key, value in values.items() if key in RUN_KEYS}
        problems: List[str] = []
        if "experiment" not in run_part:
            problems.append("missing key 'experiment'")
        try:
            sim = SimConfig.from_flat(sim_part)
        except ValidationError as exc:
            problems.extend(validation_messages(exc))
            sim = None
        try:
            config = ExperimentConfig.model_validate({**run_part, "sim": sim if sim is not None else SimConfig()})
        except ValidationError as exc:
            problems.extend(validation_messages(exc))
            config = None
        if config is not None and sim is not None and config.experiment in GAUSSIAN_EXPERIMENTS:
            problems.extend(sim.gibbs_violations())
        if problems:
            raise ConfigError(problems)
        return config

    @staticmethod
    def loads(text: str) -> ExperimentConfig:
        return ConfigService.build(ConfigService.parse(text))

    @staticmethod
    def load_config(path: Union[str, Path]) -> ExperimentConfig:
        path = Path(path)
        config = ConfigService.loads(path.read_text(encoding="utf-8"))
        logger.info("Loaded %s config from %s", config.experiment.value, path)
        return config

    @staticmethod
    def dump_flat(flat: Dict[str, Any]) -> str:
        lines = [f"{key} = {_format(value)}" for key, value in flat.items() if value is not None and key in ConfigService.KNOWN_KEYS]
        return "\n".join(lines) + "\n"

    @staticmethod
    def dump_config(config: ExperimentConfig) -> str:
        """Text that load_config reads back into an equal config"""
        return ConfigService.dump_flat(config.to_flat())
