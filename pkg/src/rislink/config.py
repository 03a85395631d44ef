"""Run configuration: a line-oriented `key = value` format with [section]
headers.

Unknown sections and keys are rejected with line numbers; an empty file
yields the full defaults. The same format doubles as the run manifest (the
[run] section records the command, seed and argument lists), so a written
manifest can be loaded back to reproduce a run.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import CONFIG_SCHEMA_VERSION
from .channel import LinkGeometry, NoiseModel, SnrConfig
from .frame import PhyConfig
from .ris import (CouplingConfig, ElementResponseModel, RisGeometry,
                  default_response_model, load_response_model)
from .scenarios import (DEMO_NOISE_POWER_DBM, IMAGE_ANGLES, MULTI_GROUPS,
                        SWEEP_ANGLES, SWEEP_NOISE_POWER_DBM, ScenarioSpec)
from .spgd import SpgdConfig


class ConfigError(ValueError):
    """Configuration file problem, formatted as path:line: message."""


@dataclass(frozen=True)
class RisSettings:
    element_count: int = 80
    element_period_m: float = 317e-6
    carrier_hz: float = 220e9
    incidence_deg: float = -77.0
    phase_span_deg: float = 255.0
    amplitude_ripple: float = 0.15
    response_curve: str = ""
    coupling_enabled: bool = True
    coupling_alpha: float = 0.15


@dataclass(frozen=True)
class SpgdSettings:
    gain: float = 20000.0
    perturbation_volts: float = 0.5
    iterations: int = 300
    feedback_iterations: int = 0   # 0 -> iterations // 4
    feedback_gain: float = 0.0     # 0 -> gain


@dataclass(frozen=True)
class ScenarioSettings:
    sweep_angles: tuple = SWEEP_ANGLES
    user_angles: tuple = IMAGE_ANGLES
    sweep_noise_power_dbm: float = SWEEP_NOISE_POWER_DBM
    demo_noise_power_dbm: float = DEMO_NOISE_POWER_DBM
    sweep_frames: int = 1
    min_payload_bits: int = 100_000
    feedback_rounds: int = 3


@dataclass(frozen=True)
class RunSettings:
    command: str = ""
    seed: int = 0
    out_dir: str = "out"
    jobs: int = 1
    angles: tuple = ()
    group: tuple = ()
    rounds: int = 0      # 0 -> scenario feedback_rounds
    frames: int = 1
    payload: str = ""


# section -> key -> (type, default); types: int, float, bool, str, floats,
# or a tuple of allowed strings
_SCHEMA = {
    "ris": RisSettings,
    "link": LinkGeometry,
    "noise": NoiseModel,
    "phy": PhyConfig,
    "spgd": SpgdSettings,
    "scenario": ScenarioSettings,
    "run": RunSettings,
}

_KEYS = {
    "ris": {
        "element_count": "int", "element_period_m": "float",
        "carrier_hz": "float", "incidence_deg": "float",
        "phase_span_deg": "float", "amplitude_ripple": "float",
        "response_curve": "str", "coupling_enabled": "bool",
        "coupling_alpha": "float",
    },
    "link": {
        "tx_distance_m": "float", "rx_distance_m": "float",
        "tx_gain_db": "float", "rx_gain_db": "float",
        "horn_beamwidth_deg": "float", "tx_power_dbm": "float",
    },
    "noise": {
        "noise_floor_dbm": "float", "measurement_sigma_db": "float",
        "leakage_floor_db": "float",
    },
    "phy": {
        "fft_size": "int", "cp_length": "int", "sample_rate": "float",
        "modulation": ("qpsk", "16qam"), "rb_count": "int",
        "symbols_per_rb": "int", "subcarriers_per_rb": "int",
        "zc_root": "int", "zc_length": "int",
    },
    "spgd": {
        "gain": "float", "perturbation_volts": "float", "iterations": "int",
        "feedback_iterations": "int", "feedback_gain": "float",
    },
    "scenario": {
        "sweep_angles": "floats", "user_angles": "floats",
        "sweep_noise_power_dbm": "float", "demo_noise_power_dbm": "float",
        "sweep_frames": "int", "min_payload_bits": "int",
        "feedback_rounds": "int",
    },
    "run": {
        "command": "str", "seed": "int", "out_dir": "str", "jobs": "int",
        "angles": "floats", "group": "floats", "rounds": "int",
        "frames": "int", "payload": "str",
    },
}


@dataclass(frozen=True)
class RunConfig:
    ris: RisSettings = RisSettings()
    link: LinkGeometry = LinkGeometry()
    noise: NoiseModel = NoiseModel()
    phy: PhyConfig = PhyConfig()
    spgd: SpgdSettings = SpgdSettings()
    scenario: ScenarioSettings = ScenarioSettings()
    run: RunSettings = RunSettings()

    # ---- resolved physics objects ------------------------------------
    def geometry(self) -> RisGeometry:
        return RisGeometry(
            element_count=self.ris.element_count,
            element_period_m=self.ris.element_period_m,
            carrier_hz=self.ris.carrier_hz,
            incidence_deg=self.ris.incidence_deg,
        )

    def response_model(self) -> ElementResponseModel:
        if self.ris.response_curve:
            return load_response_model(self.ris.response_curve)
        return default_response_model(
            phase_span_deg=self.ris.phase_span_deg,
            amplitude_ripple=self.ris.amplitude_ripple,
        )

    def coupling(self) -> CouplingConfig:
        return CouplingConfig(enabled=self.ris.coupling_enabled,
                              alpha=self.ris.coupling_alpha)

    def spgd_config(self, seed: int = 0) -> SpgdConfig:
        return SpgdConfig(
            gain=self.spgd.gain,
            perturbation_volts=self.spgd.perturbation_volts,
            iterations=self.spgd.iterations,
            seed=seed,
        )

    def scenario_spec(self, kind: str, master_seed: int | None = None,
                      jobs: int | None = None, **overrides) -> ScenarioSpec:
        """Bundle the resolved configuration into a scenario description.

        The sweep runs at the sweep receiver noise; the multi-beam, image
        and feedback scenarios use the demo noise.
        """
        noise_dbm = (self.scenario.sweep_noise_power_dbm if kind == "single_sweep"
                     else self.scenario.demo_noise_power_dbm)
        fb_iters = self.spgd.feedback_iterations or None
        fb_gain = self.spgd.feedback_gain or None
        params = dict(
            kind=kind,
            geometry=self.geometry(),
            response=self.response_model(),
            coupling=self.coupling(),
            link=self.link,
            noise=self.noise,
            phy=self.phy,
            spgd=self.spgd_config(),
            snr=SnrConfig(noise_power_dbm=noise_dbm),
            angles=self.scenario.sweep_angles,
            groups=MULTI_GROUPS,
            user_angles=self.scenario.user_angles,
            master_seed=self.run.seed if master_seed is None else master_seed,
            sweep_frames=self.scenario.sweep_frames,
            min_payload_bits=self.scenario.min_payload_bits,
            feedback_rounds=self.scenario.feedback_rounds,
            feedback_iterations=fb_iters,
            feedback_gain=fb_gain,
            jobs=self.run.jobs if jobs is None else jobs,
        )
        params.update(overrides)
        return ScenarioSpec(**params)


def _parse_value(kind, text: str, where: str):
    if isinstance(kind, tuple):
        value = text.strip().lower()
        if value not in kind:
            raise ConfigError(
                f"{where}: unsupported value {text.strip()!r} "
                f"(allowed: {', '.join(kind)})"
            )
        return value
    if kind == "int":
        try:
            return int(text.strip())
        except ValueError:
            raise ConfigError(f"{where}: expected an integer, got {text.strip()!r}") from None
    if kind == "float":
        try:
            return float(text.strip())
        except ValueError:
            raise ConfigError(f"{where}: expected a number, got {text.strip()!r}") from None
    if kind == "bool":
        v = text.strip().lower()
        if v in ("true", "1", "yes", "on"):
            return True
        if v in ("false", "0", "no", "off"):
            return False
        raise ConfigError(f"{where}: expected true/false, got {text.strip()!r}")
    if kind == "floats":
        items = [t.strip() for t in text.split(",") if t.strip()]
        try:
            return tuple(float(t) for t in items)
        except ValueError:
            raise ConfigError(f"{where}: expected comma-separated numbers, "
                              f"got {text.strip()!r}") from None
    if kind == "str":
        return text.strip()
    raise AssertionError(kind)


def parse_config_text(text: str, path: str = "<config>") -> RunConfig:
    raw: dict[str, dict] = {name: {} for name in _KEYS}
    section = None
    section_line = 0
    for ln, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith(("#", ";")):
            continue
        if stripped.startswith("[") and stripped.endswith("]"):
            name = stripped[1:-1].strip().lower()
            if name not in _KEYS:
                raise ConfigError(f"{path}:{ln}: unknown section [{name}]")
            section, section_line = name, ln
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{ln}: expected `key = value`, got {stripped!r}")
        if section is None:
            raise ConfigError(f"{path}:{ln}: key outside any [section]")
        key, _, value = stripped.partition("=")
        key = key.strip()
        if key not in _KEYS[section]:
            raise ConfigError(f"{path}:{ln}: unknown key {key!r} in [{section}]")
        if key in raw[section]:
            raise ConfigError(f"{path}:{ln}: duplicate key {key!r} in [{section}]")
        raw[section][key] = _parse_value(_KEYS[section][key], value, f"{path}:{ln}")

    sections = {}
    for name, cls in _SCHEMA.items():
        try:
            sections[name] = cls(**raw[name])
        except ValueError as exc:
            raise ConfigError(f"{path}: [{name}]: {exc}") from None
    try:
        return RunConfig(**sections)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def load_config(path) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    return parse_config_text(text, str(path))


def _format_value(kind, value) -> str:
    if kind == "bool":
        return "true" if value else "false"
    if kind == "floats":
        return ",".join(repr(float(x)) for x in value)
    if kind == "float":
        return repr(float(value))
    return str(value)


def dump_config(cfg: RunConfig) -> str:
    """Canonical serialization; load(dump(cfg)) == cfg."""
    lines = [f"# rislink config (schema {CONFIG_SCHEMA_VERSION})"]
    for name in _KEYS:
        obj = getattr(cfg, name)
        lines.append("")
        lines.append(f"[{name}]")
        for key, kind in _KEYS[name].items():
            lines.append(f"{key} = {_format_value(kind, getattr(obj, key))}")
    return "\n".join(lines) + "\n"


def write_manifest(cfg: RunConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dump_config(cfg))
