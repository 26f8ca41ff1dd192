from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple, Union

from core.errors import ConfigError


@dataclass(frozen=True)
class AppConfig:
    log_dir: Path
    config_dir: Path

    def resolve_config(self, path: Union[str, Path]) -> Path:
        """The path itself when it exists, otherwise the bundled config of that name."""
        path = Path(path)
        if path.exists() or path.is_absolute():
            return path
        bundled = self.config_dir / path
        if bundled.exists():
            return bundled
        if not path.suffix and bundled.with_suffix(".ini").exists():
            return bundled.with_suffix(".ini")
        return path


def build_config(base_dir: Path) -> AppConfig:
    return AppConfig(
        log_dir=base_dir / "logs",
        config_dir=base_dir / "configs",
    )


# --- experiment configuration -------------------------------------------------


@dataclass(frozen=True)
class Setting:
    """A raw value with the line it came from, kept for later diagnostics."""

    key: str
    value: str
    lineno: Optional[int]


@dataclass(frozen=True)
class ProblemBlock:
    p: float
    theta: float
    sigma: float
    m: float = 0.0
    henon_mode: bool = False
    regime_override: bool = False


@dataclass(frozen=True)
class CoefficientsBlock:
    B: Setting
    rho: Setting
    f: Setting
    g: Setting
    c: Optional[Setting] = None


@dataclass(frozen=True)
class GridBlock:
    dim: int
    h: float
    radius: float = 1.0
    center: Tuple[float, ...] = ()


@dataclass(frozen=True)
class SolverBlock:
    tol: float = 1e-8
    max_iters: int = 200_000
    dt_safety: float = 0.5
    envelope: str = "regularized"
    eps_grad: Optional[float] = None
    damping: float = 1.0
    log_every: int = 1000
    degeneracy: str = "one_sided"
    upwind: bool = False
    boundary_eval: str = "projection"
    grad_floor: Optional[float] = None
    bracket: str = "none"
    bracket_margin: float = 1.0


@dataclass(frozen=True)
class AnalysisBlock:
    x0: Union[str, Tuple[float, ...]] = "argmin"
    radii: Tuple[float, ...] = (0.25, 0.125, 0.0625, 0.03125)
    alpha: Optional[float] = None
    mode: str = "growth"
    target: Optional[float] = None
    source: str = "inline"
    weight_alpha: float = 0.0
    positivity_tol: Optional[float] = None
    subdomain_radius: Optional[float] = None


@dataclass(frozen=True)
class ProfileBlock:
    name: Optional[str] = None
    params: Dict[str, object] = field(default_factory=dict)


@dataclass(frozen=True)
class OutputBlock:
    directory: Optional[str] = None
    formats: Tuple[str, ...] = ("json", "csv")
    tensorboard: bool = False


@dataclass(frozen=True)
class ExperimentConfig:
    path: Path
    problem: ProblemBlock
    coefficients: CoefficientsBlock
    grid: GridBlock
    solver: SolverBlock
    analysis: AnalysisBlock
    profile: ProfileBlock
    output: OutputBlock


def _to_float(setting: Setting) -> float:
    try:
        return float(setting.value)
    except ValueError:
        raise ConfigError(f"{setting.key} must be a number, got {setting.value!r}", setting.key, setting.lineno) from None


def _to_int(setting: Setting) -> int:
    try:
        return int(setting.value)
    except ValueError:
        raise ConfigError(f"{setting.key} must be an integer, got {setting.value!r}", setting.key, setting.lineno) from None


_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _to_bool(setting: Setting) -> bool:
    value = setting.value.strip().lower()
    if value in _TRUE:
        return True
    if value in _FALSE:
        return False
    raise ConfigError(f"{setting.key} must be a boolean, got {setting.value!r}", setting.key, setting.lineno)


def _to_floats(setting: Setting) -> Tuple[float, ...]:
    parts = [part for part in re.split(r"[,\s]+", setting.value.strip()) if part]
    try:
        return tuple(float(part) for part in parts)
    except ValueError:
        raise ConfigError(f"{setting.key} must be a list of numbers, got {setting.value!r}", setting.key, setting.lineno) from None


def _optional_float(setting: Setting) -> Optional[float]:
    if setting.value.strip().lower() in ("auto", "none", ""):
        return None
    return _to_float(setting)


def _choice(*choices: str) -> Callable[[Setting], str]:
    def parse(setting: Setting) -> str:
        value = setting.value.strip().lower()
        if value not in choices:
            raise ConfigError(
                f"{setting.key} must be one of {', '.join(choices)}, got {setting.value!r}", setting.key, setting.lineno
            )
        return value

    return parse


def _raw(setting: Setting) -> Setting:
    return setting


def _text(setting: Setting) -> str:
    return setting.value.strip()


def _radii(setting: Setting) -> Tuple[float, ...]:
    value = setting.value.strip().lower()
    if value.startswith("dyadic"):
        bounds = value.split()[1:]
        try:
            first, last = (int(b) for b in bounds) if len(bounds) == 2 else (2, int(bounds[0]) if bounds else 5)
        except ValueError:
            raise ConfigError(f"radii: expected 'dyadic FIRST LAST', got {setting.value!r}", setting.key, setting.lineno) from None
        if last < first:
            raise ConfigError("radii: dyadic range is empty", setting.key, setting.lineno)
        return tuple(2.0 ** (-k) for k in range(first, last + 1))
    radii = _to_floats(setting)
    if not radii or any(r <= 0 for r in radii):
        raise ConfigError("radii must be positive", setting.key, setting.lineno)
    return radii


def _x0(setting: Setting) -> Union[str, Tuple[float, ...]]:
    value = setting.value.strip().lower()
    if value in ("argmin", "argmax", "center"):
        return value
    return _to_floats(setting)


def _formats(setting: Setting) -> Tuple[str, ...]:
    formats = tuple(part.strip().lower() for part in setting.value.split(",") if part.strip())
    unknown = [f for f in formats if f not in ("json", "csv")]
    if unknown:
        raise ConfigError(f"unknown output format(s) {unknown}", setting.key, setting.lineno)
    return formats


_PROFILE_KEYS = {
    "name": _text,
    "r": _to_float,
    "R": _to_float,
    "x0": _to_floats,
    "calibrated": _to_bool,
    "kappa": _to_float,
    "c0": _to_float,
    "regime": _choice("sublinear", "superlinear"),
    "alpha_h": _to_float,
    "axis": _to_int,
    "alpha": _to_float,
    "B_norm": _to_float,
    "rho_norm": _to_float,
}

SCHEMA: Dict[str, Dict[str, Callable[[Setting], object]]] = {
    "problem": {
        "p": _to_float,
        "theta": _to_float,
        "sigma": _to_float,
        "m": _to_float,
        "henon_mode": _to_bool,
        "regime_override": _to_bool,
    },
    "coefficients": {"B": _raw, "rho": _raw, "f": _raw, "frak_f": _raw, "g": _raw, "c": _raw},
    "grid": {"dim": _to_int, "h": _to_float, "radius": _to_float, "center": _to_floats},
    "solver": {
        "tol": _to_float,
        "max_iters": _to_int,
        "dt_safety": _to_float,
        "envelope": _choice("regularized", "sub", "super"),
        "eps_grad": _optional_float,
        "damping": _to_float,
        "log_every": _to_int,
        "degeneracy": _choice("central", "one_sided"),
        "upwind": _to_bool,
        "boundary_eval": _choice("projection", "nodal"),
        "grad_floor": _optional_float,
        "bracket": _choice("none", "constant", "barriers"),
        "bracket_margin": _to_float,
    },
    "analysis": {
        "x0": _x0,
        "radii": _radii,
        "alpha": _to_float,
        "mode": _choice("growth", "nondegeneracy", "both"),
        "target": _optional_float,
        "source": _text,
        "weight_alpha": _to_float,
        "positivity_tol": _to_float,
        "subdomain_radius": _to_float,
    },
    "profile": _PROFILE_KEYS,
    "output": {"directory": _text, "formats": _formats, "tensorboard": _to_bool},
}

REQUIRED = {"problem": ("p", "theta", "sigma"), "grid": ("dim", "h")}

_SECTION_RE = re.compile(r"^\s*\[([^\]]+)\]")
_KEY_RE = re.compile(r"^\s*([^=:#;\s\[][^=:]*?)\s*[=:]")


def _line_numbers(text: str) -> Tuple[Dict[str, int], Dict[Tuple[str, str], int]]:
    sections: Dict[str, int] = {}
    keys: Dict[Tuple[str, str], int] = {}
    current = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        section = _SECTION_RE.match(line)
        if section:
            current = section.group(1).strip()
            sections.setdefault(current, lineno)
            continue
        key = _KEY_RE.match(line)
        if key and current is not None and not line[:1].isspace():
            keys.setdefault((current, key.group(1).strip()), lineno)
    return sections, keys


def parse_experiment_config(text: str, path: Path = Path("<string>")) -> ExperimentConfig:
    """Parse an experiment description; every failure is a ConfigError with a line number."""
    parser = configparser.ConfigParser(
        interpolation=None,
        comment_prefixes=("#", ";"),
        inline_comment_prefixes=("#",),
        strict=True,
        empty_lines_in_values=False,
    )
    parser.optionxform = str
    try:
        parser.read_string(text, source=str(path))
    except configparser.DuplicateSectionError as exc:
        raise ConfigError(f"duplicate section [{exc.section}]", exc.section, exc.lineno) from None
    except configparser.DuplicateOptionError as exc:
        raise ConfigError(f"duplicate key {exc.option!r} in [{exc.section}]", exc.option, exc.lineno) from None
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError("key outside of any [section]", None, exc.lineno) from None
    except configparser.ParsingError as exc:
        lineno, line = exc.errors[0]
        raise ConfigError(f"cannot parse {line.strip()!r}", None, lineno) from None

    section_lines, key_lines = _line_numbers(text)
    settings: Dict[str, Dict[str, object]] = {}
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]", section, section_lines.get(section))
        parsed: Dict[str, object] = {}
        for key, value in parser.items(section):
            lineno = key_lines.get((section, key))
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]", key, lineno)
            parsed[key] = SCHEMA[section][key](Setting(key, value, lineno))
        settings[section] = parsed

    for section, keys in REQUIRED.items():
        for key in keys:
            if key not in settings.get(section, {}):
                raise ConfigError(f"missing required key {key!r} in [{section}]", key, section_lines.get(section))

    return _assemble(path, settings, section_lines)


def load_experiment_config(path: Path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from None
    return parse_experiment_config(text, path)


def _assemble(path: Path, settings: Dict[str, Dict[str, object]], section_lines: Dict[str, int]) -> ExperimentConfig:
    problem = settings["problem"]
    grid = dict(settings["grid"])
    dim = int(grid["dim"])
    center = grid.get("center") or tuple([0.0] * dim)
    if len(center) == 1 and dim > 1:
        center = tuple(center * dim)
    if len(center) != dim:
        raise ConfigError(f"center needs {dim} coordinates", "center", section_lines.get("grid"))

    coefficients = settings.get("coefficients", {})
    if "f" in coefficients and "frak_f" in coefficients:
        raise ConfigError("give either f or frak_f, not both", "frak_f", section_lines.get("coefficients"))

    def coefficient(key: str, default: str) -> Setting:
        return coefficients.get(key) or Setting(key, default, None)

    profile_settings = dict(settings.get("profile", {}))
    profile_name = profile_settings.pop("name", None)
    uses_profile = [s.key for s in coefficients.values() if isinstance(s, Setting) and s.value.strip().lower() == "profile"]
    if uses_profile and not profile_name:
        raise ConfigError(
            f"coefficient(s) {uses_profile} refer to a profile but [profile] has no name",
            uses_profile[0],
            coefficients[uses_profile[0]].lineno,
        )

    analysis = dict(settings.get("analysis", {}))
    return ExperimentConfig(
        path=path,
        problem=ProblemBlock(**problem),
        coefficients=CoefficientsBlock(
            B=coefficient("B", "0"),
            rho=coefficient("rho", "0"),
            f=coefficients.get("f") or coefficients.get("frak_f") or Setting("f", "0", None),
            g=coefficient("g", "0"),
            c=coefficients.get("c"),
        ),
        grid=GridBlock(dim=dim, h=float(grid["h"]), radius=float(grid.get("radius", 1.0)), center=tuple(center)),
        solver=SolverBlock(**settings.get("solver", {})),
        analysis=AnalysisBlock(**analysis),
        profile=ProfileBlock(name=profile_name, params=profile_settings),
        output=OutputBlock(**settings.get("output", {})),
    )


def config_summary(config: ExperimentConfig) -> List[str]:
    """Human-readable lines for the console banner."""
    problem, grid = config.problem, config.grid
    lines = [
        f"Problem: p={problem.p:g} theta={problem.theta:g} sigma={problem.sigma:g}"
        + (f" m={problem.m:g} (henon)" if problem.henon_mode else ""),
        f"Grid: dim={grid.dim} h={grid.h:g} radius={grid.radius:g} center={list(grid.center)}",
        f"Solver: tol={config.solver.tol:g} max_iters={config.solver.max_iters:,} envelope={config.solver.envelope}",
    ]
    if config.profile.name:
        lines.append(f"Profile: {config.profile.name}")
    return lines
