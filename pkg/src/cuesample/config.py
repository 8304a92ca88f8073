"""Flat INI-style experiment configuration.

Grammar: ``[section]`` headers, ``key = value`` lines, ``#`` comments (whole
line or trailing). Lists are comma separated; an empty value is an empty
list. Every key belongs to exactly one section and unknown keys or sections
are errors. See README for the full key reference.
"""

from __future__ import annotations

import configparser
import dataclasses
import re
from dataclasses import dataclass, field, fields
from importlib import resources
from typing import get_type_hints

from .models import MODEL_KINDS, CueModel, ModelError, make_model


class ConfigError(ValueError):
    """Malformed or invalid configuration; ``field`` names the culprit."""

    def __init__(self, message: str, field: str | None = None, line: int | None = None):
        prefix = f"line {line}: " if line else ""
        super().__init__(prefix + message)
        self.field = field
        self.line = line


def _opt(section: str, default, **kw):
    if isinstance(default, (list, tuple)):
        return field(default=tuple(default), metadata={"section": section, **kw})
    return field(default=default, metadata={"section": section, **kw})


@dataclass(frozen=True)
class ExperimentConfig:
    # [run]
    seed: int = _opt("run", 0)
    n_trials: int = _opt("run", 1000)
    repetitions: int = _opt("run", 10)
    sample_sizes: tuple[int, ...] = _opt("run", (10, 50, 100, 300, 500, 1000, 3000, 10000))
    allocation: str = _opt("run", "stratified")
    output_path: str = _opt("run", "")
    # [model]
    kind: str = _opt("model", "two-cue")
    prior_c1: float = _opt("model", 0.5)
    sigma_s: float = _opt("model", 4.0)
    sigma_1: float = _opt("model", 6.0)
    sigma_2: float = _opt("model", 6.0)
    sigmas: tuple[float, ...] = _opt("model", ())
    half_range: float = _opt("model", 10.0)
    sigma_range: tuple[float, ...] = _opt("model", ())
    cue_counts: tuple[int, ...] = _opt("model", (3, 10))
    # [neural]
    pool_size: int = _opt("neural", 1000)
    gain: float = _opt("neural", 10000.0)
    stride: int = _opt("neural", 30)
    max_retries: int = _opt("neural", 10)
    # [sweep]
    sigma_s_values: tuple[float, ...] = _opt("sweep", (1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0))
    sigma_grid: tuple[float, ...] = _opt("sweep", (1.0, 8.0, 1.0))
    # [disparity]
    disparity_bin_width: float = _opt("disparity", 1.0)
    min_bin_count: int = _opt("disparity", 200)
    # [theorem]
    epsilons: tuple[float, ...] = _opt("theorem", (0.05, 0.02, 0.01))
    # [infer]
    observations: tuple[float, ...] = _opt("infer", (0.0, 0.0))
    n_samples: int = _opt("infer", 100000)
    # [lemma]
    x_distribution: str = _opt("lemma", "gamma:4,0,1")
    y_distribution: str = _opt("lemma", "uniform:1,2")
    paired: bool = _opt("lemma", False)
    lemma_sample_sizes: tuple[int, ...] = _opt("lemma", (10, 100, 1000, 10000))
    lemma_epsilons: tuple[float, ...] = _opt("lemma", (0.5, 0.2, 0.1))

    def __post_init__(self):
        validate(self)

    def model(self) -> CueModel:
        """The fixed model described by the ``[model]`` section."""
        if self.kind != "two-cue" and len(self.sigmas) < 2:
            raise ConfigError(f"sigmas: a {self.kind} model needs at least two entries", field="sigmas")
        try:
            if self.kind == "two-cue":
                return make_model(
                    "two-cue",
                    prior_c1=self.prior_c1,
                    sigma_s=self.sigma_s,
                    sigma_1=self.sigma_1,
                    sigma_2=self.sigma_2,
                )
            if self.kind == "multi-cue":
                return make_model(
                    "multi-cue",
                    n_cues=len(self.sigmas),
                    sigmas=self.sigmas,
                    prior_c1=self.prior_c1,
                    sigma_s=self.sigma_s,
                )
            return make_model(
                "same-different",
                n_objects=len(self.sigmas),
                sigmas=self.sigmas,
                prior_c1=self.prior_c1,
                half_range=self.half_range,
                sigma_s=self.sigma_s,
            )
        except ModelError as exc:
            raise ConfigError(str(exc), field=_field_in(str(exc))) from exc

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


def _field_in(message: str) -> str | None:
    names = [f.name for f in fields(ExperimentConfig)]
    for token in re.findall(r"[a-z_0-9]+", message):
        if token in names:
            return token
    return None


SECTIONS: dict[str, list[str]] = {}
for _f in fields(ExperimentConfig):
    SECTIONS.setdefault(_f.metadata["section"], []).append(_f.name)
_TYPES = get_type_hints(ExperimentConfig)


def _fail(name: str, why: str):
    raise ConfigError(f"{name}: {why}", field=name)


def validate(cfg: ExperimentConfig) -> None:
    if cfg.seed < 0:
        _fail("seed", "must be non-negative")
    if cfg.n_trials < 1:
        _fail("n_trials", "must be >= 1")
    if cfg.repetitions < 1:
        _fail("repetitions", "must be >= 1")
    if not cfg.sample_sizes:
        _fail("sample_sizes", "must not be empty")
    if any(n < 1 for n in cfg.sample_sizes):
        _fail("sample_sizes", "entries must be >= 1")
    if any(b <= a for a, b in zip(cfg.sample_sizes, cfg.sample_sizes[1:])):
        _fail("sample_sizes", "must be strictly ascending")
    if cfg.allocation not in ("iid", "stratified"):
        _fail("allocation", "must be 'iid' or 'stratified'")
    if cfg.kind not in MODEL_KINDS:
        _fail("kind", f"must be one of {', '.join(MODEL_KINDS)}")
    if not 0.0 < cfg.prior_c1 < 1.0:
        _fail("prior_c1", "must lie in (0, 1)")
    for name in ("sigma_s", "sigma_1", "sigma_2", "half_range", "gain", "disparity_bin_width"):
        if not getattr(cfg, name) > 0:
            _fail(name, "must be positive")
    if any(s <= 0 for s in cfg.sigmas):
        _fail("sigmas", "entries must be positive")
    if cfg.sigma_range and (len(cfg.sigma_range) != 2 or not 0 < cfg.sigma_range[0] <= cfg.sigma_range[1]):
        _fail("sigma_range", "must be empty or 'low, high' with 0 < low <= high")
    if any(n < 2 for n in cfg.cue_counts):
        _fail("cue_counts", "entries must be >= 2")
    if cfg.pool_size < 1:
        _fail("pool_size", "must be >= 1")
    if cfg.stride < 1:
        _fail("stride", "must be >= 1")
    if cfg.max_retries < 0:
        _fail("max_retries", "must be >= 0")
    if any(s <= 0 for s in cfg.sigma_s_values):
        _fail("sigma_s_values", "entries must be positive")
    if len(cfg.sigma_grid) != 3 or cfg.sigma_grid[0] <= 0 or cfg.sigma_grid[1] < cfg.sigma_grid[0] or cfg.sigma_grid[2] <= 0:
        _fail("sigma_grid", "must be 'min, max, step' with 0 < min <= max and step > 0")
    if cfg.min_bin_count < 0:
        _fail("min_bin_count", "must be >= 0")
    if any(not 0 < e for e in cfg.epsilons + cfg.lemma_epsilons):
        _fail("epsilons", "entries must be positive")
    if cfg.n_samples < 1:
        _fail("n_samples", "must be >= 1")
    if any(n < 1 for n in cfg.lemma_sample_sizes):
        _fail("lemma_sample_sizes", "entries must be >= 1")


def _convert(name: str, raw: str):
    hint = _TYPES[name]
    raw = raw.strip()
    try:
        if hint is bool:
            low = raw.lower()
            if low not in configparser.ConfigParser.BOOLEAN_STATES:
                raise ValueError(raw)
            return configparser.ConfigParser.BOOLEAN_STATES[low]
        if hint is int:
            return _to_int(raw)
        if hint is float:
            return float(raw)
        if hint is str:
            return raw
        item = _to_int if hint == tuple[int, ...] else float
        return tuple(item(p.strip()) for p in raw.split(",") if p.strip())
    except ValueError:
        raise ConfigError(f"{name}: cannot parse {raw!r}", field=name) from None


def _to_int(text: str) -> int:
    try:
        return int(text)
    except ValueError:
        value = float(text)
        if not value.is_integer():
            raise
        return int(value)


def _line_of(text: str, key: str) -> int | None:
    pattern = re.compile(rf"^\s*{re.escape(key)}\s*=", re.IGNORECASE)
    for i, line in enumerate(text.splitlines(), 1):
        if pattern.match(line):
            return i
    return None


def read_values(text: str) -> dict:
    """Raw ``{field: value}`` pairs present in ``text`` (no defaults)."""
    parser = configparser.ConfigParser(
        interpolation=None,
        delimiters=("=",),
        comment_prefixes=("#",),
        inline_comment_prefixes=("#",),
        empty_lines_in_values=False,
    )
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        if line is None and getattr(exc, "errors", None):
            line = exc.errors[0][0]
        message = getattr(exc, "message", str(exc)).splitlines()[0]
        raise ConfigError(f"parse error: {message}", line=line) from None

    values = {}
    for section in parser.sections():
        if section not in SECTIONS:
            header = re.compile(rf"^\s*\[{re.escape(section)}\]")
            line = next((i for i, l in enumerate(text.splitlines(), 1) if header.match(l)), None)
            raise ConfigError(f"unknown section [{section}]", line=line)
        for key, raw in parser.items(section):
            if key not in SECTIONS[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]", field=key, line=_line_of(text, key))
            values[key] = _convert(key, raw)
    return values


def parse_config(text: str, base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Parse ``text`` over ``base`` (defaults when omitted) and validate."""
    values = read_values(text)
    base = base or ExperimentConfig()
    return dataclasses.replace(base, **values)


def _emit_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ", ".join(_emit_value(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def emit_config(cfg: ExperimentConfig) -> str:
    """Full config text; ``parse_config(emit_config(c)) == c``."""
    out = []
    for section, names in SECTIONS.items():
        out.append(f"[{section}]")
        out.extend(f"{name} = {_emit_value(getattr(cfg, name))}" for name in names)
        out.append("")
    return "\n".join(out)


PRESETS = ("infer", "exact", "exp1", "exp2", "exp3", "exp4", "multi", "samediff", "theorem1", "lemma1")


def preset_text(name: str) -> str:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}")
    return resources.files("cuesample.presets").joinpath(f"{name}.cfg").read_text(encoding="utf-8")


def load_preset(name: str) -> ExperimentConfig:
    return parse_config(preset_text(name))
