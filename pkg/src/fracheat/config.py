"""Experiment configuration files.

INI-style text read with :mod:`configparser`::

    [problem]
    s = 0.5
    gamma = 1
    c = 0
    length = 1
    T = 1

    [modes]
    # k = u0 [forcing kind and parameters]
    1 = 1.0
    2 = 0.0 power 1.0 0.5

    [discretization]
    K = 256
    M = 16
    Y = 1.5          # or "inf" for the diagonal stepper
    stepper = fem    # fem | diagonal

    [sweep]
    kind = space     # time | space | projector | truncation | stability
    values = 8 16 32 64

    [check]
    slope_min = -0.6
    slope_max = -0.4

Forcing kinds: ``zero``, ``constant c``, ``power c p``, ``exp c a`` and
``ml c a q``.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from pathlib import Path

from fracheat.spectral import FractionalParams, SpectralData, TimeProfile

SWEEP_KINDS = ("time", "space", "projector", "truncation", "stability")
STEPPERS = ("fem", "diagonal")


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration."""


@dataclass(frozen=True)
class CheckBands:
    column: str | None = None
    slope_min: float = -math.inf
    slope_max: float = math.inf

    def contains(self, slope: float) -> bool:
        return math.isfinite(slope) and self.slope_min <= slope <= self.slope_max


@dataclass(frozen=True)
class ExperimentConfig:
    params: FractionalParams
    modes: tuple[tuple, ...]
    T: float = 1.0
    K: int = 64
    M: int = 16
    Y: float | None = 1.5
    mu: float | None = None
    stepper: str = "fem"
    sweep_kind: str | None = None
    sweep_values: tuple[float, ...] = ()
    seed: int = 0
    samples: int = 20
    check: CheckBands = field(default_factory=CheckBands)
    oracle_points: tuple[int, int] = (11, 5)
    oracle_times: tuple[float, ...] = ()
    name: str = "experiment"

    @property
    def data(self) -> SpectralData:
        return SpectralData.from_modes(self.params, self.modes)

    def with_knob(self, **changes) -> ExperimentConfig:
        from dataclasses import replace

        return replace(self, **changes)


_FORCING_ARITY = {"zero": 0, "constant": 1, "power": 2, "exp": 2, "ml": 3}


def parse_forcing(tokens: list[str]) -> TimeProfile:
    if not tokens:
        return TimeProfile.zero()
    kind, args = tokens[0], tokens[1:]
    if kind not in _FORCING_ARITY:
        raise ConfigError(f"unknown forcing kind {kind!r}")
    if len(args) != _FORCING_ARITY[kind]:
        raise ConfigError(f"forcing {kind!r} takes {_FORCING_ARITY[kind]} parameters, got {len(args)}")
    try:
        vals = [float(a) for a in args]
    except ValueError as exc:
        raise ConfigError(f"bad forcing parameters {args}") from exc
    builders = {
        "zero": TimeProfile.zero,
        "constant": TimeProfile.constant,
        "power": TimeProfile.power,
        "exp": TimeProfile.exponential_decay,
        "ml": TimeProfile.mittag_leffler_mode,
    }
    try:
        return builders[kind](*vals)
    except ValueError as exc:
        raise ConfigError(f"forcing {kind!r}: {exc}") from exc


def _float(section: configparser.SectionProxy, key: str, default=None) -> float | None:
    raw = section.get(key)
    if raw is None:
        if default is None:
            raise ConfigError(f"[{section.name}] missing required key {key!r}")
        return default
    try:
        return float(raw)
    except ValueError as exc:
        raise ConfigError(f"[{section.name}] {key} = {raw!r} is not a number") from exc


def _int(section: configparser.SectionProxy, key: str, default: int) -> int:
    value = _float(section, key, float(default))
    if value != int(value):
        raise ConfigError(f"[{section.name}] {key} must be an integer")
    return int(value)


def parse_config(text: str, name: str = "experiment") -> ExperimentConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",), comment_prefixes=("#",))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc

    if not parser.has_section("problem"):
        raise ConfigError("missing [problem] section")
    prob = parser["problem"]
    try:
        params = FractionalParams(
            s=_float(prob, "s"),
            gamma=_float(prob, "gamma"),
            c_coeff=_float(prob, "c", 0.0),
            domain_length=_float(prob, "length", 1.0),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
    T = _float(prob, "T", 1.0)
    if not T > 0.0:
        raise ConfigError(f"T must be positive: got {T}")

    modes = []
    if parser.has_section("modes"):
        for key, raw in parser["modes"].items():
            try:
                k = int(key)
            except ValueError as exc:
                raise ConfigError(f"mode index {key!r} is not an integer") from exc
            if k < 1:
                raise ConfigError(f"mode index must be positive: got {k}")
            tokens = raw.split()
            if not tokens:
                raise ConfigError(f"mode {k} has no initial coefficient")
            try:
                u0 = float(tokens[0])
            except ValueError as exc:
                raise ConfigError(f"mode {k}: bad initial coefficient {tokens[0]!r}") from exc
            modes.append((k, u0, parse_forcing(tokens[1:])))
    if not modes:
        raise ConfigError("at least one mode is required in [modes]")
    modes.sort(key=lambda m: m[0])

    disc = parser["discretization"] if parser.has_section("discretization") else parser["DEFAULT"]
    K = _int(disc, "K", 64)
    M = _int(disc, "M", 16)
    Y_raw = disc.get("Y", "1.5").strip().lower()
    Y = None if Y_raw in ("inf", "infinity", "none") else _float(disc, "Y", 1.5)
    if Y is not None and Y < 1.0:
        raise ConfigError(f"Y must be at least 1: got {Y}")
    mu_raw = disc.get("mu")
    mu = None if mu_raw in (None, "", "auto") else _float(disc, "mu")
    stepper = disc.get("stepper", "fem").strip()
    if stepper not in STEPPERS:
        raise ConfigError(f"stepper must be one of {STEPPERS}: got {stepper!r}")
    if stepper == "fem" and Y is None:
        raise ConfigError("the fem stepper needs a finite Y")
    if K < 1 or M < 1:
        raise ConfigError("K and M must be positive")

    sweep_kind, values, seed, samples = None, (), 0, 20
    if parser.has_section("sweep"):
        sw = parser["sweep"]
        sweep_kind = sw.get("kind", "").strip() or None
        if sweep_kind is not None and sweep_kind not in SWEEP_KINDS:
            raise ConfigError(f"sweep kind must be one of {SWEEP_KINDS}: got {sweep_kind!r}")
        try:
            values = tuple(float(v) for v in sw.get("values", "").split())
        except ValueError as exc:
            raise ConfigError(f"bad sweep values {sw.get('values')!r}") from exc
        if any(b <= a for a, b in zip(values, values[1:])):
            raise ConfigError(f"sweep values must be strictly increasing: got {values}")
        seed = _int(sw, "seed", 0)
        samples = _int(sw, "samples", 20)
        if sweep_kind in ("time", "space", "projector", "truncation") and len(values) < 2:
            raise ConfigError(f"a {sweep_kind} sweep needs at least two values")
        if sweep_kind == "truncation" and any(v < 1.0 for v in values):
            raise ConfigError("truncation heights must be at least 1")

    bands = CheckBands()
    if parser.has_section("check"):
        ck = parser["check"]
        bands = CheckBands(
            column=ck.get("column"),
            slope_min=_float(ck, "slope_min", -math.inf),
            slope_max=_float(ck, "slope_max", math.inf),
        )

    oracle_points, oracle_times = (11, 5), (T,)
    if parser.has_section("oracle"):
        oc = parser["oracle"]
        oracle_points = (_int(oc, "nx", 11), _int(oc, "ny", 5))
        if min(oracle_points) < 1:
            raise ConfigError("oracle grid sizes must be positive")
        try:
            oracle_times = tuple(float(v) for v in oc.get("times", str(T)).split())
        except ValueError as exc:
            raise ConfigError(f"bad oracle times {oc.get('times')!r}") from exc
        if any(t < 0.0 for t in oracle_times):
            raise ConfigError("oracle times must be nonnegative")

    return ExperimentConfig(
        params=params,
        modes=tuple(modes),
        T=T,
        K=K,
        M=M,
        Y=Y,
        mu=mu,
        stepper=stepper,
        sweep_kind=sweep_kind,
        sweep_values=values,
        seed=seed,
        samples=samples,
        check=bands,
        oracle_points=oracle_points,
        oracle_times=oracle_times,
        name=name,
    )


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from exc
    return parse_config(text, name=path.stem)
