"""Scenario files: INI sections, every key addressed as ``section.key``."""

from __future__ import annotations

import configparser
from importlib import resources
from pathlib import Path

from eqfslam.sim import ConfigError, ScenarioConfig, VelocityProfile

DEFAULT_SEED = 0

# section.key -> parser
SCHEMA = {
    "scenario.landmarks": int,
    "scenario.duration": float,
    "scenario.dt": float,
    "velocity.profile": str,
    "velocity.amplitude": float,
    "velocity.frequency": float,
    "velocity.constant": lambda s: _floats(s, 2),
    "landmarks.x_min": float,
    "landmarks.x_max": float,
    "landmarks.y_min": float,
    "landmarks.y_max": float,
    "offset.x_min": float,
    "offset.x_max": float,
    "offset.y_min": float,
    "offset.y_max": float,
    "gains.p": lambda s: _gain(s),
    "gains.q": lambda s: _gain(s),
    "gains.sigma0": lambda s: _gain(s),
    "filter.integrator": str,
    "filter.riccati": str,
    "rng.algorithm": str,
    "rng.seed": int,
    "noise.bearing_std": float,
}


def _floats(text, count):
    vals = [float(v) for v in text.replace(",", " ").split()]
    if len(vals) != count:
        raise ValueError(f"expected {count} numbers, got {len(vals)}")
    return tuple(vals)


def _gain(text):
    vals = [float(v) for v in text.replace(",", " ").split()]
    if len(vals) == 1:
        return vals[0]
    if len(vals) == 4:
        return tuple(vals)
    raise ValueError("gain must be one scalar or four numbers (row-major 2x2 block)")


def shipped_config(name: str = "paper.cfg") -> Path:
    return Path(str(resources.files("eqfslam") / "configs" / name))


def parse_config(text: str, source: str = "<string>") -> dict:
    """Parse and type-check a scenario file into a flat ``{section.key: value}`` dict."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError(f"{source}: line {exc.lineno}: expected a [section] header") from exc
    except configparser.ParsingError as exc:
        lineno, line = exc.errors[0]
        raise ConfigError(f"{source}: line {lineno}: cannot parse {line.strip()!r}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from exc

    values = {}
    for section in parser.sections():
        for key, raw in parser.items(section):
            name = f"{section}.{key}"
            if name not in SCHEMA:
                raise ConfigError(f"{source}: unknown key {name!r}")
            try:
                values[name] = SCHEMA[name](raw)
            except ValueError as exc:
                raise ConfigError(f"{source}: bad value for {name!r}: {exc}") from exc
    return values


def build_config(values: dict) -> ScenarioConfig:
    defaults = ScenarioConfig()
    dv = defaults.velocity
    get = values.get
    lbox, obox = defaults.landmark_box, defaults.offset_box

    def box(prefix, d):
        return ((get(f"{prefix}.x_min", d[0][0]), get(f"{prefix}.x_max", d[0][1])),
                (get(f"{prefix}.y_min", d[1][0]), get(f"{prefix}.y_max", d[1][1])))

    velocity = VelocityProfile(
        kind=get("velocity.profile", dv.kind),
        amplitude=get("velocity.amplitude", dv.amplitude),
        frequency=get("velocity.frequency", dv.frequency),
        constant=get("velocity.constant", dv.constant),
    )
    return ScenarioConfig(
        n=get("scenario.landmarks", defaults.n),
        duration=get("scenario.duration", defaults.duration),
        dt=get("scenario.dt", defaults.dt),
        velocity=velocity,
        landmark_box=box("landmarks", lbox),
        offset_box=box("offset", obox),
        seed=get("rng.seed", DEFAULT_SEED),
        rng_algorithm=get("rng.algorithm", defaults.rng_algorithm),
        p=get("gains.p", defaults.p),
        q=get("gains.q", defaults.q),
        sigma0=get("gains.sigma0", defaults.sigma0),
        integrator=get("filter.integrator", defaults.integrator),
        riccati=get("filter.riccati", defaults.riccati),
        bearing_noise=get("noise.bearing_std", defaults.bearing_noise),
    )


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return build_config(parse_config(text, str(path)))


def dump_config(config: ScenarioConfig) -> str:
    """Render a config back to the file format (used to echo runs)."""
    def gain(v):
        return " ".join(repr(float(x)) for x in (v if isinstance(v, (tuple, list)) else [v]))

    (lx0, lx1), (ly0, ly1) = config.landmark_box
    (ox0, ox1), (oy0, oy1) = config.offset_box
    vel = config.velocity
    lines = [
        "[scenario]", f"landmarks = {config.n}", f"duration = {config.duration!r}", f"dt = {config.dt!r}", "",
        "[velocity]", f"profile = {vel.kind}", f"amplitude = {vel.amplitude!r}", f"frequency = {vel.frequency!r}",
        f"constant = {vel.constant[0]!r} {vel.constant[1]!r}", "",
        "[landmarks]", f"x_min = {lx0!r}", f"x_max = {lx1!r}", f"y_min = {ly0!r}", f"y_max = {ly1!r}", "",
        "[offset]", f"x_min = {ox0!r}", f"x_max = {ox1!r}", f"y_min = {oy0!r}", f"y_max = {oy1!r}", "",
        "[gains]", f"p = {gain(config.p)}", f"q = {gain(config.q)}", f"sigma0 = {gain(config.sigma0)}", "",
        "[filter]", f"integrator = {config.integrator}", f"riccati = {config.riccati}", "",
        "[rng]", f"algorithm = {config.rng_algorithm}", f"seed = {config.seed}", "",
        "[noise]", f"bearing_std = {config.bearing_noise!r}", "",
    ]
    return "\n".join(lines)
