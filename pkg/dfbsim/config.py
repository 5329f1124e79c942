"""
Configuration file parsing.

Simulation configurations are line-oriented ``key = value`` text with ``#``
comments, read with ``configparser`` like any INI file. A single optional
``[simulation]`` section header is accepted; text without a header is read as
if it were under ``[simulation]``.
"""

import configparser
import logging
import os
from typing import Optional

from .core import SimConfig, StepProfile
from .exceptions import ConfigException

logger = logging.getLogger(__name__)

SECTION = "simulation"

REQUIRED_KEYS = ("Lx", "Ly", "nx", "ny", "T", "dt", "K", "beta", "mu_e", "D", "kappa", "R")
OPTIONAL_KEYS = (
    "trunc_level", "fx", "fy", "u0x", "u0y", "c0_mode", "c0_value",
    "step_xlo", "step_xhi", "dt_mode",
)
INTEGER_KEYS = ("nx", "ny")


def _key_lines(text: str) -> dict[str, int]:
    """Map each key to the 1-based line it is defined on."""
    lines: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("#") or stripped.startswith("["):
            continue
        if "=" in stripped:
            lines.setdefault(stripped.split("=", 1)[0].strip(), lineno)
    return lines


def _read_sections(text: str) -> configparser.ConfigParser:
    parser = configparser.ConfigParser(
        delimiters=("=",),
        comment_prefixes=("#",),
        inline_comment_prefixes=("#",),
        interpolation=None,
        strict=True,
    )
    parser.optionxform = str  # type: ignore[assignment,method-assign]
    if not any(line.strip().startswith("[") for line in text.splitlines()):
        text = f"[{SECTION}]\n{text}"
    try:
        parser.read_string(text)
    except configparser.Error as e:
        raise ConfigException(f"malformed configuration: {e}") from e
    extra = [s for s in parser.sections() if s != SECTION]
    if extra:
        raise ConfigException(f"unknown section(s) {extra}; only [{SECTION}] is allowed")
    return parser


def parse_config(text: str) -> SimConfig:
    """
    Parse configuration text into a validated SimConfig.

    Args:
        text (str): Configuration in the ``key = value`` schema.

    Returns:
        SimConfig: The validated configuration.

    Raises:
        ConfigException: On an unknown key, a missing required key, an
            unparsable number or a constraint violation. The message names
            the line number where the key was found.
    """
    lines = _key_lines(text)
    parser = _read_sections(text)
    values = dict(parser[SECTION]) if parser.has_section(SECTION) else {}

    for key in values:
        if key not in REQUIRED_KEYS and key not in OPTIONAL_KEYS:
            raise ConfigException(f"unknown key '{key}'", lines.get(key))
    for key in REQUIRED_KEYS:
        if key not in values:
            raise ConfigException(f"missing required key '{key}'")

    def number(key: str) -> float:
        raw = values[key]
        try:
            if key in INTEGER_KEYS:
                return int(raw)
            return float(raw)
        except ValueError:
            raise ConfigException(f"cannot parse '{key} = {raw}' as a number", lines.get(key)) from None

    def optional(key: str, default: Optional[float]) -> Optional[float]:
        return number(key) if key in values else default

    def check(condition: bool, key: str, message: str) -> None:
        if not condition:
            raise ConfigException(f"{key} {message}", lines.get(key))

    nx, ny = int(number("nx")), int(number("ny"))
    check(nx >= 2, "nx", f"must be an integer >= 2, got {nx}")
    check(ny >= 2, "ny", f"must be an integer >= 2, got {ny}")
    for key in ("Lx", "Ly", "T", "dt", "K", "mu_e", "D", "kappa"):
        check(number(key) > 0, key, f"must be positive, got {values[key]}")
    check(number("beta") >= 0, "beta", f"must be >= 0, got {values['beta']}")

    trunc = optional("trunc_level", None)
    if trunc is not None:
        check(trunc > 0, "trunc_level", f"must be positive, got {trunc}")

    dt_mode = values.get("dt_mode", "adaptive")
    check(dt_mode in ("adaptive", "fixed"), "dt_mode", f"must be 'adaptive' or 'fixed', got {dt_mode!r}")

    lx = number("Lx")
    c0_mode = values.get("c0_mode", "const")
    c0_value = optional("c0_value", 0.0)
    initial_concentration: object
    if c0_mode == "const":
        initial_concentration = float(c0_value or 0.0)
    elif c0_mode == "step":
        for key in ("step_xlo", "step_xhi"):
            if key not in values:
                raise ConfigException(f"c0_mode = step requires '{key}'", lines.get("c0_mode"))
        x_lo, x_hi = number("step_xlo"), number("step_xhi")
        check(0 <= x_lo < x_hi <= lx, "step_xhi",
              f"requires 0 <= step_xlo < step_xhi <= Lx, got [{x_lo}, {x_hi}] with Lx={lx}")
        initial_concentration = StepProfile(float(c0_value or 0.0), x_lo, x_hi)
    else:
        raise ConfigException(f"c0_mode must be 'const' or 'step', got {c0_mode!r}", lines.get("c0_mode"))

    fx, fy = optional("fx", 0.0), optional("fy", 0.0)
    forcing = None if fx == 0.0 and fy == 0.0 else (float(fx or 0.0), float(fy or 0.0))

    config = SimConfig(
        domain_extent=(lx, number("Ly")),
        resolution=(nx, ny),
        end_time=number("T"),
        dt=number("dt"),
        dt_mode=dt_mode,
        permeability=number("K"),
        forchheimer=number("beta"),
        effective_viscosity=number("mu_e"),
        diffusion=number("D"),
        reaction_rate=number("kappa"),
        viscosity_contrast=number("R"),
        viscosity_truncation=trunc,
        forcing=forcing,
        initial_velocity=(float(optional("u0x", 0.0) or 0.0), float(optional("u0y", 0.0) or 0.0)),
        initial_concentration=initial_concentration,  # type: ignore[arg-type]
    )
    config.validate()
    logger.debug("parsed configuration with %d keys", len(values))
    return config


def load_config(path: str) -> SimConfig:
    """
    Read and parse a configuration file.

    Raises:
        ConfigException: If the file is missing, unreadable or invalid.
    """
    if not os.path.exists(path):
        raise ConfigException(f"configuration file '{path}' not found")
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as e:
        raise ConfigException(f"cannot read '{path}': {e}") from e
    return parse_config(text)
