"""
DigiWFS Unwrap - Run configuration

This module defines the run configuration shared by the command line, config
files and the comparison runner. Defaults live only on :class:`RunConfig`;
the argument parser reads them from the model so the two cannot drift apart.

Config files are flat ``key=value`` files (the .env syntax) read with
python-dotenv. Values from the command line override values from a file,
which override the defaults.

Classes:
    RunConfig: Validated run parameters

Functions:
    parse_method: Split a method string into base method and overrides
    build_config: Merge defaults, a config file and overrides
    load_config / save_config: Read and write config files
"""

import logging
import math
import os
from typing import Any, Dict, Literal, Mapping, Optional, Tuple

from dotenv import dotenv_values
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from backend.errors import GridIOError, UsageError
from backend.optics.grid_io import write_bytes_atomic
from backend.sensors.fourier import SHAPE_KINDS

logger = logging.getLogger(__name__)

BASE_METHODS = ("sh", "p4_linear", "p4_nope", "columnwise", "mrp", "pe")
FOURIER_KINDS = SHAPE_KINDS + ("roof",)
EXTERNAL_METHODS = ("tie",)


def parse_method(text: str) -> Tuple[str, Dict[str, str]]:
    """
    Split ``method@key=value,key=value`` into the method and its overrides.

    Args:
        text (str): Method string such as ``sh@n_sub=32`` or ``fourier:cone``

    Returns:
        Tuple[str, Dict[str, str]]: Method name and raw override values
    """
    method, _, tail = text.strip().partition("@")
    overrides: Dict[str, str] = {}
    if tail:
        for item in tail.split(","):
            key, sep, value = item.partition("=")
            if not sep or not key.strip():
                raise UsageError(f"Malformed method override '{item}' in '{text}'", key="method")
            overrides[key.strip()] = value.strip()
    return method, overrides


def check_method(method: str, allow_external: bool = False) -> str:
    if method in BASE_METHODS:
        return method
    if method.startswith("fourier:") and method.split(":", 1)[1] in FOURIER_KINDS:
        return method
    if allow_external and method in EXTERNAL_METHODS:
        return method
    raise UsageError(f"Unknown method '{method}'", key="method")


class RunConfig(BaseModel):
    """Validated parameters of one unwrapping run."""

    model_config = ConfigDict(extra="forbid")

    method: str = "pe"
    n_sub: int = Field(16, ge=2)
    oversample: int = Field(8, ge=1)
    weighting: Literal["modulus", "intensity"] = "modulus"
    # pupil images of an N/2 aperture just touch at c = pi/2
    c: float = Field(math.pi / 2, gt=0)
    s: float = Field(11.0 / 6.0, gt=0)
    # None picks linear for pyramid4 and zero for the other sensors
    start: Optional[Literal["zero", "linear"]] = None
    mod_radius: float = Field(0.0, ge=0)
    mod_steps: int = Field(16, ge=1)
    max_iters: int = Field(50, ge=1)
    tol: float = Field(1e-6, ge=0)
    tip_tilt: bool = True
    seed: int = Field(0, ge=0)
    noise: float = Field(0.2, ge=0)
    n: int = Field(128, ge=4)
    r0: float = Field(8.0, gt=0)
    subharmonics: bool = False
    aperture: Literal["disc", "square", "full"] = "disc"
    diameter: Optional[int] = Field(None, ge=1)
    png: bool = False
    input: Optional[str] = None
    truth: Optional[str] = None
    output: Optional[str] = None

    @field_validator("method")
    @classmethod
    def _known_method(cls, value: str) -> str:
        return check_method(value)

    @field_validator("n")
    @classmethod
    def _even_size(cls, value: int) -> int:
        if value % 2:
            raise ValueError("grid size must be even")
        return value

    @property
    def aperture_diameter(self) -> int:
        return self.diameter if self.diameter is not None else self.n // 2

    def with_overrides(self, overrides: Mapping[str, Any]) -> "RunConfig":
        values = self.model_dump()
        values.update(overrides)
        return validate_config(values)


def validate_config(values: Mapping[str, Any]) -> RunConfig:
    """
    Validate raw values, mapping pydantic errors to UsageError.

    Args:
        values (Mapping[str, Any]): Raw values, e.g. strings from a file

    Returns:
        RunConfig: Validated configuration
    """
    try:
        return RunConfig.model_validate(dict(values))
    except ValidationError as e:
        first = e.errors()[0]
        key = str(first["loc"][0]) if first.get("loc") else None
        if first.get("type") == "extra_forbidden":
            raise UsageError(f"Unknown configuration key '{key}'", key=key) from e
        raise UsageError(f"Invalid value for '{key}': {first.get('msg')}", key=key) from e


def load_config(path: str) -> Dict[str, str]:
    """
    Read a ``key=value`` config file.

    Args:
        path (str): File path

    Returns:
        Dict[str, str]: Raw values, empty values dropped
    """
    if not os.path.exists(path):
        raise GridIOError(f"Config file not found: {path}")
    values = {key: value for key, value in dotenv_values(path).items() if value not in (None, "")}
    logger.info(f"Loaded {len(values)} settings from {path}")
    return values


def save_config(config: RunConfig, path: str) -> str:
    """
    Write a config as ``key=value`` lines, omitting unset optional values.

    Returns:
        str: The path written
    """
    lines = []
    for key, value in config.model_dump().items():
        if value is None:
            continue
        if isinstance(value, bool):
            value = str(value).lower()
        lines.append(f"{key}={value!r}" if isinstance(value, float) else f"{key}={value}")
    write_bytes_atomic(path, ("\n".join(lines) + "\n").encode("utf-8"))
    return path


def build_config(config_path: Optional[str] = None, overrides: Optional[Mapping[str, Any]] = None) -> RunConfig:
    """
    Defaults, then the config file, then explicit overrides.

    Args:
        config_path (str, optional): ``key=value`` file
        overrides (Mapping[str, Any], optional): Values that win over the file

    Returns:
        RunConfig: Merged configuration
    """
    values: Dict[str, Any] = {}
    if config_path:
        values.update(load_config(config_path))
    if overrides:
        values.update({key: value for key, value in overrides.items() if value is not None})
    return validate_config(values)
