"""
Environment settings loaded from a .env file
"""

import os
from typing import Literal

from dotenv import load_dotenv
from pydantic import BaseModel, Field, ValidationError

from utils.errors import ConfigError

_TRUE_VALUES = {'1', 'true', 'yes', 'on'}


class Settings(BaseModel):
    """Defaults for tolerances, verbosity and output"""
    recovery_tol: float = Field(default=1e-8, gt=0)
    feasibility_tol: float = Field(default=1e-9, gt=0)
    verbose: bool = False
    output_format: Literal['csv', 'json'] = 'csv'


def load_settings() -> Settings:
    """Read DCS_* variables (after loading .env) into a validated Settings"""
    load_dotenv()

    raw = {}
    if os.getenv('DCS_RECOVERY_TOL'):
        raw['recovery_tol'] = os.getenv('DCS_RECOVERY_TOL')
    if os.getenv('DCS_FEASIBILITY_TOL'):
        raw['feasibility_tol'] = os.getenv('DCS_FEASIBILITY_TOL')
    if os.getenv('DCS_VERBOSE'):
        raw['verbose'] = os.getenv('DCS_VERBOSE').strip().lower() in _TRUE_VALUES
    if os.getenv('DCS_OUTPUT_FORMAT'):
        raw['output_format'] = os.getenv('DCS_OUTPUT_FORMAT').strip().lower()

    try:
        return Settings(**raw)
    except ValidationError as e:
        lines = [f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in e.errors()]
        raise ConfigError("Invalid environment settings:\n" + "\n".join(lines)) from e
