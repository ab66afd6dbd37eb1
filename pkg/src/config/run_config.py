"""
Run configuration files.

Plain-text `key = value` lines; `#` starts a comment. Example:

    # annulus, P1 x P1^- Lambda^1
    case = annulus2d
    r = 1
    levels = 4
    base_resolution = 8
    dt = 1e-4
    t_final = 0.01
    output = results/table1.csv
"""
from pathlib import Path
from typing import Dict, List, Literal, Optional, Union

from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from src.exceptions import ConfigurationError


class RunConfig(BaseModel):
    """
    One solver run or study.

    Examples:
        RunConfig(case='cube3d', r=1, levels=3, dt=1e-4, t_final=0.01)
        parse_run_config("configs/table3.cfg").mode -> 'convergence'
    """

    model_config = {'extra': 'forbid'}

    mode: Optional[Literal['convergence', 'single-run', 'mesh-info', 'property-check']] = None
    study: Literal['spatial', 'temporal', 'elliptic'] = 'spatial'
    case: str = 'annulus2d'
    r: int = Field(default=1, ge=1, le=2)
    dim: Optional[int] = Field(default=None, ge=2, le=3)
    pairing: Literal['trimmed', 'full'] = 'trimmed'
    levels: int = Field(default=4, ge=1, le=8)
    level: int = Field(default=0, ge=0)
    base_resolution: Optional[int] = Field(default=None, ge=1)
    dt: float = Field(default=1e-4, gt=0)
    t_final: float = Field(default=0.01, ge=0)
    dts: List[float] = Field(default_factory=list)
    reference_dt: Optional[float] = Field(default=None, gt=0)
    initial: Literal['zero', 'elliptic_projection'] = 'elliptic_projection'
    output: Optional[str] = None

    @field_validator('dts', mode='before')
    @classmethod
    def split_dts(cls, v):
        """Accept a comma-separated list"""
        if isinstance(v, str):
            return [item.strip() for item in v.split(',') if item.strip()]
        return v

    @model_validator(mode='after')
    def check_case(self) -> 'RunConfig':
        """Names resolve to registered cases; dim agrees with the case"""
        from src.services.mms import CASES, get_case

        if self.case not in CASES:
            raise ValueError(f"unknown case {self.case!r}; choose from {sorted(CASES)}")
        case_dim = get_case(self.case).dim
        if self.dim is not None and self.dim != case_dim:
            raise ValueError(f"case {self.case} is {case_dim}D, config says dim={self.dim}")
        self.dim = case_dim
        if self.study == 'temporal' and (len(self.dts) < 2 or self.reference_dt is None):
            raise ValueError("temporal study needs dts (two or more) and reference_dt")
        return self


def parse_run_config_text(text: str) -> RunConfig:
    """
    Parse configuration text.

    Raises:
        ConfigurationError: malformed line, unknown or duplicate key, or invalid value
            (with the line number of the offending key when known)
    """
    values: Dict[str, str] = {}
    lines: Dict[str, int] = {}
    known = set(RunConfig.model_fields)

    for line_num, raw in enumerate(text.splitlines(), 1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        if '=' not in line:
            raise ConfigurationError(f"expected 'key = value', got {line!r}", line_num)
        key, value = (part.strip() for part in line.split('=', 1))
        key = key.replace('-', '_')
        if key not in known:
            raise ConfigurationError(f"unknown key {key!r}", line_num)
        if key in values:
            raise ConfigurationError(f"duplicate key {key!r}", line_num)
        if not value:
            raise ConfigurationError(f"empty value for {key!r}", line_num)
        values[key] = value
        lines[key] = line_num

    try:
        return RunConfig(**values)
    except ValidationError as e:
        error = e.errors()[0]
        location = error['loc'][0] if error['loc'] else None
        message = f"{location}: {error['msg']}" if location else error['msg']
        raise ConfigurationError(message, lines.get(location))


def parse_run_config(path: Union[str, Path]) -> RunConfig:
    """Read and parse a configuration file"""
    try:
        text = Path(path).read_text(encoding='utf-8')
    except OSError as e:
        raise ConfigurationError(f"cannot read config {path}: {e}")
    return parse_run_config_text(text)
