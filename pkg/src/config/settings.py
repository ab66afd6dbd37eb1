"""
Configuration management using Pydantic Settings.
Loads from environment variables (prefix FEEC_HEAT_) and .env file.
"""
from typing import Literal
from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Solver settings with validation"""

    model_config = SettingsConfigDict(
        env_file='.env',
        env_file_encoding='utf-8',
        env_prefix='FEEC_HEAT_',
        case_sensitive=False,
        extra='ignore'
    )

    # Quadrature
    quadrature_extra_degree: int = Field(default=0, ge=0, le=4)

    # Linear algebra
    pivot_tolerance: float = Field(default=1e-13, gt=0)
    solve_residual_tolerance: float = Field(default=1e-10, gt=0)

    # Harmonic forms (inverse subspace iteration)
    harmonic_shift: float = Field(default=1.0, gt=0)
    harmonic_max_iterations: int = Field(default=60, ge=1)
    harmonic_tolerance: float = Field(default=1e-8, gt=0)
    harmonic_gap_factor: float = Field(default=1e3, gt=1)

    # Topology
    betti_rank_limit: int = Field(default=800, ge=0)

    # Processing
    max_workers: int = Field(default=1, ge=1)
    random_seed: int = Field(default=20140101)
    output_dir: str = Field(default='results')

    # Monitoring
    log_level: Literal['DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL'] = 'INFO'

    @field_validator('log_level', mode='before')
    @classmethod
    def normalize_log_level(cls, v):
        """Accept lower-case level names from the environment"""
        return v.upper() if isinstance(v, str) else v


# Global settings instance
settings = Settings()
