from enum import Enum
from pathlib import Path
from typing import List

from pydantic import BaseModel, DirectoryPath, Field, field_validator

from ..io import SymbolFormat


class CoefficientMode(str, Enum):
    """How the encoder picks its linearization coefficients"""

    SHORTCUT = "shortcut"  # gradient at the source's own count matrix
    ITERATIVE = "iterative"  # re-expand at each reconstruction until the cost stops falling
    PROGRAM = "program"  # gradient at the coefficient program's optimum


class EncoderConfig(BaseModel):
    """Config for the fixed-slope encoder"""

    alpha: float = Field(default=4.0, gt=0, description="Slope multiplying the distortion")
    k: int = Field(default=7, ge=0, description="Context order of the entropy term")
    k1: int | None = Field(default=None, ge=1, description="Block length of the program")
    reconstruction_size: int | None = Field(
        default=None, ge=1, description="Defaults to the source alphabet size"
    )
    distortion: List[List[float]] | None = Field(
        default=None, description="Single-letter distortion matrix; Hamming when omitted"
    )
    lambda_max: float | None = Field(default=None, gt=0)
    mode: CoefficientMode = CoefficientMode.SHORTCUT
    max_rounds: int = Field(default=5, ge=1)
    max_states: int = Field(default=1 << 20, ge=1, description="Trellis state budget")
    max_program_variables: int = Field(default=1 << 12, ge=1, description="LP size budget")
    symbol_format: SymbolFormat = SymbolFormat.DIGITS


class SourceConfig(BaseModel):
    """Config for the synthetic binary symmetric Markov source"""

    q: float = Field(default=0.2, gt=0, le=0.5, description="Flip probability")
    n: int = Field(default=5000, ge=1, description="Sequence length")
    seed: int = Field(default=0, ge=0, description="Root seed of every experiment")


class ExperimentConfig(BaseModel):
    """Config for the reproduction sweeps"""

    alphas: List[float] = Field(default_factory=lambda: [0.5, 1.0, 2.0, 4.0, 8.0])
    reps: int = Field(default=20, ge=1, description="Source realizations per alpha")
    fig3_reps: int = Field(default=10, ge=1)
    workers: int = Field(default=1, ge=1)
    anneal_iterations_per_symbol: int = Field(default=10, ge=1)
    ziv_ns: List[int] = Field(default_factory=lambda: [2**e for e in range(10, 19, 2)])
    ziv_samples: int = Field(default=3, ge=1)
    rd_points: int = Field(default=101, ge=2)
    fig3_mode: CoefficientMode = Field(
        default=CoefficientMode.ITERATIVE,
        description="Coefficient mode of the Viterbi side of the annealing comparison",
    )

    @field_validator("alphas")
    @classmethod
    def _positive_alphas(cls, alphas: List[float]) -> List[float]:
        if not alphas or any(a <= 0 for a in alphas):
            raise ValueError("alphas must be a non-empty list of positive slopes")
        return alphas


class Config(BaseModel):
    """Main config for markov-lossy"""

    data_dir: DirectoryPath = Field(
        default=Path("data"),
        description="Directory for the DuckDB results database and CSV output",
    )
    encoder: EncoderConfig = Field(default_factory=EncoderConfig)
    source: SourceConfig = Field(default_factory=SourceConfig)
    experiment: ExperimentConfig = Field(default_factory=ExperimentConfig)

    @property
    def db_path(self) -> Path:
        """Get the path to the DuckDB database file"""
        return self.data_dir / "markov_lossy.duckdb"
