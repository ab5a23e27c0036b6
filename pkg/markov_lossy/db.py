import json
import types
from pathlib import Path
from typing import Any, Dict, List

import duckdb
import pandas as pd
from pydantic import BaseModel, Field

from .sql_loader import SQLLoader


class ExperimentRun(BaseModel):
    """One encoder run inside an experiment cell, with its full provenance"""

    experiment: str
    cell: int = Field(description="Index of the (alpha, replication) cell")
    encoder: str = Field(description="viterbi, mcmc, ...")
    alpha: float
    replication: int
    seed: int
    n: int
    k: int
    q: float | None = None
    distortion: float
    entropy: float
    linearized_cost: float | None = None
    true_cost: float
    bits_per_symbol: float | None = None
    wall_clock: float
    config: Dict[str, Any] = Field(default_factory=dict)

    def as_row(self) -> tuple[Any, ...]:
        return (
            self.experiment,
            self.cell,
            self.encoder,
            self.alpha,
            self.replication,
            self.seed,
            self.n,
            self.k,
            self.q,
            self.distortion,
            self.entropy,
            self.linearized_cost,
            self.true_cost,
            self.bits_per_symbol,
            self.wall_clock,
            json.dumps(self.config, sort_keys=True),
        )


class ResultsDatabase:
    """Handles experiment result storage using DuckDB"""

    def __init__(self, db_path: Path | str, sql_dir: Path | None = None):
        """
        Initialize database connection and schema

        Args:
            db_path: Path to DuckDB database file, or ":memory:"
            sql_dir: Path to SQL files directory (defaults to the packaged SQL)
        """
        self.conn = duckdb.connect(str(db_path))
        self.sql = SQLLoader(sql_dir)
        self._init_schema()

    def _init_schema(self) -> None:
        """Create every table under sql/schema"""
        for name in self.sql.names("schema"):
            self.conn.execute(self.sql.get_query(name))

    def upsert_runs(self, runs: List[ExperimentRun]) -> None:
        """
        Insert or replace experiment runs keyed by (experiment, cell, encoder)

        Args:
            runs: Runs to store
        """
        if not runs:
            return
        self.conn.executemany(
            self.sql.get_query("queries/upsert_experiment_run"), [run.as_row() for run in runs]
        )

    def select_runs(self, experiment: str) -> pd.DataFrame:
        """Stored runs of one experiment ordered by cell and encoder"""
        return self.conn.execute(
            self.sql.get_query("queries/select_experiment_runs"), [experiment]
        ).df()

    def close(self) -> None:
        """Close the database connection"""
        self.conn.close()

    def __enter__(self) -> "ResultsDatabase":
        return self

    def __exit__(
        self,
        exc_type: type[BaseException] | None,
        exc_val: BaseException | None,
        exc_tb: types.TracebackType | None,
    ) -> None:
        self.close()
