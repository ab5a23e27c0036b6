from pathlib import Path
from typing import Dict, List

PACKAGE_SQL_DIR = Path(__file__).parent / "sql"


class SQLLoader:
    """Loads and caches the .sql files of a directory tree"""

    def __init__(self, sql_dir: Path | None = None):
        """
        Initialize SQL loader

        Args:
            sql_dir: Directory containing schema/ and queries/ (defaults to the packaged SQL)
        """
        self.sql_dir = PACKAGE_SQL_DIR if sql_dir is None else Path(sql_dir)
        self._cache: Dict[str, str] = {}

    def get_query(self, name: str) -> str:
        """
        Get SQL text by name

        Args:
            name: Path of the SQL file relative to sql_dir, without .sql

        Returns:
            SQL query string
        """
        if name not in self._cache:
            file_path = self.sql_dir / f"{name}.sql"
            if not file_path.exists():
                raise FileNotFoundError(f"SQL file not found: {file_path}")
            self._cache[name] = file_path.read_text()
        return self._cache[name]

    def names(self, folder: str) -> List[str]:
        """Sorted names of every SQL file under a subfolder, e.g. 'schema'"""
        directory = self.sql_dir / folder
        if not directory.is_dir():
            raise FileNotFoundError(f"SQL folder not found: {directory}")
        return sorted(f"{folder}/{path.stem}" for path in directory.glob("*.sql"))
