"""
Base class for all tabular reports written by the simulator.
"""

import json
import logging
import os

from utils.config import Config

logger = logging.getLogger(__name__)


class BaseReport:
    """
    Base class for CSV reports.
    Provides column validation, CSV output and the JSON metadata sidecar.
    """

    required_columns = ()

    def __init__(self, data, title="", metadata=None):
        """
        Initialize the base report.

        Args:
            data (pandas.DataFrame): Table to write
            title (str, optional): Report title stored in the metadata
            metadata (dict, optional): Extra run metadata (config echo, seed, ...)
        """
        self.data = data
        self.title = title
        self.metadata = dict(metadata or {})
        self.is_validated = False

    def validate(self):
        """
        Check that the table has the columns this report promises.

        Raises:
            ValueError: If a required column is missing
        """
        missing = [col for col in self.required_columns if col not in self.data.columns]
        if missing:
            raise ValueError(f"{type(self).__name__} is missing columns: {', '.join(missing)}")
        self.is_validated = True

    def prepare(self):
        """
        Table as written to disk; subclasses may reorder or round columns.

        Returns:
            pandas.DataFrame: The table to write
        """
        return self.data

    def build_metadata(self):
        """
        Sidecar content: title, version string and the run metadata.

        Returns:
            dict: JSON-serializable metadata
        """
        return {
            "title": self.title,
            "application": Config.APP_NAME,
            "version": Config.version_string(),
            "rows": int(len(self.data)),
            **self.metadata,
        }

    @staticmethod
    def sidecar_path(path):
        return os.path.splitext(path)[0] + ".meta.json"

    def write(self, path, sidecar=True):
        """
        Write the CSV (header line, comma-separated, shortest round-trip floats)
        and, optionally, its metadata sidecar.

        Args:
            path (str): CSV destination
            sidecar (bool): Also write <name>.meta.json

        Returns:
            str: The CSV path
        """
        if not self.is_validated:
            self.validate()
        directory = os.path.dirname(os.path.abspath(path))
        os.makedirs(directory, exist_ok=True)

        self.prepare().to_csv(path, index=False)
        if sidecar:
            with open(self.sidecar_path(path), "w", encoding="utf-8") as handle:
                json.dump(self.build_metadata(), handle, indent=2, sort_keys=True)
                handle.write("\n")
        logger.info("Wrote %s (%d rows) to %s", self.title or type(self).__name__, len(self.data), path)
        return path
