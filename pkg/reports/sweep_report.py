"""
Sweep and benchmark reports.
"""

from core.sweep_manager import SUMMARY_COLUMNS, seed_scheme
from reports.base_report import BaseReport


class SweepReport(BaseReport):
    """
    RMSE summary of a parameter sweep, one row per (axis value, solver).
    """

    required_columns = tuple(SUMMARY_COLUMNS)

    def __init__(self, summary, axis, cfg, metadata=None):
        """
        Initialize the sweep report.

        Args:
            summary (pandas.DataFrame): Output of aggregate_rmse
            axis (str): Swept parameter
            cfg (ExperimentConfig): Base experiment (echoed in the sidecar)
            metadata (dict, optional): Extra metadata
        """
        super().__init__(summary, title=f"RMSE vs {axis}", metadata=metadata)
        self.axis = axis
        self.cfg = cfg

    def prepare(self):
        return self.data[list(SUMMARY_COLUMNS)]

    def build_metadata(self):
        metadata = super().build_metadata()
        metadata.update({
            "axis": self.axis,
            "axis_values": [float(v) for v in self.data["axis_value"].drop_duplicates()],
            "master_seed": int(self.cfg.master_seed),
            "num_trials": int(self.cfg.num_trials),
            "seed_derivation": seed_scheme(self.cfg),
            "config": self.cfg.to_dict(),
        })
        return metadata


class TrialReport(BaseReport):
    """Per-trial, per-user rows behind a sweep summary."""

    required_columns = ("axis_value", "trial", "solver", "user", "squared_error")

    def __init__(self, trials, cfg, metadata=None):
        super().__init__(trials, title="Trial records", metadata=metadata)
        self.cfg = cfg

    def build_metadata(self):
        metadata = super().build_metadata()
        metadata.update({"master_seed": int(self.cfg.master_seed), "seed_derivation": seed_scheme(self.cfg),
                         "config": self.cfg.to_dict()})
        return metadata


class BenchReport(BaseReport):
    """Median solver runtimes per array size."""

    required_columns = ("num_cells", "solver", "median_ms", "per_iteration_us")

    def __init__(self, bench, cfg, repetitions, metadata=None):
        super().__init__(bench, title="Runtime vs number of cells", metadata=metadata)
        self.cfg = cfg
        self.repetitions = repetitions

    def build_metadata(self):
        metadata = super().build_metadata()
        metadata.update({
            "repetitions": int(self.repetitions),
            "master_seed": int(self.cfg.master_seed),
            "config": self.cfg.to_dict(),
        })
        return metadata
