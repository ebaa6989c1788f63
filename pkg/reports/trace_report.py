"""
Convergence-trace and field-distribution reports.
"""

from core.sweep_manager import TRACE_SCENARIO_DEG
from reports.base_report import BaseReport

TRACE_COLUMNS = {
    "nnlasso": ("iteration", "objective", "model_error"),
    "sic": ("stage", "residual_energy"),
}


class TraceReport(BaseReport):
    """
    Per-iteration (NN-LASSO) or per-stage (SIC) convergence trace.
    """

    def __init__(self, trace, solver, cfg, noiseless, metadata=None):
        """
        Initialize the trace report.

        Args:
            trace (pandas.DataFrame): Output of SweepManager.traces
            solver (str): nnlasso or sic
            cfg (ExperimentConfig): Experiment the trace was run on
            noiseless (bool): Trace used the expected profile
            metadata (dict, optional): Extra metadata
        """
        if solver not in TRACE_COLUMNS:
            raise ValueError(f"unknown solver {solver!r}")
        super().__init__(trace, title=f"{solver} convergence trace", metadata=metadata)
        self.required_columns = TRACE_COLUMNS[solver]
        self.solver = solver
        self.cfg = cfg
        self.noiseless = noiseless

    def relative_decrease(self):
        """Final over initial value of each traced quantity."""
        columns = [c for c in self.required_columns if c not in ("iteration", "stage")]
        first, last = self.data.iloc[0], self.data.iloc[-1]
        return {c: float(last[c] / first[c]) if first[c] else 0.0 for c in columns}

    def build_metadata(self):
        metadata = super().build_metadata()
        metadata.update({
            "solver": self.solver,
            "noiseless": bool(self.noiseless),
            "scenario_deg": list(TRACE_SCENARIO_DEG),
            "final_over_initial": self.relative_decrease(),
            "master_seed": int(self.cfg.master_seed),
            "config": self.cfg.to_dict(),
        })
        return metadata


class FieldReport(BaseReport):
    """|u_n|^2 at every BPM depth for one angle of arrival."""

    required_columns = ("depth_index", "z_m", "x_m", "intensity", "normalized")

    def __init__(self, table, theta_deg, cfg, metadata=None):
        super().__init__(table, title=f"BPM field at {theta_deg:g} deg", metadata=metadata)
        self.theta_deg = theta_deg
        self.cfg = cfg

    def build_metadata(self):
        metadata = super().build_metadata()
        metadata.update({"theta_deg": float(self.theta_deg), "lens": self.cfg.to_dict()["lens"]})
        return metadata
