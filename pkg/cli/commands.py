"""
Subcommand handlers.
Wires the configuration, dictionary cache and sweep manager together for
each command-line workflow.
"""

import json
import logging
import math

import numpy as np

from core.dictionary_store import DictionaryStore
from core.experiment import ExperimentConfig, run_trial
from core.sweep_manager import SweepManager
from reports.sweep_report import BenchReport, SweepReport, TrialReport
from reports.trace_report import FieldReport, TraceReport
from utils.config import Config
from utils.seeding import derive_seed

logger = logging.getLogger(__name__)


def _plain(value):
    """numpy scalars as Python scalars for JSON output."""
    return value.item() if isinstance(value, np.generic) else value


class CommandRunner:
    """
    Runs one parsed command.
    """

    def __init__(self, args):
        """
        Initialize the runner from parsed arguments.

        Args:
            args (argparse.Namespace): Parsed command line
        """
        self.args = args
        self.cfg = self._load_config()
        self.store = DictionaryStore()
        dictionary = None
        if getattr(args, "dictionary", None):
            dictionary = self.store.load(args.dictionary, receiver=self.cfg.receiver, grid=self.cfg.grid)
        self.manager = SweepManager(self.cfg, workers=getattr(args, "workers", None), dictionary=dictionary)

    def _load_config(self):
        args = self.args
        cfg = ExperimentConfig.from_file(args.config) if args.config else ExperimentConfig()
        changes = {}
        if args.seed is not None:
            changes["master_seed"] = args.seed
        if getattr(args, "solver", None) and args.command != "traces":
            changes["solver"] = args.solver
        if getattr(args, "trials", None):
            changes["num_trials"] = args.trials
        return cfg.replace(**changes) if changes else cfg

    def run(self):
        """
        Dispatch to the handler of the parsed subcommand.

        Returns:
            int: Process exit status
        """
        handlers = {
            "build-dict": self.build_dict,
            "simulate": self.simulate,
            "sweep": self.sweep,
            "bench": self.bench,
            "traces": self.traces,
            "field": self.field,
        }
        logger.info("%s %s, master seed %d", Config.APP_NAME, Config.version_string(), self.cfg.master_seed)
        return handlers[self.args.command]()

    def build_dict(self):
        dictionary = self.manager.get_dictionary()
        self.store.save(self.args.out, dictionary)
        return 0

    def simulate(self):
        """Run the first trial of the master seed and print its record."""
        seed = derive_seed(self.cfg.master_seed, 0, 0)
        record = run_trial(self.cfg, self.manager.get_dictionary(), seed)
        output = {
            "master_seed": self.cfg.master_seed,
            "trial_seed": record.trial_seed,
            "sigma_q2": record.sigma_q2,
            "true_deg": [math.degrees(a) for a in record.true_angles],
            "solvers": {
                solver: {
                    "estimate_deg": [math.degrees(a) for a in record.estimates[solver]],
                    "rmse_rad": math.sqrt(float(record.squared_errors[solver].mean())),
                    "solver_ms": record.solver_ms[solver],
                    "flags": {k: _plain(v) for k, v in record.flags[solver].items()},
                }
                for solver in record.estimates
            },
        }
        print(json.dumps(output, indent=2))
        return 0

    def sweep(self):
        trials, summary = self.manager.run_sweep(self.args.axis, self.args.values)
        metadata = {"command": "sweep"}
        SweepReport(summary, self.args.axis, self.cfg, metadata).write(self.args.out)
        if self.args.trials_out:
            TrialReport(trials, self.cfg, metadata).write(self.args.trials_out)
        for row in summary.itertuples(index=False):
            logger.info("%s=%g %s: RMSE %.4g rad, failures %.1f%%", self.args.axis, row.axis_value,
                        row.solver, row.rmse_rad, 100 * row.detection_failure_rate)
        return 0

    def bench(self):
        bench = self.manager.runtime_bench(self.args.cells, self.args.repetitions)
        BenchReport(bench, self.cfg, self.args.repetitions, {"command": "bench"}).write(self.args.out)
        return 0

    def traces(self):
        trace = self.manager.traces(self.args.solver, noiseless=not self.args.noisy)
        report = TraceReport(trace, self.args.solver, self.cfg, not self.args.noisy, {"command": "traces"})
        report.write(self.args.out)
        logger.info("Final/initial: %s", report.relative_decrease())
        return 0

    def field(self):
        table = self.manager.field_table(self.args.theta)
        FieldReport(table, self.args.theta, self.cfg, {"command": "field"}).write(self.args.out)
        return 0
