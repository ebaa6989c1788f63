# Core module initialization

from .dictionary import PowerDictionary, build_dictionary
from .dictionary_store import DictionaryStore
from .experiment import ExperimentConfig, run_trial
from .sweep_manager import SweepManager

__all__ = ['PowerDictionary', 'build_dictionary', 'DictionaryStore',
           'ExperimentConfig', 'run_trial', 'SweepManager']
