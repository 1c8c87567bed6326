"""
Pipeline Configuration Loader

Single source of truth for tunable pipeline defaults.
Loads pipeline.yaml (or the file named by NOISEFILTER_CONFIG) and applies
environment overrides.
"""

import os
import copy
import yaml
from typing import Any, Dict, List, Optional
from pathlib import Path

from backend.console import log, warn


_BUILTIN_DEFAULTS = {
    'spectrogram': {'window_len': 512, 'hop': 256},
    'fir': {'taps': 1001},
    'mmse': {'smoothing_alpha': 0.98, 'xi_floor_db': -25.0, 'min_seconds': 1.0},
    'resample': {'kaiser_beta': 8.0, 'passband_fraction': 0.45},
    'classifiers': {
        'trees': 100,
        'k': 5,
        'k_sweep': list(range(1, 26, 2)),
        'tree_min_rows': 4,
        'nb_var_floor': 1e-9,
    },
    'evaluation': {'folds': 10, 'seed': 42, 'threshold': 0.5},
    'runtime': {'jobs': 1},
}


class PipelineConfig:
    """Centralized pipeline configuration manager"""

    def __init__(self, config_path: Optional[str] = None):
        """Load pipeline configuration from YAML"""
        if config_path is None:
            config_path = os.getenv('NOISEFILTER_CONFIG')
        if config_path is None:
            # Default to config/pipeline.yaml relative to this file
            config_path = Path(__file__).parent / "pipeline.yaml"

        self.config_path = Path(config_path)
        self.sections: Dict[str, Dict[str, Any]] = copy.deepcopy(_BUILTIN_DEFAULTS)

        self._load_config()
        self._apply_env_overrides()

    def _load_config(self):
        """Load and merge the YAML configuration over the built-in defaults"""
        if not self.config_path.exists():
            warn("PipelineConfig", f"Config not found at {self.config_path}, using built-in defaults")
            return

        with open(self.config_path, 'r') as f:
            loaded = yaml.safe_load(f) or {}

        if not isinstance(loaded, dict):
            raise ValueError(f"{self.config_path} must contain a mapping of sections")

        for section, values in loaded.items():
            if not isinstance(values, dict):
                raise ValueError(f"Section '{section}' in {self.config_path} must be a mapping")
            self.sections.setdefault(section, {}).update(values)

        log("PipelineConfig", f"Loaded {len(loaded)} sections from {self.config_path.name}")

    def _apply_env_overrides(self):
        jobs = os.getenv('NOISEFILTER_JOBS')
        if jobs:
            self.sections['runtime']['jobs'] = int(jobs)
        seed = os.getenv('NOISEFILTER_SEED')
        if seed:
            self.sections['evaluation']['seed'] = int(seed)

    def get(self, section: str, key: str, default: Any = None) -> Any:
        """Get a single value, e.g. get('fir', 'taps')"""
        return self.sections.get(section, {}).get(key, default)

    @property
    def window_len(self) -> int:
        return int(self.get('spectrogram', 'window_len'))

    @property
    def hop(self) -> int:
        return int(self.get('spectrogram', 'hop'))

    @property
    def fir_taps(self) -> int:
        return int(self.get('fir', 'taps'))

    @property
    def seed(self) -> int:
        return int(self.get('evaluation', 'seed'))

    @property
    def folds(self) -> int:
        return int(self.get('evaluation', 'folds'))

    @property
    def threshold(self) -> float:
        return float(self.get('evaluation', 'threshold'))

    @property
    def trees(self) -> int:
        return int(self.get('classifiers', 'trees'))

    @property
    def k_sweep(self) -> List[int]:
        return [int(k) for k in self.get('classifiers', 'k_sweep')]

    @property
    def jobs(self) -> int:
        return int(self.get('runtime', 'jobs'))


# Global singleton instance
_config_instance = None


def get_pipeline_config() -> PipelineConfig:
    """Get the global PipelineConfig instance"""
    global _config_instance
    if _config_instance is None:
        _config_instance = PipelineConfig()
    return _config_instance


def reset_pipeline_config():
    """Drop the cached instance so the next call reloads"""
    global _config_instance
    _config_instance = None
