"""
RM Toolbox Configuration System
Handles experiment settings, protocol budgets and export preferences.
"""

import copy
import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Union

rm_toolbox_version = "1.0.0"
__version__ = rm_toolbox_version

VALID_FORMATS = ('csv', 'json', 'svg', 'xlsx')
VALID_GRIDS = ('uniform', 'measured')
VALID_MOMENT_FORMS = ('haar', 'literal')
VALID_MLE_METHODS = ('apg', 'rhr')


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _is_int(value: Any, minimum: int) -> bool:
    return isinstance(value, int) and not isinstance(value, bool) and value >= minimum


class ConfigError(ValueError):
    """Raised when a configuration fails validation."""

    def __init__(self, message: str, issues: Optional[List[str]] = None):
        super().__init__(message)
        self.issues = issues or []


class RMToolboxConfig:
    """Configuration manager for the randomized-measurement toolbox."""

    def __init__(self, config_file: Union[str, Path, None] = None):
        """Initialize configuration manager, optionally from a JSON file."""
        self.logger = logging.getLogger(__name__)
        self.config_file = Path(config_file) if config_file else None

        # Default configuration
        self.default_config = {
            'protocol': {
                'num_unitaries': 4000,      # M, random local unitaries
                'shots_per_unitary': 5300,  # N, copies per unitary
                'seed': 20240101,
                'repetitions': 1            # >1 repeats the whole protocol for error bars
            },
            'ghzw_sweep': {
                'g_start': 0.0,
                'g_stop': 1.0,
                'g_step': 0.05,
                'estimate': True            # finite-shot columns next to the exact ones
            },
            'chessboard_sweep': {
                'p_start': 0.0,
                'p_stop': 0.22,
                'p_step': 0.02,
                'grid': 'uniform',          # 'uniform' or 'measured'
                'tomography': False,
                'shots_per_setting': 900000,  # about 1e5 recorded coincidences per setting
                'bootstrap_replicas': 100
            },
            'criteria': {
                'sigma_threshold': 3.0,
                'psd_tolerance': 1e-10
            },
            'tomography': {
                'max_iter': 20000,
                'tol': 1e-10,               # Frobenius size of the last accepted step
                'damping': 0.5,             # step shrink factor in (0, 1)
                'method': 'apg'             # 'apg' or 'rhr'
            },
            'oracle': {
                'samples': 100000,
                'max_sigma': 5.0,
                'form': 'haar'              # 'haar' or 'literal'
            },
            'bound': {
                'r2_values': [0.2355],
                'grid_points': 21,
                'cross_check': True
            },
            'export': {
                'output_dir': 'results',
                'formats': ['csv', 'json', 'svg'],
                'filename_format': '{experiment}'
            },
            'advanced': {
                'debug_mode': False,
                'parallel_processing': True,
                'max_worker_threads': 4,
                'chunk_size': 250,
                'log_file': 'rm_toolbox.log'
            }
        }

        self.config = self.load_config()

    def load_config(self) -> Dict[str, Any]:
        """Load configuration from file or fall back to defaults."""
        if self.config_file is None:
            self.logger.debug("No configuration file given, using defaults")
            return copy.deepcopy(self.default_config)

        if not self.config_file.exists():
            raise ConfigError(f"Configuration file not found: {self.config_file}")

        try:
            with open(self.config_file, 'r', encoding='utf-8') as f:
                loaded_config = json.load(f)
        except json.JSONDecodeError as e:
            self.logger.error(f"Error parsing configuration {self.config_file}: {e}")
            raise ConfigError(f"Malformed configuration file {self.config_file}: {e}") from e

        if not isinstance(loaded_config, dict):
            raise ConfigError(f"Configuration root must be an object: {self.config_file}")

        # Merge with defaults to ensure all keys exist
        config = self._merge_configs(self.default_config, loaded_config)
        self.logger.info(f"Configuration loaded from {self.config_file}")
        return config

    def save_config(self, path: Union[str, Path, None] = None) -> Path:
        """Write the current configuration as JSON."""
        target = Path(path) if path else self.config_file
        if target is None:
            raise ConfigError("No path given to save the configuration")
        target.parent.mkdir(parents=True, exist_ok=True)
        with open(target, 'w', encoding='utf-8') as f:
            json.dump(self.config, f, indent=4, ensure_ascii=False)
        self.logger.info(f"Configuration saved to {target}")
        return target

    def get(self, key_path: str, default: Any = None) -> Any:
        """Get configuration value using dot notation (e.g., 'protocol.seed')."""
        try:
            value = self.config
            for key in key_path.split('.'):
                value = value[key]
            return value
        except (KeyError, TypeError):
            return default

    def set(self, key_path: str, value: Any) -> None:
        """Set configuration value using dot notation."""
        keys = key_path.split('.')
        config_ref = self.config

        # Navigate to the parent of the final key
        for key in keys[:-1]:
            if key not in config_ref or not isinstance(config_ref[key], dict):
                config_ref[key] = {}
            config_ref = config_ref[key]

        config_ref[keys[-1]] = value

    def apply_overrides(self, overrides: Mapping[str, Any]) -> None:
        """Apply dotted-key overrides; ``None`` values are skipped."""
        for key_path, value in overrides.items():
            if value is None:
                continue
            self.logger.debug(f"Override {key_path} = {value!r}")
            self.set(key_path, value)

    def reset_to_defaults(self, section: Optional[str] = None) -> None:
        """Reset configuration (or one section) to defaults."""
        if section:
            if section not in self.default_config:
                raise ConfigError(f"Section '{section}' not found in defaults")
            self.config[section] = copy.deepcopy(self.default_config[section])
        else:
            self.config = copy.deepcopy(self.default_config)

        self.logger.info(f"Configuration reset to defaults: {section or 'all sections'}")

    def _merge_configs(self, default: Dict, loaded: Dict) -> Dict:
        """Recursively merge loaded config with defaults."""
        result = copy.deepcopy(default)

        for key, value in loaded.items():
            if key in result and isinstance(result[key], dict) and isinstance(value, dict):
                result[key] = self._merge_configs(result[key], value)
            else:
                result[key] = value

        return result

    def validate_config(self) -> Dict[str, list]:
        """Validate current configuration and return any issues."""
        issues = {
            'errors': [],
            'warnings': []
        }

        # Protocol budget
        num_unitaries = self.get('protocol.num_unitaries')
        shots = self.get('protocol.shots_per_unitary')
        if not isinstance(num_unitaries, int) or num_unitaries < 1:
            issues['errors'].append("protocol.num_unitaries must be an integer >= 1")
        if not isinstance(shots, int) or shots < 2:
            issues['errors'].append("protocol.shots_per_unitary must be an integer >= 2")
        elif shots < 4:
            issues['warnings'].append("shots_per_unitary < 4: fourth-moment estimators are unavailable")
        if isinstance(num_unitaries, int) and isinstance(shots, int) and num_unitaries * shots > 10**9:
            issues['warnings'].append("Protocol budget above 1e9 shots may take a long time")

        seed = self.get('protocol.seed')
        if not isinstance(seed, int) or seed < 0 or seed >= 2**64:
            issues['errors'].append("protocol.seed must be an unsigned 64-bit integer")

        repetitions = self.get('protocol.repetitions', 1)
        if not isinstance(repetitions, int) or repetitions < 1:
            issues['errors'].append("protocol.repetitions must be an integer >= 1")

        # Grids
        for section, prefix in (('ghzw_sweep', 'g'), ('chessboard_sweep', 'p')):
            start = self.get(f'{section}.{prefix}_start')
            stop = self.get(f'{section}.{prefix}_stop')
            step = self.get(f'{section}.{prefix}_step')
            if not all(isinstance(v, (int, float)) for v in (start, stop, step)):
                issues['errors'].append(f"{section} range values must be numbers")
                continue
            if step <= 0:
                issues['errors'].append(f"{section}.{prefix}_step must be > 0")
            if not (0.0 <= start <= 1.0 and 0.0 <= stop <= 1.0):
                issues['errors'].append(f"{section} range must lie within [0, 1]")
            if start > stop:
                issues['errors'].append(f"{section}.{prefix}_start must not exceed {prefix}_stop")

        if self.get('chessboard_sweep.grid') not in VALID_GRIDS:
            issues['errors'].append(f"chessboard_sweep.grid must be one of {VALID_GRIDS}")
        if not _is_int(self.get('chessboard_sweep.shots_per_setting'), 1):
            issues['errors'].append("chessboard_sweep.shots_per_setting must be an integer >= 1")
        if not _is_int(self.get('chessboard_sweep.bootstrap_replicas'), 2):
            issues['errors'].append("chessboard_sweep.bootstrap_replicas must be an integer >= 2")

        # Tomography
        if not _is_int(self.get('tomography.max_iter'), 1):
            issues['errors'].append("tomography.max_iter must be an integer >= 1")
        tol = self.get('tomography.tol')
        if not _is_number(tol) or tol <= 0:
            issues['errors'].append("tomography.tol must be a number > 0")
        damping = self.get('tomography.damping')
        if not _is_number(damping) or not 0 < damping < 1:
            issues['errors'].append("tomography.damping must be a number in (0, 1)")
        if self.get('tomography.method') not in VALID_MLE_METHODS:
            issues['errors'].append(f"tomography.method must be one of {VALID_MLE_METHODS}")

        # Export settings
        formats = self.get('export.formats', [])
        unknown = [f for f in formats if f not in VALID_FORMATS]
        if unknown:
            issues['errors'].append(f"Unknown output formats: {', '.join(map(str, unknown))}")
        if not formats:
            issues['warnings'].append("No output formats selected")

        if self.get('oracle.form') not in VALID_MOMENT_FORMS:
            issues['errors'].append(f"oracle.form must be one of {VALID_MOMENT_FORMS}")
        if not _is_int(self.get('oracle.samples'), 2):
            issues['errors'].append("oracle.samples must be an integer >= 2")
        max_sigma = self.get('oracle.max_sigma')
        if not _is_number(max_sigma) or max_sigma <= 0:
            issues['errors'].append("oracle.max_sigma must be a number > 0")
        if not _is_int(self.get('bound.grid_points'), 0):
            issues['errors'].append("bound.grid_points must be an integer >= 0")
        r2_values = self.get('bound.r2_values', [])
        if not isinstance(r2_values, list) or any(not _is_number(r) or not 0 <= r <= 1 for r in r2_values):
            issues['errors'].append("bound.r2_values must be numbers within [0, 1]")

        sigma = self.get('criteria.sigma_threshold')
        if not _is_number(sigma) or sigma <= 0:
            issues['errors'].append("criteria.sigma_threshold must be a number > 0")

        workers = self.get('advanced.max_worker_threads')
        if not isinstance(workers, int) or workers < 1:
            issues['errors'].append("advanced.max_worker_threads must be an integer >= 1")

        return issues

    def ensure_valid(self) -> None:
        """Raise ConfigError if validation finds errors; log warnings."""
        issues = self.validate_config()
        for warning in issues['warnings']:
            self.logger.warning(warning)
        if issues['errors']:
            for error in issues['errors']:
                self.logger.error(error)
            raise ConfigError("Invalid configuration: " + "; ".join(issues['errors']), issues['errors'])

    def get_output_dir(self) -> Path:
        """Output directory, created on demand."""
        output_dir = Path(self.get('export.output_dir', 'results'))
        output_dir.mkdir(parents=True, exist_ok=True)
        return output_dir

    def import_config(self, import_path: Union[str, Path]) -> None:
        """Import configuration from a file, merged over the defaults."""
        with open(import_path, 'r', encoding='utf-8') as f:
            imported_config = json.load(f)
        self.config = self._merge_configs(self.default_config, imported_config)
        self.logger.info(f"Configuration imported from: {import_path}")

    def snapshot(self, sections: Optional[Iterable[str]] = None) -> Dict[str, Any]:
        """Deep copy of the configuration (or selected sections) for result echo."""
        if sections is None:
            return copy.deepcopy(self.config)
        return {s: copy.deepcopy(self.config.get(s)) for s in sections}


# Global configuration instance
_config_instance = None


def get_config() -> RMToolboxConfig:
    """Get the global configuration instance."""
    global _config_instance
    if _config_instance is None:
        _config_instance = RMToolboxConfig()
    return _config_instance


def load_config_file(path: Union[str, Path, None]) -> RMToolboxConfig:
    """Create a configuration from a file and install it as the global instance."""
    global _config_instance
    _config_instance = RMToolboxConfig(path)
    return _config_instance
