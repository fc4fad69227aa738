"""
Run configuration: a JSON file merged with command-line overrides.
"""

import hashlib
import json
import logging
import os
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Dict, List, Mapping, Optional

from .chain_parser import parse_chain
from .errors import ConfigError, InvalidInputError
from .hull import FrequencyChain, condition_A
from .lab_constants import (
    DEFAULT_EPS_GRID,
    DEFAULT_FLOOR,
    DEFAULT_K_LAYERS,
    DEFAULT_M,
    DEFAULT_MAX_ITER,
    DEFAULT_TOL,
    DEFAULT_WINDOW_SIZE,
    THREADS_ENV_VAR,
    default_interior_margin,
)

logger = logging.getLogger(__name__)

GENERATORS = ('distal', 'poeschel')
FORMS = ('standard', 'poeschel')
UNHASHED_FIELDS = ('output_dir', 'threads')


@dataclass
class RunConfig:
    """
    Resolved configuration of one laboratory run.

    Lists (eps, N, t) span the sweep grid; single-run commands use their
    first entries.
    """

    chain: str = '2,8,512'
    pattern: Optional[str] = 'cube'
    m: int = DEFAULT_M
    generator: str = 'distal'
    eps: List[float] = field(default_factory=lambda: list(DEFAULT_EPS_GRID))
    N: List[int] = field(default_factory=lambda: [DEFAULT_WINDOW_SIZE])
    t: List[int] = field(default_factory=lambda: [0])
    k_layers: int = DEFAULT_K_LAYERS
    poeschel_depth: int = 16
    tol: float = DEFAULT_TOL
    floor: float = DEFAULT_FLOOR
    interior_margin: Optional[int] = None
    max_iter: int = DEFAULT_MAX_ITER
    form: str = 'standard'
    offset: int = 0
    exact: bool = True
    full_vectors: bool = False
    window: List[int] = field(default_factory=lambda: [0, 512])
    max_separation: int = 16
    approx: Dict[str, Any] = field(default_factory=lambda: {'kind': 'distal'})
    t_grid: List[float] = field(default_factory=lambda: [0.1, 1.0, 10.0])
    threads: Optional[int] = None
    output_dir: str = 'output'

    def frequency_chain(self) -> FrequencyChain:
        return parse_chain(self.chain, self.pattern)

    def margin_for(self, size: int) -> int:
        return self.interior_margin if self.interior_margin is not None else default_interior_margin(size)

    def validate(self):
        """
        Check the invariants of the configuration.

        Raises:
            ConfigError: Listing every violated invariant
        """
        errors = []
        for name in ('eps', 'N', 't', 't_grid'):
            if not getattr(self, name):
                errors.append(f"  - {name} must not be empty")
        if any(eps < 0 for eps in self.eps):
            errors.append(f"  - eps values must be non-negative, got {self.eps}")
        if any(size < 2 for size in self.N):
            errors.append(f"  - window sizes must be at least 2, got {self.N}")
        for name in ('tol', 'floor'):
            if not getattr(self, name) > 0:
                errors.append(f"  - {name} must be positive")
        if self.k_layers < 1 or self.poeschel_depth < 1:
            errors.append("  - k_layers and poeschel_depth must be at least 1")
        if self.max_iter < 0:
            errors.append("  - max_iter must be non-negative")
        if self.interior_margin is not None and self.interior_margin < 0:
            errors.append("  - interior_margin must be non-negative")
        if self.generator not in GENERATORS:
            errors.append(f"  - generator must be one of {GENERATORS}, got '{self.generator}'")
        if self.form not in FORMS:
            errors.append(f"  - form must be one of {FORMS}, got '{self.form}'")
        if len(self.window) != 2 or self.window[0] >= self.window[1]:
            errors.append(f"  - window must be [lo, hi) with lo < hi, got {self.window}")
        if self.max_separation < 1:
            errors.append("  - max_separation must be at least 1")
        if self.threads is not None and self.threads < 1:
            errors.append("  - threads must be at least 1")

        if self.generator == 'distal':
            try:
                verdict = condition_A(self.frequency_chain(), m_bound=3 * self.m)
                if not verdict.holds:
                    errors.append(
                        f"  - chain needs n_(k+1) <= n_k^{3 * self.m} for m = {self.m}; "
                        f"condition A gives m_min = {verdict.m_min}"
                    )
            except InvalidInputError as error:
                errors.append(f"  - chain: {str(error).splitlines()[0]}")

        if errors:
            raise ConfigError("ERROR: invalid configuration:\n" + '\n'.join(errors))

    def to_json(self) -> Dict[str, Any]:
        return asdict(self)

    def canonical_json(self) -> str:
        """Sorted compact JSON of the fields that determine the results."""
        data = self.to_json()
        for name in UNHASHED_FIELDS:
            data.pop(name)
        return json.dumps(data, sort_keys=True, separators=(',', ':'))

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode('utf-8')).hexdigest()


def load_config_file(path: str) -> Dict[str, Any]:
    """Read a JSON config file into a dict."""
    try:
        with open(path, 'r') as f:
            data = json.load(f)
    except OSError as error:
        raise ConfigError(f"ERROR: cannot read config file '{path}': {error}")
    except json.JSONDecodeError as error:
        raise ConfigError(f"ERROR: config file '{path}' is not valid JSON: {error}")
    if not isinstance(data, dict):
        raise ConfigError(f"ERROR: config file '{path}' must contain a JSON object")
    return data


def resolve_config(file_data: Optional[Mapping[str, Any]] = None,
                   overrides: Optional[Mapping[str, Any]] = None) -> RunConfig:
    """
    Merge defaults, file values and overrides (in that order) and validate.

    Args:
        file_data: Values from the config file
        overrides: Values from command-line flags; None entries are ignored

    Returns:
        Validated RunConfig
    """
    known = {f.name for f in fields(RunConfig)}
    merged: Dict[str, Any] = {}
    for source in (file_data or {}, {k: v for k, v in (overrides or {}).items() if v is not None}):
        unknown = sorted(set(source) - known)
        if unknown:
            raise ConfigError(f"ERROR: unknown configuration keys: {', '.join(unknown)}")
        merged.update(source)
    try:
        config = RunConfig(**merged)
    except TypeError as error:
        raise ConfigError(f"ERROR: invalid configuration: {error}")
    config.validate()
    return config


def resolve_threads(config: RunConfig) -> int:
    """Worker count: config value, else ULE_LAB_THREADS, else the CPU count."""
    if config.threads is not None:
        return config.threads
    raw = os.environ.get(THREADS_ENV_VAR)
    if raw:
        try:
            value = int(raw)
        except ValueError:
            raise ConfigError(f"ERROR: {THREADS_ENV_VAR} must be an integer, got '{raw}'")
        if value < 1:
            raise ConfigError(f"ERROR: {THREADS_ENV_VAR} must be at least 1, got {value}")
        return value
    return min(8, os.cpu_count() or 1)
