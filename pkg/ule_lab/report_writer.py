"""
Deterministic CSV and JSON artifacts.

Every file embeds the config hash and the versions of the numerical stack;
nothing time-dependent is written, so repeated runs are byte-identical.
"""

import csv
import json
import math
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, Iterable, Sequence

import numpy as np
import scipy
import sympy

LAB_VERSION = '0.1.0'


def stack_versions() -> Dict[str, str]:
    return {
        'ule_lab': LAB_VERSION,
        'numpy': np.__version__,
        'scipy': scipy.__version__,
        'sympy': sympy.__version__,
    }


def _plain(value: Any) -> Any:
    """JSON-safe copy: numpy scalars/arrays to Python, non-finite floats to strings."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, Fraction):
        return {'num': value.numerator, 'den': value.denominator}
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return None
        if math.isinf(value):
            return 'inf' if value > 0 else '-inf'
        return value
    return value


class ReportWriter:
    """
    Writes artifacts into one output directory.

    Args:
        output_dir: Target directory (created if missing)
        config_hash: Hash of the resolved configuration
    """

    def __init__(self, output_dir: str, config_hash: str):
        self.output_dir = Path(output_dir)
        self.output_dir.mkdir(parents=True, exist_ok=True)
        self.config_hash = config_hash
        self.versions = stack_versions()

    def meta(self) -> Dict[str, Any]:
        return {'config_hash': self.config_hash, 'versions': self.versions}

    def write_csv(self, name: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
        """
        Write a CSV file whose first line is '# config_hash=... versions=...'.

        Returns:
            Path of the written file
        """
        path = self.output_dir / name
        versions = json.dumps(self.versions, sort_keys=True, separators=(',', ':'))
        with open(path, 'w', newline='') as f:
            f.write(f"# config_hash={self.config_hash} versions={versions}\n")
            writer = csv.writer(f, lineterminator='\n')
            writer.writerow(header)
            for row in rows:
                writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
        return path

    def write_json(self, name: str, data: Dict[str, Any]) -> Path:
        """Write a JSON object with a top-level 'meta' entry."""
        path = self.output_dir / name
        payload = dict(_plain(data))
        payload['meta'] = self.meta()
        with open(path, 'w') as f:
            json.dump(payload, f, indent=2, sort_keys=True)
            f.write('\n')
        return path


def to_json_text(data: Dict[str, Any]) -> str:
    """Stable JSON text for stdout."""
    return json.dumps(_plain(data), indent=2, sort_keys=True)
