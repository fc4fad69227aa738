#!/usr/bin/env python3
"""
ULE Laboratory - Main Entry Point

Runs the hull predicates and the laboratory pipelines (potential, spectrum,
dress, ule, dynloc, sweep, distality, approx) from the command line.
"""

import sys

from ule_lab.cli import main


if __name__ == '__main__':
    sys.exit(main())
