"""
Parser for the compact text forms of chains and parameter lists.

Chains are written either comma-separated ("2,8,512") or as an arrow chain
("2 -> 8 -> 512 ... cube"), optionally followed by a growth pattern.
Parameter lists are comma-separated and accept integer ranges ("0..7").
"""

import re
from typing import List, Optional, Tuple

from .errors import ConfigError, InvalidChainError
from .hull import FrequencyChain


class ChainSpecParser:
    """Parses a compact chain specification into a FrequencyChain."""

    def __init__(self, text: str, pattern: Optional[str] = None):
        """
        Initialize parser with text content.

        Args:
            text: Chain specification
            pattern: Growth pattern given separately (wins over one in the text)
        """
        self.text = text
        self.pattern = pattern

    def _split_pattern(self, text: str) -> Tuple[str, Optional[str]]:
        """
        Separate the trailing growth pattern from the element list.

        Args:
            text: Stripped chain specification

        Returns:
            Tuple of (element text, pattern or None)
        """
        if '...' in text:
            elements, _, pattern = text.partition('...')
            return elements, pattern.strip() or None
        match = re.match(r'^(.*?[0-9])\s+([A-Za-z].*)$', text)
        if match:
            return match.group(1), match.group(2).strip()
        return text, None

    def _parse_elements(self, text: str) -> Tuple[int, ...]:
        """
        Parse the integers of a chain.

        Args:
            text: Elements separated by commas or arrows

        Returns:
            Tuple of integers
        """
        parts = [part.strip() for part in re.split(r'->|,', text) if part.strip()]
        if not parts:
            raise InvalidChainError(f"ERROR: no chain elements in '{self.text}'")
        bad = [part for part in parts if not re.fullmatch(r'\d+(\^\d+)?', part)]
        if bad:
            raise InvalidChainError(
                f"ERROR: invalid chain elements {bad} in '{self.text}'\n"
                "Write elements as integers or powers like 2^10"
            )
        return tuple(self._parse_integer(part) for part in parts)

    def _parse_integer(self, part: str) -> int:
        base, _, exponent = part.partition('^')
        return int(base) ** int(exponent) if exponent else int(base)

    def parse(self) -> FrequencyChain:
        """
        Parse the specification.

        Returns:
            FrequencyChain with the declared pattern, if any

        Raises:
            InvalidChainError: If the text is not a valid chain
        """
        text = self.text.strip()
        element_text, pattern = self._split_pattern(text)
        elements = self._parse_elements(element_text)
        return FrequencyChain(elements, self.pattern or pattern)


def parse_chain(text: str, pattern: Optional[str] = None) -> FrequencyChain:
    """
    Parse a chain specification.

    Args:
        text: "2,8,512", "2,8,512 cube" or "2 -> 8 -> 512 ... cube"
        pattern: Optional growth pattern overriding the one in the text

    Returns:
        FrequencyChain
    """
    parser = ChainSpecParser(text, pattern)
    return parser.parse()


def parse_float_list(text: str, name: str) -> List[float]:
    """Parse "0.2,0.1,0.05" into floats."""
    try:
        values = [float(part) for part in text.split(',') if part.strip()]
    except ValueError:
        raise ConfigError(f"ERROR: {name} must be a comma-separated list of numbers, got '{text}'")
    if not values:
        raise ConfigError(f"ERROR: {name} must not be empty")
    return values


def parse_int_list(text: str, name: str) -> List[int]:
    """Parse "0,1,5" or "0..7" (inclusive range) into integers."""
    values: List[int] = []
    for part in (p.strip() for p in text.split(',')):
        if not part:
            continue
        match = re.fullmatch(r'(-?\d+)\.\.(-?\d+)', part)
        try:
            if match:
                lo, hi = int(match.group(1)), int(match.group(2))
                values.extend(range(lo, hi + 1))
            else:
                values.append(int(part))
        except ValueError:
            raise ConfigError(f"ERROR: {name} must be integers or ranges like 0..7, got '{part}'")
    if not values:
        raise ConfigError(f"ERROR: {name} must not be empty")
    return values
