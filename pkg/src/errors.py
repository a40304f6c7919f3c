"""
Error Types
Exception hierarchy shared by every module of the estimation simulator
"""

from typing import Optional


class ResilientEstimationError(Exception):
    """Base class for all simulator errors"""


class InputError(ResilientEstimationError, ValueError):
    """Malformed input: bad files, out-of-range ids, dimension mismatch"""


class SizeLimitError(ResilientEstimationError):
    """Brute-force enumeration refused because the instance is too large"""

    def __init__(self, what: str, size: int, cap: int):
        super().__init__(f"{what}: size {size} exceeds cap {cap}")
        self.size = size
        self.cap = cap


class ContractViolation(ResilientEstimationError):
    """An operation was applied outside its precondition"""


class ProtocolError(ResilientEstimationError):
    """A filtering rule did not receive the messages it needs"""


class ConfigurationError(ResilientEstimationError):
    """Scenario or filter configuration is inconsistent with the network"""


class PreconditionError(ResilientEstimationError):
    """A design algorithm was called on an instance it cannot handle"""

    def __init__(self, message: str, witness: Optional[int] = None):
        super().__init__(message)
        self.witness = witness
