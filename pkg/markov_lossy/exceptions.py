class MarkovLossyError(Exception):
    """Base class for all errors raised by markov_lossy"""


class DomainError(MarkovLossyError, ValueError):
    """An argument lies outside the mathematical domain of the operation"""


class ContractViolation(MarkovLossyError, ValueError):
    """Inputs disagree with each other (lengths, alphabets, normalization)"""


class InputTooShortError(MarkovLossyError, ValueError):
    """Sequence is shorter than the trellis needs (n < k+1)"""


class BudgetExceededError(MarkovLossyError):
    """A search or program would exceed its configured size budget"""


class ConfigError(MarkovLossyError):
    """Configuration could not be loaded or validated"""


class DecodeError(MarkovLossyError):
    """A bitstream could not be decoded"""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at byte {position})")
        self.position = position


class InfeasibleProgramError(MarkovLossyError):
    "Raised when a linear program has no feasible point"


class UnboundedProgramError(MarkovLossyError):
    "Raised when a linear program objective is unbounded below"


class BookkeepingError(MarkovLossyError):
    """Incrementally maintained counts no longer match the sequence"""
