"""Exception hierarchy shared by the toolkit.

Each error class maps to one CLI exit code (see ``src/cli/commands.py``).
"""


class RCAError(Exception):
    """Base class for all toolkit errors."""
    exit_code = 1


class ValidationError(RCAError):
    """Invalid input, unresolved reference or a violated construction invariant."""
    exit_code = 2


class PreconditionError(RCAError):
    """A pre-check (axioms of a base oracle, driver conditions) did not hold."""
    exit_code = 1


class BudgetExceededError(RCAError):
    """An enumeration or iteration budget was exhausted."""
    exit_code = 3


class ConvergenceError(RCAError):
    """A numerical procedure did not converge within its iteration cap."""
    exit_code = 3


class SolverError(RCAError):
    """An LP/QP solver failed or produced an infeasible certificate."""
    exit_code = 3
