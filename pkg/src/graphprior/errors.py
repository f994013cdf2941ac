"""Exception types raised by graphprior.

Every exception carries a short ``category`` string which the command-line
interface prints as the first field of its one-line error message.
"""


class GraphPriorError(Exception):
    category = "error"


class InputError(GraphPriorError, ValueError):
    """Malformed or inconsistent input data (files, indices, shapes)."""

    category = "input"


class ConfigError(GraphPriorError, ValueError):
    """Invalid method/experiment configuration."""

    category = "config"


class DegenerateClassError(InputError):
    """A class has no weighted support in the label data."""

    category = "degenerate-class"


class SingularSystemError(GraphPriorError):
    category = "singular"


class DivergenceError(GraphPriorError, ArithmeticError):
    """An iterate left the finite guard region."""

    category = "divergence"
