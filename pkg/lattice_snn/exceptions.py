"""
Exception hierarchy shared by every app.

Commands translate these into process exit codes (see exit_codes.py).
"""


class LatticeSnnError(Exception):
    """Base class for all simulator errors."""


class StructuralError(LatticeSnnError):
    """Vector or matrix shapes do not line up."""


class NumericalFaultError(LatticeSnnError):
    """Simulation state became non-finite; the run must halt."""


class ContractError(LatticeSnnError):
    """An operation was called without the state it requires."""


class InputDataError(LatticeSnnError):
    """Bad user-supplied data: files, intensities, empty sets."""


class ArtifactIOError(LatticeSnnError):
    """A checkpoint or artifact file is missing or corrupt."""


class ConfigValidationError(LatticeSnnError):
    """
    Raised once with every violation found in a config.

    errors is a list of "section.key: message" strings.
    """

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__('; '.join(self.errors))
