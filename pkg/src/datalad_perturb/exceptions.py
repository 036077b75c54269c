"""Exceptions raised by the perturb-ability library"""

__docformat__ = "restructuredtext"


class PerturbError(Exception):
    """Base class for all errors raised by datalad-perturb.

    Each subclass carries the process exit code the command line front end
    reports for it.
    """

    exit_code = 3

    def __init__(self, msg, module=None):
        super().__init__(msg)
        self.module = module

    def __str__(self):
        msg = super().__str__()
        return f"[{self.module}] {msg}" if self.module else msg


class UsageError(PerturbError, ValueError):
    """Invalid parameter values or missing required parameters"""

    exit_code = 1


class DataError(PerturbError, ValueError):
    """Input data, catalogs, fixtures or reports that cannot be used"""

    exit_code = 2


class CatalogError(DataError):
    """Malformed or inconsistent feature annotation catalog"""


class InvariantError(PerturbError, RuntimeError):
    """An internal consistency check failed"""

    exit_code = 3
