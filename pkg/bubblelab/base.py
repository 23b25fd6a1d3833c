"""
Python implementation of the bubblelab numerical laboratory.
Curvature densities, spherical quadrature and bubble trees of harmonic maps.
"""

import warnings
from abc import ABCMeta, abstractmethod

import numpy as np
from sklearn.utils import check_scalar


class _BaseCheck(metaclass=ABCMeta):
    """Base class for all numerical checks.

    A check is configured in the constructor, executed by ``fit`` and
    exposes its results through read-only properties ending with an
    underscore. ``to_dict`` returns a JSON-ready summary.
    """

    def __init__(self, tolerance=1e-6):
        """Construct a _BaseCheck.

        Parameters
        ----------
        tolerance : float, optional (default=1e-6)
            Relative slack allowed before the checked inequality is reported
            as violated.
        """
        self._tolerance = check_scalar(tolerance, "tolerance", (float, int), min_val=0.0)
        self._passed = None
        self._flags = []

    @abstractmethod
    def fit(self, *args, **kwargs):
        """Subclasses should implement this method!
        Run the check.

        Returns
        -------
        self : object
            Returns the instance itself.
        """

    @property
    def passed_(self):
        """Whether every inequality of the check held.

        Returns
        -------
        passed_ : bool
            True if the check passed.
        """
        self._check_is_fitted()
        return self._passed

    @property
    def flags_(self):
        """Diagnostic flags raised while running the check.

        Returns
        -------
        flags_ : list of str
            Human readable diagnostics, empty when nothing was noticed.
        """
        self._check_is_fitted()
        return list(self._flags)

    def to_dict(self):
        """Summarize the check as a JSON-ready dictionary.

        Returns
        -------
        summary : dict
            Check name, pass/fail, flags and the check specific fields.
        """
        self._check_is_fitted()
        summary = {
            "check": type(self).__name__,
            "passed": bool(self._passed),
            "flags": list(self._flags),
        }
        summary.update(_to_builtin(self._summary()))
        return summary

    def _summary(self):
        return {}

    def _flag(self, message, warn=True):
        self._flags.append(message)
        if warn:
            warnings.warn(message)

    def _check_is_fitted(self):
        if self._passed is None:
            raise RuntimeError(f"{type(self).__name__} is not fitted yet. Call 'fit' first.")


def _to_builtin(value):
    """Convert numpy scalars and arrays to plain python objects."""
    if isinstance(value, dict):
        return {str(k): _to_builtin(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_to_builtin(v) for v in value]
    if isinstance(value, np.ndarray):
        return _to_builtin(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if np.isfinite(value) else None
    if isinstance(value, (np.complexfloating, complex)):
        return [float(np.real(value)), float(np.imag(value))]
    return value
