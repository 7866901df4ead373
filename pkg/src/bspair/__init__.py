"""Bounded separation of singularities: splittings f = f1 + f2, bs-pair classification and witness constructions."""

__version__ = "0.1.0"

from .errors import BsPairError  # noqa: E402,F401
