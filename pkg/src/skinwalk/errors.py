"""Exception hierarchy shared by the engine and the command line."""


class SkinwalkError(Exception):
    """Base class for engine failures (CLI exit code 1)."""


class InvalidParameterError(SkinwalkError, ValueError):
    """A physical parameter is out of range or non-finite."""


class LatticeOverflowError(SkinwalkError):
    """The walker would be shifted off the finite lattice."""


class VanishingSurvivalError(SkinwalkError):
    """The survival probability dropped below the representable floor."""


class DegenerateSpectrumError(SkinwalkError):
    """No dominant mode exists, so a spectral drift velocity is undefined."""
