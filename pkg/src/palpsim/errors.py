"""Exception types shared across the package."""


class PalpsimError(Exception):
    """Base class for all package errors."""


class ConfigError(PalpsimError):
    """Bad or unknown configuration input."""


class MeshError(PalpsimError):
    """Invalid geometry: degenerate, duplicate or insufficient points."""


class FormatError(PalpsimError):
    """On-disk payload violates a binary or manifest schema."""


class LumpAbsentError(PalpsimError):
    """A lump-dependent quantity was requested on a lump-free image."""


class SimulationError(PalpsimError):
    """A physical run left its operating envelope (e.g. probe never touched)."""
