"""featreg-exporter: convert torch CNN weights into featreg's file formats.

This package deliberately does not import featreg; it writes the documented
network-config, weights-blob, and KPD1 formats independently so the two
implementations can cross-check each other.
"""


class ExporterError(Exception):
    """Base class for exporter failures."""


class UnknownModel(ExporterError):
    """Model identifier not in the registry."""


class LayoutMismatch(ExporterError):
    """A source layer cannot be expressed in the conv/relu/maxpool/fc vocabulary."""


__version__ = "0.1.0"
