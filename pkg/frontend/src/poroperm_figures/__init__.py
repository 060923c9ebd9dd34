"""Figure regeneration from poroperm CSV outputs."""

__version__ = "1.0.0"
