"""Integer-forcing and successive integer-forcing receivers for block-fading MIMO MACs."""

__version__ = "0.1.0"
