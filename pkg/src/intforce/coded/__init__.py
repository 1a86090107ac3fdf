"""Finite-length coded chain: root LDPC codes over the mod-2 IF channel."""
