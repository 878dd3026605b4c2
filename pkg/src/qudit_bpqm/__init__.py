"""Classical simulation of BPQM on symmetric q-ary pure-state channels."""

__version__ = "0.1.0"
