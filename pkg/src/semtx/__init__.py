"""semtx: query-guided semantic image transmission under a byte budget."""

__version__ = "0.1.0"
