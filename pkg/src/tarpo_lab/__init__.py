"""Region-aware group-relative policy optimization for table QA, with a desk-scale simulator."""

__version__ = "0.1.0"
