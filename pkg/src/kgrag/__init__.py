"""Evidence-linked knowledge-graph retrieval over process-defect literature."""

__version__ = "0.1.0"
