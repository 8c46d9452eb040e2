"""docstudy: corpora to self-supervised study tasks, stage plans, and metrics."""

__version__ = "0.1.0"
