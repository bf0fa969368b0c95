"""Column-wise hybrid ANN/SNN sparse accelerator: exact semantics, cost-guided scheduling and cycle-level simulation."""

__version__ = "0.1.0"
