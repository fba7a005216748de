"""homognet - training, certification and generalization bounds for parallel
positively homogeneous networks."""

__version__ = "0.1.0"
