"""Environment-translation data augmentation toolkit."""

__version__ = "0.1.0"
