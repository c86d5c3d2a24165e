"""pjfit: person-job fit matching with co-attention and history graphs."""

__version__ = "0.1.0"
