"""Two-agent visual question answering with a structured caption channel."""

__version__ = "0.1.0"
