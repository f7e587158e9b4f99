"""commtuner: thin instruction-tuning and serving adapter that consumes the
pipeline's Alpaca-compatible dataset export and exposes tuned models behind
the chat-completions wire protocol.
"""

__version__ = "0.1.0"
