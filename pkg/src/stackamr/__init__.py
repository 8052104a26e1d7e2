"""Transition-based AMR parsing with Stack-LSTMs."""
__version__ = "0.1.0"
