"""Ricci flow of a metric on a periodic box coupled to the heat flow of a differential form."""

__version__ = "0.1.0"
