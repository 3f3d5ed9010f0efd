"""Keyword-query reading comprehension: query rewriting, span reading and answer mixing."""

__version__ = "0.1.0"
