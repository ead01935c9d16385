"""Elastic-net variable selection feeding boosted-tree learners."""

__version__ = "0.1.0"
