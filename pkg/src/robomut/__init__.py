"""Mutation testing for robot command programs."""

__version__ = "0.1.0"
