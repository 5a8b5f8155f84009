"""Incremental task-automaton learning from keyframe demonstrations."""

__version__ = "0.1.0"
