"""Relative train tracks for endperiodic graph maps."""
