"""Frequency response and inertia analysis."""
