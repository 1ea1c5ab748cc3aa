"""Stochastic resonance in the fluorescence of a single shelving atom."""
