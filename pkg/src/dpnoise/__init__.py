"""Optimised additive noise for (epsilon, delta)-differential privacy."""
