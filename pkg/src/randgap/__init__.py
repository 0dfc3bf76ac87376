"""Randomized gap and amplitude estimation for small quantum systems."""
