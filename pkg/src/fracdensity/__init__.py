"""Density estimates for nonlocal Allen-Cahn minimizers, numerically."""
