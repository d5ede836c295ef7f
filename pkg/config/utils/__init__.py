"""Shared numerical helpers (quadrature, Newton solver, seeding)."""
