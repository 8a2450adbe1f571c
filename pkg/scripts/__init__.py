"""Maintenance scripts for conformal-density."""
