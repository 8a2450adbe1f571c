"""Subcommands of the conformal CLI."""
