"""Configuration, reports, oracles, the acceptance suite and the CLI."""
