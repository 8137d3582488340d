"""Multi-scale analysis experiments for alloy Anderson models."""
