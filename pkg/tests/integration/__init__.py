"""Integration tests for warpstream."""
