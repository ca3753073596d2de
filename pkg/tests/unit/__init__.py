"""Unit tests for warpstream."""
