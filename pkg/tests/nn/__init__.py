"""Tests for the numpy network engine."""
