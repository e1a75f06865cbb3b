"""Tests for the three-stream recognizer."""
