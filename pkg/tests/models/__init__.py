"""Tests for sdtd models."""
