"""Test suite for repda."""
