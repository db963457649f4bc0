"""Test suite for chord-atlas."""
