"""Test suite for OpenHands Server."""
