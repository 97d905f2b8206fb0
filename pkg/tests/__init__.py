"""Tests for cinevae."""
