"""Smoothed online convex optimization lab."""
