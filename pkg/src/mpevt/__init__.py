"""Rare-event statistics for Manneville-Pomeau maps."""
