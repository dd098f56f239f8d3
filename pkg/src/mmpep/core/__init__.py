"""Pure-Python simulation core."""
