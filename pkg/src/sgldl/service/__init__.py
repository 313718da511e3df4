"""FastAPI service wrapping the lab core."""
