"""Package."""
VERSION = "1.0"
