"""Asynchronous Bolt connections."""
