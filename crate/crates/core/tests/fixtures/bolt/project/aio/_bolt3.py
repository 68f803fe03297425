"""Bolt protocol version 3."""


class AsyncBolt3:
    """Connection speaking Bolt protocol version 3."""

    PROTOCOL_VERSION = (3, 0)

    def __init__(self, address, timeout=30):
        self.address = address
        self.timeout = timeout

    def hello(self, user_agent):
        """Send the HELLO message."""
        return {"user_agent": user_agent, "version": self.PROTOCOL_VERSION}


def supported_versions():
    return [AsyncBolt3.PROTOCOL_VERSION]
