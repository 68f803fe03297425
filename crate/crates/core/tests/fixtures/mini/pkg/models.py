"""Data models."""
import json

DEFAULT_NAME = "anon"


class User:
    """A user."""

    kind = "user"

    def __init__(self, name):
        self.name = name

    @property
    def label(self):
        return self.name.title()

    class Meta:
        ordering = "name"


def load(path):
    """Load users."""
    def parse(line):
        return User(line)
    return [parse(l) for l in open(path)]
