"""Test doubles: an in-process chat-completion stub and a runnable stack."""

from .stubs import StubServer, scripted_trace

__all__ = ["StubServer", "scripted_trace"]
