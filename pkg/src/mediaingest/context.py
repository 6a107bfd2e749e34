"""Cancellation contexts shared by every long-running component."""

from __future__ import annotations

import threading
from typing import Callable


class Cancelled(Exception):
    """Raised by blocking helpers when their context is cancelled."""


class Context:
    """A cancellation signal that propagates from parent to children.

    Components receive a context and must return promptly once it is
    cancelled. Callbacks registered with :meth:`on_cancel` let blocking
    primitives (channels, condition variables) wake up without polling.
    """

    def __init__(self, parent: Context | None = None) -> None:
        self._event = threading.Event()
        self._lock = threading.Lock()
        self._callbacks: dict[int, Callable[[], None]] = {}
        self._next_id = 0
        self._children: list[Context] = []
        self.reason: str | None = None
        self._parent = parent
        if parent is not None:
            parent._add_child(self)

    def _add_child(self, child: Context) -> None:
        with self._lock:
            if not self._event.is_set():
                self._children.append(child)
                return
        child.cancel(self.reason)

    def child(self) -> Context:
        return Context(self)

    def cancel(self, reason: str | None = "cancelled") -> None:
        with self._lock:
            if self._event.is_set():
                return
            self.reason = reason
            self._event.set()
            callbacks = list(self._callbacks.values())
            self._callbacks.clear()
            children, self._children = self._children, []
        for cb in callbacks:
            cb()
        for c in children:
            c.cancel(reason)

    @property
    def cancelled(self) -> bool:
        return self._event.is_set()

    def wait(self, timeout: float | None = None) -> bool:
        """Block until cancelled or ``timeout`` elapses; True if cancelled."""
        return self._event.wait(timeout)

    def on_cancel(self, fn: Callable[[], None]) -> Callable[[], None]:
        """Register ``fn``; returns a function that unregisters it.

        If the context is already cancelled ``fn`` runs immediately.
        """
        with self._lock:
            if not self._event.is_set():
                key = self._next_id
                self._next_id += 1
                self._callbacks[key] = fn

                def remove() -> None:
                    with self._lock:
                        self._callbacks.pop(key, None)

                return remove
        fn()
        return lambda: None


def background() -> Context:
    return Context()
