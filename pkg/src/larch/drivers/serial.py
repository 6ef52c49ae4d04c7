# -*- test-case-name: larch.test.test_drivers -*-
"""
In-process implementation of L{ReplicationDriver} for use in tests and small
experiments.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable

from ..boundaries import Item, ReplicationDriver, Result


@dataclass
class SerialDriver:
    """
    L{ReplicationDriver} that runs every piece of work in the calling
    process, one after another, in the order given.
    """

    def map(
        self, work: Callable[[Item], Result], items: Iterable[Item]
    ) -> list[Result]:
        "L{ReplicationDriver.map}"
        return [work(item) for item in items]


_DriverTypeCheck: type[ReplicationDriver] = SerialDriver

__all__ = ["SerialDriver"]
