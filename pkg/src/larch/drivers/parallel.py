# -*- test-case-name: larch.test.test_drivers -*-
"""
Implementation of L{ReplicationDriver} in terms of a U{joblib
<https://joblib.readthedocs.io/>} process pool.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable

from joblib import Parallel, delayed
from twisted.logger import Logger

from ..boundaries import InvalidInput, Item, ReplicationDriver, Result

log = Logger()


@dataclass
class JoblibDriver:
    """
    L{ReplicationDriver} that fans work out to C{jobs} worker processes.

    @ivar jobs: The number of workers; C{-1} uses every available core.
    @ivar backend: The joblib backend name.
    """

    jobs: int = -1
    backend: str = "loky"

    def __post_init__(self) -> None:
        if self.jobs == 0 or self.jobs < -1:
            raise InvalidInput(
                f"jobs must be a positive count or -1, not {self.jobs}"
            )

    def map(
        self, work: Callable[[Item], Result], items: Iterable[Item]
    ) -> list[Result]:
        "L{ReplicationDriver.map}"
        pending = list(items)
        log.debug(
            "dispatching {count} items to {jobs} {backend} workers",
            count=len(pending),
            jobs=self.jobs,
            backend=self.backend,
        )
        # joblib returns results in submission order.
        results: list[Result] = Parallel(
            n_jobs=self.jobs, backend=self.backend
        )(delayed(work)(item) for item in pending)
        return results


_DriverTypeCheck: type[ReplicationDriver] = JoblibDriver

__all__ = ["JoblibDriver"]
