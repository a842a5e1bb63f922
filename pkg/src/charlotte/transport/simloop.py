"""An asyncio event loop whose clock is virtual.

When nothing is ready, the loop jumps straight to the next timer instead of
sleeping, so a run with 100 ms links takes as long as its CPU work.  All
ordinary asyncio primitives (sleep, wait_for, futures, tasks) work unchanged.
"""
from __future__ import annotations

import asyncio
import selectors


class SimDeadlock(RuntimeError):
    """The simulated run is waiting on something no scheduled event can cause."""


class _VirtualSelector(selectors.SelectSelector):
    def __init__(self):
        super().__init__()
        self.loop = None

    def select(self, timeout=None):
        if timeout is None:
            raise SimDeadlock("no pending events; the run can never finish")
        if timeout > 0:
            self.loop._now += timeout
        return []


class VirtualLoop(asyncio.SelectorEventLoop):
    def __init__(self, start: float = 0.0):
        self._now = float(start)
        sel = _VirtualSelector()
        super().__init__(selector=sel)
        sel.loop = self

    def time(self) -> float:
        return self._now


def run_sim(coro, start: float = 0.0):
    """Run ``coro`` to completion on a fresh virtual-time loop."""
    loop = VirtualLoop(start)
    try:
        asyncio.set_event_loop(loop)
        return loop.run_until_complete(coro)
    finally:
        try:
            tasks = [t for t in asyncio.all_tasks(loop) if not t.done()]
            for t in tasks:
                t.cancel()
            if tasks:
                loop.run_until_complete(asyncio.gather(*tasks, return_exceptions=True))
        finally:
            asyncio.set_event_loop(None)
            loop.close()
