"""
Discrete-event loop on a virtual clock.

Events run in (time, sequence) order; the sequence number is assigned at
scheduling time, so equal-time events run in the order they were scheduled.
Every executed event is appended to the trace as one text line.
"""
import hashlib
import heapq
import itertools
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, List, Optional

from apps.oracle.exceptions import ContractViolation, ScheduleOverflow

logger = logging.getLogger(__name__)


@dataclass(order=True)
class ScheduledEvent:
    time: float
    seq: int
    kind: str = field(compare=False)
    detail: str = field(compare=False, default='')
    handler: Optional[Callable[[], None]] = field(compare=False, default=None, repr=False)

    def trace_line(self) -> str:
        return f"{self.time:.9f} {self.seq} {self.kind} {self.detail}".rstrip()


class EventLoop:
    def __init__(self, horizon: float = float('inf')):
        self.horizon = horizon
        self.now = 0.0
        self.trace: List[str] = []
        self._queue: List[ScheduledEvent] = []
        self._sequence = itertools.count()

    def __len__(self) -> int:
        return len(self._queue)

    def schedule_at(self, time: float, kind: str, handler: Callable[[], None],
                    detail: str = '') -> ScheduledEvent:
        if time < self.now:
            raise ContractViolation(f"cannot schedule {kind} at {time} before now={self.now}")
        if time > self.horizon:
            raise ScheduleOverflow(f"{kind} at {time:.3f}s is past the horizon {self.horizon:.3f}s")
        event = ScheduledEvent(time=time, seq=next(self._sequence), kind=kind,
                               detail=detail, handler=handler)
        heapq.heappush(self._queue, event)
        return event

    def schedule(self, delay: float, kind: str, handler: Callable[[], None],
                 detail: str = '') -> ScheduledEvent:
        return self.schedule_at(self.now + delay, kind, handler, detail)

    def step(self) -> Optional[ScheduledEvent]:
        if not self._queue:
            return None
        event = heapq.heappop(self._queue)
        self.now = event.time
        self.trace.append(event.trace_line())
        if event.handler is not None:
            event.handler()
        return event

    def run(self) -> int:
        executed = 0
        while self.step() is not None:
            executed += 1
        return executed

    def digest(self) -> str:
        h = hashlib.sha256()
        for line in self.trace:
            h.update(line.encode('utf-8'))
            h.update(b'\n')
        return h.hexdigest()

    def export_trace(self, path) -> Path:
        """Line-delimited trace records."""
        target = Path(path)
        target.write_text(''.join(f"{line}\n" for line in self.trace), encoding='utf-8')
        return target
