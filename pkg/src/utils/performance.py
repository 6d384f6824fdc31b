import time
import logging
import threading
from collections import defaultdict, deque
from contextlib import contextmanager
from dataclasses import dataclass
from functools import wraps
from typing import Any, Callable, Dict, Iterator, List, Optional

logger = logging.getLogger(__name__)


@dataclass
class TimingMetric:
    """One timed unit of work (a check job or a solver call)."""
    name: str
    duration: float
    success: bool
    error_message: Optional[str] = None


class _Timer:
    """Handle yielded by ``TimingMonitor.measure``; ``elapsed`` is set on exit."""

    def __init__(self):
        self.elapsed = 0.0


class TimingMonitor:
    """Thread-safe per-check timing with slow-check warnings."""

    def __init__(self, max_history: int = 10_000, slow_threshold: float = 10.0):
        self.metrics: deque = deque(maxlen=max_history)
        self.lock = threading.Lock()
        self.enabled = True
        self.slow_threshold = slow_threshold
        self.stats: Dict[str, Dict[str, float]] = defaultdict(lambda: {
            'count': 0,
            'total_time': 0.0,
            'max_time': 0.0,
            'errors': 0,
            'slow_calls': 0,
        })

    @contextmanager
    def measure(self, name: str) -> Iterator[_Timer]:
        """Time the enclosed block and record it under ``name``."""
        timer = _Timer()
        start = time.perf_counter()
        success, error_message = True, None
        try:
            yield timer
        except Exception as e:
            success, error_message = False, str(e)
            raise
        finally:
            timer.elapsed = time.perf_counter() - start
            if self.enabled:
                self.record(TimingMetric(name, timer.elapsed, success, error_message))

    def monitor(self, name: Optional[str] = None):
        """Decorator form of ``measure``."""
        def decorator(func: Callable):
            @wraps(func)
            def wrapper(*args, **kwargs):
                with self.measure(name or f"{func.__module__}.{func.__name__}"):
                    return func(*args, **kwargs)
            return wrapper
        return decorator

    def record(self, metric: TimingMetric):
        with self.lock:
            self.metrics.append(metric)
            stats = self.stats[metric.name]
            stats['count'] += 1
            stats['total_time'] += metric.duration
            stats['max_time'] = max(stats['max_time'], metric.duration)
            if not metric.success:
                stats['errors'] += 1
            if metric.duration > self.slow_threshold:
                stats['slow_calls'] += 1
        if metric.duration > self.slow_threshold:
            logger.warning(f"Slow check: {metric.name} took {metric.duration:.2f}s")

    def get_statistics(self, name: Optional[str] = None) -> Dict[str, Any]:
        with self.lock:
            if name:
                return dict(self.stats.get(name, {}))
            return {k: dict(v) for k, v in self.stats.items()}

    def get_slow_calls(self, threshold: Optional[float] = None) -> List[TimingMetric]:
        threshold = self.slow_threshold if threshold is None else threshold
        with self.lock:
            return [m for m in self.metrics if m.duration > threshold]

    def summary(self) -> Dict[str, Any]:
        """Totals over all recorded work, slowest first."""
        with self.lock:
            total_calls = sum(s['count'] for s in self.stats.values())
            total_time = sum(s['total_time'] for s in self.stats.values())
            slowest = sorted(self.stats.items(), key=lambda kv: kv[1]['max_time'], reverse=True)[:10]
            return {
                'total_calls': total_calls,
                'total_time': total_time,
                'errors': sum(s['errors'] for s in self.stats.values()),
                'slowest': [{'name': k, 'max_time': v['max_time']} for k, v in slowest],
            }

    def clear_history(self):
        with self.lock:
            self.metrics.clear()
            self.stats.clear()


# Global timing monitor instance
timing_monitor = TimingMonitor()


def get_timing_monitor() -> TimingMonitor:
    return timing_monitor
