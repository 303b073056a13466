"""
Performance Optimizer for RM Toolbox
Runs independent indexed tasks (unitaries, bootstrap replicas, grid points)
in chunks on a thread pool and reassembles results in index order.
"""

from concurrent.futures import ThreadPoolExecutor
from datetime import datetime
import logging
from typing import Any, Callable, List, Optional, Sequence, TypeVar

import psutil

from config import get_config

T = TypeVar('T')


class MemoryMonitor:
    """Track resident memory of the current process."""

    def __init__(self):
        self.process = psutil.Process()

    def get_memory_usage(self) -> float:
        """Current memory usage in MB."""
        return self.process.memory_info().rss / 1024 / 1024


class ParallelTaskRunner:
    """Chunked, order-preserving map over task indices.

    Tasks must derive their randomness from their own index (for example
    ``np.random.default_rng([seed, index])``) so results do not depend on
    scheduling or on the worker count.
    """

    def __init__(self, config=None, progress_callback: Optional[Callable[[str, float], None]] = None,
                 max_workers: Optional[int] = None, chunk_size: Optional[int] = None,
                 parallel: Optional[bool] = None):
        self.config = config or get_config()
        self.progress_callback = progress_callback
        self.logger = logging.getLogger(__name__)
        self.memory_monitor = MemoryMonitor()

        self.max_workers = max_workers or self.config.get('advanced.max_worker_threads', 4)
        self.chunk_size = chunk_size or self.config.get('advanced.chunk_size', 250)
        self.use_parallel = self.config.get('advanced.parallel_processing', True) if parallel is None else parallel

        if self.max_workers < 1 or self.chunk_size < 1:
            raise ValueError("max_workers and chunk_size must be >= 1")

        self.processing_stats = {
            'label': None,
            'start_time': None,
            'end_time': None,
            'duration_seconds': 0.0,
            'tasks_processed': 0,
            'chunks_processed': 0,
            'workers': 1,
            'peak_memory_mb': 0.0
        }

    def _update_progress(self, message: str, percentage: float = 0):
        if self.progress_callback:
            self.progress_callback(message, percentage)

        current_memory = self.memory_monitor.get_memory_usage()
        if current_memory > self.processing_stats['peak_memory_mb']:
            self.processing_stats['peak_memory_mb'] = current_memory

    def split_chunks(self, count: int) -> List[range]:
        return [range(start, min(start + self.chunk_size, count))
                for start in range(0, count, self.chunk_size)]

    def map(self, func: Callable[[int], T], count: int, label: str = "tasks") -> List[T]:
        """Evaluate ``func(i)`` for i in range(count); results come back in index order."""
        if count < 0:
            raise ValueError(f"Task count must be >= 0, got {count}")

        stats = self.processing_stats
        stats.update(label=label, start_time=datetime.now(), tasks_processed=0, chunks_processed=0)

        chunks = self.split_chunks(count)
        workers = min(self.max_workers, len(chunks)) if self.use_parallel else 1
        stats['workers'] = max(workers, 1)

        def run_chunk(indices: range) -> List[T]:
            return [func(i) for i in indices]

        results: List[T] = []
        try:
            if workers > 1:
                self.logger.debug(f"Running {count} {label} in {len(chunks)} chunks on {workers} workers")
                with ThreadPoolExecutor(max_workers=workers) as executor:
                    futures = [executor.submit(run_chunk, chunk) for chunk in chunks]
                    for i, future in enumerate(futures):
                        results.extend(future.result())
                        self._chunk_done(i, len(chunks), label)
            else:
                for i, chunk in enumerate(chunks):
                    results.extend(run_chunk(chunk))
                    self._chunk_done(i, len(chunks), label)
        except Exception as e:
            self.logger.error(f"Error while running {label}: {e}")
            raise

        stats['end_time'] = datetime.now()
        stats['duration_seconds'] = (stats['end_time'] - stats['start_time']).total_seconds()
        stats['tasks_processed'] = len(results)
        self._log_performance_stats()
        return results

    def map_items(self, func: Callable[[Any], T], items: Sequence[Any], label: str = "items") -> List[T]:
        return self.map(lambda i: func(items[i]), len(items), label)

    def _chunk_done(self, index: int, total: int, label: str):
        self.processing_stats['chunks_processed'] = index + 1
        self._update_progress(f"{label}: chunk {index + 1}/{total}", 100.0 * (index + 1) / total)

    def _log_performance_stats(self):
        stats = self.processing_stats
        self.logger.debug(
            f"{stats['label']}: {stats['tasks_processed']} tasks in {stats['duration_seconds']:.2f}s "
            f"({stats['chunks_processed']} chunks, {stats['workers']} workers, "
            f"peak memory {stats['peak_memory_mb']:.1f}MB)"
        )


def create_task_runner(progress_callback: Callable = None, config=None, **kwargs) -> ParallelTaskRunner:
    """Factory function to create a task runner."""
    return ParallelTaskRunner(config=config, progress_callback=progress_callback, **kwargs)
