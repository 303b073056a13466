import threading

import numpy as np
import pytest

from performance_optimizer import MemoryMonitor, ParallelTaskRunner, create_task_runner


def square(i):
    return i * i


class TestParallelTaskRunner:
    def test_order_preserved(self, config):
        runner = ParallelTaskRunner(config, max_workers=4, chunk_size=3)
        assert runner.map(square, 20) == [i * i for i in range(20)]

    def test_sequential_matches_parallel(self, config):
        def draw(i):
            return np.random.default_rng([5, i]).random()

        serial = ParallelTaskRunner(config, parallel=False).map(draw, 30)
        threaded = ParallelTaskRunner(config, max_workers=3, chunk_size=4).map(draw, 30)
        assert serial == threaded

    def test_sequential_runs_on_calling_thread(self, config):
        idents = ParallelTaskRunner(config, max_workers=2, chunk_size=1, parallel=False).map(
            lambda i: threading.get_ident(), 4)
        assert set(idents) == {threading.get_ident()}

    def test_split_chunks(self, config):
        chunks = ParallelTaskRunner(config, chunk_size=4).split_chunks(10)
        assert [list(c) for c in chunks] == [[0, 1, 2, 3], [4, 5, 6, 7], [8, 9]]

    def test_empty(self, config):
        assert ParallelTaskRunner(config).map(square, 0) == []

    def test_negative_count(self, config):
        with pytest.raises(ValueError):
            ParallelTaskRunner(config).map(square, -1)

    def test_invalid_settings(self, config):
        with pytest.raises(ValueError):
            ParallelTaskRunner(config, chunk_size=-1)

    def test_errors_propagate(self, config):
        def fail(i):
            if i == 7:
                raise RuntimeError("task failed")
            return i

        with pytest.raises(RuntimeError, match="task failed"):
            ParallelTaskRunner(config, max_workers=2, chunk_size=2).map(fail, 10)

    def test_map_items(self, config):
        assert ParallelTaskRunner(config, chunk_size=2).map_items(str.upper, ['a', 'b', 'c']) == ['A', 'B', 'C']

    def test_progress_and_stats(self, config):
        progress = []
        runner = ParallelTaskRunner(config, lambda message, pct: progress.append(pct), max_workers=2, chunk_size=5)
        runner.map(square, 20, label="squares")

        assert progress[-1] == pytest.approx(100.0)
        assert len(progress) == 4
        stats = runner.processing_stats
        assert stats['label'] == "squares"
        assert stats['tasks_processed'] == 20
        assert stats['chunks_processed'] == 4
        assert stats['workers'] == 2

    def test_config_defaults(self, config):
        config.set('advanced.max_worker_threads', 3)
        config.set('advanced.chunk_size', 17)
        config.set('advanced.parallel_processing', False)
        runner = create_task_runner(config=config)
        assert (runner.max_workers, runner.chunk_size, runner.use_parallel) == (3, 17, False)


def test_memory_monitor():
    assert MemoryMonitor().get_memory_usage() > 0
