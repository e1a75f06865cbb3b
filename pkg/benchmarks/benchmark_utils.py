"""Utilities for performance benchmarking."""

import gc
import os
import statistics
import time
from dataclasses import dataclass
from functools import wraps
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
import psutil

from sdtd.datagen import center_path, flow_for_path, render_path
from sdtd.flow import FlowField
from sdtd.frames import FrameSequence
from sdtd.models.configs import MotionClass, MotionKind, SceneSpec


@dataclass
class BenchmarkResult:
    """Container for benchmark results."""

    name: str
    execution_time: float  # seconds
    memory_before: float  # MB
    memory_after: float  # MB
    memory_peak: float  # MB
    memory_delta: float  # MB
    iterations: int
    items_processed: int
    time_per_item: float  # milliseconds

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary for reporting."""
        return {
            "name": self.name,
            "execution_time_seconds": self.execution_time,
            "memory_before_mb": self.memory_before,
            "memory_after_mb": self.memory_after,
            "memory_peak_mb": self.memory_peak,
            "memory_delta_mb": self.memory_delta,
            "iterations": self.iterations,
            "items_processed": self.items_processed,
            "time_per_item_ms": self.time_per_item,
            "items_per_second": self.items_processed / self.execution_time if self.execution_time > 0 else 0,
        }


class MemoryMonitor:
    """Monitor resident memory during benchmark execution."""

    def __init__(self):
        self.process = psutil.Process(os.getpid())
        self.peak_memory = 0.0
        self.start_memory = 0.0

    def start(self) -> float:
        """Start monitoring and return initial memory usage in MB."""
        gc.collect()
        self.start_memory = self.process.memory_info().rss / 1024 / 1024
        self.peak_memory = self.start_memory
        return self.start_memory

    def update_peak(self) -> float:
        """Update peak memory usage and return current usage in MB."""
        current = self.process.memory_info().rss / 1024 / 1024
        self.peak_memory = max(self.peak_memory, current)
        return current

    def finish(self) -> Tuple[float, float]:
        """Finish monitoring and return (final_memory, peak_memory) in MB."""
        gc.collect()
        final_memory = self.process.memory_info().rss / 1024 / 1024
        return final_memory, self.peak_memory


def benchmark_function(name: str, iterations: int = 1):
    """Decorator timing a function and sampling memory after each call.

    The wrapped function returns the number of items it processed (an int)
    or a list of produced items.

    Args:
        name: Name of the benchmark
        iterations: Number of calls
    """

    def decorator(func: Callable) -> Callable:
        @wraps(func)
        def wrapper(*args, **kwargs) -> BenchmarkResult:
            monitor = MemoryMonitor()
            memory_before = monitor.start()
            start_time = time.perf_counter()

            items = 0
            for _ in range(iterations):
                result = func(*args, **kwargs)
                if isinstance(result, int):
                    items += result
                elif isinstance(result, list):
                    items += len(result)
                else:
                    items += 1
                monitor.update_peak()

            execution_time = time.perf_counter() - start_time
            memory_after, memory_peak = monitor.finish()
            return BenchmarkResult(
                name=name,
                execution_time=execution_time,
                memory_before=memory_before,
                memory_after=memory_after,
                memory_peak=memory_peak,
                memory_delta=memory_after - memory_before,
                iterations=iterations,
                items_processed=items,
                time_per_item=(execution_time * 1000) / items if items > 0 else 0,
            )

        return wrapper

    return decorator


class SceneGenerator:
    """Synthetic videos and their analytic flow for benchmarking."""

    def __init__(self, seed: Optional[int] = 42):
        self.seed = seed or 0

    def scene(self, size: int, frames: int) -> SceneSpec:
        """Square scene with a sprite a fifth of the frame."""
        return SceneSpec(height=size, width=size, sprite_size=max(4, size // 5), frames=frames)

    def video(self, kind: MotionKind, size: int, frames: int) -> FrameSequence:
        """Rendered clip of one motion class."""
        scene = self.scene(size, frames)
        motion = MotionClass(name=kind, radius=size / 4.0)
        return render_path(center_path(motion, scene), scene, self.seed)

    def flows(self, kind: MotionKind, size: int, frames: int) -> List[FlowField]:
        """Analytic flow of a clip, one field per frame pair."""
        scene = self.scene(size, frames)
        path = center_path(MotionClass(name=kind, radius=size / 4.0), scene)
        return [flow_for_path(path, scene, t) for t in range(frames - 1)]

    def clips(self, batch: int, steps: int, channels: int, size: int) -> np.ndarray:
        """Random network input batch."""
        rng = np.random.default_rng(self.seed)
        return rng.standard_normal((batch, steps, channels, size, size)).astype(np.float32)


class BenchmarkSuite:
    """Collect and analyze benchmark results."""

    def __init__(self):
        self.results: List[BenchmarkResult] = []

    def add_result(self, result: BenchmarkResult):
        """Add a benchmark result to the suite."""
        self.results.append(result)

    @staticmethod
    def _stats(values: List[float]) -> Dict[str, float]:
        if not values:
            return {"mean": 0, "median": 0, "min": 0, "max": 0, "stdev": 0}
        return {
            "mean": statistics.mean(values),
            "median": statistics.median(values),
            "min": min(values),
            "max": max(values),
            "stdev": statistics.stdev(values) if len(values) > 1 else 0,
        }

    def get_summary(self) -> Dict[str, Any]:
        """Get summary statistics for all benchmarks."""
        if not self.results:
            return {}
        return {
            "total_benchmarks": len(self.results),
            "total_items_processed": sum(r.items_processed for r in self.results),
            "execution_time_stats": self._stats([r.execution_time for r in self.results]),
            "memory_delta_stats": self._stats([r.memory_delta for r in self.results]),
            "memory_peak_stats": self._stats([r.memory_peak for r in self.results]),
            "time_per_item_stats": self._stats([r.time_per_item for r in self.results]),
        }

    def print_summary(self):
        """Print a formatted summary of benchmark results."""
        print("\n" + "=" * 80)
        print("BENCHMARK SUMMARY")
        print("=" * 80)

        for result in self.results:
            print(f"\n{result.name}")
            print(f"   Items: {result.items_processed:,}")
            print(f"   Execution Time: {result.execution_time:.4f} seconds")
            print(f"   Time per Item: {result.time_per_item:.2f} ms")
            print(f"   Memory Delta: {result.memory_delta:+.2f} MB")
            print(f"   Peak Memory: {result.memory_peak:.2f} MB")

        summary = self.get_summary()
        if summary:
            print("\nOVERALL")
            print(f"   Total Items: {summary['total_items_processed']:,}")
            print(f"   Max Peak Memory: {summary['memory_peak_stats']['max']:.2f} MB")
        print("=" * 80)
