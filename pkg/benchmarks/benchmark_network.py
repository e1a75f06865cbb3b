"""Benchmarks for the CNN-LSTM forward and backward passes."""

import numpy as np

from sdtd.models.configs import ArchitectureConfig
from sdtd.nn.model import CnnRnnModel

from benchmark_utils import BenchmarkSuite, SceneGenerator, benchmark_function

generator = SceneGenerator(seed=42)

ARCHITECTURES = {
    "small": ArchitectureConfig(layers="conv3x3x8,relu,pool,conv3x3x16,relu,pool,fc64,relu", lstm_hidden=32),
    "default": ArchitectureConfig(),
}


def forward_benchmark(name: str, batch: int = 4, steps: int = 8, size: int = 56, dtype=np.float32):
    model = CnnRnnModel((3, size, size), 4, ARCHITECTURES[name], dtype=dtype)
    clips = generator.clips(batch, steps, 3, size).astype(dtype)

    @benchmark_function(f"Forward {name} {batch}x{steps} clips {size}px {np.dtype(dtype).name}", iterations=3)
    def run() -> int:
        model.forward(clips)
        return batch

    return run()


def backward_benchmark(name: str, batch: int = 4, steps: int = 8, size: int = 56, dtype=np.float32):
    model = CnnRnnModel((3, size, size), 4, ARCHITECTURES[name], dtype=dtype)
    clips = generator.clips(batch, steps, 3, size).astype(dtype)
    labels = np.arange(batch) % 4

    @benchmark_function(f"Loss+grads {name} {batch}x{steps} clips {size}px {np.dtype(dtype).name}", iterations=3)
    def run() -> int:
        model.loss_and_grads(clips, labels)
        return batch

    return run()


def run_network_benchmarks() -> BenchmarkSuite:
    """Run network benchmarks and return results."""
    suite = BenchmarkSuite()
    print("Running network benchmarks...")
    for result in (
        forward_benchmark("small"),
        backward_benchmark("small"),
        backward_benchmark("small", dtype=np.float64),
        forward_benchmark("default"),
        backward_benchmark("default"),
    ):
        suite.add_result(result)
        print(f"  {result.name}: {result.time_per_item:.1f} ms per clip")
    return suite


if __name__ == "__main__":
    run_network_benchmarks().print_summary()
