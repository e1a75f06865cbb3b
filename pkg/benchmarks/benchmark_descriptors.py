"""Benchmarks for trajectory extraction and texture image construction."""

from sdtd.models.configs import MotionKind, TrajectoryConfig, TtiConfig
from sdtd.texture import build_sequence_from_config
from sdtd.trajectories import extract_trajectories

from benchmark_utils import BenchmarkSuite, SceneGenerator, benchmark_function

generator = SceneGenerator(seed=42)


def trajectory_benchmark(kind: MotionKind, size: int, frames: int, grid_step: int = 5):
    flows = generator.flows(kind, size, frames)
    config = TrajectoryConfig(grid_step=grid_step)

    @benchmark_function(f"Trajectories {kind.value} {size}x{size}x{frames} (grid {grid_step})")
    def run() -> list:
        return list(extract_trajectories(flows, config))

    return run()


def texture_benchmark(kind: MotionKind, size: int, frames: int):
    trajectories = extract_trajectories(generator.flows(kind, size, frames), TrajectoryConfig())

    @benchmark_function(f"Texture images {kind.value} {size}x{size}x{frames}", iterations=3)
    def run() -> int:
        build_sequence_from_config(trajectories, TtiConfig())
        return len(trajectories)

    return run()


def run_descriptor_benchmarks() -> BenchmarkSuite:
    """Run trajectory and texture benchmarks and return results."""
    suite = BenchmarkSuite()
    print("Running descriptor benchmarks...")
    for kind in (MotionKind.LINEAR, MotionKind.CIRCULAR):
        for result in (
            trajectory_benchmark(kind, 64, 30),
            trajectory_benchmark(kind, 128, 30, grid_step=4),
            texture_benchmark(kind, 64, 30),
        ):
            suite.add_result(result)
            print(f"  {result.name}: {result.time_per_item:.3f} ms per item")
    return suite


if __name__ == "__main__":
    run_descriptor_benchmarks().print_summary()
