"""Benchmarks for the optical flow solvers."""

from sdtd.flow import compute_flows, horn_schunck, tvl1_flow
from sdtd.frames import to_gray
from sdtd.models.configs import MotionKind, Tvl1Params

from benchmark_utils import BenchmarkSuite, SceneGenerator, benchmark_function

generator = SceneGenerator(seed=42)

SIZES = (64, 128)


def _pair(size: int):
    video = generator.video(MotionKind.LINEAR, size, 2)
    return to_gray(video[0]), to_gray(video[1])


def tvl1_benchmark(size: int, warps: int = 5):
    f1, f2 = _pair(size)
    params = Tvl1Params(warps=warps)

    @benchmark_function(f"TV-L1 {size}x{size} ({warps} warps)", iterations=3)
    def run() -> int:
        tvl1_flow(f1, f2, params)
        return 1

    return run()


def horn_schunck_benchmark(size: int, iters: int = 300):
    f1, f2 = _pair(size)

    @benchmark_function(f"Horn-Schunck {size}x{size} ({iters} iterations)", iterations=3)
    def run() -> int:
        horn_schunck(f1, f2, iters=iters)
        return 1

    return run()


def video_benchmark(size: int = 64, frames: int = 16):
    video = generator.video(MotionKind.CIRCULAR, size, frames)

    @benchmark_function(f"TV-L1 video {frames} frames {size}x{size}")
    def run() -> list:
        return compute_flows(video)

    return run()


def run_flow_benchmarks() -> BenchmarkSuite:
    """Run all flow benchmarks and return results."""
    suite = BenchmarkSuite()
    print("Running flow benchmarks...")
    for size in SIZES:
        for result in (tvl1_benchmark(size), tvl1_benchmark(size, warps=2), horn_schunck_benchmark(size)):
            suite.add_result(result)
            print(f"  {result.name}: {result.time_per_item:.1f} ms per pair")
    result = video_benchmark()
    suite.add_result(result)
    print(f"  {result.name}: {result.time_per_item:.1f} ms per pair")
    return suite


if __name__ == "__main__":
    run_flow_benchmarks().print_summary()
