#!/usr/bin/env python3
"""Main benchmark runner for sdtd performance testing."""

import json
import sys
from datetime import datetime
from pathlib import Path

from benchmark_descriptors import run_descriptor_benchmarks
from benchmark_flow import run_flow_benchmarks
from benchmark_network import run_network_benchmarks
from benchmark_utils import BenchmarkSuite


def save_results_to_json(suite: BenchmarkSuite, filename: Path):
    """Save benchmark results to JSON file."""
    results_data = {
        "timestamp": datetime.now().isoformat(),
        "summary": suite.get_summary(),
        "individual_results": [result.to_dict() for result in suite.results],
    }
    filename.write_text(json.dumps(results_data, indent=2), encoding="utf-8")
    print(f"Results saved to: {filename}")


def main():
    """Run all benchmarks and write one JSON file per phase plus a combined one."""
    print("sdtd performance benchmarks")
    print("=" * 80)
    print(f"Started at: {datetime.now().strftime('%Y-%m-%d %H:%M:%S')}")

    results_dir = Path("benchmark_results")
    results_dir.mkdir(exist_ok=True)
    timestamp = datetime.now().strftime("%Y%m%d_%H%M%S")
    combined_suite = BenchmarkSuite()

    phases = (
        ("flow", run_flow_benchmarks),
        ("descriptors", run_descriptor_benchmarks),
        ("network", run_network_benchmarks),
    )
    try:
        for name, run in phases:
            print(f"\nPhase: {name}")
            suite = run()
            combined_suite.results.extend(suite.results)
            save_results_to_json(suite, results_dir / f"{name}_{timestamp}.json")

        combined_suite.print_summary()
        save_results_to_json(combined_suite, results_dir / f"combined_{timestamp}.json")
        return 0
    except Exception as e:
        print(f"Benchmark failed: {e}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
