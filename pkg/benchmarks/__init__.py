"""Performance benchmarks for the sdtd toolkit."""
