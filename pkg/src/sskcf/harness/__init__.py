"""Benchmark harness: sequences, synthetic data, metrics and the command line."""
