"""Benchmark harness: scenarios, seeded trials, CSV/SVG output and the CLI."""
