"""Experiment harness: configs, seeded runs, sweeps, verification suites and the CLI."""
