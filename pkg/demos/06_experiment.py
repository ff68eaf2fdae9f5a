"""Withholding levels on random networks, written as CSV to stdout."""
import sys

from lottoprop.experiments import ExperimentSpec, emit_csv, run_experiment

res = run_experiment(ExperimentSpec(n=200, d=6, H=6, K=20, master_seed=0), workers=2)
emit_csv(res, sys.stdout)
