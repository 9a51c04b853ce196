"""Experiment-runner branches not exercised through the CLI tests."""

import numpy as np

from jellium.config import ExperimentConfig
from jellium.experiments import (run_independence, run_sample, run_counts,
                                 run_kernel_convergence)

CIRCLE = [{"mass": 1.0, "profile": "uniform_circle", "params": {"radius": 1.0}}]


def test_independence_hkpv_branch():
    cfg = ExperimentConfig({
        "experiment": "independence", "seed": 41,
        "measure": CIRCLE, "kappa_rule": {"kind": "N+1"},
        "n": 8, "replicas": 80,
        "region_a": {"r_min": 0.0, "r_max": 0.6},
        "region_b": {"r_min": 1.4, "r_max": 2.0},
        "sampler": "hkpv",
        "gates": {"corr_sigma": 6.0},
    })
    metrics, gates, csvs = run_independence(cfg)
    assert metrics["sampler"] == "hkpv"
    assert all(g["pass"] for g in gates), gates
    name, header, rows = csvs[0]
    assert header == ("replica", "count_a", "count_b")
    assert len(list(rows)) == 80


def test_sample_methods_produce_full_cardinality():
    for method, n in (("bruteforce", 3), ("zeros", 12), ("hkpv", 5)):
        cfg = ExperimentConfig({
            "experiment": "sample", "seed": 42,
            "measure": CIRCLE, "kappa_rule": {"kind": "N+1"},
            "n": n, "replicas": 4, "method": method,
        })
        metrics, gates, csvs = run_sample(cfg)
        assert all(g["pass"] for g in gates)
        rows = list(csvs[0][2])
        assert len(rows) == 4 * n


def test_counts_without_monte_carlo():
    cfg = ExperimentConfig({
        "experiment": "counts", "seed": 43,
        "measure": CIRCLE, "kappa_rule": {"kind": "N+1"},
        "n": 16, "regions": [{"r_min": 1.0, "r_max": None, "expected": 8.0}],
    })
    metrics, gates, csvs = run_counts(cfg)
    assert all(g["pass"] for g in gates)
    assert "replicas" not in metrics


def test_kernel_convergence_chi_rule():
    # the kappa = N + chi exterior family against its weighted limit
    cfg = ExperimentConfig({
        "experiment": "kernel-convergence", "seed": 44,
        "measure": CIRCLE, "kappa_rule": {"kind": "N+chi", "chi": 0.5},
        "n_list": [64, 128, 256],
        "grid": {"r_min": 1.25, "r_max": 3.0, "count": 20},
        "region": {"r_min": 1.0, "r_max": None},
        "probe_r": 1.5,
        "target_q": 0.5,
        "gates": {"sup_rel_diff": 0.02},
    })
    metrics, gates, _ = run_kernel_convergence(cfg)
    assert all(g["pass"] for g in gates), gates
