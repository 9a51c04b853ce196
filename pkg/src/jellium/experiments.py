"""Experiment implementations behind the CLI: each takes a validated
ExperimentConfig and returns (report, csv_payloads) without touching disk.

Replica work is split into fixed-size chunks whose results are reduced in
replica order, so the worker count changes wall time only, never a number.
"""

import math
import time
from concurrent.futures import ProcessPoolExecutor
import multiprocessing as mp

import numpy as np

from .errors import ValidationError
from .measures import hole_masses, class_representative
from .wpoly import BasisParams, build_basis, KernelEvaluator
from .bergman import (annulus_weighted_diag, disk_scaled_diag,
                      exterior_weighted_diag)
from .sampling import (RngStream, GafModel, gaf_coefficients,
                       zero_counts_in_disks, BruteForceSampler,
                       ProjectionSampler, kostlan_moduli_batch, _moduli_sampler)
from .stats import (RegionSpec, expected_count_radial, scaling_table,
                    sup_rel_diff, pearson_correlation, subsequence_select)

CHUNK = 1000  # fixed replica chunk size: scheduling-independent results


def gate(name, value, threshold, passed):
    return {"name": name, "value": float(value), "threshold": float(threshold),
            "pass": bool(passed)}


def le_gate(name, value, threshold):
    return gate(name, value, threshold, value <= threshold)


def ge_gate(name, value, threshold):
    return gate(name, value, threshold, value >= threshold)


def _chunk_ranges(m):
    return [(lo, min(lo + CHUNK, m)) for lo in range(0, m, CHUNK)]


def _map_chunks(worker, payloads, threads):
    if threads <= 1:
        return [worker(p) for p in payloads]
    ctx = mp.get_context("spawn")
    with ProcessPoolExecutor(max_workers=threads, mp_context=ctx) as pool:
        return list(pool.map(worker, payloads))


def _grid_points(cfg_grid):
    r = np.linspace(float(cfg_grid["r_min"]), float(cfg_grid["r_max"]),
                    int(cfg_grid["count"]))
    theta = float(cfg_grid.get("theta", 0.0))
    return r * np.exp(1j * theta)


# -- kernel convergence -------------------------------------------------------

def _limit_diag_fn(measure, region, target_q):
    """Limit-kernel diagonal for the uncharged component, as a function of
    the representative charge class."""
    holes = hole_masses(measure, region)
    if region.r_min == 0.0:
        radius = region.r_max
        return (lambda q_class, z: disk_scaled_diag(radius, z)), 0.0
    q_mass = holes.masses[0]
    if math.isinf(region.r_max):
        radius = region.r_min
        return (lambda q_class, z: exterior_weighted_diag(radius, q_class, z)), q_mass
    a, b = region.r_min, region.r_max
    return (lambda q_class, z: annulus_weighted_diag(a, b, q_class, z)), q_mass


def run_kernel_convergence(cfg, threads=1):
    t_start = time.perf_counter()
    measure = cfg.measure
    region = cfg.region()
    grid = _grid_points(cfg.raw["grid"])
    if not np.all(region.contains(grid)):
        raise ValidationError("grid must lie inside the uncharged region")
    n_list = [int(n) for n in cfg.raw["n_list"]]
    target_q = float(cfg.raw.get("target_q", 0.0))
    probe_r = float(cfg.raw.get("probe_r", abs(grid[len(grid) // 2])))
    limit_fn, q_mass = _limit_diag_fn(measure, region, target_q)

    limit_vals = np.array([limit_fn(target_q, z) for z in grid])
    probe_z = probe_r * np.exp(1j * float(cfg.raw["grid"].get("theta", 0.0)))

    sups, probes, mono_margins = [], [], []
    csvs = [("grid_limit.csv", ("re", "im", "value"),
             [(z.real, z.imag, v) for z, v in zip(grid, limit_vals)])]
    for n in n_list:
        kappa = cfg.kappa_rule(n)
        kernel = KernelEvaluator(build_basis(measure, BasisParams(n, kappa)))
        diag = kernel.diag(grid)
        sups.append(sup_rel_diff(diag, limit_vals))
        probes.append(abs(kernel.diag(probe_z) / limit_fn(target_q, probe_z) - 1.0))
        rep = class_representative(kappa * q_mass, target_q) if q_mass else 0.0
        matched = np.array([limit_fn(rep % 1.0, z) for z in grid])
        mono_margins.append(float(np.max(diag / matched)))
        csvs.append((f"grid_n{n:05d}.csv", ("re", "im", "value"),
                     [(z.real, z.imag, v) for z, v in zip(grid, diag)]))
    csvs.append(("summary.csv", ("n", "sup_rel_diff", "probe_rel_diff", "mono_max_ratio"),
                 [(n, s, p, mm) for n, s, p, mm in
                  zip(n_list, sups, probes, mono_margins)]))

    sup_gate = float(cfg.gate("sup_rel_diff", 0.05))
    mono_tol = float(cfg.gate("monotonicity_tol", 1e-6))
    sup_slack = float(cfg.gate("sup_ladder_slack", 1.1))
    ladder_ok = all(b <= a * sup_slack for a, b in zip(sups, sups[1:]))
    gates = [
        le_gate("sup_rel_diff_final", sups[-1], sup_gate),
        gate("probe_strictly_decreasing",
             float(all(a > b for a, b in zip(probes, probes[1:]))), 1.0,
             all(a > b for a, b in zip(probes, probes[1:]))),
        gate("sup_nonincreasing_with_slack", float(ladder_ok), 1.0, ladder_ok),
        le_gate("monotone_bound_max_ratio", max(mono_margins), 1.0 + mono_tol),
    ]
    metrics = {
        "n_list": n_list,
        "sup_rel_diff": sups,
        "probe_rel_diff": probes,
        "monotone_max_ratio": mono_margins,
        "runtime_s": time.perf_counter() - t_start,
    }
    return metrics, gates, csvs


# -- annulus Q family ---------------------------------------------------------

def run_annulus_q(cfg, threads=1):
    t_start = time.perf_counter()
    measure = cfg.measure
    region = cfg.region()
    a, b = region.r_min, region.r_max
    holes = hole_masses(measure, region)
    q_mass = holes.masses[0]
    grid = _grid_points(cfg.raw["grid"])
    targets = [float(t) for t in cfg.raw["targets"]]
    tol = float(cfg.raw["select_tol"])
    n_select_max = int(cfg.raw["n_select_max"])
    n_cap = int(cfg.raw["n_cap"])

    sup_gate = float(cfg.gate("sup_rel_diff", 0.07))
    mono_tol = float(cfg.gate("monotonicity_tol", 1e-6))
    sep_gate = float(cfg.gate("min_separation", 0.01))
    gauge_tol = float(cfg.gate("gauge_tol", 1e-10))

    gates, csvs = [], []
    metrics = {"targets": targets, "selected_n": {}, "sup_rel_diff": {},
               "hole_mass": q_mass}
    limit_curves = {}
    for tq in targets:
        selected = subsequence_select(q_mass, cfg.kappa_rule, tq,
                                      range(1, n_select_max + 1), tol)
        gates.append(ge_gate(f"subsequence_nonempty_q{tq}", len(selected), 1))
        capped = [n for n in selected if n <= n_cap]
        if not capped:
            raise ValidationError(f"no admissible N <= {n_cap} for target {tq}")
        n_star = max(capped)
        metrics["selected_n"][str(tq)] = n_star
        kappa = cfg.kappa_rule(n_star)
        kernel = KernelEvaluator(build_basis(measure, BasisParams(n_star, kappa)))
        diag = kernel.diag(grid)
        limit_vals = np.array([annulus_weighted_diag(a, b, tq, z) for z in grid])
        limit_curves[tq] = limit_vals
        sup = sup_rel_diff(diag, limit_vals)
        metrics["sup_rel_diff"][str(tq)] = sup
        gates.append(le_gate(f"sup_rel_diff_q{tq}", sup, sup_gate))
        rep = class_representative(kappa * q_mass, tq) % 1.0
        matched = np.array([annulus_weighted_diag(a, b, rep, z) for z in grid])
        gates.append(le_gate(f"monotone_bound_q{tq}",
                             float(np.max(diag / matched)), 1.0 + mono_tol))
        csvs.append((f"grid_q{tq}_n{n_star:05d}.csv", ("re", "im", "value"),
                     [(z.real, z.imag, v) for z, v in zip(grid, diag)]))
        csvs.append((f"limit_q{tq}.csv", ("re", "im", "value"),
                     [(z.real, z.imag, v) for z, v in zip(grid, limit_vals)]))

    if len(targets) >= 2:
        la, lb = limit_curves[targets[0]], limit_curves[targets[1]]
        separation = float(np.max(np.abs(la - lb) / lb))
        metrics["limit_separation"] = separation
        gates.append(ge_gate("limit_separation", separation, sep_gate))

    # gauge invariance: index shift in the bilateral series
    z_mid = grid[len(grid) // 2]
    q0 = targets[-1] if targets else 0.3
    d_lo = annulus_weighted_diag(a, b, q0, z_mid)
    d_hi = annulus_weighted_diag(a, b, q0 + 1.0, z_mid)
    shift_err = abs(d_hi / d_lo - 1.0)
    metrics["series_shift_error"] = shift_err
    gates.append(le_gate("series_index_shift", shift_err, gauge_tol))

    # continuity of the limit diagonal in the charge class
    d_eps = annulus_weighted_diag(a, b, q0 + 0.01, z_mid)
    cont = abs(d_eps / d_lo - 1.0)
    metrics["continuity_step"] = cont
    gates.append(le_gate("diag_continuity_in_q", cont, 0.05))

    # gauge invariance of the finite-N kernel: weight multiplied by |z|^2
    # against the degree-shifted window (the exact finite-dimensional form)
    n_g = int(cfg.raw.get("gauge_n", 64))
    kappa_g = cfg.kappa_rule(n_g)
    basis_shift = build_basis(measure, BasisParams(n_g - 1, kappa_g, degree_offset=1))
    basis_mult = build_basis(measure, BasisParams(n_g - 1, kappa_g, weight_power=1))
    dg_a = KernelEvaluator(basis_shift).diag(grid)
    dg_b = KernelEvaluator(basis_mult).diag(grid)
    wpoly_gauge = float(np.max(np.abs(dg_a - dg_b) / dg_a))
    metrics["wpoly_gauge_error"] = wpoly_gauge
    gates.append(le_gate("wpoly_weight_gauge", wpoly_gauge, gauge_tol))

    metrics["runtime_s"] = time.perf_counter() - t_start
    return metrics, gates, csvs


# -- independence -------------------------------------------------------------

def _kostlan_counts_chunk(args):
    basis, seed, lo, hi, bounds = args
    sampler = _moduli_sampler(basis)
    out = np.empty((hi - lo, len(bounds)), dtype=np.int64)
    for i, rep in enumerate(range(lo, hi)):
        gen = RngStream(seed, ("replica", rep)).generator()
        moduli = sampler.sample_for_degrees(sampler.degrees, gen)
        for j, (r0, r1) in enumerate(bounds):
            out[i, j] = np.sum((moduli >= r0) & (moduli < r1))
    return out


def _hkpv_counts_chunk(args):
    basis, seed, lo, hi, bounds = args
    sampler = ProjectionSampler(KernelEvaluator(basis))
    out = np.empty((hi - lo, len(bounds)), dtype=np.int64)
    for i, rep in enumerate(range(lo, hi)):
        gen = RngStream(seed, ("replica", rep)).generator()
        pts = sampler.sample(gen)
        moduli = np.abs(pts)
        for j, (r0, r1) in enumerate(bounds):
            out[i, j] = np.sum((moduli >= r0) & (moduli < r1))
    return out


def run_independence(cfg, threads=1):
    t_start = time.perf_counter()
    measure = cfg.measure
    n = int(cfg.raw["n"])
    m = int(cfg.raw["replicas"])
    region_a = cfg.region("region_a")
    region_b = cfg.region("region_b")
    method = cfg.raw.get("sampler", "kostlan")
    kappa = cfg.kappa_rule(n)
    basis = build_basis(measure, BasisParams(n, kappa))
    bounds = [(region_a.r_min, region_a.r_max), (region_b.r_min, region_b.r_max)]
    worker = _kostlan_counts_chunk if method == "kostlan" else _hkpv_counts_chunk
    payloads = [(basis, cfg.seed, lo, hi, bounds) for lo, hi in _chunk_ranges(m)]
    counts = np.concatenate(_map_chunks(worker, payloads, threads), axis=0)

    corr = pearson_correlation(counts[:, 0], counts[:, 1])
    corr_bound = float(cfg.gate("corr_sigma", 3.0)) / math.sqrt(m)
    eta_a = expected_count_radial(basis, region_a)
    eta_b = expected_count_radial(basis, region_b)
    gates = [le_gate("abs_count_correlation", abs(corr), corr_bound)]
    metrics = {"n": n, "replicas": m, "sampler": method, "correlation": corr,
               "expected_count_a": eta_a, "expected_count_b": eta_b,
               "mean_count_a": float(counts[:, 0].mean()),
               "mean_count_b": float(counts[:, 1].mean())}
    for label, eta, col in (("a", eta_a, counts[:, 0]), ("b", eta_b, counts[:, 1])):
        sig = 3.0 * col.std(ddof=1) / math.sqrt(m)
        gates.append(le_gate(f"mean_count_{label}_vs_exact",
                             abs(col.mean() - eta), max(sig, 1e-12)))
    csvs = [("counts.csv", ("replica", "count_a", "count_b"),
             [(i, int(counts[i, 0]), int(counts[i, 1])) for i in range(m)])]
    metrics["runtime_s"] = time.perf_counter() - t_start
    return metrics, gates, csvs


# -- random polynomial zeros --------------------------------------------------

def _zeros_chunk(args):
    degree, seed, lo, hi, radii, n_check = args
    model = GafModel(degree)
    coeffs = np.empty((hi - lo, degree + 1), dtype=complex)
    for i, rep in enumerate(range(lo, hi)):
        gen = RngStream(seed, ("replica", rep)).generator()
        coeffs[i] = gaf_coefficients(model, gen, 1)[0]
    counts = zero_counts_in_disks(coeffs, radii)
    mismatches = 0
    for i, rep in enumerate(range(lo, hi)):
        if rep >= n_check:
            continue
        moduli = np.abs(np.roots(coeffs[i][::-1]))
        for j, r in enumerate(radii):
            if int(np.sum(moduli < r)) != counts[i, j]:
                mismatches += 1
    return counts, mismatches


def run_zeros(cfg, threads=1):
    t_start = time.perf_counter()
    degree = int(cfg.raw["degree"])
    m = int(cfg.raw["replicas"])
    bins = cfg.raw.get("bins", {})
    r_center = float(bins.get("center_radius", 0.1))
    ring = bins.get("ring", [0.46, 0.54])
    region_a = cfg.region("region_a") if "region_a" in cfg.raw else RegionSpec(r_max=0.5)
    region_b = cfg.region("region_b") if "region_b" in cfg.raw else RegionSpec(r_min=1.3, r_max=2.0)
    n_check = int(cfg.raw.get("subsample_check", 2000))

    radii = sorted({r_center, float(ring[0]), float(ring[1]),
                    region_a.r_max, region_b.r_min, region_b.r_max})
    payloads = [(degree, cfg.seed, lo, hi, radii, n_check)
                for lo, hi in _chunk_ranges(m)]
    results = _map_chunks(_zeros_chunk, payloads, threads)
    counts = np.concatenate([r[0] for r in results], axis=0)
    mismatches = sum(r[1] for r in results)
    idx = {r: j for j, r in enumerate(radii)}

    center_counts = counts[:, idx[r_center]]
    intensity_center = center_counts.mean() / (math.pi * r_center ** 2)
    ring_counts = counts[:, idx[float(ring[1])]] - counts[:, idx[float(ring[0])]]
    ring_area = math.pi * (float(ring[1]) ** 2 - float(ring[0]) ** 2)
    intensity_ring = ring_counts.mean() / ring_area

    count_a = counts[:, idx[region_a.r_max]]
    count_b = counts[:, idx[region_b.r_max]] - counts[:, idx[region_b.r_min]]
    corr = pearson_correlation(count_a, count_b)

    target_center = 1.0 / math.pi
    target_ring = 16.0 / (9.0 * math.pi)
    tol_center = float(cfg.gate("center_rel_tol", 0.05))
    tol_ring = float(cfg.gate("ring_rel_tol", 0.07))
    corr_bound = float(cfg.gate("corr_sigma", 3.0)) / math.sqrt(m)

    gates = [
        le_gate("zero_intensity_center",
                abs(intensity_center / target_center - 1.0), tol_center),
        le_gate("zero_intensity_ring",
                abs(intensity_ring / target_ring - 1.0), tol_ring),
        le_gate("abs_zero_count_correlation", abs(corr), corr_bound),
        le_gate("winding_vs_roots_mismatches", mismatches, 0),
    ]
    metrics = {
        "degree": degree, "replicas": m,
        "intensity_center": float(intensity_center),
        "intensity_center_target": target_center,
        "intensity_ring": float(intensity_ring),
        "intensity_ring_target": target_ring,
        "correlation": corr,
        "crosscheck_replicas": min(n_check, m),
        "crosscheck_mismatches": int(mismatches),
        "runtime_s": time.perf_counter() - t_start,
    }
    header = ("replica",) + tuple(f"count_r{j}" for j in range(len(radii)))
    csvs = [
        ("count_radii.csv", ("index", "radius"),
         [(j, r) for j, r in enumerate(radii)]),
        ("counts.csv", header,
         [(i,) + tuple(int(c) for c in counts[i]) for i in range(m)]),
    ]
    return metrics, gates, csvs


# -- exact counts -------------------------------------------------------------

def run_counts(cfg, threads=1):
    t_start = time.perf_counter()
    measure = cfg.measure
    n = int(cfg.raw["n"])
    kappa = cfg.kappa_rule(n)
    basis = build_basis(measure, BasisParams(n, kappa))
    abs_tol = float(cfg.gate("abs_tol", 1e-9))
    m = int(cfg.raw.get("replicas", 0))

    gates, rows = [], []
    errors = []
    region_objs = []
    for i, entry in enumerate(cfg.raw["regions"]):
        from .config import build_region
        region = build_region(entry, errors, f"regions[{i}]")
        if errors:
            raise ValidationError(str(errors))
        region_objs.append(region)
        eta = expected_count_radial(basis, region)
        expected = entry.get("expected")
        rows.append({"region": i, "r_min": region.r_min,
                     "r_max": region.r_max, "eta": eta,
                     "expected": expected})
        if expected is not None:
            gates.append(le_gate(f"exact_count_region{i}",
                                 abs(eta - float(expected)), abs_tol))
        comp = (expected_count_radial(basis, RegionSpec(r_max=region.r_min))
                if region.r_min > 0 else 0.0)
        comp += (expected_count_radial(basis, RegionSpec(r_min=region.r_max))
                 if not math.isinf(region.r_max) else 0.0)
        gates.append(le_gate(f"complement_sum_region{i}",
                             abs(eta + comp - n), abs_tol))

    metrics = {"n": n, "rows": rows}
    csvs = [("counts_exact.csv", ("region", "r_min", "r_max", "eta"),
             [(r["region"], r["r_min"],
               (r["r_max"] if not math.isinf(r["r_max"]) else -1.0),
               r["eta"]) for r in rows])]

    if m > 0:
        bounds = [(rg.r_min, rg.r_max) for rg in region_objs]
        payloads = [(basis, cfg.seed, lo, hi, bounds) for lo, hi in _chunk_ranges(m)]
        counts = np.concatenate(
            _map_chunks(_kostlan_counts_chunk, payloads, threads), axis=0)
        for i, region in enumerate(region_objs):
            eta = rows[i]["eta"]
            col = counts[:, i]
            sig = 3.0 * col.std(ddof=1) / math.sqrt(m)
            gates.append(le_gate(f"mc_mean_region{i}",
                                 abs(col.mean() - eta), max(sig, 1e-12)))
            rows[i]["mc_mean"] = float(col.mean())
        csvs.append(("counts_mc.csv",
                     ("replica",) + tuple(f"count_{i}" for i in range(len(region_objs))),
                     [(r,) + tuple(int(c) for c in counts[r])
                      for r in range(m)]))
        metrics["replicas"] = m
    metrics["runtime_s"] = time.perf_counter() - t_start
    return metrics, gates, csvs


# -- outlier-count scaling ----------------------------------------------------

def run_scaling(cfg, threads=1):
    t_start = time.perf_counter()
    rows = scaling_table(cfg.measure, cfg.kappa_rule,
                         [int(n) for n in cfg.raw["n_list"]], cfg.region())
    col_sqrt = [r["eta_over_sqrt_n"] for r in rows]
    col_log = [r["eta_over_sqrt_n_log_n"] for r in rows]
    ratio = max(col_sqrt) / min(col_sqrt)
    noninc = all(a >= b - 1e-12 for a, b in zip(col_log, col_log[1:]))
    increasing = all(a < b for a, b in
                     zip([r["eta"] for r in rows], [r["eta"] for r in rows][1:]))
    gates = [
        le_gate("sqrt_column_max_over_min", ratio, float(cfg.gate("ratio_max", 2.0))),
        gate("log_column_nonincreasing", float(noninc), 1.0, noninc),
        gate("eta_increasing", float(increasing), 1.0, increasing),
    ]
    metrics = {"rows": rows, "runtime_s": time.perf_counter() - t_start}
    csvs = [("scaling.csv",
             ("n", "eta", "eta_over_sqrt_n", "eta_over_sqrt_n_log_n"),
             [(r["n"], r["eta"], r["eta_over_sqrt_n"], r["eta_over_sqrt_n_log_n"])
              for r in rows])]
    return metrics, gates, csvs


# -- sampler validation -------------------------------------------------------

def _bruteforce_chunk(args):
    measure, kappa, n, seed, lo, hi = args
    sampler = BruteForceSampler(measure, kappa, n)
    gen = RngStream(seed, ("bruteforce", n, lo)).generator()
    return np.sort(np.abs(sampler.sample_batch(gen, hi - lo)), axis=1)


def _hkpv_moduli_chunk(args):
    basis, seed, lo, hi = args
    sampler = ProjectionSampler(KernelEvaluator(basis))
    out = np.empty((hi - lo, basis.params.n))
    for i, rep in enumerate(range(lo, hi)):
        gen = RngStream(seed, ("replica", rep)).generator()
        out[i] = np.sort(np.abs(sampler.sample(gen)))
    return out


def _tv_distance(h1, h2):
    p = h1 / h1.sum()
    q = h2 / h2.sum()
    return 0.5 * float(np.abs(p - q).sum())


def run_sampler_validation(cfg, threads=1):
    t_start = time.perf_counter()
    measure = cfg.measure
    m_tv = int(cfg.raw.get("replicas_tv", 100000))
    tv_bound = float(cfg.gate("tv_bound", 0.05))
    gates, csvs = [], []
    metrics = {"replicas_tv": m_tv}

    edges = np.linspace(0.0, 2.5, 11)

    for n in (2, 3):
        kappa = cfg.kappa_rule(n)
        payloads_bf = [(measure, kappa, n, cfg.seed, lo, hi)
                       for lo, hi in _chunk_ranges(m_tv)]
        bf = np.concatenate(_map_chunks(_bruteforce_chunk, payloads_bf, threads))
        basis = build_basis(measure, BasisParams(n, kappa))
        payloads_hk = [(basis, cfg.seed, lo, hi) for lo, hi in _chunk_ranges(m_tv)]
        hk = np.concatenate(_map_chunks(_hkpv_moduli_chunk, payloads_hk, threads))
        rank_tvs = []
        for rank in range(n):
            h1, _ = np.histogram(np.clip(bf[:, rank], 0, 2.5 - 1e-9), bins=edges)
            h2, _ = np.histogram(np.clip(hk[:, rank], 0, 2.5 - 1e-9), bins=edges)
            rank_tvs.append(_tv_distance(h1, h2))
        metrics[f"rank_tv_n{n}"] = rank_tvs
        gates.append(le_gate(f"sorted_moduli_tv_n{n}", max(rank_tvs), tv_bound))
        if n == 2:
            h1, _, _ = np.histogram2d(np.clip(bf[:, 0], 0, 2.5 - 1e-9),
                                      np.clip(bf[:, 1], 0, 2.5 - 1e-9),
                                      bins=(edges, edges))
            h2, _, _ = np.histogram2d(np.clip(hk[:, 0], 0, 2.5 - 1e-9),
                                      np.clip(hk[:, 1], 0, 2.5 - 1e-9),
                                      bins=(edges, edges))
            joint_tv = _tv_distance(h1.ravel(), h2.ravel())
            metrics["joint_tv_n2"] = joint_tv
            gates.append(le_gate("joint_moduli_tv_n2", joint_tv, tv_bound))

    # Kostlan marginal: P(R_0 > 1) = 1/5 at N = 4, kappa = 5
    n4 = 4
    basis4 = build_basis(measure, BasisParams(n4, cfg.kappa_rule(n4)))
    m_tail = int(cfg.raw.get("replicas_tail", 100000))
    draws = kostlan_moduli_batch(basis4, RngStream(cfg.seed, ("kostlan-tail",)), m_tail)
    p_hat = float(np.mean(draws[:, 0] > 1.0))
    p_exact = 1.0 / (n4 + 1.0)
    sig = 3.0 * math.sqrt(p_exact * (1 - p_exact) / m_tail)
    gates.append(le_gate("kostlan_tail_p", abs(p_hat - p_exact), sig))
    metrics["kostlan_tail_p"] = p_hat

    # sorted-moduli marginals: hkpv vs kostlan at N = 16
    n16 = int(cfg.raw.get("ks_n", 16))
    m_ks = int(cfg.raw.get("replicas_ks", 10000))
    ks_bound = float(cfg.gate("ks_bound", 0.02))
    basis16 = build_basis(measure, BasisParams(n16, cfg.kappa_rule(n16)))
    payloads = [(basis16, cfg.seed, lo, hi) for lo, hi in _chunk_ranges(m_ks)]
    hk16 = np.concatenate(_map_chunks(_hkpv_moduli_chunk, payloads, threads))
    ko16 = np.sort(kostlan_moduli_batch(
        basis16, RngStream(cfg.seed, ("kostlan-ks",)), m_ks), axis=1)
    def ks_two_sample(x, y):
        x = np.sort(x)
        y = np.sort(y)
        allv = np.concatenate([x, y])
        cx = np.searchsorted(x, allv, side="right") / len(x)
        cy = np.searchsorted(y, allv, side="right") / len(y)
        return float(np.max(np.abs(cx - cy)))

    # the multiset law: KS on the pooled moduli (per-rank maxima are noisier
    # than the gate at this replica count and are reported, not gated)
    ks_pooled = ks_two_sample(hk16.ravel(), ko16.ravel())
    ks_ranks = [ks_two_sample(hk16[:, rank], ko16[:, rank]) for rank in range(n16)]
    metrics["ks_pooled"] = ks_pooled
    metrics["ks_rank_max"] = max(ks_ranks)
    gates.append(le_gate("hkpv_vs_kostlan_ks", ks_pooled, ks_bound))
    metrics["runtime_s"] = time.perf_counter() - t_start
    return metrics, gates, csvs


# -- raw sampling -------------------------------------------------------------

def _sample_points_chunk(args):
    basis, method, measure, kappa, n, seed, lo, hi = args
    rows = []
    if method == "hkpv":
        sampler = ProjectionSampler(KernelEvaluator(basis))
        for rep in range(lo, hi):
            gen = RngStream(seed, ("replica", rep)).generator()
            pts = sampler.sample(gen)
            rows.extend((rep, z.real, z.imag) for z in pts)
    elif method == "bruteforce":
        sampler = BruteForceSampler(measure, kappa, n)
        gen = RngStream(seed, ("bruteforce", lo)).generator()
        z = sampler.sample_batch(gen, hi - lo)
        for i, rep in enumerate(range(lo, hi)):
            rows.extend((rep, zz.real, zz.imag) for zz in z[i])
    elif method == "zeros":
        from .sampling import gaf_zeros_sample
        model = GafModel(n)
        for rep in range(lo, hi):
            sample = gaf_zeros_sample(model, RngStream(seed, ("replica", rep)), rep)
            rows.extend((rep, z.real, z.imag) for z in sample.points)
    else:
        raise ValidationError(f"unknown sampling method {method!r}")
    return rows


def run_sample(cfg, threads=1):
    t_start = time.perf_counter()
    measure = cfg.measure
    n = int(cfg.raw["n"])
    m = int(cfg.raw["replicas"])
    method = cfg.raw["method"]
    kappa = cfg.kappa_rule(n)
    basis = None
    if method == "hkpv":
        basis = build_basis(measure, BasisParams(n, kappa))
    if method == "bruteforce" and n > 3:
        raise ValidationError("bruteforce sampling requires N <= 3")
    payloads = [(basis, method, measure, kappa, n, cfg.seed, lo, hi)
                for lo, hi in _chunk_ranges(m)]
    chunks = _map_chunks(_sample_points_chunk, payloads, threads)
    rows = [row for chunk in chunks for row in chunk]
    per_replica = {}
    for rep, _, _ in rows:
        per_replica[rep] = per_replica.get(rep, 0) + 1
    card_ok = all(v == n for v in per_replica.values()) and len(per_replica) == m
    gates = [gate("cardinality", float(card_ok), 1.0, card_ok)]
    metrics = {"n": n, "replicas": m, "method": method,
               "runtime_s": time.perf_counter() - t_start}
    csvs = [("samples.csv", ("replica", "re", "im"), rows)]
    return metrics, gates, csvs


RUNNERS = {
    "kernel-convergence": run_kernel_convergence,
    "annulus-Q": run_annulus_q,
    "independence": run_independence,
    "zeros": run_zeros,
    "counts": run_counts,
    "scaling": run_scaling,
    "sampler-validation": run_sampler_validation,
    "sample": run_sample,
}


def run_experiment(cfg, threads=1):
    """Dispatch to the experiment runner; returns (report, csv_payloads)."""
    runner = RUNNERS[cfg.kind]
    metrics, gates, csvs = runner(cfg, threads=threads)
    report = {
        "experiment": cfg.kind,
        "config_hash": cfg.config_hash(),
        "seed": cfg.seed,
        "metrics": metrics,
        "gates": gates,
    }
    return report, csvs
