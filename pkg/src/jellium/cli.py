"""Config-driven experiment runner.

Subcommands map onto experiment kinds; every run writes report.json (metrics
plus pass/fail gates), manifest.json (config hash, seed, version), and the
experiment's CSV payloads. Exit status 0 means every configured gate passed.

Numeric work is kept worker-count invariant: BLAS pools are pinned to one
thread before numpy loads, replicas use counter-based per-replica streams,
and chunked results are reduced in replica order.
"""

import argparse
import json
import os
import sys

_SUBCOMMAND_KINDS = {
    "kernel": ("kernel-convergence",),
    "compare": ("annulus-Q",),
    "independence": ("independence",),
    "zeros": ("zeros",),
    "counts": ("counts", "scaling"),
    "validate-sampler": ("sampler-validation",),
    "sample": ("sample",),
}


def _pin_blas():
    for var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS",
                "NUMEXPR_NUM_THREADS"):
        os.environ.setdefault(var, "1")


def _format_cell(v):
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, int):
        return str(v)
    return repr(float(v))


def write_outputs(out_dir, report, csvs):
    os.makedirs(out_dir, exist_ok=True)
    for name, header, rows in csvs:
        path = os.path.join(out_dir, name)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            # every output file records the config hash
            fh.write(f"# config_hash={report['config_hash']}\n")
            fh.write(",".join(header) + "\n")
            for row in rows:
                fh.write(",".join(_format_cell(v) for v in row) + "\n")
    with open(os.path.join(out_dir, "report.json"), "w", encoding="utf-8") as fh:
        json.dump(report, fh, sort_keys=True, indent=2)
        fh.write("\n")
    manifest = {
        "config_hash": report["config_hash"],
        "seed": report["seed"],
        "version": report["version"],
    }
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="jellium",
        description="Coulomb-gas and random-polynomial outlier experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _SUBCOMMAND_KINDS:
        p = sub.add_parser(name, help=f"run a {'/'.join(_SUBCOMMAND_KINDS[name])} config")
        p.add_argument("--config", required=True, help="experiment JSON path")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed (u64)")
        p.add_argument("--out", default="jellium_out", help="output directory")
        p.add_argument("--threads", type=int, default=1,
                       help="worker processes (affects wall time only)")
    return parser


def main(argv=None):
    _pin_blas()
    args = _build_parser().parse_args(argv)

    from . import __version__
    from .errors import JelliumError, ValidationError
    from .config import load_config, ExperimentConfig
    from .experiments import run_experiment

    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            raw = dict(cfg.raw)
            raw["seed"] = int(args.seed)
            cfg = ExperimentConfig(raw)
        if cfg.kind not in _SUBCOMMAND_KINDS[args.command]:
            raise ValidationError(json.dumps({"errors": [
                f"subcommand {args.command!r} cannot run a {cfg.kind!r} config"]}))
    except ValidationError as exc:
        msg = str(exc)
        if not msg.startswith("{"):
            msg = json.dumps({"errors": [msg]})
        print(msg, file=sys.stderr)
        return 2
    except OSError as exc:
        print(json.dumps({"errors": [str(exc)]}), file=sys.stderr)
        return 2

    try:
        report, csvs = run_experiment(cfg, threads=max(1, args.threads))
    except JelliumError as exc:
        print(json.dumps({"errors": [f"{type(exc).__name__}: {exc}"]}),
              file=sys.stderr)
        return 3

    report["version"] = __version__
    write_outputs(args.out, report, csvs)
    failed = [g["name"] for g in report["gates"] if not g["pass"]]
    for g in report["gates"]:
        status = "PASS" if g["pass"] else "FAIL"
        print(f"{status} {g['name']}: value={g['value']:.6g} "
              f"threshold={g['threshold']:.6g}")
    if failed:
        print(f"{len(failed)} gate(s) failed: {', '.join(failed)}",
              file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
