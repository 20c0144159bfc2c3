"""Command-line front end.

Usage:
    spca synth --out DIR [--n-per-cluster 100] [--seed 0] [--jitter 0.02] [--radius 0.5:2.0]
    spca fit --data X.csv --rank R --out-dir DIR [--mu M] [--lambda L] [--iters K] [--tol T]
             [--seed S] [--init svd_of_data|random_orthonormal] [--format csv|coo]
             [--tfidf] [--normalize]
    spca cluster-eval --components V.csv --k K --truth truth.txt --out-dir DIR
             [--restarts 10] [--seed 0]
    spca trace-rate --trace trace.csv [--out rate.json]

Any command that writes a directory also accepts ``--plot`` to render PNG
figures next to its CSV output. Exit codes: 0 success, 1 runtime or numeric
failure, 2 usage error. Set ``SOURCE_DATE_EPOCH`` to pin the manifest
timestamp.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import os
import sys
from pathlib import Path
from typing import Any

import numpy as np

from spca import __version__
from spca.cluster import kmeans_unit_sphere, score
from spca.data import (
    SyntheticSpec,
    gen_two_wedges,
    load_coo,
    load_dense_csv,
    load_labels,
    normalize_columns,
    save_dense_csv,
    save_labels,
    tfidf,
)
from spca.errors import SpcaError
from spca.model import lipschitz_constant
from spca.solver import (
    AUTO_STEP_FACTOR,
    INITS,
    SolverConfig,
    estimate_rate,
    fit,
    read_trace_csv,
    write_trace_csv,
)

LIPSCHITZ_WARNING = "step size below Lipschitz bound"


class _Failure(Exception):
    """Runtime failure reported with exit code 1."""


def _timestamp() -> str:
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch is not None:
        when = _dt.datetime.fromtimestamp(int(epoch), tz=_dt.timezone.utc)
    else:
        when = _dt.datetime.now(tz=_dt.timezone.utc).replace(microsecond=0)
    return when.isoformat()


def _write_json(path: Path, obj: Any) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _write_manifest(out_dir: Path, args, inputs: dict, outputs: dict, extra: dict | None = None):
    config = {k: v for k, v in sorted(vars(args).items()) if k not in ("func",)}
    manifest = {
        "command": args.command,
        "config": config,
        "inputs": inputs,
        "seed": getattr(args, "seed", None),
        "timestamp": _timestamp(),
        "outputs": outputs,
        "software_version": __version__,
    }
    if extra:
        manifest.update(extra)
    _write_json(out_dir / "manifest.json", manifest)


def _radius(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(t) for t in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LOW:HIGH, got {text!r}") from None
    if not 0 < lo <= hi:
        raise argparse.ArgumentTypeError(f"need 0 < LOW <= HIGH, got {text!r}")
    return lo, hi


def _int_at_least(lo: int):
    def parse(text: str) -> int:
        try:
            val = int(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
        if val < lo:
            raise argparse.ArgumentTypeError(f"must be >= {lo}, got {val}")
        return val

    return parse


def _positive_float(text: str) -> float:
    try:
        val = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not (val > 0 and np.isfinite(val)):
        raise argparse.ArgumentTypeError(f"must be positive and finite, got {text!r}")
    return val


def _nonneg_float(text: str) -> float:
    try:
        val = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not val >= 0:
        raise argparse.ArgumentTypeError(f"must be nonnegative, got {text!r}")
    return val


def cmd_synth(args, parser) -> int:
    spec = SyntheticSpec(
        n_per_cluster=args.n_per_cluster,
        radius_range=args.radius,
        jitter=args.jitter,
        seed=args.seed,
    )
    ds = gen_two_wedges(spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    outputs = {"data": "data.csv", "truth": "truth.txt"}
    save_dense_csv(out / "data.csv", ds.x)
    save_labels(out / "truth.txt", ds.truth)
    if args.plot:
        from spca.plotting import plot_points3d

        plot_points3d(ds.x.x, ds.truth, out / "data.png", title="synthetic data")
        outputs["figure"] = "data.png"
    _write_manifest(out, args, {}, outputs, {"meta": ds.meta})
    print(f"wrote {ds.x.m}x{ds.x.n} data and {len(ds.truth)} labels to {out}")
    return 0


def cmd_fit(args, parser) -> int:
    loader = load_coo if args.format == "coo" else load_dense_csv
    x = loader(args.data)
    if args.tfidf:
        x = tfidf(x)
    if args.normalize:
        x = normalize_columns(x)
    m, n = x.shape
    if args.rank > min(m, n):
        parser.error(f"--rank {args.rank} exceeds min(m, n) = {min(m, n)} for {m}x{n} data")

    l_c = lipschitz_constant(x, args.rank).l_c
    if args.mu is None and args.lam is None:
        cfg = SolverConfig(rank=args.rank, max_iters=args.iters, stop_tol=args.tol,
                           seed=args.seed, init=args.init)
    else:
        mu = args.mu if args.mu is not None else AUTO_STEP_FACTOR * l_c
        lam = args.lam if args.lam is not None else AUTO_STEP_FACTOR * l_c
        for name, val in (("mu", mu), ("lambda", lam)):
            if val <= l_c:
                print(f"warning: {LIPSCHITZ_WARNING}: {name}={val:.6g} <= L_c={l_c:.6g}; "
                      "descent is not guaranteed", file=sys.stderr)
        cfg = SolverConfig(rank=args.rank, mu=mu, lam=lam, max_iters=args.iters,
                           stop_tol=args.tol, seed=args.seed, init=args.init, step_rule="fixed")

    res = fit(x, cfg)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_dense_csv(out / "U.csv", res.u)
    save_dense_csv(out / "V.csv", res.v)
    write_trace_csv(out / "trace.csv", res.trace)
    outputs = {"U": "U.csv", "V": "V.csv", "trace": "trace.csv"}
    if args.plot:
        from spca.plotting import plot_components, plot_convergence

        plot_convergence(res.trace, out / "convergence.png")
        plot_components(res.v, np.zeros(n, dtype=int), out / "components.png",
                        title="component columns")
        outputs["figures"] = ["convergence.png", "components.png"]
    last = res.trace[-1]
    summary = {
        "converged": res.converged,
        "iters_run": res.iters_run,
        "objective": last.f,
        "l_c": res.l_c,
        "mu": res.mu,
        "lambda": res.lam,
        "final_du": last.du,
        "final_dv": last.dv,
        "degenerate_u_steps": len(res.degenerate_u_steps),
        "degenerate_v_columns": len(res.degenerate_v_columns),
    }
    _write_manifest(out, args, {"data": str(args.data)}, outputs, {"result": summary})
    status = "converged" if res.converged else "stopped at iteration cap"
    print(f"{status} after {res.iters_run} iterations: f={last.f:.10g} "
          f"du={last.du:.3e} dv={last.dv:.3e} L_c={res.l_c:.6g}")
    return 0


def cmd_cluster_eval(args, parser) -> int:
    v = load_dense_csv(args.components).x
    truth = load_labels(args.truth)
    if len(truth) != v.shape[1]:
        raise _Failure(f"{args.truth} has {len(truth)} labels but {args.components} "
                       f"has {v.shape[1]} columns")
    if args.k > v.shape[1]:
        parser.error(f"--k {args.k} exceeds the number of points ({v.shape[1]})")
    labels = kmeans_unit_sphere(v, args.k, restarts=args.restarts, seed=args.seed)
    scores = score(labels, truth)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_labels(out / "labels.txt", labels)
    _write_json(out / "scores.json", {"acc": scores.acc, "nmi": scores.nmi})
    outputs = {"labels": "labels.txt", "scores": "scores.json"}
    if args.plot:
        from spca.plotting import plot_components

        plot_components(v, labels, out / "clusters.png", title="k-means on components")
        outputs["figure"] = "clusters.png"
    _write_manifest(out, args, {"components": str(args.components), "truth": str(args.truth)},
                    outputs)
    print(f"acc={scores.acc:.6f} nmi={scores.nmi:.6f}")
    return 0


def cmd_trace_rate(args, parser) -> int:
    trace = read_trace_csv(args.trace)
    try:
        est = estimate_rate(trace)
    except ValueError as exc:
        raise _Failure(str(exc)) from None
    payload = {"regime": est.regime, "parameter": est.parameter, "records": len(trace)}
    text = json.dumps(payload, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spca", description="Spherical PCA fitting, clustering and diagnostics."
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate the two-wedge synthetic dataset")
    p.add_argument("--n-per-cluster", type=_int_at_least(1), default=100)
    p.add_argument("--seed", type=_int_at_least(0), default=0)
    p.add_argument("--jitter", type=_nonneg_float, default=0.02)
    p.add_argument("--radius", type=_radius, default=(0.5, 2.0), metavar="LOW:HIGH")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--plot", action="store_true", help="also write data.png")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("fit", help="fit U (orthonormal) and V (unit columns) to a data matrix")
    p.add_argument("--data", required=True, help="data file, columns are observations")
    p.add_argument("--format", choices=("csv", "coo"), default="csv")
    p.add_argument("--tfidf", action="store_true", help="apply tf-idf weighting first")
    p.add_argument("--normalize", action="store_true", help="scale data columns to unit norm")
    p.add_argument("--rank", type=_int_at_least(1), required=True)
    p.add_argument("--mu", type=_positive_float, default=None,
                   help="U-step proximal weight (default 1.1 L_c)")
    p.add_argument("--lambda", dest="lam", type=_positive_float, default=None,
                   help="V-step proximal weight (default 1.1 L_c)")
    p.add_argument("--iters", type=_int_at_least(1), default=5000)
    p.add_argument("--tol", type=_nonneg_float, default=1e-7,
                   help="stop once ||W(k) - W(k-1)||_F falls below this")
    p.add_argument("--seed", type=_int_at_least(0), default=0)
    p.add_argument("--init", choices=INITS, default="svd_of_data")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--plot", action="store_true",
                   help="also write convergence.png and components.png")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("cluster-eval", help="k-means on component columns, scored against truth")
    p.add_argument("--components", required=True, help="V.csv from fit")
    p.add_argument("--k", type=_int_at_least(2), required=True)
    p.add_argument("--truth", required=True, help="label file, one integer per line")
    p.add_argument("--restarts", type=_int_at_least(1), default=10)
    p.add_argument("--seed", type=_int_at_least(0), default=0)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--plot", action="store_true", help="also write clusters.png")
    p.set_defaults(func=cmd_cluster_eval)

    p = sub.add_parser("trace-rate", help="empirical convergence regime of a trace.csv")
    p.add_argument("--trace", required=True)
    p.add_argument("--out", default=None, help="also write the JSON result here")
    p.set_defaults(func=cmd_trace_rate)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, parser)
    except (SpcaError, _Failure, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
