"""Command-line entry point: ``givenscd {spca,spca-stream,tensor,gmm}``.

Every run writes into ``--out-dir``:

* ``metrics.json``: flat keys, ``schema_version`` 1, sorted, no timings;
* ``trace.tsv``: one row per recorded iteration;
* a result file per command (``loadings.csv``, ``factors.csv``, ``model.json``).

Outputs depend only on the inputs, the flags and ``--seed``, so two runs
with the same arguments produce byte-identical files. Exit codes: 0 success,
2 input or configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import warnings

import numpy as np

from . import formats
from .descent import DescentTrace, StoppingRule
from .errors import GivensError, NumericError
from .flops import FlopCounter
from .gmm import (
    GmmModel,
    cluster_assign,
    estimate_moments,
    fit_from_moments,
    invwishart_model,
    nmi,
    sample_gmm,
    separated_model,
)
from .manifold import random_orthogonal
from .spca import adjusted_explained_variance, default_stop as spca_default_stop, spca_full, sparsity
from .streaming import streaming_spca
from .tensor import (
    decomposition_residual,
    default_stop as tensor_default_stop,
    symmetrize,
    symmetry_defect,
    synth_orthogonal_tensor,
    tensor_decompose,
)

SCHEMA_VERSION = 1
SYMMETRIZE_TOL = 1e-9
EARLY_STOP_PRESET = 0.14

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERIC = 3


class UsageError(GivensError, ValueError):
    pass


# argument types; argparse turns their ValueError into a usage message and exit 2

def _positive_int(s):
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {s}")
    return v


def _nonneg_int(s):
    v = int(s)
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be a non-negative integer, got {s}")
    return v


def _nonneg_float(s):
    v = float(s)
    if not (math.isfinite(v) and v >= 0):
        raise argparse.ArgumentTypeError(f"must be a finite non-negative number, got {s}")
    return v


def _fraction(s):
    v = float(s)
    if not 0.0 < v <= 1.0:
        raise argparse.ArgumentTypeError(f"must lie in (0, 1], got {s}")
    return v


def _float_list(s):
    try:
        vals = [float(x) for x in s.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {s!r}") from None
    if not vals or not all(math.isfinite(v) for v in vals):
        raise argparse.ArgumentTypeError(f"expected finite comma-separated numbers, got {s!r}")
    return vals


# output helpers

def _clean(v):
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, np.ndarray):
        return [_clean(x) for x in v.tolist()]
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, dict):
        return {k: _clean(x) for k, x in v.items()}
    return v


def write_json(path, data: dict) -> None:
    with open(path, "w") as fh:
        json.dump(_clean(data), fh, sort_keys=True, indent=2, allow_nan=False)
        fh.write("\n")


def write_trace(path, trace: DescentTrace, extra: str | None = None) -> None:
    """TSV of iteration, objective, cumulative_flops and one extra column
    (``nnz`` for sparse PCA, ``grad_norm2`` for tensors)."""
    cols = ["iteration", "objective", "cumulative_flops"]
    if extra is not None:
        cols.append(extra)
    extra_vals = trace.array(extra) if extra is not None else None
    with open(path, "w") as fh:
        fh.write("\t".join(cols) + "\n")
        for r in range(len(trace)):
            row = [str(trace.iteration[r]), formats.FLOAT_FMT % trace.objective[r], str(trace.flops[r])]
            if extra_vals is not None:
                v = extra_vals[r]
                row.append(str(int(v)) if extra == "nnz" else formats.FLOAT_FMT % v)
            fh.write("\t".join(row) + "\n")


def _stop_rule(args, default: StoppingRule, tol_field: str) -> StoppingRule:
    stop = StoppingRule(**vars(default))
    if args.max_iters is not None:
        stop.max_iters = args.max_iters
    if args.max_flops is not None:
        stop.max_flops = args.max_flops
    if args.tol is not None:
        setattr(stop, tol_field, args.tol)
    return stop


def _out_dir(args, seed: int) -> str:
    path = args.out_dir if args.repeat == 1 else os.path.join(args.out_dir, f"seed-{seed}")
    os.makedirs(path, exist_ok=True)
    return path


def _loadings_metrics(A, loadings, flops: int) -> dict:
    Z = loadings.Z
    if np.any(Z):
        av = adjusted_explained_variance(A, Z)
        raw, frac, rank = av.raw, av.fraction, av.rank
    else:
        raw, frac, rank = 0.0, 0.0, 0
    return {
        "adjusted_variance": raw,
        "adjusted_variance_fraction": frac,
        "adjusted_rank": rank,
        "sparsity": sparsity(Z),
        "nnz": loadings.nnz,
        "zero_columns": int(loadings.zero_columns.sum()),
        "flops": flops,
    }


# subcommands

def run_spca(args, seed: int) -> dict:
    A = formats.read_matrix(args.input, transpose=args.transpose)
    d, n = A.shape
    if args.components is not None and args.components != n:
        raise UsageError(f"spca solves the full case m = n = {n}; use spca-stream for {args.components} components")
    stop = _stop_rule(args, spca_default_stop(n), "rel_tol")
    fc = FlopCounter()
    loadings, trace, state = spca_full(A, args.gamma, stop=stop, seed=seed, fc=fc)
    out = _out_dir(args, seed)
    formats.write_matrix(os.path.join(out, "loadings.csv"), loadings.Z)
    write_trace(os.path.join(out, "trace.tsv"), trace, "nnz")
    metrics = {
        "command": "spca",
        "seed": seed,
        "d": d,
        "n": n,
        "components": n,
        "gamma": args.gamma,
        "objective": trace.final_value,
        "iterations": trace.iteration[-1],
        "stop_reason": trace.stop_reason,
    }
    metrics.update(_loadings_metrics(A, loadings, fc.count))
    return metrics


def run_spca_stream(args, seed: int) -> dict:
    if args.transpose:
        n = formats.count_rows(args.input)
    else:
        n = formats.read_matrix(args.input).shape[1]
    stream = formats.csv_sample_stream(args.input, transpose=args.transpose)
    max_samples = None
    if args.early_stop_frac is not None:
        # small slack so that e.g. 0.29 * 100 floors to 29, not 28
        max_samples = math.floor(args.early_stop_frac * n + 1e-9)
    fc = FlopCounter()
    loadings, trace, state = streaming_spca(
        stream, args.components, args.gamma, L=args.inner_iters, seed=seed, max_samples=max_samples, fc=fc
    )
    out = _out_dir(args, seed)
    formats.write_matrix(os.path.join(out, "loadings.csv"), loadings.Z)
    write_trace(os.path.join(out, "trace.tsv"), trace, "nnz")
    # adjusted variance over the samples actually consumed would need them in
    # memory; it is reported against the full matrix, which is read here
    # once more only for evaluation
    A = formats.read_matrix(args.input, transpose=args.transpose)
    metrics = {
        "command": "spca-stream",
        "seed": seed,
        "d": stream.dim,
        "n": n,
        "components": state.m,
        "inner_iters": state.L,
        "gamma": args.gamma,
        "early_stop_frac": args.early_stop_frac,
        "samples_consumed": state.consumed,
        "rounds": state.rounds,
        "objective": trace.final_value,
        "iterations": state.steps,
        "stop_reason": trace.stop_reason,
    }
    metrics.update(_loadings_metrics(A, loadings, fc.count))
    return metrics


def _load_tensor(args, seed: int):
    if args.synth is not None:
        lambdas = np.asarray(args.synth, dtype=float)
        if np.any(lambdas <= 0):
            raise UsageError("--synth weights must be positive")
        synth_seed = seed if args.synth_seed is None else args.synth_seed
        V = random_orthogonal(len(lambdas), synth_seed)
        return synth_orthogonal_tensor(lambdas, V), {"synth_lambdas": lambdas, "synth_seed": synth_seed}
    if args.input is None:
        raise UsageError("tensor needs an input file or --synth")
    return formats.read_tensor(args.input), {}


def run_tensor(args, seed: int) -> dict:
    T, info = _load_tensor(args, seed)
    defect = symmetry_defect(T)
    symmetrized = defect > SYMMETRIZE_TOL
    if symmetrized:
        print(f"warning: tensor asymmetry {defect:.3e} exceeds {SYMMETRIZE_TOL:g}; symmetrizing", file=sys.stderr)
    T = symmetrize(T)
    d = T.shape[0]
    stop = _stop_rule(args, tensor_default_stop(d), "grad_tol")
    fc = FlopCounter()
    dec, trace, _ = tensor_decompose(T, stop=stop, seed=seed, fc=fc, mode=args.mode)
    residual = decomposition_residual(T, dec)
    out = _out_dir(args, seed)
    if args.synth is not None:
        formats.write_tensor(os.path.join(out, "tensor.txt"), T)
    formats.write_matrix(os.path.join(out, "factors.csv"), dec.V)
    write_trace(os.path.join(out, "trace.tsv"), trace, "grad_norm2")
    metrics = {
        "command": "tensor",
        "seed": seed,
        "d": d,
        "mode": args.mode,
        "lambdas": dec.lambdas,
        "null": dec.null,
        "residual": residual,
        "symmetry_defect": defect,
        "symmetrized": symmetrized,
        "objective": trace.final_value,
        "iterations": trace.iteration[-1],
        "stop_reason": trace.stop_reason,
        "flops": fc.count,
    }
    metrics.update(info)
    return metrics


def _model_json(model: GmmModel, raw_lambdas=None) -> dict:
    data = {
        "schema_version": SCHEMA_VERSION,
        "k": model.k,
        "dim": model.dim,
        "weights": model.weights,
        "means": model.means.T,
        "sigma2": model.sigma2,
    }
    if raw_lambdas is not None:
        data["raw_lambdas"] = raw_lambdas
    return data


def run_gmm(args, seed: int) -> dict:
    k = args.components
    labels = None
    true_model = None
    if args.input is not None:
        X = formats.read_matrix(args.input, transpose=args.transpose).T
        if args.labels is not None:
            labels = formats.read_matrix(args.labels).reshape(-1)
            if labels.shape[0] != X.shape[0]:
                raise UsageError(f"{args.labels} has {labels.shape[0]} labels for {X.shape[0]} samples")
            labels = labels.astype(int)
    else:
        if args.dim is None or args.n_samples is None:
            raise UsageError("gmm needs --dim and --n-samples, or an input file")
        if k > args.dim:
            raise UsageError(f"need k <= D, got k={k}, D={args.dim}")
        model_seed, sample_seed = np.random.SeedSequence(seed).spawn(2)
        if args.preset == "separated":
            true_model = separated_model(args.dim, k, model_seed)
        else:
            true_model = invwishart_model(args.dim, k, model_seed)
        X, labels = sample_gmm(true_model, args.n_samples, sample_seed)
    n, D = X.shape
    if k > D:
        raise UsageError(f"need k <= D, got k={k}, D={D}")
    if n <= D:
        raise UsageError(f"need more samples than dimensions, got n={n}, D={D}")

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        moments = estimate_moments(X, k)
    result = fit_from_moments(moments, k, seed=seed, mode=args.mode)
    assigned = cluster_assign(X, result.recovery.model)
    out = _out_dir(args, seed)
    write_json(os.path.join(out, "model.json"), _model_json(result.recovery.model, result.recovery.raw_lambdas))
    if true_model is not None:
        write_json(os.path.join(out, "true_model.json"), _model_json(true_model))
    with open(os.path.join(out, "assignments.csv"), "w") as fh:
        fh.write("".join(f"{int(a)}\n" for a in assigned))
    metrics = {
        "command": "gmm",
        "seed": seed,
        "n": n,
        "dim": D,
        "components": k,
        "preset": args.preset if args.input is None else None,
        "mode": args.mode,
        "sigma2_hat": moments.sigma2,
        "moment_warnings": moments.warnings,
        "flops": result.flops,
        "nmi": nmi(labels, assigned) if labels is not None else None,
    }
    return metrics


# parser

def _add_stop_flags(p, tol_help: str):
    p.add_argument("--max-iters", type=_nonneg_int, help="iteration cap")
    p.add_argument("--max-flops", type=_nonneg_int, help="flop cap")
    p.add_argument("--tol", type=_nonneg_float, help=tol_help)


def _add_common(p):
    p.add_argument("--seed", type=int, required=True, help="random seed (required)")
    p.add_argument("--out-dir", default="givenscd-out", help="output directory (default: %(default)s)")
    p.add_argument("--repeat", type=_positive_int, default=1,
                   help="run seeds seed .. seed+N-1 in turn, each into out-dir/seed-<s>")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="givenscd", description="Givens coordinate methods on orthogonal matrices")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("spca", help="sparse PCA, full case m = n")
    p.add_argument("input", help="matrix CSV, rows = features")
    p.add_argument("--gamma", type=_nonneg_float, required=True, help="sparsity penalty")
    p.add_argument("--components", type=_positive_int, help="must equal the sample count if given")
    p.add_argument("--transpose", action="store_true", help="input holds one sample per line")
    _add_stop_flags(p, "relative objective change over a window of m(m-1)/2 iterations")
    _add_common(p)

    p = sub.add_parser("spca-stream", help="streaming sparse PCA with an m-column buffer")
    p.add_argument("input", help="matrix CSV, rows = features (use --transpose to stream lines lazily)")
    p.add_argument("--gamma", type=_nonneg_float, required=True, help="sparsity penalty")
    p.add_argument("--components", type=_positive_int, required=True, help="buffer size m")
    p.add_argument("--inner-iters", type=_nonneg_int, help="rotations per admitted sample (default m)")
    p.add_argument("--early-stop-frac", type=_fraction, nargs="?", const=EARLY_STOP_PRESET,
                   help=f"consume only floor(frac * n) samples; bare flag means {EARLY_STOP_PRESET}")
    p.add_argument("--transpose", action="store_true", help="input holds one sample per line")
    _add_common(p)

    p = sub.add_parser("tensor", help="orthogonal decomposition of a symmetric 3-tensor")
    p.add_argument("input", nargs="?", help="tensor text file")
    p.add_argument("--synth", type=_float_list, metavar="L1,L2,...",
                   help="decompose a synthetic tensor with these weights and random factors")
    p.add_argument("--synth-seed", type=int, help="seed for the synthetic factors (default --seed)")
    p.add_argument("--mode", choices=("naive", "accelerated"), default="accelerated")
    _add_stop_flags(p, "Riemannian gradient norm threshold")
    _add_common(p)

    p = sub.add_parser("gmm", help="spherical GMM from third moments, scored by NMI")
    p.add_argument("input", nargs="?", help="sample matrix CSV, rows = features")
    p.add_argument("--labels", help="true labels, one per line, for NMI")
    p.add_argument("--components", "-k", type=_positive_int, required=True, help="number of components k")
    p.add_argument("--dim", type=_positive_int, help="dimension D of a synthetic model")
    p.add_argument("--n-samples", type=_positive_int, help="samples drawn from the synthetic model")
    p.add_argument("--preset", choices=("separated", "invwishart"), default="separated")
    p.add_argument("--mode", choices=("naive", "accelerated"), default="accelerated")
    p.add_argument("--transpose", action="store_true", help="input holds one sample per line")
    _add_common(p)
    return parser


COMMANDS = {"spca": run_spca, "spca-stream": run_spca_stream, "tensor": run_tensor, "gmm": run_gmm}
SUMMARY_KEYS = ("objective", "residual", "nmi", "flops", "samples_consumed")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    run = COMMANDS[args.command]
    try:
        for r in range(args.repeat):
            seed = args.seed + r
            metrics = run(args, seed)
            metrics["schema_version"] = SCHEMA_VERSION
            write_json(os.path.join(_out_dir(args, seed), "metrics.json"), metrics)
            shown = " ".join(
                f"{key}={formats.FLOAT_FMT % metrics[key] if isinstance(metrics[key], float) else metrics[key]}"
                for key in SUMMARY_KEYS if metrics.get(key) is not None
            )
            print(f"{args.command} seed={seed} {shown}")
    except FileNotFoundError as exc:
        path = exc.filename if exc.filename is not None else str(exc)
        print(f"error: input file not found: {path}", file=sys.stderr)
        return EXIT_INPUT
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
