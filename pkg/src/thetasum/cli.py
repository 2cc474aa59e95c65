"""Command-line front end: ``thetasum <subcommand> [options]``.

Exit codes: 0 success, 2 guard violation or bad input, 3 numerical
breakdown, 4 verification failure.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import math
import sys
import time

import numpy as np

from .errors import GuardViolation, NumericalError, ThetaSumError

EXIT_OK, EXIT_GUARD, EXIT_NUMERIC, EXIT_VERIFY = 0, 2, 3, 4

CONFIG_DEFAULTS = {
    "tol": 1e-9,
    "L": 8,
    "entry_bound": 1,
    "J_max": 14,
    "A": 4.0,
    "psi_multiplier": 1.0,
    "psi_epsilon": 0.01,
    "psi_C": 1.0,
    "tail_tol": 1e-14,
    "box_guard": 1e8,
    "kappa": 0.5,
}


def load_config(path):
    """``key = value`` lines; ``#`` starts a comment."""
    cfg = dict(CONFIG_DEFAULTS)
    if not path:
        return cfg
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise GuardViolation(f"{path}:{lineno}: expected key = value")
            key, val = (s.strip() for s in line.split("=", 1))
            if key not in CONFIG_DEFAULTS:
                raise GuardViolation(f"{path}:{lineno}: unknown key {key!r}")
            cfg[key] = int(float(val)) if isinstance(CONFIG_DEFAULTS[key], int) else float(val)
    return cfg


def read_json(path):
    if path in (None, "-"):
        return json.load(sys.stdin)
    with open(path) as fh:
        return json.load(fh)


def sp_from_json(obj) -> np.ndarray:
    return np.block([[_matrix(obj["A"]), _matrix(obj["B"])], [_matrix(obj["C"]), _matrix(obj["D"])]])


def sp_to_json(g) -> dict:
    from .symplectic import blocks

    A, B, C, D = blocks(np.asarray(g))
    return {"n": A.shape[0], "A": A.tolist(), "B": B.tolist(), "C": C.tolist(), "D": D.tolist()}


def _matrix(obj):
    from .linalg import matrix_from_json

    if isinstance(obj, dict):
        return matrix_from_json(obj)
    return np.atleast_2d(np.asarray(obj, dtype=float))


def query_from_json(obj):
    from .theta import ThetaQuery

    return ThetaQuery(float(obj["M"]), _matrix(obj["X"]), obj["x"], obj["y"])


def emit(args, payload, rows=None, kind="table", meta=None):
    from .experiments import write_table

    if rows is not None and args.format == "csv":
        text = write_table(rows, "csv", kind, meta)
    elif rows is not None:
        text = write_table(rows, "json", kind, meta)
    else:
        text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# Subcommands.


def cmd_reduce(args, cfg):
    from .reduction import siegel_reduce

    g = sp_from_json(read_json(args.input))
    r = siegel_reduce(g, L=int(cfg["L"]), entry_bound=int(cfg["entry_bound"]))
    emit(args, r.to_json())
    return EXIT_OK


def cmd_iwasawa(args, cfg):
    from .linalg import complex_to_json, matrix_to_json
    from .symplectic import iwasawa

    c = iwasawa(sp_from_json(read_json(args.input)))
    emit(args, {"X": matrix_to_json(c.X), "Y": matrix_to_json(c.Y), "Q": complex_to_json(c.Q),
                "U": matrix_to_json(c.U), "V": c.V.tolist(), "detV": c.detV})
    return EXIT_OK


def cmd_theta(args, cfg):
    from .theta import (BoxSpec, box_ranges, jacobi_point, theta_auto_terms, theta_direct_box,
                        theta_direct_schwartz_terms, theta_fast)
    from .weil import GaussianPacket

    obj = read_json(args.input)
    q = query_from_json(obj["query"])
    mode = obj.get("mode", "direct")
    t0 = time.perf_counter()
    scale = q.M ** (q.n / 2)
    value = None
    if "box" in obj:
        if mode != "direct":
            raise GuardViolation("box cutoffs only support mode 'direct'")
        box = BoxSpec(obj["box"]["b"] if isinstance(obj["box"], dict) else obj["box"])
        value = theta_direct_box(q, box, guard=cfg["box_guard"])
        lo, hi = box_ranges(q, box)
        terms = int(np.prod(np.maximum(hi - lo + 1, 0)))
    else:
        f = GaussianPacket.from_json(obj["packet"]) if "packet" in obj else GaussianPacket.standard(q.n)
        if mode == "direct":
            value, terms = theta_direct_schwartz_terms(q, f, cfg["tail_tol"])
        elif mode == "auto":
            h, g = jacobi_point(q)
            v, terms = theta_auto_terms(h, g, f, cfg["tail_tol"])
            value = scale * v
        elif mode == "fast":
            h, g = jacobi_point(q)
            r = theta_fast(h, g, f, cfg["tail_tol"], L=int(cfg["L"]), entry_bound=int(cfg["entry_bound"]))
            modulus, terms = scale * r.modulus, r.terms
        else:
            raise GuardViolation(f"unknown mode {mode!r}")
    out = {"terms_used": int(terms), "seconds": round(time.perf_counter() - t0, 6)}
    if value is not None:
        out.update(value_re=value.real, value_im=value.imag, modulus=abs(value))
    else:
        out.update(value_re=None, value_im=None, modulus=modulus)
    emit(args, out)
    return EXIT_OK


def cmd_dyadic(args, cfg):
    from .theta import BoxSpec, dyadic_height_bound, dyadic_indices

    obj = read_json(args.input)
    q = query_from_json(obj["query"])
    box = BoxSpec(obj["box"]["b"] if isinstance(obj["box"], dict) else obj["box"])
    psi_C = float(obj.get("psi_C", cfg["psi_C"]))
    bound = dyadic_height_bound(q, box, psi_C, L=int(cfg["L"]), entry_bound=int(cfg["entry_bound"]))
    emit(args, {"bound": bound, "j_count": len(dyadic_indices(q.M, box.b)), "subsets": 2 ** q.n})
    return EXIT_OK


def cmd_haar(args, cfg):
    from .sampling import haar_sample_region

    s = haar_sample_region(args.n, args.N, args.seed, kappa=args.kappa)
    rows = []
    iu = np.triu_indices(args.n)
    for i in range(len(s)):
        r = {"index": i, "in_domain": bool(s.in_domain[i]), "weight": float(s.weight[i])}
        for a, b in zip(*iu):
            r[f"x{a + 1}{b + 1}"] = float(s.X[i, a, b])
        for a, b in zip(*np.triu_indices(args.n, 1)):
            r[f"u{a + 1}{b + 1}"] = float(s.U[i, a, b])
        for a in range(args.n):
            r[f"v{a + 1}"] = float(s.v[i, a])
        rows.append(r)
    emit(args, None, rows, "haar-sample", {"n": args.n, "N": args.N, "seed": args.seed, "kappa": args.kappa,
                                           "in_domain_fraction": float(np.mean(s.in_domain))})
    return EXIT_OK


def cmd_volume_tail(args, cfg):
    from .experiments import volume_tail

    grid = None
    if args.R_grid:
        grid = [float(v) for v in args.R_grid.split(",")]
    r = volume_tail(args.n, args.N, grid, args.seed, kappa=cfg["kappa"])
    emit(args, None, r.rows, "volume-tail", {"n": r.n, "N": r.N, "seed": args.seed, "slope": r.slope,
                                             "window": list(r.window), "expected": -(r.n + 1) / 2,
                                             "in_domain_fraction": r.in_domain_fraction})
    return EXIT_OK


def cmd_flow(args, cfg):
    from .experiments import flow_excursion

    if args.input:
        g = sp_from_json(read_json(args.input))
    else:
        g = np.eye(2 * args.n)
    r = flow_excursion(g, args.s_max, args.ds, L=int(cfg["L"]), entry_bound=int(cfg["entry_bound"]))
    emit(args, None, r["rows"], "flow", {"c1": r["c1"], "c2": r["c2"], "s_max": args.s_max, "ds": args.ds})
    return EXIT_OK


def cmd_sweep(args, cfg):
    from .experiments import PsiConfig, SweepConfig, bound_sweep

    psi = PsiConfig(cfg["psi_multiplier"], cfg["psi_epsilon"])
    exps = tuple(range(args.M_min_exp, args.M_max_exp + 1))
    sc = SweepConfig(n=args.n, X_count=args.X_count, M_exponents=exps, xy_samples=args.xy_samples,
                     dyadic=not args.no_dyadic, smooth=not args.no_smooth, psi=psi, timing=args.timing)
    r = bound_sweep(sc, args.seed)
    s = r["summary"]
    meta = {"n": args.n, "seed": args.seed, "fraction_within": s["fraction_within"],
            "control_slopes": s["control_slopes"], "ratio_max_overall": s["ratio_max_overall"],
            "dyadic_violations": s["dyadic_violations"]}
    emit(args, None, r["rows"], "sweep", meta)
    return EXIT_OK


def cmd_verify(args, cfg):
    from .theta import mutation
    from .verify import report_json, verify

    ctx = mutation(args.mutate) if args.mutate else contextlib.nullcontext()
    with ctx:
        rep = verify(args.suite, args.seed)
    text = report_json(rep)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK if rep["passed"] else EXIT_VERIFY


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value file with tolerances and guards")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=int, default=1,
                        help="accepted for compatibility; evaluation is sequential and deterministic")
    common.add_argument("--out", help="write output here instead of stdout")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--mutate", choices=("theta-phase-sign",), help="inject a known defect (verify only)")

    p = argparse.ArgumentParser(prog="thetasum", description="Theta sums, reduction theory and experiments.")
    sub = p.add_subparsers(dest="command", required=True)

    for name, helptext in (("reduce", "reduce an SpMatrix to the Siegel domain"),
                           ("iwasawa", "Iwasawa coordinates of an SpMatrix")):
        sp = sub.add_parser(name, parents=[common], help=helptext)
        sp.add_argument("input", nargs="?", default="-", help="SpMatrix JSON file, '-' for stdin")
    sp = sub.add_parser("theta", parents=[common], help="evaluate a theta sum")
    sp.add_argument("input", nargs="?", default="-")
    sp = sub.add_parser("dyadic-bound", parents=[common], help="dyadic height bound for a box cutoff")
    sp.add_argument("input", nargs="?", default="-")

    sp = sub.add_parser("haar-sample", parents=[common], help="Haar samples of the domain superset")
    sp.add_argument("--n", type=int, default=1)
    sp.add_argument("--N", type=int, default=1000)
    sp.add_argument("--kappa", type=float, default=1.0)

    sp = sub.add_parser("volume-tail", parents=[common], help="Monte Carlo tail of the height")
    sp.add_argument("--n", type=int, default=1)
    sp.add_argument("--N", type=int, default=100000)
    sp.add_argument("--R-grid", dest="R_grid", help="comma-separated thresholds")

    sp = sub.add_parser("flow", parents=[common], help="heights along the diagonal flow")
    sp.add_argument("input", nargs="?", default=None, help="SpMatrix JSON (default identity)")
    sp.add_argument("--n", type=int, default=1)
    sp.add_argument("--s-max", dest="s_max", type=float, default=6.0)
    sp.add_argument("--ds", type=float, default=0.25)

    sp = sub.add_parser("sweep", parents=[common], help="growth sweep of box theta sums")
    sp.add_argument("--n", type=int, default=1)
    sp.add_argument("--X-count", dest="X_count", type=int, default=50)
    sp.add_argument("--xy-samples", dest="xy_samples", type=int, default=32)
    sp.add_argument("--M-min-exp", dest="M_min_exp", type=int, default=4)
    sp.add_argument("--M-max-exp", dest="M_max_exp", type=int, default=12)
    sp.add_argument("--no-dyadic", action="store_true")
    sp.add_argument("--no-smooth", action="store_true")
    sp.add_argument("--timing", action="store_true", help="fill the wallclock column (breaks byte-identity)")

    sp = sub.add_parser("verify", parents=[common], help="run invariant suites")
    sp.add_argument("--suite", default="all",
                    choices=("linalg", "symplectic", "jacobi", "reduction", "weil", "theta", "cutoff", "all"))
    return p


COMMANDS = {
    "reduce": cmd_reduce, "iwasawa": cmd_iwasawa, "theta": cmd_theta, "dyadic-bound": cmd_dyadic,
    "haar-sample": cmd_haar, "volume-tail": cmd_volume_tail, "flow": cmd_flow, "sweep": cmd_sweep,
    "verify": cmd_verify,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.mutate and args.command != "verify":
            raise GuardViolation("--mutate is only meaningful for verify")
        cfg = load_config(args.config)
        return COMMANDS[args.command](args, cfg)
    except GuardViolation as exc:
        print(f"thetasum: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except NumericalError as exc:
        print(f"thetasum: numerical breakdown: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ThetaSumError as exc:
        print(f"thetasum: {exc}", file=sys.stderr)
        return getattr(exc, "exit_code", EXIT_GUARD)
    except (KeyError, ValueError, json.JSONDecodeError, OSError) as exc:
        print(f"thetasum: bad input: {exc}", file=sys.stderr)
        return EXIT_GUARD


if __name__ == "__main__":
    sys.exit(main())
