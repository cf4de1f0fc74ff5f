"""Command-line front end: configuration, dispatch, and run persistence.

Run configs are flat INI-style files (sections of typed key = value lines),
hashed byte-for-byte into the run manifest.  Outputs are a JSON record, a
flat CSV (one row per experiment cell), and a manifest, written atomically.
The environment variable NCFREE_SEED overrides the config master seed.
"""

from __future__ import annotations

import argparse
import configparser
import datetime
import hashlib
import json
import os
import sys
import tempfile

import numpy as np

from . import __version__, matio
from .cumulants import ScalarLaw, cumulant_expansion_check
from .dsl import parse as parse_expr
from .dsl import to_text
from .ensembles import EntryLaw, SeedStream, goe, gue, sample, wigner
from .fourier import FourierSum
from .freeprob import FreeWord, free_surrogate_trace, free_word_trace
from .matrices import Context, evaluate, ts
from .verify import (FreenessConfig, Observable, RunRecord,
                     ScalarConcentrationConfig, ThermalizationConfig,
                     TraceConcentrationConfig, run_asymptotic_freeness,
                     run_scalar_concentration, run_thermalization,
                     run_trace_concentration, sd_residual)

CSV_HEADER = "N,y,median_err,q99_err,stderr,samples,seed"

EXIT_PASS = 0
EXIT_ERROR = 1
EXIT_VERDICT_FAIL = 2


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Config loading
# ---------------------------------------------------------------------------

def _get(cp, section: str, key: str, conv, default=None, required=False):
    if not cp.has_option(section, key) or cp.get(section, key).strip() == "":
        if required:
            raise ConfigError(f"missing required key {section}.{key}")
        return default
    raw = cp.get(section, key).strip()
    try:
        return conv(raw)
    except ConfigError:
        raise
    except Exception as exc:
        raise ConfigError(f"bad value for {section}.{key}: {raw!r} ({exc})")


def _int_list(raw: str):
    return tuple(int(tok) for tok in raw.split())


def _float_list(raw: str):
    return tuple(float(tok) for tok in raw.split())


def _law(raw: str) -> EntryLaw:
    raw = raw.strip()
    if raw.startswith("custom:"):
        body = json.loads(raw[len("custom:"):])
        return EntryLaw("custom", tuple(body["atoms"]), tuple(body["weights"]))
    return EntryLaw(raw)


def load_config(path: str) -> configparser.ConfigParser:
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    with open(path) as fh:
        cp.read_file(fh)
    return cp


def _observable_from(cp, d: int, q: int) -> Observable:
    if cp.has_option("observable", "expr"):
        return Observable.from_expr(
            parse_expr(cp.get("observable", "expr"), d, q))
    factors = []
    n = 1
    while cp.has_option("observable", f"p{n}"):
        p = parse_expr(cp.get("observable", f"p{n}"), d, q)
        f_raw = _get(cp, "observable", f"f{n}", str, default="id")
        f = None if f_raw == "id" else FourierSum.from_config(json.loads(f_raw))
        factors.append((f, p))
        n += 1
    if not factors:
        raise ConfigError("missing required key observable.expr")
    return Observable(tuple(factors))


def _ensemble_fields(cp) -> dict:
    return {
        "ensemble_class": _get(cp, "ensemble", "class", str, default="gue"),
        "offdiag_law": _get(cp, "ensemble", "offdiag_law", _law),
        "diag_law": _get(cp, "ensemble", "diag_law", _law),
        "symmetry": _get(cp, "ensemble", "symmetry", str, default="symmetric"),
        "diag_variance": _get(cp, "ensemble", "diag_variance", float),
    }


def _matrix_specs(cp) -> tuple:
    if not cp.has_section("matrices"):
        return ()
    out = []
    n = 1
    while cp.has_option("matrices", f"A{n}"):
        out.append(cp.get("matrices", f"A{n}").strip())
        n += 1
    return tuple(out)


def _master_seed(cp, args) -> int:
    env = os.environ.get("NCFREE_SEED")
    if env is not None:
        return int(env)
    if args is not None and getattr(args, "seed", None) is not None:
        return args.seed
    return _get(cp, "run", "seed", int, default=0)


def _check_divisibility(N_list, n_surrogate, have_A: bool):
    if not have_A:
        return
    for N in N_list:
        if n_surrogate % N:
            raise ConfigError(
                f"surrogate.n_surrogate={n_surrogate} is not divisible by "
                f"N={N} while deterministic matrices are present")


def build_concentration_config(cp, args, scalar: bool):
    d = _get(cp, "observable", "d", int, required=True)
    q = _get(cp, "observable", "q", int, default=0)
    obs = _observable_from(cp, d, q)
    A_specs = _matrix_specs(cp)
    if len(A_specs) < q:
        raise ConfigError(f"observable arity q={q} needs matrices.A1..A{q}")
    N_list = _get(cp, "grid", "N_list", _int_list, required=True)
    n_surr = _get(cp, "surrogate", "n_surrogate", int, default=256)
    _check_divisibility(N_list, n_surr, bool(A_specs))
    common = dict(
        observable=obs,
        **_ensemble_fields(cp),
        N_list=N_list,
        y_list=_get(cp, "grid", "y_list", _float_list),
        samples=_get(cp, "grid", "samples", int, default=200),
        A_specs=A_specs,
        n_surrogate=n_surr,
        surrogate_samples=_get(cp, "surrogate", "samples", int, default=200),
        seed=_master_seed(cp, args),
        reference=_get(cp, "reference", "mode", str, default="auto"),
        quadrature_order=_get(cp, "run", "quadrature_order", int, default=21),
        workers=(args.workers if args and args.workers
                 else _get(cp, "run", "workers", int, default=1)),
    )
    tol = lambda key, conv, dflt: _get(cp, "tolerances", key, conv, default=dflt)
    if scalar:
        return ScalarConcentrationConfig(
            **common,
            x_spec=_get(cp, "vectors", "x", str, default="random_unit"),
            y_spec=_get(cp, "vectors", "y", str, default="random_unit"),
            slope_target=tol("slope_target", float, -0.5),
            slope_tol=tol("slope_tol", float, 0.2),
            y_exponent=tol("y_exponent", float, 2.0),
            bound_slack=tol("bound_slack", float, 2.5),
        )
    return TraceConcentrationConfig(
        **common,
        slope_target=tol("slope_target", float, -1.0),
        slope_tol=tol("slope_tol", float, 0.25),
        y_exponent=tol("y_exponent", float, 2.0),
        bound_slack=tol("bound_slack", float, 2.5),
    )


def build_thermalization_config(cp, args) -> ThermalizationConfig:
    d = _get(cp, "observable", "d", int, required=True)
    return ThermalizationConfig(
        P=parse_expr(_get(cp, "observable", "P", str, required=True), d, 0),
        C_spec=_get(cp, "matrices", "C", str, default="diag_pm1"),
        B_spec=_get(cp, "matrices", "B", str, default="diag_pm1"),
        **_ensemble_fields(cp),
        N_list=_get(cp, "grid", "N_list", _int_list, required=True),
        t_list=_get(cp, "grid", "t_list", _float_list,
                    default=tuple(float(t) for t in range(1, 31))),
        tail_t_list=_get(cp, "grid", "tail_t_list", _float_list,
                         default=(40.0, 50.0, 60.0)),
        samples=_get(cp, "grid", "samples", int, default=16),
        x_spec=_get(cp, "vectors", "x", str, default="random_unit"),
        y_spec=_get(cp, "vectors", "y", str, default="random_unit"),
        seed=_master_seed(cp, args),
        decrease_factor=_get(cp, "tolerances", "decrease_factor", float,
                             default=4.0),
        tail_slack=_get(cp, "tolerances", "tail_slack", float, default=5.0),
        workers=(args.workers if args and args.workers
                 else _get(cp, "run", "workers", int, default=1)),
    )


def build_freeness_config(cp, args) -> FreenessConfig:
    d = _get(cp, "observable", "d", int, required=True)
    A_specs = _matrix_specs(cp)
    if len(A_specs) < 2:
        raise ConfigError("freeness runs need matrices.A1 and matrices.A2")
    pats_raw = _get(cp, "grid", "patterns", str, default="12 121 1212")
    patterns = tuple(tuple(int(ch) for ch in tok) for tok in pats_raw.split())
    beta = _get(cp, "grid", "beta", float, default=0.2)
    return FreenessConfig(
        P=parse_expr(_get(cp, "observable", "P", str, required=True), d, 0),
        A_specs=A_specs,
        beta=beta,
        N_list=_get(cp, "grid", "N_list", _int_list, default=(64, 128, 256)),
        samples=_get(cp, "grid", "samples", int, default=100),
        patterns=patterns,
        **_ensemble_fields(cp),
        seed=_master_seed(cp, args),
        halving_target=_get(cp, "tolerances", "halving_target", float,
                            default=0.5),
        expect_decrease=_get(cp, "tolerances", "expect_decrease",
                             lambda s: s.lower() in ("1", "true", "yes"),
                             default=True),
        workers=(args.workers if args and args.workers
                 else _get(cp, "run", "workers", int, default=1)),
    )


# ---------------------------------------------------------------------------
# Output writing
# ---------------------------------------------------------------------------

def _fmt_csv(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _atomic_write(path: str, text: str):
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path) or ".",
                               prefix=".tmp_", text=True)
    with os.fdopen(fd, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def write_outputs(record: RunRecord, out_dir: str,
                  config_bytes: bytes | None = None) -> dict:
    os.makedirs(out_dir, exist_ok=True)
    rows = [CSV_HEADER]
    rows += [",".join(_fmt_csv(v) for v in row) for row in record.csv_rows()]
    csv_path = os.path.join(out_dir, "cells.csv")
    _atomic_write(csv_path, "\n".join(rows) + "\n")
    rec_path = os.path.join(out_dir, "record.json")
    _atomic_write(rec_path, record.to_json() + "\n")
    manifest = {
        "tool_version": __version__,
        "command": record.command,
        "config_sha256": hashlib.sha256(config_bytes or b"").hexdigest(),
        "config_effective": record.config,
        "master_seed": record.master_seed,
        "started": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "wall_seconds": record.wall_seconds,
        "passed": record.passed,
        "outputs": ["cells.csv", "record.json"],
    }
    man_path = os.path.join(out_dir, "manifest.json")
    _atomic_write(man_path, json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return {"csv": csv_path, "record": rec_path, "manifest": man_path}


def _finish_run(record: RunRecord, args, config_bytes: bytes) -> int:
    out_dir = args.out or "ncfree_out"
    paths = write_outputs(record, out_dir, config_bytes)
    verdict = "PASS" if record.passed else "FAIL"
    print(f"{record.command}: {verdict} "
          f"({len(record.cells)} cells, {record.wall_seconds:.1f}s) "
          f"-> {paths['record']}")
    return EXIT_PASS if record.passed else EXIT_VERDICT_FAIL


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def _load_mats(pairs):
    """--mat NAME=path arguments into an {name: matrix} dict."""
    out = {}
    for item in pairs or []:
        if "=" not in item:
            raise ConfigError(f"--mat expects NAME=path, got {item!r}")
        name, path = item.split("=", 1)
        out[name.strip()] = matio.read_matrix(path.strip())
    return out


def _context_from_args(args, d: int, q: int) -> Context:
    mats = _load_mats(args.mat)
    X = []
    for i in range(1, d + 1):
        if f"X{i}" not in mats:
            raise ConfigError(f"missing --mat X{i}=<file>")
        X.append(mats[f"X{i}"])
    A = []
    for j in range(1, q + 1):
        if f"A{j}" not in mats:
            raise ConfigError(f"missing --mat A{j}=<file>")
        A.append(mats[f"A{j}"])
    return Context(X, A)


def cmd_parse(args) -> int:
    e = parse_expr(args.expr, args.d, args.q)
    print(to_text(e))
    return EXIT_PASS


def cmd_eval(args) -> int:
    e = parse_expr(args.expr, args.d, args.q)
    ctx = _context_from_args(args, args.d, args.q)
    M = evaluate(e, ctx)
    val = ts(M)
    print(f"ts = {val.real:.17e} {val.imag:+.17e}i")
    if args.out:
        matio.write_matrix(args.out, M)
        print(f"matrix -> {args.out}")
    return EXIT_PASS


def cmd_sample(args) -> int:
    if args.ensemble_class == "gue":
        spec = gue(args.N)
    elif args.ensemble_class == "goe":
        spec = goe(args.N)
    else:
        spec = wigner(args.N, EntryLaw(args.law), args.symmetry)
    stream = SeedStream(args.seed, sample=args.sample_index,
                        matrix=args.matrix_index)
    M = sample(spec, stream)
    matio.write_matrix(args.out, M)
    print(f"{args.ensemble_class} N={args.N} seed={args.seed} -> {args.out}")
    return EXIT_PASS


def cmd_sd_check(args) -> int:
    Q = parse_expr(args.expr, args.d, args.q)
    mats = _load_mats(args.mat)
    A = [mats[f"A{j}"] for j in range(1, args.q + 1)] if args.q else None
    res = sd_residual(args.ensemble_class, Q, args.N, args.samples,
                      SeedStream(_seed_of(args)), A=A)
    print(f"sd-check class={res['class']} N={res['N']} "
          f"residual={res['residual']:.3e} stderr={res['stderr']:.3e} "
          f"{'PASS' if res['passed'] else 'FAIL'}")
    return EXIT_PASS if res["passed"] else EXIT_VERDICT_FAIL


def cmd_cumulant_check(args) -> int:
    u = ScalarLaw(EntryLaw(args.law), args.scale)
    v = ScalarLaw(EntryLaw(args.law2), args.scale2) if args.law2 else None
    if args.phi.startswith("fourier:"):
        t, s = (float(tok) for tok in args.phi[len("fourier:"):].split(","))
        phi = ("fourier", t, s)
    else:
        a, b = (int(tok) for tok in args.phi.split(","))
        phi = ("monomial", a, b)
    resid, stderr = cumulant_expansion_check(
        u, v, phi, args.ell, samples=args.samples,
        stream=SeedStream(_seed_of(args)))
    passed = abs(resid) <= 1e-10 + 3 * stderr
    print(f"cumulant-check phi={args.phi} ell={args.ell} "
          f"residual={abs(resid):.3e} stderr={stderr:.3e} "
          f"{'PASS' if passed else 'FAIL'}")
    return EXIT_PASS if passed else EXIT_VERDICT_FAIL


def cmd_free_moment(args) -> int:
    w = FreeWord.from_text(args.word)
    mats = _load_mats(args.mat)
    ordered = [mats[k] for k in sorted(mats, key=lambda n: int(n[1:]))]
    val = free_word_trace(w, ordered)
    print(f"{val.real:.12g}" if abs(val.imag) < 1e-12 else
          f"{val.real:.12g}{val.imag:+.12g}i")
    return EXIT_PASS


def cmd_surrogate(args) -> int:
    e = parse_expr(args.expr, args.d, args.q)
    mats = _load_mats(args.mat)
    A = [mats[f"A{j}"] for j in range(1, args.q + 1)]
    est, err = free_surrogate_trace(e, A, args.n_surrogate, args.samples,
                                    SeedStream(_seed_of(args)))
    print(f"surrogate = {est.real:.10e} {est.imag:+.10e}i "
          f"stderr = {err:.3e} (N_surrogate={args.n_surrogate}, "
          f"samples={args.samples})")
    return EXIT_PASS


def _seed_of(args) -> int:
    env = os.environ.get("NCFREE_SEED")
    if env is not None:
        return int(env)
    return args.seed


def cmd_experiment(args) -> int:
    cp = load_config(args.config)
    with open(args.config, "rb") as fh:
        config_bytes = fh.read()
    if args.command == "concentration-trace":
        record = run_trace_concentration(
            build_concentration_config(cp, args, scalar=False))
    elif args.command == "concentration-scalar":
        record = run_scalar_concentration(
            build_concentration_config(cp, args, scalar=True))
    elif args.command == "thermalize":
        record = run_thermalization(build_thermalization_config(cp, args))
    else:
        record = run_asymptotic_freeness(build_freeness_config(cp, args))
    return _finish_run(record, args, config_bytes)


def cmd_report(args) -> int:
    with open(args.record) as fh:
        rec = json.load(fh)
    print(f"command: {rec['command']}  seed: {rec['master_seed']}  "
          f"wall: {float(rec['wall_seconds']):.1f}s")
    for name, ok in sorted(rec.get("verdicts", {}).items()):
        print(f"  {'PASS' if ok else 'FAIL'}  {name}")
    for name, val in sorted(rec.get("slopes", {}).items()):
        print(f"  {name}: {val}")
    passed = bool(rec.get("passed"))
    print("overall:", "PASS" if passed else "FAIL")
    return EXIT_PASS if passed else EXIT_VERDICT_FAIL


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

def _add_expr_args(p):
    p.add_argument("--expr", required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--q", type=int, default=0)


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="ncfree",
        description="Non-commutative calculus and free-probability "
                    "verification experiments")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", help="canonicalize a DSL expression")
    _add_expr_args(p)
    p.set_defaults(fn=cmd_parse)

    p = sub.add_parser("eval", help="evaluate an expression on matrices")
    _add_expr_args(p)
    p.add_argument("--mat", action="append", metavar="NAME=FILE")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("sample", help="draw one ensemble matrix")
    p.add_argument("--class", dest="ensemble_class", required=True,
                   choices=["gue", "goe", "wigner"])
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--law", default="gaussian")
    p.add_argument("--symmetry", default="symmetric")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sample-index", type=int, default=0)
    p.add_argument("--matrix-index", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_sample)

    p = sub.add_parser("sd-check", help="Schwinger-Dyson residual check")
    p.add_argument("--class", dest="ensemble_class", required=True,
                   choices=["gue", "goe"])
    p.add_argument("--N", type=int, default=64)
    p.add_argument("--samples", type=int, default=2000)
    _add_expr_args(p)
    p.add_argument("--mat", action="append", metavar="NAME=FILE")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_sd_check)

    p = sub.add_parser("cumulant-check", help="cumulant expansion residual")
    p.add_argument("--law", required=True)
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("--law2")
    p.add_argument("--scale2", type=float, default=1.0)
    p.add_argument("--phi", required=True,
                   help="monomial 'a,b' or 'fourier:t,s'")
    p.add_argument("--ell", type=int, default=2)
    p.add_argument("--samples", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_cumulant_check)

    p = sub.add_parser("free-moment", help="exact free-product word trace")
    p.add_argument("--word", required=True)
    p.add_argument("--mat", action="append", metavar="NAME=FILE")
    p.set_defaults(fn=cmd_free_moment)

    p = sub.add_parser("surrogate", help="GUE surrogate of the free trace")
    _add_expr_args(p)
    p.add_argument("--mat", action="append", metavar="NAME=FILE")
    p.add_argument("--n-surrogate", type=int, default=256)
    p.add_argument("--samples", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_surrogate)

    for name in ("concentration-trace", "concentration-scalar",
                 "thermalize", "freeness"):
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", required=True)
        p.add_argument("--out", default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--workers", type=int, default=None)
        p.set_defaults(fn=cmd_experiment)

    p = sub.add_parser("report", help="summarize a run record")
    p.add_argument("--record", required=True)
    p.set_defaults(fn=cmd_report)
    return ap


def dispatch(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
