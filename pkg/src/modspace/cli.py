"""Command line front end.

    modspace <cmd> --config <path> [--out <dir>] [--threads N] [--seed S]

Commands: norm, ap, doubling, reduce, verify <id>, report, selftest.
Exit codes are a contract: 0 pass, 1 experiment failed, 2 invalid
configuration, 3 refused hypothesis, 4 numerical breakdown.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time

import numpy as np

from .cells import write_operator_set
from .config import (EXPERIMENT_IDS, ExperimentConfig, experiment_params,
                     load_config)
from .corpus import CorpusSpec, generate_corpus
from .errors import (ConfigError, ContractViolation, DataError,
                     HypothesisError, ModspaceError, NumericalError,
                     ParameterError, ResolutionError)
from .grid import read_field
from .norms import modulation_norm, stft_modulation_norm
from .weights import (doubling_exponent, dyadic_family, make_weight,
                      matrix_ap_characteristic, scalar_ap_characteristic)
from .windows import build_window_family
from . import verify as verify_mod

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2
EXIT_HYPOTHESIS = 3
EXIT_NUMERICAL = 4


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="modspace",
        description="matrix-weighted modulation norms: compute, reduce, "
                    "and empirically certify")
    sub = parser.add_subparsers(dest="cmd", required=True)
    for name, helptext in [
            ("norm", "compute modulation norms for a config"),
            ("ap", "Muckenhoupt characteristic of the config weight"),
            ("doubling", "doubling constant and exponent of the weight"),
            ("reduce", "build and write reducing operators"),
            ("verify", "run one certification experiment"),
            ("report", "merge experiment reports into a summary"),
            ("selftest", "fast invariant battery on the default setup"),
    ]:
        sp = sub.add_parser(name, help=helptext)
        if name == "verify":
            sp.add_argument("experiment", nargs="?", default="",
                            choices=list(EXPERIMENT_IDS) + [""],
                            help="experiment id (default: from config)")
        sp.add_argument("--config", default=None, help="JSON config path")
        sp.add_argument("--out", default=None, help="output directory")
        sp.add_argument("--threads", type=int, default=None,
                        help="parallelism cap (default: MODSPACE_THREADS "
                             "or all cores)")
        sp.add_argument("--seed", type=int, default=None,
                        help="override the corpus seed")
    args = parser.parse_args(argv)
    try:
        return _dispatch(args)
    except ConfigError as exc:
        print("config error:", file=sys.stderr)
        for path, msg in exc.diagnostics or [("", str(exc))]:
            loc = f"  {path}: " if path else "  "
            print(loc + msg, file=sys.stderr)
        return EXIT_CONFIG
    except HypothesisError as exc:
        print(f"hypothesis refused: {exc}", file=sys.stderr)
        return EXIT_HYPOTHESIS
    except (NumericalError, ResolutionError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (DataError, ContractViolation, ParameterError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ModspaceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


def _dispatch(args) -> int:
    _apply_threads(args.threads)
    if args.cmd == "selftest":
        return _cmd_selftest()
    if args.cmd == "report":
        return _cmd_report(args.out or ".")
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.corpus_spec = CorpusSpec(
            seed=args.seed, size=cfg.corpus_spec.size,
            families=cfg.corpus_spec.families,
            band_limit=cfg.corpus_spec.band_limit)
        cfg.params["seed"] = args.seed
    out_dir = args.out or cfg.out or "."
    if args.cmd == "norm":
        return _cmd_norm(cfg, out_dir)
    if args.cmd == "ap":
        return _cmd_ap(cfg)
    if args.cmd == "doubling":
        return _cmd_doubling(cfg)
    if args.cmd == "reduce":
        return _cmd_reduce(cfg, out_dir)
    if args.cmd == "verify":
        return _cmd_verify(cfg, args.experiment or cfg.experiment, out_dir)
    raise AssertionError(args.cmd)


def _apply_threads(threads) -> None:
    if threads is None:
        env = os.environ.get("MODSPACE_THREADS", "")
        threads = int(env) if env.isdigit() else None
    if threads is None or threads < 1:
        return
    try:
        import numba
        numba.set_num_threads(threads)
    except Exception:
        pass


def _weight_or_none(cfg: ExperimentConfig, grid=None):
    spec = cfg.weight_spec
    if spec is None or spec.kind == "identity":
        return None
    return make_weight(spec, grid or cfg.grid)


def _cmd_norm(cfg: ExperimentConfig, out_dir: str) -> int:
    prm = cfg.params
    route = prm.get("route", "band")
    s, p, q = prm["s"], prm["p"], prm["q"]
    mode = prm["bracket_mode"]
    K = cfg.window["K"]

    def one(f, grid):
        weight = _weight_or_none(cfg, grid)
        if route == "stft":
            return stft_modulation_norm(f, p, q, s, K, weight)
        fam = build_window_family(grid, K, cfg.window["profile"])
        return modulation_norm(f, fam, p, q, s, weight, mode)

    if cfg.field_path:
        f = read_field(cfg.field_path)
        value = one(f, f.grid)
        print(f"{value:.17g}")
        return EXIT_OK
    fields, manifest = generate_corpus(cfg.corpus_spec, cfg.grid)
    rows = []
    for f, meta in zip(fields, manifest):
        rows.append({"family": meta["family"], "index": meta["index"],
                     "norm": one(f, cfg.grid)})
    payload = {"route": route, "s": s, "p": p,
               "q": "inf" if q == math.inf else q, "values": rows}
    text = json.dumps(payload, sort_keys=True, indent=2)
    print(text)
    if out_dir != ".":
        _write_text(os.path.join(out_dir, "norms.json"), text)
    return EXIT_OK


def _cmd_ap(cfg: ExperimentConfig) -> int:
    weight = make_weight(cfg.weight_spec, cfg.grid)
    fam = dyadic_family(cfg.grid)
    p = cfg.params["p"]
    if cfg.grid.m == 1:
        w = weight.scalar_profile()
        value = scalar_ap_characteristic(w, p, fam)
    else:
        value = matrix_ap_characteristic(weight, p, fam)
    print(f"{value:.17g}")
    return EXIT_OK


def _cmd_doubling(cfg: ExperimentConfig) -> int:
    weight = make_weight(cfg.weight_spec, cfg.grid)
    fam = dyadic_family(cfg.grid)
    p = cfg.params["p"]
    C, beta, info = doubling_exponent(weight, p, fam)
    worst = {"cube_start": info["cube_start"], "cube_npts": info["cube_npts"],
             "direction": [[c.real, c.imag] for c in info["direction"]]}
    print(json.dumps({"C": C, "beta": beta, "worst": worst}, sort_keys=True))
    return EXIT_OK


def _cmd_reduce(cfg: ExperimentConfig, out_dir: str) -> int:
    from .cells import cell_partition, reducing_operators
    prm = cfg.params
    k = prm.get("k") or (0,) * cfg.grid.n
    k = tuple(int(c) for c in np.atleast_1d(k))
    weight = make_weight(cfg.weight_spec, cfg.grid)
    part = cell_partition(cfg.grid, k, a=prm["a"],
                          r_convention=prm["r_convention"],
                          bracket_mode=prm["bracket_mode"])
    ops = reducing_operators(weight, part, prm["p"],
                             method=prm["reducing_method"],
                             seed=prm["seed"])
    os.makedirs(out_dir, exist_ok=True)
    tag = "_".join(str(c) for c in k)
    path = os.path.join(out_dir, f"operators_k{tag}.bin")
    write_operator_set(ops, path)
    print(json.dumps({"path": path, "ncells": part.ncells,
                      "side": part.side, "p": ops.p, "method": ops.method},
                     sort_keys=True))
    return EXIT_OK


def _cmd_verify(cfg: ExperimentConfig, experiment: str, out_dir: str) -> int:
    if not experiment:
        raise ConfigError([("experiment",
                            "no experiment id (argument or config)")])
    if experiment not in EXPERIMENT_IDS:
        raise ConfigError([("experiment", f"unknown id {experiment!r}")])
    prm = experiment_params(cfg)
    spec = cfg.corpus_spec
    if experiment == "window-independence":
        famA = build_window_family(cfg.grid, cfg.window["K"],
                                   cfg.window["profile"])
        other = "raised-cosine" if cfg.window["profile"] == "smooth-bump" \
            else "smooth-bump"
        famB = build_window_family(cfg.grid, cfg.window["K"],
                                   cfg.params.get("profile_b", other))
        report = verify_mod.verify_window_independence(spec, famA, famB, prm)
    elif experiment == "stft-equivalence":
        report = verify_mod.verify_stft_equivalence(spec, prm)
    elif experiment == "averaging-equivalence":
        from .weights import WeightSpec
        wspec = cfg.weight_spec or WeightSpec(kind="identity")
        report = verify_mod.verify_averaging_equivalence(
            spec, wspec, prm, method=prm["reducing_method"])
    elif experiment == "decomposition":
        report = verify_mod.verify_decomposition(spec, prm)
    elif experiment in ("embeddings", "embedding-eps"):
        report = verify_mod.verify_embeddings(
            spec, prm, prm["eps"], prm["q0"], prm["q1"])
    elif experiment == "duality":
        spec_g = CorpusSpec(seed=spec.seed + 1000, size=spec.size,
                            families=spec.families,
                            band_limit=spec.band_limit)
        report = verify_mod.verify_duality(spec, spec_g, prm)
    else:
        raise AssertionError(experiment)
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, f"{report['id']}.json")
    _write_text(path, json.dumps(report, sort_keys=True, indent=2))
    verdict = "PASS" if report["pass"] else "FAIL"
    print(f"{report['id']}: {verdict}  C=[{report['C_min']:.6g}, "
          f"{report['C_max']:.6g}]  report={path}")
    return EXIT_OK if report["pass"] else EXIT_FAIL


def _cmd_report(out_dir: str) -> int:
    rows = []
    for name in sorted(os.listdir(out_dir)):
        if not name.endswith(".json") or name == "summary.json":
            continue
        try:
            with open(os.path.join(out_dir, name)) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError):
            continue
        if not isinstance(data, dict) or "id" not in data \
                or "pass" not in data:
            continue
        rows.append(data)
    if not rows:
        print(f"no experiment reports under {out_dir}", file=sys.stderr)
        return EXIT_FAIL
    width = max(len(r["id"]) for r in rows)
    print(f"{'experiment':<{width}}  {'C_min':>12}  {'C_max':>12}  "
          f"{'runtime':>8}  result")
    all_pass = True
    for r in rows:
        all_pass &= bool(r["pass"])
        cmin = r.get("C_min", float("nan"))
        cmax = r.get("C_max", float("nan"))
        print(f"{r['id']:<{width}}  {cmin:>12.6g}  {cmax:>12.6g}  "
              f"{r.get('runtime_s', 0):>8.2f}  "
              f"{'PASS' if r['pass'] else 'FAIL'}")
    summary = {
        "reports": [{"id": r["id"], "pass": bool(r["pass"])} for r in rows],
        "all_pass": bool(all_pass),
    }
    _write_text(os.path.join(out_dir, "summary.json"),
                json.dumps(summary, sort_keys=True, indent=2))
    return EXIT_OK if all_pass else EXIT_FAIL


def _write_text(path: str, text: str) -> None:
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    with open(path, "w") as fh:
        fh.write(text + "\n")


def _cmd_selftest() -> int:
    """Fast battery of the always-true invariants on the default setup."""
    t_start = time.time()
    checks = []

    def check(name, fn):
        try:
            fn()
            checks.append((name, True, ""))
        except Exception as exc:
            checks.append((name, False, f"{type(exc).__name__}: {exc}"))

    from .grid import (GridSpec, VectorField, bilinear_pairing, fourier,
                       inverse_fourier, parseval_defect, weighted_lp_norm)
    from .norms import conjugate_exponent, sequence_combine
    from .windows import (bracket, box_operator, build_window_family,
                          lambda_set, validate_window_family)
    from .verify import smoothing_constant

    grid = GridSpec(n=1, m=1, N=256, L=8 * math.pi)
    rng = np.random.default_rng(3)

    def t_bracket():
        assert abs(bracket(np.array([1.0, 1.0]), "l1") - math.sqrt(5)) < 1e-15
        assert abs(bracket(np.array([1.0, 1.0]), "l2") - math.sqrt(3)) < 1e-15

    def t_conjugate():
        table = [(2.0, 2.0), (1.5, 3.0), (4.0, 4.0 / 3.0), (1.0, 1.0),
                 (math.inf, 1.0), (0.5, 1.0)]
        for q, want in table:
            assert abs(conjugate_exponent(q) - want) < 1e-15, q

    def t_lambda():
        assert len(lambda_set(1)) == 5
        assert len(lambda_set(2)) == 49

    fam = build_window_family(grid, 6, "smooth-bump")

    def t_window():
        rep = validate_window_family(fam)
        assert rep["pass"], rep
        assert rep["c"] >= 1.0 / 3.0
        assert rep["partition_defect"] <= 1e-12

    def t_parseval():
        z = rng.standard_normal((256, 1)) + 1j * rng.standard_normal((256, 1))
        f = VectorField(grid, z)
        assert parseval_defect(f) <= 1e-12
        back = inverse_fourier(fourier(f))
        assert np.max(np.abs(back.samples - f.samples)) <= 1e-12

    def t_gauss_selfdual():
        g12 = GridSpec(n=1, m=1, N=256, L=12.0)
        x = g12.x_coords()[:, 0]
        xi = g12.xi_coords()[:, 0]
        f = VectorField(g12, np.exp(-x * x / 2)[:, None].astype(complex))
        fhat = fourier(f)
        assert np.max(np.abs(fhat.flat[:, 0] - np.exp(-xi * xi / 2))) <= 1e-10

    def t_zero_norm():
        z = VectorField(grid, np.zeros((256, 1), dtype=complex))
        assert modulation_norm(z, fam, 2.0, 2.0, 0.0) == 0.0
        assert stft_modulation_norm(z, 2.0, 2.0, 0.0, 6) == 0.0
        assert weighted_lp_norm(z, 2.0) == 0.0

    def t_homogeneity():
        x = grid.x_coords()[:, 0]
        z = (np.exp(-x * x / 8) * (1.0 + 0.5 * np.exp(1.3j * x)))[:, None]
        f = VectorField(grid, z.astype(complex))
        n1 = modulation_norm(f, fam, 2.0, 1.5, 1.0)
        n2 = modulation_norm(VectorField(grid, 2 * f.samples),
                             fam, 2.0, 1.5, 1.0)
        assert abs(n2 - 2 * n1) <= 1e-12 * n1

    def t_adjoint():
        za = rng.standard_normal((256, 1)) + 1j * rng.standard_normal((256, 1))
        zb = rng.standard_normal((256, 1)) + 1j * rng.standard_normal((256, 1))
        fa, fb = VectorField(grid, za), VectorField(grid, zb)
        lhs = bilinear_pairing(box_operator(fa, (2,), fam), fb)
        rhs = bilinear_pairing(fa, box_operator(fb, (2,), fam, adjoint=True))
        assert abs(lhs - rhs) <= 1e-12 * abs(lhs)

    def t_averaged_identity():
        from .cells import cell_partition, reducing_operators, \
            averaged_lp_norm
        from .weights import MatrixWeight
        eye = MatrixWeight(grid, np.broadcast_to(
            np.eye(1, dtype=complex), (256, 1, 1)).copy())
        part = cell_partition(grid, (0,), r_convention="unit")
        ops = reducing_operators(eye, part, 2.0)
        z = rng.standard_normal((256, 1)) + 0j
        f = VectorField(grid, z)
        assert abs(averaged_lp_norm(f, ops)
                   - weighted_lp_norm(f, 2.0)) <= 1e-12

    def t_doubling_identity():
        from .weights import MatrixWeight
        eye = MatrixWeight(grid, np.broadcast_to(
            np.eye(1, dtype=complex), (256, 1, 1)).copy())
        C, beta, _ = doubling_exponent(eye, 2.0, dyadic_family(grid))
        assert C == 2.0 ** grid.n and beta == grid.n, (C, beta)

    def t_divergence_refused():
        try:
            smoothing_constant(1, 1.0)
        except HypothesisError:
            return
        raise AssertionError("divergent series accepted")

    def t_seq_combine_inf():
        vals = {(0,): 3.0, (1,): 4.0}
        assert sequence_combine(vals, 0.0, math.inf) == 4.0
        assert abs(sequence_combine(vals, 0.0, 2.0) - 5.0) < 1e-14

    def t_backends():
        from . import kernels
        if not kernels.HAS_NUMBA:
            return
        mats = rng.standard_normal((4, 2, 2)) + 1j * rng.standard_normal(
            (4, 2, 2))
        idx = rng.integers(0, 4, size=64)
        vecs = rng.standard_normal((64, 2)) + 1j * rng.standard_normal((64, 2))
        prev = kernels.get_backend()
        try:
            kernels.set_backend("numba")
            a = kernels.cell_apply(mats, idx, vecs)
            kernels.set_backend("numpy")
            b = kernels.cell_apply(mats, idx, vecs)
        finally:
            kernels.set_backend(prev)
        assert np.allclose(a, b, rtol=1e-13, atol=1e-13)

    for name, fn in [
            ("bracket values", t_bracket),
            ("conjugate exponent table", t_conjugate),
            ("overlap set sizes", t_lambda),
            ("window family clauses", t_window),
            ("transform roundtrip and energy", t_parseval),
            ("gaussian transform fixed point", t_gauss_selfdual),
            ("zero field norms", t_zero_norm),
            ("norm homogeneity", t_homogeneity),
            ("band projector adjoint", t_adjoint),
            ("averaged norm, identity weight", t_averaged_identity),
            ("identity weight doubling", t_doubling_identity),
            ("divergent series refusal", t_divergence_refused),
            ("sequence combine", t_seq_combine_inf),
            ("kernel backends agree", t_backends),
    ]:
        check(name, fn)

    failed = [c for c in checks if not c[1]]
    for name, ok, detail in checks:
        mark = "ok " if ok else "FAIL"
        extra = f"  {detail}" if detail else ""
        print(f"{mark} {name}{extra}")
    print(f"{len(checks) - len(failed)}/{len(checks)} checks passed "
          f"in {time.time() - t_start:.1f} s")
    return EXIT_OK if not failed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
