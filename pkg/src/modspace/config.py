"""Configuration loading and cross-field validation.

A config is one JSON object with blocks grid / window / weight / corpus
/ params plus an experiment id and output directory. Every block is
optional; defaults give a small 1D setup that runs in seconds. All
violations are collected and reported together as field-path messages,
so one load attempt surfaces every problem at once.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .corpus import FAMILIES, CorpusSpec
from .errors import ConfigError
from .grid import GridSpec
from .weights import WEIGHT_KINDS, WeightSpec
from .windows import PROFILES

EXPERIMENT_IDS = (
    "window-independence",
    "stft-equivalence",
    "averaging-equivalence",
    "decomposition",
    "embeddings",
    "embedding-eps",
    "duality",
)

_GRID_DEFAULTS = {"n": 1, "m": 1, "N": 256, "L": 8.0 * math.pi}
_WINDOW_DEFAULTS = {"K": 6, "profile": "smooth-bump"}
_CORPUS_DEFAULTS = {"seed": 7, "size": 5, "families": list(FAMILIES),
                    "band_limit": 3.0}
_PARAM_DEFAULTS = {
    "s": 0.0, "p": 2.0, "q": 2.0,
    "eps": 2.0, "q0": 1.0, "q1": 1.0,
    "a": None, "r_convention": "unit", "bracket_mode": "l1",
    "reducing_method": "auto", "K_seq": 2, "pairs": 8, "seed": 7,
    "beta": None, "k": None,
}


@dataclass
class ExperimentConfig:
    grid: GridSpec
    window: dict
    weight_spec: WeightSpec
    corpus_spec: CorpusSpec
    params: dict
    experiment: str = ""
    out: str = ""
    field_path: str = ""
    threads: int = 0
    raw: dict = field(default_factory=dict)


def _check(diag, cond, path, msg):
    if not cond:
        diag.append((path, msg))
    return cond


def load_config(path=None, overrides: dict = None) -> ExperimentConfig:
    """Load and validate a config file; None means all defaults."""
    if path is None:
        raw = {}
    else:
        try:
            with open(path) as fh:
                raw = json.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}")
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}")
    if overrides:
        raw = _merge(raw, overrides)
    return validate_config(raw)


def _merge(base: dict, extra: dict) -> dict:
    out = dict(base)
    for key, val in extra.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = val
    return out


def validate_config(raw: dict) -> ExperimentConfig:
    diag = []
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    known = {"grid", "window", "weight", "corpus", "params", "experiment",
             "out", "field", "threads"}
    for key in raw:
        _check(diag, key in known, key, "unknown top-level block")

    g = {**_GRID_DEFAULTS, **raw.get("grid", {})}
    _check(diag, g["n"] in (1, 2), "grid.n", "must be 1 or 2")
    _check(diag, isinstance(g["m"], int) and g["m"] >= 1, "grid.m",
           "must be a positive integer")
    is_pow2 = isinstance(g["N"], int) and g["N"] >= 8 \
        and (g["N"] & (g["N"] - 1)) == 0
    _check(diag, is_pow2, "grid.N", "must be a power of two (and >= 8)")
    _check(diag, isinstance(g["L"], (int, float)) and g["L"] > 0, "grid.L",
           "must be a positive number")

    w = {**_WINDOW_DEFAULTS, **raw.get("window", {})}
    _check(diag, isinstance(w["K"], int) and w["K"] >= 1, "window.K",
           "must be a positive integer")
    _check(diag, w["profile"] in PROFILES, "window.profile",
           f"must be one of {sorted(PROFILES)}")

    ws_raw = raw.get("weight", {})
    kind = ws_raw.get("kind", "identity")
    weight_spec = None
    if _check(diag, kind in WEIGHT_KINDS, "weight.kind",
              f"must be one of {sorted(WEIGHT_KINDS)}"):
        try:
            weight_spec = WeightSpec(
                kind=kind,
                alpha=tuple(_aslist(ws_raw.get("alpha", ()))),
                bracket=bool(ws_raw.get("bracket", False)),
                angle0=float(ws_raw.get("angle0", 0.0)),
                omega=tuple(_aslist(ws_raw.get("omega", ()))),
                delta=float(ws_raw.get("delta", 0.0)),
            )
        except Exception as exc:
            diag.append(("weight", str(exc)))

    c = {**_CORPUS_DEFAULTS, **raw.get("corpus", {})}
    _check(diag, isinstance(c["seed"], int) and c["seed"] >= 0,
           "corpus.seed", "must be a nonnegative integer")
    _check(diag, isinstance(c["size"], int) and c["size"] >= 1,
           "corpus.size", "must be a positive integer")
    fams = tuple(c["families"])
    for fam in fams:
        _check(diag, fam in FAMILIES, "corpus.families",
               f"unknown family {fam!r}")
    _check(diag, isinstance(c["band_limit"], (int, float))
           and c["band_limit"] > 0, "corpus.band_limit",
           "must be a positive number")

    prm = {**_PARAM_DEFAULTS, **raw.get("params", {})}
    _check(diag, isinstance(prm["p"], (int, float)) and prm["p"] >= 1,
           "params.p", "must be a number >= 1")
    qv = math.inf if prm["q"] in ("inf", "Infinity") else prm["q"]
    if _check(diag, isinstance(qv, (int, float)) and qv > 0, "params.q",
              "must be a positive number or \"inf\""):
        prm["q"] = float(qv)
    _check(diag, prm["r_convention"] in ("unit", "paper-scale"),
           "params.r_convention", "must be \"unit\" or \"paper-scale\"")
    _check(diag, prm["bracket_mode"] in ("l1", "l2"),
           "params.bracket_mode", "must be \"l1\" or \"l2\"")
    _check(diag, prm["reducing_method"] in ("auto", "moment", "mvee"),
           "params.reducing_method", "must be auto, moment, or mvee")

    experiment = raw.get("experiment", "")
    if experiment:
        _check(diag, experiment in EXPERIMENT_IDS, "experiment",
               f"must be one of {EXPERIMENT_IDS}")

    # cross-field safety, checked only once the blocks are well formed
    if not diag:
        grid = GridSpec(n=g["n"], m=g["m"], N=g["N"], L=float(g["L"]))
        sqn = math.sqrt(grid.n)
        ximax = grid.nyquist
        need = w["K"] + sqn + 2.0
        _check(diag, ximax >= need, "window.K",
               f"violates the band safety inequality Ximax >= K + sqrt(n)"
               f" + 2: Ximax = N*pi/(2L) = {ximax:.3f} < {need:.3f}")
        _check(diag, c["band_limit"] <= w["K"] - sqn, "corpus.band_limit",
               f"must stay within the reliable band K - sqrt(n) = "
               f"{w['K'] - sqn:.3f}")
        a_eff = prm["a"] if prm["a"] is not None else sqn
        r_top = 1.0
        if prm["r_convention"] == "paper-scale":
            if prm["bracket_mode"] == "l1":
                r_top = math.sqrt(1.0 + (grid.n * w["K"]) ** 2)
            else:
                r_top = math.sqrt(1.0 + grid.n * w["K"] ** 2)
        min_side = 1.0 / (a_eff * r_top)
        _check(diag, min_side >= 2.0 * grid.dx, "grid.N",
               f"cell population: the smallest cell side "
               f"{min_side:.4f} at |k| = K covers fewer than 2 gridpoints "
               f"per axis (dx = {grid.dx:.4f})")
    if diag:
        raise ConfigError(diag)

    corpus_spec = CorpusSpec(seed=c["seed"], size=c["size"], families=fams,
                             band_limit=float(c["band_limit"]))
    return ExperimentConfig(
        grid=grid,
        window={"K": w["K"], "profile": w["profile"]},
        weight_spec=weight_spec,
        corpus_spec=corpus_spec,
        params=prm,
        experiment=experiment,
        out=raw.get("out", ""),
        field_path=raw.get("field", ""),
        threads=int(raw.get("threads", 0)),
        raw=raw,
    )


def _aslist(v):
    if v is None:
        return ()
    if isinstance(v, (list, tuple)):
        return v
    return (v,)


def experiment_params(cfg: ExperimentConfig) -> dict:
    """The params dict the experiment functions expect."""
    out = dict(cfg.params)
    out["grid"] = cfg.grid
    out["K"] = cfg.window["K"]
    out["profile"] = cfg.window["profile"]
    if cfg.weight_spec is not None and cfg.weight_spec.kind != "identity":
        out["weight_spec"] = cfg.weight_spec
    return out
