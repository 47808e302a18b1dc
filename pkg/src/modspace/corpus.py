"""Deterministic test-function corpora.

Every family is synthesized from continuum parameters drawn with a seeded
generator, so the same spec reproduces the same functions bit for bit on
any grid refinement (the parameters, not the samples, carry the identity).

Margins are engineered so that after sampling:
  * the L2 spectral mass outside |xi|_inf <= band_limit is below 1e-15
    of the total (the analytic families use Gaussian tail bounds, the
    bandlimited family is exactly confined), and
  * analytic families decay below 1e-12 of their peak at the box
    boundary, keeping periodization error out of continuum comparisons.
The bandlimited family is periodic by construction and carries a
"periodic" boundary flag instead of a decay requirement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import ParameterError, SynthesisError
from .grid import GridSpec, VectorField, fourier, inverse_fourier

FAMILIES = ("gaussian", "modulated-gaussian", "chirp", "random-bandlimited")

# erfc(z) <= 1e-16 needs z >= 5.86; a Gaussian peak falls below 1e-12
# of its maximum at 7.5 sigma.
_BAND_SIGMAS = 5.9
_BOUNDARY_SIGMAS = 7.5

BAND_GATE = 1e-15
BOUNDARY_GATE = 1e-12


@dataclass(frozen=True)
class CorpusSpec:
    """Recipe for a corpus: families, sizes, band limit, seed.

    band_limit is the largest |xi|_inf the corpus may occupy. overrides
    maps family name -> dict of parameter overrides (used by tests to
    force out-of-band synthesis).
    """

    seed: int
    size: int
    families: tuple
    band_limit: float
    overrides: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "families", tuple(self.families))
        for fam in self.families:
            if fam not in FAMILIES:
                raise ParameterError(f"unknown family {fam!r}")
        if self.size < 1:
            raise ParameterError("size must be >= 1")
        if not self.band_limit > 0:
            raise ParameterError("band_limit must be positive")


def spectral_mass_outside(f: VectorField, ximax: float) -> float:
    """Fraction of spectral L2 mass at |xi|_inf > ximax."""
    g = f.grid
    fhat = fourier(f) if f.side == "physical" else f
    mags = np.sum(np.abs(fhat.flat) ** 2, axis=1)
    out = np.max(np.abs(g.xi_coords()), axis=1) > ximax
    total = float(np.sum(mags))
    if total == 0.0:
        return 0.0
    return float(np.sum(mags[out]) / total)


def boundary_peak_ratio(f: VectorField) -> float:
    """max |f| over the outermost gridpoint shell divided by max |f|."""
    g = f.grid
    mags = np.sqrt(np.sum(np.abs(f.samples) ** 2, axis=-1))
    peak = float(mags.max())
    if peak == 0.0:
        return 0.0
    if g.n == 1:
        edge = max(mags[0], mags[-1])
    else:
        edge = max(mags[0, :].max(), mags[-1, :].max(),
                   mags[:, 0].max(), mags[:, -1].max())
    return float(edge / peak)


def _unit_vector(rng, m: int) -> np.ndarray:
    v = rng.standard_normal(m)
    return v / np.linalg.norm(v)


def _draw_params(family: str, rng, band: float, L: float, overrides: dict):
    """Continuum parameters for one item; grid independent."""
    p = {"amp": float(rng.uniform(0.5, 2.0))}
    if family in ("gaussian", "modulated-gaussian", "chirp"):
        # spatial margin: center stays >= _BOUNDARY_SIGMAS * width from the wall
        if family == "gaussian":
            # width floor keeps _BAND_SIGMAS spectral sigmas inside the band
            w_lo = _BAND_SIGMAS / band
            w_hi = min(L / _BOUNDARY_SIGMAS, w_lo + 1.2)
            if w_hi <= w_lo:
                raise SynthesisError(
                    f"no gaussian width fits band {band} in a box of "
                    f"half-side {L}")
            w = float(rng.uniform(w_lo, w_hi))
            p["width"] = w
        elif family == "modulated-gaussian":
            w = float(rng.uniform(2.8, 3.0))
            p["width"] = w
        else:
            w = float(rng.uniform(2.3, 2.8))
            p["width"] = w
        cmax = max(0.0, L - _BOUNDARY_SIGMAS * w)
        cmax = min(cmax, 2.0)
        p["center"] = float(rng.uniform(-cmax, cmax))
    if family == "modulated-gaussian":
        k0max = max(0.0, band - _BAND_SIGMAS / p["width"]) * 0.999
        p["k0"] = float(rng.uniform(-k0max, k0max))
    if family == "chirp":
        w = p["width"]
        w_req = _BAND_SIGMAS / band
        if w <= w_req:
            bmax = 0.0
        else:
            bmax = math.sqrt((w / w_req) ** 2 - 1.0) / w ** 2
        p["chirp_rate"] = float(rng.uniform(0.3, 0.95) * bmax)
    p.update(overrides)
    return p


def _synth_analytic(family: str, params: dict, grid: GridSpec,
                    direction: np.ndarray) -> np.ndarray:
    x = grid.x_coords()  # (P, n)
    c = params["center"]
    w = params["width"]
    r2 = np.sum((x - c) ** 2, axis=1)
    env = params["amp"] * np.exp(-r2 / (2.0 * w ** 2))
    phase = np.ones(grid.npoints, dtype=np.complex128)
    if family == "modulated-gaussian":
        k0 = params["k0"]
        phase = np.exp(1j * k0 * np.sum(x, axis=1))
    elif family == "chirp":
        phase = np.exp(0.5j * params["chirp_rate"] * r2)
    flat = (env * phase)[:, None] * direction[None, :]
    return flat.reshape(grid.spatial_shape + (grid.m,))


def _synth_bandlimited(params: dict, grid: GridSpec) -> np.ndarray:
    """Trigonometric polynomial from lattice coefficients.

    The coefficient table is indexed by the integer dual-lattice offsets
    |j|_inf <= floor(band / dxi), which depend on L and the band only,
    never on N; refining N reproduces the same continuum function.
    """
    coeffs = params["coeffs"]  # (2J+1,)*n + (m,) complex
    J = (coeffs.shape[0] - 1) // 2
    spec = np.zeros(grid.spatial_shape + (grid.m,), dtype=np.complex128)
    mid = grid.N // 2
    if grid.n == 1:
        spec[mid - J: mid + J + 1, :] = coeffs
    else:
        spec[mid - J: mid + J + 1, mid - J: mid + J + 1, :] = coeffs
    f = inverse_fourier(VectorField(grid, spec, side="frequency"))
    return f.samples


def _draw_bandlimited_coeffs(rng, band: float, L: float, n: int, m: int):
    dxi = math.pi / L
    J = int(math.floor(band / dxi))
    if J < 1:
        raise SynthesisError(
            f"band_limit {band} resolves no lattice mode at L={L}")
    shape = (2 * J + 1,) * n
    ax = np.arange(-J, J + 1) * dxi
    if n == 1:
        r2 = ax ** 2
    else:
        X, Y = np.meshgrid(ax, ax, indexing="ij")
        r2 = X ** 2 + Y ** 2
    envelope = np.exp(-r2 / (2.0 * (band / 2.5) ** 2))
    re = rng.standard_normal(shape + (m,))
    im = rng.standard_normal(shape + (m,))
    return (re + 1j * im) * envelope[..., None]


def generate_corpus(spec: CorpusSpec, grid: GridSpec):
    """Synthesize the corpus on a grid.

    Returns (fields, manifest): a list of VectorField and a list of
    per-item parameter dicts. Items failing the post-synthesis band or
    boundary gate are narrowed and retried; persistent failure raises
    SynthesisError rather than shipping a contaminated corpus.
    """
    if spec.band_limit > grid.nyquist:
        raise ParameterError(
            f"band_limit {spec.band_limit} exceeds nyquist {grid.nyquist:.3f}")
    fields, manifest = [], []
    for fam_idx, family in enumerate(spec.families):
        rng = np.random.default_rng([spec.seed, fam_idx])
        for item in range(spec.size):
            direction = _unit_vector(rng, grid.m)
            if family == "random-bandlimited":
                params = {
                    "coeffs": _draw_bandlimited_coeffs(
                        rng, spec.band_limit, grid.L, grid.n, grid.m),
                    "amp": 1.0,
                }
                params.update(spec.overrides.get(family, {}))
            else:
                params = _draw_params(family, rng, spec.band_limit, grid.L,
                                      spec.overrides.get(family, {}))
            f, used = _validated_item(family, params, grid, direction,
                                      spec.band_limit)
            fields.append(f)
            entry = {"family": family, "index": item,
                     "boundary": "periodic" if family == "random-bandlimited"
                     else "decaying"}
            entry.update({k: v for k, v in used.items() if k != "coeffs"})
            manifest.append(entry)
    return fields, manifest


def _validated_item(family, params, grid, direction, band_limit, retries=3):
    band = None
    for attempt in range(retries + 1):
        if family == "random-bandlimited":
            samples = _synth_bandlimited(params, grid)
        else:
            samples = _synth_analytic(family, params, grid, direction)
        f = VectorField(grid, samples)
        ok = True
        if family != "random-bandlimited":
            band = spectral_mass_outside(f, band_limit)
            if band > BAND_GATE:
                ok = False
            if boundary_peak_ratio(f) > BOUNDARY_GATE:
                ok = False
        if ok:
            return f, params
        params = _narrow(family, params)
    raise SynthesisError(
        f"{family} item failed band/boundary validation after {retries} retries "
        f"(last out-of-band mass {band:.3e})")


def _narrow(family, params):
    out = dict(params)
    if "k0" in out:
        out["k0"] *= 0.6
    if "chirp_rate" in out:
        out["chirp_rate"] *= 0.6
    if "center" in out and isinstance(out["center"], float):
        out["center"] *= 0.6
    return out
