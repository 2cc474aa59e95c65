"""Experiments: volume tails, flow excursions, growth sweeps, cusp decay, envelopes.

Every experiment is a pure function of its arguments and seed. Tables are
lists of dicts; :func:`write_table` turns them into CSV (with a versioned
header comment) or JSON.
"""

from __future__ import annotations

import io
import json
import math
import time
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DimensionMismatch, GuardViolation, InsufficientSamples, TooLarge
from .jacobi import GammaTildeElem, HeisenbergElem, JacobiElem, gamma_tilde_apply
from .reduction import height, siegel_reduce
from .sampling import chunk_rng, haar_sample_region
from .symplectic import IwasawaCoords, assemble, flow, g_MX
from .theta import (BoxSpec, ThetaQuery, _theta_sum, cusp_main_term, cusp_remainder_log, dyadic_height_bound,
                    fold_heisenberg, jacobi_point, theta_data, theta_direct_box)
from .weil import GaussianPacket

CSV_VERSION = 1


# Output.


def write_table(rows: list, fmt: str = "csv", kind: str = "table", meta: dict | None = None) -> str:
    if fmt == "json":
        return json.dumps({"kind": kind, "version": CSV_VERSION, "meta": meta or {}, "rows": rows},
                          indent=2, sort_keys=True) + "\n"
    if fmt != "csv":
        raise ValueError(f"unknown format {fmt!r}")
    buf = io.StringIO()
    buf.write(f"# thetasum {kind} v{CSV_VERSION}\n")
    if meta:
        buf.write("# " + json.dumps(meta, sort_keys=True) + "\n")
    if rows:
        cols = list(rows[0])
        buf.write(",".join(cols) + "\n")
        for r in rows:
            buf.write(",".join(_fmt(r[c]) for c in cols) + "\n")
    return buf.getvalue()


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def fit_slope(x, y) -> float:
    return float(np.polyfit(np.asarray(x, float), np.asarray(y, float), 1)[0])


# Psi.


@dataclass(frozen=True)
class PsiConfig:
    """``psi(t) = multiplier * max(1, t)^{1/(2n+2) + epsilon}``."""

    multiplier: float = 1.0
    epsilon: float = 0.01

    def __post_init__(self):
        if self.multiplier < 1:
            raise GuardViolation("psi multiplier must be at least 1")
        if self.epsilon < 0:
            raise GuardViolation("psi epsilon must be nonnegative")

    def exponent(self, n: int) -> float:
        return 1.0 / (2 * n + 2) + self.epsilon

    def __call__(self, t, n: int):
        if self.epsilon == 0:
            warnings.warn("psi with epsilon = 0 makes sum psi(k)^(-(2n+2)) diverge", stacklevel=2)
        return self.multiplier * np.maximum(1.0, t) ** self.exponent(n)

    def series_partial(self, n: int, K: int = 10 ** 6) -> float:
        k = np.arange(1, K + 1, dtype=float)
        return float(np.sum((self.multiplier * k ** self.exponent(n)) ** (-(2 * n + 2))))


# Volume tail.


@dataclass
class TailResult:
    n: int
    N: int
    R: list
    mu: list
    counts: list
    slope: float
    window: tuple
    in_domain_fraction: float
    rows: list = field(default_factory=list)


DEFAULT_TAIL_KAPPA = 0.5


def default_R_grid() -> np.ndarray:
    return np.logspace(1.5, 3.5, 21)


def _central(R):
    R = np.asarray(R, dtype=float)
    lo = math.sqrt(R[0] * R[-1]) / math.sqrt(10.0)
    hi = lo * 10.0
    sel = (R >= lo * (1 - 1e-12)) & (R <= hi * (1 + 1e-12))
    return sel, (lo, hi)


def _tail_slope(d, w, R):
    order = np.argsort(d)
    ds, ws = d[order], w[order]
    tail = np.cumsum(ws[::-1])[::-1]
    idx = np.searchsorted(ds, R, side="left")
    mu = np.where(idx < len(ds), tail[np.minimum(idx, len(ds) - 1)], 0.0)
    sel, _ = _central(R)
    if np.any(mu[sel] <= 0):
        return mu, float("nan")
    return mu, fit_slope(np.log(R[sel]), np.log(mu[sel]))


def volume_tail(n: int, N: int, R_grid=None, seed: int = 0, kappa: float = DEFAULT_TAIL_KAPPA,
                min_count: int = 100) -> TailResult:
    if n not in (1, 2, 3):
        raise DimensionMismatch("volume tail supports n in {1, 2, 3}")
    R = default_R_grid() if R_grid is None else np.sort(np.asarray(R_grid, dtype=float))
    s = haar_sample_region(n, N, seed, kappa=kappa)
    d = s.detV
    w = s.weight * s.in_domain
    top = int(np.sum(s.in_domain & (d >= R[-1])))
    if top < min_count:
        raise InsufficientSamples(f"only {top} samples exceed R = {R[-1]:.4g} (need {min_count})")
    mu, slope = _tail_slope(d, w, R)
    counts = [int(np.sum(s.in_domain & (d >= r))) for r in R]
    rows = [{"R": float(r), "mu": float(m), "count": c} for r, m, c in zip(R, mu, counts)]
    return TailResult(n, N, R.tolist(), mu.tolist(), counts, slope, _central(R)[1],
                      float(np.mean(s.in_domain)), rows)


def tail_bootstrap_se(n: int, N: int, R_grid=None, seed: int = 0, B: int = 200,
                      kappa: float = DEFAULT_TAIL_KAPPA) -> float:
    """Bootstrap standard error of the volume-tail slope."""
    R = default_R_grid() if R_grid is None else np.sort(np.asarray(R_grid, dtype=float))
    s = haar_sample_region(n, N, seed, kappa=kappa)
    d = s.detV
    w = s.weight * s.in_domain
    rng = chunk_rng(seed, 1 << 30)
    slopes = []
    for _ in range(B):
        i = rng.integers(0, N, size=N)
        slopes.append(_tail_slope(d[i], w[i], R)[1])
    return float(np.nanstd(slopes, ddof=1))


# Flow excursions.


def flow_excursion(g, s_max: float = 6.0, ds: float = 0.25, **reduce_kw) -> dict:
    if s_max > 12:
        raise GuardViolation("s_max must be at most 12")
    if ds < 0.05:
        raise GuardViolation("ds must be at least 0.05")
    g = np.asarray(g, dtype=float)
    n = g.shape[0] // 2
    s = np.round(np.arange(0.0, s_max + ds / 2, ds), 12)
    D = []
    last = None
    for si in s:
        r = siegel_reduce(g @ flow(n, si), gamma_start=last, **reduce_kw)
        last = r.gamma0
        D.append(r.detV)
    D = np.array(D)
    lo, hi = np.empty(len(s)), np.empty(len(s))
    for i in range(len(s)):
        near = np.abs(s - s[i]) <= 1 + 1e-12
        ratio = D[near] / D[i]
        lo[i], hi[i] = ratio.min(), ratio.max()
    rows = [{"s": float(a), "D": float(b), "ratio_min": float(c), "ratio_max": float(e)}
            for a, b, c, e in zip(s, D, lo, hi)]
    return {"rows": rows, "c1": float(lo.min()), "c2": float(hi.max())}


# Growth sweep.


@dataclass(frozen=True)
class SweepConfig:
    n: int = 1
    X_count: int = 50
    M_exponents: tuple = tuple(range(4, 13))
    xy_samples: int = 32
    boxes: tuple = ()
    controls: bool = True
    dyadic: bool = True
    smooth: bool = True
    psi: PsiConfig = PsiConfig()
    timing: bool = False

    def box_list(self):
        if self.boxes:
            return [np.atleast_1d(np.asarray(b, dtype=float)) for b in self.boxes]
        n = self.n
        return [np.ones(n), np.full(n, 0.5), np.linspace(0.8, 0.6, n)]


def sweep_ensemble(cfg: SweepConfig, seed: int):
    """``[(label, control, X, xy_list)]``: control rows first, then seeded X."""
    n = cfg.n
    out = []
    if cfg.controls:
        rng = chunk_rng(seed, 1 << 20)
        out.append(("control-0", True, np.zeros((n, n)), _xy(rng, n, cfg.xy_samples)))
    for i in range(cfg.X_count):
        rng = chunk_rng(seed, i)
        A = rng.uniform(-0.5, 0.5, size=(n, n))
        X = np.triu(A) + np.triu(A, 1).T
        out.append((f"X{i}", False, X, _xy(rng, n, cfg.xy_samples)))
    return out


def _xy(rng, n, K):
    pts = [(np.zeros(n), np.zeros(n))]
    for _ in range(K):
        pts.append((rng.uniform(0, 1, n), rng.uniform(0, 1, n)))
    return pts


def _smooth_sup(M, X, xy, f, red):
    """``sup M^{n/2} |Theta_f|`` over the (x, y) list, reducing ``g_{M,X}`` once."""
    n = f.n
    e0 = GammaTildeElem(np.zeros(n), np.zeros(n), 0.0, red.gamma0)
    best = 0.0
    for x, y in xy:
        h, g = jacobi_point(ThetaQuery(M, X, x, y))
        j = fold_heisenberg(gamma_tilde_apply(e0, JacobiElem(h, g)))
        v, _ = _theta_sum(theta_data(j.h, j.g, f), 1e-14)
        best = max(best, abs(v))
    return M ** (n / 2) * best


def bound_sweep(cfg: SweepConfig, seed: int = 0) -> dict:
    n = cfg.n
    if n > 2:
        raise GuardViolation("box sweeps support n <= 2")
    Ms = [2.0 ** k for k in cfg.M_exponents]
    if max(Ms) > 2 ** 12:
        raise TooLarge("M must be at most 2^12")
    boxes = cfg.box_list()
    f = GaussianPacket.standard(n)
    rows = []
    for label, control, X, xy in sweep_ensemble(cfg, seed):
        cache = {}
        last = None
        for M in Ms:
            t0 = time.perf_counter()
            red = siegel_reduce(g_MX(M, X), gamma_start=last)
            last = red.gamma0
            smooth = _smooth_sup(M, X, xy, f, red) if cfg.smooth else float("nan")
            for bi, b in enumerate(boxes):
                box = BoxSpec(b)
                vals = [abs(theta_direct_box(ThetaQuery(M, X, x, y), box)) for x, y in xy]
                sup = float(max(vals))
                dy = dyadic_height_bound(ThetaQuery(M, X, xy[0][0], xy[0][1]), box, cache=cache) if cfg.dyadic \
                    else float("nan")
                bound = float(M ** (n / 2) * cfg.psi(math.log(M), n))
                rows.append({
                    "n": n, "seed": seed, "X_label": label, "control": control, "box": bi, "M": M,
                    "theta_sup": sup, "smooth_sup": smooth, "bound": bound, "ratio": sup / bound,
                    "D_height": red.detV, "dyadic_bound": dy,
                    "dyadic_ok": bool(sup <= dy) if cfg.dyadic else True,
                    "wallclock": round(time.perf_counter() - t0, 6) if cfg.timing else 0.0,
                })
    return {"rows": rows, "summary": sweep_summary(rows, n)}


def sweep_summary(rows: list, n: int, tol: float = 0.05) -> dict:
    by_x = {}
    for r in rows:
        by_x.setdefault(r["X_label"], []).append(r)
    slopes, control_slopes, ratio_max = {}, {}, {}
    for label, rs in by_x.items():
        Ms = sorted({r["M"] for r in rs})
        sup = [max(r["theta_sup"] for r in rs if r["M"] == M) for M in Ms]
        slope = fit_slope(np.log(Ms), np.log(sup))
        if rs[0]["control"]:
            control_slopes[label] = slope
        else:
            slopes[label] = slope
            ratio_max[label] = max(r["ratio"] for r in rs)
    good = [abs(s - n / 2) <= tol for s in slopes.values()]
    viol = sum(1 for r in rows if not r["dyadic_ok"])
    return {
        "slopes": slopes,
        "control_slopes": control_slopes,
        "fraction_within": float(np.mean(good)) if good else float("nan"),
        "ratio_max": ratio_max,
        "ratio_max_overall": max(ratio_max.values()) if ratio_max else float("nan"),
        "dyadic_violations": viol,
    }


# Cusp asymptotics.


def cusp_point(v1: float, n: int = 2):
    """Fixed reduced coordinates with ``v_1`` varied; ``(h, g)``."""
    if n != 2:
        raise DimensionMismatch("the cusp sweep is set up for n = 2")
    X = np.array([[0.11, -0.23], [-0.23, 0.31]])
    U = np.array([[1.0, 0.21], [0.0, 1.0]])
    c = IwasawaCoords.from_xuvq(X, U, [v1, 1.3], np.eye(n))
    h = HeisenbergElem([0.17, -0.29], [0.33, 0.12], 0.25)
    return h, assemble(c)


def cusp_decay(A_values=(2.0, 4.0), k_range=range(4, 15), l: int = 1, f: GaussianPacket | None = None) -> dict:
    f = GaussianPacket.standard(2) if f is None else f
    rows = []
    for k in k_range:
        v1 = 2.0 ** k
        h, g = cusp_point(v1)
        from .symplectic import iwasawa

        V = iwasawa(g).V
        logrem = cusp_remainder_log(h, g, f, l)
        main = cusp_main_term(h, g, f, l)
        scale = v1 + float(h.x @ np.diag(V) @ h.x)
        rows.append({"v1": v1, "log_error": logrem, "log_norm_error": logrem - 0.25 * math.log(v1),
                     "log_scale": math.log(scale), "main_abs": abs(main.main)})
    slope = fit_slope([r["log_scale"] for r in rows], [r["log_norm_error"] for r in rows])
    return {"rows": rows, "slope": slope, "checks": {str(A): slope <= -A + 0.25 for A in A_values}}


# Envelope of |Theta| on reduced points.


def envelope_ratios(n: int, N: int, seed: int, f: GaussianPacket | None = None) -> np.ndarray:
    """``|Theta_f(h, g)| / (det V)^{1/4}`` for in-domain Haar samples and ``x, y`` in the unit box."""
    f = GaussianPacket.standard(n) if f is None else f
    s = haar_sample_region(n, N, seed)
    rng = chunk_rng(seed, 1 << 25)
    out = []
    for i in np.flatnonzero(s.in_domain):
        h = HeisenbergElem(rng.uniform(-0.5, 0.5, n), rng.uniform(-0.5, 0.5, n), 0.0)
        g = assemble(s.coords(i))
        v, _ = _theta_sum(theta_data(h, g, f), 1e-14)
        out.append(abs(v) / s.detV[i] ** 0.25)
    return np.array(out)


def heights_of_samples(s, idx) -> np.ndarray:
    return np.array([height(assemble(s.coords(i))) for i in idx])


def config_dict(cfg) -> dict:
    d = asdict(cfg)
    return json.loads(json.dumps(d, default=float))
