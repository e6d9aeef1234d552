"""Special functions and quadrature shared by the closed-form expressions."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Literal

import numpy as np
from scipy import integrate as _spi
from scipy import special

# cancellation factor above which closed-form differences are replaced by quadrature
_CANCELLATION_LIMIT = 1e6


class QuadratureError(RuntimeError):
    """Adaptive quadrature did not reach its tolerance; carries the partial result."""

    def __init__(self, message: str, estimate: float, error: float):
        super().__init__(f"{message} (estimate={estimate!r}, abs error~{error!r})")
        self.estimate = estimate
        self.error = error


@dataclass(frozen=True)
class QuadratureSpec:
    rel_tol: float = 1e-8
    abs_tol: float = 1e-12
    max_subdivisions: int = 200
    infinity: Literal["transform", "truncate"] = "transform"
    truncation_radius: float | None = None

    def __post_init__(self):
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ValueError("quadrature tolerances must be positive")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be >= 1")
        if self.infinity == "truncate" and not self.truncation_radius:
            raise ValueError("truncate policy needs a truncation_radius")


DEFAULT_QUADRATURE = QuadratureSpec()


def integrate(
    f: Callable[[float], float],
    a: float,
    b: float,
    spec: QuadratureSpec | None = None,
    scale: float = 1.0,
) -> float:
    """Adaptive integral of ``f`` over ``[a, b]``; ``b`` may be ``inf``.

    A semi-infinite range is mapped onto ``(0, 1)`` by ``x = a + scale*t/(1-t)``
    (``scale`` should be the integrand's characteristic length).  Raises
    :class:`QuadratureError` if the tolerance is not met.
    """
    spec = spec or DEFAULT_QUADRATURE
    if b < a:
        return -integrate(f, b, a, spec, scale)
    if a == b:
        return 0.0
    if math.isinf(b):
        if spec.infinity == "truncate":
            return integrate(f, a, a + spec.truncation_radius, spec)

        def g(t):
            s = 1.0 - t
            return f(a + scale * t / s) * scale / (s * s) if s > 0 else 0.0

        lo, hi, func = 0.0, 1.0, g
    else:
        lo, hi, func = a, b, f
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", _spi.IntegrationWarning)
        out = _spi.quad(func, lo, hi, epsabs=spec.abs_tol, epsrel=spec.rel_tol, limit=spec.max_subdivisions, full_output=1)
    value, err = out[0], out[1]
    tol = max(spec.abs_tol, spec.rel_tol * abs(value))
    if len(out) > 3 and err > tol:
        raise QuadratureError(f"quadrature on [{a}, {b}] did not converge: {out[3]}", value, err)
    return value


def _upper_gamma(h: float, u: float) -> float:
    """Upper incomplete gamma ``int_u^inf x^(h-1) e^-x dx`` for real ``h``."""
    if math.isinf(u):
        return 0.0
    if h > 0:
        if u == 0:
            return math.gamma(h)
        if h < 1e-12:
            # gammaincc * gamma underflows/overflows here; the h -> 0 limit is exact to O(h)
            return float(special.exp1(u))
        return float(special.gammaincc(h, u) * math.exp(special.gammaln(h)))
    if u <= 0:
        raise ValueError(f"Gamma({h}; 0, .) is not integrable at the origin")
    if h == 0:
        return float(special.exp1(u))
    shifted = _upper_gamma(h + 1.0, u)
    boundary = u**h * math.exp(-u)
    if shifted != 0 and abs(shifted - boundary) < shifted / _CANCELLATION_LIMIT:
        return _quad_gamma(h, u, math.inf)
    return (shifted - boundary) / h


def _quad_gamma(h: float, u: float, v: float) -> float:
    spec = QuadratureSpec(rel_tol=1e-12, abs_tol=1e-300, max_subdivisions=500)
    return integrate(lambda x: x ** (h - 1.0) * math.exp(-x), u, v, spec, scale=max(1.0, u))


def gen_inc_gamma(h: float, u: float, v: float = math.inf) -> float:
    """Generalized incomplete gamma ``Gamma(h; u, v) = int_u^v x^(h-1) e^-x dx``."""
    if u < 0 or v < u:
        raise ValueError(f"need 0 <= u <= v, got u={u}, v={v}")
    if u == 0 and h <= 0:
        raise ValueError(f"Gamma({h}; 0, v) diverges at the origin")
    if u == v:
        return 0.0
    upper_u = _upper_gamma(h, u)
    upper_v = _upper_gamma(h, v)
    diff = upper_u - upper_v
    factor = abs(upper_u) / abs(diff) if diff else math.inf
    if h > 0 and factor > 1e3:
        # limits near the origin: the lower-tail difference cancels less
        total = math.gamma(h) if h < 171 else math.inf
        lower_v = float(special.gammainc(h, v)) * total
        lower_u = float(special.gammainc(h, u)) * total
        alt = lower_v - lower_u
        alt_factor = abs(lower_v) / abs(alt) if alt else math.inf
        if alt_factor < factor:
            diff, factor = alt, alt_factor
    if factor > _CANCELLATION_LIMIT:
        return _quad_gamma(h, u, v)
    return diff


def alzer_constant(n: int) -> float:
    """``a = N (N!)^(-1/N)``, the constant in the normalized-gamma CDF bound."""
    if n < 1 or int(n) != n:
        raise ValueError("N must be a positive integer")
    return n * math.exp(-math.lgamma(n + 1) / n)


def alternating_binomial_sum(terms) -> float:
    """``sum_k (-1)^k C(N,k) terms[k]`` for ``k = 0..N`` with compensated summation."""
    n = len(terms) - 1
    return math.fsum((-1) ** k * math.comb(n, k) * float(terms[k]) for k in range(n + 1))


_GL_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _gauss_legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    if order not in _GL_CACHE:
        _GL_CACHE[order] = np.polynomial.legendre.leggauss(order)
    return _GL_CACHE[order]


def _panel_nodes(edges: np.ndarray, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes/weights on each ``[edges[i], edges[i+1]]``; shapes (panels, order)."""
    xi, wi = _gauss_legendre(order)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    return mid[:, None] + half[:, None] * xi[None, :], half[:, None] * wi[None, :]


def log_gauss_legendre(lo: float, hi: float, panel_width: float = 0.1, order: int = 8):
    """Nodes and weights for ``int_lo^hi f(t) dt`` via ``t = e^s`` and composite GL in ``s``."""
    if not 0 < lo < hi:
        raise ValueError("need 0 < lo < hi")
    s_lo, s_hi = math.log(lo), math.log(hi)
    n_panels = max(1, math.ceil((s_hi - s_lo) / panel_width))
    s, w = _panel_nodes(np.linspace(s_lo, s_hi, n_panels + 1), order)
    t = np.exp(s).ravel()
    return t, (w.ravel() * t)


def upper_tail_integrals(
    f: Callable[[np.ndarray], np.ndarray],
    lower,
    upper: float | None = None,
    panel_width: float = 0.25,
    order: int = 16,
    partial_order: int = 8,
) -> np.ndarray:
    """``int_x^upper f(t) dt`` for every ``x`` in ``lower`` (all positive).

    ``f`` takes a 1-D array of ``t`` and returns an array whose first axis
    matches it; trailing axes are carried through.  A fixed log-spaced panel
    grid from ``min(x)`` to ``upper`` is integrated once and accumulated from
    the right; each ``x`` then adds the short piece up to the next grid edge.
    ``upper`` defaults to ``1e8 * max(x)``, adequate for integrands decaying
    at least like ``t^-3``.
    """
    x = np.asarray(lower, dtype=float)
    if np.any(x <= 0):
        raise ValueError("lower limits must be positive")
    uniq, inverse = np.unique(x.ravel(), return_inverse=True)
    top = upper if upper is not None else uniq[-1] * 1e8
    if top <= uniq[-1]:
        raise ValueError("upper limit must exceed every lower limit")
    s_lo, s_hi = math.log(uniq[0]), math.log(top)
    n_panels = max(1, math.ceil((s_hi - s_lo) / panel_width))
    edges = np.linspace(s_lo, s_hi, n_panels + 1)
    s_full, w_full = _panel_nodes(edges, order)

    # partial piece [log x, next edge] for each lower limit
    log_x = np.log(uniq)
    nxt = np.minimum(np.searchsorted(edges, log_x, side="left"), n_panels)
    s_part, w_part = _panel_nodes_between(log_x, edges[nxt], partial_order)

    t = np.exp(np.concatenate([s_full.ravel(), s_part.ravel()]))
    vals = np.asarray(f(t))
    trailing = vals.shape[1:]
    n_full = s_full.size
    shape_w = (1,) * len(trailing)
    full = vals[:n_full].reshape((n_panels, order) + trailing)
    part = vals[n_full:].reshape((len(uniq), partial_order) + trailing)
    wf = (w_full * np.exp(s_full)).reshape(w_full.shape + shape_w)
    wp = (w_part * np.exp(s_part)).reshape(w_part.shape + shape_w)
    panel_sums = np.sum(full * wf, axis=1)
    tails = np.concatenate([np.cumsum(panel_sums[::-1], axis=0)[::-1], np.zeros((1,) + trailing)])
    result = tails[nxt] + np.sum(part * wp, axis=1)
    return result[inverse].reshape(x.shape + trailing)


def _panel_nodes_between(left: np.ndarray, right: np.ndarray, order: int):
    xi, wi = _gauss_legendre(order)
    mid = 0.5 * (left + right)
    half = 0.5 * (right - left)
    return mid[:, None] + half[:, None] * xi[None, :], half[:, None] * wi[None, :]
