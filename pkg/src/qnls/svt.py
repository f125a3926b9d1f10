"""Singular value transformation on block encodings.

Pseudoinversion with a spectral threshold (exact SVD backend and an odd
polynomial backend approximating sigma/x), plus extremal eigenvalue and
singular value estimation with the matching symbolic cost charges.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import chebyshev
from scipy.optimize import linprog

from .block_encoding import (BlockEncoding, CostLedger, _eps_units, _log2,
                             _mk, be_product, be_transpose, debug_enabled)
from .errors import ConditioningError, ConfigError, InputError

_MAX_POLY_DEGREE = 10 ** 5
_LP_DEGREE_CAP = 1200      # practical cap of the LP-based minimax builder
_HERMITIAN_TOL = 1e-9


@dataclass(frozen=True)
class InversionConfig:
    """Threshold sigma, target eps and backend for pseudoinversion."""

    sigma_floor: float
    eps: float = 1e-6
    backend: str = "exact"

    def __post_init__(self):
        if not (0.0 < self.sigma_floor < 1.0):
            raise InputError("sigma_floor must lie in (0, 1)")
        if not self.eps > 0:
            raise InputError("eps must be positive")
        if self.backend not in ("exact", "polynomial", "poly"):
            raise InputError(f"unknown backend {self.backend!r}")

    @property
    def polynomial(self) -> bool:
        return self.backend in ("polynomial", "poly")


@dataclass(frozen=True, eq=False)
class OddPolynomial:
    """Odd Chebyshev-basis polynomial, bounded by 1 on [-1, 1]."""

    cheb_coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.cheb_coeffs, dtype=np.float64)
        if c.ndim != 1 or c.size == 0:
            raise InputError("need a 1-d coefficient array")
        if np.any(c[0::2] != 0.0):
            raise InputError("even-index Chebyshev coefficients must vanish")
        object.__setattr__(self, "cheb_coeffs", c)

    @property
    def degree(self) -> int:
        nz = np.nonzero(self.cheb_coeffs)[0]
        return int(nz[-1]) if nz.size else 0

    def __call__(self, x):
        return chebyshev.chebval(x, self.cheb_coeffs)


def _minimax_fit(sigma: float, degree: int,
                 shrink: float = 1.0) -> tuple[np.ndarray, float]:
    """Best odd-Chebyshev fit to shrink*sigma/x on [sigma, 1], |q| <= 1 on [0, 1].

    Linear program: minimize the sup deviation t on a Chebyshev-node grid of
    the approximation interval, subject to a unit cap on a grid of [0, 1].
    """
    ks = np.arange(1, degree + 1, 2)
    m_fit = max(600, 4 * degree)
    nodes = np.cos(np.pi * (np.arange(m_fit) + 0.5) / m_fit)
    xs = 0.5 * (sigma + 1.0) + 0.5 * (1.0 - sigma) * nodes
    target = shrink * sigma / xs
    ys = np.linspace(0.0, 1.0, m_fit + 1)[1:]
    phi_fit = chebyshev.chebvander(xs, degree)[:, ks]
    phi_cap = chebyshev.chebvander(ys, degree)[:, ks]
    cvec = np.zeros(ks.size + 1)             # coefficients + deviation bound t
    cvec[-1] = 1.0
    ones = np.ones((xs.size, 1))
    a_ub = np.vstack([
        np.hstack([phi_fit, -ones]),
        np.hstack([-phi_fit, -ones]),
        np.hstack([phi_cap, np.zeros((ys.size, 1))]),
        np.hstack([-phi_cap, np.zeros((ys.size, 1))]),
    ])
    b_ub = np.concatenate([target, -target,
                           np.full(ys.size, 1.0 - 1e-9),
                           np.full(ys.size, 1.0 - 1e-9)])
    res = linprog(cvec, A_ub=a_ub, b_ub=b_ub,
                  bounds=[(None, None)] * ks.size + [(0, None)],
                  method="highs")
    if not res.success:
        raise ConfigError(f"minimax LP failed at degree {degree}: {res.message}")
    coeffs = np.zeros(degree + 1)
    coeffs[ks] = res.x[:-1]
    return coeffs, float(res.x[-1])


@lru_cache(maxsize=64)
def _search_inverse_poly(sigma: float, eps: float, shrink: float,
                         degree_cap: int) -> OddPolynomial | None:
    """Doubling search plus bisection for the smallest passing odd degree."""
    if degree_cap > _LP_DEGREE_CAP:
        degree_cap = _LP_DEGREE_CAP
    d = max(3, int(np.ceil(1.0 / sigma)))
    if d % 2 == 0:
        d += 1
    best = None
    lo = 1
    while d <= degree_cap:
        coeffs, dev = _minimax_fit(sigma, d, shrink)
        if dev <= eps:
            best = (d, coeffs)
            break
        lo = d
        d = 2 * d + 1
    if best is None:
        return None
    hi = best[0]
    while hi - lo > 2:
        mid = (lo + hi) // 2
        if mid % 2 == 0:
            mid += 1
        if mid >= hi:
            break
        coeffs, dev = _minimax_fit(sigma, mid, shrink)
        if dev <= eps:
            hi, best = mid, (mid, coeffs)
        else:
            lo = mid
    return OddPolynomial(best[1])


def build_inverse_poly(sigma: float, eps: float) -> OddPolynomial:
    """Odd q with |q(x) - sigma/x| <= eps on [sigma, 1] and |q| <= 1 on [-1, 1]."""
    if not (0.0 < sigma < 1.0):
        raise InputError("sigma must lie in (0, 1)")
    if not eps > 0:
        raise InputError("eps must be positive")
    q = _search_inverse_poly(float(sigma), float(eps), 1.0, _MAX_POLY_DEGREE)
    if q is None:
        raise ConfigError("inverse polynomial degree budget exhausted")
    return q


def degree_budget(sigma: float, eps: float) -> float:
    """(1/sigma) * log2(1/(sigma eps)), the inversion Lemma's degree scale."""
    return (1.0 / sigma) * _log2(1.0 / (sigma * _eps_units(eps)))


_HEADROOM = 0.75


def backend_inverse_poly(sigma: float, eps: float) -> tuple[OddPolynomial, float]:
    """Polynomial actually used by the inversion backend, with its headroom.

    The fully saturated target sigma/x (value 1 at the threshold) collides
    with the unit sup-norm cap and needs far higher degree at small eps, so
    the backend falls back to the standard trick of approximating
    0.75*sigma/x and absorbing the 4/3 into the output subnormalization.
    The returned headroom h satisfies |q(x)/h - sigma/x| <= eps on [sigma, 1].
    """
    if not (0.0 < sigma < 1.0):
        raise InputError("sigma must lie in (0, 1)")
    cap = int(np.ceil(4.0 * degree_budget(sigma, eps)))
    cap = min(max(cap, 3), _MAX_POLY_DEGREE)
    # the saturated fit converges only like 1/degree near the cap, so do not
    # chase it past a few hundred before switching to the headroom target
    q = _search_inverse_poly(float(sigma), float(eps), 1.0, min(cap, 257))
    if q is not None:
        return q, 1.0
    q = _search_inverse_poly(float(sigma), float(_HEADROOM * eps),
                             _HEADROOM, cap)
    if q is None:
        raise ConfigError(
            f"inverse polynomial for sigma={sigma:.3g}, eps={eps:.3g} needs "
            f"degree beyond the desk-scale LP cap {_LP_DEGREE_CAP}; raise "
            "sigma_floor or eps, or use the exact backend")
    return q, _HEADROOM


def inversion_charge(sigma: float, eps: float) -> float:
    """(1/sigma) * polylog(1/(sigma eps)) symbolic units."""
    return (1.0 / sigma) * _log2(1.0 / (sigma * _eps_units(eps)))


def sv_invert(be: BlockEncoding, cfg: InversionConfig,
              ledger: CostLedger | None = None) -> BlockEncoding:
    """Encoding of the sigma-scaled pseudoinverse of the normalized block.

    The input block B = extract()/alpha must have its spectrum in
    [sigma, 1] up to a hard cutoff at sigma/2 below which singular values
    are treated as exact zeros.  Output block = sigma * B^+ (alpha = 1), so
    chaining with the caller's own alpha bookkeeping reproduces the
    sqrt(n)/gamma^{2p-1}-normalized inverse where needed.
    """
    b = be.block
    if b.shape[0] != b.shape[1]:
        raise InputError("inversion needs a square block")
    sigma = cfg.sigma_floor
    u, s, vh = np.linalg.svd(b)
    alive = s >= 0.5 * sigma
    if np.any(s[alive] < sigma * (1.0 - 1e-6)):
        worst = float(s[alive].min())
        raise ConditioningError(
            f"singular value {worst:.3e} in the dead band [sigma/2, sigma); "
            f"condition exceeds 1/sigma = {1.0 / sigma:.3e}")
    alpha_out = 1.0
    if cfg.polynomial:
        q, headroom = backend_inverse_poly(sigma, cfg.eps)
        g = np.asarray(q(s), dtype=np.float64)
        alpha_out = 1.0 / headroom
        if ledger is not None:
            ledger.charge("inverse_poly_degree", note=float(q.degree))
    else:
        with np.errstate(divide="ignore"):
            g = np.where(s > 0, sigma / np.maximum(s, 1e-300), 0.0)
        g = np.clip(g, -1.0, 1.0)
    g = np.where(alive, g, 0.0)
    out_block = (vh.conj().T * g) @ u.conj().T
    charge = be.cost * inversion_charge(sigma, cfg.eps)
    if ledger is not None:
        ledger.charge("inversion", primitive=charge)
    intended = None
    if be.intended is not None or debug_enabled():
        with np.errstate(divide="ignore"):
            g_exact = np.where(alive, np.clip(
                np.where(s > 0, sigma / np.maximum(s, 1e-300), 0.0), 0.0, 1.0), 0.0)
        intended = (vh.conj().T * g_exact) @ u.conj().T
    eps_out = be.eps / sigma + (cfg.eps if cfg.polynomial else 0.0)
    return _mk(out_block, alpha_out, eps_out, intended, charge)


def max_eigenvalue(be: BlockEncoding, eps: float,
                   ledger: CostLedger | None = None) -> float:
    """Largest eigenvalue of the encoded PSD Hermitian matrix, within eps."""
    return _extremal_eigenvalue(be, eps, ledger, largest=True)


def min_eigenvalue(be: BlockEncoding, eps: float,
                   ledger: CostLedger | None = None) -> float:
    """Smallest eigenvalue of the encoded PSD Hermitian matrix, within eps."""
    return _extremal_eigenvalue(be, eps, ledger, largest=False)


def _extremal_eigenvalue(be: BlockEncoding, eps: float,
                         ledger: CostLedger | None, largest: bool) -> float:
    if not eps > 0:
        raise InputError("eps must be positive")
    b = be.block
    if np.linalg.norm(b - b.conj().T, 2) > _HERMITIAN_TOL:
        raise InputError("encoded block is not Hermitian")
    w = np.linalg.eigvalsh(0.5 * (b + b.conj().T))
    if w[0] < -_HERMITIAN_TOL:
        raise InputError(f"encoded block is not PSD (min eigenvalue {w[0]:.3e})")
    if ledger is not None:
        n = be.logical_dim
        charge = (_log2(1.0 / eps) + 0.5 * _log2(n)) * be.cost / eps
        ledger.charge("eigen_estimate", primitive=charge)
    ev = w[-1] if largest else max(w[0], 0.0)
    return float(be.alpha * ev)


def min_singular_value(be: BlockEncoding, eps: float,
                       ledger: CostLedger | None = None) -> float:
    """Smallest singular value of extract(), via the J^dag J square trick."""
    gram = be_product(be_transpose(be), be, ledger)
    return float(np.sqrt(max(min_eigenvalue(gram, eps, ledger), 0.0)))
