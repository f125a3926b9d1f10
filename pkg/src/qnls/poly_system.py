"""Polynomial systems on tensor-power coefficient matrices.

A system of n equations f_i(x) = (1/2) (x^{op})^T A_i x^{op} with even
degree 2p is stored through its sparse n^p-by-n^p coefficient matrices.
This module evaluates such systems, computes their gradients through the
permutation-sum operator M_D^i = sum_j Q_j A_i Q_j, homogenizes odd-degree
systems, and represents the constant + linear + homogeneous decomposition
used by the PDE discretizations.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import DeskScaleError, DimensionMismatchError, InputError

DESK_SCALE_CAP = 4096

# Monomial: (coefficient, per-variable exponents).
Monomial = tuple[float, tuple[int, ...]]


def tensor_power(x: np.ndarray, k: int) -> np.ndarray:
    """k-fold Kronecker power of a vector (k = 0 gives the scalar 1)."""
    out = np.ones(1)
    for _ in range(k):
        out = np.kron(out, x)
    return out


@dataclass(frozen=True, eq=False)
class SparseMatrix:
    """COO matrix with unique, in-range, nonzero entries."""

    dim_rows: int
    dim_cols: int
    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.int64).ravel()
        cols = np.asarray(self.cols, dtype=np.int64).ravel()
        vals = np.asarray(self.vals, dtype=np.float64).ravel()
        if not (rows.shape == cols.shape == vals.shape):
            raise InputError("rows, cols and vals must have equal length")
        if self.dim_rows <= 0 or self.dim_cols <= 0:
            raise InputError("matrix dimensions must be positive")
        keep = vals != 0.0
        rows, cols, vals = rows[keep], cols[keep], vals[keep]
        if rows.size:
            if rows.min() < 0 or rows.max() >= self.dim_rows:
                raise InputError("row index out of range")
            if cols.min() < 0 or cols.max() >= self.dim_cols:
                raise InputError("column index out of range")
            keys = rows * self.dim_cols + cols
            order = np.argsort(keys, kind="stable")
            rows, cols, vals = rows[order], cols[order], vals[order]
            if np.unique(keys).size != keys.size:
                raise InputError("duplicate (row, col) entry")
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "cols", cols)
        object.__setattr__(self, "vals", vals)

    # -- constructors -------------------------------------------------

    @classmethod
    def from_entries(cls, dim_rows: int, dim_cols: int,
                     entries: Iterable[tuple[int, int, float]]) -> "SparseMatrix":
        ent = list(entries)
        rows = np.array([e[0] for e in ent], dtype=np.int64)
        cols = np.array([e[1] for e in ent], dtype=np.int64)
        vals = np.array([e[2] for e in ent], dtype=np.float64)
        return cls(dim_rows, dim_cols, rows, cols, vals)

    @classmethod
    def from_dense(cls, m: np.ndarray, tol: float = 0.0) -> "SparseMatrix":
        m = np.asarray(m, dtype=np.float64)
        rows, cols = np.nonzero(np.abs(m) > tol)
        return cls(m.shape[0], m.shape[1], rows, cols, m[rows, cols])

    @classmethod
    def identity(cls, d: int, scale: float = 1.0) -> "SparseMatrix":
        idx = np.arange(d)
        return cls(d, d, idx, idx, np.full(d, scale))

    # -- basic queries -------------------------------------------------

    @property
    def nnz(self) -> int:
        return int(self.vals.size)

    def entries(self) -> Iterator[tuple[int, int, float]]:
        """Entries in deterministic (row, col) order."""
        for r, c, v in zip(self.rows, self.cols, self.vals):
            yield int(r), int(c), float(v)

    def to_dense(self) -> np.ndarray:
        m = np.zeros((self.dim_rows, self.dim_cols))
        m[self.rows, self.cols] = self.vals
        return m

    def max_abs_entry(self) -> float:
        return float(np.max(np.abs(self.vals))) if self.nnz else 0.0

    def row_nnz_max(self) -> int:
        if not self.nnz:
            return 0
        return int(np.bincount(self.rows, minlength=self.dim_rows).max())

    def col_nnz_max(self) -> int:
        if not self.nnz:
            return 0
        return int(np.bincount(self.cols, minlength=self.dim_cols).max())

    def spectral_norm(self) -> float:
        """Operator 2-norm by dense SVD (desk scale only)."""
        if max(self.dim_rows, self.dim_cols) > DESK_SCALE_CAP:
            raise DeskScaleError("matrix too large for dense spectral norm")
        if not self.nnz:
            return 0.0
        return float(np.linalg.norm(self.to_dense(), 2))

    # -- algebra -------------------------------------------------------

    def scaled(self, c: float) -> "SparseMatrix":
        return SparseMatrix(self.dim_rows, self.dim_cols,
                            self.rows, self.cols, self.vals * c)

    def transpose(self) -> "SparseMatrix":
        return SparseMatrix(self.dim_cols, self.dim_rows,
                            self.cols, self.rows, self.vals)

    def symmetrized(self) -> "SparseMatrix":
        """(A + A^T) / 2 with merged entry pattern."""
        if self.dim_rows != self.dim_cols:
            raise InputError("symmetrization needs a square matrix")
        rows = np.concatenate([self.rows, self.cols])
        cols = np.concatenate([self.cols, self.rows])
        vals = np.concatenate([self.vals, self.vals]) * 0.5
        keys = rows * self.dim_cols + cols
        uniq, inv = np.unique(keys, return_inverse=True)
        acc = np.zeros(uniq.size)
        np.add.at(acc, inv, vals)
        return SparseMatrix(self.dim_rows, self.dim_cols,
                            uniq // self.dim_cols, uniq % self.dim_cols, acc)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        out = np.zeros(self.dim_rows)
        np.add.at(out, self.rows, self.vals * x[self.cols])
        return out


@dataclass(frozen=True)
class FactorPermutation:
    """Permutation Q_j of the p-fold tensor space swapping factor j to the last slot.

    Indices over n^p are read as base-n digit strings, most significant
    digit = factor 1. j is 1-based; j = p is the identity.
    """

    p: int
    n: int
    j: int

    def __post_init__(self):
        if not (1 <= self.j <= self.p):
            raise InputError("factor index out of range")

    def apply(self, idx: np.ndarray) -> np.ndarray:
        """Permute flat tensor indices (vectorized, involutive)."""
        idx = np.asarray(idx, dtype=np.int64)
        if self.j == self.p:
            return idx.copy()
        n, p, j = self.n, self.p, self.j
        wj = n ** (p - j)          # place value of digit j
        dj = (idx // wj) % n
        dp = idx % n               # digit p
        return idx + (dp - dj) * wj + (dj - dp)

    def conjugate(self, a: SparseMatrix) -> SparseMatrix:
        """Q_j A Q_j (Q_j is symmetric, so conjugation = index relabeling)."""
        return SparseMatrix(a.dim_rows, a.dim_cols,
                            self.apply(a.rows), self.apply(a.cols), a.vals)

    def matrix(self) -> np.ndarray:
        d = self.n ** self.p
        m = np.zeros((d, d))
        m[self.apply(np.arange(d)), np.arange(d)] = 1.0
        return m


@dataclass(frozen=True, eq=False)
class PolynomialSystem:
    """n homogeneous equations of degree 2p, each (1/2) x^{op T} A_i x^{op}.

    Coefficient matrices are symmetrized on construction; the declared
    sparsity bounds the per-row/column nonzero count of the symmetrized
    matrices.
    """

    n: int
    p: int
    sparsity: int
    equations: tuple[SparseMatrix, ...]

    def __post_init__(self):
        if self.n <= 0 or self.p <= 0:
            raise InputError("n and p must be positive")
        if self.n ** self.p > DESK_SCALE_CAP:
            raise DeskScaleError(
                f"n^p = {self.n ** self.p} exceeds desk-scale cap {DESK_SCALE_CAP}")
        if len(self.equations) != self.n:
            raise InputError("need exactly n coefficient matrices")
        d = self.n ** self.p
        sym = []
        for a in self.equations:
            if a.dim_rows != d or a.dim_cols != d:
                raise DimensionMismatchError("each A_i must be n^p x n^p")
            sym.append(a.symmetrized())
        for a in sym:
            if max(a.row_nnz_max(), a.col_nnz_max()) > self.sparsity:
                raise InputError("declared sparsity exceeded after symmetrization")
        object.__setattr__(self, "equations", tuple(sym))

    @property
    def degree(self) -> int:
        return 2 * self.p

    def max_norm(self) -> float:
        return max(a.spectral_norm() for a in self.equations)

    def max_entry(self) -> float:
        return max(a.max_abs_entry() for a in self.equations)

    def m_d(self, i: int) -> SparseMatrix:
        """M_D^i = sum_{j=1}^p Q_j A_i Q_j as one merged sparse matrix."""
        a = self.equations[i]
        d = self.n ** self.p
        rows, cols, vals = [], [], []
        for j in range(1, self.p + 1):
            q = FactorPermutation(self.p, self.n, j)
            rows.append(q.apply(a.rows))
            cols.append(q.apply(a.cols))
            vals.append(a.vals)
        r = np.concatenate(rows) if rows else np.zeros(0, dtype=np.int64)
        c = np.concatenate(cols) if cols else np.zeros(0, dtype=np.int64)
        v = np.concatenate(vals) if vals else np.zeros(0)
        keys = r * d + c
        uniq, inv = np.unique(keys, return_inverse=True)
        acc = np.zeros(uniq.size)
        np.add.at(acc, inv, v)
        return SparseMatrix(d, d, uniq // d, uniq % d, acc)


def canonicalize(system: PolynomialSystem) -> tuple[PolynomialSystem, float]:
    """Rescale all A_i by one common factor c <= 1 so that
    p * max_i ||A_i||_2 <= sqrt(n) and max |entry| <= 1.

    The factor is returned; roots are unchanged by a common rescale.
    """
    norm = system.max_norm()
    ent = system.max_entry()
    c = 1.0
    if norm > 0:
        c = min(c, np.sqrt(system.n) / (system.p * norm))
    if ent > 0:
        c = min(c, 1.0 / ent)
    if c >= 1.0:
        return system, 1.0
    eqs = tuple(a.scaled(c) for a in system.equations)
    return PolynomialSystem(system.n, system.p, system.sparsity, eqs), c


def evaluate(system: PolynomialSystem, x: np.ndarray) -> np.ndarray:
    """F(x) with components f_i = (1/2) (x^{op})^T A_i x^{op}."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (system.n,):
        raise DimensionMismatchError(f"x must have length {system.n}")
    xp = tensor_power(x, system.p)
    out = np.empty(system.n)
    for i, a in enumerate(system.equations):
        out[i] = 0.5 * float(np.dot(a.vals, xp[a.rows] * xp[a.cols]))
    return out


def gradient_md(system: PolynomialSystem, i: int, x: np.ndarray) -> np.ndarray:
    """grad f_i(x) = D_i(x) x via the permutation-sum operator M_D^i.

    D_i(x) is the contraction of M_D^i against (x x^T)^{(p-1)} on the
    leading p-1 tensor factors; equation index i is 0-based.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (system.n,):
        raise DimensionMismatchError(f"x must have length {system.n}")
    if not (0 <= i < system.n):
        raise InputError("equation index out of range")
    if not np.all(np.isfinite(x)):
        raise InputError("x must be finite")
    n, p = system.n, system.p
    md = system.m_d(i)
    w = tensor_power(x, p - 1)       # over n^{p-1}
    xp = tensor_power(x, p)          # over n^p
    grad = np.zeros(n)
    # entry ((head_r, a), C): contributes v * w[head_r] * xp[C] to grad[a]
    np.add.at(grad, md.rows % n, md.vals * w[md.rows // n] * xp[md.cols])
    return grad


def jacobian(system: PolynomialSystem, x: np.ndarray) -> np.ndarray:
    """Dense Jacobian; row i is grad f_i(x)."""
    return np.vstack([gradient_md(system, i, x) for i in range(system.n)])


def euler_check(system: PolynomialSystem, x: np.ndarray) -> float:
    """Defect of the degree-2p Euler identity, ||J(x) x - 2p F(x)||."""
    x = np.asarray(x, dtype=np.float64)
    return float(np.linalg.norm(jacobian(system, x) @ x
                                - 2 * system.p * evaluate(system, x)))


# ---------------------------------------------------------------------------
# Inhomogeneous polynomials: sums of (c^T x) * prod_k (x^T B_k x)
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class InhomogeneousPolynomial:
    """Sum of terms (c^T x) * prod_k (x^T B_k x); an empty B list is linear."""

    terms: tuple[tuple[np.ndarray, tuple[SparseMatrix, ...]], ...]

    def __post_init__(self):
        norm_terms = []
        nvars = None
        for c, bs in self.terms:
            c = np.asarray(c, dtype=np.float64)
            if c.ndim != 1:
                raise InputError("term vector c must be one-dimensional")
            if nvars is None:
                nvars = c.size
            elif c.size != nvars:
                raise DimensionMismatchError("all terms must share the variable count")
            for b in bs:
                if b.dim_rows != nvars or b.dim_cols != nvars:
                    raise DimensionMismatchError("B matrices must be n x n")
            norm_terms.append((c, tuple(bs)))
        object.__setattr__(self, "terms", tuple(norm_terms))

    @property
    def n(self) -> int:
        return self.terms[0][0].size if self.terms else 0


def eval_inhomogeneous(g: InhomogeneousPolynomial, x: np.ndarray) -> float:
    x = np.asarray(x, dtype=np.float64)
    total = 0.0
    for c, bs in g.terms:
        v = float(np.dot(c, x))
        for b in bs:
            v *= float(np.dot(x, b.matvec(x)))
        total += v
    return total


def gradient_inhomogeneous(g: InhomogeneousPolynomial, x: np.ndarray) -> np.ndarray:
    """Chain rule per term: (prod_k q_k) c + (c^T x) grad(prod_k q_k)."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    for c, bs in g.terms:
        cx = float(np.dot(c, x))
        quads = [float(np.dot(x, b.matvec(x))) for b in bs]
        prod = float(np.prod(quads)) if quads else 1.0
        grad += prod * c
        for k, b in enumerate(bs):
            rest = 1.0
            for l, q in enumerate(quads):
                if l != k:
                    rest *= q
            bx = b.matvec(x) + b.transpose().matvec(x)   # (B + B^T) x
            grad += cx * rest * bx
    return grad


@dataclass(frozen=True, eq=False)
class InhomogeneousSystem:
    """Square system of inhomogeneous polynomial equations."""

    n: int
    equations: tuple[InhomogeneousPolynomial, ...]

    def __post_init__(self):
        if len(self.equations) != self.n:
            raise InputError("need n equations")
        for g in self.equations:
            if g.terms and g.n != self.n:
                raise DimensionMismatchError("equation over wrong variable count")

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        return np.array([eval_inhomogeneous(g, x) for g in self.equations])

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        return np.vstack([gradient_inhomogeneous(g, x) for g in self.equations])


# ---------------------------------------------------------------------------
# Mixed systems: b + L x + F_nl(x)
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class MixedSystem:
    """Equation i evaluates as b_i + (L x)_i + f_i(x); Jacobian L + J_nl."""

    n: int
    constants: np.ndarray
    linear: SparseMatrix
    nonlinear: PolynomialSystem | None = None

    def __post_init__(self):
        b = np.asarray(self.constants, dtype=np.float64)
        if b.shape != (self.n,):
            raise DimensionMismatchError("constants must have length n")
        if self.linear.dim_rows != self.n or self.linear.dim_cols != self.n:
            raise DimensionMismatchError("linear part must be n x n")
        if self.nonlinear is not None and self.nonlinear.n != self.n:
            raise DimensionMismatchError("nonlinear part must share n")
        object.__setattr__(self, "constants", b)


def mixed_evaluate(ms: MixedSystem, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (ms.n,):
        raise DimensionMismatchError(f"x must have length {ms.n}")
    out = ms.constants + ms.linear.matvec(x)
    if ms.nonlinear is not None:
        out = out + evaluate(ms.nonlinear, x)
    return out


def mixed_jacobian(ms: MixedSystem, x: np.ndarray) -> np.ndarray:
    out = ms.linear.to_dense()
    if ms.nonlinear is not None:
        out = out + jacobian(ms.nonlinear, x)
    return out


def canonicalize_mixed(ms: MixedSystem) -> tuple[MixedSystem, np.ndarray]:
    """Per-row rescaling so the nonlinear part meets the encoding bounds.

    Scaling a whole equation preserves roots; the common-factor trick of the
    homogeneous case would not, since it changes the nonlinear/linear balance.
    Returns the scaled system and the per-row factors.
    """
    factors = np.ones(ms.n)
    if ms.nonlinear is None:
        return ms, factors
    nl = ms.nonlinear
    rootn = np.sqrt(nl.n)
    for i, a in enumerate(nl.equations):
        c = 1.0
        norm = a.spectral_norm()
        if norm > 0:
            c = min(c, rootn / (nl.p * norm))
        ent = a.max_abs_entry()
        if ent > 0:
            c = min(c, 1.0 / ent)
        factors[i] = c
    if np.all(factors >= 1.0):
        return ms, np.ones(ms.n)
    eqs = tuple(a.scaled(f) for a, f in zip(nl.equations, factors))
    new_nl = PolynomialSystem(nl.n, nl.p, nl.sparsity, eqs)
    lin = SparseMatrix(ms.n, ms.n, ms.linear.rows, ms.linear.cols,
                       ms.linear.vals * factors[ms.linear.rows])
    return MixedSystem(ms.n, ms.constants * factors, lin, new_nl), factors


# ---------------------------------------------------------------------------
# Odd-degree homogenization
# ---------------------------------------------------------------------------

def _monomial_key(powers: Sequence[int]) -> tuple[int, ...]:
    return tuple(int(e) for e in powers)


def _poly_mul(a: dict[tuple[int, ...], float],
              b: dict[tuple[int, ...], float]) -> dict[tuple[int, ...], float]:
    out: dict[tuple[int, ...], float] = {}
    for pa, ca in a.items():
        for pb, cb in b.items():
            key = tuple(ea + eb for ea, eb in zip(pa, pb))
            out[key] = out.get(key, 0.0) + ca * cb
    return out


def monomials_to_matrix(nvars: int, p: int,
                        monomials: Iterable[Monomial]) -> SparseMatrix:
    """Coefficient matrix A with (1/2) x^{op T} A x^{op} = sum of monomials.

    Each degree-2p monomial is placed at one canonical (row, col) pair of
    sorted digit blocks; system construction symmetrizes afterwards, which
    leaves the represented polynomial unchanged.
    """
    d = nvars ** p
    acc: dict[tuple[int, int], float] = {}
    for coef, powers in monomials:
        if coef == 0.0:
            continue
        if len(powers) != nvars or sum(powers) != 2 * p:
            raise InputError("monomial degree must equal 2p over nvars variables")
        digits: list[int] = []
        for var, e in enumerate(powers):
            digits.extend([var] * e)
        row = 0
        for dgt in digits[:p]:
            row = row * nvars + dgt
        col = 0
        for dgt in digits[p:]:
            col = col * nvars + dgt
        acc[(row, col)] = acc.get((row, col), 0.0) + 2.0 * coef
    return SparseMatrix.from_entries(d, d, [(r, c, v) for (r, c), v in acc.items()])


def evaluate_monomials(equations: Sequence[Sequence[Monomial]],
                       x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    out = np.zeros(len(equations))
    for i, eq in enumerate(equations):
        for coef, powers in eq:
            out[i] += coef * float(np.prod(x ** np.asarray(powers)))
    return out


def homogenize_odd(equations: Sequence[Sequence[Monomial]]) -> PolynomialSystem:
    """Lift a uniform odd-degree-d system over n variables to even degree d+1.

    Every equation is multiplied by a new variable m (appended last); one
    extra equation (x_1^2 - m^2) * (sum_i x_i^2 + m^2)^{(d-1)/2} pins
    m = +-x_1.  Nonzero roots x of the input with m = +-x_1 solve the output.
    """
    if not equations or not equations[0]:
        raise InputError("empty system")
    nvars = len(equations[0][0][1])
    if len(equations) != nvars:
        raise InputError("system must be square (n equations over n variables)")
    degree = None
    for eq in equations:
        for coef, powers in eq:
            if len(powers) != nvars:
                raise InputError("inconsistent variable count")
            d = sum(powers)
            if degree is None:
                degree = d
            elif d != degree:
                raise InputError("equations must have uniform degree")
    if degree is None or degree % 2 == 0:
        raise InputError("input degree must be odd")
    n_out = nvars + 1
    p_out = (degree + 1) // 2
    mats = []
    for eq in equations:
        lifted = [(coef, _monomial_key(tuple(powers) + (1,))) for coef, powers in eq]
        mats.append(monomials_to_matrix(n_out, p_out, lifted))
    # auxiliary equation: (x_1^2 - m^2) * (|x|^2 + m^2)^{(d-1)/2}
    e1_sq = {_monomial_key((2,) + (0,) * (nvars - 1) + (0,)): 1.0,
             _monomial_key((0,) * nvars + (2,)): -1.0}
    norm_sq = {}
    for var in range(n_out):
        powers = [0] * n_out
        powers[var] = 2
        norm_sq[_monomial_key(powers)] = 1.0
    aux = e1_sq
    for _ in range((degree - 1) // 2):
        aux = _poly_mul(aux, norm_sq)
    mats.append(monomials_to_matrix(n_out, p_out, [(c, k) for k, c in aux.items()]))
    sym = [a.symmetrized() for a in mats]
    s = max(max(a.row_nnz_max(), a.col_nnz_max()) for a in sym)
    return PolynomialSystem(n_out, p_out, s, tuple(sym))
