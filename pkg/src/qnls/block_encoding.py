"""Block-encoding calculus on explicit unitary matrices.

A block encoding stores a unitary whose top-left ``logical_dim`` block,
scaled by the subnormalization ``alpha``, is the intended matrix.  Every
composition computes the exact target block and re-completes it to a
unitary by a contraction dilation, so the calculus identities hold to
float precision while alpha and eps follow the closed-form bookkeeping.

With QNLS_DEBUG=1 every operation carries the intended matrix through
and re-checks the encoding definition after each step.
"""

from __future__ import annotations

import io
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import (AmplificationOverflowError, CompositionError,
                     DeskScaleError, DimensionMismatchError, InputError,
                     InvariantViolationError, RescaleRequiredError)
from .poly_system import SparseMatrix

DESK_SCALE_CAP = 4096
_EPS_FLOOR = 1e-16
_UNITARITY_TOL = 1e-10


def debug_enabled() -> bool:
    return os.environ.get("QNLS_DEBUG", "") == "1"


def _log2(x: float) -> float:
    return float(np.log2(max(x, 1.0 + 1e-12)))


def _eps_units(eps: float) -> float:
    """Error argument for symbolic cost formulas, floored away from zero."""
    return max(float(eps), _EPS_FLOOR)


@dataclass
class CostLedger:
    """Symbolic tally of oracle queries and encoding-primitive invocations.

    Counters only grow; ``merge`` is associative and commutative.  ``notes``
    keeps labeled cost terms (estimation-error charges are deliberately kept
    under separate labels rather than summed into the encoding-error terms).
    """

    oracle_queries: float = 0.0
    primitive_ops: float = 0.0
    amplification_cost: float = 0.0
    notes: dict[str, float] = field(default_factory=dict)

    def charge(self, label: str, *, oracle: float = 0.0, primitive: float = 0.0,
               amplification: float = 0.0, note: float | None = None) -> None:
        if min(oracle, primitive, amplification) < 0:
            raise InputError("ledger charges must be non-negative")
        self.oracle_queries += oracle
        self.primitive_ops += primitive
        self.amplification_cost += amplification
        amount = note if note is not None else oracle + primitive + amplification
        if amount:
            self.notes[label] = self.notes.get(label, 0.0) + amount

    def merge(self, other: "CostLedger") -> "CostLedger":
        notes = dict(self.notes)
        for k, v in other.notes.items():
            notes[k] = notes.get(k, 0.0) + v
        return CostLedger(self.oracle_queries + other.oracle_queries,
                          self.primitive_ops + other.primitive_ops,
                          self.amplification_cost + other.amplification_cost,
                          notes)

    def copy(self) -> "CostLedger":
        return CostLedger(self.oracle_queries, self.primitive_ops,
                          self.amplification_cost, dict(self.notes))


def _sqrt_psd(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(0.5 * (m + m.conj().T))
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.conj().T


def _dilate(block: np.ndarray) -> np.ndarray:
    """Unitary completion [[B, (I-BB*)^1/2], [(I-B*B)^1/2, -B*]] of a contraction."""
    d = block.shape[0]
    bdag = block.conj().T
    eye = np.eye(d)
    top_right = _sqrt_psd(eye - block @ bdag)
    bot_left = _sqrt_psd(eye - bdag @ block)
    u = np.zeros((2 * d, 2 * d), dtype=np.result_type(block, float))
    u[:d, :d] = block
    u[:d, d:] = top_right
    u[d:, :d] = bot_left
    u[d:, d:] = -bdag
    return u


@dataclass(frozen=True, eq=False)
class BlockEncoding:
    """Unitary with a designated top-left block: extract() = alpha * block."""

    logical_dim: int
    ancilla_dim: int
    unitary: np.ndarray
    alpha: float
    eps: float = 0.0
    intended: np.ndarray | None = None
    cost: float = 1.0

    def __post_init__(self):
        d, a = self.logical_dim, self.ancilla_dim
        if d <= 0 or a <= 0:
            raise InputError("dimensions must be positive")
        if d > DESK_SCALE_CAP:
            raise DeskScaleError(f"logical_dim {d} exceeds cap {DESK_SCALE_CAP}")
        if self.unitary.shape != (a * d, a * d):
            raise DimensionMismatchError("unitary must be (ancilla*logical) square")
        if not self.alpha > 0:
            raise InputError("alpha must be positive")
        if self.eps < 0:
            raise InputError("eps must be non-negative")
        if debug_enabled():
            self.verify()

    @property
    def block(self) -> np.ndarray:
        """Top-left logical block of the unitary (ancilla index 0 in and out)."""
        d = self.logical_dim
        return self.unitary[:d, :d]

    def extract(self) -> np.ndarray:
        return self.alpha * self.block

    def verify(self, unitarity_tol: float = _UNITARITY_TOL) -> None:
        u = self.unitary
        defect = np.linalg.norm(u.conj().T @ u - np.eye(u.shape[0]), 2)
        if defect > unitarity_tol:
            raise InvariantViolationError(f"unitarity defect {defect:.3e}")
        if self.intended is not None:
            err = np.linalg.norm(self.extract() - self.intended, 2)
            if err > self.eps + 1e-9:
                raise InvariantViolationError(
                    f"encoded block off intended by {err:.3e} (budget {self.eps:.3e})")

    def dump_text(self, stream=None) -> str:
        """Row-major scientific dump of the unitary, 17 significant digits."""
        buf = io.StringIO()
        for row in self.unitary:
            buf.write(" ".join(f"{v:.16e}" for v in np.real_if_close(row)))
            buf.write("\n")
        text = buf.getvalue()
        if stream is not None:
            stream.write(text)
        return text


def extract_block(be: BlockEncoding) -> np.ndarray:
    """alpha * TopLeftBlock(U), the matrix the encoding stands for."""
    return be.extract()


def _mk(block: np.ndarray, alpha: float, eps: float, intended, cost: float,
        d: int | None = None) -> BlockEncoding:
    """Complete a contraction block to a fresh two-ancilla encoding."""
    d = block.shape[0] if d is None else d
    nrm = np.linalg.norm(block, 2)
    if nrm > 1.0 + 1e-9:
        raise CompositionError(f"block norm {nrm:.6f} exceeds 1; cannot dilate")
    if nrm > 1.0:
        block = block / nrm
    return BlockEncoding(d, 2, _dilate(block), alpha, eps, intended, cost)


def be_identity(d: int) -> BlockEncoding:
    """Exact encoding of the d-dimensional identity (trivial ancilla)."""
    return BlockEncoding(d, 1, np.eye(d), 1.0, 0.0, np.eye(d), 1.0)


def be_of_matrix(m: np.ndarray, *, alpha: float = 1.0, eps: float = 0.0,
                 cost: float = 1.0) -> BlockEncoding:
    """Encode an explicit contraction m/alpha directly (artifact plumbing)."""
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InputError("need a square matrix")
    return _mk(m / alpha, alpha, eps, m.copy(), cost)


def be_from_sparse(a: SparseMatrix, s: int,
                   ledger: CostLedger | None = None) -> BlockEncoding:
    """Encoding of A/s from sparse-entry access; alpha = s, exact at desk scale."""
    if a.dim_rows != a.dim_cols:
        raise InputError("sparse encoding needs a square matrix")
    if a.max_abs_entry() > 1.0 + 1e-12:
        raise RescaleRequiredError(
            f"entry magnitude {a.max_abs_entry():.6f} exceeds 1; rescale first")
    if max(a.row_nnz_max(), a.col_nnz_max()) > s:
        raise InputError("per-row/column nonzero count exceeds declared sparsity")
    if s <= 0:
        raise InputError("sparsity must be positive")
    d = a.dim_rows
    cost = _log2(d) + _log2(1.0 / _eps_units(0.0)) ** 2.5
    if ledger is not None:
        ledger.charge("sparse_encode", oracle=cost)
    dense = a.to_dense()
    return _mk(dense / s, float(s), 0.0, dense, cost)


def be_from_vector(x: np.ndarray,
                   ledger: CostLedger | None = None) -> BlockEncoding:
    """Exact encoding of the outer product x x^T for ||x|| <= 1.

    A strictly subunit vector is first embedded in a one-dimension-larger
    space where it is a unit state; only the top-left n x n block is read.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise InputError("x must be a vector")
    n = x.size
    nrm = float(np.linalg.norm(x))
    if nrm > 1.0 + 1e-12:
        raise InputError(f"||x|| = {nrm:.6f} exceeds 1")
    if nrm >= 1.0 - 1e-12:
        proj = np.outer(x, x) / (nrm * nrm) if nrm > 0 else np.outer(x, x)
        u0 = np.block([[proj, np.eye(n) - proj],
                       [np.eye(n) - proj, -proj]])
        total = 2 * n
    else:
        pad = np.sqrt(max(0.0, 1.0 - nrm * nrm))
        xt = np.concatenate([x, [pad]])
        proj = np.outer(xt, xt)
        m = n + 1
        u0 = np.block([[proj, np.eye(m) - proj],
                       [np.eye(m) - proj, -proj]])
        total = 2 * m
    anc = -(-total // n)          # ceil division
    u = np.eye(anc * n)
    u[:total, :total] = u0
    cost = _log2(n) + 1.0
    if ledger is not None:
        ledger.charge("state_encode", primitive=cost)
    return BlockEncoding(n, anc, u, 1.0, 0.0, np.outer(x, x), cost)


def be_outer(u: np.ndarray, v: np.ndarray,
             ledger: CostLedger | None = None) -> BlockEncoding:
    """Encoding of the rank-one matrix u v^T with alpha >= ||u|| ||v||."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape or u.ndim != 1:
        raise InputError("u and v must be equal-length vectors")
    alpha = max(1.0, float(np.linalg.norm(u) * np.linalg.norm(v)) / (1.0 - 1e-9))
    m = np.outer(u, v)
    cost = _log2(u.size) + 1.0
    if ledger is not None:
        ledger.charge("state_encode", primitive=cost)
    return _mk(m / alpha, alpha, 0.0, m, cost)


def be_product(left: BlockEncoding, right: BlockEncoding,
               ledger: CostLedger | None = None) -> BlockEncoding:
    """Encoding of the product: blocks multiply, alphas multiply."""
    if left.logical_dim != right.logical_dim:
        raise DimensionMismatchError("product operands must share logical_dim")
    block = left.block @ right.block
    alpha = left.alpha * right.alpha
    eps = left.alpha * right.eps + right.alpha * left.eps
    intended = None
    if left.intended is not None and right.intended is not None:
        intended = left.intended @ right.intended
    if ledger is not None:
        ledger.charge("product", primitive=1.0)
    return _mk(block, alpha, eps, intended, left.cost + right.cost + 1.0)


def be_tensor(factors: list[BlockEncoding],
              ledger: CostLedger | None = None) -> BlockEncoding:
    """Encoding of the Kronecker product of the factors (first = leftmost)."""
    if not factors:
        raise InputError("need at least one factor")
    if len(factors) == 1:
        return factors[0]
    block = factors[0].block
    intended = factors[0].intended
    alpha = factors[0].alpha
    for f in factors[1:]:
        block = np.kron(block, f.block)
        alpha *= f.alpha
        intended = (np.kron(intended, f.intended)
                    if intended is not None and f.intended is not None else None)
    eps = 0.0
    for i, f in enumerate(factors):
        scale = 1.0
        for j, g in enumerate(factors):
            if j != i:
                scale *= g.alpha
        eps += scale * f.eps
    if ledger is not None:
        ledger.charge("tensor", primitive=1.0)
    return _mk(block, alpha, eps, intended, sum(f.cost for f in factors) + 1.0)


def be_sum(terms: list[BlockEncoding], signs: list[int] | None = None,
           ledger: CostLedger | None = None) -> BlockEncoding:
    """Encoding of the signed sum: extract(out) = sum_i sign_i extract(term_i).

    Terms are first renormalized to the largest alpha; the uniform-coefficient
    combination then gives alpha_out = m * alpha_common.
    """
    if not terms:
        raise InputError("need at least one term")
    m = len(terms)
    if signs is None:
        signs = [1] * m
    if len(signs) != m or any(s not in (-1, 1) for s in signs):
        raise InputError("signs must be +-1, one per term")
    d = terms[0].logical_dim
    if any(t.logical_dim != d for t in terms):
        raise DimensionMismatchError("sum terms must share logical_dim")
    alpha_c = max(t.alpha for t in terms)
    if not np.isfinite(alpha_c) or alpha_c <= 0:
        raise CompositionError("cannot renormalize terms to a common alpha")
    block = np.zeros((d, d))
    for t, s in zip(terms, signs):
        block = block + s * (t.alpha / alpha_c) * t.block
    block /= m
    intended = None
    if all(t.intended is not None for t in terms):
        intended = sum(s * t.intended for t, s in zip(terms, signs))
    if ledger is not None:
        ledger.charge("sum", primitive=float(m))
    return _mk(block, m * alpha_c, sum(t.eps for t in terms), intended,
               sum(t.cost for t in terms) + m)


def be_amplify(be: BlockEncoding, factor: float,
               ledger: CostLedger | None = None) -> BlockEncoding:
    """Uniform singular-value amplification: block *= factor, alpha /= factor.

    The represented matrix extract() is unchanged; only the subnormalization
    headroom is consumed.  Requires factor * ||block|| <= 1 - 1e-6.
    """
    if factor < 1.0:
        raise InputError("amplification factor must be >= 1")
    if factor == 1.0:
        return be
    nrm = float(np.linalg.norm(be.block, 2))
    if factor * nrm > 1.0 - 1e-6 + 1e-9:
        raise AmplificationOverflowError(
            f"factor {factor:.4g} * block norm {nrm:.4g} exceeds 1 - 1e-6")
    charge = factor * _log2(factor / _eps_units(be.eps))
    if ledger is not None:
        ledger.charge("amplify", amplification=charge)
    return _mk(factor * be.block, be.alpha / factor, be.eps, be.intended,
               be.cost * max(charge, 1.0))


def be_transpose(be: BlockEncoding) -> BlockEncoding:
    """Encoding of the transposed block (U^T is unitary; same alpha, eps)."""
    intended = be.intended.T if be.intended is not None else None
    return BlockEncoding(be.logical_dim, be.ancilla_dim, be.unitary.T.copy(),
                         be.alpha, be.eps, intended, be.cost)


def be_rescale(be: BlockEncoding, c: float) -> BlockEncoding:
    """Reinterpret the encoding as standing for c * extract() (alpha *= |c|).

    Pure bookkeeping for c > 0: dividing out a known scalar (e.g. an
    estimated |x|^2) or damping a term before a sum costs no circuit work
    at desk scale.  A negative c folds the sign into the block.
    """
    if c == 0 or not np.isfinite(c):
        raise InputError("rescale factor must be finite and nonzero")
    intended = c * be.intended if be.intended is not None else None
    if c > 0:
        return BlockEncoding(be.logical_dim, be.ancilla_dim, be.unitary,
                             be.alpha * c, be.eps * c, intended, be.cost)
    return _mk(-be.block, be.alpha * (-c), be.eps * (-c), intended, be.cost)
