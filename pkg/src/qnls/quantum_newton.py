"""The end-to-end simulated quantum Newton iteration.

Builds the block-diagonal gradient operator M and value operator A, the
P sandwich, the reference-state construction whose top-left block carries
the gradient matrix elements, pseudo-inverts the scaled Jacobian and
assembles the rank-one density update

    x' x'^T = x x^T - x d^T - d x^T + d d^T,     d = J^{-1} F(x),

entirely inside the block-encoding calculus.  The overlap factor
gamma^{2p-1}/sqrt(n) carried by the Jacobian encoding cancels against the
right-hand-side encoding by construction and never needs amplification.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .block_encoding import (BlockEncoding, CostLedger, _eps_units, _log2,
                             be_amplify, be_from_sparse, be_from_vector,
                             be_identity, be_outer, be_product, be_rescale,
                             be_sum, be_tensor, be_transpose, debug_enabled)
from .errors import (DegenerateReferenceError, InputError,
                     InvariantViolationError, RescaleRequiredError,
                     SingularJacobianError)
from .poly_system import (FactorPermutation, InhomogeneousSystem, MixedSystem,
                          PolynomialSystem, SparseMatrix, evaluate, jacobian,
                          mixed_evaluate, mixed_jacobian)
from .svt import (InversionConfig, max_eigenvalue, min_singular_value,
                  sv_invert)

GAMMA_FLOOR = 1e-4


# ---------------------------------------------------------------------------
# Register helpers
# ---------------------------------------------------------------------------

def _householder_map(target: np.ndarray) -> np.ndarray:
    """Symmetric orthogonal matrix sending e_0 to the given unit vector."""
    v = target / np.linalg.norm(target)
    w = v.copy()
    w[0] -= 1.0
    nw2 = float(np.dot(w, w))
    if nw2 < 1e-28:
        return np.eye(v.size)
    return np.eye(v.size) - 2.0 * np.outer(w, w) / nw2


def _householder_uniform(n: int) -> np.ndarray:
    return _householder_map(np.full(n, 1.0 / np.sqrt(n)))


def _perm_order(dims: tuple[int, ...], axes: tuple[int, ...]) -> np.ndarray:
    return np.arange(int(np.prod(dims))).reshape(dims).transpose(axes).ravel()


def _apply_left(op: np.ndarray, mat: np.ndarray, dims: tuple[int, ...],
                axis: int) -> np.ndarray:
    """(I x .. op .. x I) @ mat, op acting on row register `axis`."""
    rows, cols = mat.shape
    t = np.moveaxis(mat.reshape(dims + (cols,)), axis, 0)
    shp = t.shape
    t = (op @ t.reshape(shp[0], -1)).reshape(shp)
    return np.moveaxis(t, 0, axis).reshape(rows, cols)


def _apply_right(mat: np.ndarray, op: np.ndarray, dims: tuple[int, ...],
                 axis: int) -> np.ndarray:
    """mat @ (I x .. op .. x I), op acting on column register `axis`."""
    rows, cols = mat.shape
    t = np.tensordot(mat.reshape((rows,) + dims), op, axes=([1 + axis], [0]))
    return np.moveaxis(t, -1, 1 + axis).reshape(rows, cols)


def _encode_matrix_auto(m: SparseMatrix,
                        ledger: CostLedger | None = None) -> BlockEncoding:
    """Sparse encoding with automatic entry rescaling folded into alpha."""
    ent = m.max_abs_entry()
    s = max(1, m.row_nnz_max(), m.col_nnz_max())
    if ent <= 1.0:
        return be_from_sparse(m, s, ledger)
    return be_rescale(be_from_sparse(m.scaled(1.0 / ent), s, ledger), ent)


def recover_vector(be_xxT: BlockEncoding,
                   sign_reference: np.ndarray | None = None) -> np.ndarray:
    """Dominant eigenvector of the encoded rank-one operator, scaled to x.

    The outer product fixes x only up to a global sign; the reference picks
    the branch with non-negative overlap.
    """
    m = be_xxT.extract()
    m = 0.5 * (m + m.T)
    w, v = np.linalg.eigh(m)
    lam = max(float(w[-1]), 0.0)
    x = np.sqrt(lam) * v[:, -1]
    if sign_reference is not None and float(np.dot(x, sign_reference)) < 0:
        x = -x
    if debug_enabled():
        rest = np.max(np.abs(w[:-1])) if w.size > 1 else 0.0
        if rest > 1e-7 * max(1.0, lam):
            raise InvariantViolationError(
                f"encoded state not rank one (second eigenvalue {rest:.3e})")
    return x


# ---------------------------------------------------------------------------
# Operator constructions
# ---------------------------------------------------------------------------

def _require_canonical(system: PolynomialSystem) -> None:
    if system.max_entry() > 1.0 + 1e-12:
        raise RescaleRequiredError("coefficient entries exceed 1; canonicalize first")
    if system.p * system.max_norm() > np.sqrt(system.n) + 1e-9:
        raise RescaleRequiredError(
            "p * max ||A_i|| exceeds sqrt(n); canonicalize first")


def build_M_blockdiag(system: PolynomialSystem,
                      ledger: CostLedger | None = None) -> BlockEncoding:
    """Encoding of blockdiag(M_D^1 .. M_D^n) / (p s), via per-permutation sums."""
    _require_canonical(system)
    n, p, s = system.n, system.p, system.sparsity
    d = n ** p
    big = n * d
    parts = []
    for j in range(1, p + 1):
        rows, cols, vals = [], [], []
        q = FactorPermutation(p, n, j)
        for i, a in enumerate(system.equations):
            rows.append(q.apply(a.rows) + i * d)
            cols.append(q.apply(a.cols) + i * d)
            vals.append(a.vals)
        mdj = SparseMatrix(big, big,
                           np.concatenate(rows) if rows else np.zeros(0, int),
                           np.concatenate(cols) if cols else np.zeros(0, int),
                           np.concatenate(vals) if vals else np.zeros(0))
        parts.append(be_from_sparse(mdj, s, ledger))
    out = be_sum(parts, ledger=ledger)
    if debug_enabled():
        intended = np.zeros((big, big))
        for i in range(n):
            md = system.m_d(i).to_dense()
            intended[i * d:(i + 1) * d, i * d:(i + 1) * d] = md
        out = dataclasses.replace(out, intended=intended)
        out.verify()
    return out


def build_A_blockdiag(system: PolynomialSystem,
                      ledger: CostLedger | None = None) -> BlockEncoding:
    """Encoding of blockdiag(A_1/2 .. A_n/2) / s."""
    n, p, s = system.n, system.p, system.sparsity
    d = n ** p
    big = n * d
    rows = np.concatenate([a.rows + i * d for i, a in enumerate(system.equations)])
    cols = np.concatenate([a.cols + i * d for i, a in enumerate(system.equations)])
    vals = np.concatenate([0.5 * a.vals for a in system.equations])
    return be_from_sparse(SparseMatrix(big, big, rows, cols, vals), s, ledger)


def build_P(be_m: BlockEncoding, be_xxT: BlockEncoding, p: int, n: int,
            ledger: CostLedger | None = None) -> BlockEncoding:
    """Encoding of (I x (xx^T)^{p-1} x I) M (I x (xx^T)^{p}), alpha = p s."""
    left_factors = [be_identity(n)] + [be_xxT] * (p - 1) + [be_identity(n)]
    right_factors = [be_identity(n)] + [be_xxT] * p
    left = be_tensor(left_factors, ledger)
    right = be_tensor(right_factors, ledger)
    return be_product(left, be_product(be_m, right, ledger), ledger)


def _reference_unit(n: int, x_ref: np.ndarray | None) -> np.ndarray:
    if x_ref is None:
        r = np.zeros(n)
        r[0] = 1.0
        return r
    r = np.asarray(x_ref, dtype=np.float64)
    if r.shape != (n,):
        raise InputError("reference vector has wrong length")
    nrm = float(np.linalg.norm(r))
    if nrm == 0:
        raise DegenerateReferenceError("zero reference vector")
    return r / nrm


def jacobian_sandwich_be(system: PolynomialSystem, be_xxT: BlockEncoding,
                         x_ref: np.ndarray | None = None, *,
                         x_hint: np.ndarray | None = None,
                         ledger: CostLedger | None = None
                         ) -> tuple[BlockEncoding, float]:
    """The U_m U_p construction around the P encoding.

    Matrix element (i, k) of the returned top-left block equals
    gamma^{2p-1} (grad f_k(x))_i / (sqrt(n) * alpha_P); with alpha = alpha_P
    the extracted matrix is gamma^{2p-1} J(x)^T / sqrt(n).
    """
    n, p = system.n, system.p
    refu = _reference_unit(n, x_ref)
    x = x_hint if x_hint is not None else recover_vector(be_xxT, refu)
    gamma = float(np.dot(refu, x))
    if abs(gamma) < GAMMA_FLOOR:
        raise DegenerateReferenceError(
            f"overlap {gamma:.2e} below {GAMMA_FLOOR}; move the reference "
            "state closer to the iterate")
    be_m = build_M_blockdiag(system, ledger)
    be_p = build_P(be_m, be_xxT, p, n, ledger)
    a_anc = be_p.ancilla_dim
    dims_in = (a_anc,) + (n,) * (p - 1) + (n, n)
    dims_up = (a_anc, n) + (n,) * (p - 1) + (n,)
    dims_out = dims_in
    axes1 = (0, p + 1) + tuple(range(1, p)) + (p,)
    axes2 = (0,) + tuple(range(2, p + 1)) + (1, p + 1)
    sigma1 = _perm_order(dims_in, axes1)
    sigma2 = _perm_order(dims_up, axes2)
    w = be_p.unitary[:, np.argsort(sigma1)][sigma2, :]
    w = _apply_left(_householder_uniform(n), w, dims_out, p)
    vref = None if x_ref is None else _householder_map(refu)
    if vref is not None:
        for ax in range(1, p):
            w = _apply_left(vref, w, dims_out, ax)
            w = _apply_right(w, vref, dims_in, ax)
        w = _apply_right(w, vref, dims_in, p)
    intended = None
    if debug_enabled():
        intended = gamma ** (2 * p - 1) * jacobian(system, x).T / np.sqrt(n)
    out = BlockEncoding(n, w.shape[0] // n, w, be_p.alpha, be_p.eps,
                        intended, be_p.cost + 2.0)
    if ledger is not None:
        ledger.charge("gradient_sandwich", primitive=2.0)
    return out, gamma


def jacobian_be(system: PolynomialSystem, be_xxT: BlockEncoding,
                x_ref: np.ndarray | None = None, *,
                x_hint: np.ndarray | None = None,
                ledger: CostLedger | None = None
                ) -> tuple[BlockEncoding, float]:
    """Encoding of gamma^{2p-1} J(x) / sqrt(n), amplified toward alpha = 1."""
    sand, gamma = jacobian_sandwich_be(system, be_xxT, x_ref,
                                       x_hint=x_hint, ledger=ledger)
    be_j = be_transpose(sand)
    nrm = float(np.linalg.norm(be_j.block, 2))
    factor = min(be_j.alpha, (1.0 - 1e-6) / max(nrm, 1e-300))
    if factor > 1.0:
        be_j = be_amplify(be_j, factor, ledger)
    return be_j, gamma


def rhs_be(system: PolynomialSystem, be_xxT: BlockEncoding,
           x_ref: np.ndarray | None = None, *,
           x_hint: np.ndarray | None = None,
           ledger: CostLedger | None = None) -> BlockEncoding:
    """Encoding of gamma^{2p-1} F(x) x^T / sqrt(n) via the A sandwich."""
    n, p = system.n, system.p
    refu = _reference_unit(n, x_ref)
    x = x_hint if x_hint is not None else recover_vector(be_xxT, refu)
    gamma = float(np.dot(refu, x))
    if abs(gamma) < GAMMA_FLOOR:
        raise DegenerateReferenceError(
            f"overlap {gamma:.2e} below {GAMMA_FLOOR}")
    be_a = build_A_blockdiag(system, ledger)
    tens = be_tensor([be_identity(n)] + [be_xxT] * p, ledger)
    be_r = be_product(tens, be_product(be_a, tens, ledger), ledger)
    a_anc = be_r.ancilla_dim
    # axes: 0 ancilla, 1 equation index, 2..p leading x-registers, p+1 last
    dims = (a_anc, n) + (n,) * (p - 1) + (n,)
    axes3 = (0, p + 1) + tuple(range(2, p + 1)) + (1,)
    sigma3 = _perm_order(dims, axes3)
    w = be_r.unitary
    w = _apply_right(w, _householder_uniform(n), dims, 1)
    vref = None if x_ref is None else _householder_map(refu)
    if vref is not None:
        for ax in range(2, p + 1):
            w = _apply_right(w, vref, dims, ax)
    w = w[sigma3, :]
    if vref is not None:
        for ax in range(1, p + 1):
            w = _apply_left(vref, w, dims, ax)
    intended = None
    if debug_enabled():
        intended = (gamma ** (2 * p - 1) * np.outer(evaluate(system, x), x)
                    / np.sqrt(n))
    out = BlockEncoding(n, w.shape[0] // n, w, be_r.alpha, be_r.eps,
                        intended, be_r.cost + 2.0)
    if ledger is not None:
        ledger.charge("rhs_sandwich", primitive=2.0)
    return out


def norm_estimate(be_xxT: BlockEncoding, eps: float,
                  ledger: CostLedger | None = None) -> float:
    """|x|^2 as the largest eigenvalue of the encoded x x^T."""
    return max_eigenvalue(be_xxT, eps, ledger)


# ---------------------------------------------------------------------------
# Newton state, trace, iteration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NewtonState:
    """Snapshot after k steps; sigma_k/gamma_k are the values measured at the
    iterate the last step departed from (None before any step)."""

    k: int
    be_xxT: BlockEncoding
    x: np.ndarray
    x_norm_sq: float
    sigma_k: float | None
    gamma_k: float | None
    ledger: CostLedger


@dataclass(frozen=True)
class TraceRow:
    k: int
    residual: float
    x_norm_sq: float
    sigma_k: float | None
    gamma_k: float | None
    oracle_queries: float
    primitive_ops: float
    amplification_cost: float


TRACE_HEADER = ("iter,residual,x_norm_sq,sigma_k,gamma_k,"
                "oracle_queries,primitive_ops,amplification_cost")


@dataclass
class NewtonTrace:
    rows: list[TraceRow]
    halted: str | None = None

    def to_csv(self) -> str:
        def cell(v):
            return "" if v is None else f"{v:.17g}"

        lines = [TRACE_HEADER]
        for r in self.rows:
            lines.append(",".join([
                str(r.k), cell(r.residual), cell(r.x_norm_sq), cell(r.sigma_k),
                cell(r.gamma_k), cell(r.oracle_queries), cell(r.primitive_ops),
                cell(r.amplification_cost)]))
        return "\n".join(lines) + "\n"


def _split_system(system):
    if isinstance(system, PolynomialSystem):
        return system, None, None
    if isinstance(system, MixedSystem):
        lin = system.linear if system.linear.nnz else None
        const = system.constants if np.any(system.constants) else None
        return system.nonlinear, lin, const
    raise InputError(f"unsupported system type {type(system).__name__}")


def system_evaluators(system):
    """(F, J) callables for any of the system flavors."""
    if isinstance(system, PolynomialSystem):
        return (lambda x: evaluate(system, x),
                lambda x: jacobian(system, x))
    if isinstance(system, MixedSystem):
        return (lambda x: mixed_evaluate(system, x),
                lambda x: mixed_jacobian(system, x))
    if isinstance(system, InhomogeneousSystem):
        return system.evaluate, system.jacobian
    raise InputError(f"unsupported system type {type(system).__name__}")


def newton_step(system, state: NewtonState, cfg: InversionConfig, *,
                x_ref: np.ndarray | None = None) -> NewtonState:
    """One density-matrix Newton update built from the calculus.

    All four terms enter the uniform sum scaled by the inversion threshold
    (the *-scaled pseudoinverse makes the gamma and sqrt(n) factors cancel);
    the sum is then rescaled back and re-amplified so the next state again
    carries x x^T at alpha ~ 1.
    """
    led = state.ledger.copy()
    poly, lin, const = _split_system(system)
    n = system.n
    p_half = poly.p if poly is not None else 1
    floor = cfg.sigma_floor
    nx2 = norm_estimate(state.be_xxT, cfg.eps, led)
    refu = _reference_unit(n, x_ref)
    x = state.x
    gamma = float(np.dot(refu, x))
    if abs(gamma) < GAMMA_FLOOR:
        raise DegenerateReferenceError(f"overlap {gamma:.2e} below {GAMMA_FLOOR}")
    ghat = gamma ** (2 * p_half - 1)
    rootn = np.sqrt(n)

    be_lin = _encode_matrix_auto(lin, led) if lin is not None else None

    j_parts = []
    if poly is not None:
        be_jnl, _ = jacobian_be(poly, state.be_xxT, x_ref, x_hint=x, ledger=led)
        j_parts.append(be_jnl)
    if be_lin is not None:
        j_parts.append(be_rescale(be_lin, ghat / rootn))
    be_j = j_parts[0] if len(j_parts) == 1 else be_sum(j_parts, ledger=led)

    sigma_meas = min_singular_value(be_j, cfg.eps, led)
    if sigma_meas < floor:
        raise SingularJacobianError(
            f"scaled Jacobian singular value {sigma_meas:.3e} below the "
            f"floor {floor:.3e} at step {state.k}")

    inv_cfg = InversionConfig(min(floor / be_j.alpha, 1.0 - 1e-9),
                              cfg.eps, cfg.backend)
    scale = inv_cfg.sigma_floor * be_j.alpha     # extract(inv) = scale * pinv(extract(be_j))
    be_inv = sv_invert(be_j, inv_cfg, led)

    r_parts = []
    if poly is not None:
        r_parts.append(rhs_be(poly, state.be_xxT, x_ref, x_hint=x, ledger=led))
    if be_lin is not None:
        r_parts.append(be_rescale(be_product(be_lin, state.be_xxT, led),
                                  ghat / rootn))
    if const is not None:
        outer_ref = be_outer(const, refu, led)
        r_parts.append(be_rescale(be_product(outer_ref, state.be_xxT, led),
                                  ghat / (rootn * gamma)))
    be_r = r_parts[0] if len(r_parts) == 1 else be_sum(r_parts, ledger=led)

    t2 = be_product(be_inv, be_r, led)                     # scale * d x^T
    t3 = be_transpose(t2)
    if nx2 < 1e-12:
        raise SingularJacobianError("iterate norm collapsed to zero")
    be_ff = be_rescale(be_product(be_r, be_transpose(be_r), led), 1.0 / nx2)
    led.charge("norm_removal",
               amplification=_log2(1.0 / nx2) / (nx2 * _eps_units(cfg.eps)))
    t4 = be_product(be_inv, be_product(be_ff, be_transpose(be_inv), led), led)

    terms = [be_rescale(state.be_xxT, scale), t2, t3, be_rescale(t4, 1.0 / scale)]
    summed = be_sum(terms, [1, -1, -1, 1], led)            # scale * x' x'^T
    out = be_rescale(summed, 1.0 / scale)
    nrm = float(np.linalg.norm(out.block, 2))
    factor = min(out.alpha, (1.0 - 1e-6) / max(nrm, 1e-300))
    if factor > 1.0:
        out = be_amplify(out, factor, led)

    x_next = recover_vector(out, sign_reference=x)
    if debug_enabled():
        f_eval, j_eval = system_evaluators(system)
        x_classical = x - np.linalg.solve(j_eval(x), f_eval(x))
        out = dataclasses.replace(out,
                                  intended=np.outer(x_classical, x_classical))
        out.verify()
    return NewtonState(state.k + 1, out, x_next,
                       float(np.dot(x_next, x_next)),
                       float(sigma_meas), gamma, led)


def newton_solve(system, x0: np.ndarray, t: int, cfg: InversionConfig, *,
                 gamma_reference: str = "e1",
                 ledger: CostLedger | None = None
                 ) -> tuple[NewtonState, NewtonTrace]:
    """Run t simulated Newton steps from the encoding of x0 x0^T.

    gamma_reference picks the sandwich reference state: 'e1' (first basis
    vector, gamma = first iterate component), 'x0' (frozen initial state),
    or 'previous' (re-referenced to the current iterate each step).
    Returns the final state and the per-iteration trace; a singular
    Jacobian stops early and is recorded on the trace instead of raising.
    """
    if t < 0:
        raise InputError("iteration count must be non-negative")
    if gamma_reference not in ("e1", "x0", "previous"):
        raise InputError(f"unknown gamma reference {gamma_reference!r}")
    x0 = np.asarray(x0, dtype=np.float64)
    if x0.shape != (system.n,):
        raise InputError(f"x0 must have length {system.n}")
    if np.linalg.norm(x0) > 1.0 + 1e-12:
        raise InputError("||x0|| must be at most 1")
    led = ledger.copy() if ledger is not None else CostLedger()
    be0 = be_from_vector(x0, led)
    eps_step = cfg.eps / (3.0 * max(t, 1))
    step_cfg = InversionConfig(cfg.sigma_floor, eps_step, cfg.backend)
    states = [NewtonState(0, be0, x0.copy(), float(np.dot(x0, x0)),
                          None, None, led)]
    halted = None
    for k in range(t):
        if gamma_reference == "e1":
            ref = None
        elif gamma_reference == "x0":
            ref = x0
        else:
            ref = states[-1].x
        try:
            states.append(newton_step(system, states[-1], step_cfg, x_ref=ref))
        except (SingularJacobianError, DegenerateReferenceError) as exc:
            halted = str(exc)
            break
    f_eval, _ = system_evaluators(system)
    rows = []
    for i, st in enumerate(states):
        nxt = states[i + 1] if i + 1 < len(states) else None
        rows.append(TraceRow(
            k=st.k,
            residual=float(np.linalg.norm(f_eval(st.x))),
            x_norm_sq=st.x_norm_sq,
            sigma_k=nxt.sigma_k if nxt is not None else None,
            gamma_k=nxt.gamma_k if nxt is not None else None,
            oracle_queries=st.ledger.oracle_queries,
            primitive_ops=st.ledger.primitive_ops,
            amplification_cost=st.ledger.amplification_cost))
    return states[-1], NewtonTrace(rows, halted)


def init_heuristic(system: PolynomialSystem, candidates, eps: float = 1e-6,
                   ledger: CostLedger | None = None
                   ) -> tuple[np.ndarray, list[float]]:
    """Pick the candidate with the smallest max_i |f_i| residual.

    Each candidate is scored through the block-diagonal value operator:
    the squared operator is PSD, its largest eigenvalue is
    (max_i |f_i(x)| * |x|^{2p})^2, and the norm-estimate power divides the
    |x|^{2p} factor back out.
    """
    cands = [np.asarray(c, dtype=np.float64) for c in candidates]
    if not cands:
        raise InputError("need at least one candidate")
    n, p = system.n, system.p
    be_a = build_A_blockdiag(system, ledger)
    values = []
    for c in cands:
        if c.shape != (n,):
            raise InputError("candidate of wrong length")
        if np.linalg.norm(c) > 1.0 + 1e-12:
            raise InputError("candidates must have norm at most 1")
        be_c = be_from_vector(c, ledger)
        tens = be_tensor([be_identity(n)] + [be_c] * p, ledger)
        op = be_product(tens, be_product(be_a, tens, ledger), ledger)
        sq = be_product(op, be_transpose(op), ledger)
        m2 = max_eigenvalue(sq, eps, ledger)
        nx2 = norm_estimate(be_c, eps, ledger)
        if nx2 < 1e-14:
            values.append(0.0)
        else:
            values.append(float(np.sqrt(max(m2, 0.0)) / nx2 ** p))
    best = int(np.argmin(values))
    return cands[best], values


# ---------------------------------------------------------------------------
# Single-function inhomogeneous building block (experimental)
# ---------------------------------------------------------------------------

def inhomogeneous_term_be(c: np.ndarray, bs, be_xxT: BlockEncoding,
                          ledger: CostLedger | None = None) -> BlockEncoding:
    """Encoding of (xx^T)^{(p-1)} (x) x c^T (x) grad g(x) x^T for one term
    g(x) = (c^T x) * prod_k (x^T B_k x), with c a unit vector.

    Verified building block for the inhomogeneous extension; the n-function
    assembly on top of it is deliberately not part of the solver pipeline.
    """
    c = np.asarray(c, dtype=np.float64)
    if abs(np.linalg.norm(c) - 1.0) > 1e-9:
        raise InputError("c must be a unit vector (state-preparation input)")
    bs = list(bs)
    if not bs:
        raise InputError("need at least one quadratic factor")
    p = len(bs)
    n = c.size
    big = SparseMatrix.from_dense(_kron_all([b.to_dense() for b in bs]))
    be_cc = be_from_vector(c, ledger)
    # route 1: b(x) * (xx^T)^{p-1} (x) x c^T (x) c x^T
    big_sym = big.symmetrized()
    be_b = _encode_matrix_auto(big_sym, ledger)
    emb_b = be_tensor([be_b, be_identity(n)], ledger)
    t_all = be_tensor([be_xxT] * p + [be_cc], ledger)
    prod1 = be_product(t_all, be_product(emb_b, t_all, ledger), ledger)
    swap_last = _swap_last_two_registers(n ** (p - 1), n)
    s1 = be_product(prod1, swap_last, ledger)
    # route 2: (x^T c) * (xx^T)^{p-1} (x) x c^T (x) grad b(x) x^T
    md_rows, md_cols, md_vals = [], [], []
    for j in range(1, p + 1):
        q = FactorPermutation(p, n, j)
        md_rows.append(q.apply(big_sym.rows))
        md_cols.append(q.apply(big_sym.cols))
        md_vals.append(big_sym.vals)
    md = _merge_entries(n ** p, np.concatenate(md_rows),
                        np.concatenate(md_cols), np.concatenate(md_vals))
    be_md = _encode_matrix_auto(md, ledger)
    left = be_tensor([be_xxT] * (p - 1) + [be_identity(n)], ledger)
    right = be_tensor([be_xxT] * p, ledger)
    # the M_D sandwich carries grad of (1/2) x^{op T} B x^{op}; b(x) lacks the 1/2
    grad_obj = be_rescale(
        be_product(left, be_product(be_md, right, ledger), ledger), 2.0)
    tens2 = be_tensor([grad_obj, be_cc], ledger)
    conj = be_product(swap_last, be_product(tens2, swap_last, ledger), ledger)
    be_xc = be_product(be_xxT, be_cc, ledger)
    emb = be_tensor([be_identity(n ** (p - 1)), be_xc, be_identity(n)], ledger)
    s2 = be_product(emb, conj, ledger)
    return be_sum([s1, s2], ledger=ledger)


def _kron_all(mats) -> np.ndarray:
    out = np.ones((1, 1))
    for m in mats:
        out = np.kron(out, m)
    return out


def _merge_entries(d: int, rows: np.ndarray, cols: np.ndarray,
                   vals: np.ndarray) -> SparseMatrix:
    keys = rows * d + cols
    uniq, inv = np.unique(keys, return_inverse=True)
    acc = np.zeros(uniq.size)
    np.add.at(acc, inv, vals)
    return SparseMatrix(d, d, uniq // d, uniq % d, acc)


def _swap_last_two_registers(head_dim: int, n: int) -> BlockEncoding:
    d = head_dim * n * n
    order = _perm_order((head_dim, n, n), (0, 2, 1))
    u = np.zeros((d, d))
    u[np.arange(d), order] = 1.0
    return BlockEncoding(d, 1, u, 1.0, 0.0, u.copy(), 1.0)
