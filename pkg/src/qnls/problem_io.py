"""Line-oriented problem file format (UTF-8 text, `#` comments).

Header: `version 1`, `kind homogeneous|mixed|inhomogeneous`, `n`, `p`, `s`.
Then one `equation <i>` ... `end` block per equation containing
`a <row> <col> <value>` sparse entries of the homogeneous part (0-based,
row-major over n^p), `lin <j> <value>` linear coefficients, `const <value>`,
and, for the inhomogeneous kind, `term` sub-blocks of `c <j> <value>` and
`B <k> <row> <col> <value>` lines.  Floats are written with 17 significant
digits so that write -> parse -> write is bit-identical.
"""

from __future__ import annotations

import os
import tempfile
from typing import TextIO, Union

import numpy as np

from .errors import ParseError
from .poly_system import (InhomogeneousPolynomial, InhomogeneousSystem,
                          MixedSystem, PolynomialSystem, SparseMatrix)

Problem = Union[PolynomialSystem, MixedSystem, InhomogeneousSystem]


def _fmt(v: float) -> str:
    return f"{v:.17g}"


def problem_kind(problem: Problem) -> str:
    if isinstance(problem, PolynomialSystem):
        return "homogeneous"
    if isinstance(problem, MixedSystem):
        return "mixed"
    if isinstance(problem, InhomogeneousSystem):
        return "inhomogeneous"
    raise ParseError(f"unsupported problem type {type(problem).__name__}")


def write_problem(problem: Problem, stream: TextIO) -> None:
    kind = problem_kind(problem)
    stream.write("version 1\n")
    stream.write(f"kind {kind}\n")
    stream.write(f"n {problem.n}\n")
    if kind == "homogeneous":
        stream.write(f"p {problem.p}\n")
        stream.write(f"s {problem.sparsity}\n")
        for i, a in enumerate(problem.equations):
            stream.write(f"equation {i}\n")
            for r, c, v in a.entries():
                stream.write(f"a {r} {c} {_fmt(v)}\n")
            stream.write("end\n")
    elif kind == "mixed":
        nl = problem.nonlinear
        stream.write(f"p {nl.p if nl is not None else 1}\n")
        stream.write(f"s {nl.sparsity if nl is not None else 0}\n")
        for i in range(problem.n):
            stream.write(f"equation {i}\n")
            if problem.constants[i] != 0.0:
                stream.write(f"const {_fmt(problem.constants[i])}\n")
            mask = problem.linear.rows == i
            for c, v in zip(problem.linear.cols[mask], problem.linear.vals[mask]):
                stream.write(f"lin {int(c)} {_fmt(float(v))}\n")
            if nl is not None:
                for r, c, v in nl.equations[i].entries():
                    stream.write(f"a {r} {c} {_fmt(v)}\n")
            stream.write("end\n")
    else:
        max_b = max((len(bs) for g in problem.equations for _, bs in g.terms),
                    default=0)
        stream.write(f"p {max_b}\n")
        stream.write(f"s {_inhomog_sparsity(problem)}\n")
        for i, g in enumerate(problem.equations):
            stream.write(f"equation {i}\n")
            for cvec, bs in g.terms:
                stream.write("term\n")
                for j, cv in enumerate(cvec):
                    if cv != 0.0:
                        stream.write(f"c {j} {_fmt(float(cv))}\n")
                for k, bmat in enumerate(bs):
                    for r, c, v in bmat.entries():
                        stream.write(f"B {k} {r} {c} {_fmt(v)}\n")
            stream.write("end\n")


def _inhomog_sparsity(problem: InhomogeneousSystem) -> int:
    s = 0
    for g in problem.equations:
        for _, bs in g.terms:
            for b in bs:
                s = max(s, b.row_nnz_max(), b.col_nnz_max())
    return s


def write_problem_file(problem: Problem, path: str) -> None:
    """Atomic write (temp file + rename)."""
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            write_problem(problem, fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dumps_problem(problem: Problem) -> str:
    import io
    buf = io.StringIO()
    write_problem(problem, buf)
    return buf.getvalue()


class _Lines:
    def __init__(self, stream: TextIO):
        self.raw = []
        for lineno, line in enumerate(stream, start=1):
            body = line.split("#", 1)[0].strip()
            if body:
                self.raw.append((lineno, body))
        self.pos = 0

    def peek(self):
        return self.raw[self.pos] if self.pos < len(self.raw) else None

    def next(self):
        item = self.peek()
        if item is None:
            raise ParseError("unexpected end of file")
        self.pos += 1
        return item


def _expect(lines: _Lines, keyword: str) -> list[str]:
    lineno, body = lines.next()
    parts = body.split()
    if parts[0] != keyword:
        raise ParseError(f"line {lineno}: expected '{keyword}', got '{parts[0]}'")
    return parts[1:]


def parse_problem(stream: TextIO) -> Problem:
    lines = _Lines(stream)
    try:
        (version,) = _expect(lines, "version")
        if version != "1":
            raise ParseError(f"unsupported version {version}")
        (kind,) = _expect(lines, "kind")
        if kind not in ("homogeneous", "mixed", "inhomogeneous"):
            raise ParseError(f"unknown kind {kind!r}")
        (n,) = _expect(lines, "n")
        (p,) = _expect(lines, "p")
        (s,) = _expect(lines, "s")
        n, p, s = int(n), int(p), int(s)
        if kind == "homogeneous":
            return _parse_homogeneous(lines, n, p, s)
        if kind == "mixed":
            return _parse_mixed(lines, n, p, s)
        return _parse_inhomogeneous(lines, n)
    except (ValueError, IndexError) as exc:
        raise ParseError(f"malformed problem file: {exc}") from exc


def parse_problem_file(path: str) -> Problem:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_problem(fh)


def _parse_equation_block(lines: _Lines, expected_index: int):
    args = _expect(lines, "equation")
    if int(args[0]) != expected_index:
        raise ParseError(f"expected equation {expected_index}, got {args[0]}")
    rows = {"a": [], "lin": [], "const": [], "term": []}
    current_term = None
    while True:
        lineno, body = lines.next()
        parts = body.split()
        key = parts[0]
        if key == "end":
            break
        if key == "a":
            rows["a"].append((int(parts[1]), int(parts[2]), float(parts[3])))
        elif key == "lin":
            rows["lin"].append((int(parts[1]), float(parts[2])))
        elif key == "const":
            rows["const"].append(float(parts[1]))
        elif key == "term":
            current_term = {"c": [], "B": []}
            rows["term"].append(current_term)
        elif key == "c":
            if current_term is None:
                raise ParseError(f"line {lineno}: 'c' outside a term block")
            current_term["c"].append((int(parts[1]), float(parts[2])))
        elif key == "B":
            if current_term is None:
                raise ParseError(f"line {lineno}: 'B' outside a term block")
            current_term["B"].append((int(parts[1]), int(parts[2]),
                                      int(parts[3]), float(parts[4])))
        else:
            raise ParseError(f"line {lineno}: unknown directive {key!r}")
    return rows


def _parse_homogeneous(lines: _Lines, n: int, p: int, s: int) -> PolynomialSystem:
    d = n ** p
    eqs = []
    for i in range(n):
        rows = _parse_equation_block(lines, i)
        if rows["lin"] or rows["const"] or rows["term"]:
            raise ParseError("homogeneous problems carry only 'a' entries")
        eqs.append(SparseMatrix.from_entries(d, d, rows["a"]))
    return PolynomialSystem(n, p, s, tuple(eqs))


def _parse_mixed(lines: _Lines, n: int, p: int, s: int) -> MixedSystem:
    d = n ** p
    b = np.zeros(n)
    lin_entries = []
    eqs = []
    any_a = False
    for i in range(n):
        rows = _parse_equation_block(lines, i)
        if rows["term"]:
            raise ParseError("mixed problems carry no term blocks")
        for cval in rows["const"]:
            b[i] += cval
        for j, v in rows["lin"]:
            lin_entries.append((i, j, v))
        if rows["a"]:
            any_a = True
        eqs.append(SparseMatrix.from_entries(d, d, rows["a"]))
    nonlinear = PolynomialSystem(n, p, s, tuple(eqs)) if any_a else None
    return MixedSystem(n, b, SparseMatrix.from_entries(n, n, lin_entries),
                       nonlinear)


def _parse_inhomogeneous(lines: _Lines, n: int) -> InhomogeneousSystem:
    eqs = []
    for i in range(n):
        rows = _parse_equation_block(lines, i)
        if rows["a"] or rows["lin"] or rows["const"]:
            raise ParseError("inhomogeneous problems use term blocks only")
        terms = []
        for term in rows["term"]:
            c = np.zeros(n)
            for j, v in term["c"]:
                c[j] = v
            ks = sorted({k for k, _, _, _ in term["B"]})
            if ks != list(range(len(ks))):
                raise ParseError("B factor indices must be 0..K-1")
            bs = []
            for k in ks:
                ent = [(r, cc, v) for kk, r, cc, v in term["B"] if kk == k]
                bs.append(SparseMatrix.from_entries(n, n, ent))
            terms.append((c, tuple(bs)))
        eqs.append(InhomogeneousPolynomial(tuple(terms)))
    return InhomogeneousSystem(n, tuple(eqs))
