"""Exact pointwise multilinear algebra of (k, m)-covectors over R^d.

A (k, m)-covector is an element of Lambda^k (R^d)* tensor Lambda^m (R^d)*,
stored as a dense coefficient matrix over pairs of strictly increasing
multi-indices in lexicographic order.  All antisymmetry bookkeeping happens
once, in the cached index tables; every operation below is a plain linear
map on coefficients.

Two numeric backends share the same code paths: float64 arrays for
field-level work and object arrays of ``fractions.Fraction`` for exact
identity checks.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import combinations
from math import comb, factorial

import numpy as np

__all__ = [
    "KmCovector",
    "FrameVector",
    "wedge",
    "transpose",
    "interior",
    "hodge",
    "star_star_v",
    "trace",
    "bianchi_sum",
    "op_e",
    "op_c",
    "op_c_inverse",
    "duality_residuals",
    "schouten_weyl_split",
    "metric_covector",
    "basis_covector",
    "kernel_projector",
    "project_bianchi",
    "random_covector",
    "random_bianchi",
    "bianchi_dim",
]


# ---------------------------------------------------------------------------
# index tables


@lru_cache(maxsize=None)
def _subsets(d: int, k: int) -> tuple[tuple[int, ...], ...]:
    if k < 0 or k > d:
        return ()
    return tuple(combinations(range(d), k))


@lru_cache(maxsize=None)
def _subset_index(d: int, k: int) -> dict:
    return {s: i for i, s in enumerate(_subsets(d, k))}


def _merge_sign(a: tuple[int, ...], b: tuple[int, ...]):
    """Sign and target of concatenating two disjoint increasing tuples."""
    merged = a + b
    if len(set(merged)) != len(merged):
        return 0, None
    # parity of the permutation sorting (a, b): count inversions across the cut
    inv = sum(1 for x in a for y in b if y < x)
    return (-1) ** inv, tuple(sorted(merged))


@lru_cache(maxsize=None)
def _wedge_table(d: int, k1: int, k2: int):
    """Per left-basis-index list of (right index, sign, output index)."""
    s1, s2 = _subsets(d, k1), _subsets(d, k2)
    out_index = _subset_index(d, k1 + k2)
    table: list[list[tuple[int, int, int]]] = [[] for _ in s1]
    for i1, a in enumerate(s1):
        for i2, b in enumerate(s2):
            sign, merged = _merge_sign(a, b)
            if sign:
                table[i1].append((i2, sign, out_index[merged]))
    return table


@lru_cache(maxsize=None)
def _hodge_table(d: int, k: int):
    """star theta^I = sign(I, I^c) theta^{I^c}."""
    subs = _subsets(d, k)
    out_index = _subset_index(d, d - k)
    perm = np.empty(len(subs), dtype=np.intp)
    sign = np.empty(len(subs), dtype=np.int64)
    for i, s in enumerate(subs):
        comp = tuple(sorted(set(range(d)) - set(s)))
        sg, _ = _merge_sign(s, comp)
        perm[i] = out_index[comp]
        sign[i] = sg
    return perm, sign


@lru_cache(maxsize=None)
def _interior_table(d: int, k: int):
    """i_{e_axis} theta^I expansions: list of (in, axis, sign, out)."""
    subs = _subsets(d, k)
    out_index = _subset_index(d, k - 1)
    table = []
    for i, s in enumerate(subs):
        for pos, axis in enumerate(s):
            rest = s[:pos] + s[pos + 1:]
            table.append((i, axis, (-1) ** pos, out_index[rest]))
    return table


@lru_cache(maxsize=None)
def _trace_table(d: int, k: int, m: int):
    """tr = sum_i i_{E_i} i^V_{E_i}: list of (iin, jin, sign, iout, jout)."""
    rows, cols = _subsets(d, k), _subsets(d, m)
    ri, ci = _subset_index(d, k - 1), _subset_index(d, m - 1)
    table = []
    for i, I in enumerate(rows):
        for j, J in enumerate(cols):
            for axis in set(I) & set(J):
                pi, pj = I.index(axis), J.index(axis)
                sign = (-1) ** (pi + pj)
                table.append((i, j, sign,
                              ri[I[:pi] + I[pi + 1:]], ci[J[:pj] + J[pj + 1:]]))
    return table


@lru_cache(maxsize=None)
def _bianchi_table(d: int, k: int, m: int):
    """b psi = sum_i theta^i wedge i^V_{E_i} psi: (iin, jin, sign, iout, jout)."""
    rows, cols = _subsets(d, k), _subsets(d, m)
    ri, ci = _subset_index(d, k + 1), _subset_index(d, m - 1)
    table = []
    for j, J in enumerate(cols):
        for pj, axis in enumerate(J):
            jrest = J[:pj] + J[pj + 1:]
            for i, I in enumerate(rows):
                sign, merged = _merge_sign((axis,), I)
                if sign:
                    table.append((i, j, sign * (-1) ** pj, ri[merged], ci[jrest]))
    return table


# ---------------------------------------------------------------------------
# covector type


def _zeros(shape, rational: bool):
    if rational:
        return np.full(shape, Fraction(0), dtype=object)
    return np.zeros(shape)


def _nck(d: int, k: int) -> int:
    return comb(d, k) if 0 <= k <= d else 0


@dataclass(frozen=True)
class KmCovector:
    """Coefficients of a (k, m)-covector on the canonical increasing basis."""

    dim: int
    k: int
    m: int
    coeffs: np.ndarray  # shape (C(d,k), C(d,m)), float64 or Fraction

    def __post_init__(self):
        shape = (_nck(self.dim, self.k), _nck(self.dim, self.m))
        if self.coeffs.shape != shape:
            raise ValueError(f"coeff shape {self.coeffs.shape} != {shape}")

    @property
    def rational(self) -> bool:
        return self.coeffs.dtype == object

    @classmethod
    def zero(cls, d: int, k: int, m: int, rational: bool = False) -> "KmCovector":
        return cls(d, k, m, _zeros((_nck(d, k), _nck(d, m)), rational))

    def copy(self) -> "KmCovector":
        return KmCovector(self.dim, self.k, self.m, self.coeffs.copy())

    def __add__(self, other: "KmCovector") -> "KmCovector":
        self._check_like(other)
        return KmCovector(self.dim, self.k, self.m, self.coeffs + other.coeffs)

    def __sub__(self, other: "KmCovector") -> "KmCovector":
        self._check_like(other)
        return KmCovector(self.dim, self.k, self.m, self.coeffs - other.coeffs)

    def __mul__(self, scalar) -> "KmCovector":
        return KmCovector(self.dim, self.k, self.m, self.coeffs * scalar)

    __rmul__ = __mul__

    def __neg__(self) -> "KmCovector":
        return KmCovector(self.dim, self.k, self.m, -self.coeffs)

    def _check_like(self, other: "KmCovector"):
        if (self.dim, self.k, self.m) != (other.dim, other.k, other.m):
            raise ValueError("bidegree/dimension mismatch")

    def norm_inf(self) -> float:
        if self.coeffs.size == 0:
            return 0.0
        return float(max(abs(v) for v in self.coeffs.flat))

    def norm2(self) -> float:
        if self.coeffs.size == 0:
            return 0.0
        return float(np.sqrt(sum(float(v) ** 2 for v in self.coeffs.flat)))

    def scalar(self):
        """Value of a (0,0)-covector."""
        if self.k or self.m:
            raise ValueError("not a scalar covector")
        return self.coeffs[0, 0]

    def sym_matrix(self) -> np.ndarray:
        """A (1,1)-covector as a d x d matrix."""
        if (self.k, self.m) != (1, 1):
            raise ValueError("not a (1,1)-covector")
        return self.coeffs.copy()


@dataclass(frozen=True)
class FrameVector:
    """A vector expressed in the ambient orthonormal frame."""

    dim: int
    components: np.ndarray

    @classmethod
    def basis(cls, d: int, axis: int, rational: bool = False) -> "FrameVector":
        c = _zeros((d,), rational)
        c[axis] = Fraction(1) if rational else 1.0
        return cls(d, c)


# ---------------------------------------------------------------------------
# constructors


def basis_covector(d: int, I: tuple[int, ...], J: tuple[int, ...],
                   rational: bool = False) -> KmCovector:
    """(theta^I) tensor (theta^J) for increasing index tuples I, J."""
    I, J = tuple(I), tuple(J)
    out = KmCovector.zero(d, len(I), len(J), rational)
    i = _subset_index(d, len(I))[I]
    j = _subset_index(d, len(J))[J]
    out.coeffs[i, j] = Fraction(1) if rational else 1.0
    return out


def metric_covector(d: int, rational: bool = False) -> KmCovector:
    """g = sum_j (theta^j)^2 as a (1,1)-covector."""
    out = KmCovector.zero(d, 1, 1, rational)
    for j in range(d):
        out.coeffs[j, j] = Fraction(1) if rational else 1.0
    return out


def sym_matrix_covector(mat: np.ndarray, rational: bool = False) -> KmCovector:
    d = mat.shape[0]
    out = KmCovector.zero(d, 1, 1, rational)
    out.coeffs[...] = mat
    return out


# ---------------------------------------------------------------------------
# operations


def wedge(a: KmCovector, b: KmCovector) -> KmCovector:
    """Graded bilinear product acting on both index groups."""
    if a.dim != b.dim:
        raise ValueError("dimension mismatch")
    d = a.dim
    out = KmCovector.zero(d, a.k + b.k, a.m + b.m, a.rational or b.rational)
    if out.coeffs.size == 0:
        return out
    t1 = _wedge_table(d, a.k, b.k)
    t2 = _wedge_table(d, a.m, b.m)
    ac, bc, oc = a.coeffs, b.coeffs, out.coeffs
    for i1 in range(ac.shape[0]):
        row = ac[i1]
        nz = [j1 for j1 in range(row.shape[0]) if row[j1] != 0]
        if not nz:
            continue
        for i2, s1, io in t1[i1]:
            for j1 in nz:
                v = row[j1]
                for j2, s2, jo in t2[j1]:
                    oc[io, jo] += (s1 * s2) * v * bc[i2, j2]
    return out


def transpose(a: KmCovector) -> KmCovector:
    """Swap the two index groups: (k, m) -> (m, k)."""
    return KmCovector(a.dim, a.m, a.k, a.coeffs.T.copy())


def interior(X: FrameVector, a: KmCovector, slot: str = "first") -> KmCovector:
    """Interior product with X in the chosen index group."""
    if X.dim != a.dim:
        raise ValueError("dimension mismatch")
    if slot == "second":
        return transpose(interior(X, transpose(a), "first"))
    if slot != "first":
        raise ValueError("slot must be 'first' or 'second'")
    if a.k == 0:
        return KmCovector.zero(a.dim, 0, a.m, a.rational)
    out = KmCovector.zero(a.dim, a.k - 1, a.m, a.rational)
    if out.coeffs.size == 0:
        return out
    for iin, axis, sign, iout in _interior_table(a.dim, a.k):
        x = X.components[axis]
        if x != 0:
            out.coeffs[iout] += (sign * x) * a.coeffs[iin]
    return out


def hodge(a: KmCovector, slot: str = "first") -> KmCovector:
    """Hodge dual in one index group (orthonormal canonical basis)."""
    if slot == "second":
        return transpose(hodge(transpose(a), "first"))
    if slot != "first":
        raise ValueError("slot must be 'first' or 'second'")
    perm, sign = _hodge_table(a.dim, a.k)
    out = KmCovector.zero(a.dim, a.dim - a.k, a.m, a.rational)
    for i in range(len(perm)):
        out.coeffs[perm[i]] = sign[i] * a.coeffs[i]
    return out


def star_star_v(a: KmCovector) -> KmCovector:
    """The composition of the Hodge duals in both slots."""
    return hodge(hodge(a, "first"), "second")


def trace(a: KmCovector, times: int = 1) -> KmCovector:
    """Metric trace lowering both degrees by one, iterated ``times``."""
    if times < 1:
        raise ValueError("times must be >= 1")
    cur = a
    for _ in range(times):
        if cur.k < 1 or cur.m < 1:
            return KmCovector.zero(cur.dim, max(cur.k - 1, 0), max(cur.m - 1, 0),
                                   cur.rational)
        out = KmCovector.zero(cur.dim, cur.k - 1, cur.m - 1, cur.rational)
        for i, j, sign, io, jo in _trace_table(cur.dim, cur.k, cur.m):
            v = cur.coeffs[i, j]
            if v != 0:
                out.coeffs[io, jo] += sign * v
        cur = out
    return cur


def bianchi_sum(a: KmCovector) -> KmCovector:
    """b psi = sum_i theta^i wedge i^V_{E_i} psi, degree (k+1, m-1)."""
    if a.m < 1:
        return KmCovector.zero(a.dim, a.k + 1, 0, a.rational)
    out = KmCovector.zero(a.dim, a.k + 1, a.m - 1, a.rational)
    if out.coeffs.size == 0:
        return out
    for i, j, sign, io, jo in _bianchi_table(a.dim, a.k, a.m):
        v = a.coeffs[i, j]
        if v != 0:
            out.coeffs[io, jo] += sign * v
    return out


def op_e(psi: KmCovector) -> KmCovector:
    """Curvature-to-Einstein contraction -tr psi + (tr tr psi / 2) g."""
    if (psi.k, psi.m) != (2, 2):
        raise ValueError("op_e expects a (2,2)-covector")
    t = trace(psi)
    tt = trace(t).scalar()
    g = metric_covector(psi.dim, psi.rational)
    half = Fraction(1, 2) if psi.rational else 0.5
    return -t + (half * tt) * g


def op_c(sigma: KmCovector) -> KmCovector:
    """Trace-reversal-type contraction -sigma + (tr sigma) g."""
    if (sigma.k, sigma.m) != (1, 1):
        raise ValueError("op_c expects a (1,1)-covector")
    t = trace(sigma).scalar()
    g = metric_covector(sigma.dim, sigma.rational)
    return -sigma + t * g


def op_c_inverse(tau: KmCovector) -> KmCovector:
    """Inverse of op_c for d >= 2."""
    if (tau.k, tau.m) != (1, 1):
        raise ValueError("op_c_inverse expects a (1,1)-covector")
    d = tau.dim
    if d < 2:
        raise ValueError("op_c is singular for d < 2")
    t = trace(tau).scalar()
    g = metric_covector(d, tau.rational)
    if tau.rational:
        return -tau + (t * Fraction(1, d - 1)) * g
    return -tau + (t / (d - 1)) * g


# ---------------------------------------------------------------------------
# Bianchi kernel machinery


def _bianchi_matrix(d: int, k: int, m: int) -> np.ndarray:
    """Dense matrix of b on flattened coefficients."""
    rows = comb(d, k + 1) * comb(d, m - 1) if k + 1 <= d and m >= 1 else 0
    cols = comb(d, k) * comb(d, m)
    B = np.zeros((rows, cols))
    nm = comb(d, m)
    nm_out = comb(d, m - 1)
    for i, j, sign, io, jo in _bianchi_table(d, k, m):
        B[io * nm_out + jo, i * nm + j] += sign
    return B


@lru_cache(maxsize=None)
def _kernel_basis(d: int, k: int, m: int) -> np.ndarray:
    """Orthonormal basis (columns) of ker b on flattened coefficients."""
    B = _bianchi_matrix(d, k, m)
    if B.shape[0] == 0:
        return np.eye(B.shape[1])
    _, s, vh = np.linalg.svd(B)
    tol = max(B.shape) * np.finfo(float).eps * (s[0] if s.size else 1.0)
    rank = int(np.sum(s > tol))
    return vh[rank:].T.copy()


def bianchi_dim(d: int, k: int, m: int) -> int:
    """Dimension of the fiber of Bianchi (k, m)-covectors."""
    return _kernel_basis(d, k, m).shape[1]


def kernel_projector(d: int, k: int, m: int) -> np.ndarray:
    N = _kernel_basis(d, k, m)
    return N @ N.T


def project_bianchi(a: KmCovector) -> KmCovector:
    """Least-squares projection onto ker b (float backend)."""
    if a.rational:
        raise ValueError("projection is a float-mode operation")
    P = kernel_projector(a.dim, a.k, a.m)
    flat = P @ a.coeffs.reshape(-1)
    return KmCovector(a.dim, a.k, a.m, flat.reshape(a.coeffs.shape))


def _require_bianchi(a: KmCovector, tol: float, what: str):
    b = bianchi_sum(a)
    scale = max(a.norm_inf(), 1.0 if not a.rational else Fraction(1))
    if a.rational:
        if b.norm_inf() != 0:
            raise ValueError(f"{what} is not a Bianchi covector")
    elif b.norm_inf() > tol * float(scale):
        raise ValueError(f"{what} is not a Bianchi covector "
                         f"(defect {b.norm_inf():.3e})")


def random_covector(rng: np.random.Generator, d: int, k: int, m: int) -> KmCovector:
    shape = (comb(d, k), comb(d, m))
    return KmCovector(d, k, m, rng.standard_normal(shape))


def random_bianchi(rng: np.random.Generator, d: int, k: int, m: int,
                   rational: bool = False) -> KmCovector:
    """Random element of ker b.

    Float mode projects a Gaussian sample; rational mode combines Kulkarni
    squares (omega^1 wedge ... wedge omega^k)^2, which lie in the kernel
    exactly and span it fiber-wise.
    """
    if not rational:
        return project_bianchi(random_covector(rng, d, k, m))
    if k != m:
        raise ValueError("rational sampling implemented for k == m only")
    if k == 1:
        mat = np.empty((d, d), dtype=object)
        for i in range(d):
            for j in range(i, d):
                mat[i, j] = mat[j, i] = Fraction(int(rng.integers(-9, 10)), 4)
        return sym_matrix_covector(mat, rational=True)
    out = KmCovector.zero(d, k, m, rational=True)
    for _ in range(bianchi_dim(d, k, m)):
        factor = KmCovector.zero(d, 0, 0, rational=True)
        factor.coeffs[0, 0] = Fraction(1)
        for _ in range(k):
            omega = KmCovector.zero(d, 1, 0, rational=True)
            for i in range(d):
                omega.coeffs[i, 0] = Fraction(int(rng.integers(-5, 6)), 2)
            factor = wedge(factor, omega)
        out = out + wedge(factor, transpose(factor))
    return out


# ---------------------------------------------------------------------------
# duality identities and the Schouten/Weyl split


def _metric_power(d: int, n: int, rational: bool) -> KmCovector:
    out = KmCovector.zero(d, 0, 0, rational)
    out.coeffs[0, 0] = Fraction(1) if rational else 1.0
    g = metric_covector(d, rational)
    for _ in range(n):
        out = wedge(out, g)
    return out


def duality_residuals(psi: KmCovector, sigma: KmCovector,
                      tol: float = 1e-9) -> tuple[float, float]:
    """Max-abs defects of the two contraction/duality identities.

    For Bianchi inputs psi (2,2) and sigma (1,1) in dimension d the double
    Hodge of g^{d-3} psi equals (d-3)! op_e(psi), and the double Hodge of
    g^{d-2} sigma equals (d-2)! op_c(sigma).
    """
    d = psi.dim
    if sigma.dim != d:
        raise ValueError("dimension mismatch")
    if d < 3:
        raise ValueError("first identity needs d >= 3")
    _require_bianchi(psi, tol, "psi")
    _require_bianchi(sigma, tol, "sigma")
    rat = psi.rational
    lhs1 = star_star_v(wedge(_metric_power(d, d - 3, rat), psi))
    rhs1 = factorial(d - 3) * op_e(psi)
    rat2 = sigma.rational
    lhs2 = star_star_v(wedge(_metric_power(d, d - 2, rat2), sigma))
    rhs2 = factorial(d - 2) * op_c(sigma)
    return (lhs1 - rhs1).norm_inf(), (lhs2 - rhs2).norm_inf()


def schouten_weyl_split(rm: KmCovector, tol: float = 1e-9):
    """Split a Bianchi (2,2)-covector as rm = -g wedge P + Wey, tr Wey = 0.

    Returns (schouten, weyl) where schouten is the (1,1) component P.  For
    d <= 3 the Weyl part is identically zero.
    """
    if (rm.k, rm.m) != (2, 2):
        raise ValueError("expected a (2,2)-covector")
    d = rm.dim
    _require_bianchi(rm, tol, "rm")
    ein = op_e(rm)
    if rm.rational:
        p = op_c_inverse(ein) * Fraction(-1, d - 2)
    else:
        p = op_c_inverse(ein) * (-1.0 / (d - 2))
    g = metric_covector(d, rm.rational)
    weyl = rm + wedge(g, p)
    if d <= 3:
        weyl = KmCovector.zero(d, 2, 2, rm.rational)
    return p, weyl


def restrict_covector(a: KmCovector, drop_axis: int) -> KmCovector:
    """Reinterpret a covector with no ``drop_axis`` entries in dimension d-1.

    Entries whose index sets contain ``drop_axis`` are discarded; the rest
    are relabelled to the (d-1)-dimensional canonical basis.  Used to read
    tangential boundary quantities in the boundary algebra.
    """
    d = a.dim
    keep = [i for i in range(d) if i != drop_axis]
    relabel = {axis: n for n, axis in enumerate(keep)}
    out = KmCovector.zero(d - 1, a.k, a.m, a.rational)
    if out.coeffs.size == 0:
        return out
    rows, cols = _subsets(d, a.k), _subsets(d, a.m)
    ri, ci = _subset_index(d - 1, a.k), _subset_index(d - 1, a.m)
    for i, I in enumerate(rows):
        if drop_axis in I:
            continue
        io = ri[tuple(relabel[x] for x in I)]
        for j, J in enumerate(cols):
            if drop_axis in J:
                continue
            out.coeffs[io, ci[tuple(relabel[x] for x in J)]] = a.coeffs[i, j]
    return out
