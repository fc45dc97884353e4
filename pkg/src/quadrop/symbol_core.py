"""Quadratic Weyl symbols and their algebraic classification.

A quadratic symbol on the phase space R^{2n} = R^n_x x R^n_xi is stored
through its complex symmetric coefficient matrix ``coeff`` with

    q(X) = <X, coeff X>        (no factor 1/2).

The Hamilton map is ``F = J coeff`` with the standard symplectic matrix
``J = [[0, I], [-I, 0]]``.  The singular space is

    S = (intersection over 0 <= j <= 2n-1 of Ker(Re F (Im F)^j)) in R^{2n}

and ``k0`` is the smallest ``j`` for which the partial intersection already
equals ``S``.
"""

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import sympy

from .errors import BadDimension, IllConditioned, NotAccretive, NotSymmetric

SYM_RTOL = 1e-12
PSD_RTOL = 1e-10


def symplectic_J(n):
    """Standard symplectic matrix of size 2n."""
    I = np.eye(n)
    Z = np.zeros((n, n))
    return np.block([[Z, I], [-I, Z]])


def sigma(X, Y):
    """Bilinear symplectic form sigma((x, xi), (y, eta)) = <xi, y> - <x, eta>.

    No complex conjugation is applied to either argument.
    """
    X = np.asarray(X)
    Y = np.asarray(Y)
    n = X.shape[0] // 2
    return X[n:] @ Y[:n] - X[:n] @ Y[n:]


def _matrix_norm(A):
    return float(np.linalg.norm(A, 2)) if A.size else 0.0


def psd_sqrt(A):
    """Symmetric square root of a real positive semidefinite matrix."""
    w, V = np.linalg.eigh(np.asarray(A, dtype=float))
    w = np.clip(w, 0.0, None)
    return (V * np.sqrt(w)) @ V.T


def _check_psd(A, name, exc):
    A = np.asarray(A, dtype=float)
    nrm = _matrix_norm(A)
    if A.size and np.linalg.eigvalsh((A + A.T) / 2).min() < -PSD_RTOL * max(nrm, 1.0):
        raise exc(f"{name} is not positive semidefinite")


def _check_symmetric(A, name):
    nrm = max(_matrix_norm(A), 1.0)
    if np.abs(A - A.T).max(initial=0.0) > SYM_RTOL * nrm:
        raise NotSymmetric(f"{name} is not symmetric")


@dataclass(frozen=True)
class QuadraticSymbol:
    """Complex quadratic form q(X) = <X, coeff X> on R^{2n}."""

    n: int
    coeff: np.ndarray

    @property
    def re(self):
        return self.coeff.real.copy()

    @property
    def im(self):
        return self.coeff.imag.copy()

    def __call__(self, X):
        X = np.asarray(X)
        return X @ self.coeff @ X

    def norm(self):
        return _matrix_norm(self.coeff)


def build_symbol(coeff):
    """Validate a coefficient matrix and wrap it as a :class:`QuadraticSymbol`.

    Raises
    ------
    BadDimension
        If the matrix is not square with even side.
    NotSymmetric
        If ``coeff`` is not symmetric (no conjugation) to relative 1e-12.
    NotAccretive
        If ``Re coeff`` has an eigenvalue below ``-1e-10 * norm``.
    """
    A = np.array(coeff, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] % 2 or A.shape[0] == 0:
        raise BadDimension(f"coefficient matrix must be 2n x 2n, got {A.shape}")
    _check_symmetric(A, "coeff")
    A = (A + A.T) / 2
    re = A.real
    if np.linalg.eigvalsh(re).min() < -PSD_RTOL * max(_matrix_norm(re), 1.0):
        raise NotAccretive("real part of the symbol is not positive semidefinite")
    A.setflags(write=False)
    return QuadraticSymbol(n=A.shape[0] // 2, coeff=A)


@dataclass(frozen=True)
class HamiltonMap:
    """Hamilton map F = J coeff of a quadratic symbol."""

    n: int
    F: np.ndarray

    @property
    def J(self):
        return symplectic_J(self.n)

    @property
    def re(self):
        return (self.F + self.F.conj()).real / 2

    @property
    def im(self):
        return ((self.F - self.F.conj()) / 2j).real

    def skew_defect(self, rng=None, trials=100):
        """Largest relative value of |sigma(X, FY) + sigma(FX, Y)| on random real pairs."""
        rng = np.random.default_rng(0) if rng is None else rng
        nrm = max(_matrix_norm(self.F), 1e-300)
        worst = 0.0
        for _ in range(trials):
            X = rng.standard_normal(2 * self.n)
            Y = rng.standard_normal(2 * self.n)
            d = abs(sigma(X, self.F @ Y) + sigma(self.F @ X, Y))
            worst = max(worst, d / (nrm * np.linalg.norm(X) * np.linalg.norm(Y)))
        return worst


def hamilton_map(q):
    """Hamilton map ``F = J coeff`` of ``q``."""
    F = symplectic_J(q.n) @ q.coeff
    F.setflags(write=False)
    return HamiltonMap(n=q.n, F=F)


@dataclass(frozen=True)
class IndexSets:
    """Coordinate index sets (1-based) with S-perp = R^n_I x R^n_J."""

    I: tuple
    J: tuple
    n: int

    def __post_init__(self):
        for name in ("I", "J"):
            s = list(getattr(self, name))
            if any(a >= b for a, b in zip(s, s[1:])):
                raise ValueError(f"{name} must be strictly increasing")
            if s and (s[0] < 1 or s[-1] > self.n):
                raise ValueError(f"{name} out of range 1..{self.n}")

    def phase_indices(self):
        """0-based phase-space coordinates spanning S-perp."""
        return [i - 1 for i in self.I] + [self.n + j - 1 for j in self.J]


@dataclass(frozen=True)
class SingularAnalysis:
    basis_S: np.ndarray
    dim_S: int
    k0: int
    index_sets: IndexSets | None
    diffusive: bool
    imF_kernel_inclusion: bool
    rank_tol: float
    partial_dims: tuple = field(default=())

    @property
    def basis_perp(self):
        """Orthonormal basis of the orthogonal complement of S in R^{2n}."""
        m = self.basis_S.shape[0]
        if self.dim_S == 0:
            return np.eye(m)
        Q, _ = np.linalg.qr(self.basis_S, mode="complete")
        return Q[:, self.dim_S:]


def default_rank_tol(M, n):
    s = np.linalg.svd(M, compute_uv=False)
    smax = s[0] if s.size else 0.0
    return 2 * n * np.finfo(float).eps * max(smax, 1e-300)


def _kernel_blocks(F):
    re, im = F.re, F.im
    blocks = []
    P = np.eye(2 * F.n)
    for _ in range(2 * F.n):
        blocks.append(re @ P)
        P = im @ P
    return blocks


def _null_space(M, tol):
    """Right null space of M with a factor-10 gap check at the rank cut."""
    _, s, Vh = np.linalg.svd(M)
    r = int(np.sum(s > tol))
    if r > 0 and s[r - 1] < 10 * tol:
        raise IllConditioned(
            f"ambiguous numerical rank: singular value {s[r - 1]:.3e} near tolerance {tol:.3e}"
        )
    return Vh[r:].T.conj().real, r


def _partial_dims(F, tol):
    blocks = _kernel_blocks(F)
    dims = []
    for j in range(len(blocks)):
        _, r = _null_space(np.vstack(blocks[: j + 1]), tol)
        dims.append(2 * F.n - r)
    return dims


def smallest_k0(F, rank_tol=None):
    """Smallest ``j`` for which the j-th partial kernel intersection equals S."""
    M = np.vstack(_kernel_blocks(F))
    tol = default_rank_tol(M, F.n) if rank_tol is None else rank_tol
    dims = _partial_dims(F, tol)
    return dims.index(dims[-1])


def im_kernel_inclusion(F, basis_S, rank_tol=None):
    """True iff S is contained in Ker(Im F)."""
    if basis_S.shape[1] == 0:
        return True
    im = F.im
    nrm = _matrix_norm(im)
    if nrm == 0.0:
        return True
    tol = 1e-10 if rank_tol is None else max(rank_tol, 1e-12)
    return bool(np.linalg.norm(im @ basis_S, 2) <= tol * nrm)


def diffusive_decomposition(basis_S, n, rank_tol=1e-12):
    """Detect a coordinate-aligned S-perp and the diffusive property.

    Returns
    -------
    index_sets : IndexSets or None
        ``None`` when S is not spanned by canonical basis vectors.
    diffusive : bool
        True iff ``J = {1..n}``; False when index sets are absent.
    """
    m = 2 * n
    tol = max(1e3 * rank_tol, 1e-10)
    P = basis_S @ basis_S.T if basis_S.shape[1] else np.zeros((m, m))
    P = np.where(np.abs(P) < tol, 0.0, P)
    d = np.diag(P)
    off = P - np.diag(d)
    if np.abs(off).max(initial=0.0) > tol or np.any(np.minimum(np.abs(d), np.abs(d - 1)) > tol):
        return None, False
    perp = [i for i in range(m) if abs(d[i]) <= tol]
    I = tuple(i + 1 for i in perp if i < n)
    Jset = tuple(i - n + 1 for i in perp if i >= n)
    idx = IndexSets(I=I, J=Jset, n=n)
    return idx, Jset == tuple(range(1, n + 1))


def singular_space(F, rank_tol=None):
    """Singular space, k0 and structural flags of a Hamilton map.

    Parameters
    ----------
    F : HamiltonMap
    rank_tol : float, optional
        Singular-value threshold; defaults to ``2n * eps * sigma_max`` of the
        stacked kernel matrix.

    Returns
    -------
    SingularAnalysis
    """
    M = np.vstack(_kernel_blocks(F))
    tol = default_rank_tol(M, F.n) if rank_tol is None else float(rank_tol)
    basis, _ = _null_space(M, tol)
    if basis.shape[1]:
        basis, _ = np.linalg.qr(basis)
    dims = _partial_dims(F, tol)
    k0 = dims.index(dims[-1])
    idx, diffusive = diffusive_decomposition(basis, F.n, tol)
    return SingularAnalysis(
        basis_S=basis,
        dim_S=basis.shape[1],
        k0=k0,
        index_sets=idx,
        diffusive=diffusive,
        imF_kernel_inclusion=im_kernel_inclusion(F, basis, None),
        rank_tol=tol,
        partial_dims=tuple(dims),
    )


def hamilton_flow_vanishing(q, X, k_max=None, tol=1e-10):
    """Test whether (H_{Im q}^k Re q)(X) vanishes for all k <= k_max.

    For quadratic forms the Poisson bracket acts on coefficient matrices as
    ``A -> 2 (A J G - G J A)`` with ``G = Im coeff``.
    """
    X = np.asarray(X, dtype=float)
    k_max = 2 * q.n - 1 if k_max is None else k_max
    if k_max < 2 * q.n - 1:
        raise ValueError("k_max must be at least 2n - 1")
    x2 = float(X @ X)
    if x2 == 0.0:
        return True
    J = symplectic_J(q.n)
    G = q.im
    A = q.re
    scale = max(q.norm(), 1e-300)
    for _ in range(k_max + 1):
        ref = max(_matrix_norm(A), scale)
        if abs(X @ A @ X) > tol * ref * x2:
            return False
        A = 2 * (A @ J @ G - G @ J @ A)
    return True


@dataclass(frozen=True)
class GOUSpec:
    """Generalized Ornstein-Uhlenbeck data (diffusion Q, potential R, drift B)."""

    Q: np.ndarray
    R: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        Q, R, B = (np.atleast_2d(np.asarray(a, dtype=float)) for a in (self.Q, self.R, self.B))
        n = Q.shape[0]
        for name, A in (("Q", Q), ("R", R), ("B", B)):
            if A.shape != (n, n):
                raise BadDimension(f"{name} must be {n} x {n}, got {A.shape}")
        for name, A in (("Q", Q), ("R", R)):
            _check_symmetric(A, name)
            _check_psd(A, name, NotAccretive)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "B", B)

    @property
    def n(self):
        return self.Q.shape[0]


def gou_coeff(spec):
    """Coefficient matrix of 1/2|Q^{1/2} xi|^2 + 1/2|R^{1/2} x|^2 - i<Bx, xi>."""
    Q, R, B = spec.Q, spec.R, spec.B
    return np.block([[R / 2, -0.5j * B.T], [-0.5j * B, Q / 2]])


def _chain_kernel(A, B, n):
    """Orthonormal basis of the intersection of Ker(A B^j) over j < n."""
    blocks = [A @ np.linalg.matrix_power(B, j) for j in range(n)]
    M = np.vstack(blocks)
    tol = default_rank_tol(M, n)
    basis, _ = _null_space(M, tol)
    return basis


def gou_symbol(spec):
    """Symbol of a GOU operator together with its closed-form singular space.

    Returns
    -------
    q : QuadraticSymbol
    basis : ndarray, shape (2n, d)
        Orthonormal basis of Ker-chain(R, B) x Ker-chain(Q, B^T).
    """
    n = spec.n
    q = build_symbol(gou_coeff(spec))
    bx = _chain_kernel(spec.R, spec.B, n)
    bxi = _chain_kernel(spec.Q, spec.B.T, n)
    basis = np.zeros((2 * n, bx.shape[1] + bxi.shape[1]))
    basis[:n, : bx.shape[1]] = bx
    basis[n:, bx.shape[1]:] = bxi
    return q, basis


def kalman_rank(B, Qhalf, rank_tol=None):
    """Kalman rank of the pair (B, Q^{1/2}).

    Returns
    -------
    ok : bool
        True iff the rank equals n.
    rank : int
    """
    B = np.atleast_2d(np.asarray(B, dtype=float))
    Qh = np.atleast_2d(np.asarray(Qhalf, dtype=float))
    n = B.shape[0]
    if B.shape != (n, n) or Qh.shape != (n, n):
        raise BadDimension("B and Qhalf must be square of equal size")
    K = np.hstack([np.linalg.matrix_power(B, j) @ Qh for j in range(n)])
    s = np.linalg.svd(K, compute_uv=False)
    tol = (2 * n * np.finfo(float).eps * max(s[0], 1e-300)) if rank_tol is None else rank_tol
    rank = int(np.sum(s > tol))
    return rank == n, rank


# --- builders for the standard examples ------------------------------------


def heat_symbol(n=1):
    """q = |xi|^2."""
    return gou_symbol(GOUSpec(Q=2 * np.eye(n), R=np.zeros((n, n)), B=np.zeros((n, n))))[0]


def harmonic_oscillator(n=1, schrodinger=False):
    """q = |x|^2 + |xi|^2, or i(|x|^2 + |xi|^2) when ``schrodinger``."""
    c = np.eye(2 * n, dtype=complex)
    return build_symbol(1j * c if schrodinger else c)


def kfp_coeff(n=1, a=0.0):
    """Coefficients of |eta|^2 + 1/4|v|^2 + i(<v, xi> - a<x, eta>) on (x, v, xi, eta)."""
    m = 2 * n
    C = np.zeros((2 * m, 2 * m), dtype=complex)
    I = np.eye(n)
    x, v, xi, eta = (slice(k * n, (k + 1) * n) for k in range(4))
    C[eta, eta] = I
    C[v, v] = I / 4
    C[v, xi] = C[xi, v] = 0.5j * I
    C[x, eta] = C[eta, x] = -0.5j * a * I
    return C


def kfp_symbol(n=1, a=0.0):
    """Kramers-Fokker-Planck symbol with quadratic potential parameter ``a``."""
    return build_symbol(kfp_coeff(n, a))


def kolmogorov_symbol():
    """q = eta^2 + i v xi on (x, v, xi, eta)."""
    spec = GOUSpec(Q=np.diag([0.0, 2.0]), R=np.zeros((2, 2)), B=np.array([[0.0, -1.0], [0.0, 0.0]]))
    return gou_symbol(spec)[0]


# --- exact rational path -----------------------------------------------------


def _to_sympy(entry):
    if isinstance(entry, Fraction):
        return sympy.Rational(entry.numerator, entry.denominator)
    if isinstance(entry, complex):
        return sympy.nsimplify(entry.real, rational=True) + sympy.I * sympy.nsimplify(entry.imag, rational=True)
    if isinstance(entry, float):
        return sympy.nsimplify(entry, rational=True)
    return sympy.sympify(entry)


def exact_partial_dims(coeff):
    """Exact dimensions of the partial kernel intersections and k0.

    ``coeff`` holds exactly representable entries (ints, Fractions, strings
    such as ``"1/2*I"`` or short binary floats).

    Returns
    -------
    dims : list of int
        Dimension of the j-th partial intersection for j = 0 .. 2n-1.
    k0 : int
    """
    C = sympy.Matrix([[_to_sympy(e) for e in row] for row in coeff])
    m = C.shape[0]
    n = m // 2
    Jm = sympy.zeros(m, m)
    for i in range(n):
        Jm[i, n + i] = 1
        Jm[n + i, i] = -1
    F = Jm * C
    reF = F.applyfunc(lambda z: sympy.re(z))
    imF = F.applyfunc(lambda z: sympy.im(z))
    blocks, P = [], sympy.eye(m)
    dims = []
    for _ in range(m):
        blocks.append(reF * P)
        P = imF * P
        dims.append(m - sympy.Matrix.vstack(*blocks).rank())
    return dims, dims.index(dims[-1])
