"""Evolution by exp(-t q^w) with two independent backends.

Hermite backend
    Galerkin matrix of q^w on the span of tensorized Hermite functions
    ``h_0 .. h_{N-1}``, assembled exactly from ladder coefficients, and its
    matrix exponential.
Mehler backend
    The Weyl operator with the closed-form Mehler symbol applied on a
    periodic tensor grid over [-L, L)^n.  The Weyl kernel is integrated in
    closed form against the discrete Fourier modes of the input, so no
    quadrature of the (possibly very narrow) kernel is needed.
"""

import csv
import io
from dataclasses import dataclass, field
from itertools import product
from math import comb, e, factorial, gamma, lgamma, log, pi, sqrt

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse.linalg import expm_multiply, svds

from .errors import (
    BadDimension,
    GridUnderResolved,
    InsufficientData,
    ParameterOutOfRange,
    SingularForm,
    TruncationTooLarge,
)
from .mehler import PolySymbol, mehler_form, smoothing_s, sqrt_det

MAX_N = 64
DENSE_LIMIT = 1200
TAIL_GUARD = 1e-6


# --- Hermite functions and ladder matrices -----------------------------------


def hermite_functions(N, x):
    """Orthonormal Hermite functions h_0 .. h_{N-1} at points ``x``, shape (N, len(x))."""
    x = np.asarray(x, dtype=float)
    H = np.zeros((N, x.size))
    H[0] = pi**-0.25 * np.exp(-x**2 / 2)
    if N > 1:
        H[1] = sqrt(2.0) * x * H[0]
    for k in range(1, N - 1):
        H[k + 1] = sqrt(2.0 / (k + 1)) * x * H[k] - sqrt(k / (k + 1)) * H[k - 1]
    return H


def position_matrix(N):
    """Matrix of x on span(h_0..h_{N-1}) (truncated, tridiagonal)."""
    off = np.sqrt(np.arange(1, N) / 2.0)
    return np.diag(off, 1) + np.diag(off, -1)


def derivative_matrix(N):
    """Matrix of d/dx on span(h_0..h_{N-1}) (truncated, skew tridiagonal)."""
    off = np.sqrt(np.arange(1, N) / 2.0)
    return np.diag(off, 1) - np.diag(off, -1)


def _weyl_1d(a, b, N):
    """Exact N x N block of the Weyl quantization of x^a xi^b.

    Uses (x^a xi^b)^w = 2^-a sum_k binom(a, k) x^k D^b x^(a-k), D = -i d/dx,
    evaluated with padded ladder matrices so that the truncation is exact.
    """
    P = N + a + b
    X = position_matrix(P).astype(complex)
    D = -1j * derivative_matrix(P)
    Db = np.linalg.matrix_power(D, b)
    out = np.zeros((P, P), dtype=complex)
    for k in range(a + 1):
        out += comb(a, k) * np.linalg.matrix_power(X, k) @ Db @ np.linalg.matrix_power(X, a - k)
    return out[:N, :N] / 2**a


def weyl_poly_matrix(poly, N):
    """Galerkin matrix of the Weyl quantization of a polynomial symbol.

    Parameters
    ----------
    poly : PolySymbol
        Exponent tuples ``(gamma_x, gamma_xi)`` of length 2n.
    N : int
        Hermite modes per dimension.

    Returns
    -------
    scipy.sparse.csr_matrix of shape (N^n, N^n)
    """
    n = poly.n
    total = sp.csr_matrix((N**n, N**n), dtype=complex)
    cache = {}
    for key, c in poly.coeffs.items():
        if c == 0:
            continue
        factors = []
        for j in range(n):
            ab = (key[j], key[n + j])
            if ab not in cache:
                cache[ab] = sp.csr_matrix(_weyl_1d(ab[0], ab[1], N))
            factors.append(cache[ab])
        M = factors[0]
        for f in factors[1:]:
            M = sp.kron(M, f, format="csr")
        total = total + c * M
    return total.tocsr()


def quadratic_poly(q):
    """PolySymbol of a quadratic symbol."""
    m = 2 * q.n
    coeffs = {}
    for a in range(m):
        for b in range(m):
            key = [0] * m
            key[a] += 1
            key[b] += 1
            key = tuple(key)
            coeffs[key] = coeffs.get(key, 0) + q.coeff[a, b]
    return PolySymbol(n=q.n, coeffs=coeffs)


# --- states --------------------------------------------------------------------


def grid_axis(L, M):
    """Periodic grid -L + 2L j / M, j = 0 .. M-1."""
    return -L + 2 * L * np.arange(M) / M


@dataclass(frozen=True)
class FunctionState:
    """Element of L^2(R^n) in Hermite or grid representation.

    ``data`` has shape (N,)*n for Hermite states and (M,)*n for grid states.
    """

    kind: str
    data: np.ndarray
    n: int
    N: int | None = None
    L: float | None = None
    M: int | None = None

    @property
    def h(self):
        return 2 * self.L / self.M

    def axis(self):
        return grid_axis(self.L, self.M)

    def mesh(self):
        ax = self.axis()
        return np.meshgrid(*([ax] * self.n), indexing="ij")

    def norm(self):
        if self.kind == "hermite":
            return float(np.linalg.norm(self.data))
        return float(np.sqrt(self.h**self.n * np.sum(np.abs(self.data) ** 2)))

    def inner(self, other):
        if self.kind == "hermite":
            return complex(np.vdot(self.data, other.data))
        return complex(self.h**self.n * np.vdot(self.data, other.data))

    def with_data(self, data):
        return FunctionState(self.kind, np.asarray(data, dtype=complex), self.n, self.N, self.L, self.M)

    def to_grid(self, L, M):
        if self.kind == "grid":
            if (L, M) != (self.L, self.M):
                raise BadDimension("regridding is not supported")
            return self
        H = hermite_functions(self.N, grid_axis(L, M))
        vals = self.data
        for _ in range(self.n):
            vals = np.tensordot(vals, H, axes=([0], [0]))
        return FunctionState("grid", vals.astype(complex), self.n, L=L, M=M)

    def to_hermite(self, N):
        if self.kind == "hermite":
            if N != self.N:
                raise BadDimension("re-truncation is not supported")
            return self
        H = hermite_functions(N, self.axis()) * self.h
        vals = self.data
        for _ in range(self.n):
            vals = np.tensordot(vals, H, axes=([0], [1]))
        return FunctionState("hermite", vals.astype(complex), self.n, N=N)

    def tail_mass(self, fraction=0.9):
        """Relative grid mass outside the box |x_j| <= fraction * L."""
        mask = np.zeros(self.data.shape, dtype=bool)
        for X in self.mesh():
            mask |= np.abs(X) > fraction * self.L
        tot = np.sum(np.abs(self.data) ** 2)
        return float(np.sum(np.abs(self.data[mask]) ** 2) / tot) if tot > 0 else 0.0


def grid_state(func, n, L, M):
    """Sample ``func(*coords)`` on the periodic grid."""
    s = FunctionState("grid", np.zeros((M,) * n, dtype=complex), n, L=L, M=M)
    return s.with_data(func(*s.mesh()))


def gaussian_coeffs(N, center=0.0, width=1.0):
    """Hermite coefficients of exp(-(x - center)^2 / (2 width^2)) by Gauss-Hermite quadrature."""
    xg, wg = np.polynomial.hermite.hermgauss(2 * N + 40)
    f = np.exp(-((xg - center) ** 2) / (2 * width**2))
    H = hermite_functions(N, xg)
    return H @ (wg * np.exp(xg**2) * f)


def gaussian_state(kind, n, center=None, width=1.0, N=48, L=12.0, M=256):
    """Product Gaussian exp(-|x - center|^2 / (2 width^2)) in either representation."""
    center = np.zeros(n) if center is None else np.asarray(center, dtype=float)
    if kind == "hermite":
        c = gaussian_coeffs(N, center[0], width)
        data = c
        for j in range(1, n):
            data = np.multiply.outer(data, gaussian_coeffs(N, center[j], width))
        return FunctionState("hermite", data.astype(complex), n, N=N)

    def f(*X):
        r2 = sum((Xj - cj) ** 2 for Xj, cj in zip(X, center))
        return np.exp(-r2 / (2 * width**2))

    return grid_state(f, n, L, M)


def noise_state(n, N, seed=0, cutoff=None):
    """Truncated-frequency noise: i.i.d. complex normal Hermite coefficients below ``cutoff``."""
    rng = np.random.default_rng(seed)
    cutoff = N if cutoff is None else cutoff
    data = np.zeros((N,) * n, dtype=complex)
    idx = tuple(slice(0, cutoff) for _ in range(n))
    shape = (cutoff,) * n
    data[idx] = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    data /= np.linalg.norm(data)
    return FunctionState("hermite", data, n, N=N)


def hermite_tail_mass(u, last=5):
    """Relative coefficient mass in the top ``last`` Hermite orders of any axis."""
    if u.kind != "hermite":
        raise BadDimension("tail mass needs a Hermite state")
    mask = np.zeros(u.data.shape, dtype=bool)
    for ax in range(u.n):
        idx = [slice(None)] * u.n
        idx[ax] = slice(u.N - last, u.N)
        mask[tuple(idx)] = True
    tot = np.sum(np.abs(u.data) ** 2)
    return float(np.sum(np.abs(u.data[mask]) ** 2) / tot) if tot > 0 else 0.0


def state_to_csv(u):
    """CSV text: grid coordinates (or Hermite indices) followed by re, im columns."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if u.kind == "grid":
        w.writerow([f"x{j + 1}" for j in range(u.n)] + ["re", "im"])
        pts = np.stack([m.ravel() for m in u.mesh()], axis=-1)
    else:
        w.writerow([f"k{j + 1}" for j in range(u.n)] + ["re", "im"])
        pts = np.stack([m.ravel() for m in np.meshgrid(*([np.arange(u.N)] * u.n), indexing="ij")], axis=-1)
    for p, z in zip(pts, u.data.ravel()):
        w.writerow([repr(x.item()) for x in p] + [repr(float(z.real)), repr(float(z.imag))])
    return buf.getvalue()


def state_from_csv(text, L=None):
    """Inverse of :func:`state_to_csv`; grid states need the half-width ``L``."""
    rows = list(csv.reader(io.StringIO(text)))
    header, body = rows[0], np.array(rows[1:], dtype=float)
    n = len(header) - 2
    size = body.shape[0]
    side = int(round(size ** (1.0 / n)))
    data = (body[:, n] + 1j * body[:, n + 1]).reshape((side,) * n)
    if header[0].startswith("k"):
        return FunctionState("hermite", data, n, N=side)
    if L is None:
        L = -float(body[0, 0])
    return FunctionState("grid", data, n, L=L, M=side)


# --- Hermite backend -------------------------------------------------------------


@dataclass
class HermiteOperator:
    """Galerkin matrix of q^w on tensorized Hermite functions of order < N."""

    matrix: sp.csr_matrix
    n: int
    N: int
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def dense(self):
        if "dense" not in self._cache:
            self._cache["dense"] = self.matrix.toarray()
        return self._cache["dense"]

    @property
    def dim(self):
        return self.N**self.n

    def propagator(self, t):
        """exp(-tM) by scaling and squaring, computed once per t."""
        key = ("expm", float(t))
        if key not in self._cache:
            self._cache[key] = sla.expm(-t * self.dense)
        return self._cache[key]

    def numerical_range_min(self):
        """Smallest real part of the numerical range (exact, via the Hermitian part)."""
        A = self.dense
        return float(np.linalg.eigvalsh((A + A.conj().T) / 2).min())


def hermite_matrix(q, N=48):
    """Hermite-Galerkin matrix of the Weyl quantization of ``q``.

    Raises
    ------
    TruncationTooLarge
        If ``N > 64`` or ``n > 2``.
    """
    if N > MAX_N or q.n > 2:
        raise TruncationTooLarge(f"N={N}, n={q.n} exceeds N <= {MAX_N}, n <= 2")
    return HermiteOperator(matrix=weyl_poly_matrix(quadratic_poly(q), N), n=q.n, N=N)


def evolve_hermite(op, t, u):
    """exp(-tM) u for a Hermite state ``u``.

    Dense scaling-and-squaring is used up to dimension 1200; above that the
    action is computed with ``scipy.sparse.linalg.expm_multiply``.
    """
    if u.kind != "hermite" or u.N != op.N or u.n != op.n:
        raise BadDimension("state must be a Hermite state with matching N and n")
    if t == 0:
        return u
    v = u.data.reshape(-1)
    if op.dim <= DENSE_LIMIT or ("expm", float(t)) in op._cache:
        w = op.propagator(t) @ v
    else:
        w = expm_multiply(-t * op.matrix, v)
    return u.with_data(w.reshape(u.data.shape))


# --- Mehler backend ----------------------------------------------------------------


def _frequencies(L, M):
    return np.pi / L * (np.arange(M) - M // 2)


def _mehler_kernel_form(F, t):
    """Quadratic exponent data of G(x, k) = (p_t^w e^{ik.})(x).

    The (y, xi) integral of the Weyl quantization is done as one joint
    Gaussian integral.  Its matrix tends to the Fourier-inversion form as
    t -> 0, so there is no cancellation for short times.

    Returns ``(C, Pxx, Pxk, Pkk)`` with
    ``G(x, k) = C exp(x.Pxx.x + x.Pxk.k + k.Pkk.k)``.
    """
    n = F.n
    ms = mehler_form(F, t)
    A = ms.form
    I = np.eye(n)
    Z = np.zeros((n, n))
    P = np.block([[I / 2, Z], [Z, I]])
    K = np.block([[Z, 0.5j * I], [0.5j * I, Z]])
    H = P.T @ A @ P + K
    E1 = np.vstack([I, Z])
    Bx = np.vstack([Z, 1j * I]) - P.T @ A @ E1
    Bk = np.vstack([1j * I, Z])
    Hinv = np.linalg.inv(H)
    Pxx = -0.25 * E1.T @ A @ E1 + 0.25 * Bx.T @ Hinv @ Bx
    Pxk = 0.5 * Bx.T @ Hinv @ Bk
    Pkk = 0.25 * Bk.T @ Hinv @ Bk
    # det H = det K det(I + K^-1 P^T A P) with sqrt(det K) = 2^-n
    C = ms.norm_factor / sqrt_det(np.eye(2 * n) + np.linalg.solve(K, P.T @ A @ P))
    if np.linalg.eigvalsh(-((Pkk + Pkk.conj().T) / 2).real).min() < -1e-12:
        raise SingularForm("Mehler kernel grows in the frequency variable")
    return C, (Pxx + Pxx.T) / 2, Pxk, (Pkk + Pkk.T) / 2


def _points(L, M, n):
    ax = grid_axis(L, M)
    mesh = np.meshgrid(*([ax] * n), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def _kpoints(L, M, n):
    k = _frequencies(L, M)
    mesh = np.meshgrid(*([k] * n), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def _dft_coefficients(data, L, M):
    """c_k with u(y_j) = sum_k c_k exp(i k . y_j) on the grid."""
    n = data.ndim
    y = grid_axis(L, M)
    k = _frequencies(L, M)
    E = np.exp(-1j * np.outer(k, y)) / M
    c = data
    for ax in range(n):
        c = np.moveaxis(np.tensordot(E, c, axes=([1], [ax])), 0, ax)
    return c


def _dft_matrix(L, M, n):
    y = grid_axis(L, M)
    k = _frequencies(L, M)
    E = np.exp(-1j * np.outer(k, y)) / M
    out = E
    for _ in range(n - 1):
        out = np.kron(out, E)
    return out


def _kernel_block(form, X, K):
    C, Pxx, Pxk, Pkk = form
    ex = np.einsum("pi,ij,pj->p", X, Pxx, X)
    ek = np.einsum("qi,ij,qj->q", K, Pkk, K)
    return C * np.exp(ex[:, None] + X @ Pxk @ K.T + ek[None, :])


def mehler_grid_propagator(F, t, L, M):
    """Dense matrix of exp(-t q^w) acting on grid samples (n <= 2)."""
    n = F.n
    if n > 2:
        raise BadDimension("grid evolution supports n <= 2 only")
    size = M**n
    if t == 0:
        return np.eye(size, dtype=complex)
    form = _mehler_kernel_form(F, t)
    G = _kernel_block(form, _points(L, M, n), _kpoints(L, M, n))
    return G @ _dft_matrix(L, M, n)


def evolve_mehler(F, t, u, check=True, chunk=2048):
    """exp(-t q^w) u on a grid state via the closed-form Mehler kernel.

    Raises
    ------
    FocalTime
        Propagated from the Mehler symbol.
    GridUnderResolved
        If ``check`` and the output grid mass beyond 0.9 L exceeds 1e-6.
    """
    if u.kind != "grid":
        raise BadDimension("evolve_mehler needs a grid state")
    if u.n != F.n or u.n > 2:
        raise BadDimension("dimension mismatch or n > 2")
    if t == 0:
        return u.with_data(u.data.copy())
    form = _mehler_kernel_form(F, t)
    c = _dft_coefficients(u.data, u.L, u.M).reshape(-1)
    X = _points(u.L, u.M, u.n)
    K = _kpoints(u.L, u.M, u.n)
    out = np.empty(X.shape[0], dtype=complex)
    for s in range(0, X.shape[0], chunk):
        out[s:s + chunk] = _kernel_block(form, X[s:s + chunk], K) @ c
    v = u.with_data(out.reshape(u.data.shape))
    if check and v.tail_mass() > TAIL_GUARD:
        raise GridUnderResolved(f"tail mass {v.tail_mass():.2e} exceeds {TAIL_GUARD}")
    return v


# --- seminorms -----------------------------------------------------------------------


def _seminorm_factor_1d(N, a, b):
    """(N+a+b) x N matrix of x^a d^b on span(h_0..h_{N-1})."""
    P = N + a + b
    X = np.linalg.matrix_power(position_matrix(P), a)
    D = np.linalg.matrix_power(derivative_matrix(P), b)
    return (X @ D)[:, :N]


def seminorm_matrix(n, N, alpha, beta):
    """Matrix of x^alpha d^beta from Hermite order < N to padded Hermite coefficients."""
    M = _seminorm_factor_1d(N, alpha[0], beta[0])
    for j in range(1, n):
        M = np.kron(M, _seminorm_factor_1d(N, alpha[j], beta[j]))
    return M


def seminorm(u, alpha, beta):
    """||x^alpha d^beta u||_{L^2} by Hermite ladder algebra or FFT differentiation."""
    alpha, beta = tuple(alpha), tuple(beta)
    if sum(alpha) + sum(beta) > 8:
        raise ValueError("|alpha| + |beta| must not exceed 8")
    if u.kind == "hermite":
        v = u.data
        for j in range(u.n):
            Mj = _seminorm_factor_1d(u.N, alpha[j], beta[j])
            v = np.moveaxis(np.tensordot(Mj, v, axes=([1], [j])), 0, j)
        return float(np.linalg.norm(v))
    v = np.fft.fftn(u.data)
    total = float(np.sum(np.abs(v) ** 2))
    if total > 0 and _spectral_tail(v) / total > 1e-10:
        raise GridUnderResolved("state is not resolved by the grid")
    return seminorm_fft(u, beta, alpha)


def _spectral_tail(v):
    """Energy in the outer eighth of the discrete spectrum in any axis."""
    M = v.shape[0]
    k = np.abs(np.fft.fftfreq(M) * M)
    mask = np.zeros(v.shape, dtype=bool)
    for ax in range(v.ndim):
        shape = [1] * v.ndim
        shape[ax] = M
        mask |= (k > 3 * M / 8).reshape(shape)
    return float(np.sum(np.abs(v[mask]) ** 2))


# --- smoothing rates -----------------------------------------------------------------


@dataclass(frozen=True)
class SmoothingSeries:
    """Measured seminorms at truncation N and at a reference truncation."""

    t: np.ndarray
    orders: list
    values: np.ndarray
    reference: np.ndarray
    u_norm: float
    n: int
    k0: int


@dataclass(frozen=True)
class SmoothingReport:
    rows: list
    exponents: dict
    predicted_exponents: dict
    C: float
    passed: bool
    flags: dict

    def table(self, alpha, beta):
        key = (tuple(alpha), tuple(beta))
        return [(r["t"], r["seminorm"], r["bound"]) for r in self.rows if r["key"] == key]


def _top_singular(A):
    if min(A.shape) <= 400:
        return float(np.linalg.norm(A, 2))
    return float(svds(A, k=1, return_singular_vectors=False, random_state=0)[0])


def measure_smoothing(q, k0, orders, t_grid, N=32, N_ref=None, datum="worst", seed=0, data_modes=None):
    """Seminorms ||x^alpha d^beta exp(-t q^w) u|| at two Hermite truncations.

    Parameters
    ----------
    datum : {"worst", "noise"}
        ``worst`` takes the supremum over unit data spanned by the first
        ``data_modes`` Hermite functions per axis (largest singular value);
        ``noise`` uses one fixed-seed noise datum with the same cutoff.
    data_modes : int, optional
        Defaults to ``N // 2``.  Keeping the data away from the top of the
        truncated space stops the supremum from exploiting Galerkin edge
        effects.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.size < 8:
        raise InsufficientData("need at least 8 times")
    N_ref = N + 8 if N_ref is None else N_ref
    Nd = N // 2 if data_modes is None else data_modes
    vals = np.zeros((len(orders), t_grid.size))
    refs = np.zeros_like(vals)
    for target, NN in ((vals, N), (refs, N_ref)):
        op = hermite_matrix(q, NN)
        u = noise_state(q.n, NN, seed, cutoff=Nd)
        keep = np.zeros((NN,) * q.n, dtype=bool)
        keep[(slice(0, Nd),) * q.n] = True
        keep = keep.reshape(-1)
        for it, t in enumerate(t_grid):
            E = op.propagator(t)
            for io, (alpha, beta) in enumerate(orders):
                D = seminorm_matrix(q.n, NN, alpha, beta)
                if datum == "worst":
                    target[io, it] = _top_singular(D @ E[:, keep])
                else:
                    target[io, it] = np.linalg.norm(D @ (E @ u.data.reshape(-1)))
    return SmoothingSeries(t=t_grid, orders=list(orders), values=vals, reference=refs,
                           u_norm=1.0 if datum == "worst" else u.norm(), n=q.n, k0=k0)


def predicted_exponent(k0, order, n):
    """(2k0 + 1)(|alpha| + |beta| + s) with s = 9n/4 + 2 floor(n/2) + 3."""
    return (2 * k0 + 1) * (order + smoothing_s(n))


def smoothing_exponent_fit(series, rel_err=0.1, slack=0.2):
    """Fit blow-up exponents and a single Gevrey constant.

    Points whose truncation error (relative difference to the reference
    truncation) exceeds ``rel_err`` are excluded from the fits.
    """
    if series.t.size < 8:
        raise InsufficientData("need at least 8 times")
    rows, exps, theo, flags = [], {}, {}, {}
    logt = np.log(series.t)
    C = 1.0
    for io, (alpha, beta) in enumerate(series.orders):
        key = (tuple(alpha), tuple(beta))
        order = sum(alpha) + sum(beta)
        e = predicted_exponent(series.k0, order, series.n)
        v, r = series.values[io], series.reference[io]
        valid = np.abs(v - r) <= rel_err * np.abs(r)
        if valid.sum() >= 3:
            slope = np.polyfit(logt[valid], np.log(v[valid]), 1)[0]
            exps[key] = float(-slope)
        else:
            exps[key] = float("nan")
        theo[key] = e
        fact = sqrt(np.prod([factorial(a) for a in alpha]) * np.prod([factorial(b) for b in beta]))
        for it in np.flatnonzero(valid):
            ratio = v[it] * series.t[it] ** e / (series.u_norm * fact)
            if ratio > 0:
                C = max(C, ratio ** (1.0 / (1 + order)))
        flags[key] = bool(np.isfinite(exps[key]) and exps[key] <= e + slack)
        for it, t in enumerate(series.t):
            rows.append(dict(key=key, t=float(t), seminorm=float(v[it]), valid=bool(valid[it]),
                             order=order, fact=fact, exponent=e))
    for r in rows:
        r["bound"] = float(C ** (1 + r["order"]) * r["t"] ** (-r["exponent"]) * r["fact"] * series.u_norm)
    passed = all(flags.values()) and np.isfinite(C)
    return SmoothingReport(rows=rows, exponents=exps, predicted_exponents=theo, C=float(C),
                           passed=bool(passed), flags=flags)


def supported_orders(n, I, J, max_order):
    """(alpha, beta) with alpha supported on I, beta on J (1-based) and |alpha|+|beta| <= max_order."""
    I0 = [i - 1 for i in I]
    J0 = [j - 1 for j in J]
    out = []
    for tot in range(max_order + 1):
        for combo in product(range(tot + 1), repeat=len(I0) + len(J0)):
            if sum(combo) != tot:
                continue
            alpha = [0] * n
            beta = [0] * n
            for i, c in zip(I0, combo[: len(I0)]):
                alpha[i] = c
            for j, c in zip(J0, combo[len(I0):]):
                beta[j] = c
            out.append((tuple(alpha), tuple(beta)))
    return out


# --- Gelfand-Shilov utilities -----------------------------------------------------------


def gevrey_to_frequency(L1, L2, n):
    """Frequency-decay data (C1 L1, C2 L2^-2) with C1 = 2^n, C2 = 1/(16 e n^2)."""
    if L1 <= 0 or L2 <= 0:
        raise ValueError("Lambda_1 and Lambda_2 must be positive")
    return 2**n * L1, 1.0 / (16 * e * n**2) / L2**2


@dataclass(frozen=True)
class GevreyCheck:
    L1: float
    L2: float
    weighted_norm: float
    bound: float

    @property
    def margin(self):
        return self.bound / self.weighted_norm


def check_gevrey_frequency(u, max_order=10):
    """Measure (Lambda_1, Lambda_2) of a grid state and test the frequency conclusion.

    Lambda_1 = ||u|| and Lambda_2 is the smallest value with
    ||d^alpha u|| <= Lambda_1 Lambda_2^|alpha| sqrt(alpha!) for |alpha| <= max_order.
    """
    n = u.n
    L1 = u.norm()
    L2 = 0.0
    for tot in range(1, max_order + 1):
        for alpha in product(range(tot + 1), repeat=n):
            if sum(alpha) != tot:
                continue
            d = seminorm_fft(u, alpha)
            fact = sqrt(np.prod([factorial(a) for a in alpha]))
            L2 = max(L2, (d / (L1 * fact)) ** (1.0 / tot))
    bound, width = gevrey_to_frequency(L1, L2, n)
    k = 2 * np.pi * np.fft.fftfreq(u.M, d=u.h)
    K2 = sum(Km**2 for Km in np.meshgrid(*([k] * n), indexing="ij"))
    v = np.fft.ifftn(np.exp(width * K2) * np.fft.fftn(u.data))
    wn = float(np.sqrt(u.h**n * np.sum(np.abs(v) ** 2)))
    return GevreyCheck(L1=L1, L2=L2, weighted_norm=wn, bound=bound)


def seminorm_fft(u, beta, alpha=None):
    """||x^alpha d^beta u|| on the grid without the resolution guard."""
    alpha = (0,) * u.n if alpha is None else alpha
    k = 2 * np.pi * np.fft.fftfreq(u.M, d=u.h)
    v = np.fft.fftn(u.data)
    for j in range(u.n):
        shape = [1] * u.n
        shape[j] = u.M
        v = v * ((1j * k) ** beta[j]).reshape(shape)
    w = np.fft.ifftn(v)
    for j, X in enumerate(u.mesh()):
        w = w * X ** alpha[j]
    return float(np.sqrt(u.h**u.n * np.sum(np.abs(w) ** 2)))


def gs_dimension_constant(N):
    """Explicit C(N) for the Gelfand-Shilov bound.

    Built from the Sobolev constant
    ``C_sob = (2 pi)^(-N/2) s! (pi^(N/2) Gamma(s - N/2) / Gamma(s))^(1/2)``
    with s = floor(N/2) + 1, which satisfies
    ``||f||_inf <= C_sob sum_{|gamma| <= s} ||d^gamma f||_2``, and
    ``C(N) = max(2^(5/2), C_sob (s!)^(3/2) 2^(9s/2 + 3N/4))``.
    """
    s = N // 2 + 1
    csob = (2 * pi) ** (-N / 2) * factorial(s) * sqrt(pi ** (N / 2) * gamma(s - N / 2) / gamma(s))
    return max(2**2.5, csob * factorial(s) ** 1.5 * 2 ** (4.5 * s + 0.75 * N))


def gs_bound_constants(C1, c1, C2, c2, N):
    """Evaluator of C^{1+|a|+|b|} [C1/c1^{|a|+N/4} C2/c2^{|b|+s+N/4} a! b!]^{1/2}.

    Applies to f with |f| <= C1 exp(-c1|x|^2) and |f^| <= C2 exp(-c2|xi|^2).

    Raises
    ------
    ParameterOutOfRange
        If c1 or c2 is outside (0, 1).
    """
    if not (0 < c1 < 1 and 0 < c2 < 1):
        raise ParameterOutOfRange("c1 and c2 must lie in (0, 1)")
    C = gs_dimension_constant(N)
    s = N // 2 + 1

    def bound(alpha, beta):
        a, b = sum(alpha), sum(beta)
        fact = np.prod([factorial(x) for x in alpha]) * np.prod([factorial(x) for x in beta])
        inner = C1 / c1 ** (a + N / 4) * C2 / c2 ** (b + s + N / 4) * fact
        return C ** (1 + a + b) * sqrt(inner)

    bound.C = C
    return bound


def measured_sup(u, alpha, beta):
    """sup |x^alpha d^beta u| on the grid (FFT differentiation)."""
    k = 2 * np.pi * np.fft.fftfreq(u.M, d=u.h)
    v = np.fft.fftn(u.data)
    for j in range(u.n):
        shape = [1] * u.n
        shape[j] = u.M
        v = v * ((1j * k) ** beta[j]).reshape(shape)
    w = np.fft.ifftn(v)
    for j, X in enumerate(u.mesh()):
        w = w * X ** alpha[j]
    return float(np.abs(w).max())
