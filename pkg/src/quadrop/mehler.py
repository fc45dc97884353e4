"""Mehler propagator symbol, Gaussian Fourier analysis and Moyal products.

The Weyl symbol of ``exp(-t q^w)`` is

    p_t(X) = det(cos tF)^{-1/2} exp(-q_t(X)),   q_t(X) = sigma(X, tan(tF) X),

with the square root continued from 1 at t = 0.  Fourier transforms use
``f^(Xi) = int exp(-i<X, Xi>) f(X) dX``.
"""

from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from math import comb, factorial, lgamma, log, pi, sqrt

import numpy as np
import scipy.linalg as sla
from scipy.special import ndtri
from scipy.stats import qmc

from .errors import (
    DegreeCap,
    EmptyComplement,
    FocalTime,
    IllConditioned,
    InsufficientData,
    NotPositiveDefinite,
    OverflowGuard,
    SingularForm,
)
from .symbol_core import symplectic_J, sigma

EIG_COND_MAX = 1e8
FOCAL_DET_TOL = 1e-10
SERIES_NORM_MAX = 8.0
MAX_DEGREE = 12
MAX_PATH_STEPS = 2**20


# --- matrix functions --------------------------------------------------------


@dataclass(frozen=True)
class PropagatorMatrices:
    cos: np.ndarray
    tan: np.ndarray
    exp2i: np.ndarray
    det_cos: complex
    method: str


def _series_cos_sin(M):
    """Taylor series of cos M and sin M with a rigorous remainder bound.

    The remainder after the term of degree k is bounded by
    ``||M||^(k+1) / (k+1)! * exp(||M||)``.
    """
    m = M.shape[0]
    nrm = np.linalg.norm(M, 2)
    C = np.eye(m, dtype=complex)
    S = np.zeros((m, m), dtype=complex)
    term = np.eye(m, dtype=complex)
    k = 0
    bound = np.inf
    while True:
        k += 1
        term = term @ M / k
        if k % 4 == 1:
            S += term
        elif k % 4 == 2:
            C -= term
        elif k % 4 == 3:
            S -= term
        else:
            C += term
        bound = nrm ** (k + 1) / factorial(k + 1) * np.exp(nrm) if k < 170 else 0.0
        if bound <= 1e-17 * max(1.0, np.linalg.norm(C, 2)) or k > 400:
            break
    return C, S, bound


def first_focal_time(F):
    """First t > 0 at which det cos(tF) vanishes (inf if never).

    Uses det cos(tF) = prod cos(t lambda_j), which holds without
    diagonalizability.
    """
    lam = np.linalg.eigvals(F.F)
    times = [
        pi / (2 * abs(l.real))
        for l in lam
        if abs(l) > 1e-14 and abs(l.imag) <= 1e-10 * max(1.0, abs(l))
    ]
    return min(times) if times else np.inf


def validity_window(F, cap=1.0):
    """Empirical validity window: 0.9 times the first focal time, at most ``cap``."""
    return min(0.9 * first_focal_time(F), cap)


def det_cos_eigen(F, t):
    """det cos(tF) from the eigenvalues of F."""
    return complex(np.prod(np.cos(t * np.linalg.eigvals(F.F))))


def propagator_matrices(F, t, method="auto"):
    """cos tF, tan tF, exp(2itF) and det cos tF.

    Parameters
    ----------
    F : HamiltonMap
    t : float
        Time, ``t >= 0``.
    method : {"auto", "eig", "series"}
        ``auto`` uses the eigendecomposition when the eigenvector matrix has
        condition number below 1e8 and the power series otherwise.

    Raises
    ------
    FocalTime
        If ``|det cos tF| < 1e-10``.
    IllConditioned
        If ``method="eig"`` is forced on a nearly defective F.
    """
    if t < 0:
        raise ValueError("t must be non-negative")
    A = np.asarray(F.F, dtype=complex)
    use = method
    if method == "auto":
        w, V = np.linalg.eig(A)
        use = "eig" if np.linalg.cond(V) < EIG_COND_MAX else "series"
    if use == "eig":
        w, V = np.linalg.eig(A)
        if np.linalg.cond(V) >= EIG_COND_MAX:
            raise IllConditioned("eigenvector matrix is ill-conditioned; use the series method")
        Vi = np.linalg.inv(V)
        cw = np.cos(t * w)
        if np.abs(cw).min() == 0.0:
            raise FocalTime(f"det cos(tF) vanishes at t={t}")
        cos = (V * cw) @ Vi
        tan = (V * (np.tan(t * w))) @ Vi
        exp2i = (V * np.exp(2j * t * w)) @ Vi
        det = complex(np.prod(cw))
    elif use == "series":
        M = t * A
        if np.linalg.norm(M, 2) <= SERIES_NORM_MAX:
            cos, sin, _ = _series_cos_sin(M)
        else:
            E = sla.expm(1j * M)
            Ei = sla.expm(-1j * M)
            cos, sin = (E + Ei) / 2, (E - Ei) / 2j
        det = complex(np.linalg.det(cos))
        if abs(det) < FOCAL_DET_TOL:
            raise FocalTime(f"det cos(tF) = {det:.3e} at t={t}")
        tan = np.linalg.solve(cos, sin)
        exp2i = sla.expm(2j * M)
    else:
        raise ValueError(f"unknown method {method!r}")
    if abs(det) < FOCAL_DET_TOL:
        raise FocalTime(f"det cos(tF) = {det:.3e} at t={t}")
    return PropagatorMatrices(cos=cos, tan=tan, exp2i=exp2i, det_cos=det, method=use)


def tracked_inv_sqrt_det(F, t, steps=64):
    """det(cos tF)^{-1/2} continued along [0, t] from the value 1 at t = 0.

    Adjacent path points whose determinant arguments differ by more than
    0.5 rad are refined by bisection (at most 2^20 steps in total).
    """
    lam = np.linalg.eigvals(F.F)

    def det(s):
        return complex(np.prod(np.cos(s * lam)))

    root = 1.0 + 0j
    prev_d = 1.0 + 0j
    stack = [t * (i + 1) / steps for i in range(steps)][::-1]
    s_prev = 0.0
    used = 0
    while stack:
        s = stack.pop()
        d = det(s)
        if abs(d) < FOCAL_DET_TOL:
            raise FocalTime(f"det cos(tF) vanishes near t={s}")
        if abs(np.angle(d / prev_d)) > 0.5:
            used += 1
            if used > MAX_PATH_STEPS:
                raise FocalTime("branch tracking did not converge")
            stack.append(s)
            stack.append((s + s_prev) / 2)
            continue
        r = np.sqrt(d)
        root = r if abs(r - root) <= abs(-r - root) else -r
        prev_d, s_prev = d, s
    return 1.0 / root


@dataclass(frozen=True)
class MehlerSymbol:
    """Weyl symbol ``norm_factor * exp(-<X, form X>)`` of exp(-t q^w)."""

    t: float
    form: np.ndarray
    norm_factor: complex

    @property
    def n(self):
        return self.form.shape[0] // 2

    def q_t(self, X):
        X = np.asarray(X)
        return np.einsum("...i,ij,...j->...", X, self.form, X)

    def __call__(self, X):
        return self.norm_factor * np.exp(-self.q_t(X))

    def gaussian(self):
        return GaussianSymbol(prefactor=self.norm_factor, A=self.form)


def mehler_form(F, t, method="auto"):
    """Mehler symbol of exp(-t q^w) at time ``t``.

    Examples
    --------
    For ``q = xi^2`` the form is ``diag(0, t)`` and the normalization is 1.
    """
    if t == 0:
        m = F.F.shape[0]
        return MehlerSymbol(t=0.0, form=np.zeros((m, m), dtype=complex), norm_factor=1.0 + 0j)
    P = propagator_matrices(F, t, method)
    A = symplectic_J(F.n).T @ P.tan
    A = (A + A.T) / 2
    return MehlerSymbol(t=float(t), form=A, norm_factor=tracked_inv_sqrt_det(F, t))


# --- Gaussian symbols --------------------------------------------------------


def sqrt_det(A):
    """Principal square root of det A continued from real positive definite A.

    For complex symmetric A with Re A positive definite every eigenvalue lies
    in the open right half-plane, so the product of principal roots is the
    continuous branch.
    """
    return complex(np.prod(np.sqrt(np.linalg.eigvals(A).astype(complex))))


@dataclass(frozen=True)
class GaussianSymbol:
    """``prefactor * exp(-<X, A X>)`` on R^N."""

    prefactor: complex
    A: np.ndarray

    def __post_init__(self):
        A = np.asarray(self.A, dtype=complex)
        nrm = max(np.linalg.norm(A, 2), 1.0)
        if np.abs(A - A.T).max(initial=0.0) > 1e-12 * nrm:
            raise ValueError("Gaussian form must be symmetric")
        if A.size and np.linalg.eigvalsh(A.real).min() < -1e-10 * nrm:
            raise ValueError("Gaussian form must have positive semidefinite real part")
        object.__setattr__(self, "A", (A + A.T) / 2)

    @property
    def N(self):
        return self.A.shape[0]

    def __call__(self, X):
        X = np.asarray(X)
        return self.prefactor * np.exp(-np.einsum("...i,ij,...j->...", X, self.A, X))


def gaussian_fourier(g):
    """Exact Fourier transform of a Gaussian symbol.

    Returns ``prefactor * pi^(N/2) det(A)^(-1/2) exp(-<A^-1 Xi, Xi>/4)``.

    Raises
    ------
    SingularForm
        If ``|det A| < 1e-12 ||A||^N``.
    """
    A = g.A
    N = g.N
    nrm = np.linalg.norm(A, 2)
    if abs(np.linalg.det(A)) < 1e-12 * max(nrm, 1e-300) ** N:
        raise SingularForm("Gaussian form is singular")
    Ainv = np.linalg.inv(A)
    pref = g.prefactor * pi ** (N / 2) / sqrt_det(A)
    return GaussianSymbol(prefactor=pref, A=Ainv / 4)


def restrict_form(A, basis):
    """Form ``basis^T A basis`` of the restriction to the span of ``basis``."""
    return basis.T @ A @ basis


def simultaneous_diagonalize(ReA, ImA):
    """Real P with P^T ReA P = I and P^T ImA P = diag(lam).

    Raises
    ------
    NotPositiveDefinite
        If ``ReA`` is not positive definite.
    """
    ReA = np.atleast_2d(np.asarray(ReA, dtype=float))
    ImA = np.atleast_2d(np.asarray(ImA, dtype=float))
    try:
        np.linalg.cholesky(ReA)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite("real part must be positive definite") from exc
    lam, P = sla.eigh(ImA, ReA)
    res = max(
        np.abs(P.T @ ReA @ P - np.eye(len(lam))).max(),
        np.abs(P.T @ ImA @ P - np.diag(lam)).max() / max(1.0, np.abs(lam).max()),
    )
    if res > 1e-9:
        raise NotPositiveDefinite(f"reconstruction residual {res:.2e}")
    return P, lam


# --- auxiliary form and coercivity -------------------------------------------


def auxiliary_Qt(F, t, X):
    """Q_t(X) = -i sigma(conj((e^{2itF} + I)X), (e^{2itF} - I)X)."""
    X = np.asarray(X, dtype=complex)
    E = sla.expm(2j * t * np.asarray(F.F, dtype=complex))
    EX = E @ X
    return complex(-1j * sigma(np.conj(EX + X), EX - X))


def aux_integrand(F, s, X):
    """4[(Re q)(Re e^{2isF}X) + (Re q)(Im e^{2isF}X)], the derivative of Re Q_s."""
    J = symplectic_J(F.n)
    reQ = -J @ F.re  # coefficient matrix of Re q, since F = J Q and J^-1 = -J
    Y = sla.expm(2j * s * np.asarray(F.F, dtype=complex)) @ np.asarray(X, dtype=complex)
    a, b = Y.real, Y.imag
    return 4.0 * (a @ reQ @ a + b @ reQ @ b)


def odd_derivative_test(F, X, k):
    """4^{k+1} binom(2k, k) sigma(conj(F^k X), (Re F) F^k X)."""
    if k < 0:
        raise ValueError("k must be non-negative")
    Y = np.linalg.matrix_power(np.asarray(F.F, dtype=complex), k) @ np.asarray(X, dtype=complex)
    val = 4 ** (k + 1) * comb(2 * k, k) * sigma(np.conj(Y), F.re @ Y)
    return float(np.real(val))


@dataclass(frozen=True)
class CoercivityFit:
    exponent: float
    c: float
    expected: int
    t: np.ndarray
    min_re: np.ndarray

    @property
    def passed(self):
        bound_ok = bool(np.all(self.min_re >= self.c * self.t**self.expected * (1 - 1e-12)))
        return self.exponent <= self.expected + 0.1 and bound_ok and self.c > 0


def sphere_samples(basis, count=200, seed=0):
    """Unit vectors in the span of ``basis``: Sobol points plus +-basis directions."""
    d = basis.shape[1]
    axes = np.vstack([np.eye(d), -np.eye(d)])
    extra = max(count - len(axes), 0)
    if extra:
        sob = qmc.Sobol(d, scramble=True, seed=seed).random_base2(int(np.ceil(np.log2(extra))))[:extra]
        Z = ndtri(np.clip(sob, 1e-12, 1 - 1e-12))
        Z /= np.linalg.norm(Z, axis=1, keepdims=True)
        pts = np.vstack([axes, Z])
    else:
        pts = axes
    return pts @ basis.T


def coercivity_exponent(F, analysis, t_grid=None, n_samples=200, seed=0):
    """Fit the small-time exponent of min Re q_t over the unit sphere of S-perp.

    Returns
    -------
    CoercivityFit
        Least-squares log-log slope, fitted constant ``c = min m(t)/t^(2k0+1)``.
    """
    basis = analysis.basis_perp
    if basis.shape[1] == 0:
        raise EmptyComplement("S is the whole phase space")
    if t_grid is None:
        t_grid = np.geomspace(1e-3, validity_window(F), 12)
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.size < 8:
        raise InsufficientData("need at least 8 times")
    X = sphere_samples(basis, n_samples, seed)
    m = np.empty_like(t_grid)
    for i, t in enumerate(t_grid):
        ReA = mehler_form(F, t).form.real
        m[i] = np.einsum("ki,ij,kj->k", X, ReA, X).min()
    slope = np.polyfit(np.log(t_grid), np.log(m), 1)[0]
    e = 2 * analysis.k0 + 1
    c = float(np.min(m / t_grid**e))
    return CoercivityFit(exponent=float(slope), c=c, expected=e, t=t_grid, min_re=m)


# --- polynomial symbols and Moyal products ------------------------------------


@dataclass(frozen=True)
class PolySymbol:
    """Polynomial on R^{2n}: map from exponent tuples (gamma_x, gamma_xi) to coefficients."""

    n: int
    coeffs: dict

    @classmethod
    def monomial(cls, alpha, beta, c=1.0):
        return cls(n=len(alpha), coeffs={tuple(alpha) + tuple(beta): complex(c)})

    @classmethod
    def constant(cls, n, c=1.0):
        return cls(n=n, coeffs={(0,) * (2 * n): complex(c)})

    @property
    def degree(self):
        return max((sum(k) for k in self.coeffs), default=0)

    def cleaned(self, tol=0.0):
        return PolySymbol(self.n, {k: v for k, v in self.coeffs.items() if abs(v) > tol})

    def __add__(self, other):
        out = dict(self.coeffs)
        for k, v in other.coeffs.items():
            out[k] = out.get(k, 0) + v
        return PolySymbol(self.n, out)

    def __mul__(self, other):
        if not isinstance(other, PolySymbol):
            return PolySymbol(self.n, {k: v * other for k, v in self.coeffs.items()})
        out = {}
        for k1, v1 in self.coeffs.items():
            for k2, v2 in other.coeffs.items():
                k = tuple(a + b for a, b in zip(k1, k2))
                out[k] = out.get(k, 0) + v1 * v2
        return PolySymbol(self.n, out)

    __rmul__ = __mul__

    def derivative(self, mu):
        """Partial derivative of multi-order ``mu`` (length 2n)."""
        out = {}
        for k, v in self.coeffs.items():
            if all(a >= b for a, b in zip(k, mu)):
                c = v
                for a, b in zip(k, mu):
                    c *= factorial(a) // factorial(a - b)
                nk = tuple(a - b for a, b in zip(k, mu))
                out[nk] = out.get(nk, 0) + c
        return PolySymbol(self.n, out)

    def __call__(self, X):
        X = np.asarray(X)
        val = np.zeros(X.shape[:-1], dtype=complex)
        for k, v in self.coeffs.items():
            val = val + v * np.prod(X ** np.asarray(k), axis=-1)
        return val

    def is_close(self, other, tol=1e-12):
        keys = set(self.coeffs) | set(other.coeffs)
        return all(abs(self.coeffs.get(k, 0) - other.coeffs.get(k, 0)) <= tol for k in keys)


def _multi_range(upper):
    return product(*(range(u + 1) for u in upper))


def _mfact(m):
    out = 1
    for a in m:
        out *= factorial(a)
    return out


CONVENTIONS = ("composition", "reversed")


def _check_convention(convention):
    if convention not in CONVENTIONS:
        raise ValueError(f"convention must be one of {CONVENTIONS}")


def moyal_monomial(alpha, beta, convention="composition"):
    """Weyl symbol of x^alpha sharp xi^beta.

    Parameters
    ----------
    convention : {"composition", "reversed"}
        ``composition`` gives the symbol of Op(x^alpha) Op(xi^beta), e.g.
        ``x sharp xi = x xi + i/2``.  ``reversed`` carries an extra factor
        (-1)^|gamma| and gives ``x xi - i/2``, the symbol of the reversed
        product Op(xi^beta) Op(x^alpha).
    """
    _check_convention(convention)
    alpha, beta = tuple(alpha), tuple(beta)
    if sum(alpha) + sum(beta) > MAX_DEGREE:
        raise DegreeCap(f"|alpha|+|beta| exceeds {MAX_DEGREE}")
    sign = -1 if convention == "reversed" else 1
    out = {}
    for gamma in _multi_range([min(a, b) for a, b in zip(alpha, beta)]):
        g = sum(gamma)
        c = Fraction(sign**g, 2**g * _mfact(gamma))
        c *= Fraction(_mfact(alpha) * _mfact(beta), _mfact(a - k for a, k in zip(alpha, gamma)) * _mfact(b - k for b, k in zip(beta, gamma)))
        key = tuple(a - k for a, k in zip(alpha, gamma)) + tuple(b - k for b, k in zip(beta, gamma))
        out[key] = out.get(key, 0) + complex(1j**g) * float(c)
    return PolySymbol(n=len(alpha), coeffs=out)


def _split_orders(n, k):
    """All (rho, eta) in N^n x N^n with |rho| + |eta| = k."""
    for combo in product(range(k + 1), repeat=2 * n):
        if sum(combo) == k:
            yield combo[:n], combo[n:]


def moyal_poly(a, b, convention="composition"):
    """Moyal product of two polynomial symbols (finite expansion)."""
    _check_convention(convention)
    n = a.n
    sign_eta = -1 if convention == "composition" else 1
    sign_rho = 1 if convention == "composition" else -1
    total = PolySymbol(n, {})
    for k in range(min(a.degree, b.degree) + 1):
        for rho, eta in _split_orders(n, k):
            c = (0.5j) ** k * sign_rho ** sum(rho) * sign_eta ** sum(eta) / (_mfact(rho) * _mfact(eta))
            da = a.derivative(tuple(rho) + tuple(eta))
            db = b.derivative(tuple(eta) + tuple(rho))
            total = total + (da * db) * c
    return total.cleaned()


def _gaussian_derivative_poly(A, mu):
    """Polynomial P with d^mu exp(-<X,AX>) = P exp(-<X,AX>)."""
    N = A.shape[0]
    P = PolySymbol(n=N // 2, coeffs={(0,) * N: 1.0 + 0j})
    lin = []
    for j in range(N):
        coeffs = {}
        for i in range(N):
            if A[j, i] != 0:
                key = tuple(1 if r == i else 0 for r in range(N))
                coeffs[key] = -2 * A[j, i]
        lin.append(PolySymbol(n=N // 2, coeffs=coeffs))
    for j, m in enumerate(mu):
        e = tuple(1 if r == j else 0 for r in range(N))
        for _ in range(m):
            P = P.derivative(e) + P * lin[j]
    return P


@dataclass(frozen=True)
class PolyGaussian:
    """``poly(X) * gauss(X)``."""

    poly: PolySymbol
    gauss: GaussianSymbol

    def __call__(self, X):
        return self.poly(X) * self.gauss(X)


def moyal_poly_gaussian(p, g, convention="composition"):
    """p sharp g for a polynomial p and Gaussian g, as polynomial times g.

    Uses the finite expansion over k <= deg p of
    (i/2)^k sum_{|rho|+|eta|=k} s(rho, eta)/(rho! eta!)
    d_x^rho d_xi^eta p * d_x^eta d_xi^rho g.
    """
    if p.degree > MAX_DEGREE:
        raise DegreeCap(f"polynomial degree exceeds {MAX_DEGREE}")
    _check_convention(convention)
    n = p.n
    sign_eta = -1 if convention == "composition" else 1
    sign_rho = 1 if convention == "composition" else -1
    total = PolySymbol(n, {})
    for k in range(p.degree + 1):
        for rho, eta in _split_orders(n, k):
            dp = p.derivative(tuple(rho) + tuple(eta))
            if not dp.coeffs:
                continue
            c = (0.5j) ** k * sign_rho ** sum(rho) * sign_eta ** sum(eta) / (_mfact(rho) * _mfact(eta))
            dg = _gaussian_derivative_poly(g.A, tuple(eta) + tuple(rho))
            total = total + (dp * dg) * c
    return PolyGaussian(poly=(total * g.prefactor).cleaned(), gauss=GaussianSymbol(1.0, g.A))


# --- bound checks ------------------------------------------------------------


def smoothing_s(n):
    """s = 9n/4 + 2 floor(n/2) + 3."""
    return 9 * n / 4 + 2 * (n // 2) + 3


def _sup_grid(A, points=15, radius=None):
    """Tensor grid adapted to the decay scale of Re A along each axis."""
    N = A.shape[0]
    axes = []
    for j in range(N):
        r = A[j, j].real
        R = radius if radius is not None else (6.0 / sqrt(r) if r > 0 else 3.0)
        axes.append(np.linspace(-R, R, points))
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


@dataclass(frozen=True)
class BoundCheck:
    rows: list
    C: float
    passed: bool


def _fit_constant(rows):
    """Smallest C >= 1 with value <= C^(1+order) * scale for every row."""
    C = 1.0
    for r in rows:
        if not np.isfinite(r["sup"]):
            return np.inf
        ratio = r["sup"] / r["scale"]
        if ratio > 0:
            C = max(C, ratio ** (1.0 / (1 + r["order"])))
    return C


def gaussian_bound_check(F, analysis, t_grid=(0.1, 0.2, 0.5, 1.0), max_order=4, points=15,
                         convention="composition"):
    """Sup-norm check of x^alpha sharp xi^beta sharp exp(-q_t).

    alpha ranges over N^n supported on I and beta over N^n supported on J;
    the reference scale is ``t^{-(2k0+1)(|alpha|+|beta|+s)} sqrt(alpha! beta!)``.
    """
    n = F.n
    if analysis.index_sets is None:
        raise ValueError("index sets are required")
    I = [i - 1 for i in analysis.index_sets.I]
    Jx = [j - 1 for j in analysis.index_sets.J]
    k = 2 * analysis.k0 + 1
    s = smoothing_s(n)
    orders = []
    for tot in range(max_order + 1):
        for combo in product(range(tot + 1), repeat=len(I) + len(Jx)):
            if sum(combo) != tot:
                continue
            alpha = [0] * n
            beta = [0] * n
            for i, c in zip(I, combo[: len(I)]):
                alpha[i] = c
            for j, c in zip(Jx, combo[len(I):]):
                beta[j] = c
            orders.append((tuple(alpha), tuple(beta)))
    rows = []
    for t in t_grid:
        ms = mehler_form(F, t)
        g = GaussianSymbol(1.0, ms.form)
        X = _sup_grid(ms.form, points)
        for alpha, beta in orders:
            p = moyal_monomial(alpha, beta, convention)
            val = moyal_poly_gaussian(p, g, convention)(X)
            sup = float(np.abs(val).max())
            order = sum(alpha) + sum(beta)
            scale = t ** (-k * (order + s)) * sqrt(_mfact(alpha) * _mfact(beta))
            rows.append(dict(t=t, alpha=alpha, beta=beta, order=order, sup=sup, scale=scale))
    C = _fit_constant(rows)
    return BoundCheck(rows=rows, C=C, passed=bool(np.isfinite(C)))


def gaussian_family_check(forms, k, max_order=4, points=11):
    """Sup-norms of X^alpha d^beta exp(-<X, A_t X>) against the Gevrey scale.

    ``forms`` maps t to an N x N form with Re A_t >= c t^k; the scale is
    ``t^{-(k/2)(|alpha| + 2|beta| + s')} sqrt(alpha! beta!)`` with
    ``s' = 5N/4 + 2 floor(N/2) + 2``.
    """
    rows = []
    for t, A in forms.items():
        N = A.shape[0]
        sp = 5 * N / 4 + 2 * (N // 2) + 2
        X = _sup_grid(A, points)
        g = GaussianSymbol(1.0, A)
        gv = g(X)
        for tot in range(max_order + 1):
            for combo in product(range(tot + 1), repeat=2 * N):
                if sum(combo) != tot:
                    continue
                alpha, beta = combo[:N], combo[N:]
                P = _gaussian_derivative_poly(A, beta)
                mon = np.prod(X ** np.asarray(alpha), axis=-1)
                sup = float(np.abs(mon * P(X) * gv).max())
                scale = t ** (-(k / 2) * (sum(alpha) + 2 * sum(beta) + sp)) * sqrt(_mfact(alpha) * _mfact(beta))
                rows.append(dict(t=t, alpha=alpha, beta=beta, order=tot, sup=sup, scale=scale))
    C = _fit_constant(rows)
    return BoundCheck(rows=rows, C=C, passed=bool(np.isfinite(C)))


@dataclass(frozen=True)
class WeightedNorm:
    squared: float
    norm: float
    bound: float


def gaussian_moment(p):
    """I_p = int x^(2p) exp(-x^2) dx = 4^-p (2p)!/p! sqrt(pi), in the log domain."""
    if p < 0:
        raise ValueError("p must be non-negative")
    if p > 170:
        raise OverflowGuard("p exceeds 170")
    return float(np.exp(-p * log(4) + lgamma(2 * p + 1) - lgamma(p + 1) + 0.5 * log(pi)))


def weighted_gaussian_norm(p, c):
    """Exact squared L2 norm of x^p exp(-c x^2) and its factorial upper bound.

    Returns
    -------
    WeightedNorm
        ``squared = I_p / (2c)^(p + 1/2)``, ``norm`` its root and the bound
        ``pi^(1/4) c^-(p/2 + 1/4) sqrt(p!)``.
    """
    if c <= 0:
        raise ValueError("c must be positive")
    if p > 170:
        raise OverflowGuard("p exceeds 170")
    log_sq = -p * log(4) + lgamma(2 * p + 1) - lgamma(p + 1) + 0.5 * log(pi) - (p + 0.5) * log(2 * c)
    log_bound = 0.25 * log(pi) - (p / 2 + 0.25) * log(c) + 0.5 * lgamma(p + 1)
    sq = float(np.exp(log_sq))
    norm = float(np.exp(0.5 * log_sq))
    bound = float(np.exp(log_bound))
    assert norm <= bound * (1 + 1e-12), "weighted Gaussian norm exceeds its bound"
    return WeightedNorm(squared=sq, norm=norm, bound=bound)
