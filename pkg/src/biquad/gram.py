"""The affine family of Gram matrices representing a biquadratic form.

With z = x (x) y (row index i*n + j), every symmetric matrix M satisfying
z'Mz = P(x, y) differs from the coefficient-tensor reshape by a combination
of swap directions: for each i < k, j < l the matrix with +1 at entries
((i,j),(k,l)) and -1 at ((i,l),(k,j)), mirrored symmetrically, annihilates
every z because x_i y_j x_k y_l - x_i y_l x_k y_j = 0.  Those directions are
linearly independent and count C(m,2) * C(n,2), the full kernel dimension,
so the family sweeps out all symmetric representations of P.

The SOS rank of an SOS form equals the minimum rank over the PSD members of
this family.  ``reduce_to_boundary`` walks a line inside the PSD cone to its
boundary (rank <= mn - 1); ``min_rank_search`` is a seeded heuristic
upper-bounder combining boundary walks, rank-deficient face steps, and a
smoothed-rank Nelder-Mead polish.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from . import linalg
from .errors import CannotReduce, InvalidInput, NoPSDPointFound, NotPSD
from .forms import BiquadraticForm, SOSDecomposition
from .linalg import DEFAULT_TOL, Tolerances

_BOUNDARY_TOL = 1e-10
_BRACKET_CAP = 1e9


@dataclass(frozen=True)
class GramFamily:
    """Base matrix plus the swap directions spanning the representation
    freedom of one biquadratic form."""

    m: int
    n: int
    base: np.ndarray
    quads: tuple[tuple[int, int, int, int], ...] = field(repr=False)
    _rows_plus: np.ndarray = field(repr=False, default=None)
    _cols_plus: np.ndarray = field(repr=False, default=None)
    _rows_minus: np.ndarray = field(repr=False, default=None)
    _cols_minus: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        n = self.n
        rp = np.array([i * n + j for i, k, j, l in self.quads], dtype=int)
        cp = np.array([k * n + l for i, k, j, l in self.quads], dtype=int)
        rm = np.array([i * n + l for i, k, j, l in self.quads], dtype=int)
        cm = np.array([k * n + j for i, k, j, l in self.quads], dtype=int)
        base = self.base.copy()
        base.setflags(write=False)
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "_rows_plus", rp)
        object.__setattr__(self, "_cols_plus", cp)
        object.__setattr__(self, "_rows_minus", rm)
        object.__setattr__(self, "_cols_minus", cm)

    @property
    def dim(self) -> int:
        return len(self.quads)

    def matrix_at(self, gamma: np.ndarray) -> np.ndarray:
        gamma = np.asarray(gamma, dtype=float)
        if gamma.shape != (self.dim,):
            raise InvalidInput(f"gamma must have length {self.dim}, got shape {gamma.shape}")
        m = self.base.copy()
        # Supports of distinct directions are disjoint, so fancy updates are safe.
        m[self._rows_plus, self._cols_plus] += gamma
        m[self._cols_plus, self._rows_plus] += gamma
        m[self._rows_minus, self._cols_minus] -= gamma
        m[self._cols_minus, self._rows_minus] -= gamma
        return m

    def direction(self, t: int) -> np.ndarray:
        mn = self.m * self.n
        delta = np.zeros((mn, mn))
        delta[self._rows_plus[t], self._cols_plus[t]] = 1.0
        delta[self._cols_plus[t], self._rows_plus[t]] = 1.0
        delta[self._rows_minus[t], self._cols_minus[t]] = -1.0
        delta[self._cols_minus[t], self._rows_minus[t]] = -1.0
        return delta

    @property
    def directions(self) -> list[np.ndarray]:
        return [self.direction(t) for t in range(self.dim)]

    def combine(self, coeffs: np.ndarray) -> np.ndarray:
        """Dense matrix sum_t coeffs[t] * direction(t)."""
        return self.matrix_at(np.asarray(coeffs, dtype=float)) - self.base


@dataclass(frozen=True)
class GramPoint:
    family: GramFamily
    gamma: np.ndarray
    matrix: np.ndarray

    def __post_init__(self):
        gamma = np.asarray(self.gamma, dtype=float).copy()
        gamma.setflags(write=False)
        matrix = np.asarray(self.matrix, dtype=float).copy()
        matrix.setflags(write=False)
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "matrix", matrix)


def build_family(form: BiquadraticForm) -> GramFamily:
    """Family for a form: base is the (mn x mn) reshape of the coefficient
    tensor, directions enumerated lexicographically over i < k, j < l."""
    m, n = form.m, form.n
    base = linalg.as_sym_matrix(form.coeffs.reshape(m * n, m * n))
    quads = tuple(
        (i, k, j, l)
        for i in range(m)
        for k in range(i + 1, m)
        for j in range(n)
        for l in range(j + 1, n)
    )
    return GramFamily(m, n, base, quads)


def gram_at(family: GramFamily, gamma) -> GramPoint:
    gamma = np.asarray(gamma, dtype=float)
    return GramPoint(family, gamma, family.matrix_at(gamma))


def gamma_of(family: GramFamily, matrix) -> np.ndarray:
    """Coordinates of a symmetric representation of the same form.

    Raises InvalidInput when the matrix is not in the family.
    """
    matrix = linalg.as_sym_matrix(matrix)
    gamma = matrix[family._rows_plus, family._cols_plus] - family.base[family._rows_plus, family._cols_plus]
    rebuilt = family.matrix_at(gamma)
    scale = max(1.0, float(np.abs(matrix).max()))
    if not np.allclose(rebuilt, matrix, rtol=0.0, atol=1e-9 * scale):
        raise InvalidInput("matrix does not represent the family's form")
    return gamma


def factor_gram(point: GramPoint, tol: Tolerances = DEFAULT_TOL) -> SOSDecomposition:
    """PSD-factor the Gram matrix and reshape the vectors into m x n factors."""
    family = point.family
    vectors = linalg.psd_factor(point.matrix, tol)
    factors = tuple(w.reshape(family.m, family.n) for w in vectors)
    return SOSDecomposition(family.m, family.n, factors)


def _eigvals(matrix: np.ndarray) -> np.ndarray:
    return np.linalg.eigvalsh(matrix)


def _boundary_target(w: np.ndarray, tol: Tolerances) -> float:
    return min(_BOUNDARY_TOL, 0.5 * tol.eps_rank) * max(1.0, float(w[-1]))


def _hit_boundary(
    family: GramFamily,
    gamma0: np.ndarray,
    coeffs: np.ndarray,
    tol: Tolerances,
    kernel: int = 0,
    cap: float = _BRACKET_CAP,
    max_bisect: int = 200,
) -> float | None:
    """Largest safe step along gamma0 + t * coeffs, t >= 0.

    Tracks the (kernel+1)-th smallest eigenvalue f(t); assumes f(0) > 0.
    Doubles t until f goes negative (bounded by ``cap``), then bisects until
    the PSD-side value drops below the boundary target, so the returned point
    is PSD with one more eigenvalue inside the rank cutoff.  Returns None if
    no sign change is found before the cap.
    """
    m0 = family.matrix_at(gamma0)
    delta = family.combine(coeffs)

    def spectrum(t: float) -> np.ndarray:
        return _eigvals(m0 + t * delta)

    lo, hi = 0.0, None
    t = 1.0
    while t <= cap:
        if spectrum(t)[kernel] < 0.0:
            hi = t
            break
        lo = t
        t *= 2.0
    if hi is None:
        return None
    w_lo = spectrum(lo)
    for _ in range(max_bisect):
        # Accept tiny negatives too: an exact-zero crossing computes as +-eps.
        if abs(w_lo[kernel]) <= _boundary_target(w_lo, tol):
            return lo
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        w_mid = spectrum(mid)
        if w_mid[kernel] >= 0.0:
            lo, w_lo = mid, w_mid
        else:
            hi = mid
    if abs(w_lo[kernel]) <= _boundary_target(w_lo, tol):
        return lo
    return None


def reduce_to_boundary(
    family: GramFamily,
    point: GramPoint,
    seed: int = 0,
    tol: Tolerances = DEFAULT_TOL,
    retries: int = 3,
) -> GramPoint:
    """Walk from a PSD point to the PSD-cone boundary: rank <= mn - 1.

    Rank-deficient input is returned unchanged.  Directions are seeded random
    combinations of the family basis, tried in both signs; a direction whose
    line stays definite past the bracketing cap is abandoned and redrawn
    (up to ``retries`` draws).
    """
    ok, witness = linalg.is_psd(point.matrix, tol)
    if not ok:
        raise NotPSD("starting Gram point is not PSD", witness=witness)
    mn = family.m * family.n
    if linalg.numerical_rank(point.matrix, tol) <= mn - 1:
        return point
    if family.dim == 0:
        raise CannotReduce("family has no free directions; need m >= 2 and n >= 2")
    rng = np.random.default_rng(seed)
    for _ in range(max(1, retries)):
        coeffs = rng.standard_normal(family.dim)
        norm = np.linalg.norm(coeffs)
        if norm < 1e-12:
            continue
        coeffs /= norm
        for sign in (1.0, -1.0):
            t = _hit_boundary(family, point.gamma, sign * coeffs, tol)
            if t is None:
                continue
            candidate = gram_at(family, point.gamma + t * sign * coeffs)
            ok, _ = linalg.is_psd(candidate.matrix, tol)
            if ok and linalg.numerical_rank(candidate.matrix, tol) <= mn - 1:
                return candidate
    raise CannotReduce("no boundary hit found within the retry budget")


def _find_psd_point(
    family: GramFamily, gamma0: np.ndarray, tol: Tolerances
) -> GramPoint | None:
    """gamma0 itself when PSD, else a Nelder-Mead climb of the smallest
    eigenvalue; None when the climb ends outside the cone."""

    def lam_min(g: np.ndarray) -> float:
        return float(_eigvals(family.matrix_at(g))[0])

    def feasible(g: np.ndarray) -> bool:
        w = _eigvals(family.matrix_at(g))
        return w[0] >= -tol.eps_psd * max(1.0, abs(float(w[-1])))

    if feasible(gamma0):
        return gram_at(family, gamma0)
    if family.dim == 0:
        return None

    def objective(g: np.ndarray) -> float:
        return -lam_min(g)

    def stop_when_inside(g: np.ndarray) -> None:
        if lam_min(g) > 0.0:
            raise StopIteration

    result = minimize(
        objective,
        gamma0,
        method="Nelder-Mead",
        callback=stop_when_inside,
        options={"maxiter": 60 * (family.dim + 1), "xatol": 1e-12, "fatol": 1e-12},
    )
    if feasible(result.x):
        return gram_at(family, result.x)
    return None


def _face_step(
    family: GramFamily, point: GramPoint, rng: np.random.Generator, tol: Tolerances
) -> GramPoint | None:
    """One rank-reducing move inside the face of the PSD cone.

    Looks for a direction that annihilates the current kernel (so the walk
    stays PSD) and pushes the smallest active eigenvalue to zero.  Returns
    the lower-rank point, or None when the kernel pins every direction.
    """
    if family.dim == 0:
        return None
    w, u = np.linalg.eigh(point.matrix)
    cutoff = tol.eps_rank * max(1.0, float(w[-1]))
    k0 = int(np.count_nonzero(np.abs(w) <= cutoff))
    mn = family.m * family.n
    rank = mn - k0
    if rank <= 0 or k0 == 0:
        return None
    kernel = u[:, :k0]

    constraints = np.empty((mn * k0, family.dim))
    for t in range(family.dim):
        col = np.zeros((mn, k0))
        col[family._rows_plus[t]] += kernel[family._cols_plus[t]]
        col[family._cols_plus[t]] += kernel[family._rows_plus[t]]
        col[family._rows_minus[t]] -= kernel[family._cols_minus[t]]
        col[family._cols_minus[t]] -= kernel[family._rows_minus[t]]
        constraints[:, t] = col.ravel()
    _, sigma, vt = np.linalg.svd(constraints, full_matrices=True)
    top = sigma[0] if sigma.size else 0.0
    null_rank = int(np.count_nonzero(sigma > max(top, 1.0) * 1e-10))
    null_basis = vt[null_rank:]
    if null_basis.shape[0] == 0:
        return None

    mix = rng.standard_normal(null_basis.shape[0])
    coeffs = null_basis.T @ mix
    norm = np.linalg.norm(coeffs)
    if norm < 1e-12:
        coeffs = null_basis[0]
        norm = np.linalg.norm(coeffs)
    coeffs /= norm

    for sign in (1.0, -1.0):
        t_star = _hit_boundary(family, point.gamma, sign * coeffs, tol, kernel=k0, cap=1e6)
        if t_star is None:
            continue
        candidate = gram_at(family, point.gamma + t_star * sign * coeffs)
        ok, _ = linalg.is_psd(candidate.matrix, tol)
        if ok and linalg.numerical_rank(candidate.matrix, tol) < rank:
            return candidate
    return None


def _collapse(
    family: GramFamily, point: GramPoint, rng: np.random.Generator, tol: Tolerances
) -> GramPoint:
    mn = family.m * family.n
    if family.dim > 0 and linalg.numerical_rank(point.matrix, tol) == mn:
        for _ in range(3):
            coeffs = rng.standard_normal(family.dim)
            norm = np.linalg.norm(coeffs)
            if norm < 1e-12:
                continue
            coeffs /= norm
            moved = None
            for sign in (1.0, -1.0):
                t = _hit_boundary(family, point.gamma, sign * coeffs, tol)
                if t is None:
                    continue
                candidate = gram_at(family, point.gamma + t * sign * coeffs)
                ok, _ = linalg.is_psd(candidate.matrix, tol)
                if ok and linalg.numerical_rank(candidate.matrix, tol) < mn:
                    moved = candidate
                    break
            if moved is not None:
                point = moved
                break
    while True:
        step = _face_step(family, point, rng, tol)
        if step is None:
            return point
        point = step


def _surrogate_start(
    family: GramFamily, gamma: np.ndarray, target_rank: int, tol: Tolerances
) -> np.ndarray | None:
    """Nelder-Mead descent of a smoothed rank surrogate: the summed magnitude
    of the mn - target_rank smallest eigenvalues, with negative eigenvalues
    penalized.  Returns the suggested gamma (a restart point, not yet PSD or
    rank-certified)."""
    if family.dim == 0 or target_rank < 0:
        return None
    mn = family.m * family.n
    k_zero = mn - target_rank

    def objective(g: np.ndarray) -> float:
        w = _eigvals(family.matrix_at(g))
        small = float(np.sort(np.abs(w))[:k_zero].sum())
        negative = float(-np.minimum(w, 0.0).sum())
        return small + 50.0 * negative

    result = minimize(
        objective,
        gamma,
        method="Nelder-Mead",
        options={"maxiter": 120 * (family.dim + 1), "xatol": 1e-12, "fatol": 1e-14},
    )
    return np.asarray(result.x, dtype=float)


def min_rank_search(
    family: GramFamily,
    restarts: int = 20,
    seed: int = 0,
    tol: Tolerances = DEFAULT_TOL,
) -> tuple[GramPoint, int]:
    """Seeded heuristic minimization of rank over the PSD slice of the family.

    Each restart finds a PSD point (the base first, seeded random gammas
    after), collapses it with boundary and face steps, then alternates
    smoothed-rank descent with further collapsing while the rank improves.
    The returned rank is an upper bound on the SOS rank, never a claim of
    exactness.  Results merge deterministically by (rank, lexicographic
    gamma).

    Raises:
        NoPSDPointFound: no restart located a PSD member; the form may still
            be PSD (or even SOS) - this outcome is inconclusive.
    """
    best_key: tuple | None = None
    best_point: GramPoint | None = None
    found = False
    for ridx in range(max(1, restarts)):
        rng = np.random.default_rng([seed, ridx])
        if ridx == 0:
            gamma0 = np.zeros(family.dim)
        else:
            spread = (0.5, 1.0, 2.0)[ridx % 3]
            gamma0 = rng.standard_normal(family.dim) * spread
        point = _find_psd_point(family, gamma0, tol)
        if point is None:
            continue
        found = True
        point = _collapse(family, point, rng, tol)
        while True:
            rank = linalg.numerical_rank(point.matrix, tol)
            if rank == 0:
                break
            suggestion = _surrogate_start(family, point.gamma, rank - 1, tol)
            if suggestion is None:
                break
            candidate = _find_psd_point(family, suggestion, tol)
            if candidate is None:
                break
            candidate = _collapse(family, candidate, rng, tol)
            if linalg.numerical_rank(candidate.matrix, tol) < rank:
                point = candidate
            else:
                break
        rank = linalg.numerical_rank(point.matrix, tol)
        key = (rank, tuple(point.gamma.tolist()))
        if best_key is None or key < best_key:
            best_key, best_point = key, point
    if not found:
        raise NoPSDPointFound("no PSD representation found; result inconclusive")
    return best_point, best_key[0]
