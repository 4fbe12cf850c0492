"""Biquadratic forms: canonical tensor carrier, evaluation, serialization.

A biquadratic form P(x, y) = sum a_ijkl x_i y_j x_k y_l (x in R^m, y in R^n)
is stored through its unique partially symmetric coefficient tensor, i.e.
``a[i,j,k,l] == a[k,j,i,l] == a[k,l,i,j]``.  Files store polynomial monomial
coefficients instead (one entry per distinct monomial x_i x_k y_j y_l), which
is the convention people actually write forms in; conversion between the two
views lives here.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput

_SYM_ATOL = 1e-12


def _unit_rows(rng: np.random.Generator, count: int, dim: int) -> np.ndarray:
    """Rows drawn uniformly from the unit sphere in R^dim."""
    v = rng.standard_normal((count, dim))
    norms = np.linalg.norm(v, axis=1, keepdims=True)
    degenerate = norms[:, 0] < 1e-12
    if degenerate.any():
        v[degenerate] = 0.0
        v[degenerate, 0] = 1.0
        norms[degenerate] = 1.0
    return v / norms


@dataclass(frozen=True)
class BiquadraticForm:
    """Coefficient tensor of shape (m, n, m, n); ``coeffs[i, j, k, l]``
    multiplies the product x_i y_j x_k y_l."""

    m: int
    n: int
    coeffs: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.coeffs, dtype=float)
        if self.m < 1 or self.n < 1:
            raise InvalidInput("m and n must be positive")
        if a.shape != (self.m, self.n, self.m, self.n):
            raise InvalidInput(f"coefficient tensor has shape {a.shape}, expected {(self.m, self.n, self.m, self.n)}")
        scale = max(1.0, float(np.abs(a).max()))
        if not (
            np.allclose(a, a.transpose(2, 1, 0, 3), rtol=0.0, atol=_SYM_ATOL * scale)
            and np.allclose(a, a.transpose(2, 3, 0, 1), rtol=0.0, atol=_SYM_ATOL * scale)
        ):
            raise InvalidInput("tensor is not partially symmetric; use symmetrize() on raw coefficients")
        a = a.copy()
        a.setflags(write=False)
        object.__setattr__(self, "coeffs", a)

    def __eq__(self, other):
        if not isinstance(other, BiquadraticForm):
            return NotImplemented
        return self.m == other.m and self.n == other.n and np.array_equal(self.coeffs, other.coeffs)


@dataclass(frozen=True)
class MonomialTerm:
    """Polynomial coefficient of the monomial x_i x_k y_j y_l, 1-based,
    canonical order i <= k and j <= l."""

    i: int
    j: int
    k: int
    l: int
    c: float


@dataclass(frozen=True)
class SOSDecomposition:
    """Factors of a sum-of-squares representation sum_p (x' W_p y)^2."""

    m: int
    n: int
    factors: tuple[np.ndarray, ...]

    def __post_init__(self):
        factors = tuple(np.asarray(w, dtype=float) for w in self.factors)
        for w in factors:
            if w.shape != (self.m, self.n):
                raise InvalidInput(f"factor has shape {w.shape}, expected {(self.m, self.n)}")
        object.__setattr__(self, "factors", factors)

    def __len__(self):
        return len(self.factors)


def symmetrize(raw) -> BiquadraticForm:
    """Average a raw coefficient tensor over its symmetry orbit.

    The result defines the same polynomial and is the canonical carrier; an
    already-symmetric tensor passes through bit-identically.
    """
    a = np.asarray(raw, dtype=float)
    if a.ndim != 4 or a.shape[0] != a.shape[2] or a.shape[1] != a.shape[3]:
        raise InvalidInput(f"expected shape (m, n, m, n), got {a.shape}")
    # Pairing the sums keeps the result bitwise invariant under both swaps
    # (float addition is commutative), so symmetrize is an exact fixed point
    # on already-symmetric tensors.
    sym = a + a.transpose(2, 1, 0, 3)
    sym = (sym + sym.transpose(0, 3, 2, 1)) * 0.25
    return BiquadraticForm(a.shape[0], a.shape[1], sym)


def max_abs_coeff(form: BiquadraticForm) -> float:
    return float(np.abs(form.coeffs).max())


def evaluate(form: BiquadraticForm, x, y) -> float:
    """P(x, y).  Bihomogeneous: evaluate(s*x, t*y) == s^2 t^2 evaluate(x, y)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != (form.m,) or y.shape != (form.n,):
        raise InvalidInput(f"expected vectors of lengths {form.m} and {form.n}")
    return float(np.einsum("ijkl,i,j,k,l->", form.coeffs, x, y, x, y, optimize=True))


def evaluate_batch(form: BiquadraticForm, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """P at many points at once; xs is (s, m), ys is (s, n)."""
    if xs.shape[1] != form.m or ys.shape[1] != form.n or xs.shape[0] != ys.shape[0]:
        raise InvalidInput("batch shapes do not match the form")
    mn = form.m * form.n
    gram = form.coeffs.reshape(mn, mn)
    z = (xs[:, :, None] * ys[:, None, :]).reshape(xs.shape[0], mn)
    return np.einsum("si,si->s", z @ gram, z)


def evaluate_sos(dec: SOSDecomposition, x, y) -> float:
    """sum_p (x' W_p y)^2; zero for an empty factor list."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != (dec.m,) or y.shape != (dec.n,):
        raise InvalidInput(f"expected vectors of lengths {dec.m} and {dec.n}")
    if not dec.factors:
        return 0.0
    vals = np.array([float(x @ w @ y) for w in dec.factors])
    return float(np.sum(vals * vals))


def _evaluate_sos_batch(dec: SOSDecomposition, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    if not dec.factors:
        return np.zeros(xs.shape[0])
    stack = np.stack(dec.factors)
    t = np.einsum("pij,si,sj->sp", stack, xs, ys, optimize=True)
    return np.einsum("sp,sp->s", t, t)


def verify_sos(
    form: BiquadraticForm,
    dec: SOSDecomposition,
    samples: int = 1000,
    seed: int = 0,
) -> tuple[bool, float]:
    """Check the decomposition against the form at random sphere points.

    Passes when ``max |P - sum of squares| <= 1e-8 * (1 + max|coeff|)`` over
    ``samples`` pairs drawn on the unit spheres; deterministic given the seed.
    Returns (passed, max residual).
    """
    if (form.m, form.n) != (dec.m, dec.n):
        raise InvalidInput("form and decomposition dimensions differ")
    rng = np.random.default_rng(seed)
    xs = _unit_rows(rng, samples, form.m)
    ys = _unit_rows(rng, samples, form.n)
    resid = float(np.abs(evaluate_batch(form, xs, ys) - _evaluate_sos_batch(dec, xs, ys)).max())
    return resid <= 1e-8 * (1.0 + max_abs_coeff(form)), resid


def transpose_xy(form: BiquadraticForm) -> BiquadraticForm:
    """The n x m form P'(y, x) = P(x, y); applying it twice is the identity."""
    return BiquadraticForm(form.n, form.m, form.coeffs.transpose(1, 0, 3, 2))


# ---------------------------------------------------------------------------
# polynomial-coefficient view and JSON serialization
# ---------------------------------------------------------------------------

def to_terms(form: BiquadraticForm) -> list[MonomialTerm]:
    """Distinct monomials with their polynomial coefficients, sorted by
    (i, k, j, l); zero coefficients are omitted."""
    terms = []
    a = form.coeffs
    for i in range(form.m):
        for k in range(i, form.m):
            for j in range(form.n):
                for l in range(j, form.n):
                    orbit = (2 if i < k else 1) * (2 if j < l else 1)
                    c = orbit * a[i, j, k, l]
                    if c != 0.0:
                        terms.append(MonomialTerm(i + 1, j + 1, k + 1, l + 1, float(c)))
    return terms


def from_terms(m: int, n: int, terms) -> BiquadraticForm:
    """Build the canonical tensor from polynomial monomial coefficients.

    Indices are 1-based; non-canonical index order is accepted and
    canonicalized, duplicate monomials accumulate.
    """
    if m < 1 or n < 1:
        raise InvalidInput("m and n must be positive")
    a = np.zeros((m, n, m, n))
    for t in terms:
        i, j, k, l = t.i - 1, t.j - 1, t.k - 1, t.l - 1
        if not (0 <= i < m and 0 <= k < m and 0 <= j < n and 0 <= l < n):
            raise InvalidInput(f"term index out of range: {t}")
        i, k = min(i, k), max(i, k)
        j, l = min(j, l), max(j, l)
        orbit = (2 if i < k else 1) * (2 if j < l else 1)
        entry = t.c / orbit
        positions = {(i, j, k, l), (i, l, k, j), (k, j, i, l), (k, l, i, j)}
        for pos in positions:
            a[pos] += entry
    return BiquadraticForm(m, n, a)


def form_to_dict(form: BiquadraticForm) -> dict:
    return {
        "m": form.m,
        "n": form.n,
        "terms": [
            {"i": t.i, "k": t.k, "j": t.j, "l": t.l, "c": t.c} for t in to_terms(form)
        ],
    }


def form_from_dict(data: dict) -> BiquadraticForm:
    try:
        m = int(data["m"])
        n = int(data["n"])
        raw_terms = data["terms"]
    except (KeyError, TypeError) as exc:
        raise InvalidInput(f"malformed form record: {exc}") from exc
    terms = []
    for entry in raw_terms:
        try:
            terms.append(
                MonomialTerm(
                    int(entry["i"]), int(entry["j"]), int(entry["k"]), int(entry["l"]),
                    float(entry["c"]),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidInput(f"malformed term {entry!r}: {exc}") from exc
    return from_terms(m, n, terms)


def decomposition_to_dict(dec: SOSDecomposition) -> dict:
    return {
        "m": dec.m,
        "n": dec.n,
        "factors": [[float(v) for v in w.ravel()] for w in dec.factors],
    }


def decomposition_from_dict(data: dict) -> SOSDecomposition:
    try:
        m = int(data["m"])
        n = int(data["n"])
        flat = data["factors"]
    except (KeyError, TypeError) as exc:
        raise InvalidInput(f"malformed decomposition record: {exc}") from exc
    factors = []
    for row in flat:
        w = np.asarray(row, dtype=float)
        if w.size != m * n:
            raise InvalidInput(f"factor has {w.size} entries, expected {m * n}")
        factors.append(w.reshape(m, n))
    return SOSDecomposition(m, n, tuple(factors))


def dump_json(data: dict, path: str) -> None:
    """Write JSON atomically with a stable key order."""
    text = json.dumps(data, indent=2, sort_keys=True)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text + "\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_json(path: str) -> dict:
    with open(path) as handle:
        return json.load(handle)


def save_form(form: BiquadraticForm, path: str) -> None:
    dump_json(form_to_dict(form), path)


def load_form(path: str) -> BiquadraticForm:
    return form_from_dict(load_json(path))


def save_decomposition(dec: SOSDecomposition, path: str) -> None:
    dump_json(decomposition_to_dict(dec), path)


def load_decomposition(path: str) -> SOSDecomposition:
    return decomposition_from_dict(load_json(path))
