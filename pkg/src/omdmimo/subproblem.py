"""
Weighted log-det maximization over the trace-constrained PSD cone.

Both the two-user dual subproblem and its K-user generalization have the
form::

    maximize    sum_n w_n log|B_n + H S H^H|
    subject to  tr(S) <= P,  S >= 0

with weights on the simplex and positive-definite bases ``B_n``. The
objective is concave, so projected gradient ascent with a backtracking line
search reaches the global optimum. Values reported here drop the constants
``log|B_n|``, i.e. ``value(S) = sum_n w_n log|I + B_n^{-1} H S H^H|``.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, MaxIterExceeded, NonPositiveDefinite
from .linalg import as_matrix, hermitian

__all__ = [
    "LogDetObjective",
    "SubproblemResult",
    "project_psd_trace",
    "gradient",
    "objective_value",
    "solve",
]

ARMIJO = 1e-4
MAX_HALVINGS = 60


class LogDetObjective:
    """Weighted sum of log-dets sharing one optimization variable.

    Parameters
    ----------
    terms : sequence of (weight, base, H)
        ``weight`` >= 0, ``base`` a PD Hermitian matrix, ``H`` the map from
        the transmit space into the receive space of the base.
    power : float
        Trace budget ``P``.
    normalize : bool
        Require the weights to sum to one (within 1e-9).
    """

    def __init__(self, terms, power, normalize=True):
        if power < 0:
            raise ValueError("power must be non-negative")
        terms = [(float(w), as_matrix(B, "base"), as_matrix(H, "H")) for w, B, H in terms]
        if not terms:
            raise ValueError("objective needs at least one term")
        if any(w < 0 for w, _, _ in terms):
            raise ValueError("weights must be non-negative")
        if normalize and abs(sum(w for w, _, _ in terms) - 1.0) > 1e-9:
            raise ValueError("weights must sum to one")
        shapes = {(B.shape, H.shape) for _, B, H in terms}
        if len(shapes) != 1:
            raise DimensionMismatch("all terms must share base and map shapes")
        (bshape, hshape), = shapes
        if bshape[0] != bshape[1] or bshape[0] != hshape[0]:
            raise DimensionMismatch("base and map do not conform")
        self.power = float(power)
        self.dim = hshape[1]
        self.all_terms = terms
        # zero-weight terms do not influence the optimizer
        live = [t for t in terms if t[0] > 0.0] or terms[:1]
        self.weights = np.array([w for w, _, _ in live])
        self.bases = np.stack([hermitian(B) for _, B, _ in live])
        self.maps = np.stack([H for _, _, H in live])
        self.maps_h = self.maps.conj().transpose(0, 2, 1)
        self.base_logdet = _batched_logdet(self.bases)
        if len(live) == len(terms):
            self._all, self._all_logdet = (self.bases, self.maps, self.maps_h), self.base_logdet
        else:
            bases = np.stack([hermitian(B) for _, B, _ in terms])
            maps = np.stack([H for _, _, H in terms])
            self._all = (bases, maps, maps.conj().transpose(0, 2, 1))
            self._all_logdet = _batched_logdet(bases)

    def reweighted(self, weights):
        """Same bases and maps with new weights (one per term, in order)."""
        weights = np.asarray(weights, dtype=float)
        if weights.shape != (len(self.all_terms),):
            raise ValueError("one weight per term is required")
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-9:
            raise ValueError("weights must be non-negative and sum to one")
        new = object.__new__(LogDetObjective)
        new.power, new.dim = self.power, self.dim
        new.all_terms = [(float(w), B, H) for w, (_, B, H) in zip(weights, self.all_terms)]
        new.weights = weights
        new.bases, new.maps, new.maps_h = self._all
        new.base_logdet = self._all_logdet
        new._all, new._all_logdet = self._all, self._all_logdet
        return new

    def _received(self, S):
        # only the lower triangle is read by the Cholesky factorization
        return self.bases + self.maps @ S @ self.maps_h

    def value(self, S):
        return float(self.weights @ (_batched_logdet(self._received(S)) - self.base_logdet))

    def gradient(self, S):
        return self._gradient(self._received(S))

    def _gradient(self, A):
        inv = np.linalg.inv(A)
        G = np.einsum("n,nij->ij", self.weights, self.maps_h @ inv @ self.maps)
        return 0.5 * (G + G.conj().T)

    def value_and_gradient(self, S):
        A = self._received(S)
        value = float(self.weights @ (_batched_logdet(A) - self.base_logdet))
        return value, self._gradient(A)


def _batched_logdet(A):
    try:
        L = np.linalg.cholesky(A)
    except np.linalg.LinAlgError as exc:
        raise NonPositiveDefinite("log-det argument is not positive definite") from exc
    return 2.0 * np.sum(np.log(np.diagonal(L, axis1=-2, axis2=-1).real), axis=-1)


def _project_simplex_capped(w, P):
    """Euclidean projection of ``w`` onto ``{x >= 0, sum x <= P}``."""
    x = np.maximum(w, 0.0)
    if x.sum() <= P:
        return x
    # dimensions are tiny, a plain loop beats vectorized sort/cumsum
    css, tau = 0.0, 0.0
    for i, u in enumerate(sorted(x.tolist(), reverse=True)):
        css += u
        t = (css - P) / (i + 1)
        # the largest entry always stays in the support
        if i == 0 or u > t:
            tau = t
    return np.maximum(x - tau, 0.0)


def project_psd_trace(M, P):
    """Frobenius-nearest point of ``{S >= 0, tr(S) <= P}`` to Hermitian ``M``.

    Examples
    --------
    >>> np.round(project_psd_trace(np.diag([3.0, -1.0]), 2.0).real, 12)
    array([[2., 0.],
           [0., 0.]])
    """
    if P < 0:
        raise ValueError("power must be non-negative")
    return _project(hermitian(M), P)


def _project(M, P):
    # M must already be Hermitian
    w, Q = np.linalg.eigh(M)
    x = _project_simplex_capped(w, P)
    R = (Q * x) @ Q.conj().T
    return 0.5 * (R + R.conj().T)


def gradient(obj, S):
    """``sum_n w_n H^H (B_n + H S H^H)^{-1} H`` (Hermitian)."""
    return obj.gradient(np.asarray(S, dtype=complex))


def objective_value(obj, S):
    return obj.value(np.asarray(S, dtype=complex))


@dataclass
class SubproblemResult:
    S: np.ndarray
    value: float
    iterations: int
    residual: float
    converged: bool


def _residual(S, G, P):
    return float(np.linalg.norm(_project(S + G, P) - S))


def solve(obj, tol=1e-8, max_iter=5000, S0=None):
    """Maximize the objective by projected gradient ascent.

    The step starts from a Barzilai-Borwein estimate and is halved until the
    sufficient-increase condition holds. Iteration stops when the
    projected-gradient step ``||Proj(S + grad) - S||_F`` is at most ``tol``.

    Parameters
    ----------
    obj : LogDetObjective
    tol : float
    max_iter : int
    S0 : ndarray, optional
        Feasible starting point; ``(P / N) I`` by default.

    Returns
    -------
    SubproblemResult
        ``converged`` is False (and a :class:`MaxIterExceeded` warning is
        issued) when the iteration cap is hit; ``S`` is then the best iterate.
    """
    P, n = obj.power, obj.dim
    if P == 0.0:
        S = np.zeros((n, n), dtype=complex)
        return SubproblemResult(S, 0.0, 0, 0.0, True)
    if S0 is None:
        S = np.eye(n, dtype=complex) * (P / n)
    else:
        S = project_psd_trace(np.asarray(S0, dtype=complex), P)

    f, G = obj.value_and_gradient(S)
    step = 1.0 / max(np.linalg.norm(G), 1e-12)
    S_prev = G_prev = None
    residual = _residual(S, G, P)
    it = 0
    while residual > tol and it < max_iter:
        it += 1
        if S_prev is not None:
            s = S - S_prev
            y = G - G_prev
            sy = np.vdot(s, y).real
            if sy < 0.0:
                step = min(max(np.vdot(s, s).real / -sy, 1e-10), 1e10)
        t = step
        # slack absorbs rounding in f once the increase drops below ulp(f)
        slack = 8.0 * np.finfo(float).eps * (1.0 + abs(f))
        for _ in range(MAX_HALVINGS):
            S_new = _project(S + t * G, P)
            f_new = obj.value(S_new)
            if f_new >= f + ARMIJO * np.vdot(G, S_new - S).real - slack:
                break
            t *= 0.5
        else:
            # no ascent possible at working precision
            break
        S_prev, G_prev = S, G
        S, f = S_new, f_new
        G = obj.gradient(S)
        residual = _residual(S, G, P)

    converged = residual <= tol
    if not converged:
        warnings.warn(
            f"projected gradient stopped after {it} iterations "
            f"(residual {residual:.2e})",
            MaxIterExceeded,
            stacklevel=2,
        )
    return SubproblemResult(S, f, it, residual, converged)
