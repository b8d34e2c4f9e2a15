"""Generalized symmetric eigenproblem A x = lambda M x, heat semigroup
application, counting function, and the Weyl-law fit."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla

from .errors import (
    InsufficientData,
    InvalidArgument,
    RangeExceeded,
    SolverNoConvergence,
    SolverSingular,
)
from .fem import DiscreteLaplacian

DENSE_CUTOFF = 2000
CLUSTER_REL_GAP = 1e-6


@dataclass(frozen=True)
class Spectrum:
    """Ascending eigenvalues with M-orthonormal eigenvectors."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray = field(repr=False)
    residuals: np.ndarray
    n_converged: int
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        lam = np.asarray(self.eigenvalues, dtype=float)
        if np.any(np.diff(lam) < -1e-12 * (1.0 + np.abs(lam[:-1]))):
            raise InvalidArgument("eigenvalues must be ascending")
        object.__setattr__(self, "eigenvalues", lam)

    def __len__(self):
        return len(self.eigenvalues)

    def clusters(self, rel_gap: float = CLUSTER_REL_GAP) -> list:
        """Indices grouped by relative gaps below ``rel_gap``."""
        groups = [[0]]
        lam = self.eigenvalues
        for i in range(1, len(lam)):
            scale = max(abs(lam[i]), abs(lam[i - 1]), 1.0)
            if (lam[i] - lam[i - 1]) <= rel_gap * scale:
                groups[-1].append(i)
            else:
                groups.append([i])
        return groups

    def cluster_means(self, rel_gap: float = CLUSTER_REL_GAP) -> np.ndarray:
        return np.array([np.mean(self.eigenvalues[g]) for g in self.clusters(rel_gap)])

    def save_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["k", "lambda", "residual"])
            for k, (lam, r) in enumerate(zip(self.eigenvalues, self.residuals), 1):
                w.writerow([k, repr(float(lam)), repr(float(r))])

    @classmethod
    def load_csv(cls, path) -> "Spectrum":
        lams, res = [], []
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                lams.append(float(row["lambda"]))
                res.append(float(row.get("residual", 0.0)))
        lam = np.array(lams)
        return cls(lam, np.zeros((0, len(lam))), np.array(res), len(lam))


def _m_norm(mass, x):
    return float(np.sqrt(abs(x @ (mass @ x))))


def _shift(L: DiscreteLaplacian) -> float:
    a = L.stiffness
    if L.kind == "dirichlet" or (L.kind == "robin" and a.diagonal().min() >= 0):
        return -1e-6 * spla.norm(a, 1) / a.shape[0]
    # kinds with a zero (or near-zero) bottom eigenvalue need a shift on the
    # scale of the spectral gap; the trace ratio estimates that scale
    scale = a.diagonal().sum() / max(L.mass.diagonal().sum(), 1e-300)
    return -1e-3 * scale


def solve_eigs(L: DiscreteLaplacian, k: int, tol: float = 1e-10, seed: int = 0) -> Spectrum:
    """k smallest eigenpairs of A x = lambda M x.

    Dense solve below DENSE_CUTOFF dofs, else shift-invert Lanczos with a
    seeded start vector.  Residuals and M-orthonormality are checked on every
    solve.
    """
    n = L.n_dof
    if not (1 <= k <= n):
        raise InvalidArgument(f"k={k} out of range for {n} dofs")
    if tol <= 0:
        raise InvalidArgument("tol must be positive")
    a, m = L.stiffness, L.mass
    if n <= DENSE_CUTOFF:
        try:
            lam, vec = sla.eigh(a.toarray(), m.toarray())
        except np.linalg.LinAlgError as exc:
            raise SolverSingular(str(exc)) from exc
        lam, vec = lam[:k], vec[:, :k]
        meta = {"method": "dense", "seed": seed}
    else:
        rng = np.random.default_rng(seed)
        v0 = rng.standard_normal(n)
        sigma = _shift(L)
        try:
            lam, vec = spla.eigsh(a, k=k, M=m, sigma=sigma, which="LM", v0=v0, tol=tol)
        except spla.ArpackNoConvergence as exc:
            part = None
            if exc.eigenvalues is not None and len(exc.eigenvalues):
                order = np.argsort(exc.eigenvalues)
                part = Spectrum(
                    exc.eigenvalues[order],
                    exc.eigenvectors[:, order],
                    np.full(len(order), np.nan),
                    len(order),
                    {"method": "shift-invert", "seed": seed},
                )
            raise SolverNoConvergence(str(exc), partial=part) from exc
        except RuntimeError as exc:
            raise SolverSingular(str(exc)) from exc
        order = np.argsort(lam)
        lam, vec = lam[order], vec[:, order]
        meta = {"method": "shift-invert", "sigma": sigma, "seed": seed}

    # M-orthonormalize (cheap re-polish keeps clustered pairs clean)
    gram = vec.T @ (m @ vec)
    chol = np.linalg.cholesky(gram)
    vec = vec @ np.linalg.inv(chol).T
    # fix signs deterministically: largest-magnitude entry positive
    for j in range(vec.shape[1]):
        i = np.argmax(np.abs(vec[:, j]))
        if vec[i, j] < 0:
            vec[:, j] = -vec[:, j]

    res = np.array(
        [
            np.linalg.norm(a @ vec[:, j] - lam[j] * (m @ vec[:, j]))
            / max(_m_norm(m, vec[:, j]), 1e-300)
            for j in range(vec.shape[1])
        ]
    )
    ortho = np.max(np.abs(vec.T @ (m @ vec) - np.eye(vec.shape[1])))
    if ortho > 1e-8:
        raise SolverNoConvergence(f"M-orthonormality defect {ortho:.2e}")
    return Spectrum(lam, vec, res, len(lam), meta)


def heat_apply(L: DiscreteLaplacian, t: float, v: np.ndarray, spectrum: Spectrum | None = None):
    """Apply the heat semigroup exp(-t M^-1 A) to a dof vector.

    Exact (full eigenbasis) below the dense cutoff; otherwise uses the given
    truncated spectrum and reports a remainder bound in the info dict.
    """
    if t < 0:
        raise InvalidArgument("time must be nonnegative")
    v = np.asarray(v, dtype=float)
    if v.shape != (L.n_dof,):
        raise InvalidArgument("vector length does not match dof count")
    a, m = L.stiffness, L.mass
    if spectrum is None:
        if L.n_dof > DENSE_CUTOFF:
            raise InvalidArgument("large problem needs a precomputed spectrum")
        lam, vec = sla.eigh(a.toarray(), m.toarray())
        coef = vec.T @ (m @ v)
        out = vec @ (np.exp(-t * lam) * coef)
        return out, {"remainder_bound": 0.0, "method": "dense"}
    vec = spectrum.eigenvectors
    lam = spectrum.eigenvalues
    coef = vec.T @ (m @ v)
    out = vec @ (np.exp(-t * lam) * coef)
    tail = v - vec @ coef
    bound = float(np.exp(-t * lam[-1]) * _m_norm(m, tail))
    return out, {"remainder_bound": bound, "method": "truncated"}


def counting_function(s: Spectrum, lam: float) -> int:
    """N(lambda): eigenvalues at or below ``lam``."""
    if len(s) == 0 or lam > s.eigenvalues[-1]:
        raise RangeExceeded("lambda above the converged spectral range")
    return int(np.searchsorted(s.eigenvalues, lam, side="right"))


_UNIT_BALL_VOLUME = {1: 2.0, 2: np.pi, 3: 4.0 * np.pi / 3.0}


def weyl_fit(s: Spectrum) -> dict:
    """Fit dimension and volume from the eigenvalue counting function.

    Least squares of log N(lambda) against (d/2) log lambda + const over the
    upper half of the converged range.
    """
    if len(s) < 50:
        raise InsufficientData("need at least 50 eigenvalues for a Weyl fit")
    lam = s.eigenvalues
    n = np.arange(1, len(lam) + 1, dtype=float)
    lo = len(lam) // 2
    x = np.log(lam[lo:])
    y = np.log(n[lo:])
    slope, _ = np.polyfit(x, y, 1)
    d_est = int(round(2.0 * slope))
    confidence_gap = abs(2.0 * slope - d_est)
    vol_est = np.nan
    if d_est in _UNIT_BALL_VOLUME:
        # with d fixed, fit the two leading counting-function terms
        # N(lambda) ~ a lambda^{d/2} + b lambda^{(d-1)/2} and invert the
        # bulk coefficient a = omega_d vol / (2 pi)^d
        lam_u, n_u = lam[lo:], n[lo:]
        basis = np.column_stack(
            [lam_u ** (0.5 * d_est), lam_u ** (0.5 * (d_est - 1))]
        )
        a = float(np.linalg.lstsq(basis, n_u, rcond=None)[0][0])
        vol_est = float(a * (2.0 * np.pi) ** d_est / _UNIT_BALL_VOLUME[d_est])
    return {
        "d_est": d_est,
        "vol_est": vol_est,
        "slope": float(slope),
        "confidence_gap": float(confidence_gap),
    }
