"""Orthonormal basis functions in z, scheduling bases, and pole clustering.

The transfer-function basis is generated by a stable pole sequence: each real
pole contributes a first-order inner section, each conjugate pair a
second-order one, and the basis functions are the state transfer functions of
the balanced all-pass cascade (Laguerre functions when one real pole repeats).
The constant function is always included as index 0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .frfdata import FrequencyGrid

POLE_MARGIN = 1e-9


def _group_sections(poles: np.ndarray):
    """Split a conjugate-closed pole list into 1st/2nd-order section poles."""
    remaining = list(poles)
    sections = []
    while remaining:
        xi = remaining.pop(0)
        if abs(xi.imag) < 1e-14:
            sections.append((xi.real,))
        else:
            conj = np.conj(xi)
            for i, other in enumerate(remaining):
                if abs(other - conj) < 1e-12:
                    remaining.pop(i)
                    break
            else:
                raise ValueError(f"complex pole {xi} lacks its conjugate")
            sections.append((xi, conj))
    return sections


def _section_matrices(section):
    """Balanced state-space of the inner (all-pass) function for one section."""
    if len(section) == 1:
        a = float(section[0])
        r = math.sqrt(1.0 - a * a)
        return (np.array([[a]]), np.array([r]), np.array([r]), -a)
    xi = section[0]
    c1 = -2.0 * xi.real
    c2 = abs(xi) ** 2
    # inner function (c2 z^2 + c1 z + 1)/(z^2 + c1 z + c2), balanced so the
    # controllability Gramian is the identity
    a = np.array([[-c1, -c2], [1.0, 0.0]])
    b = np.array([1.0, 0.0])
    c = np.array([c1 * (1.0 - c2), 1.0 - c2 * c2])
    d = c2
    w = scipy.linalg.solve_discrete_lyapunov(a, np.outer(b, b))
    t = np.linalg.cholesky(w)
    ti = np.linalg.inv(t)
    return (ti @ a @ t, ti @ b, c @ t, d)


@dataclass(frozen=True, eq=False)
class ObfBasis:
    """Pole-generated orthonormal function family {1, phi_1, ..., phi_n}."""

    poles: np.ndarray

    def __post_init__(self):
        poles = np.atleast_1d(np.asarray(self.poles, dtype=complex))
        if poles.size and np.max(np.abs(poles)) >= 1.0 - POLE_MARGIN:
            raise ValueError("basis poles must have modulus < 1 - 1e-9")
        object.__setattr__(self, "poles", poles)
        object.__setattr__(self, "_sections", _group_sections(poles))
        poles.flags.writeable = False

    @property
    def n(self) -> int:
        """Number of non-constant functions."""
        return self.poles.size

    @property
    def size(self) -> int:
        return self.n + 1


def laguerre_basis(a: float, n: int) -> ObfBasis:
    """Laguerre basis: one real pole ``a`` repeated ``n`` times."""
    if abs(a) >= 1.0:
        raise ValueError("Laguerre pole must satisfy |a| < 1")
    if n < 0:
        raise ValueError("order must be non-negative")
    return ObfBasis(np.full(n, float(a), dtype=complex))


def eval_basis_at(basis: ObfBasis, z: np.ndarray) -> np.ndarray:
    """(n+1, len(z)) matrix of basis values, row 0 identically one.

    Uses per-section analytic resolvents and the accumulated inner-function
    product, independent of the stacked bank realization.
    """
    z = np.asarray(z, dtype=complex).ravel()
    out = np.empty((basis.size, z.size), dtype=complex)
    out[0] = 1.0
    blaschke = np.ones_like(z)
    row = 1
    for section in basis._sections:
        if len(section) == 1:
            a = section[0].real if isinstance(section[0], complex) else section[0]
            r = math.sqrt(1.0 - a * a)
            out[row] = blaschke * r / (z - a)
            row += 1
            blaschke = blaschke * (1.0 - a * z) / (z - a)
        else:
            a_s, b_s, _, _ = _section_matrices(section)
            det = (z - a_s[0, 0]) * (z - a_s[1, 1]) - a_s[0, 1] * a_s[1, 0]
            v0 = ((z - a_s[1, 1]) * b_s[0] + a_s[0, 1] * b_s[1]) / det
            v1 = (a_s[1, 0] * b_s[0] + (z - a_s[0, 0]) * b_s[1]) / det
            out[row] = blaschke * v0
            out[row + 1] = blaschke * v1
            row += 2
            xi = section[0]
            c1, c2 = -2.0 * xi.real, abs(xi) ** 2
            blaschke = blaschke * (c2 * z * z + c1 * z + 1.0) / (z * z + c1 * z + c2)
    return out


def eval_basis(basis: ObfBasis, grid: FrequencyGrid) -> np.ndarray:
    """Basis values on the grid: row i holds phi_i(e^{i omega_k})."""
    return eval_basis_at(basis, grid.z)


@dataclass(frozen=True, eq=False)
class BasisBankRealization:
    """State-space of the stacked bank [phi_0 ... phi_n]^T.

    Outputs are the input itself (phi_0) followed by the states, so
    c = [0; I], d = [1; 0].
    """

    a: np.ndarray
    b: np.ndarray

    @property
    def state_dim(self) -> int:
        return self.a.shape[0]

    def response(self, z: np.ndarray) -> np.ndarray:
        """(n+1, len(z)) bank response by resolvent evaluation."""
        z = np.asarray(z, dtype=complex).ravel()
        out = np.empty((self.state_dim + 1, z.size), dtype=complex)
        out[0] = 1.0
        eye = np.eye(self.state_dim)
        for k, zk in enumerate(z):
            out[1:, k] = np.linalg.solve(zk * eye - self.a, self.b)
        return out


def realize_bank(basis: ObfBasis) -> BasisBankRealization:
    """Minimal cascade realization whose state transfer functions are the
    basis: inner sections in series, each balanced so states are orthonormal."""
    n = basis.n
    a = np.zeros((n, n))
    b = np.zeros(n)
    # running map u -> section input: x-feed row vector and direct gain
    feed = np.zeros(n)
    gain = 1.0
    row = 0
    for section in basis._sections:
        a_s, b_s, c_s, d_s = _section_matrices(section)
        k = a_s.shape[0]
        a[row:row + k, row:row + k] = a_s
        a[row:row + k, :row] = np.outer(b_s, feed[:row])
        b[row:row + k] = b_s * gain
        feed[:row] = d_s * feed[:row]
        feed[row:row + k] = c_s
        gain = d_s * gain
        row += k
    return BasisBankRealization(a, b)


def basis_rational(basis: ObfBasis):
    """Numerator polynomials of each phi_i over the common denominator.

    Returns (numerators, den): ``numerators[i]`` (descending powers, length
    n+1) for i = 0..n with numerators[0] = den, so phi_i = numerators[i]/den.
    """
    n = basis.n
    den = np.array([1.0])
    for xi in basis.poles:
        den = np.convolve(den, [1.0, -xi])
    den = den.real
    nums = [den.copy()]
    prefix = np.array([1.0])  # product of inner numerators before the section
    sections = basis._sections
    sec_dens = []
    sec_inner_nums = []
    for section in sections:
        if len(section) == 1:
            a = section[0].real if isinstance(section[0], complex) else section[0]
            sec_dens.append(np.array([1.0, -a]))
            sec_inner_nums.append(np.array([-a, 1.0]))
        else:
            xi = section[0]
            c1, c2 = -2.0 * xi.real, abs(xi) ** 2
            sec_dens.append(np.array([1.0, c1, c2]))
            sec_inner_nums.append(np.array([c2, c1, 1.0]))
    for s, section in enumerate(sections):
        tail = np.array([1.0])
        for later in sec_dens[s + 1:]:
            tail = np.convolve(tail, later)
        a_s, b_s, _, _ = _section_matrices(section)
        k = a_s.shape[0]
        if k == 1:
            rows = [np.array([b_s[0]])]
        else:
            # adj(zI - A) B rows: degree-1 polynomials
            rows = [
                np.array([b_s[0], -a_s[1, 1] * b_s[0] + a_s[0, 1] * b_s[1]]),
                np.array([b_s[1], a_s[1, 0] * b_s[0] - a_s[0, 0] * b_s[1]]),
            ]
        for r in rows:
            num = np.convolve(np.convolve(prefix, r), tail)
            padded = np.zeros(n + 1)
            padded[n + 1 - num.size:] = num.real
            nums.append(padded)
        prefix = np.convolve(prefix, sec_inner_nums[s])
    return nums, den


# ---------------------------------------------------------------------------
# scheduling bases
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SchedulingBasis:
    """Monomial functions of the rescaled operating point, psi_1 = 1.

    The operating point is affinely mapped onto [-1, 1] before evaluation so
    raw monomials stay well-conditioned for low degrees.
    """

    m: int
    p_range: tuple

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("scheduling basis needs at least the constant term")
        lo, hi = self.p_range
        if not lo < hi:
            raise ValueError("empty scheduling range")
        object.__setattr__(self, "p_range", (float(lo), float(hi)))

    @property
    def kind(self) -> str:
        return {1: "constant", 2: "affine"}.get(self.m, f"polynomial degree {self.m - 1}")

    @staticmethod
    def constant(p_range) -> "SchedulingBasis":
        return SchedulingBasis(1, tuple(p_range))

    @staticmethod
    def affine(p_range) -> "SchedulingBasis":
        return SchedulingBasis(2, tuple(p_range))

    @staticmethod
    def polynomial(degree: int, p_range) -> "SchedulingBasis":
        return SchedulingBasis(degree + 1, tuple(p_range))

    def rescale(self, p: float) -> float:
        lo, hi = self.p_range
        return (2.0 * p - (lo + hi)) / (hi - lo)


def scheduling_eval(basis: SchedulingBasis, p: float) -> np.ndarray:
    """[psi_1(p), ..., psi_m(p)] = [1, ptilde, ptilde^2, ...]."""
    lo, hi = basis.p_range
    if p < lo - 1e-12 or p > hi + 1e-12:
        raise ValueError(f"operating point {p} outside range [{lo}, {hi}]")
    pt = basis.rescale(p)
    out = np.ones(basis.m)
    for l in range(1, basis.m):
        out[l] = out[l - 1] * pt
    return out


# ---------------------------------------------------------------------------
# fuzzy c-means pole clustering
# ---------------------------------------------------------------------------

def cluster_poles(samples, c: int, fuzziness: float = 2.0,
                  tol: float = 1e-9, max_iter: int = 500) -> np.ndarray:
    """Fuzzy c-means cluster centers of complex pole locations.

    Deterministic farthest-point initialization; iterates the standard FCM
    update until the centers move less than ``tol`` or the iteration cap.
    Centers stay inside the unit disk because they are convex combinations of
    the samples.
    """
    samples = np.atleast_1d(np.asarray(samples, dtype=complex))
    if samples.size == 0:
        raise ValueError("no pole samples to cluster")
    if c < 1 or c > samples.size:
        raise ValueError("cluster count must be in [1, number of samples]")
    if fuzziness <= 1.0:
        raise ValueError("fuzziness must exceed 1")
    if np.max(np.abs(samples)) >= 1.0:
        raise ValueError("pole samples must lie inside the unit disk")

    pts = np.column_stack([samples.real, samples.imag])
    # farthest-point init seeded at the sample closest to the centroid
    centroid = pts.mean(axis=0)
    centers = [pts[np.argmin(np.sum((pts - centroid) ** 2, axis=1))]]
    while len(centers) < c:
        d2 = np.min([np.sum((pts - ctr) ** 2, axis=1) for ctr in centers], axis=0)
        centers.append(pts[np.argmax(d2)])
    centers = np.array(centers, dtype=float)

    for _ in range(max_iter):
        # clamping d^2 away from zero makes coincident points crisply owned
        d2 = np.maximum(
            ((pts[None, :, :] - centers[:, None, :]) ** 2).sum(axis=2), 1e-30)
        inv = np.power(d2, -1.0 / (fuzziness - 1.0))
        u = inv / inv.sum(axis=0, keepdims=True)
        w = u ** fuzziness
        new_centers = (w @ pts) / w.sum(axis=1, keepdims=True)
        shift = np.max(np.abs(new_centers - centers))
        centers = new_centers
        if shift < tol:
            break
    return centers[:, 0] + 1j * centers[:, 1]
