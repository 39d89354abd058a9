"""Iterative basis selection: alternate synthesis with pole/zero clustering.

Each round synthesizes a controller, extracts the frozen controller pole and
zero locations across the operating points, clusters them (fuzzy c-means
stand-in), rebuilds conjugate-closed bases from the cluster centers and
re-synthesizes.  The best iterate is kept, so the achieved performance never
increases; iteration stops on the round limit or when the relative
improvement drops below one percent.
"""
from __future__ import annotations

from dataclasses import replace
from typing import NamedTuple

import numpy as np

from .exceptions import SynthesisInfeasibleError
from .obf import ObfBasis, cluster_poles
from .synthesis import (SynthesisProblem, SynthesisResult, bisect_gamma,
                        factor_rationals)

IMPROVEMENT_STOP = 0.01
DISK_CLIP = 0.98


class BasisPair(NamedTuple):
    n: ObfBasis
    d: ObfBasis


def controller_root_samples(result: SynthesisResult, points) -> tuple:
    """Frozen controller pole and zero locations over the operating points.

    Poles are the roots of the D_K numerator polynomial, zeros those of the
    N_K numerator (the factor denominators are the current basis poles and
    would only anchor the clustering to itself).
    """
    poles = []
    zeros = []
    for p in points:
        nk, dk = factor_rationals(result.theta, float(p))
        zeros.extend(np.roots(nk.num) if nk.num.size > 1 else [])
        poles.extend(np.roots(dk.num) if dk.num.size > 1 else [])
    return np.asarray(poles, dtype=complex), np.asarray(zeros, dtype=complex)


def project_into_disk(samples: np.ndarray, clip: float = DISK_CLIP) -> np.ndarray:
    """Reflect unstable samples into the disk and clip radii away from 1."""
    samples = np.asarray(samples, dtype=complex)
    samples = samples[np.isfinite(samples)]
    out = samples.copy()
    outside = np.abs(out) > 1.0
    out[outside] = 1.0 / np.conj(out[outside])
    big = np.abs(out) > clip
    out[big] = out[big] * (clip / np.abs(out[big]))
    return out


def centers_to_basis(centers: np.ndarray, n_slots: int,
                     imag_tol: float = 1e-7) -> ObfBasis:
    """Fill ``n_slots`` basis poles from cluster centers, conjugate-closed.

    Complex centers consume two slots as a conjugate pair; when only one slot
    remains, the center's real part is used.  Centers repeat cyclically if
    they do not fill the order.
    """
    poles = []
    idx = 0
    centers = np.asarray(centers, dtype=complex)
    while len(poles) < n_slots and centers.size:
        ctr = centers[idx % centers.size]
        idx += 1
        if abs(ctr.imag) < imag_tol:
            poles.append(complex(ctr.real))
        elif n_slots - len(poles) >= 2:
            poles.extend([ctr, np.conj(ctr)])
        else:
            poles.append(complex(ctr.real))
    return ObfBasis(np.asarray(poles, dtype=complex))


def basis_selection_iterate(problem: SynthesisProblem,
                            max_rounds: int) -> tuple:
    """Alternate synthesis and basis refinement; returns (BasisPair, result)."""
    result = bisect_gamma(problem)
    best = (BasisPair(problem.basis_n, problem.basis_d), result)
    previous = result.gamma
    points = problem.scheduling_grid.points
    for _ in range(max_rounds):
        pole_samples, zero_samples = controller_root_samples(best[1], points)
        basis_d = best[0].d
        basis_n = best[0].n
        if pole_samples.size:
            proj = project_into_disk(pole_samples)
            centers = cluster_poles(proj, min(problem.basis_d.n, proj.size))
            basis_d = centers_to_basis(centers, problem.basis_d.n)
        if zero_samples.size:
            proj = project_into_disk(zero_samples)
            centers = cluster_poles(proj, min(problem.basis_n.n, proj.size))
            basis_n = centers_to_basis(centers, problem.basis_n.n)
        candidate = replace(problem, basis_n=basis_n, basis_d=basis_d)
        try:
            result = bisect_gamma(candidate)
        except SynthesisInfeasibleError:
            break
        if result.gamma < best[1].gamma:
            best = (BasisPair(basis_n, basis_d), result)
        if abs(previous - result.gamma) < IMPROVEMENT_STOP * previous:
            break
        previous = result.gamma
    return best
