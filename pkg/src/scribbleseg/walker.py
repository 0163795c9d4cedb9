"""Seeded random-walker propagation of scribbles to dense per-slice labels.

Each annotated plane is treated as a 4-connected graph whose edge weights
decay with squared intensity contrast, ``w = exp(-beta * (g_i - g_j)^2) +
weight_floor``. Scribbled pixels are Dirichlet boundary nodes fixed to label
indicators; the remaining potentials solve the combinatorial Laplace equation
per label, so every pixel ends up with the label whose seeds a random walk
from that pixel reaches first. Propagation is strictly 2D per plane: the
annotation pattern labels every 10th slice, so planes are independent work
units (pure functions of slice + scribbles + config, safe to fan out).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .volumes import (
    UNLABELED,
    VALID_LABELS,
    GrayVolume,
    LabelVolume,
    ScribbleSet,
    extract_slice,
)

N_CLASSES = 4


class SolverConvergenceError(RuntimeError):
    """Conjugate gradient failed to reach the residual tolerance within max_iters."""


@dataclass(frozen=True)
class RandomWalkerConfig:
    """Tuning knobs for the per-slice Dirichlet solve.

    beta is the contrast parameter on [0,1]-normalized intensities (130 is the
    conventional default for this family of algorithms); weight_floor keeps
    the graph connected so every pixel receives a well-defined potential;
    max_iters=None means 10 * n_pixels of the slice being solved.
    """

    beta: float = 130.0
    weight_floor: float = 1e-6
    solver_tol: float = 1e-6
    max_iters: int | None = None

    def __post_init__(self):
        if self.beta < 0:
            raise ValueError("beta must be nonnegative")
        if not 0 < self.weight_floor <= 1:
            raise ValueError("weight_floor must be in (0, 1]")
        if not 0 < self.solver_tol < 1:
            raise ValueError("solver_tol must be in (0, 1)")
        if self.max_iters is not None and self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")

    def iteration_cap(self, n_pixels: int) -> int:
        return self.max_iters if self.max_iters is not None else 10 * n_pixels


@dataclass(frozen=True)
class ProbabilityMap:
    """Per-pixel K=4 random-walker potentials for one slice.

    Potentials lie on the probability simplex (sums within 1e-5 of 1) and are
    exact one-hot indicators at seeded pixels. cg_iterations records the
    conjugate-gradient iteration count per solved label channel.
    """

    potentials: np.ndarray  # (4, ny, nx) float64
    cg_iterations: tuple[int, ...] = ()

    def __post_init__(self):
        pot = self.potentials
        if pot.ndim != 3 or pot.shape[0] != N_CLASSES:
            raise ValueError("potentials must have shape (4, ny, nx)")
        if pot.min() < 0.0 or pot.max() > 1.0 + 1e-7:
            raise ValueError("potentials must lie in [0, 1]")
        sums = pot.sum(axis=0)
        if np.abs(sums - 1.0).max() > 1e-5:
            raise ValueError("per-pixel potentials must sum to 1 within 1e-5")

    def argmax_labels(self) -> np.ndarray:
        """Per-pixel argmax label; exact ties go to the lowest label index."""
        return self.potentials.argmax(axis=0).astype(np.uint8)


def edge_weights(gray_slice: np.ndarray, cfg: RandomWalkerConfig):
    """4-neighbor edges of one normalized slice with contrast-decayed weights.

    Returns ``(edges, weights)`` where edges is (2, n_edges) int64 of flat
    pixel indices (row-major) and weights is (n_edges,) float64 with
    ``w = exp(-beta * diff^2) + weight_floor``, hence w in (floor, 1 + floor].
    """
    img = np.asarray(gray_slice, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError("expected a 2D slice")
    if img.min() < 0.0 or img.max() > 1.0:
        raise ValueError("slice must be normalized to [0, 1] before building edge weights")
    ny, nx = img.shape
    idx = np.arange(ny * nx, dtype=np.int64).reshape(ny, nx)

    horiz = np.stack([idx[:, :-1].ravel(), idx[:, 1:].ravel()])
    vert = np.stack([idx[:-1, :].ravel(), idx[1:, :].ravel()])
    edges = np.concatenate([horiz, vert], axis=1)

    dh = (img[:, :-1] - img[:, 1:]).ravel()
    dv = (img[:-1, :] - img[1:, :]).ravel()
    diffs = np.concatenate([dh, dv])
    weights = np.exp(-cfg.beta * diffs * diffs) + cfg.weight_floor
    return edges, weights


def assemble_laplacian(edges: np.ndarray, weights: np.ndarray, n_pixels: int):
    """Combinatorial graph Laplacian (CSR): degree sums on the diagonal,
    negated weights off-diagonal. Symmetric, rows sum to zero."""
    edges = np.asarray(edges, dtype=np.int64)
    weights = np.asarray(weights, dtype=np.float64)
    if edges.ndim != 2 or edges.shape[0] != 2 or edges.shape[1] != weights.shape[0]:
        raise ValueError("edges must be (2, n_edges) with one weight per edge")
    if edges.size:
        if edges.min() < 0 or edges.max() >= n_pixels:
            raise ValueError("edge endpoints outside pixel range")
        if (edges[0] == edges[1]).any():
            raise ValueError("self-loop edge")
        lo = np.minimum(edges[0], edges[1])
        hi = np.maximum(edges[0], edges[1])
        keys = lo * np.int64(n_pixels) + hi
        if len(np.unique(keys)) != len(keys):
            raise ValueError("duplicate edge for the same pixel pair")

    a, b = edges
    rows = np.concatenate([a, b])
    cols = np.concatenate([b, a])
    vals = np.concatenate([-weights, -weights])
    lap = sparse.coo_matrix((vals, (rows, cols)), shape=(n_pixels, n_pixels))
    degree = np.zeros(n_pixels, dtype=np.float64)
    np.add.at(degree, a, weights)
    np.add.at(degree, b, weights)
    lap = (lap + sparse.diags(degree)).tocsr()
    return lap


# the reduced Laplacian can be near-singular when the weight floor isolates a
# pixel cluster, and there a residual at solver_tol bounds nothing about the
# solution error; the preconditioned residual is therefore additionally driven
# to the float64 floor, which is cheap at slice scale (hundreds of iterations)
_PRECONDITIONED_FLOOR = 1e-12


def jacobi_pcg(matrix, rhs: np.ndarray, tol: float, max_iters: int):
    """Conjugate gradient with diagonal (Jacobi) preconditioning for SPD systems.

    Converged when (a) the relative l2 residual is <= tol, (b) the pointwise
    diagonal-scaled residual max|r_i|/d_i is <= tol (this bounds every pixel's
    harmonic defect, its deviation from the weighted neighbor average), and
    (c) the preconditioned residual norm has dropped to the float64 floor
    relative to its start. Returns (solution, iterations).
    """
    b = np.asarray(rhs, dtype=np.float64)
    n = b.shape[0]
    diag = matrix.diagonal()
    if (diag <= 0).any():
        raise ValueError("system diagonal must be positive")
    inv_diag = 1.0 / diag

    b_norm = float(np.linalg.norm(b))
    x = np.zeros(n, dtype=np.float64)
    if b_norm == 0.0:
        return x, 0

    r = b.copy()
    z = inv_diag * r
    rz = float(r @ z)
    p = z.copy()
    floor = _PRECONDITIONED_FLOOR * np.sqrt(rz)

    def converged():
        return (
            np.sqrt(max(rz, 0.0)) <= floor
            and np.linalg.norm(r) <= tol * b_norm
            and np.abs(inv_diag * r).max() <= tol
        )

    if converged():
        return x, 0
    for iteration in range(1, max_iters + 1):
        ap = matrix @ p
        pap = float(p @ ap)
        if pap <= 0.0:
            raise SolverConvergenceError("search direction lost positive definiteness")
        alpha = rz / pap
        x += alpha * p
        r -= alpha * ap
        z = inv_diag * r
        rz_next = float(r @ z)
        beta = rz_next / rz
        rz = rz_next
        if converged():
            return x, iteration
        p = z + beta * p
    raise SolverConvergenceError(
        f"conjugate gradient did not reach tol={tol} within {max_iters} iterations"
    )


def solve_dirichlet(laplacian, seed_grid: np.ndarray, cfg: RandomWalkerConfig) -> ProbabilityMap:
    """Solve the seeded Dirichlet problem on one slice.

    seed_grid is (ny, nx) uint8 with 255 at unseeded pixels. Channels 1..3 are
    solved by Jacobi-preconditioned CG on the seed-reduced Laplacian (L_U x =
    -B m_s); the background channel is the simplex complement. Seeded pixels
    are fixed to exact indicators. If only one distinct seed label exists the
    solves are skipped and that label gets probability 1 everywhere.
    """
    seeds = np.asarray(seed_grid)
    if seeds.ndim != 2:
        raise ValueError("seed grid must be 2D")
    ny, nx = seeds.shape
    n_pixels = ny * nx
    if laplacian.shape != (n_pixels, n_pixels):
        raise ValueError("Laplacian size does not match the seed grid")
    flat = seeds.ravel()
    seeded = flat != UNLABELED
    if not seeded.any():
        raise ValueError("at least one seed is required")
    present = np.unique(flat[seeded])
    if not np.isin(present, VALID_LABELS).all():
        raise ValueError("seed labels must be in {0,1,2,3}")

    pot = np.zeros((N_CLASSES, n_pixels), dtype=np.float64)

    if len(present) == 1:
        pot[int(present[0])] = 1.0
        return ProbabilityMap(
            potentials=pot.reshape(N_CLASSES, ny, nx), cg_iterations=(0, 0, 0)
        )

    unseeded_idx = np.flatnonzero(~seeded)
    seeded_idx = np.flatnonzero(seeded)
    seed_labels = flat[seeded_idx]

    iterations = [0, 0, 0]
    if unseeded_idx.size:
        reduced = laplacian[unseeded_idx][:, unseeded_idx].tocsr()
        boundary = laplacian[unseeded_idx][:, seeded_idx].tocsr()
        cap = cfg.iteration_cap(n_pixels)
        interior = np.zeros((N_CLASSES, unseeded_idx.size), dtype=np.float64)
        for channel, label in enumerate(range(1, N_CLASSES)):
            indicator = (seed_labels == label).astype(np.float64)
            rhs = -boundary @ indicator
            solution, iterations[channel] = jacobi_pcg(reduced, rhs, cfg.solver_tol, cap)
            interior[label] = np.clip(solution, 0.0, 1.0)
        interior[0] = np.clip(1.0 - interior[1:].sum(axis=0), 0.0, 1.0)
        pot[:, unseeded_idx] = interior

    for label in VALID_LABELS:
        pot[label, seeded_idx] = (seed_labels == label).astype(np.float64)

    return ProbabilityMap(
        potentials=pot.reshape(N_CLASSES, ny, nx), cg_iterations=tuple(iterations)
    )


def slice_potentials(
    gray_slice: np.ndarray, seed_grid: np.ndarray, cfg: RandomWalkerConfig
) -> ProbabilityMap:
    """edge_weights -> assemble_laplacian -> solve_dirichlet for one slice."""
    img = np.asarray(gray_slice)
    edges, weights = edge_weights(img, cfg)
    lap = assemble_laplacian(edges, weights, img.size)
    return solve_dirichlet(lap, seed_grid, cfg)


def seed_grid_from_records(shape: tuple[int, int], plane_records: np.ndarray) -> np.ndarray:
    """Build a (ny, nx) uint8 seed grid (255 = unseeded) from (y, x, label) rows;
    rejects conflicting labels at one pixel."""
    grid = np.full(shape, UNLABELED, dtype=np.uint8)
    for y, x, label in np.asarray(plane_records, dtype=np.int64):
        if not (0 <= y < shape[0] and 0 <= x < shape[1]):
            raise ValueError(f"scribble at ({y}, {x}) outside slice bounds {shape}")
        current = grid[y, x]
        if current != UNLABELED and current != label:
            raise ValueError(f"conflicting scribbles at pixel ({y}, {x})")
        grid[y, x] = label
    return grid


def propagate_slice(
    gray_slice: np.ndarray,
    plane_records: np.ndarray,
    cfg: RandomWalkerConfig,
    return_potentials: bool = False,
):
    """Densely label one slice from its scribbles.

    Every pixel gets the argmax-potential label (ties to the lowest label
    index); scribbled pixels keep their scribble label exactly.
    """
    records = np.asarray(plane_records, dtype=np.int64)
    if records.size == 0:
        raise ValueError("propagate_slice requires at least one scribble on the plane")
    img = np.asarray(gray_slice)
    grid = seed_grid_from_records(img.shape, records)
    pmap = slice_potentials(img, grid, cfg)
    labels = pmap.argmax_labels()
    seeded = grid != UNLABELED
    labels[seeded] = grid[seeded]
    if return_potentials:
        return labels, pmap
    return labels


def propagate_annotated_slices(
    vol: GrayVolume, scribbles: ScribbleSet, cfg: RandomWalkerConfig
) -> LabelVolume:
    """Run propagate_slice on every annotated plane; all other planes stay 255."""
    scribbles.check_bounds(vol.meta.dims)
    out = np.full(vol.meta.dims, UNLABELED, dtype=np.uint8)
    if len(scribbles) == 0:
        warnings.warn("empty scribble set: every plane left unlabeled", stacklevel=2)
        return LabelVolume.from_array(out, spacing=vol.meta.spacing)
    for z in scribbles.planes():
        out[z] = propagate_slice(extract_slice(vol, z), scribbles.for_plane(z), cfg)
    return LabelVolume.from_array(out, spacing=vol.meta.spacing)
