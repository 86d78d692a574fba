"""Finite-volume disk mesh with a matching boundary circle.

The disk of radius R is cut into ``nr`` uniform rings and ``ntheta`` uniform
angular sectors. Cell (k, j) covers [k*hr, (k+1)*hr] x [j*ht, (j+1)*ht] in
(r, theta) and carries the exact annular-sector area, so ring areas telescope
to pi*R^2. The boundary circle carries one node per sector, aligned with the
outermost ring of cells; node j sits at the angular center of cell (nr-1, j).

The cell-to-cell Laplacian is applied in factored form (signed face
differences, then face weights, then a signed divergence) so that constant
fields are annihilated exactly and interior face fluxes cancel pairwise.
There is no face at r = 0: cells of the innermost ring exchange only
angularly and with ring 2, which keeps the pole regular. The outer boundary
face carries no stencil entry either; boundary data enters through an
explicit flux-injection vector.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

__all__ = [
    "PolarMesh",
    "build_polar_mesh",
    "bulk_laplacian",
    "surface_laplacian",
    "boundary_trace",
    "boundary_flux_injection",
    "as_bulk_field",
    "as_surface_field",
]


class PolarMesh:
    """Annular-sector tessellation of a disk plus its boundary circle.

    Immutable after construction; all operators are pure functions of their
    inputs and safe to call concurrently. Reductions use numpy's fixed
    left-to-right summation order, so results are reproducible.
    """

    def __init__(self, radius: float, nr: int, ntheta: int):
        radius = float(radius)
        if not np.isfinite(radius) or radius <= 0.0:
            raise ValueError(f"mesh radius must be positive, got {radius}")
        if int(nr) != nr or nr < 2:
            raise ValueError(f"nr must be an integer >= 2, got {nr}")
        if int(ntheta) != ntheta or ntheta < 4 or ntheta % 2 != 0:
            raise ValueError(f"ntheta must be an even integer >= 4, got {ntheta}")
        nr, ntheta = int(nr), int(ntheta)

        self.radius = radius
        self.nr = nr
        self.ntheta = ntheta
        self.hr = radius / nr
        self.htheta = 2.0 * np.pi / ntheta

        k = np.arange(nr)
        j = np.arange(ntheta)
        r_in = k * self.hr
        r_out = (k + 1) * self.hr
        r_mid = (k + 0.5) * self.hr
        theta_mid = (j + 0.5) * self.htheta

        self.cell_r = np.repeat(r_mid, ntheta)
        self.cell_theta = np.tile(theta_mid, nr)
        # exact annular-sector area ((r_out^2 - r_in^2)/2) * htheta
        self.cell_areas = np.repeat(0.5 * (r_out**2 - r_in**2) * self.htheta, ntheta)

        self.boundary_theta = theta_mid.copy()
        self.boundary_arc_lengths = np.full(ntheta, 2.0 * np.pi * radius / ntheta)
        self.boundary_cell_index = (nr - 1) * ntheta + j

        self._grad, self._face_weights = self._build_gradient()
        self._bulk_stiffness = None
        self._surface_stiffness = None

    # ------------------------------------------------------------------
    # construction helpers

    def _build_gradient(self):
        """Signed face-difference matrix and face conductances.

        Face m stores (f[cell_b] - f[cell_a]); the conductance is
        face_length / center_distance. Radial faces sit between rings k and
        k+1 (no face at the pole, none at the outer rim); angular faces wrap
        periodically within each ring.
        """
        nr, nt = self.nr, self.ntheta
        rows, cols, vals, weights = [], [], [], []

        face = 0
        # radial faces between ring k and k+1
        for k in range(nr - 1):
            r_face = (k + 1) * self.hr
            w = (r_face * self.htheta) / self.hr
            for jj in range(nt):
                a = k * nt + jj
                b = (k + 1) * nt + jj
                rows += [face, face]
                cols += [b, a]
                vals += [1.0, -1.0]
                weights.append(w)
                face += 1
        # angular faces within ring k (periodic)
        for k in range(nr):
            r_mid = (k + 0.5) * self.hr
            w = self.hr / (r_mid * self.htheta)
            for jj in range(nt):
                a = k * nt + jj
                b = k * nt + (jj + 1) % nt
                rows += [face, face]
                cols += [b, a]
                vals += [1.0, -1.0]
                weights.append(w)
                face += 1

        grad = sp.csr_matrix(
            (vals, (rows, cols)), shape=(face, nr * nt), dtype=float
        )
        return grad, np.asarray(weights)

    # ------------------------------------------------------------------
    # basic properties

    @property
    def ncells(self) -> int:
        return self.nr * self.ntheta

    @property
    def cell_centers(self) -> np.ndarray:
        """(ncells, 2) array of (r, theta) cell centers."""
        return np.column_stack([self.cell_r, self.cell_theta])

    @property
    def area_total(self) -> float:
        return float(np.sum(self.cell_areas))

    @property
    def boundary_length_total(self) -> float:
        return float(np.sum(self.boundary_arc_lengths))

    # ------------------------------------------------------------------
    # solver-facing assembled matrices

    def bulk_stiffness(self) -> sp.csr_matrix:
        """Assembled grad^T diag(w) grad; equals -diag(areas) @ Laplacian."""
        if self._bulk_stiffness is None:
            gw = self._grad.multiply(self._face_weights[:, None])
            self._bulk_stiffness = (self._grad.T @ gw).tocsr()
        return self._bulk_stiffness

    def surface_stiffness(self) -> sp.csr_matrix:
        """Periodic chain stiffness on the boundary circle."""
        if self._surface_stiffness is None:
            nt = self.ntheta
            w = 1.0 / (self.radius * self.htheta)
            rows, cols, vals = [], [], []
            for jj in range(nt):
                a, b = jj, (jj + 1) % nt
                rows += [jj, jj]
                cols += [b, a]
                vals += [1.0, -1.0]
            d = sp.csr_matrix((vals, (rows, cols)), shape=(nt, nt), dtype=float)
            self._surface_stiffness = (d.T @ (d * w)).tocsr()
        return self._surface_stiffness


def build_polar_mesh(radius: float, nr: int, ntheta: int) -> PolarMesh:
    """Build the uniform polar mesh; rejects unusable resolutions.

    Requires radius > 0, nr >= 2, and even ntheta >= 4.
    """
    return PolarMesh(radius, nr, ntheta)


def as_bulk_field(mesh: PolarMesh, values) -> np.ndarray:
    """Validate and return a per-cell field as a float array."""
    f = np.asarray(values, dtype=float)
    if f.shape != (mesh.ncells,):
        raise ValueError(
            f"bulk field has shape {f.shape}, expected ({mesh.ncells},)"
        )
    if not np.all(np.isfinite(f)):
        raise ValueError("bulk field contains non-finite values")
    return f


def as_surface_field(mesh: PolarMesh, values) -> np.ndarray:
    """Validate and return a per-boundary-node field as a float array."""
    g = np.asarray(values, dtype=float)
    if g.shape != (mesh.ntheta,):
        raise ValueError(
            f"surface field has shape {g.shape}, expected ({mesh.ntheta},)"
        )
    if not np.all(np.isfinite(g)):
        raise ValueError("surface field contains non-finite values")
    return g


def boundary_flux_injection(mesh: PolarMesh, flux: np.ndarray) -> np.ndarray:
    """Per-cell source from a boundary flux density (flux * arc / area).

    ``flux`` is the already-evaluated outward flux density on each boundary
    node (normal derivative times diffusivity); no further scaling applies.
    """
    inj = np.zeros(mesh.ncells)
    bidx = mesh.boundary_cell_index
    inj[bidx] = flux * mesh.boundary_arc_lengths / mesh.cell_areas[bidx]
    return inj


def bulk_laplacian(mesh: PolarMesh, f, flux) -> np.ndarray:
    """Finite-volume Laplacian of a cell field with boundary flux injected.

    Interior faces contribute (face length) * (difference quotient) / area;
    the outer rim contributes flux * arc_length / area to each outermost
    cell. Summing the output against cell areas therefore returns exactly
    the total injected flux (interior contributions cancel pairwise).
    """
    f = as_bulk_field(mesh, f)
    flux = as_surface_field(mesh, flux)
    g = mesh._grad @ f
    g *= mesh._face_weights
    out = (mesh._grad.T @ g) * (-1.0)
    out /= mesh.cell_areas
    return out + boundary_flux_injection(mesh, flux)


def surface_laplacian(mesh: PolarMesh, g) -> np.ndarray:
    """Periodic second difference on the boundary circle, scaled by 1/(R*ht)^2."""
    g = as_surface_field(mesh, g)
    d = np.roll(g, -1) - g
    out = d - np.roll(d, 1)
    out /= (mesh.radius * mesh.htheta) ** 2
    return out


def boundary_trace(mesh: PolarMesh, f) -> np.ndarray:
    """Piecewise-constant trace: the adjacent outermost-ring cell value.

    Keeps traced values nonnegative whenever the bulk field is, which the
    boundary reaction terms require.
    """
    f = as_bulk_field(mesh, f)
    return f[mesh.boundary_cell_index].copy()
