"""
DigiWFS Unwrap - Zonal least-squares integration

Reconstructs a phase from neighbour differences on a regular grid
(Hudgin geometry). Each connected component of the active node set is solved
independently with one node pinned; the result is the minimum-norm
least-squares solution, i.e. zero mean per component.

Functions:
    solve_edge_differences: Least-squares phase from explicit edge differences
    integrate_gradients: Least-squares phase from node gradients
    upsample_nodes: Bilinear node-to-pixel upsampling with extrapolation
    extend_nodes: Smooth continuation of node values onto inactive nodes
"""

import logging
import warnings
from typing import Any, Dict, Tuple

import numpy as np
from scipy import sparse
from scipy.interpolate import RegularGridInterpolator
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import MatrixRankWarning, lsqr, spsolve

from backend.errors import GridValidationError

logger = logging.getLogger(__name__)


def _difference_operator(active: np.ndarray) -> Tuple[sparse.csr_matrix, np.ndarray, np.ndarray, np.ndarray]:
    count = int(active.sum())
    index = np.full(active.shape, -1, dtype=np.int64)
    index[active] = np.arange(count)

    horizontal = active[:, :-1] & active[:, 1:]
    vertical = active[:-1, :] & active[1:, :]
    start = np.concatenate([index[:, :-1][horizontal], index[:-1, :][vertical]])
    end = np.concatenate([index[:, 1:][horizontal], index[1:, :][vertical]])

    rows = np.arange(start.size)
    operator = sparse.csr_matrix(
        (np.concatenate([-np.ones(start.size), np.ones(start.size)]),
         (np.concatenate([rows, rows]), np.concatenate([start, end]))),
        shape=(start.size, count),
    )
    return operator, horizontal, vertical, np.stack([start, end])


def solve_edge_differences(active: np.ndarray, dx: np.ndarray, dy: np.ndarray) -> Tuple[np.ndarray, Dict[str, Any]]:
    """
    Least-squares phase from neighbour differences.

    Args:
        active (np.ndarray): Boolean node mask of shape (rows, cols)
        dx (np.ndarray): phi[:, j+1] - phi[:, j], shape (rows, cols - 1)
        dy (np.ndarray): phi[i+1, :] - phi[i, :], shape (rows - 1, cols)

    Returns:
        Tuple[np.ndarray, Dict[str, Any]]: Phase on the node grid (0 at inactive
        nodes, zero mean per connected component) and solver diagnostics
    """
    active = np.asarray(active, dtype=bool)
    count = int(active.sum())
    if count == 0:
        raise GridValidationError("No active nodes to integrate over")

    operator, horizontal, vertical, edges = _difference_operator(active)
    rhs = np.concatenate([np.asarray(dx, dtype=float)[horizontal], np.asarray(dy, dtype=float)[vertical]])

    adjacency = sparse.coo_matrix((np.ones(edges.shape[1]), (edges[0], edges[1])), shape=(count, count))
    n_components, labels = connected_components(adjacency, directed=False)
    if n_components > 1:
        logger.warning(f"Active node graph has {n_components} connected components; solving each independently")

    laplacian = (operator.T @ operator).tocsr()
    divergence = operator.T @ rhs

    pinned = np.unique(labels, return_index=True)[1]
    free = np.ones(count, dtype=bool)
    free[pinned] = False

    phi = np.zeros(count)
    if free.any():
        reduced = laplacian[free][:, free].tocsc()
        phi[free] = spsolve(reduced, divergence[free])

    sums = np.bincount(labels, weights=phi, minlength=n_components)
    sizes = np.bincount(labels, minlength=n_components)
    phi -= (sums / sizes)[labels]

    residual = operator @ phi - rhs if rhs.size else np.zeros(0)
    out = np.zeros(active.shape)
    out[active] = phi

    # mean absolute residual of the edges touching each node
    touching = np.bincount(edges[0], minlength=count) + np.bincount(edges[1], minlength=count)
    load = (np.bincount(edges[0], weights=np.abs(residual), minlength=count)
            + np.bincount(edges[1], weights=np.abs(residual), minlength=count))
    node_residual = np.zeros(active.shape)
    node_residual[active] = load / np.maximum(touching, 1)

    info = {
        "components": int(n_components),
        "edges": int(rhs.size),
        "edge_residual_rms": float(np.sqrt(np.mean(residual ** 2))) if residual.size else 0.0,
        "node_residual": node_residual,
    }
    logger.debug(f"Zonal solve: {count} nodes, {rhs.size} edges, {n_components} components")
    return out, info


def integrate_gradients(gx: np.ndarray, gy: np.ndarray, active: np.ndarray,
                        spacing: float = 1.0) -> Tuple[np.ndarray, Dict[str, Any]]:
    """
    Least-squares phase from gradients sampled at the nodes.

    Neighbour differences use the trapezoid rule,
    phi_b - phi_a = spacing * (g_a + g_b) / 2.

    Args:
        gx (np.ndarray): Gradient along axis 1 (radians per grid unit)
        gy (np.ndarray): Gradient along axis 0 (radians per grid unit)
        active (np.ndarray): Boolean node mask
        spacing (float): Node spacing in grid units

    Returns:
        Tuple[np.ndarray, Dict[str, Any]]: See solve_edge_differences
    """
    gx = np.asarray(gx, dtype=float)
    gy = np.asarray(gy, dtype=float)
    dx = spacing * 0.5 * (gx[:, :-1] + gx[:, 1:])
    dy = spacing * 0.5 * (gy[:-1, :] + gy[1:, :])
    return solve_edge_differences(active, dx, dy)


def _second_differences(m: int) -> sparse.csr_matrix:
    eye = sparse.identity(m, format="csr")
    d2 = sparse.diags([1.0, -2.0, 1.0], [0, 1, 2], shape=(m - 2, m), format="csr")
    return sparse.vstack([sparse.kron(eye, d2), sparse.kron(d2, eye)]).tocsr()


def extend_nodes(values: np.ndarray, active: np.ndarray) -> np.ndarray:
    """
    Continue node values onto inactive nodes.

    Inactive values minimize the squared second differences along both axes
    with active values held fixed, so planes are continued exactly.

    Args:
        values (np.ndarray): Node values, shape (m, m)
        active (np.ndarray): Boolean node mask

    Returns:
        np.ndarray: Values with every node filled
    """
    values = np.asarray(values, dtype=float)
    active = np.asarray(active, dtype=bool)
    if active.all() or not active.any():
        return values.copy()
    m = values.shape[0]
    if m < 3:
        return np.where(active, values, values[active].mean())
    operator = _second_differences(m)
    flat_active = active.ravel()
    known = operator[:, flat_active] @ values.ravel()[flat_active]
    free = operator[:, ~flat_active].tocsc()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", MatrixRankWarning)
        solution = spsolve((free.T @ free).tocsc(), -(free.T @ known))
    if not np.all(np.isfinite(solution)):
        # rank-deficient continuation
        solution = lsqr(free, -known, atol=1e-12, btol=1e-12)[0]
    out = values.ravel().copy()
    out[~flat_active] = solution
    return out.reshape(values.shape)


def upsample_nodes(values: np.ndarray, active: np.ndarray, block: int) -> np.ndarray:
    """
    Bilinear upsampling from a block-centred node grid to pixels.

    Inactive nodes are first continued with extend_nodes; pixels beyond the
    outermost node centres are linearly extrapolated.

    Args:
        values (np.ndarray): Node values, shape (m, m)
        active (np.ndarray): Boolean node mask
        block (int): Pixels per node along each axis

    Returns:
        np.ndarray: Pixel grid of shape (m * block, m * block)
    """
    values = np.asarray(values, dtype=float)
    active = np.asarray(active, dtype=bool)
    values = extend_nodes(values, active)
    m = values.shape[0]
    if block == 1:
        return values
    centres = np.arange(m) * block + (block - 1) / 2.0
    if m == 1:
        return np.full((block, block), values[0, 0])
    interpolator = RegularGridInterpolator((centres, centres), values, method="linear",
                                           bounds_error=False, fill_value=None)
    pixels = np.arange(m * block, dtype=float)
    yy, xx = np.meshgrid(pixels, pixels, indexing="ij")
    return interpolator(np.stack([yy.ravel(), xx.ravel()], axis=-1)).reshape(yy.shape)
