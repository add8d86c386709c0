"""Half-plane oracles for planar polytopes, independent of the LP code."""
import numpy as np
from scipy.spatial import ConvexHull


def symmetrized_facets(V):
    P = np.vstack([V, -V])
    return ConvexHull(P).equations  # rows (a, b): a.x + b <= 0 inside


def positive_facets(V):
    V = np.asarray(V, dtype=float)
    P = np.vstack([V, np.c_[V[:, 0], 0 * V[:, 1]], np.c_[0 * V[:, 0], V[:, 1]], [[0.0, 0.0]]])
    return ConvexHull(P).equations


def gauge(eqs, x):
    """Minkowski functional from facets not passing through the origin."""
    eqs = eqs[eqs[:, 2] < -1e-14]
    return float(np.max(eqs[:, :2] @ x / -eqs[:, 2]))
