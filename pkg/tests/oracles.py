"""Independent reference implementations used to check the package.

Everything here deliberately avoids the code paths under test: series
expansions instead of closed forms, finite-difference descent instead of
fixed-point iteration, scalar loops instead of vectorized solves.
"""
from __future__ import annotations

import numpy as np


def series_exp(w, terms: int = 30) -> np.ndarray:
    """Truncated matrix-exponential series sum_k hat(w)^k / k!."""
    x, y, z = np.asarray(w, dtype=float)
    W = np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])
    out = np.eye(3)
    term = np.eye(3)
    for k in range(1, terms):
        term = term @ W / k
        out = out + term
    return out


def rotation_axis_by_eigenvector(R) -> np.ndarray:
    """Rotation axis as the eigenvector of R for eigenvalue 1."""
    vals, vecs = np.linalg.eig(np.asarray(R, dtype=float))
    idx = int(np.argmin(np.abs(vals - 1.0)))
    axis = np.real(vecs[:, idx])
    return axis / np.linalg.norm(axis)


def trace_angle(Ra, Rb) -> float:
    """Relative rotation angle from the trace formula."""
    rel = np.asarray(Ra, dtype=float).T @ np.asarray(Rb, dtype=float)
    c = (np.trace(rel) - 1.0) / 2.0
    return float(np.arccos(np.clip(c, -1.0, 1.0)))


def karcher_mean_descent(mats, step0: float = 0.25, tol: float = 1e-11,
                         max_iters: int = 20000) -> np.ndarray:
    """Minimize sum_i angle(R_i, R)^2 by finite-difference gradient descent.

    The objective uses the trace formula and the gradient is estimated by
    central differences in a local exponential chart, so nothing is shared
    with the fixed-point implementation this checks.
    """
    mats = [np.asarray(m, dtype=float) for m in mats]

    def objective(R):
        return sum(trace_angle(m, R) ** 2 for m in mats)

    def chart_step(R, w):
        return R @ series_exp(w, terms=20)

    R = mats[0].copy()
    f = objective(R)
    eps = 1e-6
    step = step0 / max(len(mats), 1)
    for _ in range(max_iters):
        grad = np.zeros(3)
        for k in range(3):
            e = np.zeros(3)
            e[k] = eps
            grad[k] = (objective(chart_step(R, e)) - objective(chart_step(R, -e))) / (2 * eps)
        gnorm = np.linalg.norm(grad)
        if gnorm < tol:
            break
        trial_step = step
        while trial_step > 1e-14:
            R_new = chart_step(R, -trial_step * grad)
            f_new = objective(R_new)
            if f_new < f:
                break
            trial_step *= 0.5
        else:
            break
        R, f = R_new, f_new
    # re-orthonormalize drift from the truncated chart map
    U, _, Vt = np.linalg.svd(R)
    return U @ np.diag([1.0, 1.0, float(np.sign(np.linalg.det(U @ Vt)))]) @ Vt


def homogeneous_project(K, R, t, X) -> np.ndarray:
    """Pixel via explicit 4-vector homogeneous multiplication."""
    K = np.asarray(K, dtype=float)
    P = K @ np.hstack([np.asarray(R, dtype=float), np.asarray(t, dtype=float).reshape(3, 1)])
    Xh = np.append(np.asarray(X, dtype=float), 1.0)
    u, v, w = P @ Xh
    return np.array([u / w, v / w])


def sphere_ray_distance(origin, direction, center, radius) -> float | None:
    """Nearest positive intersection of a unit ray with a sphere, or None."""
    o = np.asarray(origin, dtype=float)
    d = np.asarray(direction, dtype=float)
    c = np.asarray(center, dtype=float)
    oc = o - c
    b = 2.0 * float(np.dot(d, oc))
    cc = float(np.dot(oc, oc)) - radius * radius
    disc = b * b - 4.0 * cc
    if disc < 0:
        return None
    root = np.sqrt(disc)
    for t in sorted(((-b - root) / 2.0, (-b + root) / 2.0)):
        if t > 0:
            return float(t)
    return None


def triangulate_coordinate_descent(origins, directions, tol: float = 1e-13,
                                   max_sweeps: int = 100000) -> np.ndarray:
    """Minimize the summed squared perpendicular distances one axis at a time.

    Exact per-coordinate minimization of the quadratic objective; iterates
    until the sweep moves the estimate by less than ``tol``.
    """
    origins = np.asarray(origins, dtype=float)
    directions = np.asarray(directions, dtype=float)
    A = np.zeros((3, 3))
    b = np.zeros(3)
    for h, u in zip(origins, directions):
        proj = np.eye(3) - np.outer(u, u)
        A += proj
        b += proj @ h
    x = origins.mean(axis=0).astype(float)
    for _ in range(max_sweeps):
        moved = 0.0
        for k in range(3):
            others = sum(A[k, j] * x[j] for j in range(3) if j != k)
            new_xk = (b[k] - others) / A[k, k]
            moved = max(moved, abs(new_xk - x[k]))
            x[k] = new_xk
        if moved < tol:
            break
    return x


def perpendicular_objective(x, origins, directions) -> float:
    """Sum of squared perpendicular distances from x to each ray's line."""
    x = np.asarray(x, dtype=float)
    total = 0.0
    for h, u in zip(np.asarray(origins, float), np.asarray(directions, float)):
        r = (np.eye(3) - np.outer(u, u)) @ (x - h)
        total += float(np.dot(r, r))
    return total


def spreadsheet_misalignment(real_points, virtual_points):
    """Per-axis abs-difference mean/std aggregation done with scalar loops."""
    diffs = []
    for r, v in zip(real_points, virtual_points):
        diffs.append([abs(v[k] - r[k]) for k in range(3)])
    n = len(diffs)
    means = [sum(row[k] for row in diffs) / n for k in range(3)]
    variances = [sum((row[k] - means[k]) ** 2 for row in diffs) / n for k in range(3)]
    stds = [v ** 0.5 for v in variances]
    l2_mean = sum(m * m for m in means) ** 0.5
    l2_std = sum(s * s for s in stds) ** 0.5
    return means, stds, l2_mean, l2_std
