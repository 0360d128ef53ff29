"""
Dividing-rectangles global search over the unit hypercube, used to maximize
the acquisition function. Deterministic: the same function and budget always
visit the same points.
"""
from dataclasses import dataclass

import numpy as np

from errors import InvalidParameterError
from logger_config import logger

EPSILON = 1e-4


@dataclass
class Rectangle:
    center: np.ndarray
    levels: np.ndarray  # side length along dim i is 3**-levels[i]
    value: float        # objective at the center, negated (the search minimizes)

    @property
    def size(self):
        """Center-to-vertex distance."""
        return 0.5 * float(np.sqrt(np.sum(9.0 ** -self.levels)))


@dataclass
class DirectResult:
    point: np.ndarray
    value: float
    evaluations: int


def _potentially_optimal(rects, f_min):
    """Indices of rectangles on the lower-right convex hull of (size, value)."""
    sizes = np.array([round(r.size, 12) for r in rects])
    values = np.array([r.value for r in rects])

    # Best rectangle of every size class; ties keep the oldest.
    best = {}
    for idx, (d, v) in enumerate(zip(sizes, values)):
        if d not in best or v < values[best[d]]:
            best[d] = idx
    groups = sorted(best.items())

    selected = []
    for pos, (d_j, j) in enumerate(groups):
        f_j = values[j]
        k_low = 0.0
        for d_i, i in groups[:pos]:
            k_low = max(k_low, (f_j - values[i]) / (d_j - d_i))
        k_high = np.inf
        for d_i, i in groups[pos + 1:]:
            k_high = min(k_high, (values[i] - f_j) / (d_i - d_j))
        if k_low > k_high:
            continue
        if np.isfinite(k_high) and f_j - k_high * d_j > f_min - EPSILON * abs(f_min):
            continue
        selected.append(j)
    return selected


def _divide(rect, objective):
    """Trisects `rect` along its longest sides. Returns (new rectangles, evaluations used)."""
    longest = np.flatnonzero(rect.levels == rect.levels.min())
    delta = 3.0 ** -(rect.levels.min() + 1)
    samples = {}
    for dim in longest:
        for sign in (1.0, -1.0):
            point = rect.center.copy()
            point[dim] += sign * delta
            samples[(dim, sign)] = (point, -objective(point))

    # Split first along the dimension with the best sample.
    order = sorted(longest, key=lambda dim: min(samples[(dim, 1.0)][1], samples[(dim, -1.0)][1]))
    levels = rect.levels.copy()
    children = []
    for dim in order:
        levels[dim] += 1
        for sign in (1.0, -1.0):
            point, value = samples[(dim, sign)]
            children.append(Rectangle(point, levels.copy(), value))
    rect.levels = levels
    return children, 2 * len(longest)


def direct_maximize(objective, dim, budget):
    """
    Maximizes `objective` over [0, 1]^dim with at most `budget` evaluations.
    The box center is evaluated first and only strictly better points replace
    it, so the result is never worse than the center.
    """
    if dim < 1:
        raise InvalidParameterError(f"dimension must be >= 1, got {dim}")
    if budget < 1:
        raise InvalidParameterError(f"budget must be >= 1, got {budget}")

    center = np.full(dim, 0.5)
    rects = [Rectangle(center, np.zeros(dim, dtype=np.int64), -objective(center))]
    evaluations = 1
    best_index = 0

    while evaluations < budget:
        f_min = rects[best_index].value
        progressed = False
        for j in _potentially_optimal(rects, f_min):
            needed = 2 * int(np.count_nonzero(rects[j].levels == rects[j].levels.min()))
            if evaluations + needed > budget:
                continue
            children, used = _divide(rects[j], objective)
            evaluations += used
            for child in children:
                rects.append(child)
                if child.value < rects[best_index].value:
                    best_index = len(rects) - 1
            progressed = True
        if not progressed:
            break

    best = rects[best_index]
    logger.debug(f"DIRECT: {evaluations} evaluations, {len(rects)} rectangles, best={-best.value:.6g}")
    return DirectResult(best.center.copy(), -best.value, evaluations)
