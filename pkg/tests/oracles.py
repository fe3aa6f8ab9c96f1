"""Independent reference implementations used to verify the library.

Everything here deliberately avoids the code paths it checks: the KDE
oracle is a plain Python triple loop, the binary energy evaluator sums the
discrete energy term by term, and the exact minimizer reduces the energy to
a min-cut instance solved by scipy's max-flow.
"""

import math

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import breadth_first_order, maximum_flow

MISSING_COST = 20.0
DENSITY_FLOOR = 1e-300
SQRT2 = math.sqrt(2.0)
CAPACITY_SCALE = 10**7


def kde_costs_bruteforce(scribbles, features, sigma):
    """Direct evaluation of the scribble kernel-density costs."""
    height, width, _ = features.shape
    n = scribbles.n_labels
    out = np.empty((height, width, n))
    for label in range(n):
        pos = scribbles.positions.get(label)
        if pos is None or len(pos) == 0:
            out[:, :, label] = MISSING_COST
            continue
        feat = scribbles.features[label]
        m = len(pos)
        for y in range(height):
            for x in range(width):
                d2_list = [
                    (x - pos[s, 0]) ** 2 + (y - pos[s, 1]) ** 2 for s in range(m)
                ]
                rho = max(1.0, math.sqrt(min(d2_list)))
                total = 0.0
                for s in range(m):
                    df2 = 0.0
                    for k in range(features.shape[2]):
                        diff = features[y, x, k] - feat[s, k]
                        df2 += diff * diff
                    total += math.exp(-d2_list[s] / (2.0 * rho * rho)) * math.exp(
                        -df2 / (2.0 * sigma * sigma)
                    )
                density = total / m
                out[y, x, label] = -math.log(max(density, DENSITY_FLOOR))
    return out


def binary_energy(mask, costs, weight, lam):
    """Discrete two-label partitioning energy, summed term by term.

    Matches the relaxed objective evaluated on a one-hot assignment: data
    costs plus lam * g(x) * |forward difference vector| of the foreground
    indicator (both labels contribute the same perimeter, absorbing the
    lam/2 factor).
    """
    height, width = mask.shape
    energy = 0.0
    for y in range(height):
        for x in range(width):
            energy += costs[y, x, mask[y, x]]
            dx = float(mask[y, x + 1] != mask[y, x]) if x < width - 1 else 0.0
            dy = float(mask[y + 1, x] != mask[y, x]) if y < height - 1 else 0.0
            energy += lam * weight[y, x] * math.sqrt(dx * dx + dy * dy)
    return energy


def minimize_binary_energy(costs, weight, lam):
    """Exact minimizer of the binary discrete energy via max-flow/min-cut.

    The per-pixel isotropic term w*sqrt(a^2+b^2) of the two forward
    differences is a submodular quadratic pseudo-Boolean function

        w*(sqrt(2) u0 + u1 + u2) - sqrt(2) w (u0 u1 + u0 u2) + (sqrt(2)-2) w u1 u2

    (u0 the pixel, u1/u2 its right/down neighbors), so the whole energy maps
    to a standard s-t cut without auxiliary nodes. Capacities are scaled to
    integers for scipy's solver; the quantization error is far below any
    tolerance used in tests. Returns (optimal mask, optimal energy).
    """
    height, width = weight.shape
    n_pixels = height * width
    source = n_pixels
    sink = n_pixels + 1
    unary = np.zeros(n_pixels)
    constant = 0.0
    rows, cols, caps = [], [], []

    def node(y, x):
        return y * width + x

    def add_edge(i, j, cap):
        if cap > 0:
            rows.append(i)
            cols.append(j)
            caps.append(cap)

    def add_pair(i, j, theta):
        # theta * u_i * u_j with theta <= 0: cut edge i -> j plus a unary term
        unary[j] += theta
        add_edge(i, j, -theta)

    for y in range(height):
        for x in range(width):
            i0 = node(y, x)
            unary[i0] += costs[y, x, 1] - costs[y, x, 0]
            constant += costs[y, x, 0]
            w = lam * weight[y, x]
            has_right = x < width - 1
            has_down = y < height - 1
            if has_right and has_down:
                i1 = node(y, x + 1)
                i2 = node(y + 1, x)
                unary[i0] += SQRT2 * w
                unary[i1] += w
                unary[i2] += w
                add_pair(i0, i1, -SQRT2 * w)
                add_pair(i0, i2, -SQRT2 * w)
                add_pair(i1, i2, (SQRT2 - 2.0) * w)
            elif has_right:
                i1 = node(y, x + 1)
                unary[i0] += w
                unary[i1] += w
                add_pair(i0, i1, -2.0 * w)
            elif has_down:
                i2 = node(y + 1, x)
                unary[i0] += w
                unary[i2] += w
                add_pair(i0, i2, -2.0 * w)

    for i in range(n_pixels):
        if unary[i] >= 0:
            add_edge(source, i, unary[i])
        else:
            add_edge(i, sink, -unary[i])
            constant += unary[i]

    data = np.rint(np.array(caps) * CAPACITY_SCALE).astype(np.int64)
    graph = csr_matrix(
        (data, (np.array(rows), np.array(cols))),
        shape=(n_pixels + 2, n_pixels + 2),
        dtype=np.int64,
    )
    result = maximum_flow(graph, source, sink)
    optimal = constant + result.flow_value / CAPACITY_SCALE

    residual = graph - result.flow
    residual.eliminate_zeros()
    reached = breadth_first_order(residual, source, return_predecessors=False)
    mask = np.ones(n_pixels, dtype=np.int32)
    reached = reached[reached < n_pixels]
    mask[reached] = 0
    return mask.reshape(height, width), optimal


def shift_mask(mask, dx, dy, fill=-1):
    """Integer-translate a mask, filling uncovered pixels."""
    out = np.full_like(mask, fill)
    height, width = mask.shape
    src_y0 = max(0, -dy)
    src_x0 = max(0, -dx)
    dst_y0 = max(0, dy)
    dst_x0 = max(0, dx)
    h = height - abs(dy)
    w = width - abs(dx)
    if h > 0 and w > 0:
        out[dst_y0 : dst_y0 + h, dst_x0 : dst_x0 + w] = mask[
            src_y0 : src_y0 + h, src_x0 : src_x0 + w
        ]
    return out
