"""Small geodesic instances (all <= 32x32) shared by unit and acceptance tests."""

import numpy as np

from degraf_flow.interp import edge_cost_map

from synth import textured


def geodesic_corpus():
    """List of ``(name, cost, seeds_xy, lam, connectivity)``."""
    rng = np.random.default_rng(2024)
    cases = []

    zero = np.zeros((16, 20))
    cases.append(("zero-cost-two-seeds", zero, np.array([[3.0, 4.0], [15.0, 10.0]]), 100.0, 4))
    cases.append(("zero-cost-tie-line", zero, np.array([[2.0, 8.0], [12.0, 8.0]]), 100.0, 4))

    wall = np.zeros((24, 24))
    wall[:, 11:13] = 1.0
    cases.append(("wall", wall, np.array([[5.0, 12.0], [18.0, 12.0]]), 100.0, 4))
    cases.append(("wall-8conn", wall, np.array([[5.0, 3.0], [18.0, 20.0], [6.0, 20.0]]), 50.0, 8))

    dup = np.array([[4.0, 4.0], [4.2, 3.9], [20.0, 9.0]])
    cases.append(("duplicate-seed-pixel", np.full((12, 24), 0.3), dup, 10.0, 4))

    for i in range(12):
        h, w = rng.integers(8, 33, size=2)
        img = textured((h, w), seed=100 + i, blur=float(rng.uniform(0.5, 3.0)))
        n = int(rng.integers(1, 21))
        seeds = rng.uniform([0, 0], [w - 1, h - 1], (n, 2))
        lam = float(rng.choice([0.0, 1.0, 10.0, 100.0]))
        conn = int(rng.choice([4, 8]))
        cases.append((f"random-{i}", edge_cost_map(img), seeds, lam, conn))
    return cases


def layered_flow_scene(seed: int, shape=(32, 32), n_seeds=20):
    """Two affine motions split by a vertical intensity edge, faint texture.

    Returns ``(image, seeds_xy, flows)``.
    """
    rng = np.random.default_rng(seed)
    h, w = shape
    seeds = rng.uniform([0, 0], [w - 1, h - 1], (n_seeds, 2))
    img = 0.3 * textured((h, w), seed=50 + seed, blur=1.0)
    split = int(rng.integers(w // 3, 2 * w // 3))
    img[:, split:] += 150.0
    a1, a2 = rng.uniform(-0.05, 0.05, (2, 2, 2))
    b1, b2 = rng.uniform(-4, 4, (2, 2))
    left = seeds[:, 0] < split - 0.5
    flows = np.where(left[:, None], seeds @ a1.T + b1, seeds @ a2.T + b2)
    return img, seeds, flows


def textured_flow_scene(seed: int, shape=(32, 32), n_seeds=20):
    """Smooth curved flow over full-contrast texture (edge cost high everywhere)."""
    rng = np.random.default_rng(seed)
    h, w = shape
    seeds = rng.uniform([0, 0], [w - 1, h - 1], (n_seeds, 2))
    img = textured((h, w), seed=50 + seed, blur=2.0)
    flows = np.stack([2.0 * np.sin(seeds[:, 0] / 9.0), np.cos(seeds[:, 1] / 7.0)], axis=1)
    return img, seeds, flows


def exhaustive_interpolation(cost, seeds, flows, k, lam, sigma, connectivity=4):
    """Per-pixel affine fits over the exact k geodesically nearest seeds."""
    from degraf_flow.interp import fit_local_affine

    from oracles import exhaustive_distances

    stack = exhaustive_distances(cost, seeds, lam, connectivity)
    h, w = cost.shape
    out = np.zeros((h, w, 2))
    k = min(k, len(seeds))
    for y in range(h):
        for x in range(w):
            order = np.argsort(stack[:, y, x], kind="stable")[:k]
            model = fit_local_affine(seeds[order], flows[order], stack[order, y, x], sigma)
            out[y, x] = model(float(x), float(y))
    return out


def approximation_agreement(scene, k=8, lam=100.0, sigma=10.0, tol=0.5):
    """Pixels where seed-graph and exhaustive interpolation differ by < ``tol``.

    Returns ``(agreeing, total)``.
    """
    from degraf_flow.interp import interpolate
    from degraf_flow.tracker import SparseFlow

    img, seeds, flows = scene
    approx = interpolate(SparseFlow(seeds, flows, np.zeros(len(seeds))), img, k=k, lam=lam, sigma=sigma).uv
    exact = exhaustive_interpolation(edge_cost_map(img), seeds, flows, k, lam, sigma)
    diff = np.linalg.norm(approx - exact, axis=-1)
    return int((diff < tol).sum()), diff.size
