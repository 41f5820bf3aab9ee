"""Confidence map and ternary labels over the feature grid."""
import numpy as np


def cyclic_distance(shape, center):
    """Wraparound Euclidean distance (in cells) from every cell to ``center``."""
    m, n = shape
    cm, cn = center
    dm = np.abs(np.arange(m) - cm) % m
    dn = np.abs(np.arange(n) - cn) % n
    dm = np.minimum(dm, m - dm)
    dn = np.minimum(dn, n - dn)
    return np.sqrt(dm[:, None] ** 2 + dn[None, :] ** 2)


def confidence_map(shape, center, gamma=1.0, eta=1.0, lam=2.0):
    """Scores ``gamma * exp(-eta * d**lam)`` with cyclic distance ``d``."""
    if gamma <= 0 or eta <= 0 or lam <= 0:
        raise ValueError("gamma, eta and lam must be positive")
    m, n = shape
    if not (0 <= center[0] < m and 0 <= center[1] < n):
        raise ValueError(f"center {center} outside grid {shape}")
    d = cyclic_distance(shape, center)
    return gamma * np.exp(-eta * d ** lam)


def assign_labels(scores, theta_low, theta_high):
    """+1 where score >= theta_high, -1 where score <= theta_low, else 0."""
    if theta_low >= theta_high:
        raise ValueError(f"theta_low={theta_low} must be below theta_high={theta_high}")
    labels = np.zeros(scores.shape)
    labels[scores >= theta_high] = 1.0
    labels[scores <= theta_low] = -1.0
    return labels


def default_eta(shape, factor=0.1):
    return factor * np.sqrt(shape[0] * shape[1])


def make_labels(shape, center=(0, 0), thresholds=(0.4, 0.9), eta_factor=0.1, lam=2.0, gamma=1.0):
    """Label grid for a part with the target centred at ``center``.

    The default centre is the origin, which is where the response peaks
    for a zero displacement under the cyclic-shift convention.
    """
    scores = confidence_map(shape, center, gamma=gamma, eta=default_eta(shape, eta_factor), lam=lam)
    return assign_labels(scores, *thresholds)
