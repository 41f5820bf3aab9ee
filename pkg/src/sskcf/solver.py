"""Joint ADMM solver for the part filters of the structural support correlation filter.

Every part ``l`` holds dual coefficients ``alpha_l`` (kept in the Fourier
domain) and a bias ``b_l``. Parts are tied to a dummy root part through a
star-shaped penalty weighted by ``omega_l`` and to their previous-frame
coefficients through a temporal penalty. One ADMM sweep updates, in order:

1. the root coefficients (weighted mean of the parts),
2. the hinge slack ``v_l`` and the shifted targets ``q_l = y + y * v_l``,
3. the bias ``b_l = mean(q_l)``,
4. the part coefficients, in closed form by element-wise division.

The penalty matrix written ``E`` in the closed forms is taken to be the
identity, which is the only reading under which the spatial and Fourier
closed forms agree bin by bin.
"""
from dataclasses import dataclass, field, replace
from typing import List, Optional

import numpy as np

from .spectral import dft2, idft2, kernel_spectrum

SINGULAR_TOL = 1e-12


class SingularSystemError(ArithmeticError):
    """A denominator bin of the closed-form alpha update vanished."""


@dataclass(frozen=True)
class SolverConfig:
    C: float = 1e4
    delta: float = 0.05
    beta: float = 5.0
    kappa: float = 3.0
    tau: float = 1e-3
    max_iter_first: int = 5
    max_iter_update: int = 3
    kernel: str = "gaussian"
    sigma: float = 0.5
    # -1 subtracts the structural and temporal terms in the alpha update
    # (negative denominator offset); +1 adds them as ridge-style penalties.
    penalty_sign: float = -1.0

    def __post_init__(self):
        if self.C <= 0 or self.kappa <= 0 or self.tau <= 0 or self.sigma <= 0:
            raise ValueError("C, kappa, tau and sigma must be positive")
        if self.delta < 0 or self.beta < 0:
            raise ValueError("delta and beta must be non-negative")
        if self.max_iter_first < 1 or self.max_iter_update < 1:
            raise ValueError("iteration caps must be >= 1")
        if self.kernel not in ("linear", "gaussian"):
            raise ValueError(f"unknown kernel {self.kernel!r}")
        if self.penalty_sign not in (-1.0, 1.0):
            raise ValueError("penalty_sign must be -1 or +1")

    def with_overrides(self, **kw):
        return replace(self, **kw)


@dataclass
class PartTrainingInput:
    """Training sample of one part.

    ``x`` is the windowed ``(M, N, D)`` feature grid, ``y`` the ternary
    ``(M, N)`` label grid, ``alpha_prev`` the previous-frame coefficient
    spectrum (``None`` means zero) and ``omega`` the root-coupling weight.
    """

    x: np.ndarray
    y: np.ndarray
    alpha_prev: Optional[np.ndarray] = None
    omega: float = 1.0
    xf: Optional[np.ndarray] = field(default=None, repr=False)
    kf: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        if self.x.ndim == 2:
            self.x = self.x[:, :, None]
        if self.x.shape[:2] != self.y.shape:
            raise ValueError(f"feature grid {self.x.shape[:2]} and labels {self.y.shape} disagree")
        if not 0.0 < self.omega <= 1.0:
            raise ValueError(f"omega must lie in (0, 1], got {self.omega}")

    def prepare(self, cfg):
        """Cache the feature spectrum and the kernel auto-correlation spectrum."""
        if self.xf is None:
            self.xf = dft2(self.x)
        if self.kf is None:
            self.kf = kernel_spectrum(self.x, self.x, cfg.kernel, cfg.sigma, xf=self.xf, zf=self.xf)
        return self

    @property
    def prev(self):
        return np.zeros(self.y.shape, complex) if self.alpha_prev is None else self.alpha_prev


@dataclass
class PartSolution:
    alpha_hat: np.ndarray
    b: float
    v: np.ndarray
    q: np.ndarray
    iterations: int = 0
    history: List[float] = field(default_factory=list)


def init_part(x, y, cfg, xf=None, kf=None):
    """Starting point of the ADMM sweep.

    ``alpha = X^T y / (X X^T + E / C)`` for a single-channel linear kernel,
    ``alpha = y / (K + E / C)`` otherwise; ``b = mean(y)``.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim == 2:
        x = x[:, :, None]
    if xf is None:
        xf = dft2(x)
    if kf is None:
        kf = kernel_spectrum(x, x, cfg.kernel, cfg.sigma, xf=xf, zf=xf)
    yf = dft2(y)
    if cfg.kernel == "linear" and x.shape[2] == 1:
        num = xf[:, :, 0] * yf
    else:
        num = yf
    alpha_hat = num / (kf + 1.0 / cfg.C)
    b = float(np.mean(y))
    return PartSolution(alpha_hat=alpha_hat, b=b, v=np.zeros(y.shape), q=np.array(y, dtype=float))


def recover_filter(xf, alpha_hat):
    """Primal filter spectrum ``w = 1/2 * sum_s alpha[s] * shift_s(x)`` (linear kernel)."""
    return 0.5 * xf * alpha_hat[:, :, None]


def compute_omega(w_l, w_r, kappa):
    """Root coupling ``exp(-||w_l - w_r||^2 / (2 kappa^2))`` from two spectra."""
    diff = np.asarray(w_l) - np.asarray(w_r)
    n_bins = diff.shape[0] * diff.shape[1]
    dist2 = float(np.sum(np.abs(diff) ** 2)) / n_bins  # Parseval
    return float(np.exp(-0.5 * dist2 / (kappa * kappa)))


def update_alpha_r(alphas, weights):
    """Weighted mean of the part coefficients."""
    if len(alphas) == 0:
        raise ValueError("no parts to average")
    weights = np.asarray(weights, dtype=float)
    total = weights.sum()
    if total <= 0:
        raise ValueError("root weights must have a positive sum")
    return np.tensordot(weights, np.asarray(alphas), axes=1) / total


def update_v(kf, alpha_hat, b, y):
    """Hinge slack ``max(y * (K alpha / 2 + b) - 1, 0)``."""
    margin = y * (0.5 * idft2(kf * alpha_hat) + b) - 1.0
    return np.maximum(margin, 0.0)


def update_q(y, v):
    return y + y * v


def update_b(q):
    return float(np.mean(q))


def alpha_denominator(kf, omega, cfg):
    s = cfg.penalty_sign
    return 0.5 * kf + (0.5 / cfg.C + s * cfg.delta * omega + s * cfg.beta)


def update_alpha(kf, q, b, alpha_r, alpha_prev, omega, cfg):
    """Closed-form coefficient update, one division per frequency bin.

    With the default sign convention this is
    ``(q^ - b e^ - delta w a_r^ - beta a_prev^) / (k^/2 + 1/(2C) - delta w - beta)``.
    """
    s = cfg.penalty_sign
    num = dft2(q - b) + s * cfg.delta * omega * alpha_r + s * cfg.beta * alpha_prev
    den = alpha_denominator(kf, omega, cfg)
    if np.min(np.abs(den)) < SINGULAR_TOL:
        raise SingularSystemError("closed-form alpha update has a vanishing denominator bin")
    return num / den


def _change(new, old):
    return float(np.mean(np.abs(new - old)))


def solve_joint(parts, cfg, max_iter=None, warm=None):
    """Run ADMM sweeps over all parts until the coefficients settle.

    ``max_iter`` defaults to ``cfg.max_iter_first``. ``warm`` optionally
    gives one :class:`PartSolution` per part to start from instead of the
    closed-form initialisation. The sweep stops once the largest per-part
    mean absolute change of ``alpha_hat`` drops below ``cfg.tau``.
    """
    if not parts:
        raise ValueError("solve_joint needs at least one part")
    shape = parts[0].y.shape
    for p in parts:
        if p.y.shape != shape:
            raise ValueError("all parts must share one grid shape")
        p.prepare(cfg)
    if max_iter is None:
        max_iter = cfg.max_iter_first

    if warm is None:
        sols = [init_part(p.x, p.y, cfg, xf=p.xf, kf=p.kf) for p in parts]
    else:
        sols = [PartSolution(w.alpha_hat.copy(), w.b, w.v.copy(), w.q.copy()) for w in warm]
    omegas = [p.omega for p in parts]

    history = []
    it = 0
    while it < max_iter:
        it += 1
        alpha_r = update_alpha_r([s.alpha_hat for s in sols], omegas)
        worst = 0.0
        for p, s in zip(parts, sols):
            v = update_v(p.kf, s.alpha_hat, s.b, p.y)
            q = update_q(p.y, v)
            b = update_b(q)
            new = update_alpha(p.kf, q, b, alpha_r, p.prev, p.omega, cfg)
            worst = max(worst, _change(new, s.alpha_hat))
            s.alpha_hat, s.b, s.v, s.q = new, b, v, q
        history.append(worst)
        if worst < cfg.tau:
            break
    for s in sols:
        s.iterations = it
        s.history = list(history)
    return sols
