"""Dual correlation filters (context + target-focused) trained jointly by ADMM.

Conventions
-----------
Feature maps are (rows, cols, D) real arrays on a T = rows*cols cell grid.
Spectra are unnormalised real-input DFTs over the two grid axes
(``scipy.fft.rfft2``), so only the half spectrum (rows, cols//2 + 1, D) is
kept; every per-frequency operation below is elementwise, which makes the
half spectrum sufficient.

Correlation is R(j) = sum_t w(t) x(t + j) (circular), i.e. in the DFT domain
R^ = sum_c conj(w^_c) x^_c. A filter lives on a small target-sized support
centred in the grid; ``lift`` embeds it into the full grid (the cropping
operator P transposed) and ``Support.crop`` restricts a grid map to it.

The augmented Lagrangian that the three ADMM steps minimise / ascend is, for
one filter w with its auxiliary grid variable v and multiplier theta,

    L = 1/2 ||v * x - y||^2 + lam/2 ||w||^2 + mu/2 ||w - w_other||^2
        + T <theta_s, v - P'w> + gamma T / 2 ||v - P'w||^2

where theta_s = IDFT(theta^). With this scaling the w, v and theta updates
reduce exactly to the closed forms implemented in ``solve_w_subproblem``,
``solve_v_subproblem`` and ``update_lagrangian``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import fft as sfft

from .errors import InvalidConfig, InvalidInput, SolverWarning
from .illum import Mode

# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class TrainConfig:
    """Regression and update parameters of one illumination mode."""

    lam: float = 0.01
    mu: float = 280.0
    psi: float = 0.02
    eta_t: float = 0.032
    eta_s: float = 0.016

    def __post_init__(self):
        for name in ("lam", "mu", "psi", "eta_t", "eta_s"):
            value = getattr(self, name)
            if not np.isfinite(value) or value < 0:
                raise InvalidConfig(f"{name} must be finite and non-negative, got {value}")
        for name in ("eta_t", "eta_s"):
            if not 0.0 < getattr(self, name) < 1.0:
                raise InvalidConfig(f"{name} must lie in (0, 1), got {getattr(self, name)}")

    @staticmethod
    def for_mode(mode: Mode | str) -> "TrainConfig":
        return DAY_CONFIG if Mode(mode) is Mode.DAY else NIGHT_CONFIG


DAY_CONFIG = TrainConfig(lam=0.01, mu=280.0, psi=0.02, eta_t=0.032, eta_s=0.016)
NIGHT_CONFIG = TrainConfig(lam=0.01, mu=200.0, psi=0.01, eta_t=0.024, eta_s=0.023)

COUPLINGS = ("joint", "alternate")


@dataclass(frozen=True)
class AdmmSchedule:
    """Penalty schedule and iteration counts.

    ``coupling="joint"`` updates both filters in every sweep, solving their
    2x2 coupled w-step exactly; ``"alternate"`` runs ``iterations`` sweeps on
    w_g with w_o frozen, then the same on w_o, for ``passes`` outer passes.
    Either way the total number of sweeps per filter is iterations * passes.
    """

    gamma0: float = 1.0
    growth: float = 10.0
    gamma_max: float = 1e4
    iterations: int = 2
    passes: int = 2
    coupling: str = "joint"

    def __post_init__(self):
        if not (self.gamma0 > 0 and self.gamma_max >= self.gamma0):
            raise InvalidConfig(f"need 0 < gamma0 <= gamma_max, got {self.gamma0}, {self.gamma_max}")
        if self.growth < 1:
            raise InvalidConfig(f"gamma growth must be >= 1, got {self.growth}")
        if self.iterations < 1 or self.passes < 1:
            raise InvalidConfig("iterations and passes must be >= 1")
        if self.coupling not in COUPLINGS:
            raise InvalidConfig(f"coupling must be one of {COUPLINGS}, got {self.coupling!r}")

    def next_gamma(self, gamma: float) -> float:
        return min(self.gamma_max, self.growth * gamma)


# ---------------------------------------------------------------------------
# grid helpers


class Support(NamedTuple):
    """Filter support on the cell grid: top-left (row, col) and extent (rows, cols)."""

    row: int
    col: int
    rows: int
    cols: int

    @classmethod
    def centered(cls, grid: tuple[int, int], size: tuple[int, int]) -> "Support":
        """Support of `size` (rows, cols) centred in `grid`, clipped to it."""
        th, tw = grid
        nh = int(min(max(size[0], 1), th))
        nw = int(min(max(size[1], 1), tw))
        return cls(th // 2 - nh // 2, tw // 2 - nw // 2, nh, nw)

    @property
    def slices(self) -> tuple[slice, slice]:
        return slice(self.row, self.row + self.rows), slice(self.col, self.col + self.cols)

    def crop(self, grid_map: np.ndarray) -> np.ndarray:
        return grid_map[self.slices]


def lift(w: np.ndarray, support: Support, grid: tuple[int, int]) -> np.ndarray:
    """Embed a support-sized filter into a zero grid."""
    out = np.zeros(tuple(grid) + w.shape[2:], dtype=w.dtype)
    out[support.slices] = w
    return out


def rfft2(x: np.ndarray) -> np.ndarray:
    return sfft.rfft2(x, axes=(0, 1))


def irfft2(x_hat: np.ndarray, grid: tuple[int, int]) -> np.ndarray:
    return sfft.irfft2(x_hat, s=tuple(grid), axes=(0, 1))


def lift_rfft2(w: np.ndarray, support: Support, grid: tuple[int, int]) -> np.ndarray:
    """rfft2(lift(w)) without transforming the all-zero rows outside the support."""
    th, tw = grid
    part = np.zeros((support.rows, tw) + w.shape[2:], dtype=w.dtype)
    part[:, support.col : support.col + support.cols] = w
    rows = sfft.rfft(part, axis=1)
    full = np.zeros((th,) + rows.shape[1:], dtype=rows.dtype)
    full[support.row : support.row + support.rows] = rows
    return sfft.fft(full, axis=0, overwrite_x=True)


def crop_irfft2(x_hat: np.ndarray, support: Support, grid: tuple[int, int]) -> np.ndarray:
    """support.crop(irfft2(x_hat)), inverting only the rows inside the support."""
    cols = sfft.ifft(x_hat, axis=0)[support.row : support.row + support.rows]
    return sfft.irfft(cols, n=grid[1], axis=1)[:, support.col : support.col + support.cols]


def correlate(w_hat: np.ndarray, x_hat: np.ndarray, grid: tuple[int, int]) -> np.ndarray:
    """Multi-channel circular correlation response sum_c w^c * x^c on the grid."""
    return irfft2(np.einsum("ijc,ijc->ij", w_hat.conj(), x_hat), grid)


# ---------------------------------------------------------------------------
# label


@dataclass
class GaussianLabel:
    values: np.ndarray
    sigma: float
    dft: np.ndarray

    @property
    def grid(self) -> tuple[int, int]:
        return self.values.shape


def _wrap_offsets(n: int) -> np.ndarray:
    return (np.arange(n) + n // 2) % n - n // 2


def gaussian_label(grid: tuple[int, int], sigma_factor: float, target_cells: tuple[int, int],
                   dtype=np.float64) -> GaussianLabel:
    """Gaussian regression target peaked at the zero-shift bin, with wrap-around distances.

    sigma = sigma_factor * sqrt(rows * cols of the target in cells).
    """
    th, tw = int(grid[0]), int(grid[1])
    if th < 1 or tw < 1:
        raise InvalidInput(f"label grid must be at least 1x1, got {grid}")
    if not sigma_factor > 0:
        raise InvalidInput(f"sigma_factor must be positive, got {sigma_factor}")
    sigma = float(sigma_factor * np.sqrt(float(target_cells[0]) * float(target_cells[1])))
    if not sigma > 0:
        raise InvalidInput(f"target size must be positive, got {target_cells}")
    dr, dc = _wrap_offsets(th), _wrap_offsets(tw)
    values = np.exp(-0.5 * (dr[:, None] ** 2 + dc[None, :] ** 2) / sigma**2).astype(dtype)
    return GaussianLabel(values, sigma, sfft.rfft2(values))


# ---------------------------------------------------------------------------
# ADMM sub-problems


def solve_w_subproblem(w_other, theta, v, cfg: TrainConfig, gamma: float, T: int) -> np.ndarray:
    """Closed-form filter update from support-restricted spatial theta and v.

    w = (mu * w_other + T * theta + gamma * T * v) / (lam + mu + gamma * T)
    """
    denom = cfg.lam + cfg.mu + gamma * T
    if denom == 0:
        raise InvalidConfig("lam + mu + gamma*T is zero")
    return (cfg.mu * np.asarray(w_other) + T * np.asarray(theta) + gamma * T * np.asarray(v)) / denom


def solve_v_subproblem(x_hat, y_hat, w_hat, theta_hat, gamma: float, T: int,
                       s_x: np.ndarray | None = None) -> np.ndarray:
    """Per-frequency ridge solve for the auxiliary variable via Sherman-Morrison.

    Solves (x x^H + T gamma I) v = y x - T theta + T gamma w at every frequency,
    with x, theta, w the D-vectors at that frequency. `s_x` may carry the
    precomputed sum_c |x_c|^2.
    """
    rho = gamma * T
    assert rho > 0, "gamma must be positive"
    if s_x is None:
        s_x = np.einsum("ijc,ijc->ij", x_hat.conj(), x_hat).real
    y = y_hat[..., None] if y_hat.ndim == x_hat.ndim - 1 else y_hat
    q = rho * w_hat - T * theta_hat
    s_q = np.einsum("ijc,ijc->ij", x_hat.conj(), q)
    b = s_x + rho
    coef = (y[..., 0] * s_x + s_q) / (rho * b)
    return (y * x_hat + q) / rho - x_hat * coef[..., None]


def update_lagrangian(theta_hat, v_hat, w_hat, gamma: float) -> np.ndarray:
    """theta <- theta + gamma (v - lifted w), all in the DFT domain."""
    return theta_hat + gamma * (v_hat - w_hat)


@dataclass
class AdmmState:
    """ADMM variables of one filter (DFT domain) and its penalty schedule position."""

    v_hat: np.ndarray
    theta_hat: np.ndarray
    gamma: float
    gamma_max: float
    gamma_growth: float
    iters: int = 0

    @classmethod
    def start(cls, shape, dtype, schedule: AdmmSchedule) -> "AdmmState":
        return cls(np.zeros(shape, dtype), np.zeros(shape, dtype), schedule.gamma0,
                   schedule.gamma_max, schedule.growth)

    def advance(self):
        self.gamma = min(self.gamma_max, self.gamma_growth * self.gamma)
        self.iters += 1


def augmented_lagrangian(w, w_other, state: AdmmState, x_hat, y: GaussianLabel,
                         support: Support, cfg: TrainConfig) -> float:
    """Value of the single-filter augmented Lagrangian at (w, v, theta)."""
    grid = y.grid
    T = grid[0] * grid[1]
    v = irfft2(state.v_hat, grid)
    theta = irfft2(state.theta_hat, grid)
    gap = v - lift(w, support, grid)
    resid = correlate(state.v_hat, x_hat, grid) - y.values
    return float(
        0.5 * np.sum(resid**2)
        + 0.5 * cfg.lam * np.sum(w**2)
        + 0.5 * cfg.mu * np.sum((w - w_other) ** 2)
        + T * np.sum(theta * gap)
        + 0.5 * state.gamma * T * np.sum(gap**2)
    )


# ---------------------------------------------------------------------------
# models and filters


@dataclass
class AppearanceModel:
    """Accumulated training samples for the context (g) and target (o) streams.

    The update is linear, so the samples may be held in either the spatial or
    the DFT domain.
    """

    x_g: np.ndarray
    x_o: np.ndarray


def update_model(model: AppearanceModel, x_g, x_o, eta_t: float) -> AppearanceModel:
    """Linear interpolation (1 - eta) * model + eta * sample, per stream."""
    if np.shape(x_g) != model.x_g.shape or np.shape(x_o) != model.x_o.shape:
        raise InvalidInput("sample and model shapes differ")
    return AppearanceModel((1.0 - eta_t) * model.x_g + eta_t * np.asarray(x_g),
                           (1.0 - eta_t) * model.x_o + eta_t * np.asarray(x_o))


@dataclass
class DualFilter:
    w_g: np.ndarray  # (rows, cols, D) on the support
    w_o: np.ndarray
    w_g_hat: np.ndarray  # half spectra of the lifted filters
    w_o_hat: np.ndarray
    support: Support
    grid: tuple[int, int]
    objective: float = float("nan")
    history: list = field(default_factory=list)

    @classmethod
    def from_spatial(cls, w_g, w_o, support: Support, grid, **kw) -> "DualFilter":
        return cls(w_g, w_o, lift_rfft2(w_g, support, grid), lift_rfft2(w_o, support, grid),
                   support, tuple(grid), **kw)


def dual_objective(w_g, w_o, x_g_hat, x_o_hat, y: GaussianLabel, support: Support,
                   cfg: TrainConfig) -> float:
    """Value of the mutually constrained dual regression objective."""
    grid = y.grid
    total = 0.5 * cfg.mu * np.sum((w_g - w_o) ** 2)
    for w, x_hat in ((w_g, x_g_hat), (w_o, x_o_hat)):
        resid = correlate(lift_rfft2(w, support, grid), x_hat, grid) - y.values
        total += 0.5 * np.sum(resid**2) + 0.5 * cfg.lam * np.sum(w**2)
    return float(total)


# ---------------------------------------------------------------------------
# training


class _Stream:
    """Per-filter training data and ADMM state."""

    def __init__(self, x_hat, y_hat, support, grid, schedule, real_dtype):
        self.x_hat = x_hat
        self.x_conj = x_hat.conj()
        self.s_x = np.einsum("ijc,ijc->ij", self.x_conj, x_hat).real
        self.y_hat = y_hat
        self.yx = y_hat[..., None] * x_hat
        self.state = AdmmState.start(x_hat.shape, x_hat.dtype, schedule)
        self.w = np.zeros((support.rows, support.cols, x_hat.shape[2]), dtype=real_dtype)
        self.w_hat = np.zeros_like(x_hat)
        self.support = support
        self.grid = grid
        self.T = grid[0] * grid[1]

    def rhs(self) -> np.ndarray:
        """Support crop of T*theta + gamma*T*v, the data-side numerator of the w-step."""
        st = self.state
        if st.iters == 0:
            return np.zeros_like(self.w)
        return crop_irfft2(self.T * st.theta_hat + st.gamma * self.T * st.v_hat, self.support, self.grid)

    def set_w(self, w):
        self.w = w.astype(self.w.dtype, copy=False)
        self.w_hat = lift_rfft2(self.w, self.support, self.grid)

    def v_theta_step(self):
        # same algebra as solve_v_subproblem / update_lagrangian, with the
        # per-training constants (conj(x), y*x, sum |x|^2) hoisted out
        st = self.state
        rho = st.gamma * self.T
        q = self.w_hat * rho
        q -= self.T * st.theta_hat
        coef = np.einsum("ijc,ijc->ij", self.x_conj, q)
        coef += self.y_hat * self.s_x
        coef /= rho * (self.s_x + rho)
        v = q
        v += self.yx
        v *= 1.0 / rho
        v -= self.x_hat * coef[..., None]
        st.v_hat = v
        st.theta_hat = st.theta_hat + st.gamma * (v - self.w_hat)
        st.advance()


def _as_array(x) -> np.ndarray:
    return np.asarray(getattr(x, "data", x))


def _joint_w_step(g: _Stream, o: _Stream, cfg: TrainConfig):
    # both filters share gamma; solve the 2x2 system per coefficient exactly
    gamma = g.state.gamma
    a = cfg.lam + cfg.mu + gamma * g.T
    det = (a - cfg.mu) * (a + cfg.mu)  # factored to avoid cancellation at large mu
    b_g, b_o = g.rhs(), o.rhs()
    g.set_w((a * b_g + cfg.mu * b_o) / det)
    o.set_w((a * b_o + cfg.mu * b_g) / det)


def _block_w_step(s: _Stream, other: _Stream, cfg: TrainConfig):
    s.set_w((cfg.mu * other.w + s.rhs()) / (cfg.lam + cfg.mu + s.state.gamma * s.T))


def train_dual_filters(x_g, x_o, y: GaussianLabel, cfg: TrainConfig, support: Support,
                       schedule: AdmmSchedule = AdmmSchedule(), *, fourier: bool = False,
                       monitor: bool | None = None) -> DualFilter:
    """Train the context and target-focused filters from fresh ADMM state.

    x_g, x_o are (rows, cols, D) feature maps (or their half spectra when
    ``fourier`` is set). The objective is evaluated after every outer pass
    when ``monitor`` is on (default: only for more than three passes); three
    consecutive increases emit a SolverWarning and the best pass is returned.
    """
    x_g, x_o = _as_array(x_g), _as_array(x_o)
    if x_g.shape != x_o.shape or x_g.ndim != 3:
        raise InvalidInput(f"feature maps must share a (rows, cols, D) shape, got {x_g.shape}, {x_o.shape}")
    if not (np.isfinite(x_g).all() and np.isfinite(x_o).all()):
        raise InvalidInput("non-finite values in the training features")
    grid = y.grid
    if fourier:
        x_g_hat, x_o_hat = x_g, x_o
        expected = (grid[0], grid[1] // 2 + 1)
    else:
        x_g_hat, x_o_hat = rfft2(x_g), rfft2(x_o)
        expected = grid
    if x_g.shape[:2] != tuple(expected):
        raise InvalidInput(f"feature grid {x_g.shape[:2]} does not match the label grid {grid}")
    if support.row < 0 or support.col < 0 or support.row + support.rows > grid[0] \
            or support.col + support.cols > grid[1]:
        raise InvalidInput(f"support {support} outside the {grid} grid")

    real_dtype = np.float32 if x_g_hat.dtype == np.complex64 else np.float64
    y_hat = y.dft.astype(x_g_hat.dtype, copy=False)
    g = _Stream(x_g_hat, y_hat, support, grid, schedule, real_dtype)
    o = _Stream(x_o_hat, y_hat, support, grid, schedule, real_dtype)

    if monitor is None:
        monitor = schedule.passes > 3
    history: list[float] = []
    best = None
    rises = 0

    fresh = False  # joint mode: w already reflects the latest v, theta and gamma
    for _ in range(schedule.passes):
        if schedule.coupling == "joint":
            for _ in range(schedule.iterations):
                if not fresh:
                    _joint_w_step(g, o, cfg)
                g.v_theta_step()
                o.v_theta_step()
                fresh = False
            _joint_w_step(g, o, cfg)
            fresh = True
        else:
            for s, other in ((g, o), (o, g)):
                for _ in range(schedule.iterations):
                    _block_w_step(s, other, cfg)
                    s.v_theta_step()
                _block_w_step(s, other, cfg)
        if monitor:
            value = dual_objective(g.w, o.w, x_g_hat, x_o_hat, y, support, cfg)
            if history and value > history[-1]:
                rises += 1
            else:
                rises = 0
            history.append(value)
            if best is None or value <= best[0]:
                best = (value, g.w.copy(), o.w.copy(), g.w_hat.copy(), o.w_hat.copy())
            if rises >= 3:
                warnings.warn("ADMM objective increased over three consecutive passes; "
                              "returning the best iterate", SolverWarning, stacklevel=2)
                break

    if monitor and best is not None and (rises >= 3 or best[0] < history[-1]):
        value, w_g, w_o, w_g_hat, w_o_hat = best
        return DualFilter(w_g, w_o, w_g_hat, w_o_hat, support, tuple(grid), value, history)
    objective = history[-1] if history else float("nan")
    return DualFilter(g.w, o.w, g.w_hat, o.w_hat, support, tuple(grid), objective, history)


# ---------------------------------------------------------------------------
# detection


@dataclass
class ResponseMap:
    values: np.ndarray  # fused response R
    context: np.ndarray  # response of w_g alone
    target: np.ndarray  # response of w_o alone
    psi: float


def detect(filters: DualFilter, z_g, z_o, psi: float, *, fourier: bool = False) -> ResponseMap:
    """Fused response R = R_g + psi * R_o of the two filters on detection features."""
    z_g, z_o = _as_array(z_g), _as_array(z_o)
    if z_g.shape != z_o.shape or z_g.shape[2:] != filters.w_g_hat.shape[2:]:
        raise InvalidInput(f"detection features {z_g.shape} do not match the filters")
    if not fourier:
        if z_g.shape[:2] != filters.grid:
            raise InvalidInput(f"detection grid {z_g.shape[:2]} != training grid {filters.grid}")
        z_g, z_o = rfft2(z_g), rfft2(z_o)
    elif z_g.shape != filters.w_g_hat.shape:
        raise InvalidInput(f"detection spectra {z_g.shape} != filter spectra {filters.w_g_hat.shape}")
    r_g = correlate(filters.w_g_hat, z_g, filters.grid)
    r_o = correlate(filters.w_o_hat, z_o, filters.grid)
    return ResponseMap(r_g + psi * r_o, r_g, r_o, psi)


class Peak(NamedTuple):
    dy: float  # cells, wrap-aware
    dx: float
    value: float
    low_confidence: bool


def _quad_fit(nb: np.ndarray) -> tuple[float, float, float, float, float]:
    """Least-squares quadratic f = c + bx x + by y + axx x^2 + ayy y^2 + axy x y on a 3x3 grid.

    Closed form via orthogonal polynomials; exactly zero slopes for symmetric neighbourhoods.
    """
    cols, rows = nb.sum(axis=0), nb.sum(axis=1)
    bx = (cols[2] - cols[0]) / 6.0
    by = (rows[2] - rows[0]) / 6.0
    axx = (cols[0] + cols[2] - 2.0 * cols[1]) / 6.0
    ayy = (rows[0] + rows[2] - 2.0 * rows[1]) / 6.0
    axy = (nb[2, 2] - nb[2, 0] - nb[0, 2] + nb[0, 0]) / 4.0
    return bx, by, axx, ayy, axy


def _parabola(fm: float, f0: float, fp: float) -> float:
    denom = fm - 2.0 * f0 + fp
    return 0.0 if denom >= 0 else float(np.clip(0.5 * (fm - fp) / denom, -0.5, 0.5))


def locate_peak(response) -> Peak:
    """Subcell peak of a response map; displacements wrap to [-T/2, T/2)."""
    r = np.asarray(getattr(response, "values", response), dtype=np.float64)
    if r.size == 0:
        raise InvalidInput("empty response map")
    rows, cols = r.shape
    if np.ptp(r) == 0:
        return Peak(0.0, 0.0, float(r.flat[0]), True)
    i, j = np.unravel_index(int(np.argmax(r)), r.shape)
    peak = float(r[i, j])

    nb = r[np.ix_([(i - 1) % rows, i, (i + 1) % rows], [(j - 1) % cols, j, (j + 1) % cols])]
    bx, by, axx, ayy, axy = _quad_fit(nb)
    hess = np.array([[2 * ayy, axy], [axy, 2 * axx]])
    ox = oy = None
    if hess[0, 0] < 0 and np.linalg.det(hess) > 0:
        oy, ox = np.linalg.solve(hess, [-by, -bx])
        if abs(oy) > 1 or abs(ox) > 1:
            ox = oy = None
    if ox is None:
        oy = _parabola(nb[0, 1], nb[1, 1], nb[2, 1]) if rows > 2 else 0.0
        ox = _parabola(nb[1, 0], nb[1, 1], nb[1, 2]) if cols > 2 else 0.0
    if rows < 3:
        oy = 0.0
    if cols < 3:
        ox = 0.0

    dy = (i + rows // 2) % rows - rows // 2 + oy
    dx = (j + cols // 2) % cols - cols // 2 + ox
    return Peak(float(dy), float(dx), peak, False)


__all__ = [
    "AdmmSchedule", "AdmmState", "AppearanceModel", "DAY_CONFIG", "DualFilter", "GaussianLabel",
    "NIGHT_CONFIG", "Peak", "ResponseMap", "Support", "TrainConfig", "augmented_lagrangian",
    "correlate", "crop_irfft2", "detect", "dual_objective", "gaussian_label", "irfft2", "lift", "lift_rfft2", "locate_peak",
    "rfft2", "solve_v_subproblem", "solve_w_subproblem", "train_dual_filters", "update_lagrangian",
    "update_model",
]
