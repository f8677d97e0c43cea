"""Periodic grid, Fourier differentiation, norms, and generic time-stepping kernels.

Everything downstream (KdV solvers, microscopic models, diagnostics) works on a
uniform periodic grid [0, L) with N points and uses the FFT for derivatives,
so this module is the single home for that plumbing.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "Grid",
    "Field",
    "Trajectory",
    "spectral_derivative",
    "hs_seminorms",
    "advance_linear",
    "rk4_step",
    "ifrk4_step",
    "integrate",
    "l2_norm",
    "dealiased_product",
    "pad_to",
    "truncate_to",
    "fourier_shift",
]


class Grid:
    """Uniform periodic grid on [0, L).

    Wavenumbers are the usual FFT layout k_j = 2*pi*j/L for j = 0,...,N/2-1,
    -N/2,...,-1 (numpy fftfreq ordering).
    """

    def __init__(self, n_points: int, length: float):
        n_points = int(n_points)
        length = float(length)
        if n_points < 8:
            raise ValueError(f"need at least 8 grid points, got {n_points}")
        if not length > 0:
            raise ValueError(f"domain length must be positive, got {length}")
        self.n_points = n_points
        self.length = length
        self.spacing = length / n_points
        self.x = np.arange(n_points) * self.spacing
        # 2*pi*fftfreq(N, d=L/N) gives integer multiples of 2*pi/L
        self.wavenumbers = 2.0 * np.pi * np.fft.fftfreq(n_points, d=self.spacing)

    def __eq__(self, other):
        return (
            isinstance(other, Grid)
            and self.n_points == other.n_points
            and self.length == other.length
        )

    def __hash__(self):
        return hash((self.n_points, self.length))

    def __repr__(self):
        return f"Grid(n_points={self.n_points}, length={self.length!r})"


class Field:
    """A sampled R^d- or C^d-valued function on a Grid.

    ``components`` is stored as a (d, N) array; real/complex flavor follows the
    dtype.  Arithmetic (+, -, scalar *) is supported so generic steppers can
    treat fields as vectors.
    """

    def __init__(self, grid: Grid, components, validate: bool = True):
        comps = np.asarray(components)
        if comps.ndim == 1:
            comps = comps[None, :]
        if comps.ndim != 2 or comps.shape[1] != grid.n_points:
            raise ValueError(
                f"components must be (d, {grid.n_points}), got {comps.shape}"
            )
        if comps.dtype.kind == "c":
            comps = comps.astype(np.complex128, copy=False)
        else:
            comps = comps.astype(np.float64, copy=False)
        if validate and not np.isfinite(comps).all():
            raise ValueError("field contains non-finite samples")
        self.grid = grid
        self.components = comps

    @property
    def dim(self) -> int:
        return self.components.shape[0]

    @property
    def is_real(self) -> bool:
        return self.components.dtype.kind != "c"

    @classmethod
    def zeros(cls, grid: Grid, dim: int = 1, complex_flavor: bool = False):
        dtype = np.complex128 if complex_flavor else np.float64
        return cls(grid, np.zeros((dim, grid.n_points), dtype=dtype), validate=False)

    def copy(self):
        return Field(self.grid, self.components.copy(), validate=False)

    def __add__(self, other):
        return Field(self.grid, self.components + other.components, validate=False)

    def __sub__(self, other):
        return Field(self.grid, self.components - other.components, validate=False)

    def __mul__(self, a):
        return Field(self.grid, self.components * a, validate=False)

    __rmul__ = __mul__

    def __neg__(self):
        return Field(self.grid, -self.components, validate=False)

    def __repr__(self):
        flavor = "real" if self.is_real else "complex"
        return f"Field(dim={self.dim}, {flavor}, grid={self.grid!r})"


class Trajectory:
    """Time-ordered snapshots of an evolution, plus abort bookkeeping.

    ``neighbors[i]``, when stored, holds the states one integrator step before
    and after ``states[i]`` so diagnostics can form centered time differences
    without re-running the solver.
    """

    def __init__(self):
        self.times: list[float] = []
        self.states: list = []
        self.neighbors: list | None = None
        self.dt: float | None = None
        self.aborted = False
        self.abort_reason: str | None = None
        self.abort_time: float | None = None
        self.meta: dict = {}

    def append(self, t: float, state, neighbor_pair=None):
        self.times.append(float(t))
        self.states.append(state)
        if neighbor_pair is not None:
            if self.neighbors is None:
                self.neighbors = []
            self.neighbors.append(neighbor_pair)

    def __len__(self):
        return len(self.states)


def _check_finite(f: Field, who: str):
    if not np.isfinite(f.components).all():
        raise ValueError(f"{who}: non-finite input field")


def spectral_derivative(f: Field, order: int) -> Field:
    """Fourier-collocation derivative d^order/dx^order of a Field.

    Exact for band-limited input; the derivative of a constant is identically
    zero.  For odd orders the Nyquist coefficient is zeroed (standard
    collocation convention, keeps real fields real).
    """
    if order < 0 or order > 4:
        raise ValueError(f"order must be in 0..4, got {order}")
    _check_finite(f, "spectral_derivative")
    if order == 0:
        return f.copy()
    k = f.grid.wavenumbers
    mult = (1j * k) ** order
    if order % 2 == 1 and f.grid.n_points % 2 == 0:
        mult = mult.copy()
        mult[f.grid.n_points // 2] = 0.0
    out = np.fft.ifft(mult * np.fft.fft(f.components, axis=-1), axis=-1)
    if f.is_real:
        out = out.real
    return Field(f.grid, out, validate=False)


def hs_seminorms(f: Field, s: int) -> list[float]:
    """L2 norms of f, f', ..., f^(s) computed via Parseval.

    Returns the list (||f||, ||dx f||, ..., ||dx^s f||); for multi-component
    fields each entry is the norm of the full vector-valued function.
    """
    if s < 0 or s > 4:
        raise ValueError(f"s must be in 0..4, got {s}")
    _check_finite(f, "hs_seminorms")
    grid = f.grid
    coeffs = np.fft.fft(f.components, axis=-1) / grid.n_points
    k = grid.wavenumbers
    out = []
    for j in range(s + 1):
        if j == 0:
            mult = np.ones_like(k)
        else:
            mult = k.astype(float) ** j
            if j % 2 == 1 and grid.n_points % 2 == 0:
                mult = mult.copy()
                mult[grid.n_points // 2] = 0.0
        power = np.sum(np.abs(mult * coeffs) ** 2)
        out.append(float(np.sqrt(grid.length * power)))
    return out


def advance_linear(f: Field, symbol, dt: float) -> Field:
    """Exact integrator of a Fourier-diagonal linear flow.

    Each mode is multiplied by exp(symbol(k)*dt).  ``symbol`` maps the
    wavenumber array to per-mode complex multipliers, e.g.
    symbol = lambda k: -1j*k**3/(8*c) for the quarter-Airy flow
    2c*dA/dt = (1/4)*dxxx A.
    """
    _check_finite(f, "advance_linear")
    sym = np.asarray(symbol(f.grid.wavenumbers), dtype=np.complex128)
    with np.errstate(over="ignore"):
        factor = np.exp(sym * dt)
    if not np.isfinite(factor).all():
        raise OverflowError("advance_linear: exp(symbol*dt) overflowed")
    out = np.fft.ifft(factor * np.fft.fft(f.components, axis=-1), axis=-1)
    if f.is_real:
        out = out.real
    return Field(f.grid, out, validate=False)


def rk4_step(state, rhs, dt: float):
    """One classical RK4 step for d/dt state = rhs(state).

    Works on anything supporting +, - and scalar multiplication (Field, plain
    ndarray).  Raises if the step produces non-finite values.
    """
    k1 = rhs(state)
    k2 = rhs(state + (0.5 * dt) * k1)
    k3 = rhs(state + (0.5 * dt) * k2)
    k4 = rhs(state + dt * k3)
    out = state + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    data = out.components if isinstance(out, Field) else np.asarray(out)
    if not np.isfinite(data).all():
        raise FloatingPointError("rk4_step: non-finite state produced")
    return out


def ifrk4_step(state: Field, symbol, nonlinear_rhs, dt: float) -> Field:
    """Integrating-factor RK4: linear part exact in Fourier, nonlinear part RK4.

    Integrates d/dt u = L u + N(u) where L is diagonal in Fourier with the
    given symbol and N is an arbitrary callable Field -> Field.  The scheme is
    classical RK4 applied to w = exp(-L t) u_hat, so the stiff linear part
    contributes no stability restriction.
    """
    grid = state.grid
    sym = np.asarray(symbol(grid.wavenumbers), dtype=np.complex128)
    e_half = np.exp(sym * (dt / 2.0))
    e_full = e_half * e_half
    real_in = state.is_real

    def to_phys(v_hat):
        u = np.fft.ifft(v_hat, axis=-1)
        if real_in:
            u = u.real
        return Field(grid, u, validate=False)

    v = np.fft.fft(state.components, axis=-1)
    n1 = np.fft.fft(nonlinear_rhs(state).components, axis=-1)
    u2 = to_phys(e_half * (v + (dt / 2.0) * n1))
    n2 = np.fft.fft(nonlinear_rhs(u2).components, axis=-1)
    u3 = to_phys(e_half * v + (dt / 2.0) * n2)
    n3 = np.fft.fft(nonlinear_rhs(u3).components, axis=-1)
    u4 = to_phys(e_full * v + dt * e_half * n3)
    n4 = np.fft.fft(nonlinear_rhs(u4).components, axis=-1)
    v_new = e_full * (v + (dt / 6.0) * n1) + (dt / 6.0) * (
        2.0 * e_half * (n2 + n3) + n4
    )
    out = to_phys(v_new)
    if not np.isfinite(out.components).all():
        raise FloatingPointError("ifrk4_step: non-finite state produced")
    return out


def integrate(values, grid: Grid) -> float:
    """Integral over [0, L) of grid samples (exact for trigonometric polynomials)."""
    return float(np.sum(values) * grid.spacing)


def l2_norm(values, grid: Grid) -> float:
    """L2 norm of (possibly multi-component, possibly complex) grid samples."""
    v = np.asarray(values)
    return float(np.sqrt(np.sum(np.abs(v) ** 2) * grid.spacing))


def pad_to(comps, m: int):
    """Spectrally interpolate samples onto a finer grid with m points.

    Zero-pads the spectrum; exact for band-limited data.  Used for dealiased
    products (pad, multiply pointwise, truncate back).
    """
    comps = np.atleast_2d(np.asarray(comps))
    n = comps.shape[-1]
    spec = np.fft.fft(comps, axis=-1)
    out = np.zeros(comps.shape[:-1] + (m,), dtype=np.complex128)
    half = n // 2
    out[..., :half] = spec[..., :half]
    if n % 2 == 0 and m > n:
        # split the Nyquist coefficient symmetrically so real data stays real
        out[..., m - half + 1 :] = spec[..., half + 1 :]
        out[..., half] = 0.5 * spec[..., half]
        out[..., m - half] = 0.5 * spec[..., half]
    else:
        out[..., m - half :] = spec[..., half:]
    phys = np.fft.ifft(out, axis=-1) * (m / n)
    if comps.dtype.kind != "c":
        phys = phys.real
    return phys


def truncate_to(comps, n: int):
    """Inverse of pad_to: project fine-grid samples back onto n modes."""
    comps = np.atleast_2d(np.asarray(comps))
    m = comps.shape[-1]
    spec = np.fft.fft(comps, axis=-1)
    out = np.zeros(comps.shape[:-1] + (n,), dtype=np.complex128)
    half = n // 2
    out[..., :half] = spec[..., :half]
    out[..., half:] = spec[..., m - half :]
    if n % 2 == 0 and m > n:
        # recombine the two halves of the split Nyquist mode
        out[..., half] = spec[..., half] + spec[..., m - half]
    phys = np.fft.ifft(out, axis=-1) * (n / m)
    if comps.dtype.kind != "c":
        phys = phys.real
    return phys


def _pad_size(n: int, factor: float) -> int:
    m = int(np.ceil(n * factor))
    return m + (m % 2)


def dealiased_product(a, b, factor: float = 1.5):
    """Pointwise product of two sample arrays, dealiased by zero-padding.

    factor=3/2 is the classical 2/3 rule, exact for quadratic nonlinearities;
    cubic terms need factor=2.
    """
    a = np.atleast_2d(np.asarray(a))
    b = np.atleast_2d(np.asarray(b))
    n = a.shape[-1]
    m = _pad_size(n, factor)
    prod = pad_to(a, m) * pad_to(b, m)
    return truncate_to(prod, n)


def fourier_shift(comps, grid: Grid, delta: float):
    """Translate samples by delta (f(x) -> f(x - delta)) via a spectral phase."""
    comps = np.atleast_2d(np.asarray(comps))
    phase = np.exp(-1j * grid.wavenumbers * delta)
    out = np.fft.ifft(phase * np.fft.fft(comps, axis=-1), axis=-1)
    if comps.dtype.kind != "c":
        out = out.real
    return out
