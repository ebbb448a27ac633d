"""Scalar fields, walk profiles and the transport coefficients derived from them.

A walk is described by two position-dependent quantities, the walk length
``dx(x)`` and the traveling time ``dt(x)``.  Everything else follows::

    D = dx**2 / (2 n dt)        diffusivity
    S = dx / dt                 walk speed
    flux = -(D / S) grad(S u)   steady state u ~ 1 / S

With a temperature field the speed is tied to T by equipartition,
``S = c sqrt(T)``, which gives the thermal diffusivity ``D_T = (D/S) dS/dT``
and the Soret coefficient ``S_T = d ln S / dT``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, DomainError, NumericalError

K_B = 1.380649e-23  # J/K, exact SI value

# integer tags shared with the numba kernels in mc
PROFILE_KINDS = {"constant": 0, "paper-fig2": 1, "sqrt-temperature": 2, "sampled": 3}


@dataclass(frozen=True)
class DomainSpec:
    """Periodic box ``[0, extent_0) x ... `` split into uniform cells."""

    dim: int = 2
    cells: tuple[int, ...] = (50, 50)
    extent: tuple[float, ...] = (1.0, 1.0)

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ConfigError(f"dim must be 1 or 2, got {self.dim}")
        cells = tuple(int(c) for c in np.atleast_1d(self.cells))
        extent = tuple(float(e) for e in np.atleast_1d(self.extent))
        if len(cells) == 1 and self.dim == 2:
            cells = cells * 2
        if len(extent) == 1 and self.dim == 2:
            extent = extent * 2
        if len(cells) != self.dim or len(extent) != self.dim:
            raise ConfigError(f"cells {cells} / extent {extent} do not match dim={self.dim}")
        if min(cells) < 4:
            raise ConfigError(f"need at least 4 cells per axis, got {cells}")
        if min(extent) <= 0 or not all(math.isfinite(e) for e in extent):
            raise ConfigError(f"extent must be positive, got {extent}")
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "extent", extent)

    @classmethod
    def line(cls, cells: int = 100, length: float = 1.0) -> "DomainSpec":
        return cls(dim=1, cells=(cells,), extent=(length,))

    @classmethod
    def square(cls, cells: int = 50, side: float = 1.0) -> "DomainSpec":
        return cls(dim=2, cells=(cells, cells), extent=(side, side))

    @property
    def shape(self) -> tuple[int, ...]:
        return self.cells

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(e / c for e, c in zip(self.extent, self.cells))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def axis_centers(self, axis: int) -> np.ndarray:
        h = self.spacing[axis]
        return (np.arange(self.cells[axis]) + 0.5) * h

    def centers(self) -> np.ndarray:
        """Cell-centre coordinates, shape ``cells + (dim,)``."""
        axes = [self.axis_centers(a) for a in range(self.dim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack(mesh, axis=-1)

    def wrap(self, x) -> np.ndarray:
        """Fold positions into ``[0, extent)`` per axis."""
        x = np.asarray(x, dtype=float)
        ext = np.asarray(self.extent)
        y = x - ext * np.floor(x / ext)
        return np.where(y >= ext, y - ext, y)

    def with_cells(self, cells) -> "DomainSpec":
        return DomainSpec(dim=self.dim, cells=tuple(np.atleast_1d(cells)), extent=self.extent)


@dataclass(frozen=True)
class FieldGrid:
    """Cell-centred scalar field; ``values[i, j]`` sits at ``(x_i, y_j)``."""

    domain: DomainSpec
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.size != int(np.prod(self.domain.cells)):
            raise ConfigError(
                f"{v.size} values do not fill a grid of {self.domain.cells} cells")
        v = v.reshape(self.domain.shape)
        if not np.all(np.isfinite(v)):
            raise NumericalError("field contains non-finite values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, domain: DomainSpec, fn: Callable[[np.ndarray], np.ndarray]) -> "FieldGrid":
        """Sample ``fn`` at cell centres; ``fn`` receives an array (..., dim)."""
        return cls(domain, fn(domain.centers()))

    @property
    def mean(self) -> float:
        return float(self.values.mean())

    @property
    def mass(self) -> float:
        return float(self.values.sum() * self.domain.cell_volume)

    def normalized(self) -> "FieldGrid":
        """Rescale to mean 1 over the domain."""
        m = self.values.mean()
        if not m > 0:
            raise NumericalError(f"cannot mean-normalise a field with mean {m}")
        return FieldGrid(self.domain, self.values / m)

    def interpolate(self, x) -> np.ndarray:
        """Periodic (bi)linear interpolation at positions of shape (..., dim)."""
        x = np.asarray(x, dtype=float)
        v = self.values
        if self.domain.dim == 1:
            x = x[..., 0] if x.ndim and x.shape[-1] == 1 else x
            n = self.domain.cells[0]
            s = self.domain.wrap(x[..., None])[..., 0] / self.domain.spacing[0] - 0.5
            i0 = np.floor(s).astype(int)
            w = s - i0
            return (1 - w) * v[i0 % n] + w * v[(i0 + 1) % n]
        nx, ny = self.domain.cells
        xw = self.domain.wrap(x)
        sx = xw[..., 0] / self.domain.spacing[0] - 0.5
        sy = xw[..., 1] / self.domain.spacing[1] - 0.5
        i0 = np.floor(sx).astype(int)
        j0 = np.floor(sy).astype(int)
        wx = sx - i0
        wy = sy - j0
        i1, j1 = (i0 + 1) % nx, (j0 + 1) % ny
        i0, j0 = i0 % nx, j0 % ny
        return ((1 - wx) * (1 - wy) * v[i0, j0] + wx * (1 - wy) * v[i1, j0]
                + (1 - wx) * wy * v[i0, j1] + wx * wy * v[i1, j1])


@dataclass(frozen=True)
class WalkProfile:
    """Position-dependent walk length and traveling time.

    Built-in analytic profiles are selected by ``kind``; ``params`` holds
    their coefficients in the order listed in each constructor.  Sampled
    profiles carry two :class:`FieldGrid` objects and are interpolated
    bilinearly.
    """

    kind: str
    params: tuple[float, ...] = ()
    dx_grid: FieldGrid | None = None
    dt_grid: FieldGrid | None = None

    def __post_init__(self):
        if self.kind not in PROFILE_KINDS:
            raise ConfigError(f"unknown walk profile {self.kind!r}")
        if self.kind == "sampled":
            if self.dx_grid is None or self.dt_grid is None:
                raise ConfigError("sampled profile needs both dx and dt grids")
            if self.dx_grid.domain != self.dt_grid.domain:
                raise ConfigError("dx and dt grids live on different domains")
            if self.dx_grid.values.min() <= 0 or self.dt_grid.values.min() <= 0:
                raise ConfigError("sampled walk length and time must be positive")
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))

    @classmethod
    def constant(cls, dx: float = 0.01, dt: float = 0.01) -> "WalkProfile":
        return cls("constant", (dx, dt))

    @classmethod
    def paper_fig2(cls, scale: float = 0.02, offset: float = 0.2, center: float = 0.5) -> "WalkProfile":
        """``dx = scale (offset + r^2)``, ``dt = scale (offset + r^2)^2``, r = |x - center|."""
        return cls("paper-fig2", (scale, offset, center))

    @classmethod
    def sqrt_temperature(cls, D: float = 0.005, t0: float = 1.0, t1: float = 1.0) -> "WalkProfile":
        """Constant D with ``S = sqrt(T)`` and ``T = t0 + t1 * x`` along the first axis.

        ``dx = 2 n D / S`` and ``dt = dx / S`` reproduce the requested D and S.
        """
        return cls("sqrt-temperature", (D, t0, t1))

    @classmethod
    def sampled(cls, dx_grid: FieldGrid, dt_grid: FieldGrid) -> "WalkProfile":
        return cls("sampled", (), dx_grid, dt_grid)

    @classmethod
    def from_name(cls, name: str, **kwargs) -> "WalkProfile":
        builders = {"constant": cls.constant, "paper-fig2": cls.paper_fig2,
                    "sqrt-temperature": cls.sqrt_temperature}
        try:
            return builders[name](**kwargs)
        except KeyError:
            raise ConfigError(f"unknown walk profile {name!r}; choose from {sorted(builders)}") from None

    @property
    def kind_id(self) -> int:
        return PROFILE_KINDS[self.kind]

    def temperature(self, x) -> np.ndarray:
        """Temperature behind a ``sqrt-temperature`` profile (x wrapped to [0, 1))."""
        if self.kind != "sqrt-temperature":
            raise ConfigError(f"profile {self.kind!r} carries no temperature")
        x = np.asarray(x, dtype=float)
        first = x[..., 0] if x.ndim else x
        _, t0, t1 = self.params
        return t0 + t1 * (first - np.floor(first))

    def evaluate(self, x) -> tuple[np.ndarray, np.ndarray]:
        """Walk length and traveling time at positions of shape (..., dim)."""
        x = np.asarray(x, dtype=float)
        if x.ndim == 0:
            x = x[None]
        n = x.shape[-1]
        if self.kind == "constant":
            dx = np.full(x.shape[:-1], self.params[0])
            dt = np.full(x.shape[:-1], self.params[1])
        elif self.kind == "paper-fig2":
            scale, offset, center = self.params
            xw = x - np.floor(x)
            a = offset + np.sum((xw - center) ** 2, axis=-1)
            dx = scale * a
            dt = scale * a * a
        elif self.kind == "sqrt-temperature":
            D = self.params[0]
            T = self.temperature(x)
            if np.any(T <= 0):
                raise DomainError("sqrt-temperature profile reached T <= 0")
            S = np.sqrt(T)
            dx = 2 * n * D / S
            dt = dx / S
        else:
            dx = self.dx_grid.interpolate(x)
            dt = self.dt_grid.interpolate(x)
        if not (np.all(np.isfinite(dx)) and np.all(np.isfinite(dt))):
            raise NumericalError(f"walk profile {self.kind!r} is not finite at the requested points")
        return dx, dt

    def grid_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """Sampled grids for the kernels (1x1 dummies for analytic profiles)."""
        if self.kind == "sampled":
            gdx = self.dx_grid.values
            gdt = self.dt_grid.values
            if gdx.ndim == 1:
                gdx, gdt = gdx[:, None], gdt[:, None]
            return np.ascontiguousarray(gdx), np.ascontiguousarray(gdt)
        dummy = np.ones((1, 1))
        return dummy, dummy

    def min_dt(self, domain: DomainSpec, samples: int = 257) -> float:
        """Smallest traveling time over a fine sample of the domain."""
        if self.kind == "sampled":
            return float(self.dt_grid.values.min())
        axes = [np.linspace(0.0, e, samples, endpoint=False) for e in domain.extent]
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        return float(self.evaluate(pts)[1].min())

    def validate(self, domain: DomainSpec, samples: int = 129) -> None:
        """Check positivity, finiteness and ``dx < extent / 2`` on a sample."""
        axes = [np.linspace(0.0, e, samples, endpoint=False) for e in domain.extent]
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        dx, dt = self.evaluate(pts)
        if dx.min() <= 0 or dt.min() <= 0:
            raise ConfigError("walk length and traveling time must be positive")
        if dx.max() >= 0.5 * min(domain.extent):
            raise ConfigError("walk length must stay below half the domain extent")


@dataclass(frozen=True)
class ViscosityModel:
    """``eta(T) = eta0 (T / T0)**s``; ``s = 0`` gives a constant viscosity."""

    eta0: float = 8.9e-4
    T0: float = 298.0
    s: float = 0.75

    def __post_init__(self):
        if self.eta0 <= 0 or self.T0 <= 0:
            raise DomainError("viscosity eta0 and reference T0 must be positive")
        if self.s != 0 and not 0.5 < self.s < 1.0:
            raise ConfigError(f"power-law exponent s must lie in (1/2, 1), got {self.s}")

    def __call__(self, T):
        return self.eta0 * (np.asarray(T, dtype=float) / self.T0) ** self.s


@dataclass(frozen=True)
class PhysicalParams:
    k_B: float = K_B
    M: float = 1.0e-15          # kg
    R: float = 1.0e-6           # m
    viscosity: ViscosityModel = field(default_factory=ViscosityModel)
    c: float = 1.0              # S = c sqrt(T) in nondimensional mode

    def __post_init__(self):
        for name in ("k_B", "M", "R", "c"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive")

    @property
    def speed_scale(self) -> float:
        """``sqrt(k_B / M)`` from equipartition."""
        return math.sqrt(self.k_B / self.M)


@dataclass(frozen=True)
class SpeedModel:
    """Walk speed as a function of temperature, ``S(T) = scale * shape(T)``.

    ``shape=None`` selects the built-in ``sqrt(T)`` with an analytic
    derivative; any other callable is differentiated by central differences
    with relative step ``rel_step``.
    """

    scale: float = 1.0
    shape: Callable[[np.ndarray], np.ndarray] | None = None
    rel_step: float = 1e-6

    def __call__(self, T):
        T = np.asarray(T, dtype=float)
        if self.shape is None:
            if np.any(T <= 0):
                raise DomainError("temperature must be positive")
            return self.scale * np.sqrt(T)
        return self.scale * np.asarray(self.shape(T), dtype=float)

    def derivative(self, T):
        T = np.asarray(T, dtype=float)
        if self.shape is None:
            if np.any(T <= 0):
                raise DomainError("temperature must be positive")
            return self.scale * 0.5 / np.sqrt(T)
        h = self.rel_step * np.maximum(np.abs(T), 1e-300)
        d = (self(T + h) - self(T - h)) / (2 * h)
        if not np.all(np.isfinite(d)):
            raise NumericalError("speed model derivative is not finite")
        return d


def eval_profile(profile: WalkProfile, x) -> tuple[float, float]:
    dx, dt = profile.evaluate(np.atleast_1d(np.asarray(x, dtype=float)))
    return float(dx), float(dt)


def diffusivity(profile: WalkProfile, x, n: int | None = None):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    n = x.shape[-1] if n is None else n
    if n not in (1, 2):
        raise ConfigError(f"dimension must be 1 or 2, got {n}")
    dx, dt = profile.evaluate(x)
    if np.any(dt == 0):
        raise NumericalError("zero traveling time")
    D = dx * dx / (2 * n * dt)
    return float(D) if np.ndim(D) == 0 else D


def walk_speed(profile: WalkProfile, x):
    dx, dt = profile.evaluate(np.atleast_1d(np.asarray(x, dtype=float)))
    if np.any(dt == 0):
        raise NumericalError("zero traveling time")
    S = dx / dt
    return float(S) if np.ndim(S) == 0 else S


def _values(obj) -> np.ndarray:
    return obj.values if isinstance(obj, FieldGrid) else np.asarray(obj, dtype=float)


def _like(template, values):
    return FieldGrid(template.domain, values) if isinstance(template, FieldGrid) else values


def speed_from_temperature(T, params: PhysicalParams | None = None, nondimensional: bool = True):
    """``S = c sqrt(T)``; ``c = 1`` (or ``params.c``) nondimensionally, ``sqrt(k_B/M)`` otherwise."""
    params = params or PhysicalParams()
    t = _values(T)
    if np.any(t <= 0):
        raise DomainError("temperature must be positive everywhere")
    c = params.c if nondimensional else params.speed_scale
    return _like(T, c * np.sqrt(t))


def einstein_diffusivity(T, params: PhysicalParams | None = None, eta=None):
    """Stokes-Einstein ``kappa = k_B T / (6 pi eta R)``.

    ``eta`` overrides the power-law viscosity of ``params`` with a constant.
    """
    params = params or PhysicalParams()
    t = _values(T)
    if np.any(t <= 0):
        raise DomainError("temperature must be positive")
    visc = params.viscosity(t) if eta is None else np.asarray(eta, dtype=float)
    if np.any(visc <= 0):
        raise DomainError("viscosity must be positive")
    return _like(T, params.k_B * t / (6 * np.pi * visc * params.R))


def thermal_diffusivity(D, S_of_T: SpeedModel, T):
    """``D_T = (D / S) dS/dT``."""
    t = _values(T)
    S = S_of_T(t)
    dS = S_of_T.derivative(t)
    out = _values(D) / S * dS
    if not np.all(np.isfinite(out)):
        raise NumericalError("thermal diffusivity is not finite")
    return _like(T, out) if isinstance(T, FieldGrid) else (float(out) if np.ndim(out) == 0 else out)


def soret_coefficient(S_of_T: SpeedModel, T):
    """``S_T = (1/S) dS/dT = d ln S / dT``."""
    t = _values(T)
    out = S_of_T.derivative(t) / S_of_T(t)
    if not np.all(np.isfinite(out)):
        raise NumericalError("Soret coefficient is not finite")
    return _like(T, out) if isinstance(T, FieldGrid) else (float(out) if np.ndim(out) == 0 else out)


@dataclass(frozen=True)
class CoefficientSet:
    D: np.ndarray
    S: np.ndarray
    D_T: np.ndarray
    S_T: np.ndarray

    def __post_init__(self):
        if np.any(np.asarray(self.D) <= 0) or np.any(np.asarray(self.S) <= 0):
            raise DomainError("D and S must be positive")


def coefficients(T, D, S_of_T: SpeedModel | None = None) -> CoefficientSet:
    """All transport coefficients on a temperature field for a given diffusivity."""
    S_of_T = S_of_T or SpeedModel()
    t = _values(T)
    d = np.broadcast_to(np.asarray(_values(D), dtype=float), t.shape)
    return CoefficientSet(D=d, S=S_of_T(t), D_T=thermal_diffusivity(d, S_of_T, t),
                          S_T=soret_coefficient(S_of_T, t))


def theoretical_steady_state(S, domain: DomainSpec | None = None) -> FieldGrid:
    """Mean-1 normalised ``1/S`` at cell centres.

    ``S`` may be a FieldGrid, an array on ``domain``, a :class:`WalkProfile`
    or a callable of positions (..., dim).
    """
    if isinstance(S, FieldGrid):
        domain, s = S.domain, S.values
    else:
        if domain is None:
            raise ConfigError("a domain is required unless S is a FieldGrid")
        if isinstance(S, WalkProfile):
            s = walk_speed(S, domain.centers())
        elif callable(S):
            s = np.asarray(S(domain.centers()), dtype=float)
        else:
            s = np.broadcast_to(np.asarray(S, dtype=float), domain.shape)
    if np.any(s == 0):
        raise DomainError("walk speed vanishes somewhere")
    if np.any(s < 0):
        raise DomainError("walk speed must be positive")
    return FieldGrid(domain, 1.0 / s).normalized()


def as_points(x: Sequence[float] | np.ndarray) -> np.ndarray:
    return np.atleast_1d(np.asarray(x, dtype=float))
