"""Conservative finite-volume solver for diffusion under competing flux laws.

All laws are written as a face flux between periodic neighbours ``i`` and
``i+1`` at spacing ``h``:

=================  ==========================================================
law                face flux
=================  ==========================================================
``fick``           ``-k_f (u[i+1] - u[i]) / h``
``chapman``        ``-((k u)[i+1] - (k u)[i]) / h``
``vankampen``      ``-(D/T)_f ((T u)[i+1] - (T u)[i]) / h``
``randomwalk``     ``-(D_f / S_f) ((S u)[i+1] - (S u)[i]) / h``
``thermophoretic`` ``-D_f (u[i+1] - u[i]) / h - u_f D_T,f (T[i+1] - T[i]) / h``
=================  ==========================================================

Face values ``_f`` are arithmetic means of the two cells.  Products such as
``S u`` are formed at cell centres before differencing.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, NumericalError, UnsupportedCaseError
from .fields import DomainSpec, FieldGrid

log = logging.getLogger(__name__)

LAWS = ("fick", "chapman", "vankampen", "randomwalk", "thermophoretic")
CFL_SIGMA = 0.5


def _face_mean(a: np.ndarray, axis: int) -> np.ndarray:
    return 0.5 * (a + np.roll(a, -1, axis=axis))


def _forward_diff(a: np.ndarray, axis: int) -> np.ndarray:
    return np.roll(a, -1, axis=axis) - a


@dataclass(frozen=True)
class FluxLaw:
    """A flux law with its coefficient fields sampled on the solver grid."""

    tag: str
    domain: DomainSpec
    coeffs: dict = field(default_factory=dict)

    _REQUIRED = {
        "fick": ("kappa",),
        "chapman": ("kappa",),
        "vankampen": ("D", "T"),
        "randomwalk": ("D", "S"),
        "thermophoretic": ("D", "D_T", "T"),
    }

    def __post_init__(self):
        if self.tag not in LAWS:
            raise ConfigError(f"unknown flux law {self.tag!r}; choose from {LAWS}")
        fixed = {}
        for name in self._REQUIRED[self.tag]:
            if name not in self.coeffs:
                raise ConfigError(f"{self.tag} law needs coefficient {name!r}")
            v = self.coeffs[name]
            v = v.values if isinstance(v, FieldGrid) else v
            v = np.array(np.broadcast_to(np.asarray(v, dtype=float), self.domain.shape))
            if not np.all(np.isfinite(v)):
                raise NumericalError(f"coefficient {name} is not finite")
            if name != "D_T" and np.any(v <= 0):
                raise ConfigError(f"coefficient {name} must be strictly positive")
            v.setflags(write=False)
            fixed[name] = v
        object.__setattr__(self, "coeffs", fixed)

    @classmethod
    def fick(cls, domain, kappa):
        return cls("fick", domain, {"kappa": kappa})

    @classmethod
    def chapman(cls, domain, kappa):
        return cls("chapman", domain, {"kappa": kappa})

    @classmethod
    def van_kampen(cls, domain, D, T):
        return cls("vankampen", domain, {"D": D, "T": T})

    @classmethod
    def random_walk(cls, domain, D, S):
        return cls("randomwalk", domain, {"D": D, "S": S})

    @classmethod
    def thermophoretic(cls, domain, D, D_T, T):
        return cls("thermophoretic", domain, {"D": D, "D_T": D_T, "T": T})

    def __getitem__(self, name):
        return self.coeffs[name]

    @property
    def max_diffusivity(self) -> float:
        key = "kappa" if self.tag in ("fick", "chapman") else "D"
        return float(self.coeffs[key].max())

    def stable_dt(self, sigma: float = CFL_SIGMA) -> float:
        """``sigma h^2 / (2 n max D)`` with the smallest spacing."""
        h = min(self.domain.spacing)
        return sigma * h * h / (2 * self.domain.dim * self.max_diffusivity)


class _FaceOperator:
    """Precomputed face coefficients for repeated flux evaluation along every axis."""

    def __init__(self, law: FluxLaw):
        self.law = law
        self.dim = law.domain.dim
        self.h = law.domain.spacing
        c = law.coeffs
        self.faces = []
        for ax in range(self.dim):
            h = self.h[ax]
            if law.tag == "fick":
                self.faces.append((_face_mean(c["kappa"], ax) / h,))
            elif law.tag == "chapman":
                self.faces.append((1.0 / h,))
            elif law.tag == "vankampen":
                self.faces.append((_face_mean(c["D"], ax) / _face_mean(c["T"], ax) / h,))
            elif law.tag == "randomwalk":
                self.faces.append((_face_mean(c["D"], ax) / _face_mean(c["S"], ax) / h,))
            else:
                self.faces.append((_face_mean(c["D"], ax) / h,
                                   _face_mean(c["D_T"], ax) * _forward_diff(c["T"], ax) / h))

    def product(self, u: np.ndarray) -> np.ndarray:
        """The cell-centre quantity whose difference drives the flux."""
        c = self.law.coeffs
        if self.law.tag == "chapman":
            return c["kappa"] * u
        if self.law.tag == "vankampen":
            return c["T"] * u
        if self.law.tag == "randomwalk":
            return c["S"] * u
        return u

    def flux(self, u: np.ndarray, axis: int, prod: np.ndarray | None = None) -> np.ndarray:
        """Fluxes through faces ``i+1/2`` along ``axis``."""
        prod = self.product(u) if prod is None else prod
        coef = self.faces[axis]
        F = -coef[0] * _forward_diff(prod, axis)
        if self.law.tag == "thermophoretic":
            F -= _face_mean(u, axis) * coef[1]
        return F

    def divergence(self, u: np.ndarray) -> np.ndarray:
        """``-(div F)``: the discrete right-hand side ``du/dt``."""
        prod = self.product(u)
        out = np.zeros_like(u)
        for ax in range(self.dim):
            F = self.flux(u, ax, prod)
            out -= (F - np.roll(F, 1, axis=ax)) / self.h[ax]
        return out


def face_flux(law: FluxLaw, u, face) -> float:
    """Flux through one face, ``face = (axis, index)`` with ``index`` the left cell.

    In 1D ``face`` may be a bare cell index.
    """
    u = u.values if isinstance(u, FieldGrid) else np.asarray(u, dtype=float)
    if not isinstance(face, (tuple, list)):
        axis, index = 0, (int(face),)
    else:
        axis, index = int(face[0]), face[1]
        index = tuple(np.atleast_1d(index).astype(int))
    return float(_FaceOperator(law).flux(u.reshape(law.domain.shape), axis)[index])


def face_fluxes(law: FluxLaw, u, axis: int = 0) -> np.ndarray:
    """All face fluxes along one axis; entry ``i`` is the face between ``i`` and ``i+1``."""
    u = u.values if isinstance(u, FieldGrid) else np.asarray(u, dtype=float)
    return _FaceOperator(law).flux(u.reshape(law.domain.shape), axis)


def rhs(law: FluxLaw, u) -> np.ndarray:
    """Discrete ``du/dt`` at cell centres."""
    u = u.values if isinstance(u, FieldGrid) else np.asarray(u, dtype=float)
    return _FaceOperator(law).divergence(u.reshape(law.domain.shape))


@dataclass(frozen=True)
class SolverState:
    u: FieldGrid
    law: FluxLaw
    dt: float
    time: float = 0.0
    steps: int = 0
    residual: float = float("inf")
    initial_mass: float | None = None

    def __post_init__(self):
        if self.u.domain != self.law.domain:
            raise ConfigError("density and coefficient grids differ")
        if self.initial_mass is None:
            object.__setattr__(self, "initial_mass", self.u.mass)

    @classmethod
    def start(cls, law: FluxLaw, u0=None, dt: float | None = None, sigma: float = CFL_SIGMA):
        """Initial state; uniform density of mean 1 unless ``u0`` is given."""
        domain = law.domain
        if u0 is None:
            u0 = FieldGrid(domain, np.ones(domain.shape))
        elif not isinstance(u0, FieldGrid):
            u0 = FieldGrid(domain, u0)
        if np.any(u0.values < 0):
            raise ConfigError("initial density must be non-negative")
        limit = law.stable_dt(sigma)
        if dt is None:
            dt = limit
        elif dt > law.stable_dt(CFL_SIGMA) * (1 + 1e-12):
            raise ConfigError(f"dt={dt} violates the stability bound {law.stable_dt(CFL_SIGMA)}")
        return cls(u0, law, float(dt))

    @property
    def mass(self) -> float:
        return self.u.mass

    @property
    def mass_drift(self) -> float:
        """Relative change of total mass since the start."""
        return abs(self.mass - self.initial_mass) / abs(self.initial_mass)

    def normalized(self) -> FieldGrid:
        return self.u.normalized()


def _advance(op: _FaceOperator, u: np.ndarray, dt: float) -> np.ndarray:
    un = u + dt * op.divergence(u)
    if not np.all(np.isfinite(un)):
        raise NumericalError("solution became non-finite")
    if un.min() < 0:
        raise NumericalError(f"density became negative ({un.min():.3g})")
    return un


def step_explicit(state: SolverState) -> SolverState:
    """One forward-Euler step of the conservative update."""
    op = _FaceOperator(state.law)
    u = state.u.values
    un = _advance(op, u, state.dt)
    res = float(np.max(np.abs(un - u)) / state.dt)
    return replace(state, u=FieldGrid(state.u.domain, un), time=state.time + state.dt,
                   steps=state.steps + 1, residual=res)


def run_for(state: SolverState, t_final: float) -> SolverState:
    """Fixed-horizon stepping until ``time >= t_final`` (last step may overshoot by < dt)."""
    op = _FaceOperator(state.law)
    u = np.array(state.u.values)
    n = int(np.ceil((t_final - state.time) / state.dt - 1e-9))
    res = state.residual
    for _ in range(max(n, 0)):
        un = _advance(op, u, state.dt)
        res = float(np.max(np.abs(un - u)) / state.dt)
        u = un
    return replace(state, u=FieldGrid(state.u.domain, u), time=state.time + max(n, 0) * state.dt,
                   steps=state.steps + max(n, 0), residual=res)


def run_to_steady(state: SolverState, tol: float = 1e-10, max_steps: int = 10**8,
                  check_mass: bool = False, mass_tol: float = 1e-12) -> SolverState:
    """Iterate until ``max |u_new - u| / dt < tol``.

    A state that already satisfies the criterion is returned after the one
    step needed to measure it.  With ``check_mass`` the relative mass drift
    is verified after every step.
    """
    if not tol > 0:
        raise ConfigError("tolerance must be positive")
    op = _FaceOperator(state.law)
    u = np.array(state.u.values)
    vol = state.u.domain.cell_volume
    m0 = state.initial_mass
    n = 0
    res = float("inf")
    while n < max_steps:
        un = _advance(op, u, state.dt)
        res = float(np.max(np.abs(un - u)) / state.dt)
        u = un
        n += 1
        if check_mass and abs(u.sum() * vol - m0) > mass_tol * abs(m0):
            raise NumericalError(f"mass drift {abs(u.sum() * vol - m0) / abs(m0):.3g} after {n} steps")
        if res < tol:
            break
    else:
        raise NumericalError(f"no steady state after {max_steps} steps (residual {res:.3g})")
    log.debug("steady after %d steps, residual %.3g", n, res)
    return replace(state, u=FieldGrid(state.u.domain, u), time=state.time + n * state.dt,
                   steps=state.steps + n, residual=res)


def analytic_steady(law: FluxLaw, rtol: float = 1e-12) -> FieldGrid:
    """Mean-1 zero-flux state of ``law`` at cell centres.

    fick -> constant, chapman -> 1/kappa, vankampen -> 1/T,
    randomwalk -> 1/S, thermophoretic -> exp(-S_T T) for a constant Soret
    coefficient ``S_T = D_T / D``.
    """
    c = law.coeffs
    if law.tag == "fick":
        v = np.ones(law.domain.shape)
    elif law.tag == "chapman":
        v = 1.0 / c["kappa"]
    elif law.tag == "vankampen":
        v = 1.0 / c["T"]
    elif law.tag == "randomwalk":
        v = 1.0 / c["S"]
    else:
        st = c["D_T"] / c["D"]
        if np.ptp(st) > rtol * max(np.abs(st).max(), 1e-300) and np.ptp(c["T"]) > 0:
            raise UnsupportedCaseError(
                "closed-form thermophoretic steady state needs a constant Soret coefficient")
        st0 = float(st.mean())
        T = c["T"]
        v = np.exp(-st0 * (T - T.mean()))
    return FieldGrid(law.domain, v).normalized()
