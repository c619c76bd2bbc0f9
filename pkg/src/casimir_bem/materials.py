"""Material response at imaginary frequency.

Frequencies are wavenumbers xi/c in 1/um.  Conversion helpers accept rad/s
and eV.  All models return real positive (eps, mu) on the imaginary axis.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import MaterialError

C_UM_PER_S = 2.99792458e14          # speed of light in um/s
HBARC_EV_UM = 0.1973269804          # hbar*c in eV*um


def to_inverse_um(value, unit: str = "1/um"):
    """Convert a frequency to the internal wavenumber unit (1/um)."""
    unit = unit.strip().lower().replace(" ", "")
    if unit in ("1/um", "um^-1", "inverse_um"):
        return value
    if unit in ("rad/s", "rad_per_s"):
        return np.asarray(value) / C_UM_PER_S if np.ndim(value) else value / C_UM_PER_S
    if unit == "ev":
        return np.asarray(value) / HBARC_EV_UM if np.ndim(value) else value / HBARC_EV_UM
    raise MaterialError(f"unknown frequency unit {unit!r}")


class MaterialModel:
    """Base class; subclasses implement ``eps(xi)``."""

    is_pec = False
    mu_value = 1.0

    def eps(self, xi):
        raise NotImplementedError

    def mu(self, xi):
        return np.full_like(np.asarray(xi, dtype=float), self.mu_value) \
            if np.ndim(xi) else self.mu_value

    def eps_mu(self, xi):
        return self.eps(xi), self.mu(xi)


@dataclass(frozen=True)
class PEC(MaterialModel):
    """Perfect electric conductor marker; never evaluated."""

    is_pec = True

    def eps(self, xi):
        raise MaterialError("PEC bodies have no finite permittivity")

    def mu(self, xi):
        raise MaterialError("PEC bodies have no finite permeability")


@dataclass(frozen=True)
class Constant(MaterialModel):
    eps_value: float
    mu_value: float = 1.0

    def eps(self, xi):
        return np.full_like(np.asarray(xi, dtype=float), self.eps_value) \
            if np.ndim(xi) else float(self.eps_value)


@dataclass(frozen=True)
class Drude(MaterialModel):
    """eps(i xi) = 1 + wp^2 / (xi (xi + gamma)); wp, gamma in 1/um."""

    omega_p: float
    gamma: float = 0.0
    mu_value: float = 1.0

    def eps(self, xi):
        xi = np.asarray(xi, dtype=float) if np.ndim(xi) else float(xi)
        return 1.0 + self.omega_p ** 2 / (xi * (xi + self.gamma))


@dataclass(frozen=True)
class Oscillator:
    """One Lorentz term sigma / (omega0^2 + xi^2 + gamma xi)."""

    sigma: float
    omega0: float
    gamma: float = 0.0


@dataclass(frozen=True)
class LorentzSum(MaterialModel):
    eps_inf: float
    oscillators: tuple = ()
    mu_value: float = 1.0

    def eps(self, xi):
        xi = np.asarray(xi, dtype=float) if np.ndim(xi) else float(xi)
        out = self.eps_inf
        for o in self.oscillators:
            out = out + o.sigma / (o.omega0 ** 2 + xi * xi + o.gamma * xi)
        return out


def _loglog(x, xs, ys):
    lx = np.log(np.clip(x, xs[0], xs[-1]))
    return np.exp(np.interp(lx, np.log(xs), np.log(ys)))


@dataclass(frozen=True)
class Tabulated(MaterialModel):
    """Log-log interpolated table of eps (and optionally mu) versus xi.

    Outside the table the end values are held constant.
    """

    xi: tuple
    eps_values: tuple
    mu_values: tuple | None = None
    mu_value: float = 1.0
    _arrays: dict = field(default_factory=dict, compare=False, repr=False)

    def _arr(self, name):
        a = self._arrays.get(name)
        if a is None:
            a = self._arrays[name] = np.asarray(getattr(self, name), dtype=float)
        return a

    def eps(self, xi):
        r = _loglog(xi, self._arr("xi"), self._arr("eps_values"))
        return r if np.ndim(xi) else float(r)

    def mu(self, xi):
        if self.mu_values is None:
            return super().mu(xi)
        r = _loglog(xi, self._arr("xi"), self._arr("mu_values"))
        return r if np.ndim(xi) else float(r)


def validate_model(model: MaterialModel) -> MaterialModel:
    """Check parameter ranges; return the model unchanged if valid."""
    if isinstance(model, PEC):
        return model
    if not isinstance(model, MaterialModel):
        raise MaterialError(f"not a material model: {model!r}")
    mu = getattr(model, "mu_value", 1.0)
    if not (np.isfinite(mu) and mu > 0):
        raise MaterialError(f"mu must be positive, got {mu}")
    if isinstance(model, Constant):
        if not (np.isfinite(model.eps_value) and model.eps_value > 0):
            raise MaterialError(f"eps must be positive, got {model.eps_value}")
    elif isinstance(model, Drude):
        if model.omega_p < 0:
            raise MaterialError(f"omega_p must be non-negative, got {model.omega_p}")
        if model.gamma < 0:
            raise MaterialError(f"gamma must be non-negative, got {model.gamma}")
    elif isinstance(model, LorentzSum):
        if not model.eps_inf > 0:
            raise MaterialError(f"eps_inf must be positive, got {model.eps_inf}")
        for j, o in enumerate(model.oscillators):
            for name in ("sigma", "omega0", "gamma"):
                if getattr(o, name) < 0:
                    raise MaterialError(
                        f"oscillator {j}: {name} must be non-negative, got {getattr(o, name)}")
            if o.omega0 == 0 and o.gamma == 0 and o.sigma > 0:
                raise MaterialError(f"oscillator {j}: omega0 and gamma both zero")
    elif isinstance(model, Tabulated):
        xi = np.asarray(model.xi, dtype=float)
        if xi.ndim != 1 or len(xi) < 2:
            raise MaterialError("tabulated model needs at least two points")
        if np.any(np.diff(xi) <= 0):
            raise MaterialError("tabulated xi values must be strictly increasing")
        if xi[0] <= 0:
            raise MaterialError("tabulated xi values must be positive")
        for name in ("eps_values", "mu_values"):
            vals = getattr(model, name)
            if vals is None:
                continue
            vals = np.asarray(vals, dtype=float)
            if vals.shape != xi.shape:
                raise MaterialError(f"{name} has {len(vals)} entries, xi has {len(xi)}")
            if np.any(~(vals > 0)):
                raise MaterialError(f"{name} must be positive")
    return model


def eval_eps_mu(model: MaterialModel, xi: float):
    """Return (eps, mu) at imaginary frequency ``xi`` (1/um)."""
    if model.is_pec:
        raise MaterialError("PEC material queried for eps/mu")
    if not xi > 0:
        raise ValueError(f"xi must be positive, got {xi}")
    return model.eps_mu(xi)


def same_response(a: MaterialModel, b: MaterialModel, xi: float) -> bool:
    """True if both materials have identical (eps, mu) at ``xi``."""
    if a.is_pec or b.is_pec:
        return a.is_pec and b.is_pec
    return a.eps_mu(xi) == b.eps_mu(xi)


def load_table(path, unit: str = "1/um") -> Tabulated:
    """Two- or three-column ASCII table: xi, eps[, mu]."""
    try:
        data = np.loadtxt(Path(path), ndmin=2)
    except (OSError, ValueError) as exc:
        raise MaterialError(f"cannot read material table {path}: {exc}") from exc
    if data.shape[1] not in (2, 3):
        raise MaterialError(f"material table {path} must have 2 or 3 columns")
    xi = to_inverse_um(data[:, 0], unit)
    mu = tuple(data[:, 2]) if data.shape[1] == 3 else None
    return validate_model(Tabulated(tuple(xi), tuple(data[:, 1]), mu))


VACUUM = Constant(1.0, 1.0)
