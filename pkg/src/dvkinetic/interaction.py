"""Interaction rates ``k`` and their boundedness classes.

A rate is of type 1 when it is bounded on every box ``[0, gamma]``, of type 2
when it blows up at the all-zero state but is bounded on ``[gamma, inf)``,
and of type 3 when it is bounded above and away from zero on every box
``[gamma1, gamma2]`` with ``gamma1 > 0``.

Rates are evaluated on stacked species arrays of shape ``(ncomp, *grid)``
where ``ncomp`` is 2 in one dimension and 6 in three.  The built-in kinds
depend on the species only through their sum, which the relaxation step
leaves invariant.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .errors import DomainError, UnboundedError, UnclassifiableError
from .fields import Field

# Boxes used to probe the declared bounds of custom rates.
_PROBE_BOXES = ((1e-3, 1e-2), (0.1, 1.0), (0.5, 2.0), (1.0, 10.0), (10.0, 1e3))


@dataclass(frozen=True)
class TypeFlags:
    is_type1: bool
    is_type2: bool
    is_type3: bool


def _ncomp(dim: int) -> int:
    if dim == 1:
        return 2
    if dim == 3:
        return 6
    raise ValueError(f"dim must be 1 or 3, got {dim}")


def _check_box(box):
    lo, hi = (float(b) for b in box)
    if not 0.0 <= lo <= hi:
        raise ValueError(f"need 0 <= gamma1 <= gamma2, got {box}")
    return lo, hi


class InteractionModel:
    kind = "abstract"
    density_only = True
    singular_at_zero = False

    def rate(self, species: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def kappa_bounds(self, box, dim: int = 1) -> tuple[float, float]:
        raise NotImplementedError

    def classify(self) -> TypeFlags:
        raise NotImplementedError

    def floor(self) -> Optional[tuple[float, float]]:
        """``(k1_inf, alpha)`` such that ``k >= k1_inf * (sum of species)**alpha``."""
        return None

    def descriptor(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class ConstantRate(InteractionModel):
    k0: float = 1.0
    kind = "constant"

    def __post_init__(self):
        if not (np.isfinite(self.k0) and self.k0 >= 0):
            raise ValueError(f"constant rate must be finite and >= 0, got {self.k0}")

    def rate(self, species):
        return np.full(np.shape(species)[1:], float(self.k0))

    def kappa_bounds(self, box, dim=1):
        _check_box(box)
        return float(self.k0), float(self.k0)

    def classify(self):
        return TypeFlags(True, False, self.k0 > 0)

    def floor(self):
        return (float(self.k0), 0.0) if self.k0 > 0 else None

    def descriptor(self):
        return {"model": "constant", "k0": float(self.k0)}


@dataclass(frozen=True)
class CarlemanRate(InteractionModel):
    """``k = u + v`` (sum of all six species in three dimensions)."""

    kind = "carleman"

    def rate(self, species):
        return np.sum(species, axis=0)

    def kappa_bounds(self, box, dim=1):
        lo, hi = _check_box(box)
        m = _ncomp(dim)
        return m * lo, m * hi

    def classify(self):
        return TypeFlags(True, False, True)

    def floor(self):
        return (1.0, 1.0)

    def descriptor(self):
        return {"model": "carleman"}


@dataclass(frozen=True, eq=False)
class PowerLawRate(InteractionModel):
    """``k = k1(x) * (sum of species)**alpha``; ``k1`` is a constant or a Field."""

    k1: Union[float, Field] = 1.0
    alpha: float = 0.0
    kind = "power_law"

    def __post_init__(self):
        lo, hi = self.k1_range
        if not (np.isfinite(hi) and lo > 0):
            raise ValueError(f"k1 must be finite with positive infimum, got range ({lo}, {hi})")
        if not np.isfinite(self.alpha):
            raise ValueError("alpha must be finite")

    @property
    def k1_range(self) -> tuple[float, float]:
        if isinstance(self.k1, Field):
            return float(self.k1.values.min()), float(self.k1.values.max())
        return float(self.k1), float(self.k1)

    @property
    def singular_at_zero(self):
        return self.alpha < 0

    def _k1_values(self):
        return self.k1.values if isinstance(self.k1, Field) else float(self.k1)

    def rate(self, species):
        total = np.sum(species, axis=0)
        if self.alpha < 0 and np.any(total == 0):
            raise DomainError("power-law rate with alpha < 0 is singular at the all-zero state")
        with np.errstate(divide="ignore"):
            return self._k1_values() * np.power(total, self.alpha)

    def kappa_bounds(self, box, dim=1):
        lo, hi = _check_box(box)
        m = _ncomp(dim)
        if lo == 0 and self.alpha < 0:
            raise UnboundedError("rate is unbounded near zero for alpha < 0; need gamma1 > 0")
        k1_lo, k1_hi = self.k1_range
        at_lo, at_hi = (m * lo) ** self.alpha, (m * hi) ** self.alpha
        if self.alpha >= 0:
            return k1_lo * at_lo, k1_hi * at_hi
        return k1_lo * at_hi, k1_hi * at_lo

    def classify(self):
        return TypeFlags(self.alpha >= 0, self.alpha < 0, True)

    def floor(self):
        return (self.k1_range[0], float(self.alpha))

    def descriptor(self):
        k1 = self.k1
        if isinstance(k1, Field):
            lo, hi = self.k1_range
            k1 = {"field": True, "inf": lo, "sup": hi}
        return {"model": "power_law", "alpha": float(self.alpha), "k1": k1}


class CustomRate(InteractionModel):
    """User-supplied rate.

    ``func(species)`` maps a stacked species array to rates.  ``bounds(box, dim)``
    must return certified ``(kappa_low, kappa_high)`` on the box; without it
    the model cannot be classified or used for certificates.
    """

    kind = "custom"

    def __init__(self, func: Callable[[np.ndarray], np.ndarray],
                 bounds: Optional[Callable] = None, singular_at_zero=False,
                 density_only=False, floor=None, name="custom"):
        self.func = func
        self.bounds = bounds
        self.singular_at_zero = bool(singular_at_zero)
        self.density_only = bool(density_only)
        self._floor = floor
        self.name = name

    def rate(self, species):
        species = np.asarray(species)
        if self.singular_at_zero and np.any(np.all(species == 0, axis=0)):
            raise DomainError(f"{self.name} is singular at the all-zero state")
        k = np.asarray(self.func(species), dtype=np.float64)
        if np.any(k < 0) or not np.all(np.isfinite(k)):
            raise DomainError(f"{self.name} produced a negative or non-finite rate")
        return np.broadcast_to(k, species.shape[1:])

    def kappa_bounds(self, box, dim=1):
        if self.bounds is None:
            raise UnclassifiableError(f"{self.name} declares no kappa bounds")
        lo, hi = _check_box(box)
        if lo == 0 and self.singular_at_zero:
            raise UnboundedError(f"{self.name} is unbounded near zero")
        k_lo, k_hi = self.bounds((lo, hi), dim)
        return float(k_lo), float(k_hi)

    def classify(self):
        if self.bounds is None:
            raise UnclassifiableError(f"{self.name} declares no kappa bounds")
        type3 = all(self.kappa_bounds(box)[0] > 0 for box in _PROBE_BOXES)
        if self.singular_at_zero:
            return TypeFlags(False, True, type3)
        type1 = all(np.isfinite(self.kappa_bounds((0.0, hi))[1]) for _, hi in _PROBE_BOXES)
        return TypeFlags(type1, False, type3)

    def floor(self):
        return self._floor

    def descriptor(self):
        return {"model": "custom", "name": self.name}


def evaluate(model: InteractionModel, values, cell=None) -> float:
    """Rate at one point; ``values`` holds the 2 or 6 species values.

    ``cell`` (an index tuple) selects ``k1(x)`` when the model carries a
    spatially varying coefficient.
    """
    vals = np.asarray(values, dtype=np.float64)
    if vals.shape not in ((2,), (6,)):
        raise ValueError("expected 2 (1D) or 6 (3D) species values")
    if np.any(vals < 0):
        raise DomainError("species values must be nonnegative")
    if isinstance(model, PowerLawRate) and isinstance(model.k1, Field):
        if cell is None:
            raise ValueError("position (cell index) required for spatially varying k1")
        total = vals.sum()
        if model.alpha < 0 and total == 0:
            raise DomainError("power-law rate with alpha < 0 is singular at the all-zero state")
        return float(model.k1.values[tuple(np.atleast_1d(cell))] * total**model.alpha)
    return float(model.rate(vals.reshape(-1, 1))[0])


def classify(model: InteractionModel) -> TypeFlags:
    return model.classify()


def kappa_bounds(model: InteractionModel, box, dim: int = 1) -> tuple[float, float]:
    return model.kappa_bounds(box, dim)


def from_descriptor(desc: dict) -> InteractionModel:
    kind = desc.get("model")
    if kind == "constant":
        return ConstantRate(float(desc.get("k0", 1.0)))
    if kind == "carleman":
        return CarlemanRate()
    if kind == "power_law":
        k1 = desc.get("k1", 1.0)
        if isinstance(k1, dict):
            raise ValueError("cannot rebuild a field-valued k1 from its descriptor")
        return PowerLawRate(float(k1), float(desc.get("alpha", 0.0)))
    raise ValueError(f"unknown model kind {kind!r}")
