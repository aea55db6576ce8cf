"""Truncated Taylor representation of the semilinear term a(x, z) = sum_l c_l(x) z^l."""

from __future__ import annotations

from dataclasses import dataclass, field
from math import factorial

import numpy as np

from .errors import AnalyticityError, DomainError
from .fields import ComplexField
from .geometry import DiskGrid


@dataclass(frozen=True, eq=False)
class NonlinearityModel:
    """Taylor data of a(x, z) on a shared grid.

    Stores the derivative fields d^l a(., 0) for l = 1..L; the series
    coefficients are c_l = d^l a(., 0) / l!.  ``eta`` defaults to 1/(2 c0) and
    ``eta_defaulted`` records that choice.
    """

    grid: DiskGrid
    derivs: tuple
    c0: float
    R: float
    eta: float | None = None
    eta_defaulted: bool = field(init=False, default=False)
    coeffs: tuple = field(init=False, repr=False)

    def __post_init__(self):
        derivs = tuple(np.asarray(c, dtype=complex) for c in self.derivs)
        if not derivs:
            raise DomainError("model needs at least one coefficient")
        for c in derivs:
            if c.shape != (len(self.grid),):
                raise DomainError("coefficient fields must live on the model grid")
        if not self.c0 > 0:
            raise DomainError("c0 must be positive")
        object.__setattr__(self, "derivs", derivs)
        object.__setattr__(self, "coeffs", tuple(d / factorial(l) for l, d in enumerate(derivs, start=1)))
        if self.eta is None:
            object.__setattr__(self, "eta", 1.0 / (2.0 * self.c0))
            object.__setattr__(self, "eta_defaulted", True)
        elif not self.eta > 0:
            raise DomainError("eta must be positive")

    @property
    def L(self):
        return len(self.derivs)

    @classmethod
    def from_derivatives(cls, grid, derivatives, c0, R=None, eta=None):
        """Build from the fields d^l a(., 0), l = 1, 2, ..."""
        return cls(grid, tuple(derivatives), c0, grid.R if R is None else R, eta)

    @classmethod
    def from_coefficients(cls, grid, coeffs, c0, R=None, eta=None):
        """Build from the series coefficients c_l."""
        derivs = [factorial(l) * np.asarray(c, dtype=complex) for l, c in enumerate(coeffs, start=1)]
        return cls(grid, tuple(derivs), c0, grid.R if R is None else R, eta)

    def _eta_arg(self):
        return None if self.eta_defaulted else self.eta

    @classmethod
    def zero(cls, grid, L=1, c0=1.0, R=None, eta=None):
        return cls(grid, tuple(np.zeros(len(grid), dtype=complex) for _ in range(L)), c0,
                   grid.R if R is None else R, eta)

    def with_coefficient(self, l, derivative):
        """Copy with d^l a(., 0) replaced (the order grows if needed)."""
        derivs = list(self.derivs)
        while len(derivs) < l:
            derivs.append(np.zeros(len(self.grid), dtype=complex))
        derivs[l - 1] = np.asarray(derivative, dtype=complex)
        return NonlinearityModel(self.grid, tuple(derivs), self.c0, self.R, self._eta_arg())

    def truncated(self, L):
        return NonlinearityModel(self.grid, self.derivs[:L], self.c0, self.R, self._eta_arg())

    def is_zero(self):
        return all(not np.any(c) for c in self.derivs)

    def evaluate_values(self, z):
        """Horner evaluation of sum_l c_l z^l on raw node values."""
        z = np.asarray(z, dtype=complex)
        if np.max(np.abs(z), initial=0.0) >= self.eta:
            raise AnalyticityError(
                f"|z| = {np.max(np.abs(z)):.3g} reached the analyticity radius eta = {self.eta:.3g}")
        acc = np.zeros_like(z)
        for c in reversed(self.coeffs):
            acc = (acc + c) * z
        return acc

    def evaluate(self, z: ComplexField) -> ComplexField:
        if z.grid is not self.grid:
            raise DomainError("field must live on the model grid")
        return ComplexField(self.grid, self.evaluate_values(z.values))

    def derivative_coefficient(self, l) -> ComplexField:
        """d^l a(., 0) = l! c_l."""
        if not 1 <= l <= self.L:
            raise DomainError(f"order {l} outside 1..{self.L}")
        return ComplexField(self.grid, self.derivs[l - 1])


@dataclass
class ValidationReport:
    clauses: dict
    details: dict
    notes: list

    @property
    def passed(self):
        return all(self.clauses.values())

    def lines(self):
        out = []
        for key in ("i", "ii", "iii", "iv"):
            out.append(f"({key}) {'pass' if self.clauses[key] else 'FAIL'}: {self.details[key]}")
        out.extend(f"note: {n}" for n in self.notes)
        return out


def validate_assumption(model: NonlinearityModel, rtol=1e-12) -> ValidationReport:
    """Check the standing assumptions on a(x, z) for the truncated model."""
    clauses, details, notes = {}, {}, []
    clauses["i"] = True
    details["i"] = "a(x,0) = 0 holds by construction (series starts at l = 1)"
    clauses["ii"] = bool(model.eta > 0)
    details["ii"] = f"eta = {model.eta:.6g}"
    if model.eta_defaulted:
        notes.append("eta not given; defaulted to 1/(2 c0)")
    roots = []
    for l, dl in enumerate(model.derivs, start=1):
        sup = np.max(np.abs(dl), initial=0.0)
        roots.append(sup ** (1.0 / l))
    growth = max(roots)
    clauses["iii"] = bool(growth <= model.c0 * (1 + rtol))
    details["iii"] = f"max_l sup|d^l a|^(1/l) = {growth:.6g} vs c0 = {model.c0:.6g}"
    outside = model.grid.radii >= model.R
    bad = [l for l, c in enumerate(model.derivs, start=1) if np.any(c[outside] != 0)]
    clauses["iv"] = not bad
    details["iv"] = (f"all coefficients vanish for |x| >= R = {model.R:.6g}" if not bad
                     else f"orders {bad} nonzero outside B_R (R = {model.R:.6g})")
    return ValidationReport(clauses, details, notes)
