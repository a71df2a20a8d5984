"""Scaling curves: a time statistic sampled over the bifurcation distance."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

import numpy as np


class Provenance(enum.Enum):
    SSA = "SSA"
    HAMILTONIAN = "HamiltonianEnsemble"
    QUADRATURE = "Quadrature"


@dataclass
class ScalingCurve:
    """Points ``(phi, value, spread, n)`` plus their provenance.

    ``flags`` holds one string per point (empty when the point is fine).  A
    flagged point may carry ``nan`` as its value; :meth:`usable` drops those.
    """

    phi: np.ndarray
    value: np.ndarray
    spread: np.ndarray
    n: np.ndarray
    provenance: Provenance
    ensemble: str = ""
    omega: Optional[float] = None
    model: str = ""
    flags: list = field(default_factory=list)
    # per-point ExtinctionStats for SSA curves
    stats: Optional[list] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.phi = np.asarray(self.phi, dtype=float).reshape(-1)
        self.value = np.asarray(self.value, dtype=float).reshape(-1)
        self.spread = np.asarray(self.spread, dtype=float).reshape(-1)
        self.n = np.asarray(self.n, dtype=np.int64).reshape(-1)
        if not self.flags:
            self.flags = [""] * len(self.phi)
        sizes = {len(self.phi), len(self.value), len(self.spread), len(self.n), len(self.flags)}
        if len(sizes) != 1:
            raise ValueError("curve columns differ in length")
        if np.any(self.phi <= 0) or np.any(np.diff(self.phi) <= 0):
            raise ValueError("phi must be strictly positive and strictly increasing")
        ok = np.isfinite(self.value)
        if np.any(self.value[ok] <= 0):
            raise ValueError("curve values must be > 0")

    def __len__(self):
        return len(self.phi)

    @classmethod
    def empty(cls, provenance: Provenance, **kw) -> "ScalingCurve":
        z = np.zeros(0)
        return cls(z, z, z, np.zeros(0, dtype=np.int64), provenance, **kw)

    def _take(self, mask) -> "ScalingCurve":
        idx = np.flatnonzero(mask)
        return ScalingCurve(self.phi[idx], self.value[idx], self.spread[idx], self.n[idx],
                            self.provenance, self.ensemble, self.omega, self.model,
                            [self.flags[i] for i in idx],
                            None if self.stats is None else [self.stats[i] for i in idx])

    def usable(self) -> "ScalingCurve":
        """Points with a finite value and no flag."""
        return self._take(np.isfinite(self.value) & np.array([not f for f in self.flags], dtype=bool))

    def window(self, lo: float, hi: float) -> "ScalingCurve":
        # small relative slack so grid end points survive round-off
        return self._take((self.phi >= lo * (1 - 1e-9)) & (self.phi <= hi * (1 + 1e-9)))

    def normalized(self, level: float) -> "ScalingCurve":
        return ScalingCurve(self.phi, self.value / level, self.spread / level, self.n,
                            self.provenance, self.ensemble, self.omega, self.model, list(self.flags))
