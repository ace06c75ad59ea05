"""Cavity input-output reflection coefficients and the photon-atom gates
they induce.

A single-photon pulse reflecting off a low-Q cavity containing a three-level
atom picks up a polarization-dependent phase: the circular component that
couples to the atomic transition sees the dressed cavity response r, the
orthogonal component sees the empty-cavity response r0.  The difference of
the two phases is the Faraday rotation.  At the working point
omega_0 = omega_c, omega_p = omega_c - kappa/2, lambda = kappa/2, gamma = 0
the responses are exactly r = -1 and r0 = i.

All frequencies and rates are dimensionless, expressed in units of the
cavity damping rate kappa (kappa = 1 by convention); the reflection
coefficients depend only on such ratios.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from . import qstate

_SINGULAR = 1e-300

# diagonal basis orders for the photon-atom gates
BASIS_4 = ("L0", "L1", "R0", "R1")
BASIS_8 = ("L00", "L01", "L10", "L11", "R00", "R01", "R10", "R11")


@dataclass(frozen=True)
class CavityParams:
    """Cavity, atom and probe-pulse parameters in units of kappa.

    omega_c : cavity resonance frequency
    omega_0 : atomic transition frequency
    omega_p : frequency of the single-photon pulse
    kappa   : cavity damping rate (the unit scale, > 0)
    gamma   : atomic damping rate (>= 0)
    lam     : atom-cavity coupling strength (>= 0)
    """

    omega_c: float
    omega_0: float
    omega_p: float
    kappa: float = 1.0
    gamma: float = 0.0
    lam: float = 0.0

    def __post_init__(self):
        vals = (self.omega_c, self.omega_0, self.omega_p,
                self.kappa, self.gamma, self.lam)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("cavity parameters must be finite")
        if self.kappa <= 0:
            raise ValueError(f"kappa must be positive, got {self.kappa}")
        if self.gamma < 0:
            raise ValueError(f"gamma must be non-negative, got {self.gamma}")
        if self.lam < 0:
            raise ValueError(f"lambda must be non-negative, got {self.lam}")

    @classmethod
    def ideal_point(cls, kappa: float = 1.0) -> "CavityParams":
        """Working point giving exactly theta = pi and theta_0 = pi/2."""
        return cls(omega_c=0.0, omega_0=0.0, omega_p=-kappa / 2,
                   kappa=kappa, gamma=0.0, lam=kappa / 2)


def reflection(params: CavityParams) -> complex:
    """Reflection coefficient r(omega_p) of the atom-coupled cavity.

    r = ([i(w_c-w_p) - k/2][i(w_0-w_p) + g/2] + lam^2)
        / ([i(w_c-w_p) + k/2][i(w_0-w_p) + g/2] + lam^2)
    """
    dc = params.omega_c - params.omega_p
    d0 = params.omega_0 - params.omega_p
    hk = params.kappa / 2
    hg = params.gamma / 2
    atom = 1j * d0 + hg
    num = (1j * dc - hk) * atom + params.lam**2
    den = (1j * dc + hk) * atom + params.lam**2
    if abs(den) < _SINGULAR:
        raise ValueError("singular cavity parameters: reflection denominator ~ 0")
    return complex(num / den)


def empty_reflection(params: CavityParams) -> complex:
    """Empty-cavity reflection r0(omega_p), a pure phase for any detuning."""
    dc = params.omega_c - params.omega_p
    hk = params.kappa / 2
    return complex((1j * dc - hk) / (1j * dc + hk))


@dataclass(frozen=True)
class FaradayPhases:
    """Reflection phases (branch cut (-pi, pi]) and magnitudes."""

    theta: float
    theta_0: float
    mag_r: float
    mag_r0: float

    @property
    def faraday_rotation(self) -> float:
        return self.theta - self.theta_0


def phases(params: CavityParams) -> FaradayPhases:
    r = reflection(params)
    r0 = empty_reflection(params)
    return FaradayPhases(theta=cmath.phase(r), theta_0=cmath.phase(r0),
                         mag_r=abs(r), mag_r0=abs(r0))


@dataclass(frozen=True)
class PhotonAtomGate:
    """Diagonal operator on photon (x) one or two atoms.

    The diagonal is stored in basis order {|L0>,|L1>,|R0>,|R1>} (dim 4) or
    the analogous lexicographic order {|L00>,...,|R11>} (dim 8), photon
    factor most significant, L = 0, R = 1.
    """

    diagonal: np.ndarray = field(repr=False)

    def __post_init__(self):
        diag = np.asarray(self.diagonal, dtype=complex)
        if diag.ndim != 1 or diag.shape[0] not in (4, 8):
            raise ValueError("gate diagonal must have length 4 or 8")
        if not np.isfinite(diag).all():
            raise ValueError("gate diagonal must be finite")
        object.__setattr__(self, "diagonal", diag)

    @property
    def dim(self) -> int:
        return self.diagonal.shape[0]

    def matrix(self) -> np.ndarray:
        return np.diag(self.diagonal)

    def is_unitary(self, tol: float = 1e-12) -> bool:
        return bool(np.all(np.abs(np.abs(self.diagonal) - 1.0) <= tol))


def single_cavity_gate(params: CavityParams) -> PhotonAtomGate:
    """Photon-atom gate of one reflection event.

    The photon component whose polarization matches the atomic ground state
    (L with |0>, R with |1>) acquires r; the other component sees the empty
    cavity and acquires r0, giving the diagonal (r, r0, r0, r).
    """
    r = reflection(params)
    r0 = empty_reflection(params)
    return PhotonAtomGate(np.array([r, r0, r0, r]))


def ideal_gate() -> PhotonAtomGate:
    """Exact working-point gate diag(-1, i, i, -1), no formula evaluation."""
    return PhotonAtomGate(np.array([-1, 1j, 1j, -1], dtype=complex))


def two_cavity_gate(g1: PhotonAtomGate, g2: PhotonAtomGate) -> PhotonAtomGate:
    """Sequential reflection off two cavities sharing the same photon.

    The photon first reflects off cavity 1 (photon (x) atom1), then cavity 2
    (photon (x) atom2).  Both factors are diagonal, so the composite is the
    entrywise product d[p,a1,a2] = g1[p,a1] * g2[p,a2] in the dim-8 basis.
    """
    if g1.dim != 4 or g2.dim != 4:
        raise ValueError("two_cavity_gate needs two dim-4 gates")
    d1 = g1.diagonal.reshape(2, 2)
    d2 = g2.diagonal.reshape(2, 2)
    diag = np.einsum("pa,pb->pab", d1, d2).reshape(8)
    return PhotonAtomGate(diag)


@dataclass(frozen=True)
class ParityCheckEntry:
    atoms: tuple[int, int]
    parity: str               # "even" or "odd"
    expected: str             # "flip" or "identity"
    global_phase: complex | None
    residual: float
    passed: bool


@dataclass(frozen=True)
class ParityCheckReport:
    entries: tuple[ParityCheckEntry, ...]
    tolerance: float
    passed: bool


def parity_action_check(gate: PhotonAtomGate,
                        tol: float = 1e-12) -> ParityCheckReport:
    """Verify the composite gate acts as an atomic parity check.

    For photon input (|L>+|R>)/sqrt(2): on even-parity atoms (|00>, |11>)
    the photon must exit as (|L>-|R>)/sqrt(2) up to a global phase; on
    odd-parity atoms (|01>, |10>) it must exit unchanged up to a global
    phase.  The report lists the global phase and residual per atom state.
    """
    if gate.dim != 8:
        raise ValueError("parity_action_check needs a dim-8 gate")
    d = gate.diagonal.reshape(2, 2, 2)  # (photon, atom1, atom2)
    entries = []
    for a1 in (0, 1):
        for a2 in (0, 1):
            amp_l, amp_r = d[0, a1, a2], d[1, a1, a2]
            even = (a1 ^ a2) == 0
            expected = "flip" if even else "identity"
            # flip: output proportional to (|L>-|R>); identity: to (|L>+|R>)
            target_r = -amp_l if even else amp_l
            residual = float(abs(amp_r - target_r))
            phase = amp_l if abs(amp_l) > tol else None
            entries.append(ParityCheckEntry(
                atoms=(a1, a2),
                parity="even" if even else "odd",
                expected=expected,
                global_phase=complex(phase) if phase is not None else None,
                residual=residual,
                passed=residual <= tol and phase is not None,
            ))
    return ParityCheckReport(entries=tuple(entries), tolerance=tol,
                             passed=all(e.passed for e in entries))
