"""Dense multi-qubit linear algebra: tensor products, subsystem operators,
partial trace, projective measurement and fidelity.

Conventions used throughout the package:

* Qubit 0 is the most significant factor of the state index, i.e. the
  basis state |q0 q1 ... q_{n-1}> sits at index q0*2^(n-1) + ... + q_{n-1}.
* States are 1-D complex vectors, operators and density matrices are 2-D
  complex arrays.  All functions are pure: inputs are never mutated.
* Everything is dense.  Dimensions are capped at 2**12; the purification
  protocol needs at most 2**6 = 64.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DIM_CAP = 2**12

# single-qubit staples
I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
KET0 = np.array([1, 0], dtype=complex)
KET1 = np.array([0, 1], dtype=complex)


def _as_complex(a) -> np.ndarray:
    arr = np.asarray(a, dtype=complex)
    if not np.isfinite(arr).all():
        raise ValueError("non-finite amplitude (NaN/Inf) in state or operator")
    return arr


def num_qubits(dim: int) -> int:
    """Number of qubit factors for a dimension that must be a power of two."""
    n = int(dim).bit_length() - 1
    if dim <= 0 or 2**n != dim:
        raise ValueError(f"dimension {dim} is not a power of two")
    return n


def kron(*factors) -> np.ndarray:
    """Kronecker product of vectors or operators, left factor most significant.

    Raises ValueError if the resulting dimension would exceed DIM_CAP.
    """
    if not factors:
        raise ValueError("kron needs at least one factor")
    out = _as_complex(factors[0])
    for f in factors[1:]:
        f = _as_complex(f)
        if out.shape[0] * f.shape[0] > DIM_CAP:
            raise ValueError(
                f"kron result dimension exceeds cap {DIM_CAP}"
            )
        out = np.kron(out, f)
    return out


def normalize(psi) -> np.ndarray:
    psi = _as_complex(psi)
    nrm = np.linalg.norm(psi)
    if nrm == 0:
        raise ValueError("cannot normalize the zero vector")
    return psi / nrm


def density(psi) -> np.ndarray:
    """Rank-one density matrix |psi><psi|."""
    psi = _as_complex(psi)
    return np.outer(psi, psi.conj())


def reorder_qubits(state: np.ndarray, order) -> np.ndarray:
    """Permute tensor factors of a state vector or density matrix.

    ``order[k]`` is the input factor that ends up at output position k,
    so ``reorder_qubits(kron(a, b), (1, 0)) == kron(b, a)``.
    """
    state = _as_complex(state)
    n = num_qubits(state.shape[0])
    order = tuple(order)
    if sorted(order) != list(range(n)):
        raise ValueError(f"order {order} is not a permutation of 0..{n - 1}")
    if state.ndim == 1:
        return state.reshape((2,) * n).transpose(order).reshape(-1)
    if state.ndim == 2 and state.shape[0] == state.shape[1]:
        axes = order + tuple(n + k for k in order)
        t = state.reshape((2,) * (2 * n)).transpose(axes)
        return t.reshape(state.shape)
    raise ValueError("state must be a vector or a square matrix")


def embed(op: np.ndarray, targets, n: int) -> np.ndarray:
    """Embed an operator acting on ``targets`` into the full n-qubit space.

    ``targets`` lists the qubit positions (distinct, most significant factor
    of ``op`` first).  Returns the full 2^n x 2^n matrix.
    """
    op = _as_complex(op)
    targets = list(targets)
    if len(set(targets)) != len(targets):
        raise ValueError(f"duplicate targets {targets}")
    if any(t < 0 or t >= n for t in targets):
        raise ValueError(f"targets {targets} outside 0..{n - 1}")
    k = len(targets)
    if op.shape != (2**k, 2**k):
        raise ValueError(
            f"operator dimension {op.shape} does not match {k} target qubit(s)"
        )
    if 2**n > DIM_CAP:
        raise ValueError(f"embedding dimension exceeds cap {DIM_CAP}")
    rest = [q for q in range(n) if q not in targets]
    big = np.kron(op, np.eye(2 ** (n - k), dtype=complex))
    # big acts on factor order targets+rest; route back to natural order
    current = targets + rest
    inverse = [current.index(q) for q in range(n)]
    return reorder_qubits(big, inverse)


def apply_on(state: np.ndarray, op: np.ndarray, targets) -> np.ndarray:
    """Apply ``op`` to the listed qubits of a pure state or density matrix.

    Pure states map as psi -> U psi, density matrices as rho -> U rho U+.
    """
    state = _as_complex(state)
    n = num_qubits(state.shape[0])
    full = embed(op, targets, n)
    if state.ndim == 1:
        return full @ state
    if state.ndim == 2 and state.shape[0] == state.shape[1]:
        return full @ state @ full.conj().T
    raise ValueError("state must be a vector or a square matrix")


def partial_trace(rho: np.ndarray, keep) -> np.ndarray:
    """Trace out all qubits not in ``keep``.

    Output factor order follows the order given in ``keep``.
    """
    rho = _as_complex(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError("partial_trace expects a square matrix")
    n = num_qubits(rho.shape[0])
    keep = list(keep)
    if not keep:
        raise ValueError("keep list must not be empty")
    if len(set(keep)) != len(keep) or any(q < 0 or q >= n for q in keep):
        raise ValueError(f"invalid keep list {keep} for {n} qubits")
    drop = [q for q in range(n) if q not in keep]
    t = rho.reshape((2,) * (2 * n))
    # contract each dropped row axis with its column partner
    for q in sorted(drop, reverse=True):
        nq = t.ndim // 2
        t = np.trace(t, axis1=q, axis2=q + nq)
    # remaining row axes are in ascending qubit order; restore requested order
    remaining = sorted(keep)
    perm = [remaining.index(q) for q in keep]
    m = len(keep)
    t = t.transpose(tuple(perm) + tuple(m + p for p in perm))
    return t.reshape(2**m, 2**m)


@dataclass(frozen=True)
class MeasureBranch:
    """One outcome of a projective measurement.

    ``state`` is the renormalized post-measurement density matrix, or None
    when the branch has (numerically) zero probability.
    """

    outcome: int
    probability: float
    state: np.ndarray | None

    @property
    def zero_probability(self) -> bool:
        return self.state is None


_ZERO_BRANCH = 1e-15


def measure(rho: np.ndarray, target: int, basis=None) -> list[MeasureBranch]:
    """Projectively measure one qubit of a density matrix.

    ``basis`` is a pair of orthonormal single-qubit kets (defaults to the
    computational basis).  Returns one MeasureBranch per outcome; the
    probabilities sum to the trace of ``rho``.  Zero-probability branches
    carry ``state=None`` instead of a divided-by-zero state.
    """
    rho = _as_complex(rho)
    n = num_qubits(rho.shape[0])
    if basis is None:
        basis = (KET0, KET1)
    b0, b1 = (_as_complex(b) for b in basis)
    gram = np.array(
        [
            [np.vdot(b0, b0), np.vdot(b0, b1)],
            [np.vdot(b1, b0), np.vdot(b1, b1)],
        ]
    )
    if not np.allclose(gram, np.eye(2), atol=1e-12):
        raise ValueError("measurement basis is not orthonormal within 1e-12")
    branches = []
    for outcome, ket in enumerate((b0, b1)):
        proj = embed(np.outer(ket, ket.conj()), [target], n)
        sub = proj @ rho @ proj
        p = float(np.trace(sub).real)
        if p < _ZERO_BRANCH:
            branches.append(MeasureBranch(outcome, max(p, 0.0), None))
        else:
            branches.append(MeasureBranch(outcome, p, sub / p))
    return branches


def fidelity_with(rho: np.ndarray, psi: np.ndarray) -> float:
    """Overlap <psi|rho|psi> of a density matrix with a pure state."""
    rho = _as_complex(rho)
    psi = _as_complex(psi)
    if rho.shape != (psi.shape[0], psi.shape[0]):
        raise ValueError(
            f"dimension mismatch: rho {rho.shape}, psi {psi.shape}"
        )
    val = np.vdot(psi, rho @ psi)
    if abs(val.imag) > 1e-12:
        raise ValueError(f"fidelity has imaginary residue {val.imag:.3e}")
    return float(val.real)


def is_hermitian(a: np.ndarray, tol: float = 1e-12) -> bool:
    return bool(np.allclose(a, a.conj().T, atol=tol))


def is_unitary(a: np.ndarray, tol: float = 1e-12) -> bool:
    return bool(np.allclose(a @ a.conj().T, np.eye(a.shape[0]), atol=tol))


def check_density(rho: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Validate Hermiticity, unit trace and positivity (eigenvalue floor -1e-10)."""
    rho = _as_complex(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError("density matrix must be square")
    if not is_hermitian(rho, tol):
        raise ValueError("density matrix is not Hermitian within tolerance")
    tr = np.trace(rho)
    if abs(tr - 1.0) > tol:
        raise ValueError(f"density matrix trace {tr} is not 1 within {tol}")
    if np.linalg.eigvalsh(rho).min() < -1e-10:
        raise ValueError("density matrix has an eigenvalue below -1e-10")
    return rho
