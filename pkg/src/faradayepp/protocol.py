"""One purification round on two noisy atomic Bell pairs, exactly and by
Monte Carlo sampling, plus the scalar fidelity-iteration map.

Protocol summary.  Alice holds atoms a1, a2 and Bob holds b1, b2; pair
(a1, b1) and pair (a2, b2) are each in a Bell-diagonal mixed state.  Each
party sends one photon prepared in (|L>+|R>)/sqrt(2) through both local
cavities, applies a Hadamard to the photon and detects it behind a PBS.
The run is kept when both photons show the same polarization letter.  The
parties then Hadamard and measure atoms a2 and b2; on antisymmetric
outcomes (01/10) Bob applies a phase flip to b1.  The surviving pair
(a1, b1) has fidelity F' = F^2 / (F^2 + (1-F)^2) for bit-flip-error input
of fidelity F.

Register order is fixed as (p1, p2, a1, a2, b1, b2), qubit 0 most
significant; photon L = 0, R = 1.

Detector naming: D1/D2 are Alice's PBS transmitted (L) / reflected (R)
arms, D3/D4 Bob's.  The keep rule "same letter on both sides" is the
invariant content of the coincidence condition D1D3-or-D2D4; which letter
accompanies which output state is a convention fixed by the Hadamard
matrix used here (direct composition), not a separate physical input.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import qstate
from .faraday import PhotonAtomGate, ideal_gate, two_cavity_gate

_SQRT2 = math.sqrt(2)

BELL_LABELS = ("phi_plus", "psi_plus", "phi_minus", "psi_minus")

_BELL_KETS = {
    "phi_plus": np.array([1, 0, 0, 1], dtype=complex) / _SQRT2,
    "psi_plus": np.array([0, 1, 1, 0], dtype=complex) / _SQRT2,
    "phi_minus": np.array([1, 0, 0, -1], dtype=complex) / _SQRT2,
    "psi_minus": np.array([0, 1, -1, 0], dtype=complex) / _SQRT2,
}

DETECTOR_PATTERNS = (("L", "L"), ("L", "R"), ("R", "L"), ("R", "R"))
ATOM_PATTERNS = ((0, 0), (0, 1), (1, 0), (1, 1))

_ZERO_BRANCH = 1e-15


def bell_ket(label: str) -> np.ndarray:
    """Two-qubit Bell state |phi+->, |psi+-> by label."""
    try:
        return _BELL_KETS[label].copy()
    except KeyError:
        raise ValueError(f"unknown Bell label {label!r}; use one of {BELL_LABELS}")


def same_polarization(alice: str, bob: str) -> bool:
    """Keep rule: both PBS outputs show the same polarization letter."""
    return alice == bob


@dataclass(frozen=True)
class BellMixture:
    """Bell-diagonal two-qubit mixture, weights ordered (phi+, psi+, phi-, psi-).

    The bit-flip-error state of fidelity F is (F, 1-F, 0, 0); the
    phase-flip-error state is (F, 0, 1-F, 0).
    """

    p_phi_plus: float
    p_psi_plus: float
    p_phi_minus: float
    p_psi_minus: float

    def __post_init__(self):
        w = self.as_array()
        if not np.isfinite(w).all():
            raise ValueError("Bell weights must be finite")
        if (w < 0).any():
            raise ValueError(f"Bell weights must be non-negative, got {tuple(w)}")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError(f"Bell weights must sum to 1, got {w.sum()!r}")

    def as_array(self) -> np.ndarray:
        return np.array([self.p_phi_plus, self.p_psi_plus,
                         self.p_phi_minus, self.p_psi_minus], dtype=float)

    @classmethod
    def bit_flip(cls, fidelity: float) -> "BellMixture":
        """F |phi+><phi+| + (1-F) |psi+><psi+|."""
        return cls(fidelity, 1.0 - fidelity, 0.0, 0.0)

    @classmethod
    def phase_flip(cls, fidelity: float) -> "BellMixture":
        """F |phi+><phi+| + (1-F) |phi-><phi-|."""
        return cls(fidelity, 0.0, 1.0 - fidelity, 0.0)


def bell_mixture_to_density(m: BellMixture) -> np.ndarray:
    """4x4 density matrix sum_i p_i |B_i><B_i| in the Bell basis."""
    rho = np.zeros((4, 4), dtype=complex)
    for weight, label in zip(m.as_array(), BELL_LABELS):
        if weight:
            ket = _BELL_KETS[label]
            rho += weight * np.outer(ket, ket.conj())
    return rho


@dataclass(frozen=True)
class RoundConfig:
    """Gates and rules of one purification round.

    gate            : dim-8 diagonal photon-atom gate applied per side
    photon_hadamard : 2x2 unitary applied to each photon before the PBS
    atom_hadamard   : 2x2 unitary applied to atoms a2 and b2 before readout
    keep_rule       : detector-letter predicate deciding post-selection
    """

    gate: PhotonAtomGate
    photon_hadamard: np.ndarray = field(repr=False)
    atom_hadamard: np.ndarray = field(repr=False)
    keep_rule: Callable[[str, str], bool] = same_polarization

    def __post_init__(self):
        if self.gate.dim != 8:
            raise ValueError("round gate must act on photon and two atoms (dim 8)")
        for name in ("photon_hadamard", "atom_hadamard"):
            h = np.asarray(getattr(self, name), dtype=complex)
            if h.shape != (2, 2) or not qstate.is_unitary(h, 1e-12):
                raise ValueError(f"{name} must be a 2x2 unitary within 1e-12")
            object.__setattr__(self, name, h)


def default_round_config() -> RoundConfig:
    """Ideal working-point gates and standard Hadamards."""
    return RoundConfig(
        gate=two_cavity_gate(ideal_gate(), ideal_gate()),
        photon_hadamard=qstate.HADAMARD.copy(),
        atom_hadamard=qstate.HADAMARD.copy(),
    )


@dataclass(frozen=True)
class RoundOutcome:
    """One (detector pattern, atom pattern) branch of a round.

    ``branch_probability`` is the unconditional probability of the branch;
    over all 16 branches these sum to 1 for unitary gates (and to the
    photon-survival probability for lossy ones).  ``post_state`` is the
    renormalized 4x4 density matrix of pair (a1, b1), present only for kept
    branches of nonzero probability.
    """

    detector_pattern: tuple[str, str]
    atom_pattern: tuple[int, int]
    kept: bool
    branch_probability: float
    correction_applied: bool
    post_state: np.ndarray | None


@dataclass(frozen=True)
class RoundSummary:
    kept_probability: float
    kept_fidelity: float | None
    total_probability: float


PHI_PLUS = _BELL_KETS["phi_plus"]


def _pure_round_branches(ket1: np.ndarray, ket2: np.ndarray,
                         cfg: RoundConfig) -> dict:
    """Evolve one pure Bell-pair combination through the round.

    ket1 lives on (a1, b1), ket2 on (a2, b2).  Returns a dict mapping
    (d1, d2, ma, mb) to (probability, post ket on (a1, b1) or None).
    """
    plus = np.array([1, 1], dtype=complex) / _SQRT2
    # amplitudes indexed (p1, p2, a1, a2, b1, b2)
    psi = np.einsum("p,q,xy,uv->pqxuyv", plus, plus,
                    ket1.reshape(2, 2), ket2.reshape(2, 2))
    g = cfg.gate.diagonal.reshape(2, 2, 2)
    psi = psi * g.reshape(2, 1, 2, 2, 1, 1)   # photon 1 with (a1, a2)
    psi = psi * g.reshape(1, 2, 1, 1, 2, 2)   # photon 2 with (b1, b2)
    hp = cfg.photon_hadamard
    psi = np.einsum("ap,pqxuyv->aqxuyv", hp, psi)
    psi = np.einsum("bq,aqxuyv->abxuyv", hp, psi)
    ha = cfg.atom_hadamard
    branches = {}
    for d1 in (0, 1):
        for d2 in (0, 1):
            sub = psi[d1, d2]                       # (a1, a2, b1, b2)
            sub = np.einsum("ma,xayb->xmyb", ha, sub)
            sub = np.einsum("nb,xmyb->xmyn", ha, sub)
            for ma in (0, 1):
                for mb in (0, 1):
                    vec = sub[:, ma, :, mb].copy()  # (a1, b1)
                    if ma != mb:
                        vec[:, 1] *= -1.0           # phase flip on b1
                    p = float(np.sum(np.abs(vec) ** 2))
                    if p < _ZERO_BRANCH:
                        branches[(d1, d2, ma, mb)] = (max(p, 0.0), None)
                    else:
                        branches[(d1, d2, ma, mb)] = (
                            p, vec.reshape(4) / math.sqrt(p))
    return branches


def run_round_exact(pair1: BellMixture, pair2: BellMixture,
                    cfg: RoundConfig | None = None) -> list[RoundOutcome]:
    """Exact branch statistics of one round on two Bell-diagonal pairs.

    The mixtures are decomposed into the 16 pure Bell-pair combinations,
    each evolved as a pure 64-dim state, and the branch statistics summed
    with the mixture weights.  Returns the 16 outcomes in fixed order
    (detector LL, LR, RL, RR) x (atoms 00, 01, 10, 11).
    """
    if cfg is None:
        cfg = default_round_config()
    w1 = pair1.as_array()
    w2 = pair2.as_array()
    probs = {}
    rhos = {}
    for i, li in enumerate(BELL_LABELS):
        if w1[i] == 0.0:
            continue
        for j, lj in enumerate(BELL_LABELS):
            weight = w1[i] * w2[j]
            if weight == 0.0:
                continue
            for key, (p, vec) in _pure_round_branches(
                    _BELL_KETS[li], _BELL_KETS[lj], cfg).items():
                probs[key] = probs.get(key, 0.0) + weight * p
                if vec is not None:
                    contrib = weight * p * np.outer(vec, vec.conj())
                    if key in rhos:
                        rhos[key] += contrib
                    else:
                        rhos[key] = contrib
    outcomes = []
    for di, (la, lb) in enumerate(DETECTOR_PATTERNS):
        d1, d2 = di >> 1, di & 1
        kept = cfg.keep_rule(la, lb)
        for ma, mb in ATOM_PATTERNS:
            key = (d1, d2, ma, mb)
            p = probs.get(key, 0.0)
            post = None
            if kept and p >= _ZERO_BRANCH and key in rhos:
                post = rhos[key] / p
            outcomes.append(RoundOutcome(
                detector_pattern=(la, lb),
                atom_pattern=(ma, mb),
                kept=kept,
                branch_probability=p,
                correction_applied=kept and ma != mb,
                post_state=post,
            ))
    return outcomes


def run_round_density(pair1: BellMixture, pair2: BellMixture,
                      cfg: RoundConfig | None = None) -> list[RoundOutcome]:
    """Same round evolved as one 64x64 density matrix.

    Independent of the pure-combination path in run_round_exact; the two
    must agree branch by branch and serve as mutual cross-checks.
    """
    if cfg is None:
        cfg = default_round_config()
    plus = np.array([1, 1], dtype=complex) / _SQRT2
    photons = qstate.density(qstate.kron(plus, plus))
    atoms = qstate.kron(bell_mixture_to_density(pair1),
                        bell_mixture_to_density(pair2))
    atoms = qstate.reorder_qubits(atoms, (0, 2, 1, 3))  # -> (a1, a2, b1, b2)
    rho = qstate.kron(photons, atoms)                   # (p1, p2, a1..b2)
    g = cfg.gate.matrix()
    rho = qstate.apply_on(rho, g, [0, 2, 3])
    rho = qstate.apply_on(rho, g, [1, 4, 5])
    rho = qstate.apply_on(rho, cfg.photon_hadamard, [0])
    rho = qstate.apply_on(rho, cfg.photon_hadamard, [1])

    outcomes = []
    for br1 in qstate.measure(rho, 0):
        for d2 in (0, 1):
            la = "LR"[br1.outcome]
            if br1.state is None:
                br2 = qstate.MeasureBranch(d2, 0.0, None)
            else:
                br2 = qstate.measure(br1.state, 1)[d2]
            lb = "LR"[br2.outcome]
            kept = cfg.keep_rule(la, lb)
            if br2.state is None:
                for ma, mb in ATOM_PATTERNS:
                    outcomes.append(RoundOutcome(
                        (la, lb), (ma, mb), kept, 0.0,
                        kept and ma != mb, None))
                continue
            sel = qstate.apply_on(br2.state, cfg.atom_hadamard, [3])
            sel = qstate.apply_on(sel, cfg.atom_hadamard, [5])
            p_det = br1.probability * br2.probability
            for bra in qstate.measure(sel, 3):
                for mb in (0, 1):
                    ma = bra.outcome
                    if bra.state is None:
                        brb = qstate.MeasureBranch(mb, 0.0, None)
                    else:
                        brb = qstate.measure(bra.state, 5)[mb]
                    p = p_det * bra.probability * brb.probability
                    post = None
                    if kept and brb.state is not None:
                        final = brb.state
                        if ma != mb:
                            final = qstate.apply_on(final, qstate.Z, [4])
                        post = qstate.partial_trace(final, [2, 4])
                    outcomes.append(RoundOutcome(
                        (la, lb), (ma, mb), kept, p,
                        kept and ma != mb, post))
    order = {(dp, ap): k for k, dp in enumerate(DETECTOR_PATTERNS)
             for ap in ATOM_PATTERNS
             for k in [k]}
    outcomes.sort(key=lambda o: (DETECTOR_PATTERNS.index(o.detector_pattern),
                                 ATOM_PATTERNS.index(o.atom_pattern)))
    return outcomes


def summarize_outcomes(outcomes: list[RoundOutcome]) -> RoundSummary:
    """Kept probability and fidelity of the kept mixture with |phi+>."""
    total = sum(o.branch_probability for o in outcomes)
    kept_p = sum(o.branch_probability for o in outcomes if o.kept)
    fid = None
    if kept_p > 0.0:
        acc = 0.0
        for o in outcomes:
            if o.kept and o.post_state is not None:
                acc += o.branch_probability * qstate.fidelity_with(
                    o.post_state, PHI_PLUS)
        fid = acc / kept_p
    return RoundSummary(kept_probability=kept_p, kept_fidelity=fid,
                        total_probability=total)


def fidelity_map(f: float) -> float:
    """One-round fidelity update F' = F^2 / (F^2 + (1-F)^2).

    Fixed point at 0.5; strictly increasing on (0, 1); F' > F iff F > 0.5.
    """
    if not 0.0 < f < 1.0:
        raise ValueError(f"fidelity must lie in (0, 1), got {f}")
    return f * f / (f * f + (1.0 - f) * (1.0 - f))


def success_prob_ideal(f: float) -> float:
    """Ideal per-round success probability F^2 + (1-F)^2."""
    if not 0.0 < f < 1.0:
        raise ValueError(f"fidelity must lie in (0, 1), got {f}")
    return f * f + (1.0 - f) * (1.0 - f)


def convert_phase_to_bit(m: BellMixture) -> BellMixture:
    """Bilateral Hadamard in the Bell basis: swaps the phi- and psi+ weights.

    |phi+> and |psi-> are invariant under H (x) H, while |phi-> <-> |psi+>,
    so a phase-flip mixture (F, 0, 1-F, 0) becomes the bit-flip mixture
    (F, 1-F, 0, 0) that the round purifies.  Involution.
    """
    return BellMixture(m.p_phi_plus, m.p_phi_minus,
                       m.p_psi_plus, m.p_psi_minus)


@dataclass(frozen=True)
class IterationTrace:
    """Fidelity growth over repeated rounds.

    fidelities has n_rounds + 1 entries (entry 0 is the input fidelity).
    success_probs[k] is the ideal success probability of round k + 1.
    cumulative_pairs_consumed[k] is the expected number of raw input pairs
    per pair surviving k rounds, 2^k / prod(success_probs[:k]).
    """

    fidelities: tuple[float, ...]
    success_probs: tuple[float, ...]
    cumulative_pairs_consumed: tuple[float, ...]
    alternate_errors: bool = False
    warning: str | None = None


def iterate_rounds(f0: float, n_rounds: int,
                   alternate_errors: bool = False) -> IterationTrace:
    """Iterate the fidelity map for n_rounds starting from f0.

    With ``alternate_errors`` set, each round is taken to be preceded by
    the bilateral-Hadamard conversion of phase errors into bit errors;
    the conversion leaves the target-state weight (and hence this scalar
    trace) unchanged, so the flag is recorded for bookkeeping only.
    """
    if not 0.0 < f0 < 1.0:
        raise ValueError(f"initial fidelity must lie in (0, 1), got {f0}")
    if n_rounds < 1:
        raise ValueError(f"n_rounds must be >= 1, got {n_rounds}")
    warning = None
    if f0 <= 0.5:
        warning = ("initial fidelity <= 0.5: the map contracts toward the "
                   "0.5 fixed point and no purification occurs")
    fids = [f0]
    succ = []
    pairs = [1.0]
    f = f0
    for _ in range(n_rounds):
        p = success_prob_ideal(f)
        succ.append(p)
        pairs.append(pairs[-1] * 2.0 / p)
        f = fidelity_map(f)
        fids.append(f)
    return IterationTrace(
        fidelities=tuple(fids),
        success_probs=tuple(succ),
        cumulative_pairs_consumed=tuple(pairs),
        alternate_errors=alternate_errors,
        warning=warning,
    )


@dataclass(frozen=True)
class MonteCarloReport:
    """Empirical round statistics with exact references and z-scores.

    Standard errors follow the binomial/sample convention sqrt(v / n) with
    v the (ddof = 0) sample variance; for 0/1-valued data this is exactly
    the binomial standard error.  ``z_*`` is None when the corresponding
    standard error vanishes while the deviation does not.
    """

    trials: int
    seed: int
    keep_rate: float
    keep_rate_stderr: float
    kept_count: int
    kept_fidelity: float | None
    kept_fidelity_stderr: float | None
    exact_keep_prob: float
    exact_kept_fidelity: float | None
    z_keep: float | None
    z_fidelity: float | None
    flags: tuple[str, ...]


def _zscore(emp, exact, stderr):
    if emp is None or exact is None or stderr is None:
        return None
    diff = emp - exact
    if stderr == 0.0:
        return 0.0 if abs(diff) < 1e-12 else None
    return diff / stderr


def monte_carlo_round(pair1: BellMixture, pair2: BellMixture,
                      cfg: RoundConfig | None = None, *,
                      trials: int, seed: int) -> MonteCarloReport:
    """Stochastic realization of the round, deterministic given ``seed``.

    Each trial samples one pure Bell state per pair, then samples the
    (detector, atom) outcome from the branch distribution of that pure
    combination (computed once per combination by pure-state evolution).
    All randomness is drawn up front, indexed by trial, so results do not
    depend on evaluation order.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    if cfg is None:
        cfg = default_round_config()

    keys = [(d1, d2, ma, mb) for d1 in (0, 1) for d2 in (0, 1)
            for ma, mb in ATOM_PATTERNS]
    kept_mask = np.array([cfg.keep_rule("LR"[d1], "LR"[d2])
                          for d1, d2, _, _ in keys])
    prob_tbl = np.zeros((4, 4, 16))
    fid_tbl = np.zeros((4, 4, 16))
    for i, li in enumerate(BELL_LABELS):
        for j, lj in enumerate(BELL_LABELS):
            branches = _pure_round_branches(_BELL_KETS[li], _BELL_KETS[lj], cfg)
            for k, key in enumerate(keys):
                p, vec = branches[key]
                prob_tbl[i, j, k] = p
                if vec is not None:
                    fid_tbl[i, j, k] = abs(np.vdot(PHI_PLUS, vec)) ** 2
            total = prob_tbl[i, j].sum()
            prob_tbl[i, j] /= total  # condition on photon detection

    rng = np.random.default_rng(seed)
    u = rng.random((trials, 3))
    labels1 = np.searchsorted(np.cumsum(pair1.as_array()), u[:, 0],
                              side="right").clip(0, 3)
    labels2 = np.searchsorted(np.cumsum(pair2.as_array()), u[:, 1],
                              side="right").clip(0, 3)
    cums = np.cumsum(prob_tbl, axis=2)[labels1, labels2]
    idx = (cums < u[:, 2:3]).sum(axis=1).clip(0, 15)

    kept = kept_mask[idx]
    kept_count = int(kept.sum())
    keep_rate = kept_count / trials
    keep_se = math.sqrt(keep_rate * (1.0 - keep_rate) / trials)

    flags = []
    if kept_count > 0:
        fids = fid_tbl[labels1[kept], labels2[kept], idx[kept]]
        fid_mean = float(fids.mean())
        fid_se = math.sqrt(float(fids.var(ddof=0)) / kept_count)
    else:
        fid_mean = None
        fid_se = None
        flags.append("no-kept-trials")

    exact = summarize_outcomes(run_round_exact(pair1, pair2, cfg))
    exact_keep = exact.kept_probability / exact.total_probability
    z_keep = _zscore(keep_rate, exact_keep, keep_se)
    z_fid = _zscore(fid_mean, exact.kept_fidelity, fid_se)
    if keep_se == 0.0 or fid_se == 0.0:
        flags.append("zero-standard-error")

    return MonteCarloReport(
        trials=trials,
        seed=seed,
        keep_rate=keep_rate,
        keep_rate_stderr=keep_se,
        kept_count=kept_count,
        kept_fidelity=fid_mean,
        kept_fidelity_stderr=fid_se,
        exact_keep_prob=exact_keep,
        exact_kept_fidelity=exact.kept_fidelity,
        z_keep=z_keep,
        z_fidelity=z_fid,
        flags=tuple(flags),
    )
