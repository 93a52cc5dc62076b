"""Seeded Monte-Carlo simulation of the individual protocols.

Because every state, channel and measurement involved is Gaussian, the
prepare-and-measure runs can be simulated exactly as classical Gaussian
phase-space trajectories: Alice's modulation, the vacuum and EPR inputs and
Eve's injected thermal ancillas are drawn as correlated normals and pushed
through the beam-splitter relations. No Hilbert-space machinery is needed.

The output of a run is the per-sample pair (X_A, X_B) of encoding and
decoding variables, their empirical (co)variances and a Gaussian
mutual-information estimate in bits, next to the analytic values from the
exact covariance engine. Everything is keyed by a single 64-bit seed and is
bit-identical across repeated or parallel invocations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .attacks import AttackParams
from .key_rates import Protocol, shannon_terms
from .rng import normal_matrix

MIN_SAMPLES = 1000
# Per-dimension ceiling for the MI estimate when the residual variance
# underflows (X_B a deterministic function of X_A).
MI_CAP_BITS = 30.0

_INDIVIDUAL = (Protocol.HOM, Protocol.HET, Protocol.HOM2, Protocol.HET2)


@dataclass(frozen=True)
class SimConfig:
    protocol: Protocol
    V: float
    params: AttackParams
    n_samples: int
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "protocol", Protocol(self.protocol))
        if self.protocol not in _INDIVIDUAL:
            raise ValueError(f"simulation covers individual protocols only, "
                             f"got {self.protocol.value}")
        if self.V <= 1:
            raise ValueError(f"modulation variance must exceed 1, got V={self.V}")
        if self.n_samples < MIN_SAMPLES:
            raise ValueError(f"need at least {MIN_SAMPLES} samples for MI "
                             f"estimation, got {self.n_samples}")


@dataclass(frozen=True)
class MiEstimate:
    bits: float
    capped: bool = False


@dataclass(frozen=True)
class SimRun:
    config: SimConfig
    labels: tuple
    x_a: np.ndarray
    x_b: np.ndarray
    empirical_var: np.ndarray
    empirical_cond_var: np.ndarray
    analytic_var: np.ndarray
    analytic_cond_var: np.ndarray
    mi_empirical: MiEstimate
    mi_analytic_bits: float

    @property
    def seed(self) -> int:
        return self.config.seed


def _epr_pair(z1: np.ndarray, z2: np.ndarray, V: float, sign: float):
    """Correlated pair with covariance [[V, s v],[s v, V]], v = sqrt(V^2-1)."""
    v = math.sqrt(V * V - 1.0)
    a = math.sqrt(V) * z1
    b = (sign * v / math.sqrt(V)) * z1 + math.sqrt(V - v * v / V) * z2
    return a, b


def _one_way_trajectories(config: SimConfig) -> tuple[np.ndarray, np.ndarray]:
    T, W = config.params.T, config.params.W
    vbar = config.V - 1.0
    t, r = math.sqrt(T), math.sqrt(1.0 - T)
    z = normal_matrix(config.seed, config.n_samples, 8)
    qa, pa = math.sqrt(vbar) * z[:, 0], math.sqrt(vbar) * z[:, 1]
    q0, p0 = z[:, 2], z[:, 3]
    qe, pe = math.sqrt(W) * z[:, 4], math.sqrt(W) * z[:, 5]
    qb = t * (qa + q0) + r * qe
    pb = t * (pa + p0) + r * pe
    if config.protocol is Protocol.HOM:
        return qa[:, None], qb[:, None]
    # heterodyne: split on a balanced beam splitter against fresh vacuum
    xq = (qb + z[:, 6]) / math.sqrt(2.0)
    xp = (pb - z[:, 7]) / math.sqrt(2.0)
    return np.column_stack([qa, pa]), np.column_stack([xq, xp])


def _two_way_trajectories(config: SimConfig) -> tuple[np.ndarray, np.ndarray]:
    T, W = config.params.T, config.params.W
    vbar = config.V - 1.0
    t, r = math.sqrt(T), math.sqrt(1.0 - T)
    z = normal_matrix(config.seed, config.n_samples, 14)
    qa, pa = math.sqrt(vbar) * z[:, 0], math.sqrt(vbar) * z[:, 1]
    qb1, qc1 = _epr_pair(z[:, 2], z[:, 3], config.V, +1.0)
    pb1, pc1 = _epr_pair(z[:, 4], z[:, 5], config.V, -1.0)
    qe1, pe1 = math.sqrt(W) * z[:, 6], math.sqrt(W) * z[:, 7]
    qe2, pe2 = math.sqrt(W) * z[:, 8], math.sqrt(W) * z[:, 9]
    qa1 = t * qc1 + r * qe1
    pa1 = t * pc1 + r * pe1
    qb2 = t * (qa1 + qa) + r * qe2
    pb2 = t * (pa1 + pa) + r * pe2
    if config.protocol is Protocol.HOM2:
        return qa[:, None], (qb2 - T * qb1)[:, None]
    # heterodyne on both kept and returned modes, then combine
    q_minus = (qb1 - z[:, 10]) / math.sqrt(2.0)
    p_plus = (pb1 + z[:, 11]) / math.sqrt(2.0)
    q_cap = (qb2 - z[:, 12]) / math.sqrt(2.0)
    p_cap = (pb2 + z[:, 13]) / math.sqrt(2.0)
    xq = q_cap - T * q_minus
    xp = p_cap + T * p_plus
    return np.column_stack([qa, pa]), np.column_stack([xq, xp])


def empirical_mi(x_a: np.ndarray, x_b: np.ndarray) -> MiEstimate:
    """Gaussian MI estimate in bits from samples of (X_A, X_B).

    Per scalar dimension of X_B: half the log-ratio of the sample variance
    to the residual variance of a least-squares fit on X_A, summed over
    dimensions. A vanishing residual is capped at MI_CAP_BITS per dimension
    and flagged.
    """
    x_a = np.atleast_2d(np.asarray(x_a, dtype=float))
    x_b = np.atleast_2d(np.asarray(x_b, dtype=float))
    if x_a.shape[0] == 1:
        x_a, x_b = x_a.T, x_b.T
    n = x_a.shape[0]
    if n < MIN_SAMPLES:
        raise ValueError(f"need at least {MIN_SAMPLES} samples, got {n}")
    design = np.column_stack([x_a, np.ones(n)])
    bits, capped = 0.0, False
    for j in range(x_b.shape[1]):
        y = x_b[:, j]
        total = float(np.var(y, ddof=1))
        if total <= 0.0:
            raise ValueError("degenerate sample variance in X_B")
        coef, *_ = np.linalg.lstsq(design, y, rcond=None)
        resid = y - design @ coef
        dof = n - design.shape[1]
        cond = float(resid @ resid) / dof
        if cond <= 0.0:
            term = MI_CAP_BITS
        else:
            term = 0.5 * math.log2(total / cond)
        if term > MI_CAP_BITS:
            term, capped = MI_CAP_BITS, True
        bits += term
    return MiEstimate(bits, capped)


def simulate(config: SimConfig) -> SimRun:
    """Run the protocol and compare empirical moments and MI to analytics."""
    if config.protocol in (Protocol.HOM, Protocol.HET):
        x_a, x_b = _one_way_trajectories(config)
    else:
        x_a, x_b = _two_way_trajectories(config)
    terms = shannon_terms(config.protocol, config.V, config.params)
    labels = tuple(lab for lab, _, _ in terms)
    analytic_var = np.array([v for _, v, _ in terms])
    analytic_cond = np.array([c for _, _, c in terms])

    n = config.n_samples
    design = np.column_stack([x_a, np.ones(n)])
    emp_var = np.var(x_b, axis=0, ddof=1)
    emp_cond = np.empty(x_b.shape[1])
    for j in range(x_b.shape[1]):
        coef, *_ = np.linalg.lstsq(design, x_b[:, j], rcond=None)
        resid = x_b[:, j] - design @ coef
        emp_cond[j] = float(resid @ resid) / (n - design.shape[1])
    return SimRun(
        config=config,
        labels=labels,
        x_a=x_a,
        x_b=x_b,
        empirical_var=emp_var,
        empirical_cond_var=emp_cond,
        analytic_var=analytic_var,
        analytic_cond_var=analytic_cond,
        mi_empirical=empirical_mi(x_a, x_b),
        mi_analytic_bits=float(sum(0.5 * math.log2(v / c) for _, v, c in terms)),
    )


def mi_sigma_bits(run: SimRun) -> float:
    """Approximate one-sigma error of the empirical MI estimate in bits.

    For a Gaussian MI estimate the per-dimension standard error is about
    rho / (sqrt(n) ln 2) where rho is the A-B correlation; summed in
    quadrature over dimensions, with a 1/sqrt(2n) floor per dimension.
    """
    n = run.config.n_samples
    var = 0.0
    for v, c in zip(run.analytic_var, run.analytic_cond_var):
        rho_sq = max(0.0, 1.0 - c / v)
        var += max(rho_sq, 0.5) / (n * math.log(2.0) ** 2)
    return math.sqrt(var)


def summary_text(run: SimRun) -> str:
    """Flat key=value summary, one entry per line."""
    lines = [
        f"protocol={run.config.protocol.value}",
        f"T={run.config.params.T:.12g}",
        f"W={run.config.params.W:.12g}",
        f"N={run.config.params.N:.12g}",
        f"V={run.config.V:.12g}",
        f"n={run.config.n_samples}",
        f"seed={run.config.seed}",
    ]
    for j, lab in enumerate(run.labels):
        lines += [
            f"var_{lab}_empirical={run.empirical_var[j]:.12g}",
            f"var_{lab}_analytic={run.analytic_var[j]:.12g}",
            f"cond_var_{lab}_empirical={run.empirical_cond_var[j]:.12g}",
            f"cond_var_{lab}_analytic={run.analytic_cond_var[j]:.12g}",
        ]
    lines += [
        f"mi_empirical_bits={run.mi_empirical.bits:.12g}",
        f"mi_capped={str(run.mi_empirical.capped).lower()}",
        f"mi_analytic_bits={run.mi_analytic_bits:.12g}",
    ]
    return "\n".join(lines) + "\n"


def dump_samples(run: SimRun, path) -> None:
    """Raw per-sample CSV with one column per X_A / X_B dimension."""
    header = ",".join([f"x_a_{lab}" for lab in run.labels]
                      + [f"x_b_{lab}" for lab in run.labels])
    data = np.column_stack([run.x_a, run.x_b])
    with open(path, "w", newline="") as f:
        f.write(header + "\n")
        for row in data:
            f.write(",".join(f"{x:.12g}" for x in row) + "\n")
