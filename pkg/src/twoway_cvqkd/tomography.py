"""Gaussian-channel estimation from moments and the reducibility test.

A one-mode Gaussian channel acts on means as m -> G m + d and on covariance
matrices as V -> G V G^T + N. The channel is completely determined by the
first and second statistical moments of the outputs, so probing with a few
displaced inputs and fitting least squares reconstructs it. The hybrid
two-way protocol uses this to check that the round-trip channel factors as
backward o (displacement) o forward with identical forward and backward
legs; failure of either condition flags a correlated two-path attack.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .gaussian import I2, omega
from .rng import generator

CP_EIG_TOL = 1e-9


@dataclass(frozen=True)
class GaussianChannel:
    """One-mode Gaussian channel: gain matrix, additive noise, displacement."""

    gain: np.ndarray
    noise: np.ndarray
    displacement: np.ndarray = field(default_factory=lambda: np.zeros(2))

    def __post_init__(self):
        object.__setattr__(self, "gain", np.asarray(self.gain, dtype=float).reshape(2, 2))
        noise = np.asarray(self.noise, dtype=float).reshape(2, 2)
        object.__setattr__(self, "noise", 0.5 * (noise + noise.T))
        object.__setattr__(self, "displacement",
                           np.asarray(self.displacement, dtype=float).reshape(2))

    @classmethod
    def identity(cls) -> "GaussianChannel":
        return cls(np.eye(2), np.zeros((2, 2)))

    @classmethod
    def displacement_map(cls, d) -> "GaussianChannel":
        """Unit-gain, noiseless channel that only displaces (Alice's map)."""
        return cls(np.eye(2), np.zeros((2, 2)), d)

    def cp_defect(self) -> float:
        """Most negative eigenvalue of N + i(Omega - G Omega G^T), 0 if CP."""
        om = omega(1)
        herm = self.noise + 1j * (om - self.gain @ om @ self.gain.T)
        return float(min(np.linalg.eigvalsh(herm).min(), 0.0))

    def is_cp(self, tol: float = CP_EIG_TOL) -> bool:
        return self.cp_defect() >= -tol

    def apply(self, mean, cov):
        """Push a Gaussian state (mean, covariance) through the channel."""
        mean = np.asarray(mean, dtype=float)
        cov = np.asarray(cov, dtype=float)
        return self.gain @ mean + self.displacement, self.gain @ cov @ self.gain.T + self.noise


def compose(first: GaussianChannel, middle: GaussianChannel,
            last: GaussianChannel) -> GaussianChannel:
    """Composition last o middle o first at the moment level."""
    chain = GaussianChannel.identity()
    for ch in (first, middle, last):
        gain = ch.gain @ chain.gain
        noise = ch.gain @ chain.noise @ ch.gain.T + ch.noise
        disp = ch.gain @ chain.displacement + ch.displacement
        chain = GaussianChannel(gain, noise, disp)
    return chain


def channel_distance(a: GaussianChannel, b: GaussianChannel) -> float:
    """Max-abs elementwise difference over gain, noise and displacement."""
    return max(
        float(np.abs(a.gain - b.gain).max()),
        float(np.abs(a.noise - b.noise).max()),
        float(np.abs(a.displacement - b.displacement).max()),
    )


@dataclass(frozen=True)
class ProbeRecord:
    """Moments observed for one probe input."""

    displacement: np.ndarray
    input_cm: np.ndarray
    output_mean: np.ndarray
    output_cm: np.ndarray
    n_samples: int


@dataclass
class TomographyDataset:
    probes: list[ProbeRecord]

    MIN_SAMPLES = 1000

    def validate(self) -> None:
        if len(self.probes) < 3:
            raise ValueError("need at least 3 probe displacements")
        design = np.array([[*p.displacement, 1.0] for p in self.probes])
        if np.linalg.matrix_rank(design) < 3:
            raise ValueError("probe displacements are rank deficient: "
                             "need 3 affinely independent inputs")
        for p in self.probes:
            if p.n_samples < self.MIN_SAMPLES:
                raise ValueError(f"probe with n={p.n_samples} < {self.MIN_SAMPLES}")

    def statistical_sigma(self) -> float:
        """Rough one-sigma sampling error of the fitted moment estimates."""
        per_probe = [
            float(np.abs(p.output_cm).max()) * math.sqrt(2.0 / p.n_samples)
            for p in self.probes
        ]
        return max(per_probe) / math.sqrt(len(self.probes))


def estimate_channel(data: TomographyDataset, cp_sigma_factor: float = 5.0) -> GaussianChannel:
    """Least-squares Gaussian-channel fit from probe moments.

    Gain and displacement come from the affine fit of output means against
    input displacements; the additive noise is the probe-averaged residual
    output CM minus gain @ CM_in @ gain^T. Complete positivity is verified
    within `cp_sigma_factor` times the dataset's sampling error.
    """
    data.validate()
    design = np.array([[*p.displacement, 1.0] for p in data.probes])
    targets = np.array([p.output_mean for p in data.probes])
    coef, *_ = np.linalg.lstsq(design, targets, rcond=None)
    gain = coef[:2].T
    disp = coef[2]
    noise = np.mean(
        [p.output_cm - gain @ p.input_cm @ gain.T for p in data.probes], axis=0
    )
    channel = GaussianChannel(gain, noise, disp)
    sigma = data.statistical_sigma()
    if channel.cp_defect() < -(cp_sigma_factor * sigma + CP_EIG_TOL):
        raise ValueError(
            f"fitted channel violates complete positivity beyond "
            f"{cp_sigma_factor} sigma (defect {channel.cp_defect():.3g}, sigma {sigma:.3g})"
        )
    return channel


@dataclass(frozen=True)
class ReducibilityVerdict:
    """Outcome of the two-path reducibility check.

    kind is one of "reducible", "irreducible", "asymmetric". The deviations
    are max-abs moment differences: `symmetry` between the forward and
    backward channels, `composition` between the measured round trip and
    the composition of the two legs around the publicized encoding map.
    """

    kind: str
    symmetry_deviation: float
    composition_deviation: float
    tolerance: float


def check_reducibility(e1: GaussianChannel, e2: GaussianChannel,
                       e_roundtrip: GaussianChannel, tol: float,
                       alice_map: GaussianChannel | None = None) -> ReducibilityVerdict:
    """Classify a two-path attack as reducible, asymmetric or irreducible.

    Asymmetric if the forward and backward channels differ beyond `tol`;
    irreducible if the round trip differs from e2 o alice_map o e1 beyond
    `tol`; reducible otherwise.
    """
    if tol <= 0:
        raise ValueError(f"tolerance must be positive, got {tol}")
    if alice_map is None:
        alice_map = GaussianChannel.identity()
    sym_dev = channel_distance(e1, e2)
    comp_dev = channel_distance(e_roundtrip, compose(e1, alice_map, e2))
    if sym_dev > tol:
        kind = "asymmetric"
    elif comp_dev > tol:
        kind = "irreducible"
    else:
        kind = "reducible"
    return ReducibilityVerdict(kind, sym_dev, comp_dev, tol)


DEFAULT_PROBE_DISPLACEMENTS = np.array(
    [[0.0, 0.0], [4.0, 0.0], [0.0, 4.0], [-4.0, 0.0], [0.0, -4.0], [3.0, 3.0]]
)


def simulate_probe_dataset(channel: GaussianChannel, n_per_probe: int, seed: int,
                           displacements: np.ndarray | None = None) -> TomographyDataset:
    """Sample coherent-state probes through a known channel.

    Each probe sends a coherent state (input CM = I) displaced by one row of
    `displacements`; the output moments are sample estimates over
    `n_per_probe` shots.
    """
    if displacements is None:
        displacements = DEFAULT_PROBE_DISPLACEMENTS
    probes = []
    for k, d in enumerate(displacements):
        mean, cov = channel.apply(d, I2)
        rng = generator(seed, k)
        samples = rng.multivariate_normal(mean, cov, size=n_per_probe)
        probes.append(ProbeRecord(
            displacement=np.asarray(d, dtype=float),
            input_cm=I2.copy(),
            output_mean=samples.mean(axis=0),
            output_cm=np.cov(samples, rowvar=False, ddof=1),
            n_samples=n_per_probe,
        ))
    return TomographyDataset(probes)


DATASET_FIELDS = ["probe_id", "in_q", "in_p", "out_mean_q", "out_mean_p",
                  "out_cov_qq", "out_cov_qp", "out_cov_pp", "n"]


def dataset_to_csv(data: TomographyDataset, path) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(DATASET_FIELDS)
        for k, p in enumerate(data.probes):
            writer.writerow([
                k, f"{p.displacement[0]:.12g}", f"{p.displacement[1]:.12g}",
                f"{p.output_mean[0]:.12g}", f"{p.output_mean[1]:.12g}",
                f"{p.output_cm[0, 0]:.12g}", f"{p.output_cm[0, 1]:.12g}",
                f"{p.output_cm[1, 1]:.12g}", p.n_samples,
            ])


def dataset_from_csv(path) -> TomographyDataset:
    """Read the probe CSV schema; probes are assumed to be coherent states."""
    probes = []
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        missing = set(DATASET_FIELDS) - set(reader.fieldnames or [])
        if missing:
            raise ValueError(f"dataset CSV missing columns: {sorted(missing)}")
        for row in reader:
            cov = np.array([
                [float(row["out_cov_qq"]), float(row["out_cov_qp"])],
                [float(row["out_cov_qp"]), float(row["out_cov_pp"])],
            ])
            probes.append(ProbeRecord(
                displacement=np.array([float(row["in_q"]), float(row["in_p"])]),
                input_cm=I2.copy(),
                output_mean=np.array([float(row["out_mean_q"]), float(row["out_mean_p"])]),
                output_cm=cov,
                n_samples=int(row["n"]),
            ))
    return TomographyDataset(probes)
