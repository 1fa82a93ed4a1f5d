"""Physical system definition and compilation to drift/diffusion matrices.

A system is a list of damped harmonic oscillators, each tied to its own
thermal bath, optionally linked pairwise by linear springs and driven by
linear feedback forces ``F = A*u + B*du/dt + white noise``.  ``compile``
turns the model into the first-order form

    dx = M x dt + L dW,      x = (u_1, v_1, u_2, v_2, ...)

with drift ``M`` and diffusion ``D = L L^T``.  Everything downstream
(stationary solves, trajectory simulation, spectra) consumes these matrices.

Conventions: the equation of motion per oscillator is
``u'' + 2*gamma*u' + omega^2 u = (F_th + F_fb)/m``, i.e. ``gamma`` is the
amplitude damping half-rate.  The thermal force is white with intensity
``noise_factor * gamma * m * k_B * T``; the default factor 4 makes the
equilibrium mode temperature equal the bath temperature (equipartition for
the ``2*gamma*u'`` damping term).  Strict SI units throughout.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .constants import BOLTZMANN
from .errors import NonPositiveStiffness, UnknownLabel, UnknownPair, UnstableFeedback

__all__ = [
    "OscillatorSpec",
    "FeedbackSpec",
    "CouplingSpec",
    "SystemModel",
    "StateMatrices",
    "CouplingEstimate",
    "compile",
    "coupling_g",
    "model_from_dict",
    "model_to_dict",
]


@dataclass(frozen=True)
class OscillatorSpec:
    """One mechanical mode: mass (kg), angular frequency (rad/s), amplitude
    damping half-rate (1/s) and bath temperature (K)."""

    label: str
    mass: float
    omega: float
    gamma: float
    bath_temperature: float

    def __post_init__(self):
        if self.mass <= 0:
            raise ValueError(f"oscillator {self.label!r}: mass must be > 0, got {self.mass}")
        if self.omega <= 0:
            raise ValueError(f"oscillator {self.label!r}: omega must be > 0, got {self.omega}")
        if self.gamma < 0:
            raise ValueError(f"oscillator {self.label!r}: gamma must be >= 0, got {self.gamma}")
        if self.bath_temperature < 0:
            raise ValueError(
                f"oscillator {self.label!r}: bath_temperature must be >= 0, "
                f"got {self.bath_temperature}"
            )


@dataclass(frozen=True)
class FeedbackSpec:
    """Linear feedback force A*u + B*v + delta_F with white force noise.

    ``position_gain`` (N/m) softens/stiffens the mode, ``velocity_gain``
    (N*s/m) adds/removes damping, ``noise_psd`` (N^2/Hz, double-sided) is
    the intensity of the added white force noise.
    """

    position_gain: float = 0.0
    velocity_gain: float = 0.0
    noise_psd: float = 0.0

    def __post_init__(self):
        if self.noise_psd < 0:
            raise ValueError(f"noise_psd must be >= 0, got {self.noise_psd}")


@dataclass(frozen=True)
class CouplingSpec:
    """Bilinear spring between two oscillators: force on i is -k_c (u_i - u_j)."""

    pair: tuple[str, str]
    spring_constant: float

    def __post_init__(self):
        if self.pair[0] == self.pair[1]:
            raise ValueError(f"coupling pair must name two distinct oscillators, got {self.pair}")


@dataclass(frozen=True)
class SystemModel:
    """Immutable system description; compile() turns it into state matrices.

    ``noise_factor`` scales the thermal-force intensity
    ``noise_factor * gamma * m * k_B * T``.  The default 4.0 satisfies
    equipartition (mode temperature = bath temperature without feedback);
    8.0 reproduces the alternative convention in which the equilibrium mode
    temperature comes out at twice the bath temperature.
    """

    oscillators: tuple[OscillatorSpec, ...]
    couplings: tuple[CouplingSpec, ...] = ()
    feedbacks: dict[str, FeedbackSpec] = field(default_factory=dict)
    noise_factor: float = 4.0
    boltzmann: float = BOLTZMANN

    def __post_init__(self):
        object.__setattr__(self, "oscillators", tuple(self.oscillators))
        object.__setattr__(self, "couplings", tuple(self.couplings))
        object.__setattr__(self, "feedbacks", dict(self.feedbacks))
        labels = [o.label for o in self.oscillators]
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate oscillator labels: {labels}")
        if self.noise_factor <= 0:
            raise ValueError(f"noise_factor must be > 0, got {self.noise_factor}")
        for c in self.couplings:
            for lab in c.pair:
                if lab not in labels:
                    raise UnknownLabel(f"coupling references unknown oscillator {lab!r}")
        for lab in self.feedbacks:
            if lab not in labels:
                raise UnknownLabel(f"feedback references unknown oscillator {lab!r}")

    # -- lookup helpers ------------------------------------------------

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(o.label for o in self.oscillators)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise UnknownLabel(f"no oscillator labelled {label!r}") from None

    def feedback(self, label: str) -> FeedbackSpec:
        return self.feedbacks.get(label, FeedbackSpec())

    def thermal_noise_intensity(self, i: int) -> float:
        """White thermal-force intensity S_0 of oscillator i, N^2/Hz."""
        o = self.oscillators[i]
        return self.noise_factor * o.gamma * o.mass * self.boltzmann * o.bath_temperature

    def fingerprint(self) -> str:
        """Short hash of the compiled system; used to guard estimator/model mixing."""
        mats = compile(self)
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(mats.drift).tobytes())
        h.update(np.ascontiguousarray(mats.diffusion).tobytes())
        h.update(np.array([o.mass for o in self.oscillators]).tobytes())
        h.update(("|".join(self.labels)).encode())
        return h.hexdigest()[:16]


@dataclass(frozen=True)
class StateMatrices:
    """First-order form of the compiled system, state ordered (u_1, v_1, u_2, v_2, ...).

    ``diffusion`` is nonzero only on velocity-velocity diagonal entries;
    ``noise_gain`` is the 2N x N factor with D = noise_gain @ noise_gain.T
    (one independent white channel per oscillator).
    """

    drift: np.ndarray
    diffusion: np.ndarray
    noise_gain: np.ndarray

    @property
    def n_oscillators(self) -> int:
        return self.drift.shape[0] // 2

    def position_index(self, i: int) -> int:
        return 2 * i

    def velocity_index(self, i: int) -> int:
        return 2 * i + 1


@dataclass(frozen=True)
class CouplingEstimate:
    """Coupling rate in rad/s; ``nondegenerate`` flags a nominal value for
    pairs whose bare frequencies differ by more than 1e-6 relative."""

    value: float
    nondegenerate: bool = False


def _stiffness_matrix(model: SystemModel) -> np.ndarray:
    """Effective N x N stiffness (force = -K u) including feedback position gains."""
    n = len(model.oscillators)
    K = np.zeros((n, n))
    for i, osc in enumerate(model.oscillators):
        K[i, i] = osc.mass * osc.omega**2 - model.feedback(osc.label).position_gain
    for c in model.couplings:
        i, j = model.index(c.pair[0]), model.index(c.pair[1])
        K[i, i] += c.spring_constant
        K[j, j] += c.spring_constant
        K[i, j] -= c.spring_constant
        K[j, i] -= c.spring_constant
    return K


def compile(model: SystemModel) -> StateMatrices:
    """Compile the model into drift/diffusion matrices.

    Pure and deterministic: equal models produce bit-identical matrices.

    Raises
    ------
    UnstableFeedback
        if any oscillator has m*omega^2 - A <= 0 or 2*gamma*m - B <= 0.
    NonPositiveStiffness
        if the effective stiffness matrix is not positive definite.
    """
    n = len(model.oscillators)
    if n == 0:
        raise ValueError("model has no oscillators")

    for osc in model.oscillators:
        fb = model.feedback(osc.label)
        if osc.mass * osc.omega**2 - fb.position_gain <= 0:
            raise UnstableFeedback(
                f"oscillator {osc.label!r}: position gain {fb.position_gain} exceeds "
                f"the mechanical stiffness {osc.mass * osc.omega**2}"
            )
        if 2 * osc.gamma * osc.mass - fb.velocity_gain <= 0 and not (
            osc.gamma == 0 and fb.velocity_gain == 0
        ):
            raise UnstableFeedback(
                f"oscillator {osc.label!r}: velocity gain {fb.velocity_gain} cancels "
                f"the damping 2*gamma*m = {2 * osc.gamma * osc.mass}"
            )

    K = _stiffness_matrix(model)
    if np.min(np.linalg.eigvalsh(K)) <= 0:
        raise NonPositiveStiffness(
            "effective stiffness matrix is not positive definite; "
            "the coupled system has no bound stationary state"
        )

    dim = 2 * n
    M = np.zeros((dim, dim))
    L = np.zeros((dim, n))
    for i, osc in enumerate(model.oscillators):
        fb = model.feedback(osc.label)
        u, v = 2 * i, 2 * i + 1
        M[u, v] = 1.0
        M[v, u] = -(osc.omega**2 - fb.position_gain / osc.mass)
        M[v, v] = -(2 * osc.gamma - fb.velocity_gain / osc.mass)
        L[v, i] = np.sqrt(model.thermal_noise_intensity(i) + fb.noise_psd) / osc.mass
    for c in model.couplings:
        i, j = model.index(c.pair[0]), model.index(c.pair[1])
        mi = model.oscillators[i].mass
        mj = model.oscillators[j].mass
        M[2 * i + 1, 2 * i] -= c.spring_constant / mi
        M[2 * i + 1, 2 * j] += c.spring_constant / mi
        M[2 * j + 1, 2 * j] -= c.spring_constant / mj
        M[2 * j + 1, 2 * i] += c.spring_constant / mj

    return StateMatrices(drift=M, diffusion=L @ L.T, noise_gain=L)


def coupling_g(model: SystemModel, pair: tuple[str, str]) -> CouplingEstimate:
    """Coupling rate g = k_c / (2 sqrt(m_i m_j) sqrt(omega_i omega_j)) in rad/s.

    For a degenerate identical pair this is half the normal-mode frequency
    splitting, up to relative corrections of order (g/omega)^2 and
    (gamma/omega)^2.  For a nondegenerate pair (bare frequencies differing
    by more than 1e-6 relative) the same nominal value is returned with the
    ``nondegenerate`` flag set.
    """
    wanted = frozenset(pair)
    for c in model.couplings:
        if frozenset(c.pair) == wanted:
            i, j = model.index(c.pair[0]), model.index(c.pair[1])
            oi, oj = model.oscillators[i], model.oscillators[j]
            omega_bar = np.sqrt(oi.omega * oj.omega)
            g = c.spring_constant / (2 * np.sqrt(oi.mass * oj.mass) * omega_bar)
            detuned = abs(oi.omega - oj.omega) > 1e-6 * max(oi.omega, oj.omega)
            return CouplingEstimate(value=float(g), nondegenerate=detuned)
    raise UnknownPair(f"no coupling between {pair[0]!r} and {pair[1]!r}")


# -- JSON-friendly construction ----------------------------------------------

def model_to_dict(model: SystemModel) -> dict:
    """Serialize to the plain-dict form accepted by :func:`model_from_dict`."""
    out: dict = {
        "oscillators": [
            {
                "label": o.label,
                "mass": o.mass,
                "omega": o.omega,
                "gamma": o.gamma,
                "bath_temperature": o.bath_temperature,
            }
            for o in model.oscillators
        ]
    }
    if model.couplings:
        out["couplings"] = [
            {"pair": list(c.pair), "spring_constant": c.spring_constant}
            for c in model.couplings
        ]
    if model.feedbacks:
        out["feedbacks"] = {
            lab: {
                "position_gain": fb.position_gain,
                "velocity_gain": fb.velocity_gain,
                "noise_psd": fb.noise_psd,
            }
            for lab, fb in model.feedbacks.items()
        }
    if model.noise_factor != 4.0:
        out["noise_factor"] = model.noise_factor
    return out


def model_from_dict(doc: dict) -> SystemModel:
    """Build a SystemModel from its JSON document form (see `modeheat schema`)."""
    oscillators = tuple(
        OscillatorSpec(
            label=str(o["label"]),
            mass=float(o["mass"]),
            omega=float(o["omega"]),
            gamma=float(o["gamma"]),
            bath_temperature=float(o["bath_temperature"]),
        )
        for o in doc["oscillators"]
    )
    couplings = tuple(
        CouplingSpec(pair=(str(c["pair"][0]), str(c["pair"][1])),
                     spring_constant=float(c["spring_constant"]))
        for c in doc.get("couplings", [])
    )
    feedbacks = {
        str(lab): FeedbackSpec(
            position_gain=float(fb.get("position_gain", 0.0)),
            velocity_gain=float(fb.get("velocity_gain", 0.0)),
            noise_psd=float(fb.get("noise_psd", 0.0)),
        )
        for lab, fb in doc.get("feedbacks", {}).items()
    }
    return SystemModel(
        oscillators=oscillators,
        couplings=couplings,
        feedbacks=feedbacks,
        noise_factor=float(doc.get("noise_factor", 4.0)),
    )


def feedback_smallness_warning(model: SystemModel) -> list[str]:
    """Labels whose position gain exceeds 10% of the mechanical stiffness.

    The linear-response treatment of feedback assumes small gains; stability
    is still enforced at compile time, this is only an advisory flag.
    """
    flagged = []
    for osc in model.oscillators:
        fb = model.feedback(osc.label)
        if abs(fb.position_gain) / (osc.mass * osc.omega**2) > 0.1:
            flagged.append(osc.label)
    return flagged
