"""Exact stationary statistics of the compiled linear system.

The stationary covariance C of dx = Mx dt + L dW solves the Lyapunov
equation M C + C M^T + D = 0 with D = L L^T.  From C follow the mode
temperatures, the net heat flux drawn from each bath, and the power
injected or removed by each feedback force.  ``normal_modes`` gives the
eigenfrequencies of the drift matrix, including the splitting of
near-degenerate coupled pairs.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DefectiveMatrixWarning, IllConditioned, NotHurwitz
from .model import StateMatrices, SystemModel, compile

__all__ = [
    "SteadyState",
    "NormalModes",
    "solve_stationary",
    "mode_temperatures",
    "bath_heat_flux",
    "feedback_heat_flux",
    "normal_modes",
    "steady_state",
    "lyapunov_residual",
]

# Residual the solver tries for; REQUIRED_RESIDUAL is the hard acceptance gate.
_TARGET_RESIDUAL = 1e-13
REQUIRED_RESIDUAL = 1e-10
_MAX_REFINEMENTS = 6


@dataclass(frozen=True)
class SteadyState:
    """Stationary second moments and the derived thermodynamic quantities.

    ``covariance`` is the full 2N x 2N matrix <x x^T> in the (u_1, v_1, ...)
    state ordering.  Temperatures are per oscillator, in K; fluxes are per
    oscillator, in W, positive for energy flowing into the mode.
    """

    labels: tuple[str, ...]
    covariance: np.ndarray
    mode_temperature_positional: np.ndarray
    mode_temperature_kinetic: np.ndarray
    bath_flux: np.ndarray
    feedback_flux: np.ndarray
    residual: float

    def temperature_gap(self, model: SystemModel) -> np.ndarray:
        """Bath-minus-mode temperature gap T_i - T'_kin,i in K."""
        baths = np.array([o.bath_temperature for o in model.oscillators])
        return baths - self.mode_temperature_kinetic


@dataclass(frozen=True)
class NormalModes:
    """Eigenmodes of the drift matrix, one entry per conjugate pair.

    ``frequencies`` are |Im lambda| in rad/s (ascending), ``linewidths``
    are -2 Re lambda in 1/s (full width of the energy decay).  Real
    eigenvalues appear as zero-frequency entries.  ``splittings`` maps a
    near-degenerate oscillator index pair to the frequency difference of
    the two normal modes it hybridizes into.
    """

    frequencies: np.ndarray
    linewidths: np.ndarray
    eigenvectors: np.ndarray
    splittings: dict[tuple[int, int], float]
    defective: bool = False


def _symmetric_lyapunov_operator(A: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Matrix of C -> A C + C A^T restricted to symmetric C, on the
    upper-triangle coordinate basis.  Returns (operator, row_idx, col_idx)."""
    n = A.shape[0]
    iu, ju = np.triu_indices(n)
    m = iu.size
    op = np.empty((m, m))
    basis = np.zeros((n, n))
    for q in range(m):
        k, l = iu[q], ju[q]
        basis[k, l] = 1.0
        basis[l, k] = 1.0
        image = A @ basis + basis @ A.T
        op[:, q] = image[iu, ju]
        basis[k, l] = 0.0
        basis[l, k] = 0.0
    return op, iu, ju


def _unvec(x: np.ndarray, iu: np.ndarray, ju: np.ndarray, n: int) -> np.ndarray:
    C = np.zeros((n, n))
    C[iu, ju] = x
    C[ju, iu] = x
    return C


def lyapunov_residual(matrices: StateMatrices, C: np.ndarray) -> float:
    """Relative residual ||MC + CM^T + D||_F / max(||D||_F, eps)."""
    M, D = matrices.drift, matrices.diffusion
    num = np.linalg.norm(M @ C + C @ M.T + D)
    return float(num / max(np.linalg.norm(D), np.finfo(float).tiny))


def solve_stationary(matrices: StateMatrices) -> np.ndarray:
    """Stationary covariance of dx = Mx dt + L dW via a dense symmetric solve.

    The n(n+1)/2 upper-triangle unknowns are solved directly (systems here
    have 2N <= 20 states).  Positions are rescaled by the per-oscillator
    stiffness frequency before factorization so that position and velocity
    rows carry comparable magnitudes; a few rounds of iterative refinement
    against the unscaled residual then push the solution to near machine
    precision.

    Raises NotHurwitz when no stationary state exists, IllConditioned when
    the refined residual stays above 1e-10 relative.
    """
    M, D = matrices.drift, matrices.diffusion
    dim = M.shape[0]

    eigs = np.linalg.eigvals(M)
    if np.max(eigs.real) >= 0:
        raise NotHurwitz(
            "drift matrix is not Hurwitz (max Re(lambda) = "
            f"{np.max(eigs.real):.3e}); no stationary state exists"
        )

    # Scale u_i by its local stiffness frequency so the solve is balanced.
    scale = np.ones(dim)
    for i in range(dim // 2):
        w2 = -M[2 * i + 1, 2 * i]
        if w2 > 0:
            scale[2 * i] = np.sqrt(w2)
    S = np.diag(scale)
    S_inv = np.diag(1.0 / scale)
    M_s = S @ M @ S_inv
    D_s = S @ D @ S

    op, iu, ju = _symmetric_lyapunov_operator(M_s)
    lu_piv = scipy.linalg.lu_factor(op)
    x = scipy.linalg.lu_solve(lu_piv, -D_s[iu, ju])
    C = S_inv @ _unvec(x, iu, ju, dim) @ S_inv

    best_C, best_res = C, lyapunov_residual(matrices, C)
    for _ in range(_MAX_REFINEMENTS):
        if best_res <= _TARGET_RESIDUAL:
            break
        R = M @ best_C + best_C @ M.T + D
        R_s = S @ R @ S
        dx = scipy.linalg.lu_solve(lu_piv, -R_s[iu, ju])
        C_new = best_C + S_inv @ _unvec(dx, iu, ju, dim) @ S_inv
        C_new = 0.5 * (C_new + C_new.T)
        res_new = lyapunov_residual(matrices, C_new)
        if not res_new < best_res:
            break
        best_C, best_res = C_new, res_new

    if not best_res <= REQUIRED_RESIDUAL:
        raise IllConditioned(
            f"Lyapunov solve stalled at relative residual {best_res:.3e} "
            f"(required {REQUIRED_RESIDUAL:.0e})",
            residual=best_res,
        )
    return 0.5 * (best_C + best_C.T)


def mode_temperatures(C: np.ndarray, model: SystemModel) -> tuple[np.ndarray, np.ndarray]:
    """Positional and kinetic mode temperatures, K per oscillator.

    T'_pos = m Omega^2 <u^2> / k_B uses the bare mechanical frequency, so a
    position feedback that softens the mode reads as a hotter positional
    temperature; T'_kin = m <v^2> / k_B is the one that enters the
    flux-gap relation.  The two coincide without position feedback.
    """
    kB = model.boltzmann
    t_pos = np.empty(len(model.oscillators))
    t_kin = np.empty(len(model.oscillators))
    for i, o in enumerate(model.oscillators):
        u, v = 2 * i, 2 * i + 1
        t_pos[i] = o.mass * o.omega**2 * C[u, u] / kB
        t_kin[i] = o.mass * C[v, v] / kB
    return t_pos, t_kin


def bath_heat_flux(C: np.ndarray, model: SystemModel) -> np.ndarray:
    """Net power each bath feeds its oscillator, W (positive = bath heats mode).

    Computed as injected stochastic power minus dissipated power,
    P_i = S_0,i/(2 m_i) - 2 gamma_i m_i <v_i^2>.  Under the default noise
    convention this equals 2 gamma k_B (T - T'_kin): the flux is set by the
    bath/mode temperature gap alone, whatever produced the gap.
    """
    P = np.empty(len(model.oscillators))
    for i, o in enumerate(model.oscillators):
        v = 2 * i + 1
        P[i] = model.thermal_noise_intensity(i) / (2 * o.mass) - 2 * o.gamma * o.mass * C[v, v]
    return P


def feedback_heat_flux(C: np.ndarray, model: SystemModel) -> np.ndarray:
    """Power each feedback force injects into its oscillator, W.

    P_fb,i = S_ext,i/(2 m_i) + B_i <v_i^2> + A_i <u_i v_i>.  The last term
    vanishes in any stationary state; it is kept so that the balance
    Sum(P_bath + P_fb) = 0 holds identically, not just on exact solves.
    """
    P = np.zeros(len(model.oscillators))
    for i, o in enumerate(model.oscillators):
        fb = model.feedbacks.get(o.label)
        if fb is None:
            continue
        u, v = 2 * i, 2 * i + 1
        P[i] = (
            fb.noise_psd / (2 * o.mass)
            + fb.velocity_gain * C[v, v]
            + fb.position_gain * C[u, v]
        )
    return P


def _uncoupled_frequencies(matrices: StateMatrices) -> np.ndarray:
    """Per-oscillator stiffness frequency with coupling removed (rad/s).

    Row 2i+1 of the drift matrix holds -(Omega_i^2 - A_i/m_i) - sum_j k_ij/m_i
    at the u_i column and +k_ij/m_i at each partner column, so summing the
    position columns cancels the coupling contribution exactly.
    """
    n = matrices.n_oscillators
    w = np.empty(n)
    for i in range(n):
        row = matrices.drift[2 * i + 1]
        w2 = -np.sum(row[0::2])
        w[i] = np.sqrt(w2) if w2 > 0 else 0.0
    return w


def normal_modes(matrices: StateMatrices) -> NormalModes:
    """Eigenmodes of the drift matrix, reporting each conjugate pair once.

    Near-degenerate oscillator pairs (uncoupled frequencies within 1e-3
    relative) get a ``splittings`` entry: the difference of the two normal
    mode frequencies nearest their common frequency, which is how a coupling
    rate is read off a measured spectrum.  A non-diagonalizable drift matrix
    triggers DefectiveMatrixWarning; eigenvalues are still returned.
    """
    lam, vecs = np.linalg.eig(matrices.drift)
    defective = False
    try:
        cond = np.linalg.cond(vecs)
    except np.linalg.LinAlgError:
        cond = np.inf
    if not np.isfinite(cond) or cond > 1e12:
        defective = True
        warnings.warn(
            f"drift matrix is defective or nearly so (eigenvector condition {cond:.2e}); "
            "frequencies remain valid, eigenvectors do not span the state space",
            DefectiveMatrixWarning,
        )

    # One representative per conjugate pair: keep Im >= 0.
    keep = lam.imag >= 0
    lam_k, vecs_k = lam[keep], vecs[:, keep]
    order = np.argsort(lam_k.imag, kind="stable")
    lam_k, vecs_k = lam_k[order], vecs_k[:, order]

    frequencies = np.abs(lam_k.imag)
    linewidths = -2.0 * lam_k.real

    splittings: dict[tuple[int, int], float] = {}
    w_unc = _uncoupled_frequencies(matrices)
    for i in range(len(w_unc)):
        for j in range(i + 1, len(w_unc)):
            w_max = max(w_unc[i], w_unc[j])
            if w_max > 0 and abs(w_unc[i] - w_unc[j]) <= 1e-3 * w_max:
                center = 0.5 * (w_unc[i] + w_unc[j])
                nearest = np.argsort(np.abs(frequencies - center), kind="stable")[:2]
                if len(nearest) == 2:
                    splittings[(i, j)] = float(
                        abs(frequencies[nearest[0]] - frequencies[nearest[1]])
                    )

    return NormalModes(
        frequencies=frequencies,
        linewidths=linewidths,
        eigenvectors=vecs_k,
        splittings=splittings,
        defective=defective,
    )


def steady_state(model: SystemModel) -> SteadyState:
    """Compile, solve, and assemble every stationary quantity in one call."""
    matrices = compile(model)
    C = solve_stationary(matrices)
    t_pos, t_kin = mode_temperatures(C, model)
    return SteadyState(
        labels=model.labels,
        covariance=C,
        mode_temperature_positional=t_pos,
        mode_temperature_kinetic=t_kin,
        bath_flux=bath_heat_flux(C, model),
        feedback_flux=feedback_heat_flux(C, model),
        residual=lyapunov_residual(matrices, C),
    )
