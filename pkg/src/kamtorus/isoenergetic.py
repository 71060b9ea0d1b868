"""Generalized iso-energetic quasi-Newton iteration.

Corrects the parameterization and the frequency simultaneously so the torus
lands on a prescribed level c_0 of a target conserved quantity c (the energy,
a component of p, or any verified first integral in involution with both).
The frequency moves only along a fixed ray Theta = {s omega_* : 1 < s <
sigma_omega}, which keeps the Diophantine scan certificate of omega_* valid
for every iterate: the correction is Delta omega = -omega xi^omega, i.e. a
pure rescaling.

The linearized system augments the triangular block system with the scalar
level condition <Tdown xi^N> = eta^omega, Tdown = Dc(K) N, solved through the
bordered matrix <T_c> = [[<T>, omega_hat], [<Tdown>, 0]].
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cohomology import DiophantineParams, solve_cohomological
from .fourier import FourierMap, matmul
from .frames import (
    FrameBundle,
    GridKitchen,
    TorusCandidate,
    TwistDegeneracyError,
    build_frames,
    grid_kitchen,
    invariance_error,
)
from .hamiltonian import ConservedQuantity
from .solver import CompatibilityError, HypothesisError, NewtonSchedule, resolve_smallness_scale


class RayExitError(RuntimeError):
    """The corrected frequency leaves the admissible ray."""


@dataclass(frozen=True)
class FrequencyRay:
    """Ray Theta = {s omega_* : 1 < s < sigma_omega} with the current scale."""

    omega_star: np.ndarray
    sigma_omega: float
    scale: float

    def __post_init__(self):
        object.__setattr__(self, "omega_star", np.asarray(self.omega_star, dtype=np.float64))
        if self.sigma_omega <= 1:
            raise ValueError("sigma_omega must be > 1")
        if not 1.0 < self.scale < self.sigma_omega:
            raise ValueError(f"scale {self.scale} outside (1, {self.sigma_omega})")

    @classmethod
    def at_midpoint(cls, omega_star, sigma_omega: float = 2.0) -> "FrequencyRay":
        """Start at scale sqrt(sigma_omega), maximizing the initial boundary margin."""
        return cls(omega_star, sigma_omega, float(np.sqrt(sigma_omega)))

    @property
    def omega(self) -> np.ndarray:
        return self.scale * self.omega_star

    def boundary_margin(self) -> float:
        """Sup-norm distance from omega to the ray endpoints."""
        return float(
            min(self.scale - 1.0, self.sigma_omega - self.scale) * np.max(np.abs(self.omega_star))
        )

    def rescaled(self, factor: float) -> "FrequencyRay":
        new_scale = self.scale * factor
        if not 1.0 < new_scale < self.sigma_omega:
            raise RayExitError(
                f"scale {new_scale:.6f} leaves (1, {self.sigma_omega}) after factor {factor:.6f}"
            )
        return FrequencyRay(self.omega_star, self.sigma_omega, new_scale)


@dataclass
class TotalError:
    """Invariance error paired with the conserved-level error E^omega = <c o K> - c0."""

    E: FourierMap
    E_omega: float

    def combined_norm(self, rho: float) -> float:
        return max(self.E.norm(rho).value, abs(self.E_omega))


def total_error(cand: TorusCandidate, conserved: ConservedQuantity, c0: float,
                kitchen: GridKitchen | None = None) -> TotalError:
    kk = kitchen if kitchen is not None else grid_kitchen(cand, conserved)
    if kk.c_map is None:
        kk = grid_kitchen(cand, conserved)
    E = invariance_error(cand, kk)
    c_avg = float(kk.c_map.average().real[0, 0])
    return TotalError(E=E, E_omega=c_avg - c0)


# ---------------------------------------------------------------------------
# bordered triangular solve
# ---------------------------------------------------------------------------


def solve_triangular_iso(eta_L: FourierMap, eta_N: FourierMap, eta_omega: float,
                         T: FourierMap, Tdown: FourierMap, dio: DiophantineParams,
                         xi_L0: np.ndarray | None = None, compat_tol: float = 1e-10):
    """Solve the frequency-augmented triangular system.

        xi^N = xi^N_0 + R_omega(eta^N),
        (xi^N_0, xi^omega) = <T_c>^{-1} ( <eta^L - T R(eta^N)> ,
                                          eta^omega - <Tdown R(eta^N)> ),
        xi^L = xi^L_0 + R_omega(eta^L - T xi^N),

    with the constant row forced by the scalar condition <Tdown xi^N> =
    eta^omega and the zero-average condition of the xi^L equation.  Returns
    (xi_L, xi_N, xi_N0, xi_omega, diagnostics).
    """
    bands = eta_L.bands
    n = eta_L.shape[0]
    d = eta_L.d
    scale = max(1.0, eta_L.norm(0.0).value, eta_N.norm(0.0).value, abs(eta_omega))
    compat = float(np.max(np.abs(eta_N.average())))
    if compat > compat_tol * scale:
        raise CompatibilityError(
            f"<eta^N> = {compat:.3e} exceeds {compat_tol:.1e} x scale {scale:.3e}"
        )
    avgT = T.average().real
    avgTdown = Tdown.average().real.reshape(n)
    omega_hat = np.concatenate([dio.omega, np.zeros(n - d)])
    Tc = np.zeros((n + 1, n + 1))
    Tc[:n, :n] = avgT
    Tc[:n, n] = omega_hat
    Tc[n, :n] = avgTdown

    R_etaN = solve_cohomological(eta_N, dio)
    T_RetaN = matmul(T, R_etaN, out_bands=bands)
    Tdown_RetaN = matmul(Tdown, R_etaN, out_bands=bands)
    rhs = np.zeros(n + 1)
    rhs[:n] = (eta_L - T_RetaN).average().real[:, 0]
    rhs[n] = eta_omega - float(Tdown_RetaN.average().real[0, 0])
    try:
        sol = np.linalg.solve(Tc, rhs)
    except np.linalg.LinAlgError as exc:
        raise TwistDegeneracyError("averaged extended torsion singular") from exc
    xi_N0 = sol[:n].reshape(n, 1)
    xi_omega = float(sol[n])

    xi_N = R_etaN.add_constant(xi_N0)
    T_xiN = T_RetaN + T.matmul_constant(xi_N0)
    omega_hat_map = FourierMap.constant(omega_hat[:, None] * xi_omega, bands, eta_L.grid)
    xi_L = solve_cohomological(eta_L - T_xiN - omega_hat_map, dio)
    if xi_L0 is not None:
        xi_L = xi_L.add_constant(np.asarray(xi_L0, dtype=float).reshape(n, 1))

    res_L = xi_L.lie(dio.omega) + T_xiN + omega_hat_map - eta_L
    res_N = xi_N.lie(dio.omega) - eta_N
    res_N = res_N.add_constant(eta_N.average())
    res_omega = abs(
        float((Tdown_RetaN + Tdown.matmul_constant(xi_N0)).average().real[0, 0]) - eta_omega
    )
    residual = max(res_L.norm(0.0).value, res_N.norm(0.0).value, res_omega)
    diag = {"residual": residual, "compat": compat, "xi_N0": xi_N0, "xi_omega": xi_omega}
    return xi_L, xi_N, xi_N0, xi_omega, diag


# ---------------------------------------------------------------------------
# one iso step
# ---------------------------------------------------------------------------


@dataclass
class IsoStepDiagnostics:
    step: int
    rho: float
    delta: float
    err_before: float
    err_omega_before: float
    err_after: float
    err_omega_after: float
    xi_omega: float
    omega_after: np.ndarray
    ray_margin: float
    delta_k_norm: float
    solve_residual: float
    compat: float
    avg_xi_L: float
    frame_norms: dict = field(default_factory=dict)
    hypothesis_margins: dict = field(default_factory=dict)
    contraction_bound: float | None = None
    contraction_ok: bool | None = None


def newton_step_iso(cand: TorusCandidate, ray: FrequencyRay, conserved: ConservedQuantity,
                    c0: float, schedule: NewtonSchedule, delta: float, step_index: int = 0,
                    kitchen: GridKitchen | None = None, frames: FrameBundle | None = None):
    """One simultaneous (K, omega) correction; returns
    (new candidate, new ray, IsoStepDiagnostics)."""
    rho = cand.rho
    if not 0 < 3 * delta < rho:
        raise ValueError(f"need 0 < 3*delta < rho, got delta={delta}, rho={rho}")
    if not np.allclose(ray.omega, cand.omega, rtol=0, atol=1e-300):
        raise ValueError("candidate frequency must equal ray.omega exactly")
    kk = kitchen if kitchen is not None else grid_kitchen(cand, conserved)
    terr = total_error(cand, conserved, c0, kk)
    err_c = terr.combined_norm(rho)
    c_small = resolve_smallness_scale(schedule, cand, kk)
    if err_c / delta >= c_small:
        raise HypothesisError(
            "smallness ||E_c||/delta < c",
            f"||E_c||_rho/delta = {err_c / delta:.3e} >= {c_small:.3e}",
        )
    fr = frames if frames is not None else build_frames(cand, conserved, kitchen=kk)
    if fr.Tdown is None:
        raise ValueError("frames were built without the extended torsion")

    Om_E = matmul(kk.Omega, terr.E, out_bands=cand.bands)
    eta_L = -matmul(fr.N.T, Om_E, out_bands=cand.bands)
    eta_N = matmul(fr.L.T, Om_E, out_bands=cand.bands)
    eta_omega = -terr.E_omega
    xi_L, xi_N, xi_N0, xi_omega, sdiag = solve_triangular_iso(
        eta_L, eta_N, eta_omega, fr.T, fr.Tdown, cand.dio
    )

    new_ray = ray.rescaled(1.0 - xi_omega)  # raises RayExitError at the boundary
    delta_K = matmul(fr.L, xi_L, out_bands=cand.bands) + matmul(fr.N, xi_N, out_bands=cand.bands)
    new_per = cand.k_per + delta_K
    # every ray point s*omega_* with s > 1 inherits the base scan certificate
    new_dio = DiophantineParams(
        new_ray.omega, cand.dio.gamma, cand.dio.tau, cand.dio.scan_limit, check=False
    )
    new_cand = cand.with_updates(
        k_per=new_per, rho=rho - 3 * delta, omega=new_ray.omega, dio=new_dio
    )
    margin = new_cand.domain_margin()
    if margin <= 0:
        raise HypothesisError("domain", f"corrected torus leaves the domain (margin {margin:.3e})")

    new_kitchen = grid_kitchen(new_cand, conserved)
    new_terr = total_error(new_cand, conserved, c0, new_kitchen)
    mid_rho = max(rho - 2 * delta, new_cand.rho)
    diag = IsoStepDiagnostics(
        step=step_index,
        rho=rho,
        delta=delta,
        err_before=terr.E.norm(rho).value,
        err_omega_before=terr.E_omega,
        err_after=new_terr.E.norm(mid_rho).value,
        err_omega_after=new_terr.E_omega,
        xi_omega=xi_omega,
        omega_after=new_ray.omega,
        ray_margin=new_ray.boundary_margin(),
        delta_k_norm=delta_K.norm(mid_rho).value,
        solve_residual=sdiag["residual"],
        compat=sdiag["compat"],
        avg_xi_L=float(np.max(np.abs(xi_L.average()))),
        frame_norms=fr.norm_table(rho, delta),
        hypothesis_margins={"domain_margin": margin, "ray_margin": new_ray.boundary_margin(),
                            "smallness": c_small - err_c / delta},
    )
    diag._new_kitchen = new_kitchen
    diag._new_terr = new_terr
    return new_cand, new_ray, diag


@dataclass
class IsoSolveResult:
    converged: bool
    reason: str
    candidate: TorusCandidate
    ray: FrequencyRay
    omega_initial: np.ndarray
    omega_final: np.ndarray
    c0: float
    c_final: float
    final_error: float
    steps: list
    log: list


def iterate_kam_iso(cand: TorusCandidate, ray: FrequencyRay, conserved: ConservedQuantity,
                    c0: float, schedule: NewtonSchedule,
                    contraction_ledger=None) -> IsoSolveResult:
    """Drive newton_step_iso until max(||E||, |E^omega|) <= stop_tol.

    The ray direction is immutable: every iterate's frequency is scale * omega_star
    with the same stored omega_star, so omega_s / |omega_s| is bit-identical
    across steps.
    """
    if abs(cand.rho - schedule.rho0) > 1e-12 * max(1.0, schedule.rho0):
        cand = cand.with_updates(rho=schedule.rho0)
    omega_initial = ray.omega.copy()
    log: list = []
    steps: list = []
    current, current_ray = cand, ray
    increases = 0
    prev = None
    kk = None
    terr = None
    for s in range(schedule.max_iters + 1):
        if kk is None:
            kk = grid_kitchen(current, conserved)
            terr = total_error(current, conserved, c0, kk)
        err = terr.combined_norm(current.rho)
        log.append({
            "step": s,
            "rho": current.rho,
            "delta": schedule.delta(s),
            "err": err,
            "err_inv": terr.E.norm(current.rho).value,
            "err_omega": terr.E_omega,
            "omega": current.omega.tolist(),
            "ray_scale": current_ray.scale,
        })
        c_final = c0 + terr.E_omega
        if err <= schedule.stop_tol:
            return IsoSolveResult(True, f"converged in {s} steps", current, current_ray,
                                  omega_initial, current.omega.copy(), c0, c_final, err,
                                  steps, log)
        if prev is not None:
            increases = increases + 1 if err > prev else 0
            if increases >= 2:
                return IsoSolveResult(False, "divergence: error grew twice consecutively",
                                      current, current_ray, omega_initial,
                                      current.omega.copy(), c0, c_final, err, steps, log)
        if s == schedule.max_iters:
            return IsoSolveResult(False, f"iteration cap {schedule.max_iters} reached",
                                  current, current_ray, omega_initial, current.omega.copy(),
                                  c0, c_final, err, steps, log)
        delta = schedule.delta(s)
        frames = build_frames(current, conserved, kitchen=kk)
        try:
            new_cand, new_ray, diag = newton_step_iso(
                current, current_ray, conserved, c0, schedule, delta,
                step_index=s, kitchen=kk, frames=frames,
            )
        except (HypothesisError, CompatibilityError, TwistDegeneracyError, RayExitError) as exc:
            return IsoSolveResult(False, f"step {s}: {exc}", current, current_ray,
                                  omega_initial, current.omega.copy(), c0, c_final, err,
                                  steps, log)
        if contraction_ledger is not None:
            c_ec = contraction_ledger(current, frames, delta)
            gamma, tau = current.dio.gamma, current.dio.tau
            bound = c_ec / (gamma**4 * delta ** (4 * tau)) * err**2
            diag.contraction_bound = bound
            diag.contraction_ok = bool(
                max(diag.err_after, abs(diag.err_omega_after)) <= bound
            )
        log[-1].update({
            "err_after": diag.err_after,
            "err_omega_after": diag.err_omega_after,
            "xi_omega": diag.xi_omega,
            "ray_margin": diag.ray_margin,
            "contraction_bound": diag.contraction_bound,
            "contraction_ok": diag.contraction_ok,
        })
        steps.append(diag)
        prev = err
        current, current_ray = new_cand, new_ray
        kk = getattr(diag, "_new_kitchen", None)
        terr = getattr(diag, "_new_terr", None)
    return IsoSolveResult(False, "unreachable", current, current_ray, omega_initial,
                          current.omega.copy(), c0, np.nan, np.inf, steps, log)
