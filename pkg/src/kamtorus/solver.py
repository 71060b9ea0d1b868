"""Quasi-Newton iteration for invariant tori at fixed Diophantine frequency.

One step solves the block-triangular cohomological system in the adapted
frame,

    [[O, T], [O, O]] xi + L_omega xi = eta,
    eta^L = -N^T (Omega o K) E,   eta^N = L^T (Omega o K) E,

with the phase fix <xi^L> = 0, and corrects K <- K + P xi.  The iteration
shrinks analyticity strips on the schedule

    delta_s = delta_0 / a1^s,   rho_{s+1} = rho_s - 3 delta_s,
    delta_0 = rho_0 / a3,       a3 = 3 a1 a2 / ((a1-1)(a2-1)),

so the final strip never drops below rho_inf = rho_0 / a2.  The frequency is
never modified.  Error norms are Fourier majorants of the truncated model.
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


class CompatibilityError(ArithmeticError):
    """The solvability condition <eta^N> = 0 fails beyond tolerance."""


class HypothesisError(RuntimeError):
    """A named smallness/non-degeneracy hypothesis fails at this step."""

    def __init__(self, name: str, detail: str):
        self.hypothesis = name
        super().__init__(f"hypothesis {name} failed: {detail}")


@dataclass(frozen=True)
class NewtonSchedule:
    """Strip-shrinking schedule and stopping policy of the iteration.

    ``band_refinement`` enables the optional tail policy: when the outer-half
    modes carry more than ``tail_threshold`` of ||E||, the bands double before
    the next step (the event is reported in the log).
    """

    a1: float = 2.0
    a2: float = 2.0
    c_n: float | None = None  # smallness scale; None = max(1, ||X_H o K||_rho) at start
    max_iters: int = 20
    stop_tol: float = 1e-12
    rho0: float = 0.1
    band_refinement: bool = False
    tail_threshold: float = 0.1

    def __post_init__(self):
        if self.a1 <= 1 or self.a2 <= 1:
            raise ValueError("a1 and a2 must be > 1")
        if self.rho0 <= 0:
            raise ValueError("rho0 must be positive")

    @property
    def a3(self) -> float:
        return 3.0 * self.a1 * self.a2 / ((self.a1 - 1.0) * (self.a2 - 1.0))

    @property
    def delta0(self) -> float:
        return self.rho0 / self.a3

    def delta(self, s: int) -> float:
        return self.delta0 / self.a1**s

    @property
    def rho_inf(self) -> float:
        return self.rho0 / self.a2


def resolve_smallness_scale(schedule: NewtonSchedule, cand: TorusCandidate,
                            kitchen: GridKitchen | None = None) -> float:
    """The auxiliary smallness scale: user override or max(1, ||X_H o K||_rho)."""
    if schedule.c_n is not None:
        return float(schedule.c_n)
    kk = kitchen if kitchen is not None else grid_kitchen(cand)
    return max(1.0, kk.XH.norm(cand.rho).value)


def tail_fraction(f, rho: float) -> float:
    """Share of the majorant norm carried by the outer half of the index box."""
    total = f.norm(rho).value
    if total == 0.0:
        return 0.0
    inner = f.truncate(tuple(n // 2 for n in f.bands))
    return max(0.0, 1.0 - inner.norm(rho).value / total)


# ---------------------------------------------------------------------------
# triangular solve
# ---------------------------------------------------------------------------


def solve_triangular(eta_L: FourierMap, eta_N: FourierMap, T: FourierMap,
                     dio: DiophantineParams, xi_L0: np.ndarray | None = None,
                     compat_tol: float = 1e-10):
    """Solve [[O,T],[O,O]] xi + L_omega xi = eta for xi = (xi^L, xi^N).

        xi^N = xi^N_0 + R_omega(eta^N),
        xi^N_0 = <T>^{-1} <eta^L - T R_omega(eta^N)>,
        xi^L = xi^L_0 + R_omega(eta^L - T xi^N).

    Returns (xi_L, xi_N, xi_N0, diagnostics).  Requires <eta^N> ~ 0 and a
    nonsingular averaged torsion.
    """
    bands = eta_L.bands
    n = eta_L.shape[0]
    scale = max(1.0, eta_L.norm(0.0).value, eta_N.norm(0.0).value)
    compat = float(np.max(np.abs(eta_N.average())))
    if compat > compat_tol * scale:
        raise CompatibilityError(
            f"<eta^N> = {compat:.3e} exceeds {compat_tol:.1e} x scale {scale:.3e}"
        )
    avgT = T.average().real
    try:
        R_etaN = solve_cohomological(eta_N, dio)
        T_RetaN = matmul(T, R_etaN, out_bands=bands)
        rhs = (eta_L - T_RetaN).average().real
        xi_N0 = np.linalg.solve(avgT, rhs)
    except np.linalg.LinAlgError as exc:
        raise TwistDegeneracyError("averaged torsion singular in triangular solve") from exc
    xi_N = R_etaN.add_constant(xi_N0)
    T_xiN = T_RetaN + T.matmul_constant(xi_N0)  # T.(const) is exact in coefficients
    xi_L = solve_cohomological(eta_L - T_xiN, dio)
    if xi_L0 is not None:
        xi_L = xi_L.add_constant(np.asarray(xi_L0, dtype=float).reshape(n, 1))
    # plug-back residual of the truncated system
    res_L = xi_L.lie(dio.omega) + T_xiN - eta_L
    res_N = xi_N.lie(dio.omega) - eta_N
    res_N = res_N.add_constant(eta_N.average())  # the solvable part excludes <eta^N>
    residual = max(res_L.norm(0.0).value, res_N.norm(0.0).value)
    diag = {"residual": residual, "compat": compat, "xi_N0": xi_N0}
    return xi_L, xi_N, xi_N0, diag


# ---------------------------------------------------------------------------
# one Newton step
# ---------------------------------------------------------------------------


@dataclass
class StepDiagnostics:
    step: int
    rho: float
    delta: float
    err_before: float
    err_after: float
    delta_k_norm: float
    solve_residual: float
    compat: float
    avg_xi_L: float
    frame_norms: dict = field(default_factory=dict)
    hypothesis_margins: dict = field(default_factory=dict)
    contraction_bound: float | None = None
    contraction_ok: bool | None = None


def newton_step(cand: TorusCandidate, schedule: NewtonSchedule, delta: float,
                step_index: int = 0, kitchen: GridKitchen | None = None,
                frames: FrameBundle | None = None):
    """One quasi-Newton correction; returns (new candidate, StepDiagnostics).

    The new candidate lives on the strip rho - 3*delta.  Raises
    HypothesisError (named), CompatibilityError, TwistDegeneracyError or
    DomainEscapeError on failure.
    """
    rho = cand.rho
    if not 0 < 3 * delta < rho:
        raise ValueError(f"need 0 < 3*delta < rho, got delta={delta}, rho={rho}")
    kk = kitchen if kitchen is not None else grid_kitchen(cand)
    E = invariance_error(cand, kk)
    errE = E.norm(rho).value
    c_small = resolve_smallness_scale(schedule, cand, kk)
    if errE / delta >= c_small:
        raise HypothesisError(
            "smallness ||E||/delta < c",
            f"||E||_rho/delta = {errE / delta:.3e} >= {c_small:.3e}",
        )
    fr = frames if frames is not None else build_frames(cand, kitchen=kk)

    Om_E = matmul(kk.Omega, E, out_bands=cand.bands)
    eta_L = -matmul(fr.N.T, Om_E, out_bands=cand.bands)
    eta_N = matmul(fr.L.T, Om_E, out_bands=cand.bands)
    xi_L, xi_N, xi_N0, sdiag = solve_triangular(eta_L, eta_N, fr.T, cand.dio)

    delta_K = matmul(fr.L, xi_L, out_bands=cand.bands) + matmul(fr.N, xi_N, out_bands=cand.bands)
    new_per = cand.k_per + delta_K
    new_cand = cand.with_updates(k_per=new_per, rho=rho - 3 * delta)

    margin = new_cand.domain_margin()
    if margin <= 0:
        raise HypothesisError("domain", f"corrected torus leaves the domain (margin {margin:.3e})")

    new_kitchen = grid_kitchen(new_cand)
    new_E = invariance_error(new_cand, new_kitchen)
    err_after_mid = new_E.norm(max(rho - 2 * delta, new_cand.rho)).value
    diag = StepDiagnostics(
        step=step_index,
        rho=rho,
        delta=delta,
        err_before=errE,
        err_after=err_after_mid,
        delta_k_norm=delta_K.norm(max(rho - 2 * delta, new_cand.rho)).value,
        solve_residual=sdiag["residual"],
        compat=sdiag["compat"],
        avg_xi_L=float(np.max(np.abs(xi_L.average()))),
        frame_norms=fr.norm_table(rho, delta),
        hypothesis_margins={"domain_margin": margin, "smallness": c_small - errE / delta},
    )
    diag._new_kitchen = new_kitchen  # reused by the driving loop
    diag._new_E = new_E
    return new_cand, diag


# ---------------------------------------------------------------------------
# the iteration
# ---------------------------------------------------------------------------


@dataclass
class SolveResult:
    converged: bool
    reason: str
    candidate: TorusCandidate
    final_error: float
    steps: list
    log: list


def iterate_kam(cand: TorusCandidate, schedule: NewtonSchedule,
                contraction_ledger=None) -> SolveResult:
    """Iterate newton_step on the shrinking-strip schedule until ||E|| <= stop_tol.

    ``contraction_ledger`` is an optional callable (cand, frames, delta) ->
    C_E evaluating the per-step quadratic-contraction constant; when given,
    the literal inequality ||E_{s+1}|| <= C_E/(gamma^4 delta_s^{4 tau})
    ||E_s||^2 is recorded in the step diagnostics.

    Failure modes: two consecutive error increases (divergence), any named
    hypothesis failure, or the iteration cap.
    """
    if abs(cand.rho - schedule.rho0) > 1e-12 * max(1.0, schedule.rho0):
        cand = cand.with_updates(rho=schedule.rho0)
    log: list = []
    steps: list = []
    current = cand
    increases = 0
    prev_err = None
    kk = None
    for s in range(schedule.max_iters + 1):
        if kk is None:
            kk = grid_kitchen(current)
        E = invariance_error(current, kk)
        err = E.norm(current.rho).value
        tail = tail_fraction(E, current.rho) if err > 0 else 0.0
        log.append({
            "step": s,
            "rho": current.rho,
            "delta": schedule.delta(s),
            "err": err,
            "tail_fraction": tail,
            "bands": list(current.bands),
        })
        if err <= schedule.stop_tol:
            return SolveResult(True, f"converged in {s} steps", current, err, steps, log)
        if schedule.band_refinement and tail > schedule.tail_threshold:
            new_bands = tuple(2 * n for n in current.bands)
            new_grid = tuple(2 * n + 1 for n in new_bands)
            current = current.with_updates(
                k_per=current.k_per.pad_bands(new_bands, new_grid)
            )
            kk = grid_kitchen(current)
            E = invariance_error(current, kk)
            log[-1]["band_refined_to"] = list(new_bands)
        if prev_err is not None:
            if err > prev_err:
                increases += 1
            else:
                increases = 0
            if increases >= 2:
                return SolveResult(False, "divergence: error grew twice consecutively",
                                   current, err, steps, log)
        if s == schedule.max_iters:
            return SolveResult(False, f"iteration cap {schedule.max_iters} reached",
                               current, err, steps, log)
        delta = schedule.delta(s)
        frames = build_frames(current, kitchen=kk)
        try:
            new_cand, diag = newton_step(current, schedule, delta, step_index=s,
                                         kitchen=kk, frames=frames)
        except (HypothesisError, CompatibilityError, TwistDegeneracyError) as exc:
            return SolveResult(False, f"step {s}: {exc}", current, err, steps, log)
        if contraction_ledger is not None:
            c_e = contraction_ledger(current, frames, delta)
            gamma, tau = current.dio.gamma, current.dio.tau
            bound = c_e / (gamma**4 * delta ** (4 * tau)) * err**2
            diag.contraction_bound = bound
            diag.contraction_ok = bool(diag.err_after <= bound)
        log[-1].update({
            "err_after": diag.err_after,
            "delta_k": diag.delta_k_norm,
            "solve_residual": diag.solve_residual,
            "compat": diag.compat,
            "contraction_bound": diag.contraction_bound,
            "contraction_ok": diag.contraction_ok,
            "frame_norms": diag.frame_norms,
            "hypothesis_margins": diag.hypothesis_margins,
        })
        steps.append(diag)
        prev_err = err
        current = new_cand
        kk = getattr(diag, "_new_kitchen", None)
    return SolveResult(False, "unreachable", current, np.inf, steps, log)


def contraction_slope(log: list, floor_factor: float = 30.0, cap: float = 1e-1) -> float | None:
    """Contraction exponent log||E_{s+1}|| / log||E_s|| averaged over the
    pre-roundoff regime.

    Pairs qualify when the incoming error is below ``cap`` (asymptotic regime)
    and the outgoing error stays above floor_factor x the final error (not yet
    contaminated by the truncation/roundoff floor).  Returns None when no pair
    qualifies.
    """
    errs = [rec["err"] for rec in log]
    if len(errs) < 3:
        return None
    floor = max(errs[-1], 1e-300) * floor_factor
    ratios = []
    for a, b in zip(errs, errs[1:]):
        if floor < a < cap and b > floor and b < a:
            ratios.append(np.log(b) / np.log(a))
    if not ratios:
        return None
    return float(np.mean(ratios))
