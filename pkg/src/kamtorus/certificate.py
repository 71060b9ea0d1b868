"""Explicit-constant certification of approximate invariant tori.

This module evaluates the complete chain of constants behind the existence
statement: from the global analytic bounds of the system callbacks (the
c_* family), through the frame/torsion/reducibility constants (C_* family),
the per-step correction constants, and finally the three headline constants
E1, E2, E3 entering the hypothesis ratio

    ratio = E1 * ||E||_rho / (gamma^4 * rho^{4 tau})      (ordinary mode),
    ratio = E1 * ||E_c||_rho / (gamma^4 * rho^{4 tau})    (iso mode).

ratio < 1 certifies a true invariant torus nearby, with closeness bounds
||K_inf - K|| < E2 ||E|| / (gamma^2 rho^{2 tau}) and the E3 drift bound.

The arithmetic is plain floating point with an upward safety margin applied
to sampled global constants only; every report states that the evaluation is
not a rigorously rounded enclosure, that norms refer to the truncated Fourier
model, and that gamma is a scan-limited lower-bound certificate.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .cohomology import DiophantineParams, russmann_constant
from .frames import FrameBundle, TorusCandidate, measure_hypothesis_data
from .hamiltonian import ConservedQuantity, HamiltonianSystem
from .solver import NewtonSchedule

REPORT_HEADER = (
    "floating-point constant chain (no directed rounding); norms are Fourier "
    "majorants of the truncated model; gamma is a finite-scan lower bound; "
    "sampled global constants carry a 5% upward margin"
)


class LedgerError(ArithmeticError):
    """A ledger row evaluated to NaN/inf; the offending row is named."""


# ---------------------------------------------------------------------------
# global norm constants (analytic bounds of the system callbacks)
# ---------------------------------------------------------------------------

_CANONICAL_EXACT = {
    "c_Omega_0": 1.0, "c_Omega_1": 0.0,
    "c_tOmega_0": 1.0, "c_tOmega_1": 0.0, "c_tOmega_2": 0.0,
    "c_G_0": 1.0, "c_G_1": 0.0, "c_G_2": 0.0,
    "c_J_0": 1.0, "c_J_1": 0.0, "c_J_2": 0.0,
    "c_JT_0": 1.0, "c_JT_1": 0.0,
}

_GLOBAL_FIELDS = list(_CANONICAL_EXACT) + [
    "c_H_1", "c_XH_0", "c_XH_1", "c_XH_2", "c_XHT_1",
    "c_p_1", "c_pT_1",
    "c_Xp_0", "c_Xp_1", "c_Xp_2", "c_XpT_0", "c_XpT_1", "c_XpT_2",
    "c_c_1", "c_c_2",
]


@dataclass
class GlobalNormConstants:
    """Sampled/exact bounds on the analytic norms of the system callbacks."""

    values: dict
    provenance: dict

    def __getattr__(self, name):
        try:
            return self.values[name]
        except KeyError as exc:
            raise AttributeError(name) from exc

    def with_zero_integrals(self) -> "GlobalNormConstants":
        """Copy with every p / X_p constant zeroed (the Lagrangian reduction)."""
        vals = dict(self.values)
        prov = dict(self.provenance)
        for key in ("c_p_1", "c_pT_1", "c_Xp_0", "c_Xp_1", "c_Xp_2",
                    "c_XpT_0", "c_XpT_1", "c_XpT_2"):
            vals[key] = 0.0
            prov[key] = "canonical-exact"
        return GlobalNormConstants(vals, prov)


def _rank1_lattice(npts: int, dim: int) -> np.ndarray:
    """Deterministic rank-1 lattice in [0,1)^dim (Korobov-style generator)."""
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    gen = np.array([np.modf(phi ** (i + 1))[0] for i in range(dim)])
    j = np.arange(npts)[:, None]
    return np.modf(j * gen[None, :] + 0.5 / npts)[0]


def _domain_points(sys: HamiltonianSystem, lattice_density: int) -> np.ndarray:
    """Complexified sample set: rank-1 lattice through the domain box plus a
    sweep with the imaginary parts pinned at the extreme width."""
    box = sys.domain
    a = box.angle_count
    m = 2 * sys.n - a  # disc-constrained coordinates
    npts = max(int(lattice_density), 64)
    u = _rank1_lattice(npts, 2 * a + 2 * m)
    x = u[:, :a] + 1j * box.imag_width * (2.0 * u[:, a : 2 * a] - 1.0)
    ang = 2.0 * np.pi * u[:, 2 * a : 2 * a + m]
    rad = box.y_radius * u[:, 2 * a + m :]
    y = box.y_center + rad * np.exp(1j * ang)
    interior = np.concatenate([x, y], axis=1)

    u2 = _rank1_lattice(npts, a + m)
    signs = np.where(_rank1_lattice(npts, max(a, 1))[:, :a] > 0.5, 1.0, -1.0)
    x2 = u2[:, :a] + 1j * box.imag_width * signs
    y2 = box.y_center + box.y_radius * np.exp(2j * np.pi * u2[:, a:])
    boundary = np.concatenate([x2, y2], axis=1)
    real_pts = np.concatenate(
        [u2[:, :a], box.y_center + 0.9 * box.y_radius * (2 * u2[:, a:] - 1)], axis=1
    ).astype(np.complex128)
    return np.concatenate([interior, boundary, real_pts], axis=0)


def estimate_global_constants(sys: HamiltonianSystem, lattice_density: int = 2048,
                              margin: float = 0.05,
                              conserved: ConservedQuantity | None = None) -> GlobalNormConstants:
    """Sampled maxima (x 1+margin) of the callback norms over the complexified domain.

    Canonical structure entries are set exactly; with no first integrals all
    p/X_p entries are exact zeros.  Provenance records which is which.
    """
    vals: dict = {}
    prov: dict = {}
    z = _domain_points(sys, lattice_density)
    up = 1.0 + margin

    if sys.geometry.is_canonical:
        vals.update(_CANONICAL_EXACT)
        prov.update({k: "canonical-exact" for k in _CANONICAL_EXACT})
    else:
        geo = sys.geometry
        mats = {
            "c_Omega": (geo.omega_mat, geo.d_omega, None),
            "c_tOmega": (geo.tilde_omega, geo.d_tilde_omega, geo.d2_tilde_omega),
            "c_G": (geo.metric_G, geo.d_G, geo.d2_G),
            "c_J": (geo.iso_J, geo.d_J, geo.d2_J),
        }
        for key, (f0, f1, f2) in mats.items():
            sup0 = np.abs(f0(z)).max(axis=0)
            vals[f"{key}_0"] = up * float(sup0.sum(axis=1).max())
            if f1 is None:
                raise ValueError(f"non-canonical structure needs derivative callback for {key}")
            sup1 = np.abs(f1(z)).max(axis=0)  # (2n, 2n, 2n): d M_ij / dz_l
            vals[f"{key}_1"] = up * float(sup1.sum(axis=(1, 2)).max())
            if key != "c_Omega":
                if f2 is None:
                    raise ValueError(f"missing second-derivative callback for {key}")
                sup2 = np.abs(f2(z)).max(axis=0)
                vals[f"{key}_2"] = up * float(sup2.sum(axis=(1, 2, 3)).max())
        vals["c_JT_0"] = up * float(np.abs(geo.iso_J(z)).max(axis=0).sum(axis=0).max())
        vals["c_JT_1"] = up * float(np.abs(geo.d_J(z)).max(axis=0).sum(axis=(0, 2)).max())
        prov.update({k: "sampled" for k in vals})

    def sampled(key, value):
        vals[key] = up * float(value)
        prov[key] = "sampled"

    sampled("c_H_1", np.abs(sys.DH(z)).max(axis=0).sum())
    xh = np.abs(sys.XH(z)).max(axis=0)
    sampled("c_XH_0", xh.max())
    dxh = np.abs(sys.DXH(z)).max(axis=0)
    sampled("c_XH_1", dxh.sum(axis=1).max())
    sampled("c_XHT_1", dxh.sum())
    d2xh = np.abs(sys.D2XH(z)).max(axis=0)
    sampled("c_XH_2", d2xh.sum(axis=(1, 2)).max())

    m = sys.n_integrals
    if m == 0:
        for key in ("c_p_1", "c_pT_1", "c_Xp_0", "c_Xp_1", "c_Xp_2",
                    "c_XpT_0", "c_XpT_1", "c_XpT_2"):
            vals[key] = 0.0
            prov[key] = "canonical-exact"
    else:
        dp = np.abs(sys.Dp(z)).max(axis=0)  # (m, 2n)
        per_int = dp.sum(axis=1)
        sampled("c_p_1", per_int.max())
        sampled("c_pT_1", per_int.sum())
        xp = np.abs(sys.Xp(z)).max(axis=0)  # (2n, m)
        sampled("c_Xp_0", xp.sum(axis=1).max())
        sampled("c_XpT_0", xp.sum(axis=0).max())
        dxp = np.abs(sys.DXp(z)).max(axis=0)  # (2n, m, 2n)
        sampled("c_Xp_1", dxp.sum(axis=(1, 2)).max())
        sampled("c_XpT_1", dxp.sum(axis=(0, 2)).max())
        d2xp = np.abs(sys.D2Xp(z)).max(axis=0)
        sampled("c_Xp_2", d2xp.sum(axis=(1, 2, 3)).max())
        sampled("c_XpT_2", d2xp.sum(axis=(0, 2, 3)).max())

    if conserved is not None:
        sampled("c_c_1", np.abs(conserved.Dc(z)).max(axis=0).sum())
        sampled("c_c_2", np.abs(conserved.D2c(z)).max(axis=0).sum())
    else:
        vals["c_c_1"] = vals["c_H_1"]
        vals["c_c_2"] = up * float(np.abs(np.einsum(
            "...ij,...jk->...ik", sys.geometry.omega_mat(z), sys.DXH(z)
        )).max(axis=0).sum())
        prov["c_c_1"] = prov["c_c_2"] = "sampled"

    for key in _GLOBAL_FIELDS:
        if key not in vals:
            raise LedgerError(f"global constant {key} was not produced")
        if not np.isfinite(vals[key]):
            raise LedgerError(f"global constant {key} is not finite")
    return GlobalNormConstants(vals, prov)


# ---------------------------------------------------------------------------
# the ledger
# ---------------------------------------------------------------------------


@dataclass
class LedgerRow:
    name: str
    value: float
    formula: str
    group: str
    provenance: str


@dataclass
class ConstantLedger:
    mode: str
    rows: dict = field(default_factory=dict)
    case_tag: str = "III"

    def set(self, name: str, value: float, formula: str, group: str,
            provenance: str = "derived"):
        value = float(value)
        if not np.isfinite(value):
            raise LedgerError(f"ledger row {name} = {value} ({formula})")
        self.rows[name] = LedgerRow(name, value, formula, group, provenance)
        return value

    def __getitem__(self, name: str) -> float:
        return self.rows[name].value

    def __contains__(self, name: str) -> bool:
        return name in self.rows

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("name,value,formula_label,group,provenance\n")
        for row in self.rows.values():
            formula = row.formula.replace('"', "'")
            buf.write(f'{row.name},{row.value!r},"{formula}",{row.group},{row.provenance}\n')
        return buf.getvalue()

    def diff(self, other: "ConstantLedger") -> dict:
        """Rows whose values differ (name -> (self, other)); missing rows count."""
        out = {}
        keys = set(self.rows) | set(other.rows)
        for k in sorted(keys):
            a = self.rows.get(k)
            b = other.rows.get(k)
            va = a.value if a else None
            vb = b.value if b else None
            if va != vb:
                out[k] = (va, vb)
        return out


def build_ledger(mode: str, globs: GlobalNormConstants, hyp: dict,
                 dio: DiophantineParams, rho: float, delta: float,
                 schedule: NewtonSchedule, c_R: float | None = None,
                 case_tag: str = "III", n: int | None = None,
                 d: int | None = None, omega_star_norm: float | None = None,
                 sigma_omega: float | None = None,
                 dist_ray: float | None = None) -> ConstantLedger:
    """Evaluate every constant of the chain in dependency order.

    ``hyp`` carries the measured frame/twist norms and sigma bounds (see
    frames.measure_hypothesis_data); for iso mode it must include sigma_Tc /
    norm_avgTc_inv, and the ray data (omega_star_norm, sigma_omega, dist_ray)
    must be supplied.  ``delta`` is the strip bite; the theorem-level
    constants use the worst step value delta_0 = rho / a3, so pass that when
    evaluating the existence ratio.
    """
    if mode not in ("ordinary", "iso"):
        raise ValueError("mode must be 'ordinary' or 'iso'")
    if d is None:
        d = dio.d
    if n is None:
        raise ValueError("n (degrees of freedom) is required")
    gamma, tau = dio.gamma, dio.tau
    a1, a2, a3 = schedule.a1, schedule.a2, schedule.a3
    c_small = schedule.c_n
    if c_small is None:
        raise ValueError("the smallness scale schedule.c_n must be pinned for a ledger")
    if c_R is None:
        c_R = russmann_constant(tau, delta, d, (0,))
    led = ConstantLedger(mode=mode, case_tag=case_tag)
    g = globs.values
    case3 = case_tag == "III"

    # inputs
    grp = "inputs"
    for key, val in (("gamma", gamma), ("tau", tau), ("rho", rho), ("delta", delta),
                     ("a1", a1), ("a2", a2), ("a3", a3), ("c_R", c_R),
                     ("c_small", c_small), ("n", float(n)), ("d", float(d))):
        led.set(key, val, "input", grp, "user-supplied")
    for key in ("sigma_K", "sigma_KT", "sigma_B", "sigma_T", "sigma_Tc",
                "norm_DK", "norm_DKT", "norm_B", "norm_avgT_inv",
                "norm_avgTc_inv", "dist_domain"):
        if key in hyp:
            led.set(key, hyp[key], "measured/margin", grp, "measured")
    if mode == "iso":
        for key, val in (("sigma_omega", sigma_omega),
                         ("omega_star_norm", omega_star_norm),
                         ("dist_ray", dist_ray)):
            if val is not None:
                led.set(key, val, "ray data", grp, "user-supplied")
    for key, val in g.items():
        led.set(key, val, "global bound", "globals", globs.provenance[key])

    sK, sKT, sB = hyp["sigma_K"], hyp["sigma_KT"], hyp["sigma_B"]
    gd_t = gamma * delta**tau

    # frame group: geometric constants of the error maps
    grp = "frame"
    C_LieOK = led.set("C_LieOmegaK",
                      2 * n * g["c_Omega_0"] * sK + sKT * g["c_Omega_1"] * sK * delta
                      + d * sKT * g["c_Omega_0"],
                      "2n c_Omega_0 sigma_K + sigma_KT c_Omega_1 sigma_K delta + d sigma_KT c_Omega_0",
                      grp)
    led.set("C_OmegaK", c_R * C_LieOK, "c_R * C_LieOmegaK", grp)
    C_L = led.set("C_L", sK + g["c_Xp_0"], "sigma_K + c_Xp_0", grp)
    C_LT = led.set("C_LT", max(sKT, g["c_XpT_0"]), "max(sigma_KT, c_XpT_0)", grp)
    C_OmegaL = led.set("C_OmegaL",
                       c_R * max(C_LieOK + g["c_pT_1"], d * g["c_p_1"]),
                       "c_R * max(C_LieOmegaK + c_pT_1, d c_p_1)", grp)
    C_GL = led.set("C_GL", C_LT * g["c_G_0"] * C_L, "C_LT c_G_0 C_L", grp)
    C_tOmegaL = led.set("C_tOmegaL", C_LT * g["c_tOmega_0"] * C_L, "C_LT c_tOmega_0 C_L", grp)
    C_N0 = led.set("C_N0", g["c_J_0"] * C_L, "c_J_0 C_L", grp)
    C_N0T = led.set("C_N0T", C_LT * g["c_JT_0"], "C_LT c_JT_0", grp)
    C_A = led.set("C_A", 0.0 if case3 else 0.5 * sB**2 * C_tOmegaL,
                  "1/2 sigma_B^2 C_tOmegaL (0 in Case III)", grp)
    C_N = led.set("C_N", C_L * C_A + C_N0 * sB, "C_L C_A + C_N0 sigma_B", grp)
    C_NT = led.set("C_NT", C_A * C_LT + sB * C_N0T, "C_A C_LT + sigma_B C_N0T", grp)
    chi0 = 1.0 if C_A == 0.0 else 0.0
    C_sym = led.set("C_sym",
                    (1 + C_A) * max(1.0, C_A + sB**2 * chi0) * C_tOmegaL,
                    "(1+C_A) max(1, C_A + sigma_B^2 chi0(C_A)) C_tOmegaL", grp)
    C_LieK = led.set("C_LieK", delta * c_small + g["c_XH_0"], "delta c + c_XH_0", grp)
    C_LieL = led.set("C_LieL", d * c_small + g["c_XH_1"] * sK + g["c_Xp_1"] * C_LieK,
                     "d c + c_XH_1 sigma_K + c_Xp_1 C_LieK", grp)
    C_LieLT = led.set("C_LieLT",
                      max(2 * n * c_small + g["c_XHT_1"] * sK, g["c_XpT_1"] * C_LieK),
                      "max(2n c + c_XHT_1 sigma_K, c_XpT_1 C_LieK)", grp)
    C_LieJ = led.set("C_LieJ", g["c_J_1"] * C_LieK, "c_J_1 C_LieK", grp)
    C_LieG = led.set("C_LieG", g["c_G_1"] * C_LieK, "c_G_1 C_LieK", grp)
    C_LietOmega = led.set("C_LietOmega", g["c_tOmega_1"] * C_LieK, "c_tOmega_1 C_LieK", grp)
    C_LieN0 = led.set("C_LieN0", C_LieJ * C_L + g["c_J_0"] * C_LieL,
                      "C_LieJ C_L + c_J_0 C_LieL", grp)
    C_LieGL = led.set("C_LieGL",
                      C_LieLT * g["c_G_0"] * C_L + C_LT * C_LieG * C_L + C_LT * g["c_G_0"] * C_LieL,
                      "C_LieLT c_G_0 C_L + C_LT C_LieG C_L + C_LT c_G_0 C_LieL", grp)
    C_LietOmegaL = led.set("C_LietOmegaL",
                           C_LieLT * g["c_tOmega_0"] * C_L + C_LT * C_LietOmega * C_L
                           + C_LT * g["c_tOmega_0"] * C_LieL,
                           "C_LieLT c_tOmega_0 C_L + C_LT C_LietOmega C_L + C_LT c_tOmega_0 C_LieL",
                           grp)
    C_LieB = led.set("C_LieB", sB**2 * C_LieGL, "sigma_B^2 C_LieGL", grp)
    C_LieA = led.set("C_LieA",
                     0.0 if case3 else C_LieB * C_tOmegaL * sB + 0.5 * sB**2 * C_LietOmegaL,
                     "C_LieB C_tOmegaL sigma_B + 1/2 sigma_B^2 C_LietOmegaL (0 in Case III)", grp)
    C_LieN = led.set("C_LieN",
                     C_LieL * C_A + C_L * C_LieA + C_LieN0 * sB + C_N0 * C_LieB,
                     "C_LieL C_A + C_L C_LieA + C_LieN0 sigma_B + C_N0 C_LieB", grp)
    C_LoperL = led.set("C_LoperL", d + g["c_Xp_1"] * delta, "d + c_Xp_1 delta", grp)
    C_LoperLT = led.set("C_LoperLT", max(2.0 * n, g["c_XpT_1"] * delta),
                        "max(2n, c_XpT_1 delta)", grp)
    C_LoperN = led.set("C_LoperN",
                       C_LoperL * c_small * C_A + g["c_XH_1"] * C_N0 * sB + C_L * C_LieA
                       + C_LieN0 * sB + C_N0 * C_LieB,
                       "C_LoperL c C_A + c_XH_1 C_N0 sigma_B + C_L C_LieA + C_LieN0 sigma_B "
                       "+ C_N0 C_LieB", grp)
    C_T = led.set("C_T", C_NT * g["c_Omega_0"] * C_LoperN, "C_NT c_Omega_0 C_LoperN", grp)
    C_LieOmegaL = led.set("C_LieOmegaL",
                          max(C_LieOK + g["c_pT_1"], d * g["c_p_1"]),
                          "max(C_LieOmegaK + c_pT_1, d c_p_1)", grp)
    C_red11 = led.set("C_red11", C_NT * g["c_Omega_0"] * C_LoperL,
                      "C_NT c_Omega_0 C_LoperL", grp)
    C_red21 = led.set("C_red21", C_LT * g["c_Omega_0"] * C_LoperL,
                      "C_LT c_Omega_0 C_LoperL", grp)
    C_red22 = led.set("C_red22",
                      (C_LT * g["c_Omega_1"] * C_N * delta + C_LoperLT * g["c_Omega_0"] * C_N
                       + C_LieOmegaL * C_A) * gd_t + C_OmegaL * C_LieA,
                      "(C_LT c_Omega_1 C_N delta + C_LoperLT c_Omega_0 C_N + C_LieOmegaL C_A) "
                      "gamma delta^tau + C_OmegaL C_LieA", grp)
    C_red = led.set("C_red", max(C_red11 * gd_t, C_red21 * gd_t + C_red22),
                    "max(C_red11 gamma delta^tau, C_red21 gamma delta^tau + C_red22)", grp)

    # step group: one quasi-Newton correction
    grp = "step"
    sT = hyp["sigma_T"]
    if mode == "iso":
        sTc = hyp["sigma_Tc"]
        if omega_star_norm is None or sigma_omega is None:
            raise ValueError("iso mode needs omega_star_norm and sigma_omega")
        C_omega = led.set("C_omega", sigma_omega * omega_star_norm,
                          "sigma_omega |omega_*|", grp)
        C_xiN0 = led.set("C_xiN0",
                         sTc * max(C_NT * g["c_Omega_0"] * gd_t + c_R * C_T * C_LT * g["c_Omega_0"],
                                   gd_t + c_R * g["c_c_1"] * C_N * C_LT * g["c_Omega_0"]),
                         "sigma_Tc max(C_NT c_Omega_0 gd + c_R C_T C_LT c_Omega_0, "
                         "gd + c_R c_c_1 C_N C_LT c_Omega_0)", grp)
        C_xiomega = led.set("C_xiomega", C_xiN0, "= C_xiN0", grp)
        C_Deltaomega = led.set("C_Deltaomega", C_omega * C_xiN0, "C_omega C_xiN0", grp)
    else:
        C_xiN0 = led.set("C_xiN0",
                         sT * (C_NT * g["c_Omega_0"] * gd_t + c_R * C_T * C_LT * g["c_Omega_0"]),
                         "sigma_T (C_NT c_Omega_0 gamma delta^tau + c_R C_T C_LT c_Omega_0)", grp)
    C_xiN = led.set("C_xiN", C_xiN0 + c_R * C_LT * g["c_Omega_0"],
                    "C_xiN0 + c_R C_LT c_Omega_0", grp)
    C_xiL = led.set("C_xiL", c_R * (C_NT * g["c_Omega_0"] * gd_t + C_T * C_xiN),
                    "c_R (C_NT c_Omega_0 gamma delta^tau + C_T C_xiN)", grp)
    C_xi = led.set("C_xi", max(C_xiL, C_xiN * gd_t),
                   "max(C_xiL, C_xiN gamma delta^tau)", grp)
    C_DeltaK = led.set("C_DeltaK", C_L * C_xiL + C_N * C_xiN * gd_t,
                       "C_L C_xiL + C_N C_xiN gamma delta^tau", grp)
    C_LiexiN = led.set("C_LiexiN", C_LT * g["c_Omega_0"], "C_LT c_Omega_0", grp)
    if mode == "iso":
        C_LiexiL = led.set("C_LiexiL",
                           C_NT * g["c_Omega_0"] * gd_t + C_T * C_xiN + led["C_omega"] * C_xiomega,
                           "C_NT c_Omega_0 gd + C_T C_xiN + C_omega C_xiomega", grp)
    else:
        C_LiexiL = led.set("C_LiexiL", C_NT * g["c_Omega_0"] * gd_t + C_T * C_xiN,
                           "C_NT c_Omega_0 gamma delta^tau + C_T C_xiN", grp)
    C_Liexi = led.set("C_Liexi", max(C_LiexiL, C_LiexiN * gd_t),
                      "max(C_LiexiL, C_LiexiN gamma delta^tau)", grp)
    if mode == "iso":
        C_lin = led.set("C_lin",
                        C_red * C_xi + g["c_Omega_0"] * C_sym * C_Liexi * gd_t
                        + max(C_A, 1.0) * C_OmegaL * led["C_omega"] * C_xiomega,
                        "C_red C_xi + c_Omega_0 C_sym C_Liexi gd + max(C_A,1) C_OmegaL "
                        "C_omega C_xiomega", grp)
        C_lin_omega = led.set("C_lin_omega", d * c_R * g["c_c_1"] * C_xiL,
                              "d c_R c_c_1 C_xiL", grp)
    else:
        C_lin = led.set("C_lin", C_red * C_xi + g["c_Omega_0"] * C_sym * C_Liexi * gd_t,
                        "C_red C_xi + c_Omega_0 C_sym C_Liexi gamma delta^tau", grp)
    C_LieDeltaK = led.set("C_LieDeltaK",
                          C_LieL * C_xiL + (C_L * C_LiexiL + C_LieN * C_xiN) * gd_t
                          + C_N * C_LiexiN * gd_t**2,
                          "C_LieL C_xiL + (C_L C_LiexiL + C_LieN C_xiN) gd + C_N C_LiexiN gd^2",
                          grp)
    if mode == "iso":
        C_E = led.set("C_E",
                      2 * (C_L + C_N) * C_lin * gamma * delta ** (tau - 1)
                      + 0.5 * g["c_XH_2"] * C_DeltaK**2
                      + C_xiomega * C_LieDeltaK * gd_t,
                      "2(C_L+C_N) C_lin gamma delta^(tau-1) + 1/2 c_XH_2 C_DeltaK^2 "
                      "+ C_xiomega C_LieDeltaK gamma delta^tau", grp)
        C_E_omega = led.set("C_E_omega",
                            C_lin_omega * gamma * delta ** (tau - 1)
                            + 0.5 * g["c_c_2"] * C_DeltaK**2,
                            "C_lin_omega gamma delta^(tau-1) + 1/2 c_c_2 C_DeltaK^2", grp)
        C_Ec = led.set("C_Ec", max(C_E, C_E_omega), "max(C_E, C_E_omega)", grp)
        contraction = C_Ec
    else:
        C_E = led.set("C_E",
                      2 * (C_L + C_N) * C_lin * gamma * delta ** (tau - 1)
                      + 0.5 * g["c_XH_2"] * C_DeltaK**2,
                      "2(C_L+C_N) C_lin gamma delta^(tau-1) + 1/2 c_XH_2 C_DeltaK^2", grp)
        contraction = C_E
    C_DeltaL = led.set("C_DeltaL", (d + g["c_Xp_1"] * delta) * C_DeltaK,
                       "(d + c_Xp_1 delta) C_DeltaK", grp)
    C_DeltaLT = led.set("C_DeltaLT", max(2.0 * n, g["c_XpT_1"] * delta) * C_DeltaK,
                        "max(2n, c_XpT_1 delta) C_DeltaK", grp)
    C_DeltaG = led.set("C_DeltaG", g["c_G_1"] * C_DeltaK, "c_G_1 C_DeltaK", grp)
    C_DeltaGL = led.set("C_DeltaGL",
                        C_LT * g["c_G_0"] * C_DeltaL + C_LT * C_DeltaG * C_L * delta
                        + C_DeltaLT * g["c_G_0"] * C_L,
                        "C_LT c_G_0 C_DeltaL + C_LT C_DeltaG C_L delta + C_DeltaLT c_G_0 C_L",
                        grp)
    C_DeltaB = led.set("C_DeltaB", 2 * sB**2 * C_DeltaGL, "2 sigma_B^2 C_DeltaGL", grp)
    C_DeltatOmega = led.set("C_DeltatOmega", g["c_tOmega_1"] * C_DeltaK,
                            "c_tOmega_1 C_DeltaK", grp)
    C_DeltatOmegaL = led.set("C_DeltatOmegaL",
                             C_LT * g["c_tOmega_0"] * C_DeltaL
                             + C_LT * C_DeltatOmega * C_L * delta
                             + C_DeltaLT * g["c_tOmega_0"] * C_L,
                             "C_LT c_tOmega_0 C_DeltaL + C_LT C_DeltatOmega C_L delta "
                             "+ C_DeltaLT c_tOmega_0 C_L", grp)
    C_DeltaA = led.set("C_DeltaA",
                       0.0 if case3 else sB * C_tOmegaL * C_DeltaB + 0.5 * sB**2 * C_DeltatOmegaL,
                       "sigma_B C_tOmegaL C_DeltaB + 1/2 sigma_B^2 C_DeltatOmegaL (0 in Case III)",
                       grp)
    C_DeltaJ = led.set("C_DeltaJ", g["c_J_1"] * C_DeltaK, "c_J_1 C_DeltaK", grp)
    C_DeltaJT = led.set("C_DeltaJT", g["c_JT_1"] * C_DeltaK, "c_JT_1 C_DeltaK", grp)
    C_DeltaN0 = led.set("C_DeltaN0", g["c_J_0"] * C_DeltaL + C_DeltaJ * C_L * delta,
                        "c_J_0 C_DeltaL + C_DeltaJ C_L delta", grp)
    C_DeltaN0T = led.set("C_DeltaN0T", C_DeltaLT * g["c_JT_0"] + C_LT * C_DeltaJT * delta,
                         "C_DeltaLT c_JT_0 + C_LT C_DeltaJT delta", grp)
    C_DeltaN = led.set("C_DeltaN",
                       C_L * C_DeltaA + C_DeltaL * C_A + C_N0 * C_DeltaB + C_DeltaN0 * sB,
                       "C_L C_DeltaA + C_DeltaL C_A + C_N0 C_DeltaB + C_DeltaN0 sigma_B", grp)
    C_DeltaNT = led.set("C_DeltaNT",
                        C_A * C_DeltaLT + C_DeltaA * C_LT + C_DeltaB * C_N0T + sB * C_DeltaN0T,
                        "C_A C_DeltaLT + C_DeltaA C_LT + C_DeltaB C_N0T + sigma_B C_DeltaN0T",
                        grp)
    if mode == "iso":
        C_DeltaLieK = led.set("C_DeltaLieK",
                              sigma_omega * C_xiomega * C_LieK * gd_t + C_LieDeltaK,
                              "sigma_omega C_xiomega C_LieK gamma delta^tau + C_LieDeltaK", grp)
    else:
        C_DeltaLieK = led.set("C_DeltaLieK", C_LieDeltaK, "= C_LieDeltaK", grp)
    C_DeltaLieL = led.set("C_DeltaLieL",
                          d * C_DeltaLieK + g["c_Xp_1"] * C_DeltaLieK * delta
                          + g["c_Xp_2"] * C_DeltaK * C_LieK * delta,
                          "d C_DeltaLieK + c_Xp_1 C_DeltaLieK delta + c_Xp_2 C_DeltaK C_LieK delta",
                          grp)
    C_DeltaLieLT = led.set("C_DeltaLieLT",
                           max(2 * n * C_DeltaLieK,
                               g["c_XpT_1"] * C_DeltaLieK * delta
                               + g["c_XpT_2"] * C_DeltaK * C_LieK * delta),
                           "max(2n C_DeltaLieK, c_XpT_1 C_DeltaLieK delta "
                           "+ c_XpT_2 C_DeltaK C_LieK delta)", grp)
    C_DeltaLieG = led.set("C_DeltaLieG",
                          g["c_G_1"] * C_DeltaLieK + g["c_G_2"] * C_DeltaK * C_LieK,
                          "c_G_1 C_DeltaLieK + c_G_2 C_DeltaK C_LieK", grp)
    C_DeltaLieGL = led.set(
        "C_DeltaLieGL",
        C_LieLT * g["c_G_0"] * C_DeltaL + C_LieLT * g["c_G_1"] * C_DeltaK * C_L * delta
        + C_DeltaLieLT * g["c_G_0"] * C_L
        + C_LT * g["c_G_1"] * C_LieK * C_DeltaL + C_LT * C_DeltaLieG * C_L * delta
        + C_DeltaLT * g["c_G_1"] * C_LieK * C_L
        + C_LT * g["c_G_0"] * C_DeltaLieL + C_LT * g["c_G_1"] * C_DeltaK * C_LieL * delta
        + C_DeltaLT * g["c_G_0"] * C_LieL,
        "nine-term product rule for Delta Lie G_L", grp)
    C_DeltaLieB = led.set("C_DeltaLieB",
                          2 * sB * C_LieGL * C_DeltaB + sB**2 * C_DeltaLieGL,
                          "2 sigma_B C_LieGL C_DeltaB + sigma_B^2 C_DeltaLieGL", grp)
    C_DeltaLietOmega = led.set("C_DeltaLietOmega",
                               g["c_tOmega_1"] * C_DeltaLieK + g["c_tOmega_2"] * C_DeltaK * C_LieK,
                               "c_tOmega_1 C_DeltaLieK + c_tOmega_2 C_DeltaK C_LieK", grp)
    C_DeltaLietOmegaL = led.set(
        "C_DeltaLietOmegaL",
        C_LieLT * g["c_tOmega_0"] * C_DeltaL + C_LieLT * g["c_tOmega_1"] * C_DeltaK * C_L * delta
        + C_DeltaLieLT * g["c_tOmega_0"] * C_L
        + C_LT * g["c_tOmega_1"] * C_LieK * C_DeltaL + C_LT * C_DeltaLietOmega * C_L * delta
        + C_DeltaLT * g["c_tOmega_1"] * C_LieK * C_L
        + C_LT * g["c_tOmega_0"] * C_DeltaLieL + C_LT * g["c_tOmega_1"] * C_DeltaK * C_LieL * delta
        + C_DeltaLT * g["c_tOmega_0"] * C_LieL,
        "nine-term product rule for Delta Lie tOmega_L", grp)
    C_DeltaLieA = led.set(
        "C_DeltaLieA",
        0.0 if case3 else (C_LieB * C_tOmegaL * C_DeltaB + C_LieB * C_DeltatOmegaL * sB
                           + C_DeltaLieB * C_tOmegaL * sB + sB * C_LietOmegaL * C_DeltaB
                           + 0.5 * sB**2 * C_DeltaLietOmegaL),
        "C_LieB C_tOmegaL C_DeltaB + C_LieB C_DeltatOmegaL sigma_B + C_DeltaLieB C_tOmegaL "
        "sigma_B + sigma_B C_LietOmegaL C_DeltaB + 1/2 sigma_B^2 C_DeltaLietOmegaL "
        "(0 in Case III)", grp)
    C_DeltaLieJ = led.set("C_DeltaLieJ",
                          g["c_J_1"] * C_DeltaLieL + g["c_J_2"] * C_DeltaK * C_LieK,
                          "c_J_1 C_DeltaLieL + c_J_2 C_DeltaK C_LieK", grp)
    C_DeltaLieN0 = led.set("C_DeltaLieN0",
                           C_LieJ * C_DeltaL + C_DeltaLieJ * C_L * delta
                           + g["c_J_0"] * C_DeltaLieL + C_DeltaJ * C_LieL * delta,
                           "C_LieJ C_DeltaL + C_DeltaLieJ C_L delta + c_J_0 C_DeltaLieL "
                           "+ C_DeltaJ C_LieL delta", grp)
    C_DeltaLieN = led.set(
        "C_DeltaLieN",
        C_LieL * C_DeltaA + C_DeltaLieL * C_A + C_L * C_DeltaLieA + C_DeltaL * C_LieA
        + C_LieN0 * C_DeltaB + C_DeltaLieN0 * sB + C_N0 * C_DeltaLieB + C_DeltaN0 * C_LieB,
        "C_LieL C_DeltaA + C_DeltaLieL C_A + C_L C_DeltaLieA + C_DeltaL C_LieA + C_LieN0 "
        "C_DeltaB + C_DeltaLieN0 sigma_B + C_N0 C_DeltaLieB + C_DeltaN0 C_LieB", grp)
    C_DeltaLoperN = led.set("C_DeltaLoperN",
                            g["c_XH_1"] * C_DeltaN + g["c_XH_2"] * C_DeltaK * C_N * delta
                            + C_DeltaLieN,
                            "c_XH_1 C_DeltaN + c_XH_2 C_DeltaK C_N delta + C_DeltaLieN", grp)
    C_DeltaT = led.set("C_DeltaT",
                       C_NT * g["c_Omega_0"] * C_DeltaLoperN
                       + C_NT * g["c_Omega_1"] * C_DeltaK * C_LoperN * delta
                       + C_DeltaNT * g["c_Omega_0"] * C_LoperN,
                       "C_NT c_Omega_0 C_DeltaLoperN + C_NT c_Omega_1 C_DeltaK C_LoperN delta "
                       "+ C_DeltaNT c_Omega_0 C_LoperN", grp)
    if mode == "iso":
        sTc = hyp["sigma_Tc"]
        C_DeltaTc = led.set("C_DeltaTc",
                            max(C_DeltaT + led["C_Deltaomega"] * gamma * delta ** (tau + 1),
                                g["c_c_1"] * C_DeltaN + g["c_c_2"] * C_DeltaK * C_N * delta),
                            "max(C_DeltaT + C_Deltaomega gamma delta^(tau+1), c_c_1 C_DeltaN "
                            "+ c_c_2 C_DeltaK C_N delta)", grp)
        C_DeltaTinv = led.set("C_DeltaTcInv", 2 * sTc**2 * C_DeltaTc,
                              "2 sigma_Tc^2 C_DeltaTc", grp)
    else:
        C_DeltaTinv = led.set("C_DeltaTInv", 2 * sT**2 * C_DeltaT, "2 sigma_T^2 C_DeltaT", grp)

    # convergence group: the headline constants
    grp = "convergence"
    md = hyp
    margins = {
        "sigma_K": md["sigma_K"] - md["norm_DK"],
        "sigma_KT": md["sigma_KT"] - md["norm_DKT"],
        "sigma_B": md["sigma_B"] - md["norm_B"],
    }
    if mode == "iso":
        margins["sigma_Tc"] = md["sigma_Tc"] - md["norm_avgTc_inv"]
    else:
        margins["sigma_T"] = md["sigma_T"] - md["norm_avgT_inv"]
    bad = {k: v for k, v in margins.items() if v <= 0}
    if bad:
        raise LedgerError(f"non-positive sigma margins {bad}: the strict norm "
                          "hypotheses fail on this candidate")
    terms1 = {
        "DK margin": d * C_DeltaK / margins["sigma_K"],
        "DKT margin": 2 * n * C_DeltaK / margins["sigma_KT"],
        "B margin": C_DeltaB / margins["sigma_B"],
    }
    if mode == "iso":
        terms1["Tc margin"] = C_DeltaTinv / margins["sigma_Tc"]
    else:
        terms1["T margin"] = C_DeltaTinv / margins["sigma_T"]
    C_Delta1 = led.set("C_Delta1", max(terms1.values()),
                       "max(d C_DeltaK/(sigma_K-|DK|), 2n C_DeltaK/(sigma_KT-|DK^T|), "
                       "C_DeltaB/(sigma_B-|B|), C_DeltaTInv/(sigma_T-|<T>^-1|))", grp)
    C_Delta2 = led.set("C_Delta2", C_DeltaK * delta / md["dist_domain"],
                       "C_DeltaK delta / dist(K(T_rho), boundary)", grp)
    terms = {
        "smallness": gamma**2 * delta ** (2 * tau) / c_small,
        "sym": 2 * C_sym * gamma * delta**tau,
        "margins": C_Delta1 / (1 - a1 ** (1 - 2 * tau)),
        "domain": C_Delta2 / (1 - a1 ** (-2 * tau)),
    }
    if mode == "iso":
        if dist_ray is None:
            raise ValueError("iso mode needs dist_ray")
        C_Delta3 = led.set("C_Delta3",
                           led["C_Deltaomega"] * gamma * delta ** (tau + 1) / dist_ray,
                           "C_Deltaomega gamma delta^(tau+1) / dist(omega, ray boundary)", grp)
        terms["ray"] = C_Delta3 / (1 - a1 ** (1 - 3 * tau))
    C_Delta = led.set("C_Delta", max(terms.values()),
                      "max(gamma^2 delta^2tau/c, 2 C_sym gamma delta^tau, "
                      "C_Delta1/(1-a1^(1-2tau)), C_Delta2/(1-a1^(-2tau))"
                      + (", C_Delta3/(1-a1^(1-3tau))" if mode == "iso" else "") + ")", grp)
    dominant_delta = max(terms, key=terms.get)
    branch1 = (a1 * a3) ** (4 * tau) * contraction
    branch2 = a3 ** (2 * tau + 1) * gamma**2 * rho ** (2 * tau - 1) * C_Delta
    E1 = led.set("E1", max(branch1, branch2),
                 "max((a1 a3)^4tau C_E, a3^(2tau+1) gamma^2 rho^(2tau-1) C_Delta)", grp)
    led.set("E2", a3 ** (2 * tau) * C_DeltaK / (1 - a1 ** (-2 * tau)),
            "a3^2tau C_DeltaK / (1 - a1^-2tau)", grp)
    if mode == "iso":
        led.set("E3", a3**tau * led["C_Deltaomega"] / (1 - a1 ** (-3 * tau)),
                "a3^tau C_Deltaomega / (1 - a1^-3tau)", grp)
    else:
        led.set("E3", g["c_c_1"] * led["E2"], "c_c_1 E2", grp)
    led.set(
        "E1_dominant", 1.0 if branch1 >= branch2 else 2.0,
        f"1: contraction branch, 2: margin branch (dominant margin term: {dominant_delta})",
        grp,
    )
    return led


# ---------------------------------------------------------------------------
# the certificate check
# ---------------------------------------------------------------------------


@dataclass
class CertificateReport:
    mode: str
    passed: bool
    ratio: float
    error_norm: float
    gamma: float
    tau: float
    rho: float
    delta: float
    scan_limit: int
    closeness_K: float | None
    closeness_second: float | None
    dominant: str
    margins: dict
    header: str = REPORT_HEADER

    def to_dict(self) -> dict:
        return {
            "header": self.header,
            "mode": self.mode,
            "passed": self.passed,
            "ratio": self.ratio,
            "error_norm": self.error_norm,
            "gamma": self.gamma,
            "tau": self.tau,
            "rho": self.rho,
            "delta": self.delta,
            "scan_limit": self.scan_limit,
            "closeness_K": self.closeness_K,
            "closeness_second": self.closeness_second,
            "dominant": self.dominant,
            "margins": self.margins,
        }


def kam_check(cand: TorusCandidate, ledger: ConstantLedger, mode: str,
              error_norm: float) -> CertificateReport:
    """Evaluate the existence hypothesis ratio E1 ||E|| / (gamma^4 rho^{4 tau}).

    ``error_norm`` is ||E||_rho (ordinary) or the combined ||E_c||_rho (iso).
    On pass, the closeness bounds are reported: E2 ||E||/(gamma^2 rho^{2tau})
    for the parameterization and the E3 bound for the conserved quantity
    (ordinary) or the frequency (iso, with denominator gamma rho^tau).
    """
    gamma, tau, rho = ledger["gamma"], ledger["tau"], ledger["rho"]
    sig_margins = {
        "sigma_K": ledger["sigma_K"] - ledger["norm_DK"],
        "sigma_KT": ledger["sigma_KT"] - ledger["norm_DKT"],
        "sigma_B": ledger["sigma_B"] - ledger["norm_B"],
    }
    if mode == "iso":
        sig_margins["sigma_Tc"] = ledger.rows["sigma_Tc"].value - ledger.rows["norm_avgTc_inv"].value \
            if "sigma_Tc" in ledger else None
    else:
        sig_margins["sigma_T"] = ledger["sigma_T"] - ledger["norm_avgT_inv"]
    if any(v is not None and v <= 0 for v in sig_margins.values()):
        raise ValueError(f"sigma margins must be positive: {sig_margins}")
    denom = gamma**4 * rho ** (4 * tau)
    ratio = ledger["E1"] * error_norm / denom
    passed = bool(ratio < 1.0)
    closeness_K = None
    closeness_second = None
    if passed:
        closeness_K = ledger["E2"] * error_norm / (gamma**2 * rho ** (2 * tau))
        if mode == "iso":
            closeness_second = ledger["E3"] * error_norm / (gamma * rho**tau)
        else:
            closeness_second = ledger["E3"] * error_norm / (gamma**2 * rho ** (2 * tau))
    branch = ledger["E1_dominant"]
    dominant = ledger.rows["E1_dominant"].formula if branch == 2.0 else "contraction constant C_E"
    return CertificateReport(
        mode=mode,
        passed=passed,
        ratio=float(ratio),
        error_norm=float(error_norm),
        gamma=float(gamma),
        tau=float(tau),
        rho=float(rho),
        delta=float(ledger["delta"]),
        scan_limit=cand.dio.scan_limit,
        closeness_K=closeness_K,
        closeness_second=closeness_second,
        dominant=dominant,
        margins={k: v for k, v in sig_margins.items() if v is not None},
    )


def certify(cand: TorusCandidate, frames: FrameBundle, schedule: NewtonSchedule,
            mode: str = "ordinary", globs: GlobalNormConstants | None = None,
            conserved: ConservedQuantity | None = None, error_norm: float | None = None,
            sigma_factor: float = 1.1, ray=None, c_small: float | None = None):
    """Convenience wrapper: measure hypothesis data, build the ledger at the
    worst-step bite delta_0 = rho/a3, and run kam_check.  Returns
    (report, ledger).

    ``c_small`` defaults to the natural scale max(1, ||X_H o K||_rho); the
    solver may run with a much larger override, but the smallness scale is a
    free parameter of the theorem and the certificate picks its own.
    """
    from .frames import invariance_error

    if c_small is None:
        base = NewtonSchedule(a1=schedule.a1, a2=schedule.a2, c_n=None,
                              max_iters=schedule.max_iters, stop_tol=schedule.stop_tol,
                              rho0=cand.rho)
        from .solver import resolve_smallness_scale

        c_small = resolve_smallness_scale(base, cand)
    sched = NewtonSchedule(a1=schedule.a1, a2=schedule.a2, c_n=c_small,
                           max_iters=schedule.max_iters, stop_tol=schedule.stop_tol,
                           rho0=cand.rho)
    if globs is None:
        globs = estimate_global_constants(cand.system, conserved=conserved)
    hyp = measure_hypothesis_data(cand, frames, sigma_factor=sigma_factor)
    rho = cand.rho
    delta = rho / sched.a3
    kw = {}
    if mode == "iso":
        if ray is None:
            raise ValueError("iso certification needs the frequency ray")
        kw = {
            "omega_star_norm": float(np.max(np.abs(ray.omega_star))),
            "sigma_omega": ray.sigma_omega,
            "dist_ray": ray.boundary_margin(),
        }
    ledger = build_ledger(mode, globs, hyp, cand.dio, rho, delta, sched,
                          case_tag=cand.system.geometry.case_tag, n=cand.system.n,
                          d=cand.d, **kw)
    if error_norm is None:
        error_norm = invariance_error(cand).norm(rho).value
    report = kam_check(cand, ledger, mode, error_norm)
    return report, ledger


def soundness_report(cand: TorusCandidate, frames: FrameBundle,
                     globs: GlobalNormConstants, delta: float,
                     schedule: NewtonSchedule, error_norm: float,
                     conserved: ConservedQuantity | None = None,
                     c_level_norm: float | None = None,
                     p_level_norm: float | None = None,
                     sigma_factor: float = 1.1) -> list:
    """Measured-vs-ledger pairs for every statically bounded quantity.

    Returns [(name, measured, bound), ...] where each bound is the literal
    ledger inequality at the stated strips:

        ||c o K - <c o K>||_{rho-delta} <= c_R c_c1/(gamma delta^tau) ||E||_rho
        ||Omega_K||_{rho-2delta}        <= C_OmegaK/(gamma delta^(tau+1)) ||E||_rho
        ||E_lag||_{rho-2delta}          <= C_OmegaL/(gamma delta^(tau+1)) ||E||_rho
        ||L||_rho <= C_L,  ||L^T||_rho <= C_LT,  ||N||_rho <= C_N,  ||N^T||_rho <= C_NT
        ||E_sym||_{rho-2delta}          <= C_sym/(gamma delta^(tau+1)) ||E||_rho
        ||T||_{rho-delta}               <= C_T
        ||E_red||_{rho-2delta}          <= C_red/(gamma delta^(tau+1)) ||E||_rho
    """
    hyp = measure_hypothesis_data(cand, frames, sigma_factor=sigma_factor)
    rho = cand.rho
    sched = schedule
    if sched.c_n is None:
        from .solver import resolve_smallness_scale

        sched = NewtonSchedule(a1=schedule.a1, a2=schedule.a2,
                               c_n=resolve_smallness_scale(schedule, cand),
                               max_iters=schedule.max_iters,
                               stop_tol=schedule.stop_tol, rho0=rho)
    if error_norm / delta >= sched.c_n:
        raise ValueError(
            f"smallness ||E||/delta = {error_norm / delta:.3e} >= c = {sched.c_n:.3e}: "
            "the torsion bound hypothesis fails for this candidate"
        )
    led = build_ledger("ordinary", globs, hyp, cand.dio, rho, delta, sched,
                       case_tag=cand.system.geometry.case_tag, n=cand.system.n,
                       d=cand.d)
    gamma, tau = cand.dio.gamma, cand.dio.tau
    loss1 = 1.0 / (gamma * delta**tau)
    loss2 = 1.0 / (gamma * delta ** (tau + 1))
    r1 = max(rho - delta, 0.0)
    r2 = max(rho - 2 * delta, 0.0)
    pairs = [
        ("L@rho", frames.L.norm(rho).value, led["C_L"]),
        ("LT@rho", frames.L.norm(rho, transpose=True).value, led["C_LT"]),
        ("N@rho", frames.N.norm(rho).value, led["C_N"]),
        ("NT@rho", frames.N.norm(rho, transpose=True).value, led["C_NT"]),
        ("OmegaK", frames.OmegaK.norm(r2).value, led["C_OmegaK"] * loss2 * error_norm),
        ("Elag", frames.Elag.norm(r2).value, led["C_OmegaL"] * loss2 * error_norm),
        ("Esym", frames.Esym.norm(r2).value, led["C_sym"] * loss2 * error_norm),
        ("T", frames.T.norm(r1).value, led["C_T"]),
        ("Ered", frames.Ered.norm(r2).value, led["C_red"] * loss2 * error_norm),
    ]
    if conserved is not None and c_level_norm is not None:
        pairs.append(
            ("c_shadow", c_level_norm,
             led["c_R"] * globs.c_c_1 * loss1 * error_norm)
        )
    if p_level_norm is not None and cand.system.n_integrals:
        pairs.append(
            ("p_shadow", p_level_norm,
             led["c_R"] * globs.c_p_1 * loss1 * error_norm)
        )
    return pairs


def contraction_constant_factory(globs: GlobalNormConstants, schedule: NewtonSchedule,
                                 mode: str = "ordinary", sigma_factor: float = 1.1,
                                 ray=None):
    """Per-step quadratic-contraction constant hook for the iteration drivers.

    Returns a callable (cand, frames, delta) -> C_E (or C_Ec in iso mode)
    that measures the hypothesis data on the current candidate and evaluates
    the ledger rows at the step's bite delta with the run's smallness scale.
    """

    def constant(cand: TorusCandidate, frames: FrameBundle, delta: float) -> float:
        sched = schedule
        if sched.c_n is None:
            from .solver import resolve_smallness_scale

            sched = NewtonSchedule(a1=schedule.a1, a2=schedule.a2,
                                   c_n=resolve_smallness_scale(schedule, cand),
                                   max_iters=schedule.max_iters,
                                   stop_tol=schedule.stop_tol, rho0=cand.rho)
        hyp = measure_hypothesis_data(cand, frames, sigma_factor=sigma_factor)
        kw = {}
        if mode == "iso":
            if ray is None:
                raise ValueError("iso contraction hook needs the frequency ray")
            star_norm = float(np.max(np.abs(ray.omega_star)))
            scale = float(np.max(np.abs(cand.omega))) / star_norm
            margin = min(scale - 1.0, ray.sigma_omega - scale) * star_norm
            kw = {
                "omega_star_norm": star_norm,
                "sigma_omega": ray.sigma_omega,
                "dist_ray": max(margin, 1e-300),
            }
        led = build_ledger(mode, globs, hyp, cand.dio, cand.rho, delta, sched,
                           case_tag=cand.system.geometry.case_tag, n=cand.system.n,
                           d=cand.d, **kw)
        return led["C_Ec"] if mode == "iso" else led["C_E"]

    return constant


# ---------------------------------------------------------------------------
# matrix-inverse control (auxiliary Neumann lemma)
# ---------------------------------------------------------------------------


@dataclass
class InverseControlReport:
    precondition_ok: bool
    condition_value: float | None
    condition_ok: bool
    invertible: bool
    bound: float | None
    actual_difference: float | None
    new_inverse_norm: float | None
    sigma: float


def _rowsum_norm(M: np.ndarray) -> float:
    return float(np.abs(M).sum(axis=-1).max())


def matrix_inverse_control(M: np.ndarray, Mbar: np.ndarray, sigma: float) -> InverseControlReport:
    """Perturbation control of a matrix inverse in the max-row-sum norm.

    If |M^{-1}| < sigma and 2 sigma^2 |Mbar - M| / (sigma - |M^{-1}|) <= 1,
    then Mbar is invertible with |Mbar^{-1} - M^{-1}| < 2 sigma^2 |Mbar - M|
    and |Mbar^{-1}| < sigma.  Precondition violations are reported, not thrown.
    """
    M = np.asarray(M, dtype=float)
    Mbar = np.asarray(Mbar, dtype=float)
    try:
        Minv = np.linalg.inv(M)
    except np.linalg.LinAlgError:
        return InverseControlReport(False, None, False, False, None, None, None, sigma)
    inv_norm = _rowsum_norm(Minv)
    if inv_norm >= sigma:
        return InverseControlReport(False, None, False, False, None, None, None, sigma)
    diff = _rowsum_norm(Mbar - M)
    condition = 2.0 * sigma**2 * diff / (sigma - inv_norm)
    if condition > 1.0:
        return InverseControlReport(True, condition, False, False, None, None, None, sigma)
    Mbar_inv = np.linalg.inv(Mbar)
    actual = _rowsum_norm(Mbar_inv - Minv)
    return InverseControlReport(
        precondition_ok=True,
        condition_value=condition,
        condition_ok=True,
        invertible=True,
        bound=2.0 * sigma**2 * diff,
        actual_difference=actual,
        new_inverse_norm=_rowsum_norm(Mbar_inv),
        sigma=sigma,
    )
