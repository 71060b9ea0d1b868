"""Command-line front end: solve / certify / validate / plotdata.

Configuration is a JSON document; every run embeds the resolved config and
the library version into its outputs so results are reproducible byte for
byte from the config alone (fixed reduction order, no timestamps).

Exit codes: 0 success or certificate pass, 1 certificate fail or solver
divergence, 2 usage/validation errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .cohomology import DiophantineParams, DivisorCollisionError, estimate_gamma
from .fourier import FourierMap
from .frames import TorusCandidate, build_frames, invariance_error
from .hamiltonian import builtin_system, check_derivatives, verify_commutation, verify_involution
from .isoenergetic import FrequencyRay, iterate_kam_iso, total_error
from .certificate import certify, estimate_global_constants
from .solver import NewtonSchedule, iterate_kam


class ConfigError(ValueError):
    pass


GOLDEN = (1.0 + np.sqrt(5.0)) / 2.0


@dataclass
class RunConfig:
    system: str = "lagrangian_rotors"
    epsilon: float = 0.001
    mode: str = "ordinary"              # "ordinary" | "iso"
    conserved: str = "H"                # "H" or "p:<j>" (iso mode)
    c0_offset: float = 0.0              # target level = seed level + offset
    omega: list | None = None           # ordinary mode frequency
    omega_star: list | None = None      # iso mode ray base
    sigma_omega: float = 2.0
    bands: list = field(default_factory=lambda: [16, 16])
    rho0: float = 0.03
    tau: float = 1.0
    scan_limit: int = 1000
    a1: float = 2.0
    a2: float = 2.0
    c_n: float | None = 1e4
    max_iters: int = 12
    stop_tol: float = 1e-12
    y_radius: float = 0.5
    imag_width: float = 0.2
    sigma_factor: float = 1.1
    out_dir: str = "out"

    def validate(self) -> "RunConfig":
        if self.system not in ("lagrangian_rotors", "symmetric_rotors"):
            raise ConfigError(f"unknown system {self.system!r}")
        if self.mode not in ("ordinary", "iso"):
            raise ConfigError(f"mode must be 'ordinary' or 'iso', got {self.mode!r}")
        n = 2 if self.system == "lagrangian_rotors" else 3
        m = 0 if self.system == "lagrangian_rotors" else 1
        d = n - m
        if self.mode == "ordinary":
            omega = self.omega if self.omega is not None else self._default_omega(d)
            if len(omega) != d:
                raise ConfigError(f"omega must have dimension d={d}, got {len(omega)}")
            self.omega = [float(v) for v in omega]
        else:
            base = self.omega_star if self.omega_star is not None else [
                v / np.sqrt(self.sigma_omega) for v in self._default_omega(d)
            ]
            if len(base) != d:
                raise ConfigError(f"omega_star must have dimension d={d}, got {len(base)}")
            self.omega_star = [float(v) for v in base]
            if self.sigma_omega <= 1:
                raise ConfigError("sigma_omega must be > 1")
            if self.conserved != "H" and not self.conserved.startswith("p:"):
                raise ConfigError("conserved must be 'H' or 'p:<index>'")
            if self.conserved.startswith("p:") and m == 0:
                raise ConfigError("this system has no first integrals to target")
        if len(self.bands) != d or any(int(b) < 1 for b in self.bands):
            raise ConfigError(f"bands must be {d} positive integers")
        self.bands = [int(b) for b in self.bands]
        if not 0 < self.rho0 < 1:
            raise ConfigError("rho0 must lie in (0, 1)")
        if self.tau < d - 1:
            raise ConfigError(f"tau must be >= d-1 = {d-1}")
        if self.a1 <= 1 or self.a2 <= 1:
            raise ConfigError("a1, a2 must be > 1")
        return self

    @staticmethod
    def _default_omega(d: int) -> list:
        # golden-type frequency vector
        return [1.0, GOLDEN][:d] if d <= 2 else [1.0, GOLDEN, GOLDEN**2][:d]

    @classmethod
    def load(cls, path: str | None, overrides: dict) -> "RunConfig":
        data = {}
        if path:
            with open(path) as fh:
                data = json.load(fh)
        cfg = cls(**{**data, **{k: v for k, v in overrides.items() if v is not None}})
        return cfg.validate()


def _json_dump(obj, path: Path):
    path.write_text(json.dumps(obj, sort_keys=True, indent=1) + "\n")


def _build_setup(cfg: RunConfig):
    """System, seed candidate, schedule and (iso) ray from a validated config."""
    n = 2 if cfg.system == "lagrangian_rotors" else 3
    d = n if cfg.system == "lagrangian_rotors" else n - 1
    ray = None
    if cfg.mode == "iso":
        ray = FrequencyRay.at_midpoint(np.asarray(cfg.omega_star), cfg.sigma_omega)
        omega = ray.omega
        gamma = estimate_gamma(ray.omega_star, cfg.tau, cfg.scan_limit)
    else:
        omega = np.asarray(cfg.omega)
        gamma = estimate_gamma(omega, cfg.tau, cfg.scan_limit)
    y_center = np.zeros(n)
    y_center[:d] = omega
    sys_obj = builtin_system(cfg.system, epsilon=cfg.epsilon, y_center=y_center,
                             y_radius=cfg.y_radius, imag_width=cfg.imag_width)
    bands = tuple(cfg.bands)
    grid = tuple(2 * b + 1 for b in bands)
    k_per = FourierMap.zeros(bands, grid, (2 * n, 1))
    k_per.coeffs[tuple(bands) + (slice(n, None), 0)] = y_center
    dio = DiophantineParams(omega, gamma, cfg.tau, cfg.scan_limit)
    cand = TorusCandidate(k_per, omega, dio, rho=cfg.rho0, system=sys_obj)
    schedule = NewtonSchedule(a1=cfg.a1, a2=cfg.a2, c_n=cfg.c_n, max_iters=cfg.max_iters,
                              stop_tol=cfg.stop_tol, rho0=cfg.rho0)
    return sys_obj, cand, schedule, ray


def _candidate_doc(cand: TorusCandidate, cfg: RunConfig, extra: dict | None = None) -> dict:
    doc = {
        "version": __version__,
        "config": asdict(cfg),
        "map": cand.k_per.to_json_dict(),
        "grid": list(cand.grid),
        "omega": cand.omega.tolist(),
        "rho": cand.rho,
        "dio": {"gamma": cand.dio.gamma, "tau": cand.dio.tau,
                "scan_limit": cand.dio.scan_limit},
        "angle_block": cand.angle_block,
    }
    if extra:
        doc.update(extra)
    return doc


def _candidate_from_doc(doc: dict):
    cfg = RunConfig(**doc["config"]).validate()
    sys_obj, _, schedule, ray = _build_setup(cfg)
    k_per = FourierMap.from_json_dict(doc["map"], grid=tuple(doc["grid"]))
    omega = np.asarray(doc["omega"])
    dio = DiophantineParams(omega, doc["dio"]["gamma"], doc["dio"]["tau"],
                            int(doc["dio"]["scan_limit"]))
    cand = TorusCandidate(k_per, omega, dio, rho=float(doc["rho"]), system=sys_obj,
                          angle_block=bool(doc.get("angle_block", True)))
    if ray is not None and "ray_scale" in doc:
        ray = FrequencyRay(np.asarray(cfg.omega_star), cfg.sigma_omega,
                           float(doc["ray_scale"]))
    return cand, cfg, schedule, ray


def cmd_solve(cfg: RunConfig, out_dir: Path) -> int:
    out_dir.mkdir(parents=True, exist_ok=True)
    sys_obj, cand, schedule, ray = _build_setup(cfg)
    if cfg.mode == "ordinary":
        result = iterate_kam(cand, schedule)
        extra = {}
        final = result.candidate
    else:
        sel = "H" if cfg.conserved == "H" else ("p", int(cfg.conserved.split(":")[1]))
        conserved = sys_obj.conserved(sel)
        seed_err = total_error(cand, conserved, 0.0)
        c0 = seed_err.E_omega + cfg.c0_offset  # seed level + offset
        result = iterate_kam_iso(cand, ray, conserved, c0, schedule)
        extra = {"omega_initial": result.omega_initial.tolist(),
                 "omega_final": result.omega_final.tolist(),
                 "c0": result.c0, "c_final": result.c_final,
                 "ray_scale": result.ray.scale}
        final = result.candidate

    log_lines = "\n".join(json.dumps(rec, sort_keys=True) for rec in result.log)
    (out_dir / "log.jsonl").write_text(log_lines + "\n")
    _json_dump(_candidate_doc(final, cfg, extra), out_dir / "torus.json")
    summary = {
        "version": __version__,
        "config": asdict(cfg),
        "converged": result.converged,
        "reason": result.reason,
        "final_error": result.final_error,
        "steps": len(result.steps),
        "final_rho": final.rho,
        "note": "error norms are Fourier majorants of the truncated model; "
                "tails beyond the band limit are not certified",
        "gamma_scan_limit": cand.dio.scan_limit,
        "gamma": cand.dio.gamma,
    }
    summary.update(extra)
    _json_dump(summary, out_dir / "summary.json")
    print(f"{'converged' if result.converged else 'FAILED'}: {result.reason}; "
          f"final error {result.final_error:.3e}; outputs in {out_dir}")
    return 0 if result.converged else 1


def cmd_certify(torus_path: str, cfg_overrides: dict, out_dir: Path) -> int:
    out_dir.mkdir(parents=True, exist_ok=True)
    doc = json.loads(Path(torus_path).read_text())
    cand, cfg, schedule, ray = _candidate_from_doc(doc)
    conserved = None
    kw = {}
    if cfg.mode == "iso":
        sel = "H" if cfg.conserved == "H" else ("p", int(cfg.conserved.split(":")[1]))
        conserved = cand.system.conserved(sel)
        kw["ray"] = ray
    globs = estimate_global_constants(cand.system, conserved=conserved)
    frames = build_frames(cand, conserved)
    if cfg.mode == "iso":
        terr = total_error(cand, conserved, float(doc.get("c0", 0.0)))
        err_norm = terr.combined_norm(cand.rho)
    else:
        err_norm = invariance_error(cand).norm(cand.rho).value
    report, ledger = certify(cand, frames, schedule, cfg.mode, globs=globs,
                             conserved=conserved, error_norm=err_norm,
                             sigma_factor=cfg.sigma_factor, **kw)
    (out_dir / "ledger.csv").write_text(ledger.to_csv())
    _json_dump(report.to_dict(), out_dir / "certificate.json")
    status = "PASS" if report.passed else "FAIL"
    print(f"certificate {status}: ratio = {report.ratio:.6g} (error {err_norm:.3e}); "
          f"ledger and report in {out_dir}")
    return 0 if report.passed else 1


def cmd_validate(cfg: RunConfig) -> int:
    sys_obj, cand, _, _ = _build_setup(cfg)
    inv = verify_involution(sys_obj)
    comm = verify_commutation(sys_obj)
    deriv = check_derivatives(sys_obj)
    rng_pts = np.random.default_rng(3)
    pts = np.concatenate(
        [rng_pts.uniform(0, 1, (30, sys_obj.n)),
         sys_obj.domain.y_center + 0.5 * rng_pts.uniform(-1, 1, (30, sys_obj.n))], axis=1
    )
    try:
        sys_obj.geometry.check_invariants(pts)
        structure_ok = True
    except Exception as exc:  # reported, not raised
        structure_ok = False
        print(f"structure invariants FAILED: {exc}")
    ok = inv.passed and comm.passed and deriv["passed"] and structure_ok
    print(f"involution: {'pass' if inv.passed else 'FAIL'} (max bracket {inv.max_bracket:.3e})")
    print(f"commutation: {'pass' if comm.passed else 'FAIL'} (max residual {comm.max_bracket:.3e})")
    print(f"derivative cross-check: {'pass' if deriv['passed'] else 'FAIL'} "
          f"({ {k: v for k, v in deriv.items() if k != 'passed'} })")
    return 0 if ok else 1


def cmd_plotdata(torus_path: str, out_dir: Path, log_path: str | None = None) -> int:
    out_dir.mkdir(parents=True, exist_ok=True)
    doc = json.loads(Path(torus_path).read_text())
    cand, _, _, _ = _candidate_from_doc(doc)
    vals = cand.k_values(cand.grid)
    d = cand.d
    axes = [np.arange(m) / m for m in cand.grid]
    mesh = np.meshgrid(*axes, indexing="ij")
    cols = [m.reshape(-1) for m in mesh] + [vals[..., j].reshape(-1)
                                            for j in range(2 * cand.system.n)]
    header = ",".join([f"theta{i+1}" for i in range(d)]
                      + [f"K{j+1}" for j in range(2 * cand.system.n)])
    lines = [header]
    for row in zip(*cols):
        lines.append(",".join(repr(float(v)) for v in row))
    (out_dir / "torus_grid.csv").write_text("\n".join(lines) + "\n")
    if log_path:
        recs = [json.loads(line) for line in Path(log_path).read_text().splitlines() if line]
        keys = ["step", "rho", "delta", "err"]
        lines = [",".join(keys)]
        for rec in recs:
            lines.append(",".join(repr(rec.get(k)) for k in keys))
        (out_dir / "errors.csv").write_text("\n".join(lines) + "\n")
    print(f"wrote plot data ({np.prod(cand.grid)} grid rows) to {out_dir}")
    return 0


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="kamtorus",
                                 description="invariant-torus solver and certifier")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", default=None, help="JSON config path")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--mode", choices=["ordinary", "iso"], default=None)
        p.add_argument("--epsilon", type=float, default=None)
        p.add_argument("--bands", type=int, nargs="+", default=None)

    p_solve = sub.add_parser("solve", help="run the quasi-Newton solver")
    common(p_solve)
    p_cert = sub.add_parser("certify", help="evaluate the existence certificate")
    p_cert.add_argument("torus", help="torus JSON produced by solve")
    common(p_cert)
    p_val = sub.add_parser("validate", help="check system callbacks and structure")
    common(p_val)
    p_plot = sub.add_parser("plotdata", help="emit CSV grid data for plotting")
    p_plot.add_argument("torus", help="torus JSON produced by solve")
    p_plot.add_argument("--log", default=None, help="convergence log (JSON lines)")
    common(p_plot)
    return ap


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    overrides = {"mode": args.mode, "epsilon": args.epsilon,
                 "bands": list(args.bands) if args.bands else None}
    try:
        cfg = RunConfig.load(args.config, overrides)
    except (ConfigError, DivisorCollisionError, json.JSONDecodeError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    out_dir = Path(args.out) if args.out else Path(cfg.out_dir)
    try:
        if args.command == "solve":
            return cmd_solve(cfg, out_dir)
        if args.command == "certify":
            return cmd_certify(args.torus, overrides, out_dir)
        if args.command == "validate":
            return cmd_validate(cfg)
        if args.command == "plotdata":
            return cmd_plotdata(args.torus, out_dir, args.log)
    except (ConfigError, DivisorCollisionError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 1
    return 2


if __name__ == "__main__":
    raise SystemExit(main())
