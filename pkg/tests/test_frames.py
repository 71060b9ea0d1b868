"""Frame construction, geometric error maps, torsion, reducibility."""

import numpy as np
import pytest

from kamtorus.cohomology import DiophantineParams, estimate_gamma, russmann_constant
from kamtorus.fourier import FourierMap, matmul, random_map
from kamtorus.frames import (
    DomainEscapeError,
    TorusCandidate,
    build_frames,
    extended_torsion,
    grid_kitchen,
    invariance_error,
    normal_frame,
    tangent_frame,
    torsion,
    work_grid,
)
from kamtorus.hamiltonian import builtin_system

from conftest import GOLDEN, seed_candidate


def perturb_candidate(cand, scale=1e-3, seed=0, decay=1.2):
    """Add a small analytic periodic perturbation to K."""
    rng = np.random.default_rng(seed)
    noise = random_map(cand.bands, cand.grid, cand.k_per.shape, rng, decay=decay,
                       scale=scale)
    return cand.with_updates(k_per=cand.k_per + noise)


# ------------------------------------------------------------- exact zeroing


def test_exact_torus_all_errors_vanish(exact_torus_b):
    cand = exact_torus_b
    kk = grid_kitchen(cand)
    E = invariance_error(cand, kk)
    assert E.norm(cand.rho).value <= 1e-13
    fr = build_frames(cand, kitchen=kk)
    mid = cand.rho * 0.6
    assert fr.OmegaK.norm(mid).value <= 1e-11
    assert fr.Elag.norm(mid).value <= 1e-11
    assert fr.Esym.norm(mid).value <= 1e-11
    assert fr.Ered.norm(mid).value <= 1e-10
    # the averaged torsion is comfortably invertible at zero coupling
    assert abs(np.linalg.det(fr.avgT)) > 0.5


def test_invariance_error_order_epsilon_and_pointwise_oracle(perturbed_candidate_a):
    cand = perturbed_candidate_a
    eps = cand.system.params["epsilon"]
    E = invariance_error(cand)
    norm = E.norm(cand.rho).value
    assert 0.1 * eps < norm < 100 * eps
    # direct grid evaluation of X_H o K - DK omega
    wg = work_grid(cand.bands)
    kv = cand.k_values(wg)
    direct = cand.system.XH(kv) - cand.dk().eval_grid(wg).real @ cand.omega
    sampled = E.eval_grid(wg)[..., 0].real
    assert np.max(np.abs(direct - sampled)) < 1e-12


def test_invariance_error_phase_shift_invariant(perturbed_candidate_a):
    cand = perturbed_candidate_a
    alpha = np.array([0.37, 0.11])
    from kamtorus.fourier import _index_box

    shifted = cand.k_per.coeffs.copy()
    ks = _index_box(cand.bands)
    phase = np.exp(2j * np.pi * (np.add.outer(ks[0] * alpha[0], ks[1] * alpha[1])))
    shifted = shifted * phase[..., None, None]
    k_shift = FourierMap(shifted, cand.bands, cand.grid)
    # the identity part contributes K(theta + alpha) = theta + alpha + per(theta+alpha)
    const = np.zeros((2 * cand.system.n, 1))
    const[: cand.d, 0] = alpha
    k_shift = k_shift.add_constant(const)
    cand2 = cand.with_updates(k_per=k_shift)
    n1 = invariance_error(cand).norm(cand.rho).value
    n2 = invariance_error(cand2).norm(cand2.rho).value
    assert abs(n1 - n2) < 1e-9 * max(1, n1)


def test_domain_escape_detected(perturbed_candidate_a):
    cand = perturbed_candidate_a
    bad = cand.with_updates(rho=cand.system.domain.imag_width + 0.05)
    with pytest.raises(DomainEscapeError):
        invariance_error(bad)


# ------------------------------------------------------------ tangent frame


def test_tangent_frame_lagrangian_case_is_dk(perturbed_candidate_a):
    cand = perturbed_candidate_a
    L = tangent_frame(cand)
    assert L.shape == (4, 2)
    assert np.max(np.abs(L.coeffs - cand.dk().coeffs)) == 0.0


def test_tangent_frame_includes_symmetry_column(exact_torus_b):
    L = tangent_frame(exact_torus_b)
    assert L.shape == (6, 3)
    col = L.block(slice(None), slice(2, 3)).average().real
    assert np.allclose(col[:, 0], [0, 1, 1, 0, 0, 0], atol=1e-12)


def test_compatibility_average_identity(perturbed_candidate_a):
    """<L^T (Omega o K) E> = 0 on any candidate, not only near-invariant ones."""
    for seed in range(3):
        cand = perturb_candidate(perturbed_candidate_a, scale=5e-3, seed=seed)
        kk = grid_kitchen(cand)
        E = invariance_error(cand, kk)
        L = tangent_frame(cand, kk)
        eta_N = matmul(L.T, matmul(kk.Omega, E, out_bands=cand.bands),
                       out_bands=cand.bands)
        assert np.max(np.abs(eta_N.average())) <= 1e-12 * max(
            1.0, E.norm(cand.rho).value
        )


# ------------------------------------------------------------- normal frame


def free_rotor_candidate(n=2, bands=(6, 6)):
    omega = np.array([1.0, GOLDEN])
    return seed_candidate("lagrangian_rotors", 0.0, omega, bands=bands, rho=0.05)


def test_free_rotor_frame_hand_values():
    cand = free_rotor_candidate()
    kk = grid_kitchen(cand)
    L = tangent_frame(cand, kk)
    N0, B, A, N, diag = normal_frame(cand, L, kk)
    eye2 = np.eye(2)
    assert np.allclose(L.average().real, np.vstack([eye2, 0 * eye2]), atol=1e-13)
    assert np.allclose(N0.average().real, np.vstack([0 * eye2, eye2]), atol=1e-13)
    assert np.allclose(B.average().real, eye2, atol=1e-12)
    assert np.max(np.abs(A.coeffs)) == 0.0  # Case III
    assert np.allclose(N.average().real, np.vstack([0 * eye2, eye2]), atol=1e-12)
    T, avgT, _ = torsion(cand, N, kk)
    assert np.allclose(avgT, eye2, atol=1e-11)
    assert T.norm(0.02).value == pytest.approx(1.0, abs=1e-11)


def test_pointwise_inverse_matches_neumann_oracle(perturbed_candidate_a):
    cand = perturb_candidate(perturbed_candidate_a, scale=2e-2, seed=3)
    kk = grid_kitchen(cand)
    L = tangent_frame(cand, kk)
    GL = matmul(matmul(L.T, kk.G, out_bands=cand.bands), L, out_bands=cand.bands)
    N0, B, A, N, diag = normal_frame(cand, L, kk)
    wg = work_grid(cand.bands)
    vals = GL.eval_grid(wg)
    # Neumann-series refinement oracle, independent of the LU path
    X = np.linalg.inv(vals)
    for _ in range(3):
        X = X @ (2 * np.eye(vals.shape[-1]) - vals @ X)
    oracle = FourierMap.from_samples(X, cand.bands, wg)
    diff = (B - 0.5 * (oracle + oracle.T).with_grid(cand.grid)).norm(0.0).value
    assert diff < 1e-12 * max(1.0, B.norm(0.0).value)
    assert diag["B_asymmetry"] < 1e-12


def test_case_iii_forces_zero_A(exact_torus_b):
    fr = build_frames(exact_torus_b)
    assert np.max(np.abs(fr.A.coeffs)) == 0.0


# ------------------------------------------------------- error-map structure


def test_reducibility_block12_vanishes_identically(perturbed_candidate_a):
    for seed in (0, 1):
        cand = perturb_candidate(perturbed_candidate_a, scale=1e-2, seed=seed)
        fr = build_frames(cand)
        n = cand.system.n
        block12 = fr.Ered.coeffs[..., :n, n:]
        assert np.max(np.abs(block12)) == 0.0


def test_avg_pullback_vanishes_on_any_candidate(perturbed_candidate_a, exact_torus_b):
    for cand in (perturbed_candidate_a, perturb_candidate(perturbed_candidate_a, 1e-2, 7),
                 exact_torus_b):
        fr = build_frames(cand)
        assert np.max(np.abs(fr.OmegaK.average())) <= 1e-12


def test_esym_block_structure_case_iii(perturbed_candidate_a):
    """E_sym = diag(E_lag, B^T E_lag B) in the anti-involutive case."""
    cand = perturb_candidate(perturbed_candidate_a, scale=5e-3, seed=11)
    fr = build_frames(cand)
    n = cand.system.n
    bands = cand.bands
    top_left = FourierMap(fr.Esym.coeffs[..., :n, :n], bands, cand.grid)
    diff1 = (top_left - fr.Elag).norm(0.0).value
    bottom_right = FourierMap(fr.Esym.coeffs[..., n:, n:], bands, cand.grid)
    BT_Elag_B = matmul(matmul(fr.B.T, fr.Elag, out_bands=bands), fr.B, out_bands=bands)
    diff2 = (bottom_right - BT_Elag_B).norm(0.0).value
    off = max(np.max(np.abs(fr.Esym.coeffs[..., :n, n:])),
              np.max(np.abs(fr.Esym.coeffs[..., n:, :n])))
    scale = max(1.0, fr.Elag.norm(0.0).value)
    assert diff1 <= 1e-10 * scale
    assert diff2 <= 1e-8 * scale  # two truncated products on each side
    assert off <= 1e-10 * scale


def test_frame_identity_tangent_normal_pairing(perturbed_candidate_a):
    """L^T (Omega o K) N = E_lag A - I (here A = 0: equals -I), modulo the
    band-truncation defect of the pointwise inverse B."""
    cand = perturb_candidate(perturbed_candidate_a, scale=5e-3, seed=13)
    fr = build_frames(cand)
    kk = grid_kitchen(cand)
    lhs = matmul(matmul(fr.L.T, kk.Omega, out_bands=cand.bands), fr.N,
                 out_bands=cand.bands)
    lhs = lhs.add_constant(np.eye(cand.system.n))
    resid = lhs.norm(0.0).value
    GL = matmul(matmul(fr.L.T, kk.G, out_bands=cand.bands), fr.L, out_bands=cand.bands)
    trunc = matmul(GL, fr.B, out_bands=cand.bands).add_constant(
        -np.eye(cand.system.n)
    ).norm(0.0).value
    assert resid <= 1e-10 + 2 * trunc + 10 * fr.Elag.norm(0.0).value * fr.A.norm(0.0).value


def test_normal_isotropy_identity_case_iii(perturbed_candidate_a):
    """N^T (Omega o K) N = B^T E_lag B in Case III."""
    cand = perturb_candidate(perturbed_candidate_a, scale=5e-3, seed=17)
    fr = build_frames(cand)
    kk = grid_kitchen(cand)
    lhs = matmul(matmul(fr.N.T, kk.Omega, out_bands=cand.bands), fr.N,
                 out_bands=cand.bands)
    rhs = matmul(matmul(fr.B.T, fr.Elag, out_bands=cand.bands), fr.B,
                 out_bands=cand.bands)
    assert (lhs - rhs).norm(0.0).value <= 1e-8 * max(1.0, rhs.norm(0.0).value)


def test_geometric_identity_at_random_points(perturbed_candidate_a):
    """D Omega[X_H] + (D X_H)^T Omega + Omega D X_H = 0 via the callbacks."""
    sys_obj = perturbed_candidate_a.system
    rng = np.random.default_rng(23)
    z = rng.uniform(-1, 1, size=(100, 4))
    dxh = sys_obj.DXH(z)
    om = sys_obj.geometry.omega_mat(z)
    d_om = sys_obj.geometry.d_omega(z)  # zero for the canonical structure
    term = np.einsum("...ijl,...l->...ij", d_om, sys_obj.XH(z))
    total = term + np.swapaxes(dxh, -1, -2) @ om + om @ dxh
    assert np.max(np.abs(total)) <= 1e-8


# -------------------------------------------------------------- torsion maps


def test_extended_torsion_free_rotor_determinant():
    cand = free_rotor_candidate()
    kk = grid_kitchen(cand, cand.system.conserved("H"))
    L = tangent_frame(cand, kk)
    _, _, _, N, _ = normal_frame(cand, L, kk)
    T, avgT, _ = torsion(cand, N, kk)
    Tc, avgTc, Tdown = extended_torsion(cand, T, N, cand.system.conserved("H"), kk)
    omega_hat = cand.omega  # d = n: omega_hat = omega
    expected = -float(omega_hat @ omega_hat)
    assert np.linalg.det(avgTc) == pytest.approx(expected, rel=1e-10)


def test_extended_torsion_bottom_row_limits(exact_torus_b):
    cand = exact_torus_b
    for sel, expected in (("H", np.array([1.0, GOLDEN, 0.0])),
                          (("p", 0), np.array([0.0, 0.0, 1.0]))):
        conserved = cand.system.conserved(sel)
        kk = grid_kitchen(cand, conserved)
        fr = build_frames(cand, conserved, kitchen=kk)
        bottom = fr.avgTc[-1, :-1]
        assert np.allclose(bottom, expected, atol=1e-10)


def test_torsion_symmetry_reported_not_asserted(perturbed_candidate_a):
    fr = build_frames(perturbed_candidate_a)
    asym = (fr.T - fr.T.T).norm(0.0).value
    errn = invariance_error(perturbed_candidate_a).norm(perturbed_candidate_a.rho).value
    # diagnostic only: asymmetry is O(||E||); track that it is not wildly larger
    assert asym <= 1e3 * max(errn, 1e-14)


# ----------------------------------------------- fully periodic ambient space


def harmonic_pair_system():
    """Two uncoupled oscillators on R^4 (fully periodic parameterizations)."""
    from kamtorus.hamiltonian import DomainBox, HamiltonianSystem, canonical_structure
    from kamtorus.hamiltonian import _empty_integrals

    tp = 2 * np.pi
    freq = np.array([1.0, GOLDEN])

    def H(z):
        x, y = z[..., :2], z[..., 2:]
        return np.pi * (freq[0] * (x[..., 0] ** 2 + y[..., 0] ** 2)
                        + freq[1] * (x[..., 1] ** 2 + y[..., 1] ** 2))

    def DH(z):
        out = np.empty_like(np.asarray(z))
        out[..., 0] = tp * freq[0] * z[..., 0]
        out[..., 1] = tp * freq[1] * z[..., 1]
        out[..., 2] = tp * freq[0] * z[..., 2]
        out[..., 3] = tp * freq[1] * z[..., 3]
        return out

    def XH(z):
        out = np.empty_like(np.asarray(z))
        out[..., 0] = tp * freq[0] * z[..., 2]
        out[..., 1] = tp * freq[1] * z[..., 3]
        out[..., 2] = -tp * freq[0] * z[..., 0]
        out[..., 3] = -tp * freq[1] * z[..., 1]
        return out

    mat = np.zeros((4, 4))
    mat[0, 2], mat[1, 3] = tp * freq[0], tp * freq[1]
    mat[2, 0], mat[3, 1] = -tp * freq[0], -tp * freq[1]

    def DXH(z):
        z = np.asarray(z)
        return np.broadcast_to(mat, z.shape[:-1] + (4, 4)).copy()

    def D2XH(z):
        z = np.asarray(z)
        return np.zeros(z.shape[:-1] + (4, 4, 4))

    p, Dp, Xp, DXp, D2Xp = _empty_integrals(2)
    return HamiltonianSystem(
        name="harmonic_pair", n=2, n_integrals=0, geometry=canonical_structure(2),
        H=H, DH=DH, XH=XH, DXH=DXH, D2XH=D2XH,
        p=p, Dp=Dp, Xp=Xp, DXp=DXp, D2Xp=D2Xp,
        domain=DomainBox(n=2, y_center=np.zeros(4), y_radius=2.0, imag_width=0.5,
                         angle_count=0),
    )


def test_fully_periodic_parameterization_without_marker(golden_dio):
    """K purely periodic (no zero-section block): the circle pair is invariant."""
    sys_obj = harmonic_pair_system()
    bands, grid = (3, 3), (7, 7)
    k_per = FourierMap.zeros(bands, grid, (4, 1))
    # x_j = r_j cos(2 pi theta_j), y_j = -r_j sin(2 pi theta_j)
    for j, r in ((0, 0.6), (1, 0.4)):
        plus, minus = [3, 3], [3, 3]
        plus[j], minus[j] = 3 + 1, 3 - 1
        k_per.coeffs[tuple(plus) + (j, 0)] = r / 2
        k_per.coeffs[tuple(minus) + (j, 0)] = r / 2
        k_per.coeffs[tuple(plus) + (2 + j, 0)] = 0.5j * r
        k_per.coeffs[tuple(minus) + (2 + j, 0)] = -0.5j * r
    cand = TorusCandidate(k_per, golden_dio.omega, golden_dio, rho=0.05,
                          system=sys_obj, angle_block=False)
    # DK carries no identity block in this topology
    assert np.max(np.abs(cand.dk().average())) < 1e-14
    E = invariance_error(cand)
    assert E.norm(cand.rho).value <= 1e-12
    kk = grid_kitchen(cand)
    L = tangent_frame(cand, kk)
    _, _, _, N, _ = normal_frame(cand, L, kk)
    # the oscillator pair is isochronous: zero twist, and the degeneracy gate
    # must fire rather than regularize
    from kamtorus.frames import TwistDegeneracyError

    with pytest.raises(TwistDegeneracyError):
        torsion(cand, N, kk)


# ------------------------------------------ ledger-style shadowing inequality


def test_conserved_shadowing_inequality(exact_torus_b):
    """||c o K - <c o K>||_{rho-delta} <= c_R c_c1 / (gamma delta^tau) ||E||_rho."""
    cand = perturb_candidate(exact_torus_b, scale=2e-3, seed=29)
    cand = cand.with_updates(
        system=builtin_system("symmetric_rotors", epsilon=0.01,
                              y_center=[1.0, GOLDEN, 0.0], y_radius=0.5, imag_width=0.2)
    )
    conserved = cand.system.conserved("H")
    kk = grid_kitchen(cand, conserved)
    E = invariance_error(cand, kk)
    rho = cand.rho
    delta = rho / 4
    c_map = kk.c_map.add_constant(-kk.c_map.average())
    measured = c_map.norm(rho - delta).value
    from kamtorus.certificate import estimate_global_constants

    globs = estimate_global_constants(cand.system, conserved=conserved)
    c_r = russmann_constant(cand.dio.tau, delta, cand.d, cand.bands)
    bound = c_r * globs.c_c_1 / (cand.dio.gamma * delta**cand.dio.tau) * E.norm(rho).value
    assert measured <= bound + 1e-9
