use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::Error;
use crate::field::{ScalarField, SpinorField, VectorField};
use crate::grid::Grid;
use crate::pauli::{gauge_transform, PauliOperator};
use crate::potential::{sample_potential, Preset};

use super::*;

fn assemble_free(grid: &Grid, v0: f64, h: f64) -> PauliOperator {
    PauliOperator::assemble(
        grid,
        VectorField::zeros(grid),
        ScalarField::constant(grid, v0),
        h,
    )
    .unwrap()
}

/// Independent oracle: eigenvalues of h²|k|² − V₀ over the discrete mode
/// lattice (same wavenumber convention as the operator), doubled per spin.
fn lattice_eigenvalues(grid: &Grid, h: f64, v0: f64, tau: f64) -> Vec<f64> {
    let k: [Vec<f64>; 3] = std::array::from_fn(|a| grid.wavenumbers(a));
    let [n0, n1, n2] = grid.dims();
    let mut out = Vec::new();
    for i in 0..n0 {
        for j in 0..n1 {
            for l in 0..n2 {
                let k2 = k[0][i] * k[0][i] + k[1][j] * k[1][j] + k[2][l] * k[2][l];
                let lam = h * h * k2 - v0;
                if lam <= tau {
                    out.push(lam);
                    out.push(lam);
                }
            }
        }
    }
    out.sort_by(f64::total_cmp);
    out
}

#[test]
fn lattice_oracle_constant_potential_dense() {
    let g = Grid::new([4, 4, 4], [2.0; 3]).unwrap();
    let h = 0.8;
    let op = assemble_free(&g, 1.5, h);
    let r = negative_spectrum(&op, h, 0.0, &Solver::Dense).unwrap();
    let oracle = lattice_eigenvalues(&g, h, 1.5, 0.0);
    assert_eq!(oracle.len(), 16, "eight zero modes, doubled per spin");
    assert_eq!(r.eigenvalues.len(), oracle.len());
    for (a, b) in r.eigenvalues.iter().zip(&oracle) {
        assert!((a - b).abs() < 1e-8, "{a} vs {b}");
    }
    assert!((r.trace_minus().unwrap() - (-24.0)).abs() < 1e-7);
}

#[test]
fn lattice_oracle_constant_potential_iterative() {
    // 16-fold degeneracy with block width 16: the hard multiplicity edge;
    // negative_spectrum also cross-checks against dense internally (4³ ≤ 6³)
    let g = Grid::new([4, 4, 4], [2.0; 3]).unwrap();
    let h = 0.8;
    let op = assemble_free(&g, 1.5, h);
    let r = negative_spectrum(&op, h, 0.0, &Solver::Iterative(IterativeParams::default()))
        .unwrap();
    assert!(r.complete);
    let oracle = lattice_eigenvalues(&g, h, 1.5, 0.0);
    assert_eq!(r.eigenvalues.len(), oracle.len());
    for (a, b) in r.eigenvalues.iter().zip(&oracle) {
        assert!((a - b).abs() < 1e-8, "{a} vs {b}");
    }
}

#[test]
fn degenerate_cluster_on_larger_grid() {
    // past the auto-certification size: the solver's own certificate must
    // hold up on a 16-fold cluster, checked against an explicit dense run
    let g = Grid::new([8, 8, 8], [2.0; 3]).unwrap();
    let h = 0.5;
    let op = assemble_free(&g, 1.5, h);
    let it = negative_spectrum(&op, h, 0.0, &Solver::Iterative(IterativeParams::default()))
        .unwrap();
    let de = negative_spectrum(&op, h, 0.0, &Solver::Dense).unwrap();
    assert!(it.complete);
    assert_eq!(it.eigenvalues.len(), de.eigenvalues.len());
    for (a, b) in it.eigenvalues.iter().zip(&de.eigenvalues) {
        assert!((a - b).abs() < 1e-8);
    }
}

#[test]
fn nonpositive_potential_gives_empty_spectrum() {
    let g = Grid::new([4, 4, 4], [2.0; 3]).unwrap();
    let op = assemble_free(&g, -0.3, 0.8);
    for solver in [Solver::Dense, Solver::Iterative(IterativeParams::default())] {
        let r = negative_spectrum(&op, 0.8, 0.0, &solver).unwrap();
        assert!(r.complete);
        assert!(r.eigenvalues.is_empty());
        assert_eq!(r.trace_minus().unwrap(), 0.0);
        // empty spectrum still yields a (zero) diagonal density
        let d = r.diag_density(0.0).unwrap();
        assert!(d.values().iter().all(|&x| x == 0.0));
    }
}

#[test]
fn gaussian_well_iterative_matches_dense() {
    let g = Grid::new([4, 4, 4], [2.4; 3]).unwrap();
    let h = 0.8;
    let v = sample_potential(
        &Preset::GaussianWell { amplitude: 2.0, width: 0.5, floor: -0.2 },
        &g,
    )
    .unwrap();
    let op = PauliOperator::assemble(&g, VectorField::zeros(&g), v, h).unwrap();
    let de = negative_spectrum(&op, h, 0.0, &Solver::Dense).unwrap();
    let it = negative_spectrum(&op, h, 0.0, &Solver::Iterative(IterativeParams::default()))
        .unwrap();
    assert!(!de.eigenvalues.is_empty(), "well should bind at least one state");
    assert_eq!(de.eigenvalues.len(), it.eigenvalues.len());
    for (a, b) in de.eigenvalues.iter().zip(&it.eigenvalues) {
        assert!((a - b).abs() < 1e-8);
    }
    // residual and orthonormality contracts
    for r in [&de, &it] {
        for (lam, res) in r.eigenvalues.iter().zip(&r.residuals) {
            assert!(res <= &(RESIDUAL_TOL * lam.abs().max(1.0)));
        }
        assert!(r.gram_defect() <= RESIDUAL_TOL);
    }
}

#[test]
fn trace_minus_arithmetic_and_incomplete_rejection() {
    let g = Grid::new([4, 4, 4], [2.0; 3]).unwrap();
    let mk = |eigs: Vec<f64>, complete| SpectralResult {
        grid: g.clone(),
        h: 0.8,
        threshold: 5.0,
        ambiguous: SpectralResult::flag_ambiguous(&eigs),
        eigenvalues: eigs,
        eigenfunctions: vec![],
        residuals: vec![],
        solver: Solver::Dense,
        complete,
        cluster_at_threshold: false,
    };
    assert_eq!(mk(vec![], true).trace_minus().unwrap(), 0.0);
    assert_eq!(mk(vec![-2.0, -1.0, 3.0], true).trace_minus().unwrap(), -3.0);
    assert!(matches!(
        mk(vec![-1.0], false).trace_minus(),
        Err(Error::IncompleteSpectrum)
    ));
}

#[test]
fn smoothed_trace_termwise() {
    let spec = SmoothingSpec::new(0.5).unwrap();
    // single λ = 0 contributes −L
    assert!((spec.term(0.0) + 0.5).abs() < 1e-15);
    // per-term upper bound min(λ, 0) across the regularization window
    let mut t = -2.0;
    while t <= 2.0 {
        assert!(spec.term(t) <= t.min(0.0) + 1e-15, "term({t}) = {}", spec.term(t));
        t += 0.01;
    }
    // λ ≤ −L leaves the window: term is λ itself
    assert_eq!(spec.term(-0.5), -0.5);
    assert_eq!(spec.term(-3.0), -3.0);

    let g = Grid::new([4, 4, 4], [2.0; 3]).unwrap();
    let deep = SpectralResult {
        grid: g.clone(),
        h: 0.8,
        threshold: 1.0,
        eigenvalues: vec![-3.0, -2.0, -0.8],
        ambiguous: vec![],
        eigenfunctions: vec![],
        residuals: vec![],
        solver: Solver::Dense,
        complete: true,
        cluster_at_threshold: false,
    };
    // all eigenvalues at or below −L → smoothed equals plain trace_minus
    let s = deep.smoothed_trace(&spec).unwrap();
    assert!((s - deep.trace_minus().unwrap()).abs() < 1e-12);

    // mixed spectrum: smoothed ≤ plain
    let mixed = SpectralResult {
        eigenvalues: vec![-1.2, -0.3, -0.01, 0.2, 0.9],
        ..deep
    };
    assert!(mixed.smoothed_trace(&spec).unwrap() <= mixed.trace_minus().unwrap());
}

#[test]
fn density_e1_against_dense_kernel() {
    let g = Grid::new([4, 4, 4], [2.4; 3]).unwrap();
    let h = 0.8;
    let v = sample_potential(
        &Preset::GaussianWell { amplitude: 2.0, width: 0.5, floor: -0.2 },
        &g,
    )
    .unwrap();
    let op = PauliOperator::assemble(&g, VectorField::zeros(&g), v, h).unwrap();
    let r = negative_spectrum(&op, h, 0.0, &Solver::Dense).unwrap();

    // independent kernel oracle straight from the raw dense factorization
    let m = dense_matrix(&op);
    let n = g.n_sites();
    let eig = {
        let mt = m.adjoint();
        ((m + mt).scale(0.5)).symmetric_eigen()
    };
    let w = ScalarField::from_fn(&g, |p| 0.3 + 0.1 * p[0].sin() + 0.05 * p[1] * p[2]);
    let mut oracle = 0.0;
    for idx in 0..eig.eigenvalues.len() {
        let lam = eig.eigenvalues[idx];
        if lam >= 0.0 {
            continue;
        }
        let col = eig.eigenvectors.column(idx);
        for site in 0..n {
            oracle += lam
                * w.values()[site]
                * (col[site].norm_sqr() + col[n + site].norm_sqr());
        }
    }

    let got = r.density_e1(&w).unwrap();
    assert!(
        (got - oracle).abs() < 1e-10 * oracle.abs().max(1.0),
        "{got} vs {oracle}"
    );

    // ψ ≡ 1 reduces to trace_minus; ψ ≡ 0 to zero
    let ones = ScalarField::constant(&g, 1.0);
    assert!(
        (r.density_e1(&ones).unwrap() - r.trace_minus().unwrap()).abs() < 1e-9
    );
    assert_eq!(r.density_e1(&ScalarField::zeros(&g)).unwrap(), 0.0);
}

#[test]
fn diag_density_counts_and_positivity() {
    let g = Grid::new([4, 4, 4], [2.0; 3]).unwrap();
    let h = 0.8;
    let op = assemble_free(&g, 1.5, h);
    let r = negative_spectrum(&op, h, 0.0, &Solver::Dense).unwrap();
    let d = r.diag_density(0.0).unwrap();
    assert!(d.values().iter().all(|&x| x >= -1e-14));
    let count = r.eigenvalues.iter().filter(|l| **l <= 0.0).count() as f64;
    assert!((d.integrate() - count).abs() < 1e-8, "{} vs {count}", d.integrate());
}

#[test]
fn spin_doubling_at_zero_field() {
    let g = Grid::new([4, 4, 4], [2.4; 3]).unwrap();
    let h = 0.8;
    let v = sample_potential(
        &Preset::GaussianWell { amplitude: 2.0, width: 0.5, floor: -0.2 },
        &g,
    )
    .unwrap();
    let op = PauliOperator::assemble(&g, VectorField::zeros(&g), v, h).unwrap();
    let r = negative_spectrum(&op, h, 0.0, &Solver::Dense).unwrap();
    assert!(r.eigenvalues.len() % 2 == 0, "spin pairs must not split");
    for pair in r.eigenvalues.chunks(2) {
        assert!((pair[0] - pair[1]).abs() < 1e-8, "{} vs {}", pair[0], pair[1]);
    }
}

#[test]
fn deeper_well_lowers_every_level() {
    let g = Grid::new([4, 4, 4], [2.4; 3]).unwrap();
    let h = 0.8;
    let mut spectra = Vec::new();
    for amplitude in [2.0, 3.0] {
        let v = sample_potential(
            &Preset::GaussianWell { amplitude, width: 0.5, floor: -0.2 },
            &g,
        )
        .unwrap();
        let op = PauliOperator::assemble(&g, VectorField::zeros(&g), v, h).unwrap();
        // τ high enough that both lists cover a shared index range
        spectra.push(negative_spectrum(&op, h, 2.0, &Solver::Dense).unwrap());
    }
    let shallow = &spectra[0].eigenvalues;
    let deep = &spectra[1].eigenvalues;
    for n in 0..shallow.len().min(deep.len()) {
        assert!(deep[n] <= shallow[n] + 1e-10, "level {n}: {} vs {}", deep[n], shallow[n]);
    }
}

#[test]
fn threshold_ambiguity_reported() {
    // tune V₀ so the |k| = π shell lands 5·10⁻⁷ below zero
    let g = Grid::new([4, 4, 4], [2.0; 3]).unwrap();
    let h = 0.8;
    let v0 = h * h * PI * PI + 5e-7;
    let op = assemble_free(&g, v0, h);
    let r = negative_spectrum(&op, h, 0.0, &Solver::Dense).unwrap();

    // 24 lattice modes on the shell, doubled per spin
    assert_eq!(r.ambiguous.len(), 48, "ambiguous set: {:?}", r.ambiguous.len());
    let span = r.trace_minus_span().unwrap();
    assert_eq!(span.n_ambiguous, 48);
    // strictly negative ambiguous levels: value includes them
    assert!((span.value - span.inclusion).abs() < 1e-12);
    // exclusion drops 48 levels of size −5·10⁻⁷
    assert!(
        ((span.value - span.exclusion) - (-48.0 * 5e-7)).abs() < 1e-8,
        "span {:?}",
        span
    );
}

#[test]
fn trace_gauge_invariance_dense() {
    // χ = a single resolved Fourier mode. Its spinor phase factor e^{iχ/h}
    // carries a Bessel tail beyond the resolved band, so the two discrete
    // traces agree only up to that aliasing floor; it scales as amplitude²
    // and at amplitude 0.005 sits ≈ 4× below the 10⁻⁶ relative budget
    // (measured 2.3·10⁻⁷ on this grid).
    let g = Grid::new([8, 8, 8], [2.0 * PI; 3]).unwrap();
    let h = 1.0;
    let amp = 0.005;
    let v = sample_potential(&Preset::default_well(), &g).unwrap();
    let a = VectorField::from_fn(&g, |p| [0.2 * p[1].sin(), 0.15 * p[2].cos(), 0.0]);
    let chi = ScalarField::from_fn(&g, |p| amp * p[0].sin());
    let t = gauge_transform(&a, &chi, h).unwrap();

    let op1 = PauliOperator::assemble(&g, a.clone(), v.clone(), h).unwrap();
    let op2 = PauliOperator::assemble(&g, t.a_prime().clone(), v.clone(), h).unwrap();
    let r1 = negative_spectrum(&op1, h, 0.0, &Solver::Dense).unwrap();
    let r2 = negative_spectrum(&op2, h, 0.0, &Solver::Dense).unwrap();
    let (t1, t2) = (r1.trace_minus().unwrap(), r2.trace_minus().unwrap());
    let budget = 1e-6 * t1.abs().max(1.0);
    assert!(t1 < 0.0, "expected a nonempty negative spectrum, got {t1}");
    assert!(
        (t1 - t2).abs() <= budget,
        "gauge shift moved the trace: {t1} vs {t2}"
    );

    // teeth: a non-gradient shift of the same sup-norm moves the trace far
    // beyond the budget, so the agreement above is not vacuously loose
    let w = VectorField::from_fn(&g, |p| [amp * p[1].sin(), 0.0, 0.0]);
    let ac = a.axpy(1.0, &w).unwrap();
    let op3 = PauliOperator::assemble(&g, ac, v, h).unwrap();
    let r3 = negative_spectrum(&op3, h, 0.0, &Solver::Dense).unwrap();
    let t3 = r3.trace_minus().unwrap();
    assert!(
        (t1 - t3).abs() >= 10.0 * budget,
        "control shift barely moved the trace ({t1} vs {t3}); the gauge assertion would be vacuous"
    );
}

#[test]
fn diag_density_sup_bound_across_h() {
    // h³·sup e(x,x,0) stays within a modest band as h shrinks
    let g = Grid::new([12, 12, 12], [2.0 * PI; 3]).unwrap();
    let v = sample_potential(&Preset::default_well(), &g).unwrap();
    let mut scaled_sups = Vec::new();
    for h in [1.0, 0.8, 0.67] {
        let op = PauliOperator::assemble(&g, VectorField::zeros(&g), v.clone(), h).unwrap();
        let r = negative_spectrum(
            &op,
            h,
            0.0,
            &Solver::Iterative(IterativeParams::default()),
        )
        .unwrap();
        assert!(r.complete, "h = {h}");
        let d = r.diag_density(0.0).unwrap();
        scaled_sups.push(h.powi(3) * d.max());
    }
    let hi = scaled_sups.iter().cloned().fold(f64::MIN, f64::max);
    let lo = scaled_sups.iter().cloned().fold(f64::MAX, f64::min);
    assert!(lo > 0.0);
    assert!(
        hi / lo <= 3.0,
        "h³·sup density drifted: {scaled_sups:?} (ratio {})",
        hi / lo
    );
}

#[test]
fn save_load_roundtrip() {
    let g = Grid::new([4, 4, 4], [2.4; 3]).unwrap();
    let h = 0.8;
    let v = sample_potential(
        &Preset::GaussianWell { amplitude: 2.0, width: 0.5, floor: -0.2 },
        &g,
    )
    .unwrap();
    let op = PauliOperator::assemble(&g, VectorField::zeros(&g), v, h).unwrap();
    let r = negative_spectrum(&op, h, 0.0, &Solver::Dense).unwrap();

    let dir = tempfile::tempdir().unwrap();
    r.save(dir.path(), "spec").unwrap();
    let back = SpectralResult::load(dir.path(), "spec").unwrap();
    assert_eq!(back.eigenvalues, r.eigenvalues);
    assert_eq!(back.residuals, r.residuals);
    assert_eq!(back.grid, r.grid);
    assert_eq!(back.complete, r.complete);
    for (a, b) in back.eigenfunctions.iter().zip(&r.eigenfunctions) {
        for s in 0..2 {
            for (x, y) in a.component(s).iter().zip(b.component(s)) {
                assert_eq!(x, y);
            }
        }
    }
}

#[test]
fn phase_convention_is_deterministic() {
    let g = Grid::new([4, 4, 4], [2.0; 3]).unwrap();
    let mut u = SpinorField::random(&g, 42);
    fix_phase(&mut u);
    // leading significant entry is real positive
    let lead = u
        .component(0)
        .iter()
        .chain(u.component(1))
        .find(|z| z.norm() > 1e-8)
        .unwrap();
    assert!(lead.im.abs() < 1e-12 && lead.re > 0.0);
    // applying twice is idempotent
    let before: Vec<Complex64> = u.component(0).to_vec();
    fix_phase(&mut u);
    assert_eq!(before, u.component(0).to_vec());
}
