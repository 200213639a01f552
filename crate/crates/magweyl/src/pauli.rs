//! The discrete Pauli operator H = ((hD − A)·σ)² − V on spinor fields.
//!
//! D = −i∂ acts spectrally, A multiplies pointwise, and σ = (σ₁,σ₂,σ₃) are
//! the Pauli matrices. Squaring the Dirac-type factor gives the identity
//!
//! ```text
//! ((hD − A)·σ)² = (hD − A)² − h σ·B,   B = ∇×A,
//! ```
//!
//! with the minus sign fixed by [P_j, P_k] = ih(∂_jA_k − ∂_kA_j) and
//! σ₁σ₂ = iσ₃ (cyclic). Assembly cross-checks the two forms on random
//! spinors, together with Hermiticity and the lower bound
//! ⟨Hu,u⟩ ≥ −max V ‖u‖², before handing the operator out.
//!
//! The semiclassical parameter is restricted to scales the grid resolves:
//! h ≥ 4·spacing/π, i.e. at least four grid points per wavelength at the
//! spectral cutoff. Everything downstream (eigensolves, traces, energies)
//! inherits spectral accuracy only inside that regime.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::Fft3;
use crate::field::{ScalarField, SpinorField, VectorField};
use crate::grid::Grid;
use crate::ops;

/// The 2×2 Pauli matrices as constants (row-major).
#[derive(Clone, Debug)]
pub struct PauliMatrices {
    pub sigma: [[[Complex64; 2]; 2]; 3],
}

impl PauliMatrices {
    pub fn standard() -> Self {
        let o = Complex64::new(0.0, 0.0);
        let l = Complex64::new(1.0, 0.0);
        let i = Complex64::new(0.0, 1.0);
        PauliMatrices {
            sigma: [
                [[o, l], [l, o]],
                [[o, -i], [i, o]],
                [[l, o], [o, -l]],
            ],
        }
    }
}

/// Anything that applies a Hermitian operator to spinor fields. Spectral
/// solvers are written against this so localized pieces ψHψ and sums of
/// pieces reuse the same machinery as H itself.
pub trait ApplyOp: Sync {
    fn grid(&self) -> &Grid;
    /// Apply the operator; panics on grid mismatch (programmer error).
    fn apply(&self, u: &SpinorField) -> SpinorField;
    /// A certified lower bound on the spectrum, when one is known; solvers
    /// assert every computed eigenvalue respects it.
    fn lower_bound_hint(&self) -> Option<f64> {
        None
    }
}

pub struct PauliOperator {
    grid: Grid,
    h: f64,
    a: VectorField,
    v: ScalarField,
    b: VectorField,
    fft: Fft3,
    /// per-axis multiplier tables for h·D (real h·k as complex entries)
    hk: [Vec<Complex64>; 3],
}

/// Smallest h the grid resolves: four points per wavelength at the cutoff.
pub fn min_resolved_h(grid: &Grid) -> f64 {
    4.0 * grid.max_spacing() / std::f64::consts::PI
}

impl PauliOperator {
    /// Build H on `grid` from the magnetic potential `a`, electric potential
    /// `v`, and semiclassical parameter `h ∈ (0,1]`, then self-check
    /// Hermiticity, the two-form identity, and the −max V lower bound on
    /// seeded random spinors.
    pub fn assemble(grid: &Grid, a: VectorField, v: ScalarField, h: f64) -> Result<Self> {
        grid.expect_same(a.grid())?;
        grid.expect_same(v.grid())?;
        if !(h > 0.0 && h <= 1.0) || !h.is_finite() {
            return Err(Error::Domain(format!(
                "semiclassical parameter must lie in (0, 1], got {h}"
            )));
        }
        let required = min_resolved_h(grid);
        if h < required - 1e-12 {
            return Err(Error::UnresolvedScale { h, required });
        }

        let b = ops::curl(&a);
        let fft = Fft3::new(grid);
        let hk = std::array::from_fn(|axis| {
            grid.wavenumbers(axis)
                .into_iter()
                .map(|k| Complex64::new(h * k, 0.0))
                .collect()
        });

        let op = PauliOperator { grid: grid.clone(), h, a, v, b, fft, hk };
        op.self_check()?;
        Ok(op)
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn potential(&self) -> &ScalarField {
        &self.v
    }

    pub fn vector_potential(&self) -> &VectorField {
        &self.a
    }

    /// Cached B = ∇×A.
    pub fn magnetic_field(&self) -> &VectorField {
        &self.b
    }

    /// (hD_axis − A_axis) u on one spin component.
    fn covariant_component(&self, axis: usize, comp: &[Complex64]) -> Vec<Complex64> {
        let mut w = comp.to_vec();
        self.fft.axis_multiplier(&mut w, axis, &self.hk[axis]);
        let av = self.a.component(axis);
        for (i, wi) in w.iter_mut().enumerate() {
            *wi -= av[i] * comp[i];
        }
        w
    }

    /// (hD_axis − A_axis) u, both spin components.
    pub fn covariant(&self, axis: usize, u: &SpinorField) -> SpinorField {
        assert!(axis < 3, "axis out of range");
        self.grid.expect_same(u.grid()).expect("covariant: grid mismatch");
        let comps = [
            self.covariant_component(axis, u.component(0)),
            self.covariant_component(axis, u.component(1)),
        ];
        SpinorField::from_components(&self.grid, comps).expect("covariant: length")
    }

    /// σ·((hD − A)u): the Dirac-type first-order factor.
    fn sigma_p(&self, u: &SpinorField) -> SpinorField {
        let n = self.grid.n_sites();
        let w: [[Vec<Complex64>; 2]; 3] = std::array::from_fn(|axis| {
            [
                self.covariant_component(axis, u.component(0)),
                self.covariant_component(axis, u.component(1)),
            ]
        });
        let i = Complex64::new(0.0, 1.0);
        let mut out0 = Vec::with_capacity(n);
        let mut out1 = Vec::with_capacity(n);
        for s in 0..n {
            out0.push(w[0][1][s] - i * w[1][1][s] + w[2][0][s]);
            out1.push(w[0][0][s] + i * w[1][0][s] - w[2][1][s]);
        }
        SpinorField::from_components(&self.grid, [out0, out1]).expect("sigma_p: length")
    }

    /// Hu = (σ·(hD−A))² u − V u.
    pub fn apply(&self, u: &SpinorField) -> SpinorField {
        self.grid.expect_same(u.grid()).expect("apply: grid mismatch");
        let mut out = self.sigma_p(&self.sigma_p(u));
        let vv = self.v.values();
        for s in 0..2 {
            let uc = u.component(s).to_vec();
            let oc = out.component_mut(s);
            for i in 0..uc.len() {
                oc[i] -= vv[i] * uc[i];
            }
        }
        out
    }

    /// The expanded form (hD−A)²u − Vu − h(σ·B)u; agrees with `apply` to
    /// spectral accuracy and guards the commutator sign.
    pub fn second_form(&self, u: &SpinorField) -> SpinorField {
        self.grid.expect_same(u.grid()).expect("second_form: grid mismatch");
        let n = self.grid.n_sites();
        let mut comps: [Vec<Complex64>; 2] =
            [vec![Complex64::default(); n], vec![Complex64::default(); n]];
        // scalar part (hD−A)² − V, diagonal in spin
        for s in 0..2 {
            for axis in 0..3 {
                let w = self.covariant_component(axis, u.component(s));
                let w2 = self.covariant_component(axis, &w);
                for i in 0..n {
                    comps[s][i] += w2[i];
                }
            }
            let vv = self.v.values();
            let uc = u.component(s);
            for i in 0..n {
                comps[s][i] -= vv[i] * uc[i];
            }
        }
        // Zeeman term −h σ·B
        let i1 = Complex64::new(0.0, 1.0);
        let (b1, b2, b3) = (self.b.component(0), self.b.component(1), self.b.component(2));
        let (u0, u1) = (u.component(0), u.component(1));
        for i in 0..n {
            let sb0 = b1[i] * u1[i] - i1 * b2[i] * u1[i] + b3[i] * u0[i];
            let sb1 = b1[i] * u0[i] + i1 * b2[i] * u0[i] - b3[i] * u1[i];
            comps[0][i] -= self.h * sb0;
            comps[1][i] -= self.h * sb1;
        }
        SpinorField::from_components(&self.grid, comps).expect("second_form: length")
    }

    fn self_check(&self) -> Result<()> {
        let u = SpinorField::random(&self.grid, 0xA55E_55ED);
        let v = SpinorField::random(&self.grid, 0x5EED_CAFE);
        let hu = self.apply(&u);
        let hv = self.apply(&v);

        let lhs = hu.inner(&v)?;
        let rhs = u.inner(&hv)?;
        let scale = (hu.norm() * v.norm()).max(u.norm() * hv.norm()).max(1.0);
        if (lhs - rhs).norm() > 1e-10 * scale {
            return Err(Error::SolveFailed(format!(
                "assembled operator failed Hermiticity self-check: ⟨Hu,v⟩={lhs}, ⟨u,Hv⟩={rhs}"
            )));
        }

        // the commutator identity behind the expanded form is unaliased only
        // on band-limited fields, so probe it with a smooth random spinor
        let us = SpinorField::random_smooth(&self.grid, 0xBA2D_11E8);
        let hus = self.apply(&us);
        let alt = self.second_form(&us);
        let mut diff2 = 0.0;
        for s in 0..2 {
            for (x, y) in hus.component(s).iter().zip(alt.component(s)) {
                diff2 += (x - y).norm_sqr();
            }
        }
        let diff = diff2.sqrt() * self.grid.cell_volume().sqrt();
        if diff > 1e-8 * hus.norm().max(1.0) {
            return Err(Error::SolveFailed(format!(
                "factored and expanded Pauli forms disagree (‖Δ‖ = {diff:.3e}); \
                 the vector potential is likely unresolved on this grid"
            )));
        }

        for (probe, hprobe) in [(&u, &hu), (&us, &hus)] {
            let ray = hprobe.inner(probe)?.re / (probe.norm() * probe.norm());
            let floor = -self.v.max();
            if ray < floor - 1e-9 * ray.abs().max(floor.abs()).max(1.0) {
                return Err(Error::SolveFailed(format!(
                    "Rayleigh quotient {ray} fell below the −max V bound {floor}"
                )));
            }
        }
        Ok(())
    }
}

impl ApplyOp for PauliOperator {
    fn grid(&self) -> &Grid {
        &self.grid
    }

    fn apply(&self, u: &SpinorField) -> SpinorField {
        PauliOperator::apply(self, u)
    }

    fn lower_bound_hint(&self) -> Option<f64> {
        // ⟨Hu,u⟩ = ‖σ·(hD−A)u‖² − ⟨Vu,u⟩ ≥ −max V ‖u‖²
        Some(-self.v.max())
    }
}

/// Standalone (hD_axis − A_axis)u without assembling a full operator.
pub fn covariant_derivative(
    a: &VectorField,
    axis: usize,
    h: f64,
    u: &SpinorField,
) -> Result<SpinorField> {
    if axis >= 3 {
        return Err(Error::Domain(format!("axis must be 0, 1, or 2, got {axis}")));
    }
    a.grid().expect_same(u.grid())?;
    let grid = a.grid();
    let fft = Fft3::new(grid);
    let hk: Vec<Complex64> = grid
        .wavenumbers(axis)
        .into_iter()
        .map(|k| Complex64::new(h * k, 0.0))
        .collect();
    let av = a.component(axis);
    let mut comps: [Vec<Complex64>; 2] = [Vec::new(), Vec::new()];
    for s in 0..2 {
        let mut w = u.component(s).to_vec();
        fft.axis_multiplier(&mut w, axis, &hk);
        for (i, wi) in w.iter_mut().enumerate() {
            *wi -= av[i] * u.component(s)[i];
        }
        comps[s] = w;
    }
    SpinorField::from_components(grid, comps)
}

// ---------------------------------------------------------------- gauge --

/// A gauge change A ↦ A + ∇χ together with its unitary action e^{iχ/h}
/// on spinors, which intertwines the two Pauli operators.
pub struct GaugeTransform {
    a_prime: VectorField,
    phase: Vec<Complex64>,
}

/// Fraction of the phase factor's spectral energy allowed above the
/// two-thirds-of-Nyquist shell before the transform is rejected as aliased.
pub const GAUGE_ALIAS_LIMIT: f64 = 1e-6;

pub fn gauge_transform(a: &VectorField, chi: &ScalarField, h: f64) -> Result<GaugeTransform> {
    a.grid().expect_same(chi.grid())?;
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::Domain(format!("gauge transform needs h > 0, got {h}")));
    }
    let grid = a.grid();
    let phase: Vec<Complex64> = chi
        .values()
        .iter()
        .map(|&c| Complex64::from_polar(1.0, c / h))
        .collect();

    // aliasing guard: e^{iχ/h} must be spectrally concentrated below the
    // two-thirds-of-Nyquist shell or products with it are unreliable
    let fft = Fft3::new(grid);
    let mut hat = phase.clone();
    fft.forward(&mut hat);
    let dims = grid.dims();
    let mut total = 0.0;
    let mut high = 0.0;
    for (flat, z) in hat.iter().enumerate() {
        let m = grid.site_coords(flat);
        let e = z.norm_sqr();
        total += e;
        let aliased = (0..3).any(|axis| {
            let n = dims[axis] as isize;
            let mi = m[axis] as isize;
            let s = if 2 * mi <= n { mi } else { mi - n };
            // two-thirds of the Nyquist index n/2, as integers: |s|·3 > n
            s.abs() * 3 > n
        });
        if aliased {
            high += e;
        }
    }
    let fraction = if total > 0.0 { high / total } else { 0.0 };
    if fraction > GAUGE_ALIAS_LIMIT {
        return Err(Error::GaugeAliasing { fraction, limit: GAUGE_ALIAS_LIMIT });
    }

    let a_prime = a.axpy(1.0, &ops::gradient(chi))?;
    Ok(GaugeTransform { a_prime, phase })
}

impl GaugeTransform {
    pub fn a_prime(&self) -> &VectorField {
        &self.a_prime
    }

    /// u ↦ e^{iχ/h} u.
    pub fn apply_to(&self, u: &SpinorField) -> Result<SpinorField> {
        let mut comps: [Vec<Complex64>; 2] = [Vec::new(), Vec::new()];
        for s in 0..2 {
            comps[s] = u
                .component(s)
                .iter()
                .zip(&self.phase)
                .map(|(z, p)| z * p)
                .collect();
        }
        SpinorField::from_components(u.grid(), comps)
    }

    /// u ↦ e^{−iχ/h} u.
    pub fn invert_on(&self, u: &SpinorField) -> Result<SpinorField> {
        let mut comps: [Vec<Complex64>; 2] = [Vec::new(), Vec::new()];
        for s in 0..2 {
            comps[s] = u
                .component(s)
                .iter()
                .zip(&self.phase)
                .map(|(z, p)| z * p.conj())
                .collect();
        }
        SpinorField::from_components(u.grid(), comps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{sample_potential, Preset};
    use std::f64::consts::PI;

    fn grid8() -> Grid {
        Grid::new([8, 8, 8], [2.0 * PI; 3]).unwrap()
    }

    fn plane_wave(grid: &Grid, xi: [f64; 3], spin: [Complex64; 2]) -> SpinorField {
        SpinorField::from_fn(grid, |p| {
            let ph = Complex64::from_polar(1.0, xi[0] * p[0] + xi[1] * p[1] + xi[2] * p[2]);
            [ph * spin[0], ph * spin[1]]
        })
    }

    fn spinor_dist(u: &SpinorField, v: &SpinorField) -> f64 {
        let mut d2 = 0.0;
        for s in 0..2 {
            for (x, y) in u.component(s).iter().zip(v.component(s)) {
                d2 += (x - y).norm_sqr();
            }
        }
        (d2 * u.grid().cell_volume()).sqrt()
    }

    #[test]
    fn pauli_matrix_algebra() {
        let m = PauliMatrices::standard();
        let mul = |a: &[[Complex64; 2]; 2], b: &[[Complex64; 2]; 2]| {
            let mut c = [[Complex64::default(); 2]; 2];
            for i in 0..2 {
                for j in 0..2 {
                    for k in 0..2 {
                        c[i][j] += a[i][k] * b[k][j];
                    }
                }
            }
            c
        };
        for j in 0..3 {
            let s = &m.sigma[j];
            // Hermitian, traceless
            assert_eq!(s[0][1], s[1][0].conj());
            assert_eq!(s[0][0].im, 0.0);
            assert_eq!(s[0][0] + s[1][1], Complex64::default());
            for k in 0..3 {
                let anti = mul(s, &m.sigma[k]);
                let anti2 = mul(&m.sigma[k], s);
                let expect = if j == k { 2.0 } else { 0.0 };
                for i in 0..2 {
                    for l in 0..2 {
                        let val = anti[i][l] + anti2[i][l];
                        let want = if i == l { expect } else { 0.0 };
                        assert!((val - want).norm() < 1e-15);
                    }
                }
            }
        }
    }

    #[test]
    fn covariant_on_plane_waves() {
        let g = grid8();
        let xi = [1.0, 2.0, 3.0];
        let spin = [Complex64::new(0.6, 0.1), Complex64::new(-0.3, 0.7)];
        let u = plane_wave(&g, xi, spin);
        let h = 1.0;

        let a0 = VectorField::zeros(&g);
        for axis in 0..3 {
            let w = covariant_derivative(&a0, axis, h, &u).unwrap();
            let expect = |z: Complex64| z * (h * xi[axis]);
            for s in 0..2 {
                for (got, orig) in w.component(s).iter().zip(u.component(s)) {
                    assert!((got - expect(*orig)).norm() < 1e-10);
                }
            }
        }

        // constant shift along axis 1
        let c = 0.37;
        let ac = VectorField::from_fn(&g, |_| [0.0, c, 0.0]);
        let w = covariant_derivative(&ac, 1, h, &u).unwrap();
        for s in 0..2 {
            for (got, orig) in w.component(s).iter().zip(u.component(s)) {
                assert!((got - *orig * (h * xi[1] - c)).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn covariant_linearity() {
        let g = grid8();
        let a = VectorField::from_fn(&g, |p| [0.2 * p[1].sin(), 0.0, 0.1 * p[0].cos()]);
        let u = SpinorField::random(&g, 11);
        let v = SpinorField::random(&g, 12);
        let alpha = Complex64::new(0.3, -1.1);
        let sum = u.axpy(alpha, &v).unwrap();
        for axis in 0..3 {
            let lhs = covariant_derivative(&a, axis, 0.9, &sum).unwrap();
            let du = covariant_derivative(&a, axis, 0.9, &u).unwrap();
            let dv = covariant_derivative(&a, axis, 0.9, &v).unwrap();
            let rhs = du.axpy(alpha, &dv).unwrap();
            assert!(spinor_dist(&lhs, &rhs) < 1e-12 * lhs.norm().max(1.0));
        }
    }

    #[test]
    fn free_symbol_on_plane_wave() {
        let g = grid8();
        let h = 1.0;
        let xi = [2.0, -1.0, 3.0];
        let u = plane_wave(&g, xi, [Complex64::new(1.0, 0.0), Complex64::new(0.2, -0.4)]);
        let op = PauliOperator::assemble(
            &g,
            VectorField::zeros(&g),
            ScalarField::zeros(&g),
            h,
        )
        .unwrap();
        let hu = op.apply(&u);
        let lam = h * h * (xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]);
        let expected = u.scale(Complex64::new(lam, 0.0));
        assert!(spinor_dist(&hu, &expected) < 1e-9 * lam.max(1.0));
    }

    #[test]
    fn assembly_self_checks_with_field() {
        let g = grid8();
        let v = sample_potential(&Preset::default_well(), &g).unwrap();
        let a = VectorField::from_fn(&g, |p| {
            [0.3 * p[1].sin(), 0.2 * p[2].sin(), 0.25 * p[0].cos()]
        });
        let op = PauliOperator::assemble(&g, a, v, 1.0).unwrap();

        // independent Hermiticity probe beyond the assembly's own seeds
        let u = SpinorField::random(&g, 101);
        let w = SpinorField::random(&g, 202);
        let lhs = op.apply(&u).inner(&w).unwrap();
        let rhs = u.inner(&op.apply(&w)).unwrap();
        assert!((lhs - rhs).norm() < 1e-10 * lhs.norm().max(1.0));
    }

    #[test]
    fn two_forms_agree_with_nontrivial_field() {
        let g = grid8();
        let a = VectorField::from_fn(&g, |p| {
            [0.4 * (p[1] + p[2]).sin(), 0.3 * p[0].sin(), 0.2 * (p[0] - p[1]).cos()]
        });
        let op =
            PauliOperator::assemble(&g, a, ScalarField::constant(&g, 0.5), 1.0).unwrap();
        let u = SpinorField::random_smooth(&g, 77);
        let d = spinor_dist(&op.apply(&u), &op.second_form(&u));
        assert!(d < 1e-8 * op.apply(&u).norm().max(1.0), "forms differ by {d}");
    }

    #[test]
    fn zero_field_decouples_spins() {
        let g = grid8();
        let v = sample_potential(&Preset::default_well(), &g).unwrap();
        let op = PauliOperator::assemble(&g, VectorField::zeros(&g), v, 1.0).unwrap();
        let mut u = SpinorField::zeros(&g);
        *u.component_mut(0) = SpinorField::random(&g, 5).component(0).to_vec();
        let hu = op.apply(&u);
        let leak: f64 = hu.component(1).iter().map(|z| z.norm_sqr()).sum();
        assert!(leak.sqrt() < 1e-12);
    }

    #[test]
    fn unresolved_h_rejected() {
        let g = grid8(); // spacing π/4 → min h = 1
        let r = PauliOperator::assemble(
            &g,
            VectorField::zeros(&g),
            ScalarField::zeros(&g),
            0.5,
        );
        match r {
            Err(Error::UnresolvedScale { required, .. }) => {
                assert!((required - 1.0).abs() < 1e-12);
            }
            other => panic!("expected UnresolvedScale, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn gauge_constant_chi_is_identity() {
        let g = grid8();
        let a = VectorField::from_fn(&g, |p| [p[0].sin(), 0.0, p[1].cos()]);
        let t = gauge_transform(&a, &ScalarField::constant(&g, 1.7), 1.0).unwrap();
        for axis in 0..3 {
            for (x, y) in t.a_prime().component(axis).iter().zip(a.component(axis)) {
                assert!((x - y).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn gauge_intertwines_operators() {
        let g = Grid::new([16, 16, 16], [2.0 * PI; 3]).unwrap();
        let h = 0.7;
        let v = sample_potential(&Preset::default_well(), &g).unwrap();
        let a = VectorField::from_fn(&g, |p| [0.2 * p[1].sin(), 0.1 * p[2].cos(), 0.0]);
        let chi = ScalarField::from_fn(&g, |p| 0.3 * p[0].sin());

        let t = gauge_transform(&a, &chi, h).unwrap();
        let op = PauliOperator::assemble(&g, a.clone(), v.clone(), h).unwrap();
        let op2 = PauliOperator::assemble(&g, t.a_prime().clone(), v, h).unwrap();

        // smooth, spectrally concentrated test spinor
        let u = SpinorField::from_fn(&g, |p| {
            let f = Complex64::new((p[0].sin() + 0.5 * p[1].cos()) * p[2].sin(), 0.3);
            [f, f * Complex64::new(0.0, 0.5)]
        });
        let lhs = op2.apply(&t.apply_to(&u).unwrap());
        let rhs = t.apply_to(&op.apply(&u)).unwrap();
        let scale = rhs.norm().max(1.0);
        assert!(
            spinor_dist(&lhs, &rhs) < 1e-6 * scale,
            "intertwining error {}",
            spinor_dist(&lhs, &rhs) / scale
        );
    }

    #[test]
    fn gauge_aliasing_guard_fires() {
        let g = grid8();
        let a = VectorField::zeros(&g);
        // high harmonic content: e^{i·1.5·sin(3x)} spills past two-thirds Nyquist
        let chi = ScalarField::from_fn(&g, |p| 1.5 * (3.0 * p[0]).sin());
        match gauge_transform(&a, &chi, 1.0) {
            Err(Error::GaugeAliasing { fraction, .. }) => assert!(fraction > 1e-3),
            other => panic!("expected GaugeAliasing, got {:?}", other.map(|_| ())),
        }
    }
}
