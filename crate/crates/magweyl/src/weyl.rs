//! Phase-space (semiclassical) expressions for the negative spectrum.
//!
//! For the scalar symbol `|ξ|² − V(x)` on a periodic box, the leading
//! semiclassical count of eigenvalues below `−τ` is
//!
//! ```text
//!     weyl_tau(V, h, τ) = (1/3π²) h⁻³ ∫ (V+τ)₊^{3/2} dx
//! ```
//!
//! and the leading value of the negative-eigenvalue sum is `−weyl1` with
//!
//! ```text
//!     weyl1(V, h) = (2/15π²) h⁻³ ∫ V₊^{5/2} dx = ∫₋∞⁰ weyl_tau(V, h, τ) dτ.
//! ```
//!
//! The τ-integral identity is checked numerically by [`tau_quadrature`] —
//! its defect against the closed form is the report's quadrature error
//! estimate. A gradient correction of one order higher in `h` adds
//!
//! ```text
//!     h⁻¹ [ ϰ₁ ∫ V₊^{3/2} ΔV + ϰ₂ ∫ V₊^{1/2} |∇V|² ] dx,
//! ```
//!
//! and whenever `V₊` vanishes smoothly in the interior of the box,
//! integration by parts collapses the two constants into the single
//! combination `ϰ = ϰ₁ − (2/3)ϰ₂` against `∫V₊^{3/2}ΔV`; both evaluations
//! are returned so the collapse can be audited. The numerical values of
//! ϰ₁, ϰ₂ are configuration inputs (default 0), never asserted — they are
//! meant to be fitted empirically from field-free sweeps.
//!
//! [`weyl_alpha_beta`] evaluates the matrix-valued phase-space moments of
//! the magnetic symbol `((ξ−A(x))·σ)² − V(x)`: the normalized integral of
//! `((ξ−A(x))·σ)ⁿ` over the classically allowed ball
//! `{ξ : |ξ−A(x)|² ≤ V(x)+τ}`. The normalization is the standard
//! phase-space measure `(2πh)⁻³`, fixed so that the n = 0 moment's spin
//! trace reproduces the `weyl_tau` integrand.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::ops;

/// Coefficient of the eigenvalue-count expression, `1/3π²`.
pub const COUNT_COEFF: f64 = 1.0 / (3.0 * PI * PI);

/// Coefficient of the negative-sum expression, `2/15π²`.
pub const SUM_COEFF: f64 = 2.0 / (15.0 * PI * PI);

fn check_h(h: f64) -> Result<()> {
    if h > 0.0 && h.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "semiclassical parameter h must be positive and finite, got {h}"
        )))
    }
}

/// Local integrand of the semiclassical count: `(1/3π²) h⁻³ (V+τ)₊^{3/2}`.
pub fn weyl_tau_local(v: &ScalarField, h: f64, tau: f64) -> Result<ScalarField> {
    check_h(h)?;
    let scale = COUNT_COEFF * h.powi(-3);
    Ok(v.map(|x| scale * (x + tau).max(0.0).powf(1.5)))
}

/// Semiclassical count of eigenvalues below `−τ`:
/// `(1/3π²) h⁻³ ∫ (V+τ)₊^{3/2} dx`. Nonnegative, nondecreasing in τ.
pub fn weyl_tau(v: &ScalarField, h: f64, tau: f64) -> Result<f64> {
    Ok(weyl_tau_local(v, h, tau)?.integrate())
}

/// Local integrand of the leading negative-sum expression:
/// `(2/15π²) h⁻³ V₊^{5/2}`.
pub fn weyl1_local(v: &ScalarField, h: f64) -> Result<ScalarField> {
    check_h(h)?;
    let scale = SUM_COEFF * h.powi(-3);
    Ok(v.map(|x| scale * x.max(0.0).powf(2.5)))
}

/// Leading semiclassical value of the negative-eigenvalue sum, with the
/// sign convention `Tr⁻ ≈ −weyl1`; always ≥ 0. Computed as the integral of
/// [`weyl1_local`], so the local field integrates to this value exactly.
pub fn weyl1(v: &ScalarField, h: f64) -> Result<f64> {
    Ok(weyl1_local(v, h)?.integrate())
}

// ------------------------------------------------------------ correction --

/// Gradient-corrected negative-sum expression, with both equivalent forms.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct CorrectedWeyl {
    /// Two-constant form: `weyl1 + h⁻¹(ϰ₁·laplace_integral + ϰ₂·gradient_integral)`.
    pub value: f64,
    /// Integrated-by-parts form: `weyl1 + h⁻¹·ϰ·laplace_integral` with
    /// `ϰ = ϰ₁ − (2/3)ϰ₂`. Agrees with `value` to quadrature accuracy when
    /// `V₊` vanishes smoothly inside the box.
    pub ibp_value: f64,
    /// The collapsed constant `ϰ = ϰ₁ − (2/3)ϰ₂`.
    pub kappa: f64,
    /// `∫ V₊^{3/2} ΔV dx` (spectral Laplacian, site-sum quadrature).
    pub laplace_integral: f64,
    /// `∫ V₊^{1/2} |∇V|² dx` (spectral gradient, site-sum quadrature).
    pub gradient_integral: f64,
}

/// Evaluate the gradient-corrected expression
/// `weyl1 + h⁻¹[ϰ₁∫V₊^{3/2}ΔV + ϰ₂∫V₊^{1/2}|∇V|²]` together with its
/// integrated-by-parts twin (see [`CorrectedWeyl`]). With ϰ₁ = ϰ₂ = 0 both
/// forms reduce to `weyl1`; for constant V both correction integrals vanish.
pub fn weyl_corrected(v: &ScalarField, h: f64, kappa1: f64, kappa2: f64) -> Result<CorrectedWeyl> {
    check_h(h)?;
    let w1 = weyl1(v, h)?;
    let lap = ops::laplacian(v);
    let grad = ops::gradient(v);
    let cell = v.grid().cell_volume();

    let mut laplace_integral = 0.0;
    let mut gradient_integral = 0.0;
    for (i, &x) in v.values().iter().enumerate() {
        let vp = x.max(0.0);
        if vp > 0.0 {
            laplace_integral += vp.powf(1.5) * lap.values()[i];
            let g = grad.at(i);
            gradient_integral += vp.sqrt() * (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]);
        }
    }
    laplace_integral *= cell;
    gradient_integral *= cell;

    let kappa = kappa1 - 2.0 / 3.0 * kappa2;
    Ok(CorrectedWeyl {
        value: w1 + (kappa1 * laplace_integral + kappa2 * gradient_integral) / h,
        ibp_value: w1 + kappa * laplace_integral / h,
        kappa,
        laplace_integral,
        gradient_integral,
    })
}

// ------------------------------------------------------- τ-quadrature -----

/// Adaptive Simpson quadrature with Richardson acceptance; `tol` is the
/// absolute error target. The integrand here is piecewise `C²` in τ (each
/// site contributes a `(V+τ)₊^{3/2}` kink at its own `τ = −V`), which plain
/// fixed-order rules handle poorly but interval splitting resolves.
fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn rec(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
                + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    rec(f, a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), tol, 40)
}

/// Evaluate `∫₋∞⁰ weyl_tau(V, h, τ) dτ` by adaptive quadrature (the
/// integrand vanishes identically for `τ ≤ −max V₊`, so the integral runs
/// over `[−max V₊, 0]`). Exactly equal to [`weyl1`] in the continuum; the
/// numerical defect between the two serves as the quadrature error
/// estimate of a [`WeylReport`]. `rel_tol` is relative to the closed-form
/// value.
pub fn tau_quadrature(v: &ScalarField, h: f64, rel_tol: f64) -> Result<f64> {
    check_h(h)?;
    let vmax = v.max();
    if vmax <= 0.0 {
        return Ok(0.0);
    }
    let scale = weyl1(v, h)?.max(f64::MIN_POSITIVE);
    let f = |tau: f64| -> f64 {
        weyl_tau(v, h, tau).expect("h already validated")
    };
    Ok(adaptive_simpson(&f, -vmax, 0.0, rel_tol.max(1e-14) * scale))
}

// ------------------------------------------------- matrix-valued moments --

/// A 2×2 complex spin matrix, row-major.
pub type SpinMatrix = [[Complex64; 2]; 2];

/// Normalized phase-space moment of the magnetic symbol at one grid site:
///
/// ```text
///     (2πh)⁻³ ∫_{|ξ−A(x)|² ≤ V(x)+τ} ((ξ−A(x))·σ)^{α+β} dξ
/// ```
///
/// for integer powers `α + β ≤ 2`. Radial symmetry reduces the integral in
/// closed form: the odd power vanishes by parity (zero matrix), and the
/// even powers are multiples of the identity because `(p·σ)² = |p|²·Id`.
/// After recentering `p = ξ − A(x)` the value is independent of `A`; the
/// field is still taken (and grid-checked) because it positions the ball
/// that sampling-based cross-checks integrate over. Empty ball
/// (`V(x)+τ ≤ 0`) gives the zero matrix.
pub fn weyl_alpha_beta(
    site: usize,
    a: &VectorField,
    v: &ScalarField,
    h: f64,
    alpha: u32,
    beta: u32,
    tau: f64,
) -> Result<SpinMatrix> {
    check_h(h)?;
    a.grid().expect_same(v.grid())?;
    if site >= v.grid().n_sites() {
        return Err(Error::Domain(format!(
            "site index {site} out of range (grid has {} sites)",
            v.grid().n_sites()
        )));
    }
    let n = alpha + beta;
    if n > 2 {
        return Err(Error::Domain(format!(
            "phase-space moment needs total power ≤ 2, got α+β = {n}"
        )));
    }

    let zero = [[Complex64::default(); 2]; 2];
    let r2 = v.values()[site] + tau;
    if r2 <= 0.0 || n == 1 {
        return Ok(zero);
    }
    let r = r2.sqrt();
    let norm = (2.0 * PI * h).powi(-3);
    // ∫_ball dp = (4π/3)r³ ;  ∫_ball |p|² dp = (4π/5)r⁵
    let coeff = match n {
        0 => norm * (4.0 * PI / 3.0) * r.powi(3),
        _ => norm * (4.0 * PI / 5.0) * r.powi(5),
    };
    let mut m = zero;
    m[0][0] = Complex64::new(coeff, 0.0);
    m[1][1] = Complex64::new(coeff, 0.0);
    Ok(m)
}

// ---------------------------------------------------------------- report --

/// Bundle of every phase-space expression at one `(V, h, τ)` with the
/// correction constants and a quadrature error estimate.
///
/// Serialized to JSON without the local field; `weyl1_local` is saved
/// separately in the binary fields format when needed on disk.
#[derive(Clone, Debug, Serialize)]
pub struct WeylReport {
    pub h: f64,
    pub tau: f64,
    /// Semiclassical count of eigenvalues below `−τ`.
    pub weyl_tau: f64,
    /// Leading negative-sum expression; equals `weyl1_local.integrate()`.
    pub weyl1: f64,
    /// Gradient-corrected value (two-constant form).
    pub corrected: f64,
    /// Integrated-by-parts corrected value (single collapsed constant).
    pub corrected_ibp: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    /// `ϰ = ϰ₁ − (2/3)ϰ₂`.
    pub kappa: f64,
    /// `|∫₋∞⁰ weyl_tau dτ − weyl1|`: defect of the τ-integral identity,
    /// an end-to-end error estimate for the quadratures involved.
    pub quad_error: f64,
    /// Pointwise integrand of `weyl1` (excluded from JSON).
    #[serde(skip_serializing)]
    pub weyl1_local: ScalarField,
}

/// Relative target for the report's τ-quadrature consistency check.
pub const TAU_QUADRATURE_REL_TOL: f64 = 1e-8;

/// Evaluate everything at once. The invariants `weyl1 = ∫weyl1_local` and
/// `ϰ = ϰ₁ − (2/3)ϰ₂` hold exactly by construction.
pub fn report(v: &ScalarField, h: f64, tau: f64, kappa1: f64, kappa2: f64) -> Result<WeylReport> {
    let local = weyl1_local(v, h)?;
    let w1 = local.integrate();
    let corrected = weyl_corrected(v, h, kappa1, kappa2)?;
    let tau_int = tau_quadrature(v, h, TAU_QUADRATURE_REL_TOL)?;
    Ok(WeylReport {
        h,
        tau,
        weyl_tau: weyl_tau(v, h, tau)?,
        weyl1: w1,
        corrected: corrected.value,
        corrected_ibp: corrected.ibp_value,
        kappa1,
        kappa2,
        kappa: corrected.kappa,
        quad_error: (tau_int - w1).abs(),
        weyl1_local: local,
    })
}
