//! Scalar, vector, and spinor fields on a periodic grid.
//!
//! Values are immutable after construction (operations return new fields),
//! which keeps everything safe to share across sweep workers. Integration is
//! the site sum times the cell volume — the natural quadrature for periodic
//! spectral data (it is exact on resolved trigonometric polynomials).
//!
//! Serialization: a flat little-endian binary layout
//!
//! ```text
//!   u64 dims[3] | f64 box[3] | u64 ncomp | f64 data[ncomp][n_sites]
//! ```
//!
//! with sites in row-major order (last axis fastest, same as memory) and
//! component-major planes. Scalars have `ncomp = 1`, vectors `3`, spinors `4`
//! (re₀, im₀, re₁, im₁). A CSV writer with site coordinates is provided for
//! plotting.

use std::io::{Read, Write};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::Grid;

#[derive(Clone, Debug)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct VectorField {
    grid: Grid,
    comps: [Vec<f64>; 3],
}

#[derive(Clone, Debug)]
pub struct SpinorField {
    grid: Grid,
    comps: [Vec<Complex64>; 2],
}

fn assert_finite(values: &[f64], what: &str) {
    assert!(
        values.iter().all(|v| v.is_finite()),
        "{what}: non-finite value constructed"
    );
}

// ---------------------------------------------------------------- scalar --

impl ScalarField {
    pub fn from_fn(grid: &Grid, f: impl Fn([f64; 3]) -> f64) -> Self {
        let values: Vec<f64> = (0..grid.n_sites()).map(|i| f(grid.site_position(i))).collect();
        assert_finite(&values, "ScalarField::from_fn");
        ScalarField { grid: grid.clone(), values }
    }

    pub fn from_values(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_sites() {
            return Err(Error::FieldFormat(format!(
                "value count {} does not match grid sites {}",
                values.len(),
                grid.n_sites()
            )));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::FieldFormat("non-finite scalar value".into()));
        }
        Ok(ScalarField { grid: grid.clone(), values })
    }

    pub fn constant(grid: &Grid, v: f64) -> Self {
        assert!(v.is_finite());
        ScalarField { grid: grid.clone(), values: vec![v; grid.n_sites()] }
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        let values: Vec<f64> = self.values.iter().map(|&v| f(v)).collect();
        assert_finite(&values, "ScalarField::map");
        ScalarField { grid: self.grid.clone(), values }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.grid.expect_same(&other.grid)?;
        let values: Vec<f64> = self
            .values
            .iter()
            .zip(other.values.iter())
            .map(|(&a, &b)| f(a, b))
            .collect();
        assert_finite(&values, "ScalarField::zip_map");
        Ok(ScalarField { grid: self.grid.clone(), values })
    }

    /// Site sum times cell volume.
    pub fn integrate(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() * self.grid.cell_volume()).sqrt()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

// ---------------------------------------------------------------- vector --

impl VectorField {
    pub fn from_fn(grid: &Grid, f: impl Fn([f64; 3]) -> [f64; 3]) -> Self {
        let n = grid.n_sites();
        let mut comps = [Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n)];
        for i in 0..n {
            let v = f(grid.site_position(i));
            for a in 0..3 {
                comps[a].push(v[a]);
            }
        }
        for c in &comps {
            assert_finite(c, "VectorField::from_fn");
        }
        VectorField { grid: grid.clone(), comps }
    }

    pub fn from_components(grid: &Grid, comps: [Vec<f64>; 3]) -> Result<Self> {
        for c in &comps {
            if c.len() != grid.n_sites() {
                return Err(Error::FieldFormat("component length mismatch".into()));
            }
            if !c.iter().all(|v| v.is_finite()) {
                return Err(Error::FieldFormat("non-finite vector value".into()));
            }
        }
        Ok(VectorField { grid: grid.clone(), comps })
    }

    pub fn zeros(grid: &Grid) -> Self {
        let n = grid.n_sites();
        VectorField {
            grid: grid.clone(),
            comps: [vec![0.0; n], vec![0.0; n], vec![0.0; n]],
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn component(&self, a: usize) -> &[f64] {
        &self.comps[a]
    }

    pub fn component_field(&self, a: usize) -> ScalarField {
        ScalarField { grid: self.grid.clone(), values: self.comps[a].clone() }
    }

    pub fn at(&self, idx: usize) -> [f64; 3] {
        [self.comps[0][idx], self.comps[1][idx], self.comps[2][idx]]
    }

    /// `self + s·other`.
    pub fn axpy(&self, s: f64, other: &Self) -> Result<Self> {
        self.grid.expect_same(&other.grid)?;
        let mut out = self.clone();
        for a in 0..3 {
            for (o, v) in out.comps[a].iter_mut().zip(other.comps[a].iter()) {
                *o += s * v;
            }
        }
        Ok(out)
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = self.clone();
        for a in 0..3 {
            for v in out.comps[a].iter_mut() {
                *v *= s;
            }
        }
        out
    }

    /// L² norm over all three components: (Σ_a ∫ A_a²)^{1/2}.
    pub fn l2_norm(&self) -> f64 {
        let s: f64 = self
            .comps
            .iter()
            .map(|c| c.iter().map(|v| v * v).sum::<f64>())
            .sum();
        (s * self.grid.cell_volume()).sqrt()
    }

    pub fn sup_norm(&self) -> f64 {
        (0..self.grid.n_sites()).fold(0.0_f64, |m, i| {
            let v = self.at(i);
            m.max((v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt())
        })
    }

    /// ∫ u·v dx.
    pub fn dot(&self, other: &Self) -> Result<f64> {
        self.grid.expect_same(&other.grid)?;
        let mut acc = 0.0;
        for a in 0..3 {
            acc += self.comps[a]
                .iter()
                .zip(other.comps[a].iter())
                .map(|(x, y)| x * y)
                .sum::<f64>();
        }
        Ok(acc * self.grid.cell_volume())
    }

    /// Mean of each component over the box.
    pub fn mean(&self) -> [f64; 3] {
        let n = self.grid.n_sites() as f64;
        [
            self.comps[0].iter().sum::<f64>() / n,
            self.comps[1].iter().sum::<f64>() / n,
            self.comps[2].iter().sum::<f64>() / n,
        ]
    }
}

// ---------------------------------------------------------------- spinor --

impl SpinorField {
    pub fn from_fn(grid: &Grid, f: impl Fn([f64; 3]) -> [Complex64; 2]) -> Self {
        let n = grid.n_sites();
        let mut comps = [Vec::with_capacity(n), Vec::with_capacity(n)];
        for i in 0..n {
            let v = f(grid.site_position(i));
            comps[0].push(v[0]);
            comps[1].push(v[1]);
        }
        for c in &comps {
            assert!(
                c.iter().all(|z| z.re.is_finite() && z.im.is_finite()),
                "SpinorField::from_fn: non-finite value"
            );
        }
        SpinorField { grid: grid.clone(), comps }
    }

    pub fn zeros(grid: &Grid) -> Self {
        let n = grid.n_sites();
        SpinorField {
            grid: grid.clone(),
            comps: [vec![Complex64::default(); n], vec![Complex64::default(); n]],
        }
    }

    pub fn from_components(grid: &Grid, comps: [Vec<Complex64>; 2]) -> Result<Self> {
        for c in &comps {
            if c.len() != grid.n_sites() {
                return Err(Error::FieldFormat("spinor component length mismatch".into()));
            }
        }
        Ok(SpinorField { grid: grid.clone(), comps })
    }

    /// Seeded random spinor with components uniform in the unit square of ℂ,
    /// used for operator self-checks and iterative-solver start blocks.
    pub fn random(grid: &Grid, seed: u64) -> Self {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n = grid.n_sites();
        let mut draw = |_| {
            (0..n)
                .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
                .collect::<Vec<_>>()
        };
        let comps = [draw(0), draw(1)];
        SpinorField { grid: grid.clone(), comps }
    }

    /// Seeded random spinor band-limited to |s_a| ≤ n_a/4 per axis, then
    /// normalized. Identities that rely on unaliased pointwise products
    /// (commutator expansions, gauge covariance) hold to spectral accuracy
    /// only on such fields, so consistency probes use this constructor.
    pub fn random_smooth(grid: &Grid, seed: u64) -> Self {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let fft = crate::fft::Fft3::new(grid);
        let dims = grid.dims();
        let n = grid.n_sites();
        let mut comps = [vec![Complex64::default(); n], vec![Complex64::default(); n]];
        for c in comps.iter_mut() {
            for flat in 0..n {
                let m = grid.site_coords(flat);
                let in_band = (0..3).all(|a| {
                    let nn = dims[a] as isize;
                    let mi = m[a] as isize;
                    let s = if 2 * mi <= nn { mi } else { mi - nn };
                    4 * s.abs() <= nn
                });
                if in_band {
                    c[flat] = Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
                }
            }
            fft.inverse(c);
        }
        let u = SpinorField { grid: grid.clone(), comps };
        let norm = u.norm();
        u.scale(Complex64::new(1.0 / norm, 0.0))
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn component(&self, s: usize) -> &[Complex64] {
        &self.comps[s]
    }

    pub fn component_mut(&mut self, s: usize) -> &mut Vec<Complex64> {
        &mut self.comps[s]
    }

    pub fn at(&self, idx: usize) -> [Complex64; 2] {
        [self.comps[0][idx], self.comps[1][idx]]
    }

    /// ⟨u,v⟩ = ∫ (ū₀v₀ + ū₁v₁) dx (conjugate-linear in `self`).
    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        self.grid.expect_same(&other.grid)?;
        let mut acc = Complex64::default();
        for s in 0..2 {
            for (a, b) in self.comps[s].iter().zip(other.comps[s].iter()) {
                acc += a.conj() * b;
            }
        }
        Ok(acc * self.grid.cell_volume())
    }

    pub fn norm(&self) -> f64 {
        let mut acc = 0.0;
        for s in 0..2 {
            acc += self.comps[s].iter().map(|z| z.norm_sqr()).sum::<f64>();
        }
        (acc * self.grid.cell_volume()).sqrt()
    }

    /// `self + s·other`.
    pub fn axpy(&self, s: Complex64, other: &Self) -> Result<Self> {
        self.grid.expect_same(&other.grid)?;
        let mut out = self.clone();
        for c in 0..2 {
            for (o, v) in out.comps[c].iter_mut().zip(other.comps[c].iter()) {
                *o += s * v;
            }
        }
        Ok(out)
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let mut out = self.clone();
        for c in 0..2 {
            for v in out.comps[c].iter_mut() {
                *v *= s;
            }
        }
        out
    }

    /// Pointwise multiply by a real scalar field (ψ·u).
    pub fn mul_scalar(&self, psi: &ScalarField) -> Result<Self> {
        self.grid.expect_same(psi.grid())?;
        let mut out = self.clone();
        for c in 0..2 {
            for (o, w) in out.comps[c].iter_mut().zip(psi.values().iter()) {
                *o *= w;
            }
        }
        Ok(out)
    }

    /// Spin-traced pointwise density |u₀|² + |u₁|².
    pub fn density(&self) -> ScalarField {
        let values: Vec<f64> = (0..self.grid.n_sites())
            .map(|i| self.comps[0][i].norm_sqr() + self.comps[1][i].norm_sqr())
            .collect();
        ScalarField { grid: self.grid.clone(), values }
    }
}

// --------------------------------------------------------- serialization --

fn write_header(w: &mut impl Write, grid: &Grid, ncomp: u64) -> Result<()> {
    for d in grid.dims() {
        w.write_all(&(d as u64).to_le_bytes())?;
    }
    for l in grid.box_len() {
        w.write_all(&l.to_le_bytes())?;
    }
    w.write_all(&ncomp.to_le_bytes())?;
    Ok(())
}

fn read_header(r: &mut impl Read) -> Result<(Grid, u64)> {
    let mut b8 = [0u8; 8];
    let mut dims = [0usize; 3];
    for d in dims.iter_mut() {
        r.read_exact(&mut b8)?;
        *d = u64::from_le_bytes(b8) as usize;
    }
    let mut box_len = [0f64; 3];
    for l in box_len.iter_mut() {
        r.read_exact(&mut b8)?;
        *l = f64::from_le_bytes(b8);
    }
    r.read_exact(&mut b8)?;
    let ncomp = u64::from_le_bytes(b8);
    Ok((Grid::new(dims, box_len)?, ncomp))
}

fn write_plane(w: &mut impl Write, plane: &[f64]) -> Result<()> {
    let mut buf = Vec::with_capacity(plane.len() * 8);
    for v in plane {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

fn read_plane(r: &mut impl Read, n: usize) -> Result<Vec<f64>> {
    let mut buf = vec![0u8; n * 8];
    r.read_exact(&mut buf)?;
    Ok(buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

impl ScalarField {
    pub fn write_binary(&self, w: &mut impl Write) -> Result<()> {
        write_header(w, &self.grid, 1)?;
        write_plane(w, &self.values)
    }

    pub fn read_binary(r: &mut impl Read) -> Result<Self> {
        let (grid, ncomp) = read_header(r)?;
        if ncomp != 1 {
            return Err(Error::FieldFormat(format!("expected 1 component, got {ncomp}")));
        }
        let values = read_plane(r, grid.n_sites())?;
        ScalarField::from_values(&grid, values)
    }

    pub fn write_csv(&self, w: &mut impl Write) -> Result<()> {
        writeln!(w, "x,y,z,value")?;
        for i in 0..self.grid.n_sites() {
            let p = self.grid.site_position(i);
            writeln!(w, "{},{},{},{}", p[0], p[1], p[2], self.values[i])?;
        }
        Ok(())
    }
}

impl VectorField {
    pub fn write_binary(&self, w: &mut impl Write) -> Result<()> {
        write_header(w, &self.grid, 3)?;
        for c in &self.comps {
            write_plane(w, c)?;
        }
        Ok(())
    }

    pub fn read_binary(r: &mut impl Read) -> Result<Self> {
        let (grid, ncomp) = read_header(r)?;
        if ncomp != 3 {
            return Err(Error::FieldFormat(format!("expected 3 components, got {ncomp}")));
        }
        let n = grid.n_sites();
        let comps = [read_plane(r, n)?, read_plane(r, n)?, read_plane(r, n)?];
        VectorField::from_components(&grid, comps)
    }

    pub fn write_csv(&self, w: &mut impl Write) -> Result<()> {
        writeln!(w, "x,y,z,a1,a2,a3")?;
        for i in 0..self.grid.n_sites() {
            let p = self.grid.site_position(i);
            writeln!(
                w,
                "{},{},{},{},{},{}",
                p[0], p[1], p[2], self.comps[0][i], self.comps[1][i], self.comps[2][i]
            )?;
        }
        Ok(())
    }
}

impl SpinorField {
    pub fn write_binary(&self, w: &mut impl Write) -> Result<()> {
        write_header(w, &self.grid, 4)?;
        for c in &self.comps {
            let re: Vec<f64> = c.iter().map(|z| z.re).collect();
            let im: Vec<f64> = c.iter().map(|z| z.im).collect();
            write_plane(w, &re)?;
            write_plane(w, &im)?;
        }
        Ok(())
    }

    pub fn read_binary(r: &mut impl Read) -> Result<Self> {
        let (grid, ncomp) = read_header(r)?;
        if ncomp != 4 {
            return Err(Error::FieldFormat(format!("expected 4 components, got {ncomp}")));
        }
        let n = grid.n_sites();
        let mut comps = [Vec::new(), Vec::new()];
        for comp in comps.iter_mut() {
            let re = read_plane(r, n)?;
            let im = read_plane(r, n)?;
            *comp = re
                .into_iter()
                .zip(im)
                .map(|(a, b)| Complex64::new(a, b))
                .collect();
        }
        SpinorField::from_components(&grid, comps)
    }
}
