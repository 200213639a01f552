//! Thin 3-D FFT layer over `rustfft`, matched to the grid's site layout.
//!
//! Transforms are unnormalized forward and `1/N`-scaled inverse, so
//! `inverse(forward(f)) = f` to machine precision. Single-axis passes
//! (`axis_multiplier`) implement one-dimensional spectral calculus —
//! a partial derivative only transforms along its own axis, which is both
//! cheaper and exactly consistent with the full 3-D multipliers because the
//! mode layout `(m₀·n₁ + m₁)·n₂ + m₂` coincides with the site layout.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::grid::Grid;

pub struct Fft3 {
    dims: [usize; 3],
    fwd: [Arc<dyn Fft<f64>>; 3],
    inv: [Arc<dyn Fft<f64>>; 3],
}

impl Fft3 {
    pub fn new(grid: &Grid) -> Self {
        let mut planner = FftPlanner::<f64>::new();
        let dims = grid.dims();
        let fwd = [
            planner.plan_fft_forward(dims[0]),
            planner.plan_fft_forward(dims[1]),
            planner.plan_fft_forward(dims[2]),
        ];
        let inv = [
            planner.plan_fft_inverse(dims[0]),
            planner.plan_fft_inverse(dims[1]),
            planner.plan_fft_inverse(dims[2]),
        ];
        Fft3 { dims, fwd, inv }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    fn n_total(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    /// Walk all 1-D lines along `axis`, apply `plan` to each (gathering
    /// strided lines through a scratch buffer), then scale in place.
    fn axis_pass(&self, data: &mut [Complex64], axis: usize, plan: &Arc<dyn Fft<f64>>, scale: f64) {
        let [n0, n1, n2] = self.dims;
        debug_assert_eq!(data.len(), self.n_total());
        let n = self.dims[axis];
        let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
        match axis {
            2 => {
                for line in data.chunks_exact_mut(n2) {
                    plan.process_with_scratch(line, &mut scratch);
                }
            }
            1 => {
                let mut line = vec![Complex64::default(); n];
                for i in 0..n0 {
                    for k in 0..n2 {
                        let base = i * n1 * n2 + k;
                        for j in 0..n1 {
                            line[j] = data[base + j * n2];
                        }
                        plan.process_with_scratch(&mut line, &mut scratch);
                        for j in 0..n1 {
                            data[base + j * n2] = line[j];
                        }
                    }
                }
            }
            0 => {
                let mut line = vec![Complex64::default(); n];
                let plane = n1 * n2;
                for r in 0..plane {
                    for i in 0..n0 {
                        line[i] = data[r + i * plane];
                    }
                    plan.process_with_scratch(&mut line, &mut scratch);
                    for i in 0..n0 {
                        data[r + i * plane] = line[i];
                    }
                }
            }
            _ => unreachable!("axis must be 0, 1 or 2"),
        }
        if scale != 1.0 {
            for v in data.iter_mut() {
                *v *= scale;
            }
        }
    }

    /// Full 3-D forward transform, unnormalized.
    pub fn forward(&self, data: &mut [Complex64]) {
        for axis in 0..3 {
            self.axis_pass(data, axis, &self.fwd[axis].clone(), 1.0);
        }
    }

    /// Full 3-D inverse transform, scaled by 1/N.
    pub fn inverse(&self, data: &mut [Complex64]) {
        for axis in 0..3 {
            self.axis_pass(data, axis, &self.inv[axis].clone(), 1.0);
        }
        let scale = 1.0 / self.n_total() as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }

    /// One-axis spectral multiplier: transform along `axis`, multiply mode
    /// `m` by `mult[m]`, transform back (normalized). The workhorse of every
    /// partial derivative.
    pub fn axis_multiplier(&self, data: &mut [Complex64], axis: usize, mult: &[Complex64]) {
        let n = self.dims[axis];
        assert_eq!(mult.len(), n, "multiplier table must match axis length");
        self.axis_pass(data, axis, &self.fwd[axis].clone(), 1.0);
        self.apply_mode_table(data, axis, mult);
        let scale = 1.0 / n as f64;
        self.axis_pass(data, axis, &self.inv[axis].clone(), scale);
    }

    /// Multiply each mode along `axis` by a table entry, in place, assuming
    /// `data` is already transformed along that axis.
    fn apply_mode_table(&self, data: &mut [Complex64], axis: usize, mult: &[Complex64]) {
        let [_, n1, n2] = self.dims;
        match axis {
            2 => {
                for line in data.chunks_exact_mut(n2) {
                    for (v, m) in line.iter_mut().zip(mult.iter()) {
                        *v *= m;
                    }
                }
            }
            1 => {
                let plane = n1 * n2;
                for chunk in data.chunks_exact_mut(plane) {
                    for (j, row) in chunk.chunks_exact_mut(n2).enumerate() {
                        let m = mult[j];
                        for v in row.iter_mut() {
                            *v *= m;
                        }
                    }
                }
            }
            0 => {
                let plane = n1 * n2;
                for (i, chunk) in data.chunks_exact_mut(plane).enumerate() {
                    let m = mult[i];
                    for v in chunk.iter_mut() {
                        *v *= m;
                    }
                }
            }
            _ => unreachable!(),
        }
    }

    /// Flat mode index of `(m₀,m₁,m₂)`; same layout as sites.
    #[inline]
    pub fn mode_index(&self, m: [usize; 3]) -> usize {
        (m[0] * self.dims[1] + m[1]) * self.dims[2] + m[2]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid() -> Grid {
        Grid::new([8, 6, 4], [2.0 * PI, 1.0, 3.0]).unwrap()
    }

    #[test]
    fn roundtrip() {
        let g = grid();
        let f = Fft3::new(&g);
        let mut data: Vec<Complex64> = (0..g.n_sites())
            .map(|i| Complex64::new((i as f64).sin(), (i as f64 * 0.7).cos()))
            .collect();
        let orig = data.clone();
        f.forward(&mut data);
        f.inverse(&mut data);
        for (a, b) in data.iter().zip(orig.iter()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn plane_wave_lands_on_single_mode() {
        let g = grid();
        let f = Fft3::new(&g);
        // e^{i(2x_0 + 2pi*3*x_1 + (2pi/3)x_2)} -> mode (2,3,1)
        let mut data: Vec<Complex64> = (0..g.n_sites())
            .map(|idx| {
                let p = g.site_position(idx);
                let phase = 2.0 * p[0] + 2.0 * PI * 3.0 * p[1] + 2.0 * PI / 3.0 * p[2];
                Complex64::new(0.0, phase).exp()
            })
            .collect();
        f.forward(&mut data);
        let hot = f.mode_index([2, 3, 1]);
        for (i, v) in data.iter().enumerate() {
            if i == hot {
                assert!((v - Complex64::new(g.n_sites() as f64, 0.0)).norm() < 1e-9);
            } else {
                assert!(v.norm() < 1e-9, "leak at {i}: {v}");
            }
        }
    }

    #[test]
    fn axis_multiplier_differentiates() {
        let g = grid();
        let f = Fft3::new(&g);
        // d/dx_1 of sin(2pi x_1) = 2pi cos(2pi x_1) on box length 1
        let k = g.wavenumbers(1);
        let mult: Vec<Complex64> = k.iter().map(|&k| Complex64::new(0.0, k)).collect();
        let mut data: Vec<Complex64> = (0..g.n_sites())
            .map(|idx| Complex64::new((2.0 * PI * g.site_position(idx)[1]).sin(), 0.0))
            .collect();
        f.axis_multiplier(&mut data, 1, &mult);
        for idx in 0..g.n_sites() {
            let want = 2.0 * PI * (2.0 * PI * g.site_position(idx)[1]).cos();
            assert!((data[idx].re - want).abs() < 1e-10 * (1.0 + want.abs()));
            assert!(data[idx].im.abs() < 1e-10);
        }
    }
}
