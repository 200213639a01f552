//! Periodic 3-D computational grids.
//!
//! A `Grid` is the box `[0,L₁)×[0,L₂)×[0,L₃)` with periodic identification,
//! discretized by `n₁×n₂×n₃` equispaced sites. Site `(i,j,k)` sits at
//! `(i·Δ₁, j·Δ₂, k·Δ₃)` with spacing `Δ_a = L_a/n_a`, and is stored at the
//! flat index `(i·n₂ + j)·n₃ + k` — row-major, last axis fastest, which is
//! also the on-disk order of serialized fields.
//!
//! The grid owns the spectral wavenumber tables: along axis `a` the mode `m`
//! carries `k = 2π·s/L_a` with `s = m` for `m ≤ n/2`, `s = m − n` for
//! `m > n/2`, and the Nyquist entry (`m = n/2`, even `n`) zeroed. Every
//! differential operator in the crate uses these same tables, so composed
//! operators (gradient then divergence) match their one-shot multipliers
//! (Laplacian) exactly instead of differing on the Nyquist shell.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dims: [usize; 3],
    box_len: [f64; 3],
}

impl Grid {
    /// Build a periodic grid. Every axis needs at least 4 sites (below that
    /// the spectral stencils carry no interior modes) and a positive box.
    pub fn new(dims: [usize; 3], box_len: [f64; 3]) -> Result<Self> {
        if dims.iter().any(|&n| n < 4) {
            return Err(Error::DimsTooSmall { dims });
        }
        if box_len.iter().any(|&l| !(l.is_finite() && l > 0.0)) {
            return Err(Error::BadBox { box_len });
        }
        Ok(Grid { dims, box_len })
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn box_len(&self) -> [f64; 3] {
        self.box_len
    }

    pub fn n_sites(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn spacing(&self) -> [f64; 3] {
        [
            self.box_len[0] / self.dims[0] as f64,
            self.box_len[1] / self.dims[1] as f64,
            self.box_len[2] / self.dims[2] as f64,
        ]
    }

    pub fn max_spacing(&self) -> f64 {
        let s = self.spacing();
        s[0].max(s[1]).max(s[2])
    }

    pub fn cell_volume(&self) -> f64 {
        let s = self.spacing();
        s[0] * s[1] * s[2]
    }

    pub fn volume(&self) -> f64 {
        self.box_len[0] * self.box_len[1] * self.box_len[2]
    }

    pub fn center(&self) -> [f64; 3] {
        [
            0.5 * self.box_len[0],
            0.5 * self.box_len[1],
            0.5 * self.box_len[2],
        ]
    }

    /// Flat index of site `(i,j,k)`; last axis fastest.
    #[inline]
    pub fn site_index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.dims[1] + j) * self.dims[2] + k
    }

    /// Integer coordinates of a flat site index.
    #[inline]
    pub fn site_coords(&self, idx: usize) -> [usize; 3] {
        let k = idx % self.dims[2];
        let r = idx / self.dims[2];
        let j = r % self.dims[1];
        let i = r / self.dims[1];
        [i, j, k]
    }

    /// Physical position of a flat site index.
    #[inline]
    pub fn site_position(&self, idx: usize) -> [f64; 3] {
        let c = self.site_coords(idx);
        let s = self.spacing();
        [c[0] as f64 * s[0], c[1] as f64 * s[1], c[2] as f64 * s[2]]
    }

    /// Minimal-image displacement `x − y` on the torus, componentwise in
    /// `[−L_a/2, L_a/2)`.
    pub fn periodic_displacement(&self, x: [f64; 3], y: [f64; 3]) -> [f64; 3] {
        let mut d = [0.0; 3];
        for a in 0..3 {
            let l = self.box_len[a];
            let mut v = (x[a] - y[a]) % l;
            if v < -0.5 * l {
                v += l;
            } else if v >= 0.5 * l {
                v -= l;
            }
            d[a] = v;
        }
        d
    }

    pub fn periodic_distance(&self, x: [f64; 3], y: [f64; 3]) -> f64 {
        let d = self.periodic_displacement(x, y);
        (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
    }

    /// Snap a point to the nearest grid site; returns (flat index, snapped position).
    pub fn snap(&self, x: [f64; 3]) -> (usize, [f64; 3]) {
        let s = self.spacing();
        let mut c = [0usize; 3];
        for a in 0..3 {
            let n = self.dims[a] as i64;
            let m = (x[a] / s[a]).round() as i64;
            c[a] = (m.rem_euclid(n)) as usize;
        }
        let idx = self.site_index(c[0], c[1], c[2]);
        (idx, self.site_position(idx))
    }

    /// Spectral wavenumbers along one axis, Nyquist zeroed (see module doc).
    pub fn wavenumbers(&self, axis: usize) -> Vec<f64> {
        let n = self.dims[axis];
        let l = self.box_len[axis];
        let base = 2.0 * std::f64::consts::PI / l;
        (0..n)
            .map(|m| {
                let s = if 2 * m < n {
                    m as isize
                } else if 2 * m == n {
                    0
                } else {
                    m as isize - n as isize
                };
                base * s as f64
            })
            .collect()
    }

    /// Largest admissible wavenumber magnitude along an axis (pre-Nyquist).
    pub fn max_wavenumber(&self, axis: usize) -> f64 {
        self.wavenumbers(axis)
            .iter()
            .fold(0.0_f64, |acc, k| acc.max(k.abs()))
    }

    /// Short human-readable signature, used in mismatch errors.
    pub fn signature(&self) -> String {
        format!(
            "{}x{}x{} / [{:.4}, {:.4}, {:.4}]",
            self.dims[0],
            self.dims[1],
            self.dims[2],
            self.box_len[0],
            self.box_len[1],
            self.box_len[2]
        )
    }

    /// Error helper: require `other` to be the same grid.
    pub fn expect_same(&self, other: &Grid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch {
                left: self.signature(),
                right: other.signature(),
            })
        }
    }
}
