//! Periodic lattice on `[-L, L)^d` and scalar lattice fields.

use crate::error::{param, Error, Result};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::cell::RefCell;
use std::f64::consts::PI;
use std::io::{Read, Write};
use std::sync::Arc;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusGrid {
    pub dim: usize,
    pub half_length: f64,
    pub n: usize,
}

impl TorusGrid {
    pub fn new(dim: usize, half_length: f64, n: usize) -> Result<Self> {
        if dim == 0 {
            return param("grid dimension must be positive");
        }
        if n < 4 || !n.is_multiple_of(2) {
            return param(format!("points per axis N = {n} must be even and at least 4"));
        }
        if !(half_length > 0.0 && half_length.is_finite()) {
            return param(format!("half length L = {half_length} must be positive"));
        }
        let total = (0..dim).try_fold(1usize, |acc, _| acc.checked_mul(n));
        match total {
            Some(t) if t <= (1usize << 31) => Ok(Self { dim, half_length, n }),
            _ => Err(Error::Capacity(format!("N^d = {n}^{dim} lattice is too large"))),
        }
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Grid spacing `h = 2L/N`.
    pub fn h(&self) -> f64 {
        2.0 * self.half_length / self.n as f64
    }

    /// Lattice cell volume `h^d`.
    pub fn cell_volume(&self) -> f64 {
        self.h().powi(self.dim as i32)
    }

    /// Axis multi-index of a flat (row-major) index.
    pub fn unravel(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.dim];
        for j in (0..self.dim).rev() {
            out[j] = idx % self.n;
            idx /= self.n;
        }
        out
    }

    pub fn ravel(&self, multi: &[usize]) -> usize {
        multi.iter().fold(0, |acc, &m| acc * self.n + (m % self.n))
    }

    /// Coordinate of axis index `i`: `-L + i h`.
    pub fn coord(&self, i: usize) -> f64 {
        -self.half_length + i as f64 * self.h()
    }

    pub fn point(&self, idx: usize) -> Vec<f64> {
        self.unravel(idx).into_iter().map(|i| self.coord(i)).collect()
    }

    /// Flat index of the lattice site at the origin.
    pub fn origin_index(&self) -> usize {
        self.ravel(&vec![self.n / 2; self.dim])
    }

    /// Integer frequency of FFT bin `i` (Nyquist bin mapped to `-N/2`).
    pub fn freq_index(&self, i: usize) -> i64 {
        if i < self.n / 2 {
            i as i64
        } else {
            i as i64 - self.n as i64
        }
    }

    /// Wavenumber `(π/L)·m` of FFT bin `i`.
    pub fn wavenumber(&self, i: usize) -> f64 {
        PI / self.half_length * self.freq_index(i) as f64
    }

    pub fn is_nyquist(&self, i: usize) -> bool {
        i == self.n / 2
    }

    /// Largest axis wavenumber `πN/(2L)`.
    pub fn k_nyquist(&self) -> f64 {
        PI * self.n as f64 / (2.0 * self.half_length)
    }

    /// Values of a symbol `m(k)` on all FFT bins.
    pub fn symbol(&self, m: impl Fn(&[f64]) -> Complex64) -> Vec<Complex64> {
        let mut k = vec![0.0; self.dim];
        (0..self.len())
            .map(|idx| {
                for (j, a) in self.unravel(idx).into_iter().enumerate() {
                    k[j] = self.wavenumber(a);
                }
                m(&k)
            })
            .collect()
    }

    /// `|k|` on all FFT bins.
    pub fn abs_k(&self) -> Vec<f64> {
        self.symbol(|k| Complex64::new(k.iter().map(|x| x * x).sum::<f64>().sqrt(), 0.0))
            .into_iter()
            .map(|c| c.re)
            .collect()
    }

    /// Sampled function `f(x)` on the lattice.
    pub fn sample(&self, f: impl Fn(&[f64]) -> f64) -> Field {
        let mut x = vec![0.0; self.dim];
        let data = (0..self.len())
            .map(|idx| {
                for (j, a) in self.unravel(idx).into_iter().enumerate() {
                    x[j] = self.coord(a);
                }
                Complex64::new(f(&x), 0.0)
            })
            .collect();
        Field { grid: *self, data, real: true }
    }

    /// Periodic distance of site `idx` to the origin, per axis folded into `[-L, L)`.
    pub fn radius(&self, idx: usize) -> f64 {
        self.point(idx).iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(n)
        } else {
            p.plan_fft_forward(n)
        }
    })
}

/// In-place d-dimensional FFT of row-major data; the inverse is normalized.
pub fn fft_nd(grid: &TorusGrid, data: &mut [Complex64], inverse: bool) {
    let n = grid.n;
    let fft = plan(n, inverse);
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let total = data.len();
    let mut line = vec![Complex64::new(0.0, 0.0); n];
    for axis in 0..grid.dim {
        let stride = n.pow((grid.dim - 1 - axis) as u32);
        if stride == 1 {
            fft.process_with_scratch(data, &mut scratch);
            continue;
        }
        let block = stride * n;
        for base in (0..total).step_by(block) {
            for off in 0..stride {
                let start = base + off;
                for (i, l) in line.iter_mut().enumerate() {
                    *l = data[start + i * stride];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for (i, l) in line.iter().enumerate() {
                    data[start + i * stride] = *l;
                }
            }
        }
    }
    if inverse {
        let s = 1.0 / total as f64;
        for v in data.iter_mut() {
            *v *= s;
        }
    }
}

/// Scalar lattice function; `real` marks fields known to be real-valued.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    pub grid: TorusGrid,
    pub data: Vec<Complex64>,
    pub real: bool,
}

impl Field {
    pub fn zeros(grid: &TorusGrid) -> Self {
        Self { grid: *grid, data: vec![Complex64::new(0.0, 0.0); grid.len()], real: true }
    }

    pub fn constant(grid: &TorusGrid, c: f64) -> Self {
        Self { grid: *grid, data: vec![Complex64::new(c, 0.0); grid.len()], real: true }
    }

    pub fn from_real(grid: &TorusGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return param(format!("field length {} does not match grid {}", values.len(), grid.len()));
        }
        Ok(Self { grid: *grid, data: values.into_iter().map(|v| Complex64::new(v, 0.0)).collect(), real: true })
    }

    pub fn from_complex(grid: &TorusGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return param(format!("field length {} does not match grid {}", values.len(), grid.len()));
        }
        Ok(Self { grid: *grid, data: values, real: false })
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn re(&self) -> Vec<f64> {
        self.data.iter().map(|c| c.re).collect()
    }

    pub fn map_real(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            grid: self.grid,
            data: self.data.iter().map(|c| Complex64::new(f(c.re), 0.0)).collect(),
            real: true,
        }
    }

    /// Drops imaginary round-off when the field is tagged real.
    pub fn realify(mut self) -> Self {
        if self.real {
            for v in self.data.iter_mut() {
                v.im = 0.0;
            }
        }
        self
    }

    pub fn scale(&self, c: f64) -> Field {
        Field { grid: self.grid, data: self.data.iter().map(|v| v * c).collect(), real: self.real }
    }

    pub fn add(&self, other: &Field) -> Field {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &Field) -> Field {
        self.axpy(-1.0, other)
    }

    /// `self + a·other`.
    pub fn axpy(&self, a: f64, other: &Field) -> Field {
        Field {
            grid: self.grid,
            data: self.data.iter().zip(&other.data).map(|(x, y)| x + y * a).collect(),
            real: self.real && other.real,
        }
    }

    /// `self + a·other` with a complex coefficient.
    pub fn axpy_c(&self, a: Complex64, other: &Field) -> Field {
        Field {
            grid: self.grid,
            data: self.data.iter().zip(&other.data).map(|(x, y)| x + y * a).collect(),
            real: self.real && other.real && a.im == 0.0,
        }
    }

    /// Independent standard normal values per site.
    pub fn random_normal(grid: &TorusGrid, seed: u64) -> Field {
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = crate::rng::stream_rng(seed, 0);
        let v = (0..grid.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
        Field::from_real(grid, v).expect("matching length")
    }

    /// Independent random signs per site.
    pub fn random_signs(grid: &TorusGrid, seed: u64) -> Field {
        use rand::Rng;
        let mut rng = crate::rng::stream_rng(seed, 1);
        let v = (0..grid.len()).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
        Field::from_real(grid, v).expect("matching length")
    }

    pub fn mul(&self, other: &Field) -> Field {
        Field {
            grid: self.grid,
            data: self.data.iter().zip(&other.data).map(|(x, y)| x * y).collect(),
            real: self.real && other.real,
        }
    }

    /// Discrete `L^p` norm `(Σ|f|^p h^d)^{1/p}`.
    pub fn norm_p(&self, p: f64) -> f64 {
        let w = self.grid.cell_volume();
        if p.is_infinite() {
            return self.norm_inf();
        }
        let terms: Vec<f64> = self.data.iter().map(|v| v.norm().powf(p)).collect();
        (crate::stats::pairwise_sum(&terms) * w).powf(1.0 / p)
    }

    pub fn norm2(&self) -> f64 {
        let terms: Vec<f64> = self.data.iter().map(|v| v.norm_sqr()).collect();
        (crate::stats::pairwise_sum(&terms) * self.grid.cell_volume()).sqrt()
    }

    pub fn norm_inf(&self) -> f64 {
        self.data.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// `L²` inner product `Σ f conj(g) h^d`.
    pub fn inner(&self, other: &Field) -> Complex64 {
        let mut s = Complex64::new(0.0, 0.0);
        for (x, y) in self.data.iter().zip(&other.data) {
            s += x * y.conj();
        }
        s * self.grid.cell_volume()
    }

    /// `Σ f h^d`.
    pub fn integral(&self) -> Complex64 {
        let re: Vec<f64> = self.data.iter().map(|v| v.re).collect();
        let im: Vec<f64> = self.data.iter().map(|v| v.im).collect();
        Complex64::new(crate::stats::pairwise_sum(&re), crate::stats::pairwise_sum(&im)) * self.grid.cell_volume()
    }

    pub fn rel_diff(&self, other: &Field) -> f64 {
        let d = self.sub(other).norm2();
        let n = other.norm2();
        if n == 0.0 {
            d
        } else {
            d / n
        }
    }

    pub fn min_re(&self) -> f64 {
        self.data.iter().map(|v| v.re).fold(f64::INFINITY, f64::min)
    }

    /// Binary layout: magic, dim, N (u64), L (f64), real flag (u8), values as
    /// little-endian f64 (real part, plus imaginary part for complex fields).
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(b"SLFD")?;
        w.write_all(&(self.grid.dim as u64).to_le_bytes())?;
        w.write_all(&(self.grid.n as u64).to_le_bytes())?;
        w.write_all(&self.grid.half_length.to_le_bytes())?;
        w.write_all(&[u8::from(self.real)])?;
        for v in &self.data {
            w.write_all(&v.re.to_le_bytes())?;
            if !self.real {
                w.write_all(&v.im.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != b"SLFD" {
            return Err(Error::Config("not a field file".into()));
        }
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8)?;
        let dim = u64::from_le_bytes(b8) as usize;
        r.read_exact(&mut b8)?;
        let n = u64::from_le_bytes(b8) as usize;
        r.read_exact(&mut b8)?;
        let l = f64::from_le_bytes(b8);
        let mut flag = [0u8; 1];
        r.read_exact(&mut flag)?;
        let grid = TorusGrid::new(dim, l, n)?;
        let real = flag[0] == 1;
        let mut data = Vec::with_capacity(grid.len());
        for _ in 0..grid.len() {
            r.read_exact(&mut b8)?;
            let re = f64::from_le_bytes(b8);
            let im = if real {
                0.0
            } else {
                r.read_exact(&mut b8)?;
                f64::from_le_bytes(b8)
            };
            data.push(Complex64::new(re, im));
        }
        Ok(Self { grid, data, real })
    }

    /// CSV rows `x_1..x_d, re[, im]`; intended for small grids.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header: Vec<String> = (1..=self.grid.dim).map(|j| format!("x{j}")).collect();
        header.push("re".into());
        if !self.real {
            header.push("im".into());
        }
        wr.write_record(&header)?;
        for (idx, v) in self.data.iter().enumerate() {
            let mut rec: Vec<String> = self.grid.point(idx).iter().map(|x| format!("{x}")).collect();
            rec.push(format!("{}", v.re));
            if !self.real {
                rec.push(format!("{}", v.im));
            }
            wr.write_record(&rec)?;
        }
        wr.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_validation() {
        assert!(TorusGrid::new(3, 8.0, 3).is_err());
        assert!(TorusGrid::new(3, 8.0, 2).is_err());
        assert!(TorusGrid::new(3, -1.0, 8).is_err());
        assert!(matches!(TorusGrid::new(9, 1.0, 1024), Err(Error::Capacity(_))));
        let g = TorusGrid::new(2, 4.0, 8).unwrap();
        assert_eq!(g.h(), 1.0);
        assert_eq!(g.point(g.origin_index()), vec![0.0, 0.0]);
        assert_eq!(g.freq_index(4), -4);
    }

    #[test]
    fn fft_roundtrip_and_mode() {
        let g = TorusGrid::new(3, 2.0, 8).unwrap();
        let f = g.sample(|x| (x[0] * 0.3).sin() + x[1] * x[2]);
        let mut d = f.data.clone();
        fft_nd(&g, &mut d, false);
        fft_nd(&g, &mut d, true);
        for (a, b) in d.iter().zip(&f.data) {
            assert!((a - b).norm() < 1e-12);
        }
        // single mode lands in a single bin
        let k = PI / 2.0;
        let m = Field::from_complex(
            &g,
            (0..g.len()).map(|i| Complex64::from_polar(1.0, k * g.point(i)[1])).collect(),
        )
        .unwrap();
        let mut d = m.data.clone();
        fft_nd(&g, &mut d, false);
        let big: Vec<usize> = (0..g.len()).filter(|&i| d[i].norm() > 1e-8).collect();
        assert_eq!(big.len(), 1);
        assert_eq!(g.wavenumber(g.unravel(big[0])[1]), k);
    }

    #[test]
    fn binary_roundtrip() {
        let g = TorusGrid::new(2, 1.0, 4).unwrap();
        let f = g.sample(|x| x[0] - 2.0 * x[1]);
        let mut buf = Vec::new();
        f.write_binary(&mut buf).unwrap();
        assert_eq!(buf.len(), 4 + 8 * 3 + 1 + 8 * 16);
        assert_eq!(Field::read_binary(&buf[..]).unwrap(), f);
        let mut csv = Vec::new();
        f.write_csv(&mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 17);
    }
}
