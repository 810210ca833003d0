//! Band-limited samples on periodic tori.
//!
//! Functions live on a uniform grid over `[0, L)` (1D) or `[0, L1) x [0, L2)`
//! (2D) and are identified with the trigonometric polynomial interpolating
//! the samples. The Fourier convention is 2pi-normalized throughout:
//!
//! ```text
//! f(x) = sum_k c_k e^{2 pi i k x / L},   c_k = (1/N) sum_n f(x_n) e^{-2 pi i k n / N}
//! ```
//!
//! so frequencies are `k / L` with integer mode `k` in `[-N/2, N/2)`.
//! Integrals are Riemann sums with cell weight `L/N` per axis; for
//! band-limited data the L2 quantities are exact by discrete Parseval.
//!
//! Storage is row-major with axis 0 (the `x` / `xi` axis) fastest:
//! index `(i0, i1) -> i1 * n0 + i0`. A 1D function has `n1 = 1`.

use num_complex::Complex64;
use rustfft::FftPlanner;
use std::sync::Arc;

use crate::error::CoreError;

/// Inclusive signed mode range on one axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Band {
    pub lo: i64,
    pub hi: i64,
}

impl Band {
    pub fn new(lo: i64, hi: i64) -> Self {
        Band { lo, hi }
    }
    pub fn symmetric(radius: i64) -> Self {
        Band { lo: -radius, hi: radius }
    }
    pub fn contains(&self, k: i64) -> bool {
        self.lo <= k && k <= self.hi
    }
    /// Band of a product under frequency addition.
    pub fn sum(&self, other: &Band) -> Band {
        Band { lo: self.lo + other.lo, hi: self.hi + other.hi }
    }
    pub fn is_empty(&self) -> bool {
        self.lo > self.hi
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampledFunction {
    /// Grid sizes per axis; `sizes[1] == 1` for 1D data.
    sizes: [usize; 2],
    /// Period lengths per axis; `periods[1] == 1.0` placeholder for 1D.
    periods: [f64; 2],
    dim: u8,
    data: Vec<Complex64>,
    /// Declared Fourier support per axis, if the producer knows it.
    band: [Option<Band>; 2],
}

const MAGIC: &[u8; 4] = b"BPSF";
const FORMAT_VERSION: u16 = 1;

impl SampledFunction {
    pub fn new_1d(n: usize, period: f64, data: Vec<Complex64>) -> Result<Self, CoreError> {
        if n == 0 || data.len() != n {
            return Err(CoreError::grid_mismatch(format!(
                "1d sample count {} does not match grid size {n}",
                data.len()
            )));
        }
        if !(period > 0.0) {
            return Err(CoreError::degenerate("period must be positive"));
        }
        Ok(SampledFunction {
            sizes: [n, 1],
            periods: [period, 1.0],
            dim: 1,
            data,
            band: [None, None],
        })
    }

    pub fn new_2d(
        n0: usize,
        n1: usize,
        l0: f64,
        l1: f64,
        data: Vec<Complex64>,
    ) -> Result<Self, CoreError> {
        if n0 == 0 || n1 == 0 || data.len() != n0 * n1 {
            return Err(CoreError::grid_mismatch(format!(
                "2d sample count {} does not match grid {n0}x{n1}",
                data.len()
            )));
        }
        if !(l0 > 0.0 && l1 > 0.0) {
            return Err(CoreError::degenerate("periods must be positive"));
        }
        Ok(SampledFunction {
            sizes: [n0, n1],
            periods: [l0, l1],
            dim: 2,
            data,
            band: [None, None],
        })
    }

    pub fn zeros_1d(n: usize, period: f64) -> Self {
        SampledFunction::new_1d(n, period, vec![Complex64::new(0.0, 0.0); n]).unwrap()
    }

    pub fn zeros_2d(n0: usize, n1: usize, l0: f64, l1: f64) -> Self {
        SampledFunction::new_2d(n0, n1, l0, l1, vec![Complex64::new(0.0, 0.0); n0 * n1]).unwrap()
    }

    pub fn zeros_like(other: &SampledFunction) -> Self {
        let mut z = other.clone();
        for v in z.data.iter_mut() {
            *v = Complex64::new(0.0, 0.0);
        }
        z.band = [None, None];
        z
    }

    pub fn dim(&self) -> u8 {
        self.dim
    }
    pub fn sizes(&self) -> [usize; 2] {
        self.sizes
    }
    pub fn periods(&self) -> [f64; 2] {
        self.periods
    }
    pub fn len(&self) -> usize {
        self.data.len()
    }
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
    pub fn data(&self) -> &[Complex64] {
        &self.data
    }
    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn declared_band(&self, axis: usize) -> Option<Band> {
        self.band[axis]
    }
    pub fn set_band(&mut self, axis: usize, band: Option<Band>) {
        self.band[axis] = band;
    }
    pub fn with_bands(mut self, b0: Option<Band>, b1: Option<Band>) -> Self {
        self.band = [b0, b1];
        self
    }

    /// Nyquist frequency of one axis in cycles per unit length: N/(2L).
    pub fn nyquist(&self, axis: usize) -> f64 {
        self.sizes[axis] as f64 / (2.0 * self.periods[axis])
    }

    /// Largest representable signed mode magnitude per axis (inclusive).
    pub fn mode_radius(&self, axis: usize) -> i64 {
        ((self.sizes[axis] as i64) - 1) / 2
    }

    pub fn value(&self, i0: usize, i1: usize) -> Complex64 {
        self.data[i1 * self.sizes[0] + i0]
    }
    pub fn value_mut(&mut self, i0: usize, i1: usize) -> &mut Complex64 {
        &mut self.data[i1 * self.sizes[0] + i0]
    }

    /// Sample position along an axis.
    pub fn point(&self, axis: usize, idx: usize) -> f64 {
        idx as f64 * self.periods[axis] / self.sizes[axis] as f64
    }

    /// Riemann cell measure (product over real axes).
    pub fn cell_measure(&self) -> f64 {
        let mut m = self.periods[0] / self.sizes[0] as f64;
        if self.dim == 2 {
            m *= self.periods[1] / self.sizes[1] as f64;
        }
        m
    }

    /// Total measure of the torus.
    pub fn total_measure(&self) -> f64 {
        if self.dim == 2 { self.periods[0] * self.periods[1] } else { self.periods[0] }
    }

    pub fn same_grid(&self, other: &SampledFunction) -> bool {
        self.dim == other.dim
            && self.sizes == other.sizes
            && self.periods[0] == other.periods[0]
            && (self.dim == 1 || self.periods[1] == other.periods[1])
    }

    pub fn require_same_grid(&self, other: &SampledFunction) -> Result<(), CoreError> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(CoreError::grid_mismatch(format!(
                "grids differ: {:?}/{:?} vs {:?}/{:?}",
                self.sizes, self.periods, other.sizes, other.periods
            )))
        }
    }

    /// Signed mode for a storage index on one axis.
    pub fn mode_at(&self, axis: usize, idx: usize) -> i64 {
        signed_mode(idx, self.sizes[axis])
    }

    /// Storage index for a signed mode, if representable.
    pub fn index_of_mode(&self, axis: usize, k: i64) -> Option<usize> {
        let n = self.sizes[axis] as i64;
        if k >= -(n / 2) && k < n - n / 2 {
            Some(k.rem_euclid(n) as usize)
        } else {
            None
        }
    }

    /// Frequency in cycles per unit length for a storage index.
    pub fn freq_at(&self, axis: usize, idx: usize) -> f64 {
        self.mode_at(axis, idx) as f64 / self.periods[axis]
    }

    /// Forward transform to Fourier coefficients c_k (same storage layout,
    /// index `m` on an axis holding signed mode `signed_mode(m, n)`).
    pub fn coeffs(&self) -> Vec<Complex64> {
        let mut buf = self.data.clone();
        fft_2d(&mut buf, self.sizes, rustfft::FftDirection::Forward);
        let scale = 1.0 / (self.sizes[0] * self.sizes[1]) as f64;
        for v in buf.iter_mut() {
            *v *= scale;
        }
        buf
    }

    /// Build samples from Fourier coefficients laid out as by [`coeffs`].
    pub fn from_coeffs_1d(
        n: usize,
        period: f64,
        mut coeffs: Vec<Complex64>,
    ) -> Result<Self, CoreError> {
        if coeffs.len() != n {
            return Err(CoreError::grid_mismatch("coefficient count mismatch"));
        }
        fft_2d(&mut coeffs, [n, 1], rustfft::FftDirection::Inverse);
        SampledFunction::new_1d(n, period, coeffs)
    }

    pub fn from_coeffs_2d(
        n0: usize,
        n1: usize,
        l0: f64,
        l1: f64,
        mut coeffs: Vec<Complex64>,
    ) -> Result<Self, CoreError> {
        if coeffs.len() != n0 * n1 {
            return Err(CoreError::grid_mismatch("coefficient count mismatch"));
        }
        fft_2d(&mut coeffs, [n0, n1], rustfft::FftDirection::Inverse);
        SampledFunction::new_2d(n0, n1, l0, l1, coeffs)
    }

    pub fn from_coeffs_like(
        proto: &SampledFunction,
        coeffs: Vec<Complex64>,
    ) -> Result<Self, CoreError> {
        if proto.dim == 1 {
            SampledFunction::from_coeffs_1d(proto.sizes[0], proto.periods[0], coeffs)
        } else {
            SampledFunction::from_coeffs_2d(
                proto.sizes[0],
                proto.sizes[1],
                proto.periods[0],
                proto.periods[1],
                coeffs,
            )
        }
    }

    /// Smallest inclusive mode range per axis holding every coefficient with
    /// modulus above `rel_tol * max |c|`. `None` when the function is zero.
    pub fn effective_band(&self, axis: usize, rel_tol: f64) -> Option<Band> {
        let coeffs = self.coeffs();
        let peak = coeffs.iter().map(|c| c.norm()).fold(0.0_f64, f64::max);
        if peak == 0.0 {
            return None;
        }
        let thr = peak * rel_tol;
        let mut lo = i64::MAX;
        let mut hi = i64::MIN;
        for i1 in 0..self.sizes[1] {
            for i0 in 0..self.sizes[0] {
                if coeffs[i1 * self.sizes[0] + i0].norm() > thr {
                    let k = match axis {
                        0 => signed_mode(i0, self.sizes[0]),
                        _ => signed_mode(i1, self.sizes[1]),
                    };
                    lo = lo.min(k);
                    hi = hi.max(k);
                }
            }
        }
        if lo > hi { None } else { Some(Band { lo, hi }) }
    }

    /// Declared band if present, else the effective band at tolerance 1e-13.
    pub fn working_band(&self, axis: usize) -> Option<Band> {
        self.band[axis].or_else(|| self.effective_band(axis, 1e-13))
    }

    /// L^p norm by Riemann sum; `p = f64::INFINITY` is the grid sup.
    /// Quasi-norms `0 < p < 1` are evaluated by the same formula.
    pub fn lp_norm(&self, p: f64) -> f64 {
        if p == f64::INFINITY {
            return self.data.iter().map(|v| v.norm()).fold(0.0, f64::max);
        }
        assert!(p > 0.0, "exponent must be positive");
        let cell = self.cell_measure();
        let s: f64 = self.data.iter().map(|v| v.norm().powf(p)).sum();
        (cell * s).powf(1.0 / p)
    }

    pub fn l2_norm(&self) -> f64 {
        let cell = self.cell_measure();
        let s: f64 = self.data.iter().map(|v| v.norm_sqr()).sum();
        (cell * s).sqrt()
    }

    /// Sesquilinear pairing `integral f * conj(g)`.
    pub fn inner(&self, other: &SampledFunction) -> Result<Complex64, CoreError> {
        self.require_same_grid(other)?;
        let cell = self.cell_measure();
        let mut acc = Complex64::new(0.0, 0.0);
        for (a, b) in self.data.iter().zip(other.data.iter()) {
            acc += a * b.conj();
        }
        Ok(acc * cell)
    }

    pub fn scale(&mut self, c: Complex64) {
        for v in self.data.iter_mut() {
            *v *= c;
        }
    }

    pub fn add_assign(&mut self, other: &SampledFunction) -> Result<(), CoreError> {
        self.require_same_grid(other)?;
        for (a, b) in self.data.iter_mut().zip(other.data.iter()) {
            *a += b;
        }
        self.band = [
            merge_bands(self.band[0], other.band[0]),
            merge_bands(self.band[1], other.band[1]),
        ];
        Ok(())
    }

    pub fn sub(&self, other: &SampledFunction) -> Result<SampledFunction, CoreError> {
        self.require_same_grid(other)?;
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(other.data.iter()) {
            *a -= b;
        }
        out.band = [
            merge_bands(self.band[0], other.band[0]),
            merge_bands(self.band[1], other.band[1]),
        ];
        Ok(out)
    }

    /// Pointwise product.
    pub fn mul(&self, other: &SampledFunction) -> Result<SampledFunction, CoreError> {
        self.require_same_grid(other)?;
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(other.data.iter()) {
            *a *= b;
        }
        out.band = [
            sum_bands(self.band[0], other.band[0]),
            sum_bands(self.band[1], other.band[1]),
        ];
        Ok(out)
    }

    /// Integer torus dilation `f(x) -> f(2x)` along one axis, realized as the
    /// exact mode remap `k -> 2k`. Requires the working band to fit after
    /// doubling; the map preserves every L^p norm on the torus.
    pub fn dilate2(&self, axis: usize) -> Result<SampledFunction, CoreError> {
        let band = self.working_band(axis).unwrap_or(Band { lo: 0, hi: 0 });
        let n = self.sizes[axis] as i64;
        if 2 * band.lo < -(n / 2) || 2 * band.hi >= n - n / 2 {
            return Err(CoreError::band_overflow(format!(
                "dilation doubles band {:?} beyond the mode range of {} samples",
                band, n
            )));
        }
        let coeffs = self.coeffs();
        let mut out = vec![Complex64::new(0.0, 0.0); coeffs.len()];
        for i1 in 0..self.sizes[1] {
            for i0 in 0..self.sizes[0] {
                let c = coeffs[i1 * self.sizes[0] + i0];
                if c == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let (k0, k1) = (signed_mode(i0, self.sizes[0]), signed_mode(i1, self.sizes[1]));
                let (m0, m1) = if axis == 0 { (2 * k0, k1) } else { (k0, 2 * k1) };
                let j0 = match self.index_of_mode(0, m0) {
                    Some(j) => j,
                    None => continue,
                };
                let j1 = match self.index_of_mode(1, m1) {
                    Some(j) => j,
                    None => continue,
                };
                out[j1 * self.sizes[0] + j0] = c;
            }
        }
        let mut f = SampledFunction::from_coeffs_like(self, out)?;
        f.band = self.band;
        if let Some(b) = f.band[axis] {
            f.band[axis] = Some(Band { lo: 2 * b.lo, hi: 2 * b.hi });
        }
        Ok(f)
    }

    /// Serialize to the binary container: magic, version, dimension, flags,
    /// sizes, periods, optional declared bands, interleaved re/im samples,
    /// all little-endian, axis 0 fastest.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(64 + 16 * self.data.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.push(self.dim);
        let flags: u8 = (self.band[0].is_some() as u8) | ((self.band[1].is_some() as u8) << 1);
        out.push(flags);
        out.extend_from_slice(&(self.sizes[0] as u64).to_le_bytes());
        out.extend_from_slice(&(self.sizes[1] as u64).to_le_bytes());
        out.extend_from_slice(&self.periods[0].to_le_bytes());
        out.extend_from_slice(&self.periods[1].to_le_bytes());
        for axis in 0..2 {
            if let Some(b) = self.band[axis] {
                out.extend_from_slice(&b.lo.to_le_bytes());
                out.extend_from_slice(&b.hi.to_le_bytes());
            }
        }
        for v in &self.data {
            out.extend_from_slice(&v.re.to_le_bytes());
            out.extend_from_slice(&v.im.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CoreError> {
        let mut r = ByteReader { bytes, pos: 0 };
        let magic = r.take(4)?;
        if magic != MAGIC {
            return Err(CoreError::parse("bad magic, not a sampled-function container"));
        }
        let version = u16::from_le_bytes(r.take(2)?.try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(CoreError::parse(format!("unsupported container version {version}")));
        }
        let dim = r.take(1)?[0];
        if dim != 1 && dim != 2 {
            return Err(CoreError::parse(format!("bad dimension {dim}")));
        }
        let flags = r.take(1)?[0];
        let n0 = u64::from_le_bytes(r.take(8)?.try_into().unwrap()) as usize;
        let n1 = u64::from_le_bytes(r.take(8)?.try_into().unwrap()) as usize;
        let l0 = f64::from_le_bytes(r.take(8)?.try_into().unwrap());
        let l1 = f64::from_le_bytes(r.take(8)?.try_into().unwrap());
        let mut band = [None, None];
        for (axis, slot) in band.iter_mut().enumerate() {
            if flags & (1 << axis) != 0 {
                let lo = i64::from_le_bytes(r.take(8)?.try_into().unwrap());
                let hi = i64::from_le_bytes(r.take(8)?.try_into().unwrap());
                *slot = Some(Band { lo, hi });
            }
        }
        let count = n0
            .checked_mul(n1)
            .ok_or_else(|| CoreError::parse("size overflow in container header"))?;
        if count == 0 || count > (1 << 28) {
            return Err(CoreError::parse(format!("implausible sample count {count}")));
        }
        let mut data = Vec::with_capacity(count);
        for _ in 0..count {
            let re = f64::from_le_bytes(r.take(8)?.try_into().unwrap());
            let im = f64::from_le_bytes(r.take(8)?.try_into().unwrap());
            data.push(Complex64::new(re, im));
        }
        if r.pos != bytes.len() {
            return Err(CoreError::parse("trailing bytes after sample payload"));
        }
        let mut f = if dim == 1 {
            if n1 != 1 {
                return Err(CoreError::parse("1d container with second axis size != 1"));
            }
            SampledFunction::new_1d(n0, l0, data)?
        } else {
            SampledFunction::new_2d(n0, n1, l0, l1, data)?
        };
        f.band = band;
        Ok(f)
    }
}

struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CoreError> {
        if self.pos + n > self.bytes.len() {
            return Err(CoreError::parse("truncated container"));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
}

/// Signed mode for storage index `m` on an axis of `n` samples.
pub fn signed_mode(m: usize, n: usize) -> i64 {
    let m = m as i64;
    let n = n as i64;
    if m < n - n / 2 { m } else { m - n }
}

fn merge_bands(a: Option<Band>, b: Option<Band>) -> Option<Band> {
    match (a, b) {
        (Some(x), Some(y)) => Some(Band { lo: x.lo.min(y.lo), hi: x.hi.max(y.hi) }),
        _ => None,
    }
}

fn sum_bands(a: Option<Band>, b: Option<Band>) -> Option<Band> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.sum(&y)),
        _ => None,
    }
}

/// In-place 2D FFT (axis 0 then axis 1), unnormalized like rustfft.
fn fft_2d(buf: &mut [Complex64], sizes: [usize; 2], dir: rustfft::FftDirection) {
    let [n0, n1] = sizes;
    let mut planner = FftPlanner::<f64>::new();
    let fft0: Arc<dyn rustfft::Fft<f64>> = planner.plan_fft(n0, dir);
    for row in 0..n1 {
        fft0.process(&mut buf[row * n0..(row + 1) * n0]);
    }
    if n1 > 1 {
        let fft1: Arc<dyn rustfft::Fft<f64>> = planner.plan_fft(n1, dir);
        let mut col = vec![Complex64::new(0.0, 0.0); n1];
        for c in 0..n0 {
            for row in 0..n1 {
                col[row] = buf[row * n0 + c];
            }
            fft1.process(&mut col);
            for row in 0..n1 {
                buf[row * n0 + c] = col[row];
            }
        }
    }
}

/// Trigonometric interpolant of a 1D grid function: evaluates the
/// band-limited representative `sum_k c_k exp(2 pi i k x / L)` at
/// arbitrary (off-grid) points.
#[derive(Debug, Clone)]
pub struct FourierInterpolant {
    period: f64,
    modes: Vec<(i64, Complex64)>,
}

impl FourierInterpolant {
    pub fn eval(&self, x: f64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for &(k, c) in &self.modes {
            let phase = std::f64::consts::TAU * k as f64 * x / self.period;
            acc += c * Complex64::new(phase.cos(), phase.sin());
        }
        acc
    }

    pub fn mode_count(&self) -> usize {
        self.modes.len()
    }
}

impl SampledFunction {
    /// Interpolant over the working band (1D only).
    pub fn interpolant(&self) -> Result<FourierInterpolant, CoreError> {
        if self.dim != 1 {
            return Err(CoreError::grid_mismatch("interpolant requires a 1D function"));
        }
        let coeffs = self.coeffs();
        let band = self.working_band(0);
        let mut modes = Vec::new();
        for (i, &c) in coeffs.iter().enumerate() {
            let k = signed_mode(i, self.sizes[0]);
            if let Some(b) = band {
                if !b.contains(k) {
                    continue;
                }
            }
            if c != Complex64::new(0.0, 0.0) {
                modes.push((k, c));
            }
        }
        modes.sort_by_key(|&(k, _)| k);
        Ok(FourierInterpolant { period: self.periods[0], modes })
    }
}

/// Build a 1D function from a closure over sample positions.
pub fn sample_1d(
    n: usize,
    period: f64,
    mut f: impl FnMut(f64) -> Complex64,
) -> Result<SampledFunction, CoreError> {
    let data = (0..n).map(|i| f(i as f64 * period / n as f64)).collect();
    SampledFunction::new_1d(n, period, data)
}

/// Build a 2D function from a closure over sample positions.
pub fn sample_2d(
    n0: usize,
    n1: usize,
    l0: f64,
    l1: f64,
    mut f: impl FnMut(f64, f64) -> Complex64,
) -> Result<SampledFunction, CoreError> {
    let mut data = Vec::with_capacity(n0 * n1);
    for i1 in 0..n1 {
        for i0 in 0..n0 {
            data.push(f(i0 as f64 * l0 / n0 as f64, i1 as f64 * l1 / n1 as f64));
        }
    }
    SampledFunction::new_2d(n0, n1, l0, l1, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use std::f64::consts::TAU;

    fn wave_1d(n: usize, period: f64, k: i64, amp: Complex64) -> SampledFunction {
        sample_1d(n, period, |x| amp * Complex64::new(0.0, TAU * k as f64 * x / period).exp())
            .unwrap()
    }

    #[test]
    fn coeffs_pick_out_single_mode() {
        let f = wave_1d(64, 1.0, 5, Complex64::new(2.0, -1.0));
        let c = f.coeffs();
        for (idx, v) in c.iter().enumerate() {
            let k = signed_mode(idx, 64);
            let expect = if k == 5 { Complex64::new(2.0, -1.0) } else { Complex64::new(0.0, 0.0) };
            assert!((v - expect).norm() < 1e-12, "mode {k} got {v}");
        }
    }

    #[test]
    fn roundtrip_coeffs_samples() {
        let f = sample_1d(32, 2.0, |x| Complex64::new((TAU * x).cos(), x)).unwrap();
        let g = SampledFunction::from_coeffs_1d(32, 2.0, f.coeffs()).unwrap();
        for (a, b) in f.data().iter().zip(g.data().iter()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn parseval_l2() {
        let f = wave_1d(128, 4.0, 3, Complex64::new(1.0, 1.0));
        // ||f||_2^2 = L * |amp|^2 = 4 * 2.
        assert!((f.l2_norm() - (8.0f64).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn inner_product_orthogonality() {
        let f = wave_1d(64, 1.0, 3, Complex64::new(1.0, 0.0));
        let g = wave_1d(64, 1.0, 4, Complex64::new(1.0, 0.0));
        assert!(f.inner(&g).unwrap().norm() < 1e-12);
        assert!((f.inner(&f).unwrap().re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn container_roundtrip_is_identity() {
        let mut f = sample_2d(8, 4, 1.0, 2.0, |x, y| Complex64::new(x * y, x - y)).unwrap();
        f.set_band(0, Some(Band::symmetric(3)));
        let bytes = f.to_bytes();
        let g = SampledFunction::from_bytes(&bytes).unwrap();
        assert_eq!(f, g);
        assert_eq!(bytes, g.to_bytes());
    }

    #[test]
    fn container_rejects_corruption() {
        let f = SampledFunction::zeros_1d(8, 1.0);
        let mut bytes = f.to_bytes();
        bytes[0] = b'X';
        assert!(SampledFunction::from_bytes(&bytes).is_err());
        let bytes = f.to_bytes();
        assert!(SampledFunction::from_bytes(&bytes[..bytes.len() - 1]).is_err());
    }

    #[test]
    fn effective_band_detects_support() {
        let mut f = wave_1d(64, 1.0, 5, Complex64::new(1.0, 0.0));
        f.add_assign(&wave_1d(64, 1.0, -2, Complex64::new(0.5, 0.0))).unwrap();
        let b = f.effective_band(0, 1e-10).unwrap();
        assert_eq!(b, Band { lo: -2, hi: 5 });
    }

    #[test]
    fn dilation_preserves_norms_and_doubles_modes() {
        let f = wave_1d(64, 1.0, 5, Complex64::new(1.0, 2.0));
        let g = f.dilate2(0).unwrap();
        let b = g.effective_band(0, 1e-10).unwrap();
        assert_eq!(b, Band { lo: 10, hi: 10 });
        for p in [1.0, 2.0, 4.0, f64::INFINITY] {
            assert!((f.lp_norm(p) - g.lp_norm(p)).abs() < 1e-10);
        }
        let too_high = wave_1d(64, 1.0, 20, Complex64::new(1.0, 0.0));
        assert!(too_high.dilate2(0).is_err());
    }

    #[test]
    fn mode_index_roundtrip() {
        let f = SampledFunction::zeros_1d(10, 1.0);
        for idx in 0..10 {
            let k = f.mode_at(0, idx);
            assert_eq!(f.index_of_mode(0, k), Some(idx));
        }
        assert_eq!(f.index_of_mode(0, 5), None);
        assert_eq!(f.index_of_mode(0, -5), Some(5));
    }
}
