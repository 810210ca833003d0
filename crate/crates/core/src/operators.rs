//! Discrete bilinear multiplier operators and tile model sums.
//!
//! A bilinear multiplier acts on band-limited grid functions through the
//! frequency-side double sum
//! `h^(k) = sum_{k1 + k2 = k} m(xi_1, xi_2) f^(k1) g^(k2)`;
//! the implementation walks the working bands of both inputs and rejects
//! grids whose mode range cannot hold the output band, so aliasing never
//! silently occurs. The same contraction in two variables gives the
//! tensor evaluator for bi-parameter symbols.
//!
//! Three symbol families are built in: the signum prototype
//! `pi i sgn(xi_1 - beta xi_2)` of the directional bilinear Hilbert
//! transform, low-high paraproduct symbols assembled from the cutoff
//! family, and smooth one-scale kernel truncations given on the Fourier
//! side by `sgn(xi) rho(|xi|/2^j)`. The hybrid x/y symbol (signum in x,
//! paraproduct in y) has a fast evaluation path that projects in y and
//! applies the one-dimensional contraction row by row; the slow tensor
//! contraction stays available as an independent route.
//!
//! The model sum over a collection of product tri-tiles is
//! `T(f,g) = sum_s eps_s |R_s|^{-1/2} <f, phi_{s_1}> <g, phi_{s_2}> phi_{s_3}`
//! with separable wave packets; its trilinear form puts the third slot in
//! the conjugate-linear position, so `Lambda(f1,f2,f3) = <T(f1,f2), f3>`
//! holds exactly and the swap of slots 2 and 3 is a relabeling.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::grid::{ProductTriTile, TileCollection};
use crate::sampled::{Band, SampledFunction};
use crate::wavepacket::{
    exp2i, lp_project, smoothstep, valid_band_scales, BumpShape, LpFamily, ProjKind, WavePacket,
};

pub const BHT_SYMBOL_SCALE: f64 = std::f64::consts::PI;

/// Serializable description of a one-parameter bilinear symbol.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BilinearSymbol {
    /// `pi i sgn(xi_1 - xi_2)`, zero on the diagonal.
    Bht,
    /// `pi i sgn(xi_1 - beta xi_2)`; `beta = 0` is rejected as degenerate.
    BhtSlope { beta: f64 },
    /// `sum_j phi_{j-offset}(xi_1) psi_j(xi_2)` over the grid-valid scales.
    Paraproduct { offset: i32, sharpness: f64 },
    /// One-scale kernel truncation `K^_j(xi_1 - xi_2)`.
    KernelScale { scale: i32 },
}

/// A compiled symbol: plain function of the two input frequencies.
pub type SymbolFn = Box<dyn Fn(f64, f64) -> Complex64 + Send + Sync>;

fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

impl BilinearSymbol {
    /// Compile against a grid: paraproduct symbols need the valid scale
    /// range, which depends on the sample count and period.
    pub fn compile(&self, n: usize, period: f64) -> Result<SymbolFn, CoreError> {
        match self {
            BilinearSymbol::Bht => Ok(Box::new(move |x1, x2| {
                Complex64::new(0.0, BHT_SYMBOL_SCALE * sgn(x1 - x2))
            })),
            BilinearSymbol::BhtSlope { beta } => {
                if *beta == 0.0 {
                    return Err(CoreError::degenerate(
                        "slope 0 collapses the symbol to a product of one-variable operators",
                    ));
                }
                let beta = *beta;
                Ok(Box::new(move |x1, x2| {
                    Complex64::new(0.0, BHT_SYMBOL_SCALE * sgn(x1 - beta * x2))
                }))
            }
            BilinearSymbol::Paraproduct { offset, sharpness } => {
                let family = LpFamily::new(*sharpness)?;
                let scales = valid_band_scales(n, period, &family);
                if scales.is_empty() {
                    return Err(CoreError::scale_overflow(
                        "grid resolves no paraproduct band scale",
                    ));
                }
                let offset = *offset;
                Ok(Box::new(move |x1, x2| {
                    let mut acc = 0.0;
                    for &j in &scales {
                        acc += family.phi_scaled(j - offset, x1) * family.psi_scaled(j, x2);
                    }
                    Complex64::new(acc, 0.0)
                }))
            }
            BilinearSymbol::KernelScale { scale } => {
                let family = KernelFamily::standard();
                let j = *scale;
                Ok(Box::new(move |x1, x2| Complex64::new(family.khat(j, x1 - x2), 0.0)))
            }
        }
    }

    /// Scale list a paraproduct symbol compiles to on this grid.
    pub fn paraproduct_scales(&self, n: usize, period: f64) -> Result<Vec<i32>, CoreError> {
        match self {
            BilinearSymbol::Paraproduct { sharpness, .. } => {
                let family = LpFamily::new(*sharpness)?;
                Ok(valid_band_scales(n, period, &family))
            }
            _ => Err(CoreError::degenerate("not a paraproduct symbol")),
        }
    }
}

/// Working band of one axis; `None` means the function has no content
/// above the detection floor and the contraction may return zero early.
fn band_or_zero(f: &SampledFunction, axis: usize) -> Option<Band> {
    f.working_band(axis)
}

fn check_output_band(f: &SampledFunction, bands: &[Band]) -> Result<Band, CoreError> {
    let lo: i64 = bands.iter().map(|b| b.lo).sum();
    let hi: i64 = bands.iter().map(|b| b.hi).sum();
    if f.index_of_mode(0, lo).is_none() || f.index_of_mode(0, hi).is_none() {
        return Err(CoreError::band_overflow(format!(
            "output band [{lo}, {hi}] does not fit the mode range of {} samples",
            f.sizes()[0]
        )));
    }
    Ok(Band::new(lo, hi))
}

/// One-dimensional frequency-side contraction
/// `h^(k) = sum_{k1+k2=k} m(k1/L, k2/L) f^(k1) g^(k2)`.
pub fn apply_bilinear(
    f: &SampledFunction,
    g: &SampledFunction,
    symbol: &dyn Fn(f64, f64) -> Complex64,
) -> Result<SampledFunction, CoreError> {
    f.require_same_grid(g)?;
    if f.dim() != 1 {
        return Err(CoreError::grid_mismatch("one-dimensional contraction needs 1D inputs"));
    }
    let n = f.sizes()[0];
    let period = f.periods()[0];
    let (bf, bg) = match (band_or_zero(f, 0), band_or_zero(g, 0)) {
        (Some(a), Some(b)) => (a, b),
        _ => return Ok(SampledFunction::zeros_like(f)),
    };
    let out_band = check_output_band(f, &[bf, bg])?;
    let cf = f.coeffs();
    let cg = g.coeffs();
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for k1 in bf.lo..=bf.hi {
        let i1 = match f.index_of_mode(0, k1) {
            Some(i) => i,
            None => continue,
        };
        let a = cf[i1];
        if a == Complex64::new(0.0, 0.0) {
            continue;
        }
        for k2 in bg.lo..=bg.hi {
            let i2 = match g.index_of_mode(0, k2) {
                Some(i) => i,
                None => continue,
            };
            let b = cg[i2];
            if b == Complex64::new(0.0, 0.0) {
                continue;
            }
            let m = symbol(k1 as f64 / period, k2 as f64 / period);
            if m == Complex64::new(0.0, 0.0) {
                continue;
            }
            let io = f.index_of_mode(0, k1 + k2).expect("band checked");
            out[io] += m * a * b;
        }
    }
    let mut h = SampledFunction::from_coeffs_1d(n, period, out)?;
    h.set_band(0, Some(out_band));
    Ok(h)
}

/// Convenience: the signum prototype.
pub fn apply_bht(f: &SampledFunction, g: &SampledFunction) -> Result<SampledFunction, CoreError> {
    let sym = BilinearSymbol::Bht.compile(f.sizes()[0], f.periods()[0])?;
    apply_bilinear(f, g, &sym)
}

/// Paraproduct by its projection route: `sum_j P_{j-offset}^low f * P_j^band g`
/// over the grid-valid scales. The symbol route through [`apply_bilinear`]
/// must agree; keeping both is the point.
pub fn apply_paraproduct(
    f: &SampledFunction,
    g: &SampledFunction,
    family: &LpFamily,
    offset: i32,
) -> Result<SampledFunction, CoreError> {
    f.require_same_grid(g)?;
    if f.dim() != 1 {
        return Err(CoreError::grid_mismatch("projection paraproduct needs 1D inputs"));
    }
    let n = f.sizes()[0];
    let period = f.periods()[0];
    let scales = valid_band_scales(n, period, family);
    if scales.is_empty() {
        return Err(CoreError::scale_overflow("grid resolves no paraproduct band scale"));
    }
    let mut acc = SampledFunction::zeros_like(f);
    for &j in &scales {
        let low = lp_project(f, 0, j - offset, ProjKind::Low, family)?;
        let band = lp_project(g, 0, j, ProjKind::Band, family)?;
        let mut term = low.mul(&band)?;
        // The product band may exceed what the grid holds; reject rather
        // than alias.
        if let Some(b) = term.declared_band(0) {
            if f.index_of_mode(0, b.lo).is_none() || f.index_of_mode(0, b.hi).is_none() {
                return Err(CoreError::band_overflow(format!(
                    "scale {j} product band {b:?} exceeds the grid",
                )));
            }
        }
        term.set_band(0, None);
        acc.add_assign(&term)?;
    }
    Ok(acc)
}

/// Smooth one-scale kernel family, given on the Fourier side by
/// `K^_j(xi) = sgn(xi) rho(|xi| / 2^j)` with `rho` vanishing below 1/2
/// and equal to 1 above 1.
#[derive(Debug, Clone, Copy)]
pub struct KernelFamily {
    _private: (),
}

impl KernelFamily {
    pub fn standard() -> Self {
        KernelFamily { _private: () }
    }

    pub fn rho(&self, u: f64) -> f64 {
        smoothstep(2.0 * u - 1.0)
    }

    pub fn khat(&self, j: i32, xi: f64) -> f64 {
        sgn(xi) * self.rho(xi.abs() / exp2i(j))
    }

    /// Apply the one-scale piece as a bilinear operator with symbol
    /// `K^_j(xi_1 - xi_2)`.
    pub fn apply_scale(
        &self,
        j: i32,
        f: &SampledFunction,
        g: &SampledFunction,
    ) -> Result<SampledFunction, CoreError> {
        let sym = BilinearSymbol::KernelScale { scale: j }.compile(f.sizes()[0], f.periods()[0])?;
        apply_bilinear(f, g, &sym)
    }

    /// Discrete multiplier-smoothness constants
    /// `C_alpha = sup_{xi != 0} |xi|^alpha |D^alpha K^_j(xi)|`
    /// with centered differences on a lattice adapted to the scale:
    /// spacing `2^j / samples` over `0 < |xi| <= 2^{j+2}`. The exact
    /// dyadic invariance `K^_j(2^j u) = K^_0(u)` makes the values
    /// independent of `j`, which is the uniformity being measured.
    pub fn mikhlin_constants(&self, j: i32, samples: usize, alpha_max: u32) -> Vec<f64> {
        let h = exp2i(j) / samples as f64;
        let reach = 4 * samples as i64;
        let mut out = Vec::new();
        for alpha in 0..=alpha_max {
            let mut c: f64 = 0.0;
            for m in -reach..=reach {
                if m == 0 {
                    continue;
                }
                let xi = m as f64 * h;
                let d = match alpha {
                    0 => self.khat(j, xi),
                    1 => (self.khat(j, xi + h) - self.khat(j, xi - h)) / (2.0 * h),
                    2 => {
                        (self.khat(j, xi + h) - 2.0 * self.khat(j, xi) + self.khat(j, xi - h))
                            / (h * h)
                    }
                    _ => {
                        // Central difference of general order.
                        let mut acc = 0.0;
                        let a = alpha as i64;
                        for r in 0..=a {
                            let sign = if (a - r) % 2 == 0 { 1.0 } else { -1.0 };
                            let binom = binomial(a as u64, r as u64);
                            acc += sign * binom * self.khat(j, xi + (r as f64 - a as f64 / 2.0) * h);
                        }
                        acc / h.powi(alpha as i32)
                    }
                };
                c = c.max(xi.abs().powi(alpha as i32) * d.abs());
            }
            out.push(c);
        }
        out
    }
}

fn binomial(n: u64, k: u64) -> f64 {
    let mut acc = 1.0f64;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// Bi-parameter symbol: product of a symbol in the x frequencies and a
/// symbol in the y frequencies.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TensorSymbol {
    pub x: BilinearSymbol,
    pub y: BilinearSymbol,
}

pub type TensorSymbolFn = Box<dyn Fn(f64, f64, f64, f64) -> Complex64 + Send + Sync>;

impl TensorSymbol {
    pub fn double_bht() -> Self {
        TensorSymbol { x: BilinearSymbol::Bht, y: BilinearSymbol::Bht }
    }

    pub fn biparam_paraproduct(offset: i32, sharpness: f64) -> Self {
        TensorSymbol {
            x: BilinearSymbol::Paraproduct { offset, sharpness },
            y: BilinearSymbol::Paraproduct { offset, sharpness },
        }
    }

    /// The hybrid: signum in x, low-high paraproduct in y.
    pub fn bp(sharpness: f64) -> Self {
        TensorSymbol {
            x: BilinearSymbol::Bht,
            y: BilinearSymbol::Paraproduct { offset: 0, sharpness },
        }
    }

    pub fn bp_slope(beta: f64, sharpness: f64) -> Self {
        TensorSymbol {
            x: BilinearSymbol::BhtSlope { beta },
            y: BilinearSymbol::Paraproduct { offset: 0, sharpness },
        }
    }

    pub fn compile(
        &self,
        sizes: [usize; 2],
        periods: [f64; 2],
    ) -> Result<TensorSymbolFn, CoreError> {
        let mx = self.x.compile(sizes[0], periods[0])?;
        let my = self.y.compile(sizes[1], periods[1])?;
        Ok(Box::new(move |x1, x2, e1, e2| mx(x1, x2) * my(e1, e2)))
    }
}

const TENSOR_COST_CAP: u128 = 1 << 28;

/// Two-dimensional frequency-side contraction
/// `h^(k,l) = sum_{k1+k2=k} sum_{l1+l2=l} m(..) f^(k1,l1) g^(k2,l2)`.
/// Cost is the product of the four working band widths; grids beyond the
/// desk cap are rejected.
pub fn apply_tensor(
    f: &SampledFunction,
    g: &SampledFunction,
    symbol: &dyn Fn(f64, f64, f64, f64) -> Complex64,
) -> Result<SampledFunction, CoreError> {
    f.require_same_grid(g)?;
    if f.dim() != 2 {
        return Err(CoreError::grid_mismatch("tensor contraction needs 2D inputs"));
    }
    let [n0, n1] = f.sizes();
    let [l0, l1] = f.periods();
    let bands = (
        band_or_zero(f, 0),
        band_or_zero(f, 1),
        band_or_zero(g, 0),
        band_or_zero(g, 1),
    );
    let (bf0, bf1, bg0, bg1) = match bands {
        (Some(a), Some(b), Some(c), Some(d)) => (a, b, c, d),
        _ => return Ok(SampledFunction::zeros_like(f)),
    };
    let width = |b: &Band| (b.hi - b.lo + 1) as u128;
    let cost = width(&bf0) * width(&bf1) * width(&bg0) * width(&bg1);
    if cost > TENSOR_COST_CAP {
        return Err(CoreError::degenerate(format!(
            "tensor contraction cost {cost} exceeds the desk cap {TENSOR_COST_CAP}"
        )));
    }
    // Output band check on both axes.
    let lo0 = bf0.lo + bg0.lo;
    let hi0 = bf0.hi + bg0.hi;
    let lo1 = bf1.lo + bg1.lo;
    let hi1 = bf1.hi + bg1.hi;
    if f.index_of_mode(0, lo0).is_none()
        || f.index_of_mode(0, hi0).is_none()
        || f.index_of_mode(1, lo1).is_none()
        || f.index_of_mode(1, hi1).is_none()
    {
        return Err(CoreError::band_overflow(format!(
            "output bands [{lo0},{hi0}] x [{lo1},{hi1}] exceed the grid {n0} x {n1}"
        )));
    }
    let cf = f.coeffs();
    let cg = g.coeffs();
    let zero = Complex64::new(0.0, 0.0);
    let mut out = vec![zero; n0 * n1];
    for k1 in bf0.lo..=bf0.hi {
        let if0 = f.index_of_mode(0, k1).expect("band checked");
        for m1 in bf1.lo..=bf1.hi {
            let if1 = f.index_of_mode(1, m1).expect("band checked");
            let a = cf[if1 * n0 + if0];
            if a == zero {
                continue;
            }
            for k2 in bg0.lo..=bg0.hi {
                let ig0 = g.index_of_mode(0, k2).expect("band checked");
                for m2 in bg1.lo..=bg1.hi {
                    let ig1 = g.index_of_mode(1, m2).expect("band checked");
                    let b = cg[ig1 * n0 + ig0];
                    if b == zero {
                        continue;
                    }
                    let m = symbol(
                        k1 as f64 / l0,
                        k2 as f64 / l0,
                        m1 as f64 / l1,
                        m2 as f64 / l1,
                    );
                    if m == zero {
                        continue;
                    }
                    let io0 = f.index_of_mode(0, k1 + k2).expect("band checked");
                    let io1 = f.index_of_mode(1, m1 + m2).expect("band checked");
                    out[io1 * n0 + io0] += m * a * b;
                }
            }
        }
    }
    let mut h = SampledFunction::from_coeffs_2d(n0, n1, l0, l1, out)?;
    h.set_band(0, Some(Band::new(lo0, hi0)));
    h.set_band(1, Some(Band::new(lo1, hi1)));
    Ok(h)
}

/// Extract one y-row as a 1D function, stamping it with the whole
/// function's x working band: a row dominated by roundoff must not grow
/// a spurious full-width band of its own.
fn row_slice(
    f: &SampledFunction,
    i1: usize,
    x_band: Option<Band>,
) -> Result<SampledFunction, CoreError> {
    let [n0, _] = f.sizes();
    let data: Vec<Complex64> = (0..n0).map(|i0| f.value(i0, i1)).collect();
    let mut row = SampledFunction::new_1d(n0, f.periods()[0], data)?;
    row.set_band(0, x_band);
    Ok(row)
}

/// One scale of the hybrid operator by its fast route: project the first
/// input low and the second input band at scale `j` in y, then contract
/// with the signum symbol along x, row by row.
pub fn apply_bp_scale(
    f: &SampledFunction,
    g: &SampledFunction,
    j: i32,
    family: &LpFamily,
    x_symbol: &BilinearSymbol,
) -> Result<SampledFunction, CoreError> {
    f.require_same_grid(g)?;
    if f.dim() != 2 {
        return Err(CoreError::grid_mismatch("hybrid scale application needs 2D inputs"));
    }
    let low = lp_project(f, 1, j, ProjKind::Low, family)?;
    let band = lp_project(g, 1, j, ProjKind::Band, family)?;
    let [n0, n1] = f.sizes();
    let sym = x_symbol.compile(n0, f.periods()[0])?;
    let xb_low = low.working_band(0);
    let xb_band = band.working_band(0);
    let mut out = SampledFunction::zeros_like(f);
    if xb_low.is_none() || xb_band.is_none() {
        return Ok(out);
    }
    for i1 in 0..n1 {
        let fa = row_slice(&low, i1, xb_low)?;
        let fb = row_slice(&band, i1, xb_band)?;
        let row = apply_bilinear(&fa, &fb, &sym)?;
        for i0 in 0..n0 {
            *out.value_mut(i0, i1) = row.value(i0, 0);
        }
    }
    Ok(out)
}

/// Full hybrid operator: sum of the one-scale pieces over every y band
/// scale the grid resolves. Matches the tensor route with the
/// [`TensorSymbol::bp`] symbol.
pub fn apply_bp(
    f: &SampledFunction,
    g: &SampledFunction,
    family: &LpFamily,
    x_symbol: &BilinearSymbol,
) -> Result<SampledFunction, CoreError> {
    let scales = valid_band_scales(f.sizes()[1], f.periods()[1], family);
    if scales.is_empty() {
        return Err(CoreError::scale_overflow("grid resolves no y band scale"));
    }
    let mut acc = SampledFunction::zeros_like(f);
    for &j in &scales {
        let term = apply_bp_scale(f, g, j, family, x_symbol)?;
        acc.add_assign(&term)?;
    }
    Ok(acc)
}

const GL12_NODES: [f64; 6] = [
    0.125233408511469,
    0.367831498998180,
    0.587317954286617,
    0.769902674194305,
    0.904117256370475,
    0.981560634246719,
];
const GL12_WEIGHTS: [f64; 6] = [
    0.249147045813403,
    0.233492536538355,
    0.203167426723066,
    0.160078328543346,
    0.106939325995318,
    0.047175336386512,
];

/// Gauss-Legendre quadrature of `f` over `[a, b]` split into `panels`
/// equal panels with 12 nodes each.
pub fn gauss_legendre(a: f64, b: f64, panels: usize, mut f: impl FnMut(f64) -> Complex64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    let hstep = (b - a) / panels as f64;
    for p in 0..panels {
        let lo = a + p as f64 * hstep;
        let mid = lo + hstep / 2.0;
        let half = hstep / 2.0;
        for i in 0..6 {
            let (node, w) = (GL12_NODES[i], GL12_WEIGHTS[i]);
            acc += f(mid + half * node) * (w * half);
            acc += f(mid - half * node) * (w * half);
        }
    }
    acc
}

/// Principal-value reference for the signum prototype on the torus:
/// `p.v. integral f(z+t) g(z-t) (pi/L) cot(pi t / L) dt` evaluated by
/// symmetrizing the integrand (which removes the singularity) and
/// composite Gauss-Legendre quadrature, with the inputs evaluated
/// off-grid through their trigonometric interpolants. This route never
/// touches the frequency-side contraction.
pub fn bht_quadrature_reference(
    f: &SampledFunction,
    g: &SampledFunction,
    points: &[f64],
    panels: usize,
) -> Result<Vec<Complex64>, CoreError> {
    f.require_same_grid(g)?;
    if f.dim() != 1 {
        return Err(CoreError::grid_mismatch("quadrature reference needs 1D inputs"));
    }
    let period = f.periods()[0];
    let fi = f.interpolant()?;
    let gi = g.interpolant()?;
    let mut out = Vec::with_capacity(points.len());
    for &z in points {
        let integrand = |t: f64| -> Complex64 {
            let forward = fi.eval(z + t) * gi.eval(z - t);
            let backward = fi.eval(z - t) * gi.eval(z + t);
            let kernel = (std::f64::consts::PI / period)
                / (std::f64::consts::PI * t / period).tan();
            (forward - backward) * kernel
        };
        out.push(gauss_legendre(0.0, period / 2.0, panels, integrand));
    }
    Ok(out)
}

/// Random sign pattern for model sums, reproducible from a seed.
pub fn random_signs(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 }).collect()
}

/// Model sum over a collection of product tri-tiles with separable wave
/// packets.
pub struct ModelSum {
    tiles: Vec<ProductTriTile>,
    signs: Vec<f64>,
    x_packets: Vec<[WavePacket; 3]>,
    y_packets: Vec<[WavePacket; 3]>,
    weights: Vec<f64>,
    sizes: [usize; 2],
    periods: [f64; 2],
}

impl ModelSum {
    /// Build packets for every tile of the collection on the given grid.
    /// `signs`, when present, must hold one value of modulus 1 per tile.
    pub fn build(
        collection: &TileCollection,
        sizes: [usize; 2],
        periods: [f64; 2],
        shape: &BumpShape,
        signs: Option<Vec<f64>>,
    ) -> Result<Self, CoreError> {
        if collection.is_empty() {
            return Err(CoreError::degenerate("empty tile collection"));
        }
        let signs = match signs {
            Some(s) => {
                if s.len() != collection.len() {
                    return Err(CoreError::degenerate(format!(
                        "{} signs for {} tiles",
                        s.len(),
                        collection.len()
                    )));
                }
                if s.iter().any(|v| (v.abs() - 1.0).abs() > 1e-12) {
                    return Err(CoreError::degenerate("signs must have modulus 1"));
                }
                s
            }
            None => vec![1.0; collection.len()],
        };
        let mut x_packets = Vec::with_capacity(collection.len());
        let mut y_packets = Vec::with_capacity(collection.len());
        let mut weights = Vec::with_capacity(collection.len());
        for s in &collection.tiles {
            let bx: [WavePacket; 3] = [
                WavePacket::build(s.x.component(0), sizes[0], periods[0], shape)?,
                WavePacket::build(s.x.component(1), sizes[0], periods[0], shape)?,
                WavePacket::build(s.x.component(2), sizes[0], periods[0], shape)?,
            ];
            let py: [WavePacket; 3] = [
                WavePacket::build(s.y.component(0), sizes[1], periods[1], shape)?,
                WavePacket::build(s.y.component(1), sizes[1], periods[1], shape)?,
                WavePacket::build(s.y.component(2), sizes[1], periods[1], shape)?,
            ];
            let area = s
                .rect_area()
                .to_f64_checked()
                .ok_or_else(|| CoreError::geometry("tile rectangle area overflows f64"))?;
            weights.push(1.0 / area.sqrt());
            x_packets.push(bx);
            y_packets.push(py);
        }
        Ok(ModelSum {
            tiles: collection.tiles.clone(),
            signs,
            x_packets,
            y_packets,
            weights,
            sizes,
            periods,
        })
    }

    pub fn len(&self) -> usize {
        self.tiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tiles.is_empty()
    }

    pub fn tiles(&self) -> &[ProductTriTile] {
        &self.tiles
    }

    pub fn sizes(&self) -> [usize; 2] {
        self.sizes
    }

    pub fn periods(&self) -> [f64; 2] {
        self.periods
    }

    pub fn weight(&self, idx: usize) -> f64 {
        self.weights[idx]
    }

    pub fn sign(&self, idx: usize) -> f64 {
        self.signs[idx]
    }

    pub fn x_packet(&self, idx: usize, slot: usize) -> &WavePacket {
        &self.x_packets[idx][slot]
    }

    pub fn y_packet(&self, idx: usize, slot: usize) -> &WavePacket {
        &self.y_packets[idx][slot]
    }

    /// The full separable packet of one slot as a 2D function.
    pub fn packet_2d(&self, idx: usize, slot: usize) -> Result<SampledFunction, CoreError> {
        crate::wavepacket::product_packet(&self.x_packets[idx][slot], &self.y_packets[idx][slot])
    }

    fn check_grid(&self, f: &SampledFunction) -> Result<(), CoreError> {
        if f.dim() != 2 || f.sizes() != self.sizes || f.periods() != self.periods {
            return Err(CoreError::grid_mismatch(format!(
                "model sum grid {:?}/{:?} vs input {:?}/{:?}",
                self.sizes,
                self.periods,
                f.sizes(),
                f.periods()
            )));
        }
        Ok(())
    }

    /// `<f, phi_x (x) phi_y>` by row contraction; cell measure included.
    fn inner_sep(&self, f: &SampledFunction, px: &WavePacket, py: &WavePacket) -> Complex64 {
        let [n0, n1] = self.sizes;
        let fx = px.function();
        let fy = py.function();
        let mut acc = Complex64::new(0.0, 0.0);
        for i1 in 0..n1 {
            let mut row = Complex64::new(0.0, 0.0);
            for i0 in 0..n0 {
                row += f.value(i0, i1) * fx.value(i0, 0).conj();
            }
            acc += row * fy.value(i1, 0).conj();
        }
        acc * (self.periods[0] / n0 as f64) * (self.periods[1] / n1 as f64)
    }

    /// Packet coefficients `<f, phi_{s_slot}>` for every tile.
    pub fn coefficients(
        &self,
        f: &SampledFunction,
        slot: usize,
    ) -> Result<Vec<Complex64>, CoreError> {
        self.check_grid(f)?;
        Ok((0..self.len())
            .map(|i| self.inner_sep(f, &self.x_packets[i][slot], &self.y_packets[i][slot]))
            .collect())
    }

    /// `T(f, g) = sum_s eps_s |R_s|^{-1/2} <f, phi_{s_1}> <g, phi_{s_2}> phi_{s_3}`.
    pub fn apply(
        &self,
        f: &SampledFunction,
        g: &SampledFunction,
    ) -> Result<SampledFunction, CoreError> {
        self.check_grid(f)?;
        self.check_grid(g)?;
        let [n0, n1] = self.sizes;
        let mut out = SampledFunction::zeros_2d(n0, n1, self.periods[0], self.periods[1]);
        for idx in 0..self.len() {
            let u = self.inner_sep(f, &self.x_packets[idx][0], &self.y_packets[idx][0]);
            let v = self.inner_sep(g, &self.x_packets[idx][1], &self.y_packets[idx][1]);
            let c = u * v * (self.signs[idx] * self.weights[idx]);
            if c == Complex64::new(0.0, 0.0) {
                continue;
            }
            let px = self.x_packets[idx][2].function();
            let py = self.y_packets[idx][2].function();
            for i1 in 0..n1 {
                let cy = c * py.value(i1, 0);
                for i0 in 0..n0 {
                    *out.value_mut(i0, i1) += cy * px.value(i0, 0);
                }
            }
        }
        Ok(out)
    }

    /// Trilinear form with the third slot conjugate-linear:
    /// `Lambda(f1,f2,f3) = sum_s eps_s |R_s|^{-1/2}
    ///  <f1, phi_{s_1}> <f2, phi_{s_2}> <phi_{s_3}, f3>`,
    /// so that `Lambda(f1,f2,f3) = <T(f1,f2), f3>` exactly.
    pub fn trilinear(
        &self,
        f1: &SampledFunction,
        f2: &SampledFunction,
        f3: &SampledFunction,
    ) -> Result<Complex64, CoreError> {
        self.check_grid(f1)?;
        self.check_grid(f2)?;
        self.check_grid(f3)?;
        let mut acc = Complex64::new(0.0, 0.0);
        for idx in 0..self.len() {
            let u = self.inner_sep(f1, &self.x_packets[idx][0], &self.y_packets[idx][0]);
            let v = self.inner_sep(f2, &self.x_packets[idx][1], &self.y_packets[idx][1]);
            // <phi_3, f3> = conj(<f3, phi_3>).
            let w = self.inner_sep(f3, &self.x_packets[idx][2], &self.y_packets[idx][2]).conj();
            acc += u * v * w * (self.signs[idx] * self.weights[idx]);
        }
        Ok(acc)
    }

    /// The collection with packet slots 2 and 3 exchanged in every tile.
    pub fn swapped_23(&self) -> ModelSum {
        let swap_tri = |t: &crate::grid::TriTile| {
            crate::grid::TriTile::new([
                t.component(0).clone(),
                t.component(2).clone(),
                t.component(1).clone(),
            ])
            .expect("same spatial interval")
        };
        ModelSum {
            tiles: self
                .tiles
                .iter()
                .map(|s| ProductTriTile::new(swap_tri(&s.x), swap_tri(&s.y)))
                .collect(),
            signs: self.signs.clone(),
            x_packets: self
                .x_packets
                .iter()
                .map(|p| [p[0].clone(), p[2].clone(), p[1].clone()])
                .collect(),
            y_packets: self
                .y_packets
                .iter()
                .map(|p| [p[0].clone(), p[2].clone(), p[1].clone()])
                .collect(),
            weights: self.weights.clone(),
            sizes: self.sizes,
            periods: self.periods,
        }
    }
}

trait RatToF64 {
    fn to_f64_checked(&self) -> Option<f64>;
}

impl RatToF64 for crate::grid::Q {
    fn to_f64_checked(&self) -> Option<f64> {
        use num_traits::ToPrimitive;
        self.to_f64().filter(|v| v.is_finite() && *v > 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{DyadicInterval, ProductTriTile, Tile, TileCollection, TriTile};
    use crate::sampled::sample_1d;
    use std::f64::consts::TAU;

    fn wave(n: usize, period: f64, k: i64) -> SampledFunction {
        sample_1d(n, period, |x| Complex64::from_polar(1.0, TAU * k as f64 * x / period)).unwrap()
    }

    #[test]
    fn signum_prototype_on_pure_modes() {
        let n = 64;
        let f = wave(n, 1.0, 3);
        let g = wave(n, 1.0, -1);
        let h = apply_bht(&f, &g).unwrap();
        // pi i sgn(3 - (-1)) e^{2 pi i 2 x}.
        let expect = sample_1d(n, 1.0, |x| {
            Complex64::new(0.0, std::f64::consts::PI) * Complex64::from_polar(1.0, TAU * 2.0 * x)
        })
        .unwrap();
        assert!(h.sub(&expect).unwrap().lp_norm(f64::INFINITY) < 1e-12);
        // Diagonal pair: symbol vanishes.
        let d = apply_bht(&wave(n, 1.0, 2), &wave(n, 1.0, 2)).unwrap();
        assert!(d.lp_norm(f64::INFINITY) < 1e-12);
    }

    #[test]
    fn contraction_rejects_aliasing() {
        let n = 32;
        let f = wave(n, 1.0, 12);
        let g = wave(n, 1.0, 13);
        // 12 + 13 = 25 > 15 (largest representable signed mode).
        assert!(apply_bht(&f, &g).is_err());
    }

    #[test]
    fn quadrature_kernel_reproduces_signum_on_exponentials() {
        // p.v. integral of e^{2 pi i n t / L} (pi/L) cot(pi t / L) over a
        // period equals pi i sgn(n): run the quadrature against constant
        // g = 1 and f a pure mode, evaluated at z = 0.
        let n = 128;
        let period = 2.0;
        for k in [-3i64, -1, 1, 2, 5] {
            let f = wave(n, period, k);
            let g = sample_1d(n, period, |_| Complex64::new(1.0, 0.0)).unwrap();
            let vals = bht_quadrature_reference(&f, &g, &[0.0], 48).unwrap();
            let expect = Complex64::new(0.0, std::f64::consts::PI * sgn(k as f64));
            assert!(
                (vals[0] - expect).norm() < 1e-10,
                "mode {k}: got {:?}, want {:?}",
                vals[0],
                expect
            );
        }
    }

    #[test]
    fn contraction_matches_quadrature_on_seeded_pair() {
        let n = 256;
        let period = 1.0;
        let f = sample_1d(n, period, |x| {
            Complex64::new((TAU * 3.0 * x).cos(), 0.4 * (TAU * 7.0 * x).sin())
                + Complex64::new(0.2 * (TAU * 11.0 * x).sin(), 0.0)
        })
        .unwrap();
        let g = sample_1d(n, period, |x| {
            Complex64::new((TAU * 2.0 * x).sin(), -0.3 * (TAU * 5.0 * x).cos())
        })
        .unwrap();
        let h = apply_bht(&f, &g).unwrap();
        let points: Vec<f64> = (0..8).map(|i| i as f64 / 8.0).collect();
        let reference = bht_quadrature_reference(&f, &g, &points, 64).unwrap();
        for (i, &z) in points.iter().enumerate() {
            let idx = (z * n as f64 / period).round() as usize % n;
            let direct = h.value(idx, 0);
            assert!(
                (direct - reference[i]).norm() < 1e-8,
                "z = {z}: contraction {direct:?} vs quadrature {:?}",
                reference[i]
            );
        }
    }

    #[test]
    fn paraproduct_routes_agree() {
        let n = 256;
        let period = 1.0;
        let family = LpFamily::new(0.05).unwrap();
        let f = sample_1d(n, period, |x| {
            Complex64::new((TAU * x).cos() + 0.5 * (TAU * 9.0 * x).cos(), (TAU * 4.0 * x).sin())
        })
        .unwrap();
        let g = sample_1d(n, period, |x| {
            Complex64::new((TAU * 6.0 * x).sin(), 0.2 * (TAU * 17.0 * x).cos())
        })
        .unwrap();
        let via_projections = apply_paraproduct(&f, &g, &family, 3).unwrap();
        let sym = BilinearSymbol::Paraproduct { offset: 3, sharpness: 0.05 }
            .compile(n, period)
            .unwrap();
        let via_symbol = apply_bilinear(&f, &g, &sym).unwrap();
        let diff = via_projections.sub(&via_symbol).unwrap().lp_norm(f64::INFINITY);
        assert!(diff < 1e-10, "routes differ by {diff}");
    }

    #[test]
    fn paraproduct_annihilates_constant_second_input() {
        let n = 128;
        let family = LpFamily::new(0.05).unwrap();
        let f = sample_1d(n, 1.0, |x| Complex64::new((TAU * 5.0 * x).cos(), 0.0)).unwrap();
        let g = sample_1d(n, 1.0, |_| Complex64::new(2.5, 0.0)).unwrap();
        let h = apply_paraproduct(&f, &g, &family, 3).unwrap();
        assert!(h.lp_norm(f64::INFINITY) < 1e-13);
    }

    #[test]
    fn kernel_scale_matches_signum_below_transition() {
        // For working bands inside rho = 1, the one-scale piece equals
        // the signum prototype divided by pi i.
        let n = 128;
        let fam = KernelFamily::standard();
        let f = wave(n, 1.0, 9);
        let g = wave(n, 1.0, 2);
        // xi_1 - xi_2 = 7; with j = 0: rho(7) = 1.
        let one_scale = fam.apply_scale(0, &f, &g).unwrap();
        let bht = apply_bht(&f, &g).unwrap();
        let mut scaled = bht.clone();
        scaled.scale(Complex64::new(0.0, -1.0 / std::f64::consts::PI));
        assert!(one_scale.sub(&scaled).unwrap().lp_norm(f64::INFINITY) < 1e-12);
    }

    #[test]
    fn kernel_symbol_is_odd_and_saturates() {
        let fam = KernelFamily::standard();
        assert_eq!(fam.khat(2, 8.0), 1.0);
        assert_eq!(fam.khat(2, -8.0), -1.0);
        assert_eq!(fam.khat(2, 1.0), 0.0); // |xi|/4 = 1/4 < 1/2
        let mid = fam.khat(2, 3.0); // 3/4 inside the transition
        assert!(mid > 0.0 && mid < 1.0);
    }

    #[test]
    fn mikhlin_constants_uniform_across_scales() {
        let fam = KernelFamily::standard();
        let reports: Vec<Vec<f64>> =
            [-3, 0, 2, 7, 20].iter().map(|&j| fam.mikhlin_constants(j, 128, 2)).collect();
        for alpha in 0..3 {
            let vals: Vec<f64> = reports.iter().map(|r| r[alpha]).collect();
            let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = vals.iter().cloned().fold(0.0f64, f64::max);
            assert!(hi.is_finite() && hi > 0.0);
            // Power-of-two lattice spacing makes the dyadic invariance
            // exact in floating point as well.
            assert!(
                hi / lo < 1.0 + 1e-9,
                "alpha {alpha}: constants {vals:?} not uniform"
            );
        }
    }

    fn wave2(n: [usize; 2], l: [f64; 2], k: i64, m: i64) -> SampledFunction {
        crate::sampled::sample_2d(n[0], n[1], l[0], l[1], |x, y| {
            Complex64::from_polar(1.0, TAU * (k as f64 * x / l[0] + m as f64 * y / l[1]))
        })
        .unwrap()
    }

    #[test]
    fn double_signum_tensorizes() {
        // T(a (x) b, c (x) d) = B(a,c) (x) B(b,d), evaluated through
        // different code paths.
        let n = [32usize, 32usize];
        let l = [1.0, 1.0];
        let (ka, ma) = (3i64, -2i64);
        let (kc, mc) = (-1i64, 4i64);
        let f2 = wave2(n, l, ka, ma);
        let g2 = wave2(n, l, kc, mc);
        let sym = TensorSymbol::double_bht().compile(n, l).unwrap();
        let lhs = apply_tensor(&f2, &g2, &sym).unwrap();
        let bx = apply_bht(&wave(n[0], l[0], ka), &wave(n[0], l[0], kc)).unwrap();
        let by = apply_bht(&wave(n[1], l[1], ma), &wave(n[1], l[1], mc)).unwrap();
        for i1 in 0..n[1] {
            for i0 in 0..n[0] {
                let want = bx.value(i0, 0) * by.value(i1, 0);
                let got = lhs.value(i0, i1);
                assert!((want - got).norm() < 1e-8, "at ({i0},{i1})");
            }
        }
    }

    #[test]
    fn hybrid_rowwise_matches_tensor_route() {
        let n = [32usize, 32usize];
        let l = [1.0, 1.0];
        let family = LpFamily::new(0.05).unwrap();
        let f = crate::sampled::sample_2d(n[0], n[1], l[0], l[1], |x, y| {
            Complex64::new(
                (TAU * 3.0 * x).cos() * (TAU * 2.0 * y).cos(),
                0.5 * (TAU * x).sin() * (TAU * 5.0 * y).cos(),
            )
        })
        .unwrap();
        let g = crate::sampled::sample_2d(n[0], n[1], l[0], l[1], |x, y| {
            Complex64::new(
                (TAU * 2.0 * x).sin() * (TAU * 6.0 * y).cos(),
                0.3 * (TAU * 4.0 * x).cos() * (TAU * 3.0 * y).sin(),
            )
        })
        .unwrap();
        let fast = apply_bp(&f, &g, &family, &BilinearSymbol::Bht).unwrap();
        let sym = TensorSymbol::bp(0.05).compile(n, l).unwrap();
        let slow = apply_tensor(&f, &g, &sym).unwrap();
        let diff = fast.sub(&slow).unwrap().lp_norm(f64::INFINITY);
        let scale = slow.lp_norm(f64::INFINITY).max(1e-30);
        assert!(diff / scale < 1e-9, "relative gap {}", diff / scale);
    }

    #[test]
    fn slope_zero_is_rejected_and_slope_one_matches() {
        assert!(BilinearSymbol::BhtSlope { beta: 0.0 }.compile(64, 1.0).is_err());
        let s1 = BilinearSymbol::BhtSlope { beta: 1.0 }.compile(64, 1.0).unwrap();
        let s2 = BilinearSymbol::Bht.compile(64, 1.0).unwrap();
        for (a, b) in [(3.0, 1.0), (-2.0, 5.0), (0.0, 0.0)] {
            assert_eq!(s1(a, b), s2(a, b));
        }
    }

    #[test]
    fn symbol_descriptions_roundtrip_as_json() {
        let syms = vec![
            BilinearSymbol::Bht,
            BilinearSymbol::BhtSlope { beta: 0.5 },
            BilinearSymbol::Paraproduct { offset: 3, sharpness: 0.05 },
            BilinearSymbol::KernelScale { scale: -2 },
        ];
        for s in syms {
            let text = serde_json::to_string(&s).unwrap();
            let back: BilinearSymbol = serde_json::from_str(&text).unwrap();
            assert_eq!(back, s);
        }
        let t = TensorSymbol::bp_slope(2.0, 0.05);
        let text = serde_json::to_string(&t).unwrap();
        assert_eq!(serde_json::from_str::<TensorSymbol>(&text).unwrap(), t);
    }

    fn singleton_collection() -> TileCollection {
        let x_sp = DyadicInterval::unshifted(-2, 1); // [1/4, 1/2)
        let x = TriTile::new([
            Tile::new(x_sp.clone(), DyadicInterval::unshifted(2, 2)).unwrap(), // [8,12)
            Tile::new(x_sp.clone(), DyadicInterval::unshifted(2, 3)).unwrap(), // [12,16)
            Tile::new(x_sp, DyadicInterval::unshifted(2, 4)).unwrap(),         // [16,20)
        ])
        .unwrap();
        let y_sp = DyadicInterval::unshifted(-2, 0);
        let y = TriTile::new([
            Tile::new(y_sp.clone(), DyadicInterval::unshifted(2, 0)).unwrap(), // overlapping
            Tile::new(y_sp.clone(), DyadicInterval::unshifted(2, 1)).unwrap(), // [4,8)
            Tile::new(y_sp, DyadicInterval::unshifted(2, 1)).unwrap(),
        ])
        .unwrap();
        TileCollection::new(vec![ProductTriTile::new(x, y)])
    }

    #[test]
    fn singleton_trilinear_value_is_inverse_root_area() {
        let c = singleton_collection();
        let ms =
            ModelSum::build(&c, [128, 128], [1.0, 1.0], &BumpShape::standard(), None).unwrap();
        let f1 = ms.packet_2d(0, 0).unwrap();
        let f2 = ms.packet_2d(0, 1).unwrap();
        let f3 = ms.packet_2d(0, 2).unwrap();
        let lam = ms.trilinear(&f1, &f2, &f3).unwrap();
        // |R| = (1/4)(1/4) = 1/16, so Lambda = 4 for unit packets.
        assert!((lam - Complex64::new(4.0, 0.0)).norm() < 1e-9, "got {lam:?}");
    }

    #[test]
    fn trilinear_equals_pairing_with_apply() {
        let c = singleton_collection();
        let mut tiles = c.tiles.clone();
        // Add a second tile at another position.
        let x_sp = DyadicInterval::unshifted(-2, 2);
        let x = TriTile::new([
            Tile::new(x_sp.clone(), DyadicInterval::unshifted(2, 2)).unwrap(),
            Tile::new(x_sp.clone(), DyadicInterval::unshifted(2, 3)).unwrap(),
            Tile::new(x_sp, DyadicInterval::unshifted(2, 4)).unwrap(),
        ])
        .unwrap();
        let y_sp = DyadicInterval::unshifted(-2, 3);
        let y = TriTile::new([
            Tile::new(y_sp.clone(), DyadicInterval::unshifted(2, 1)).unwrap(),
            Tile::new(y_sp.clone(), DyadicInterval::unshifted(2, 1)).unwrap(),
            Tile::new(y_sp, DyadicInterval::unshifted(2, 1)).unwrap(),
        ])
        .unwrap();
        tiles.push(ProductTriTile::new(x, y));
        let collection = TileCollection::new(tiles);
        let signs = random_signs(collection.len(), 7);
        let ms = ModelSum::build(
            &collection,
            [128, 128],
            [1.0, 1.0],
            &BumpShape::standard(),
            Some(signs),
        )
        .unwrap();
        let f1 = crate::sampled::sample_2d(128, 128, 1.0, 1.0, |x, y| {
            Complex64::new((TAU * 10.0 * x).cos() * (TAU * 2.0 * y).cos(), (TAU * 14.0 * x).sin())
        })
        .unwrap();
        let f2 = crate::sampled::sample_2d(128, 128, 1.0, 1.0, |x, y| {
            Complex64::new((TAU * 13.0 * x).sin(), 0.7 * (TAU * 5.0 * y).cos())
        })
        .unwrap();
        let f3 = crate::sampled::sample_2d(128, 128, 1.0, 1.0, |x, y| {
            Complex64::new((TAU * 17.0 * x).cos(), (TAU * 6.0 * y).sin() * (TAU * x).cos())
        })
        .unwrap();
        let lam = ms.trilinear(&f1, &f2, &f3).unwrap();
        let paired = ms.apply(&f1, &f2).unwrap().inner(&f3).unwrap();
        assert!(
            (lam - paired).norm() <= 1e-10 * (1.0 + lam.norm()),
            "trilinear {lam:?} vs pairing {paired:?}"
        );
    }

    #[test]
    fn swap_of_slots_two_three_is_a_relabeling() {
        let c = singleton_collection();
        let ms =
            ModelSum::build(&c, [128, 128], [1.0, 1.0], &BumpShape::standard(), None).unwrap();
        let swapped = ms.swapped_23();
        let f1 = ms.packet_2d(0, 0).unwrap();
        let f2 = crate::sampled::sample_2d(128, 128, 1.0, 1.0, |x, y| {
            Complex64::new((TAU * 12.0 * x).cos(), (TAU * 5.0 * y).sin())
        })
        .unwrap();
        let f3 = crate::sampled::sample_2d(128, 128, 1.0, 1.0, |x, y| {
            Complex64::new((TAU * 15.0 * x).sin(), (TAU * 6.0 * y).cos())
        })
        .unwrap();
        // Relabeling identity: Lambda_{S'}(f1, f3, f2) has terms
        // u conj(v w) when Lambda_S terms are u v w with
        // v = <f2, phi_2>, w = <phi_3, f3>.
        let u = ms.coefficients(&f1, 0).unwrap()[0];
        let v = ms.coefficients(&f2, 1).unwrap()[0];
        let w = ms.coefficients(&f3, 2).unwrap()[0].conj();
        let direct = swapped.trilinear(&f1, &f3, &f2).unwrap();
        let relabeled = u * (v * w).conj() * ms.weight(0) * ms.sign(0);
        assert!((direct - relabeled).norm() < 1e-10, "{direct:?} vs {relabeled:?}");
        // When slots 2 and 3 carry the same packet, the swap leaves the
        // collection unchanged and the form is symmetric under exchanging
        // (f2, f3) with conjugation.
        let y_equal = ms.y_packet(0, 1).function().sub(ms.y_packet(0, 2).function());
        assert!(y_equal.unwrap().lp_norm(f64::INFINITY) < 1e-12);
    }

    #[test]
    fn model_sum_rejects_mismatched_grids() {
        let c = singleton_collection();
        let ms =
            ModelSum::build(&c, [128, 128], [1.0, 1.0], &BumpShape::standard(), None).unwrap();
        let wrong = crate::sampled::sample_2d(64, 64, 1.0, 1.0, |_, _| Complex64::new(1.0, 0.0))
            .unwrap();
        assert!(ms.apply(&wrong, &wrong).is_err());
        let bad_signs = ModelSum::build(
            &c,
            [128, 128],
            [1.0, 1.0],
            &BumpShape::standard(),
            Some(vec![0.5]),
        );
        assert!(bad_signs.is_err());
    }
}

