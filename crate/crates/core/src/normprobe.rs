//! Empirical operator-norm probing.
//!
//! This module measures how large the restricted ratio
//! `||Op(f, g)||_r / (||f||_p ||g||_q)` can get over a dictionary of
//! deterministic test functions, and how that maximum moves as the grid is
//! refined. A bounded operator produces ratios that level off; a genuinely
//! unbounded one produces ratios that keep climbing. Neither behaviour is a
//! proof — the reported values are lower bounds on the operator norm obtained
//! from finitely many candidates — but the growth/stability classification is
//! a falsifiable experiment: "growing" means the best ratio at least
//! quadrupled monotonically across the last three grid doublings, "stable"
//! means it moved by at most a factor of two.
//!
//! Three layers:
//!
//! * **Mixed norms** ([`MixedNormSpec`], [`mixed_norm`]): successive
//!   `L^p`-type norms applied innermost first, covering plain `L^p`, the
//!   sequence-space forms `L^p(l^R)` and `L^p(l^inf)`, and unit-ball /
//!   indicator-domination membership checks. Quadrature is the plain Riemann
//!   sum, which is spectrally accurate for band-limited integrands.
//! * **Test families** ([`TestFamily`], [`generate_test_function`]):
//!   reproducible bump, chirp, random-trigonometric and smoothed-indicator
//!   profiles, all band-limited to an alias-safe radius so that bilinear
//!   contractions never overflow the grid's mode range.
//! * **Probes** ([`probe_ratio`], [`probe_vector_valued`]): per-level
//!   candidate sweeps (evaluated in parallel, reduced in a fixed order) plus
//!   a seeded local search around the best candidate, with the vector-valued
//!   variant gated by the exact exponent-region arithmetic from
//!   [`crate::regions`].

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use crate::error::CoreError;
use crate::grid::{q_ratio, Q};
use crate::operators::{
    apply_bht, apply_bp, apply_bp_scale, apply_paraproduct, apply_tensor, BilinearSymbol,
    TensorSymbol,
};
use crate::regions::{ar_closed_form_violations, region_membership, ExponentTriple, RegionId};
use crate::sampled::{Band, SampledFunction};
use crate::wavepacket::{smoothstep, valid_band_scales, LpFamily};

/// Cutoff sharpness used by every probe that needs a projection family.
pub const PROBE_SHARPNESS: f64 = 0.05;

fn czero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

fn unit_phase(theta: f64) -> Complex64 {
    Complex64::from_polar(1.0, theta)
}

// ---------------------------------------------------------------------------
// Norm exponents and mixed norms
// ---------------------------------------------------------------------------

/// One exponent slot of a mixed norm: a finite `p` or the essential
/// supremum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormExponent {
    Finite(f64),
    Infinity,
}

impl NormExponent {
    /// The slot as a plain float, with the supremum mapped to `f64::INFINITY`.
    pub fn as_f64(&self) -> f64 {
        match self {
            NormExponent::Finite(p) => *p,
            NormExponent::Infinity => f64::INFINITY,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, NormExponent::Finite(_))
    }

    /// Mixed-norm slots must be honest norm exponents: finite values in
    /// `[1, inf)` or the supremum.
    pub fn validate(&self) -> Result<(), CoreError> {
        match self {
            NormExponent::Finite(p) if p.is_finite() && *p >= 1.0 => Ok(()),
            NormExponent::Finite(p) => Err(CoreError::exponent(format!(
                "norm exponent {p} is outside [1, inf]"
            ))),
            NormExponent::Infinity => Ok(()),
        }
    }
}

impl fmt::Display for NormExponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NormExponent::Finite(p) => write!(f, "{p}"),
            NormExponent::Infinity => write!(f, "inf"),
        }
    }
}

impl FromStr for NormExponent {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self, CoreError> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("inf") || t.eq_ignore_ascii_case("infinity") || t == "oo" {
            return Ok(NormExponent::Infinity);
        }
        let p: f64 = t
            .parse()
            .map_err(|_| CoreError::parse(format!("cannot read norm exponent from {s:?}")))?;
        Ok(NormExponent::Finite(p))
    }
}

impl Serialize for NormExponent {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            NormExponent::Finite(p) => s.serialize_f64(*p),
            NormExponent::Infinity => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for NormExponent {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Word(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(x) => Ok(NormExponent::Finite(x)),
            Raw::Word(w) => w.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// A successive-norm specification, slots listed innermost first.
///
/// One slot is a plain Lebesgue norm of a single function. Two slots apply
/// a counting-measure norm over the family index pointwise, then a Riemann
/// `L^p` norm over the grid — the `L^p(l^R)` forms of vector-valued bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedNormSpec {
    /// Exponent per slot, innermost first; each in `[1, inf]`.
    pub slots: Vec<NormExponent>,
}

impl MixedNormSpec {
    /// Plain `L^p`.
    pub fn lebesgue(p: NormExponent) -> Self {
        MixedNormSpec { slots: vec![p] }
    }

    /// `L^outer(l^inner)`: counting-measure norm over the index, then a
    /// Lebesgue norm over the grid.
    pub fn vector(inner: NormExponent, outer: NormExponent) -> Self {
        MixedNormSpec {
            slots: vec![inner, outer],
        }
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        if self.slots.is_empty() || self.slots.len() > 2 {
            return Err(CoreError::exponent(format!(
                "mixed norms take one or two exponent slots, got {}",
                self.slots.len()
            )));
        }
        for slot in &self.slots {
            slot.validate()?;
        }
        Ok(())
    }
}

impl fmt::Display for MixedNormSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.slots.as_slice() {
            [p] => write!(f, "L^{p}"),
            [inner, outer] => write!(f, "L^{outer}(l^{inner})"),
            _ => write!(f, "L^?"),
        }
    }
}

/// Raw successive-norm engine on plain float exponents. Unlike
/// [`mixed_norm`] this does not insist on exponents `>= 1`, because ratio
/// probes legitimately meet quasi-norm outputs (`0 < r < 1`) on the Hölder
/// line; the triangle inequality is simply unavailable there.
fn successive_norm(
    family: &[SampledFunction],
    inner: f64,
    outer: f64,
) -> Result<f64, CoreError> {
    if !(inner > 0.0) || !(outer > 0.0) {
        return Err(CoreError::exponent(format!(
            "successive norms need positive exponents, got inner {inner} and outer {outer}"
        )));
    }
    if family.is_empty() {
        if inner == f64::INFINITY && outer == f64::INFINITY {
            return Err(CoreError::degenerate(
                "the essential supremum of an empty family is undefined",
            ));
        }
        return Ok(0.0);
    }
    let base = &family[0];
    for f in family.iter().skip(1) {
        if !f.same_grid(base) {
            return Err(CoreError::grid_mismatch(
                "every member of a mixed-norm family must live on one grid",
            ));
        }
    }
    let npts = base.len();
    let cell = base.cell_measure();
    let mut acc = 0.0_f64;
    let mut sup = 0.0_f64;
    for idx in 0..npts {
        let pointwise = if inner == f64::INFINITY {
            family
                .iter()
                .map(|f| f.data()[idx].norm())
                .fold(0.0, f64::max)
        } else {
            family
                .iter()
                .map(|f| f.data()[idx].norm().powf(inner))
                .sum::<f64>()
                .powf(1.0 / inner)
        };
        if outer == f64::INFINITY {
            sup = sup.max(pointwise);
        } else {
            acc += pointwise.powf(outer);
        }
    }
    if outer == f64::INFINITY {
        Ok(sup)
    } else {
        Ok((acc * cell).powf(1.0 / outer))
    }
}

/// Successive norm of an indexed function family, innermost slot first.
///
/// A one-slot spec is the plain Lebesgue norm of a single function; a
/// two-slot spec applies the counting-measure norm over the index `j`
/// pointwise and then the outer Riemann norm over the grid. An empty family
/// has norm 0 for finite slots; a pure supremum chain over an empty family
/// is rejected, since the supremum of nothing is undefined.
pub fn mixed_norm(family: &[SampledFunction], spec: &MixedNormSpec) -> Result<f64, CoreError> {
    spec.validate()?;
    match spec.slots.as_slice() {
        [single] => {
            if family.len() != 1 {
                return Err(CoreError::grid_mismatch(format!(
                    "a one-slot norm takes exactly one function, got {}",
                    family.len()
                )));
            }
            Ok(family[0].lp_norm(single.as_f64()))
        }
        [inner, outer] => successive_norm(family, inner.as_f64(), outer.as_f64()),
        _ => unreachable!("validate caps the slot count at two"),
    }
}

/// Whether the family sits in the closed unit ball of the mixed norm, up to
/// `tol`.
pub fn in_unit_ball(
    family: &[SampledFunction],
    spec: &MixedNormSpec,
    tol: f64,
) -> Result<bool, CoreError> {
    Ok(mixed_norm(family, spec)? <= 1.0 + tol)
}

/// Whether `|f| <= 1_E` pointwise, with `E` given as a boolean mask over the
/// grid in storage order and `tol` absorbing roundoff.
pub fn dominated_by_indicator(
    f: &SampledFunction,
    mask: &[bool],
    tol: f64,
) -> Result<bool, CoreError> {
    if mask.len() != f.len() {
        return Err(CoreError::grid_mismatch(format!(
            "indicator mask has {} entries for a grid of {} samples",
            mask.len(),
            f.len()
        )));
    }
    Ok(f.data()
        .iter()
        .zip(mask)
        .all(|(v, &inside)| v.norm() <= if inside { 1.0 + tol } else { tol }))
}

// ---------------------------------------------------------------------------
// Probe grids and test-function families
// ---------------------------------------------------------------------------

/// Grid on which a probe level lives: `n` samples per axis on a torus of the
/// given period(s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeGrid {
    pub dim: u8,
    pub n: usize,
    pub periods: [f64; 2],
}

impl ProbeGrid {
    pub fn line(n: usize, period: f64) -> Self {
        ProbeGrid {
            dim: 1,
            n,
            periods: [period, period],
        }
    }

    pub fn square(n: usize, l0: f64, l1: f64) -> Self {
        ProbeGrid {
            dim: 2,
            n,
            periods: [l0, l1],
        }
    }

    /// Largest symmetric mode radius such that the sum band of two inputs
    /// still fits the signed mode range of the grid. Every generated test
    /// function is projected onto this radius, so bilinear contractions never
    /// alias.
    pub fn band_radius(&self) -> i64 {
        ((self.n / 2 - 1) / 2) as i64
    }

    fn validate(&self) -> Result<(), CoreError> {
        if self.dim != 1 && self.dim != 2 {
            return Err(CoreError::grid_mismatch(format!(
                "probe grids are 1d or 2d, got dimension {}",
                self.dim
            )));
        }
        if self.n < 8 || self.n % 2 != 0 {
            return Err(CoreError::grid_mismatch(format!(
                "probe grids need an even sample count of at least 8, got {}",
                self.n
            )));
        }
        if !(self.periods[0] > 0.0 && self.periods[1] > 0.0) {
            return Err(CoreError::degenerate("probe grid periods must be positive"));
        }
        Ok(())
    }
}

/// Deterministic test-function generator. Profiles are written in the
/// relative coordinate `u = x / period`, so the same family describes the
/// same shape at every refinement level and under torus dilation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TestFamily {
    /// `exp(-((u - center)/width)^2)`, periodized.
    GaussianBump { width: f64, center: f64 },
    /// Gaussian bump times `e^{2 pi i frequency u}`.
    ModulatedBump {
        width: f64,
        center: f64,
        frequency: i64,
    },
    /// Quadratic phase `e^{2 pi i rate u^2}`.
    Chirp { rate: f64 },
    /// Seeded random Fourier coefficients on `|k| <= degree` (per axis in 2d).
    RandomTrig { seed: u64, degree: i64 },
    /// Smoothed indicator of `[lo, hi]` in relative coordinates; `lo == hi`
    /// is the deliberate zero function.
    SmoothedIndicator { lo: f64, hi: f64 },
    /// Two-dimensional product bump centered on the torus.
    TensorBump { width: f64 },
    /// Cross chirp `e^{2 pi i rate u v}` with `rate = round(rate_scale * n)`,
    /// the separable-phase profile that a tensor-product bilinear symbol
    /// cannot tame.
    TensorChirp { rate_scale: f64 },
}

impl TestFamily {
    /// Grid dimension the family generates on.
    pub fn dim(&self) -> u8 {
        match self {
            TestFamily::GaussianBump { .. }
            | TestFamily::ModulatedBump { .. }
            | TestFamily::Chirp { .. }
            | TestFamily::SmoothedIndicator { .. } => 1,
            TestFamily::TensorBump { .. } | TestFamily::TensorChirp { .. } => 2,
            // Random coefficients make sense on either grid.
            TestFamily::RandomTrig { .. } => 0,
        }
    }

    fn compatible(&self, dim: u8) -> bool {
        self.dim() == 0 || self.dim() == dim
    }
}

impl fmt::Display for TestFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TestFamily::GaussianBump { width, center } => {
                write!(f, "gaussian-bump(w={width},c={center})")
            }
            TestFamily::ModulatedBump {
                width,
                center,
                frequency,
            } => write!(f, "modulated-bump(w={width},c={center},f={frequency})"),
            TestFamily::Chirp { rate } => write!(f, "chirp(rate={rate})"),
            TestFamily::RandomTrig { seed, degree } => {
                write!(f, "random-trig(seed={seed},deg={degree})")
            }
            TestFamily::SmoothedIndicator { lo, hi } => {
                write!(f, "smoothed-indicator({lo}..{hi})")
            }
            TestFamily::TensorBump { width } => write!(f, "tensor-bump(w={width})"),
            TestFamily::TensorChirp { rate_scale } => {
                write!(f, "tensor-chirp(scale={rate_scale})")
            }
        }
    }
}

/// Wrap a relative offset into `[-1/2, 1/2)`.
fn wrap_half(u: f64) -> f64 {
    let v = u.rem_euclid(1.0);
    if v >= 0.5 {
        v - 1.0
    } else {
        v
    }
}

/// Smooth-periodic Gaussian: the wrapped offset plus its two neighboring
/// period images. For widths up to 1/4 the next images are below machine
/// precision, so this is the exact periodization.
fn periodized_gauss(v: f64, width: f64) -> f64 {
    (-((v - 1.0) / width).powi(2)).exp()
        + (-(v / width).powi(2)).exp()
        + (-((v + 1.0) / width).powi(2)).exp()
}

/// DFT storage index of signed mode `k` on `n` points.
fn mode_index(k: i64, n: usize) -> usize {
    debug_assert!(2 * k.unsigned_abs() as usize <= n);
    if k >= 0 {
        k as usize
    } else {
        (n as i64 + k) as usize
    }
}

fn sample_line(
    grid: &ProbeGrid,
    profile: impl Fn(f64) -> Complex64,
) -> Result<SampledFunction, CoreError> {
    let data = (0..grid.n)
        .map(|i| profile(i as f64 / grid.n as f64))
        .collect();
    SampledFunction::new_1d(grid.n, grid.periods[0], data)
}

fn sample_square(
    grid: &ProbeGrid,
    profile: impl Fn(f64, f64) -> Complex64,
) -> Result<SampledFunction, CoreError> {
    // Storage order: the axis-0 index varies fastest.
    let n = grid.n;
    let mut data = Vec::with_capacity(n * n);
    for i1 in 0..n {
        let v = i1 as f64 / n as f64;
        for i0 in 0..n {
            let u = i0 as f64 / n as f64;
            data.push(profile(u, v));
        }
    }
    SampledFunction::new_2d(n, n, grid.periods[0], grid.periods[1], data)
}

/// Zero every Fourier coefficient outside `|mode| <= radius` (per axis) and
/// declare the resulting symmetric band. This is the alias-safety discipline
/// of the probe layer: any two projected functions can be fed to a bilinear
/// contraction without overflowing the grid's mode range.
pub fn band_project(f: &SampledFunction, radius: i64) -> Result<SampledFunction, CoreError> {
    if radius < 0 {
        return Err(CoreError::band_overflow(
            "band projection needs a nonnegative radius",
        ));
    }
    let sizes = f.sizes();
    let mut coeffs = f.coeffs();
    if f.dim() == 1 {
        for (idx, slot) in coeffs.iter_mut().enumerate() {
            if f.mode_at(0, idx).abs() > radius {
                *slot = czero();
            }
        }
    } else {
        for i1 in 0..sizes[1] {
            let m1 = f.mode_at(1, i1);
            for i0 in 0..sizes[0] {
                let m0 = f.mode_at(0, i0);
                if m0.abs() > radius || m1.abs() > radius {
                    coeffs[i1 * sizes[0] + i0] = czero();
                }
            }
        }
    }
    let mut out = SampledFunction::from_coeffs_like(f, coeffs)?;
    out.set_band(0, Some(Band::symmetric(radius)));
    if f.dim() == 2 {
        out.set_band(1, Some(Band::symmetric(radius)));
    }
    Ok(out)
}

fn check_fraction(name: &str, value: f64, lo: f64, hi: f64) -> Result<(), CoreError> {
    if !(value > lo && value <= hi) {
        return Err(CoreError::degenerate(format!(
            "{name} = {value} must lie in ({lo}, {hi}]"
        )));
    }
    Ok(())
}

/// Generate one deterministic, band-limited test function on the grid.
///
/// Frequency parameters that the grid cannot hold are rejected: modulation
/// at or past the Nyquist mode, chirp rates past a quarter of the grid, and
/// random-coefficient degrees past the alias-safe radius of
/// [`ProbeGrid::band_radius`]. Everything generated here is safe to hand to
/// a bilinear contraction in pairs.
pub fn generate_test_function(
    family: &TestFamily,
    grid: &ProbeGrid,
) -> Result<SampledFunction, CoreError> {
    grid.validate()?;
    if !family.compatible(grid.dim) {
        return Err(CoreError::grid_mismatch(format!(
            "family {family} generates {}d functions but the grid is {}d",
            family.dim(),
            grid.dim
        )));
    }
    let rb = grid.band_radius();
    let n = grid.n;
    match family {
        TestFamily::GaussianBump { width, center } => {
            check_fraction("width", *width, 0.0, 0.25)?;
            if !(0.0..1.0).contains(center) {
                return Err(CoreError::degenerate(format!(
                    "center = {center} must lie in [0, 1)"
                )));
            }
            let (w, c) = (*width, *center);
            let f = sample_line(grid, |u| {
                Complex64::new(periodized_gauss(wrap_half(u - c), w), 0.0)
            })?;
            band_project(&f, rb)
        }
        TestFamily::ModulatedBump {
            width,
            center,
            frequency,
        } => {
            check_fraction("width", *width, 0.0, 0.25)?;
            if !(0.0..1.0).contains(center) {
                return Err(CoreError::degenerate(format!(
                    "center = {center} must lie in [0, 1)"
                )));
            }
            if frequency.unsigned_abs() as usize >= n / 2 {
                return Err(CoreError::band_overflow(format!(
                    "modulation frequency {frequency} is at or beyond the Nyquist mode {} of a {n}-point grid",
                    n / 2
                )));
            }
            let (w, c, k) = (*width, *center, *frequency as f64);
            let f = sample_line(grid, |u| {
                unit_phase(TAU * k * u).scale(periodized_gauss(wrap_half(u - c), w))
            })?;
            band_project(&f, rb)
        }
        TestFamily::Chirp { rate } => {
            if !(rate.is_finite() && *rate > 0.0 && *rate <= (n / 4) as f64) {
                return Err(CoreError::band_overflow(format!(
                    "chirp rate {rate} is outside the resolvable range (0, {}] on {n} points",
                    n / 4
                )));
            }
            let r = *rate;
            let f = sample_line(grid, |u| unit_phase(TAU * r * u * u))?;
            band_project(&f, rb)
        }
        TestFamily::RandomTrig { seed, degree } => {
            if *degree < 1 {
                return Err(CoreError::degenerate(format!(
                    "random trigonometric degree must be at least 1, got {degree}"
                )));
            }
            if *degree > rb {
                return Err(CoreError::band_overflow(format!(
                    "degree {degree} exceeds the alias-safe band radius {rb} on {n} points"
                )));
            }
            let d = *degree;
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            // Fixed draw order independent of the grid size, so one seed
            // names one trigonometric polynomial at every level.
            if grid.dim == 1 {
                let mut coeffs = vec![czero(); n];
                for k in -d..=d {
                    let re = rng.gen::<f64>() - 0.5;
                    let im = rng.gen::<f64>() - 0.5;
                    coeffs[mode_index(k, n)] = Complex64::new(re, im);
                }
                let mut f = SampledFunction::from_coeffs_1d(n, grid.periods[0], coeffs)?;
                f.set_band(0, Some(Band::symmetric(d)));
                Ok(f)
            } else {
                let mut coeffs = vec![czero(); n * n];
                for k in -d..=d {
                    for l in -d..=d {
                        let re = rng.gen::<f64>() - 0.5;
                        let im = rng.gen::<f64>() - 0.5;
                        coeffs[mode_index(l, n) * n + mode_index(k, n)] =
                            Complex64::new(re, im);
                    }
                }
                let mut f = SampledFunction::from_coeffs_2d(
                    n,
                    n,
                    grid.periods[0],
                    grid.periods[1],
                    coeffs,
                )?;
                f.set_band(0, Some(Band::symmetric(d)));
                f.set_band(1, Some(Band::symmetric(d)));
                Ok(f)
            }
        }
        TestFamily::SmoothedIndicator { lo, hi } => {
            if !(0.0..=1.0).contains(lo) || !(0.0..=1.0).contains(hi) || lo > hi {
                return Err(CoreError::degenerate(format!(
                    "smoothed indicator needs 0 <= lo <= hi <= 1, got [{lo}, {hi}]"
                )));
            }
            if hi - lo < 1e-12 {
                // Deliberately the zero function: the degenerate candidate.
                return sample_line(grid, |_| czero());
            }
            let ramp = (hi - lo) / 8.0;
            let (a, b) = (*lo, *hi);
            let f = sample_line(grid, |u| {
                let rise = smoothstep((u - a) / ramp);
                let fall = smoothstep((b - u) / ramp);
                Complex64::new(rise * fall, 0.0)
            })?;
            band_project(&f, rb)
        }
        TestFamily::TensorBump { width } => {
            check_fraction("width", *width, 0.0, 0.25)?;
            let w = *width;
            let f = sample_square(grid, |u, v| {
                let du = wrap_half(u - 0.5);
                let dv = wrap_half(v - 0.5);
                Complex64::new(periodized_gauss(du, w) * periodized_gauss(dv, w), 0.0)
            })?;
            band_project(&f, rb)
        }
        TestFamily::TensorChirp { rate_scale } => {
            check_fraction("rate_scale", *rate_scale, 0.0, 1.0)?;
            let rate = ((rate_scale * n as f64).round() as i64).max(1) as f64;
            let f = sample_square(grid, |u, v| unit_phase(TAU * rate * u * v))?;
            band_project(&f, rb)
        }
    }
}

// ---------------------------------------------------------------------------
// Probe operators
// ---------------------------------------------------------------------------

/// Bilinear operator a probe can drive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProbeOperator {
    /// Directional bilinear Hilbert transform on the line.
    Bht,
    /// One-parameter projection paraproduct on the line.
    Paraproduct,
    /// Hybrid tensor operator: directional transform in `x`, paraproduct
    /// scale sum in `y`.
    Bp,
    /// Tensor product of two directional transforms — the operator with no
    /// Lebesgue bounds at all.
    DoubleBht,
}

impl ProbeOperator {
    pub fn dim(&self) -> u8 {
        match self {
            ProbeOperator::Bht | ProbeOperator::Paraproduct => 1,
            ProbeOperator::Bp | ProbeOperator::DoubleBht => 2,
        }
    }

    pub fn apply(
        &self,
        f: &SampledFunction,
        g: &SampledFunction,
        family: &LpFamily,
    ) -> Result<SampledFunction, CoreError> {
        match self {
            ProbeOperator::Bht => apply_bht(f, g),
            ProbeOperator::Paraproduct => apply_paraproduct(f, g, family, 0),
            ProbeOperator::Bp => apply_bp(f, g, family, &BilinearSymbol::Bht),
            ProbeOperator::DoubleBht => {
                let sym = TensorSymbol::double_bht().compile(f.sizes(), f.periods())?;
                apply_tensor(f, g, &sym)
            }
        }
    }
}

impl fmt::Display for ProbeOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ProbeOperator::Bht => "bht",
            ProbeOperator::Paraproduct => "paraproduct",
            ProbeOperator::Bp => "bp",
            ProbeOperator::DoubleBht => "double-bht",
        };
        write!(f, "{s}")
    }
}

impl FromStr for ProbeOperator {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self, CoreError> {
        match s.trim() {
            "bht" => Ok(ProbeOperator::Bht),
            "paraproduct" => Ok(ProbeOperator::Paraproduct),
            "bp" => Ok(ProbeOperator::Bp),
            "double-bht" => Ok(ProbeOperator::DoubleBht),
            other => Err(CoreError::parse(format!(
                "unknown probe operator {other:?}; expected bht, paraproduct, bp, or double-bht"
            ))),
        }
    }
}

/// Stock candidate dictionary for an operator's dimension: bumps, a
/// modulated bump, random coefficients, and the adversarial chirps.
pub fn default_families(operator: ProbeOperator) -> Vec<TestFamily> {
    match operator.dim() {
        1 => vec![
            TestFamily::GaussianBump {
                width: 0.12,
                center: 0.5,
            },
            TestFamily::ModulatedBump {
                width: 0.1,
                center: 0.3,
                frequency: 9,
            },
            TestFamily::RandomTrig {
                seed: 101,
                degree: 11,
            },
            TestFamily::SmoothedIndicator { lo: 0.2, hi: 0.55 },
        ],
        _ => vec![
            TestFamily::TensorBump { width: 0.15 },
            TestFamily::TensorChirp { rate_scale: 1.0 },
            TestFamily::TensorChirp { rate_scale: 0.5 },
            TestFamily::RandomTrig {
                seed: 202,
                degree: 3,
            },
        ],
    }
}

// ---------------------------------------------------------------------------
// Probe results and classification
// ---------------------------------------------------------------------------

/// Verdict of a refinement scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GrowthClass {
    /// Best ratio moved by at most a factor 2 over the classification window.
    Stable,
    /// Best ratio at least quadrupled, increasing at every doubling.
    Growing,
    /// Neither pattern.
    Inconclusive,
}

impl fmt::Display for GrowthClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            GrowthClass::Stable => "stable",
            GrowthClass::Growing => "growing",
            GrowthClass::Inconclusive => "inconclusive",
        };
        write!(f, "{s}")
    }
}

/// Best ratio found at one refinement level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelRecord {
    /// Refinement index, starting at 0.
    pub level: usize,
    /// Samples per axis at this level.
    pub grid: usize,
    /// Largest restricted ratio over the candidate sweep and local search.
    pub best_ratio: f64,
    /// Label of the candidate (or search step) achieving it.
    pub best_candidate: String,
}

/// Outcome of a probe: per-level maxima, the growth verdict, and enough
/// provenance (operator, exponents, seed) to reproduce the run exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub operator: String,
    /// `[p, q, r]` of the outer Lebesgue exponents.
    pub exponents: Vec<f64>,
    /// Sequence exponent `R` for vector-valued runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inner_exponent: Option<f64>,
    pub seed: u64,
    pub levels: Vec<LevelRecord>,
    pub classification: GrowthClass,
    /// Ratio of the last windowed level to the first.
    pub growth_factor: f64,
    /// Set when some level had no candidate of nonzero norm.
    pub degenerate: bool,
    /// Companion run at exponents just outside the admissible region; no
    /// boundedness claim attaches to it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contrast: Option<Box<ProbeResult>>,
}

impl ProbeResult {
    /// CSV table `level,grid,best_ratio,best_candidate,classification`; the
    /// candidate label is always quoted because it contains commas.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("level,grid,best_ratio,best_candidate,classification\n");
        for rec in &self.levels {
            s.push_str(&format!(
                "{},{},{:.12e},\"{}\",{}\n",
                rec.level,
                rec.grid,
                rec.best_ratio,
                rec.best_candidate.replace('"', "\"\""),
                self.classification
            ));
        }
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("probe results always serialize")
    }
}

/// Classify a ratio ladder: the window is the last three doublings (or all
/// of a shorter run). Growth must be monotone at every step and reach a
/// factor of 4 to count; a factor of at most 2 is stable; anything else is
/// inconclusive.
fn classify_levels(records: &[LevelRecord]) -> (GrowthClass, f64) {
    if records.len() < 2 {
        return (GrowthClass::Inconclusive, 1.0);
    }
    let w = records.len().min(4);
    let window = &records[records.len() - w..];
    let first = window[0].best_ratio;
    let last = window[w - 1].best_ratio;
    if !(first > 0.0) {
        let factor = if last > 0.0 { f64::INFINITY } else { 1.0 };
        return (GrowthClass::Inconclusive, factor);
    }
    let factor = last / first;
    let monotone = window
        .windows(2)
        .all(|pair| pair[1].best_ratio > pair[0].best_ratio);
    if factor >= 4.0 && monotone {
        (GrowthClass::Growing, factor)
    } else if factor <= 2.0 {
        (GrowthClass::Stable, factor)
    } else {
        (GrowthClass::Inconclusive, factor)
    }
}

// ---------------------------------------------------------------------------
// Scalar probe
// ---------------------------------------------------------------------------

/// Configuration of a scalar ratio probe.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalarProbeSpec {
    pub operator: ProbeOperator,
    /// `[p, q, r]` with `1/p + 1/q = 1/r`.
    pub exponents: [f64; 3],
    /// Samples per axis at level 0; must be a power of two, at least 8.
    pub base_grid: usize,
    /// Number of doubling levels to scan.
    pub levels: usize,
    /// Candidate dictionary; both orders of every pair are tried.
    pub families: Vec<TestFamily>,
    /// Seed for the local search around the best candidate pair.
    pub seed: u64,
    /// Local-search steps per level; 0 disables the search.
    pub search_steps: usize,
    /// Torus period per axis (profiles are period-relative, so this only
    /// moves the measure; ratios on the Hölder line are invariant).
    pub period: f64,
}

impl ScalarProbeSpec {
    pub fn new(operator: ProbeOperator, p: f64, q: f64, r: f64) -> Self {
        ScalarProbeSpec {
            operator,
            exponents: [p, q, r],
            base_grid: if operator.dim() == 1 { 128 } else { 16 },
            levels: 4,
            families: default_families(operator),
            seed: 17,
            search_steps: 8,
            period: 1.0,
        }
    }
}

fn check_holder_line(p: f64, q: f64, r: f64) -> Result<(), CoreError> {
    for (name, v) in [("p", p), ("q", q)] {
        if !(v.is_finite() && v >= 1.0) {
            return Err(CoreError::exponent(format!(
                "input exponent {name} = {v} must be finite and at least 1"
            )));
        }
    }
    if !(r.is_finite() && r > 0.0) {
        return Err(CoreError::exponent(format!(
            "output exponent r = {r} must be finite and positive"
        )));
    }
    let lhs = 1.0 / p + 1.0 / q;
    if (lhs - 1.0 / r).abs() > 1e-12 {
        return Err(CoreError::exponent(format!(
            "exponents are off the Hölder line: 1/{p} + 1/{q} = {lhs} but 1/r = {}; \
             ratio scaling invariance would fail",
            1.0 / r
        )));
    }
    Ok(())
}

/// Add seeded kicks to a handful of in-band Fourier coefficients. The draw
/// count is fixed, so the rng stream — and hence the whole search — is
/// reproducible regardless of which steps improve the ratio.
fn perturb_in_band(
    f: &SampledFunction,
    radius: i64,
    rng: &mut ChaCha8Rng,
    amplitude: f64,
) -> Result<SampledFunction, CoreError> {
    let sizes = f.sizes();
    let mut coeffs = f.coeffs();
    let peak = coeffs.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let kick = amplitude * if peak > 0.0 { peak } else { 1.0 };
    let kicks = 4;
    if f.dim() == 1 {
        let rad = radius.min(sizes[0] as i64 / 2 - 1);
        for _ in 0..kicks {
            let k = rng.gen_range(-rad..=rad);
            let re = rng.gen::<f64>() - 0.5;
            let im = rng.gen::<f64>() - 0.5;
            coeffs[mode_index(k, sizes[0])] += Complex64::new(2.0 * kick * re, 2.0 * kick * im);
        }
    } else {
        let rad0 = radius.min(sizes[0] as i64 / 2 - 1);
        let rad1 = radius.min(sizes[1] as i64 / 2 - 1);
        for _ in 0..kicks {
            let k = rng.gen_range(-rad0..=rad0);
            let l = rng.gen_range(-rad1..=rad1);
            let re = rng.gen::<f64>() - 0.5;
            let im = rng.gen::<f64>() - 0.5;
            coeffs[mode_index(l, sizes[1]) * sizes[0] + mode_index(k, sizes[0])] +=
                Complex64::new(2.0 * kick * re, 2.0 * kick * im);
        }
    }
    let mut out = SampledFunction::from_coeffs_like(f, coeffs)?;
    out.set_band(0, Some(Band::symmetric(radius)));
    if f.dim() == 2 {
        out.set_band(1, Some(Band::symmetric(radius)));
    }
    Ok(out)
}

/// Scan the restricted ratio `||Op(f,g)||_r / (||f||_p ||g||_q)` over all
/// ordered candidate pairs plus a seeded local search, at each refinement
/// level, and classify the growth of the per-level maximum.
///
/// Candidates are evaluated in parallel; the maximum is reduced in candidate
/// order, so results are identical under any thread schedule. Candidates of
/// zero norm are skipped and flag the result as degenerate rather than
/// dividing by zero.
pub fn probe_ratio(spec: &ScalarProbeSpec) -> Result<ProbeResult, CoreError> {
    let [p, q, r] = spec.exponents;
    check_holder_line(p, q, r)?;
    if spec.families.is_empty() {
        return Err(CoreError::degenerate(
            "the candidate suite must contain at least one test family",
        ));
    }
    let dim = spec.operator.dim();
    for fam in &spec.families {
        if !fam.compatible(dim) {
            return Err(CoreError::grid_mismatch(format!(
                "family {fam} is {}d but operator {} acts on {dim}d grids",
                fam.dim(),
                spec.operator
            )));
        }
    }
    if spec.levels == 0 {
        return Err(CoreError::degenerate("at least one refinement level is required"));
    }
    if spec.base_grid < 8 || !spec.base_grid.is_power_of_two() {
        return Err(CoreError::grid_mismatch(format!(
            "base grid {} must be a power of two, at least 8",
            spec.base_grid
        )));
    }
    if !(spec.period > 0.0 && spec.period.is_finite()) {
        return Err(CoreError::degenerate("torus period must be positive"));
    }
    let family_lp = LpFamily::new(PROBE_SHARPNESS)?;

    let mut records = Vec::with_capacity(spec.levels);
    let mut degenerate = false;
    for level in 0..spec.levels {
        let n = spec.base_grid << level;
        let grid = if dim == 1 {
            ProbeGrid::line(n, spec.period)
        } else {
            ProbeGrid::square(n, spec.period, spec.period)
        };
        let gens = spec
            .families
            .iter()
            .map(|fam| Ok((fam.to_string(), generate_test_function(fam, &grid)?)))
            .collect::<Result<Vec<_>, CoreError>>()?;
        let pairs: Vec<(usize, usize)> = (0..gens.len())
            .flat_map(|i| (0..gens.len()).map(move |j| (i, j)))
            .collect();
        let evals = pairs
            .par_iter()
            .map(|&(i, j)| -> Result<Option<(f64, usize, usize)>, CoreError> {
                let (_, f) = &gens[i];
                let (_, g) = &gens[j];
                let denom = f.lp_norm(p) * g.lp_norm(q);
                if !(denom > 0.0) {
                    return Ok(None);
                }
                let out = spec.operator.apply(f, g, &family_lp)?;
                Ok(Some((out.lp_norm(r) / denom, i, j)))
            })
            .collect::<Result<Vec<_>, CoreError>>()?;
        // Deterministic reduction: the earliest candidate within a relative
        // whisker of the maximum. Exact ties happen structurally — an
        // antisymmetric symbol makes both orders of a pair agree up to sign —
        // and the whisker keeps the argmax independent of float noise.
        let live: Vec<(f64, usize, usize)> = evals.into_iter().flatten().collect();
        let top = live.iter().map(|e| e.0).fold(f64::NEG_INFINITY, f64::max);
        let best = live
            .into_iter()
            .find(|e| e.0 >= top * (1.0 - 1e-9));
        let (mut best_ratio, mut best_name) = match best {
            None => {
                degenerate = true;
                records.push(LevelRecord {
                    level,
                    grid: n,
                    best_ratio: 0.0,
                    best_candidate: "none".to_string(),
                });
                continue;
            }
            Some((ratio, i, j)) => (ratio, format!("{}|{}", gens[i].0, gens[j].0)),
        };
        if spec.search_steps > 0 {
            let (_, i, j) = best.unwrap();
            let mut bf = gens[i].1.clone();
            let mut bg = gens[j].1.clone();
            let base_name = best_name.clone();
            let mut rng = ChaCha8Rng::seed_from_u64(
                spec.seed ^ (level as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15),
            );
            let rb = grid.band_radius();
            for step in 0..spec.search_steps {
                let cf = perturb_in_band(&bf, rb, &mut rng, 0.25)?;
                let cg = perturb_in_band(&bg, rb, &mut rng, 0.25)?;
                let denom = cf.lp_norm(p) * cg.lp_norm(q);
                if !(denom > 0.0) {
                    continue;
                }
                let out = spec.operator.apply(&cf, &cg, &family_lp)?;
                let ratio = out.lp_norm(r) / denom;
                // Adopt only genuine improvements; a relative margin keeps
                // the climb deterministic under float jitter.
                if ratio > best_ratio * (1.0 + 1e-12) {
                    best_ratio = ratio;
                    best_name = format!("search-{step}({base_name})");
                    bf = cf;
                    bg = cg;
                }
            }
        }
        records.push(LevelRecord {
            level,
            grid: n,
            best_ratio,
            best_candidate: best_name,
        });
    }
    let (classification, growth_factor) = classify_levels(&records);
    Ok(ProbeResult {
        operator: spec.operator.to_string(),
        exponents: vec![p, q, r],
        inner_exponent: None,
        seed: spec.seed,
        levels: records,
        classification,
        growth_factor,
        degenerate,
        contrast: None,
    })
}

// ---------------------------------------------------------------------------
// Vector-valued probe
// ---------------------------------------------------------------------------

/// Configuration of a vector-valued probe of the hybrid operator: `J`
/// single-scale applications `BP_j(f_j, g_j)` measured in `L^r(l^R)` against
/// `L^p(l^inf) x L^q(l^R)` data.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VectorProbeSpec {
    /// Outer `[p, q, r]` with `1/p + 1/q = 1/r`.
    pub exponents: [f64; 3],
    /// Sequence exponent `R`, strictly between 4/3 and 4.
    pub inner: f64,
    /// Number of dyadic bands `J`.
    pub bands: usize,
    /// Samples per axis at level 0; power of two, at least 32.
    pub base_grid: usize,
    pub levels: usize,
    /// Region gating the exponent triple `(1/p, 1/q, 1/r')`.
    pub region: RegionId,
    pub seed: u64,
    /// Number of seeded candidate families per level.
    pub candidates: usize,
    /// Local-search steps per level; 0 disables the search.
    pub search_steps: usize,
    /// Also run exponents just outside the region for contrast.
    pub with_contrast: bool,
}

impl VectorProbeSpec {
    pub fn new(p: f64, q: f64, r: f64, inner: f64) -> Self {
        VectorProbeSpec {
            exponents: [p, q, r],
            inner,
            bands: 4,
            base_grid: 64,
            levels: 3,
            region: RegionId::Ar,
            seed: 29,
            candidates: 2,
            search_steps: 4,
            with_contrast: false,
        }
    }
}

/// Rational with denominator at most `max_den` recovering `x` to within
/// `1e-9` relative error, by continued-fraction convergents.
fn rationalize(x: f64, max_den: i64) -> Result<Q, CoreError> {
    if !x.is_finite() {
        return Err(CoreError::exponent(format!(
            "cannot rationalize the non-finite value {x}"
        )));
    }
    let target = x.abs();
    let (mut p0, mut q0, mut p1, mut q1) = (0_i64, 1_i64, 1_i64, 0_i64);
    let mut rest = target;
    for _ in 0..64 {
        let a = rest.floor();
        if a > i64::MAX as f64 / 2.0 {
            break;
        }
        let a = a as i64;
        let p2 = a.saturating_mul(p1).saturating_add(p0);
        let q2 = a.saturating_mul(q1).saturating_add(q0);
        if q2 > max_den {
            break;
        }
        p0 = p1;
        q0 = q1;
        p1 = p2;
        q1 = q2;
        let frac = rest - a as f64;
        if frac.abs() < 1e-12 {
            break;
        }
        rest = 1.0 / frac;
    }
    if q1 == 0 {
        return Err(CoreError::exponent(format!(
            "no rational with denominator <= {max_den} matches {x}"
        )));
    }
    let approx = p1 as f64 / q1 as f64;
    if (approx - target).abs() > 1e-9 * target.max(1.0) {
        return Err(CoreError::exponent(format!(
            "{x} is not recognizably rational (denominator up to {max_den}); \
             exact region arithmetic needs rational exponents"
        )));
    }
    let val = q_ratio(p1, q1);
    Ok(if x < 0.0 { -val } else { val })
}

/// Positive grid modes on which the scale-`j` band cutoff is identically 1.
fn plateau_modes(j: i32, period: f64, family: &LpFamily) -> Vec<i64> {
    let (lo, hi) = family.band_plateau(j);
    let m_lo = ((lo * period).ceil() as i64).max(1);
    let m_hi = (hi * period).floor() as i64;
    (m_lo..=m_hi)
        .filter(|&m| family.psi_scaled(j, m as f64 / period) == 1.0)
        .collect()
}

/// Random coefficients on `|k| <= x_radius` crossed with the plateau modes
/// of the scale-`j` band in `y`. The band projection at scale `j` fixes such
/// a function exactly, and the draw order is grid-independent, so one seed
/// names one function across all refinement levels.
fn pinned_band_function(
    seed: u64,
    grid: &ProbeGrid,
    x_radius: i64,
    j: i32,
    family: &LpFamily,
) -> Result<SampledFunction, CoreError> {
    grid.validate()?;
    if grid.dim != 2 {
        return Err(CoreError::grid_mismatch(
            "band-pinned families live on 2d grids",
        ));
    }
    let n = grid.n;
    let plat = plateau_modes(j, grid.periods[1], family);
    if plat.is_empty() {
        return Err(CoreError::scale_overflow(format!(
            "scale {j} has no grid mode on its band plateau at period {}",
            grid.periods[1]
        )));
    }
    let ymax = *plat.last().expect("nonempty");
    if ymax >= (n / 2) as i64 || x_radius >= (n / 2) as i64 {
        return Err(CoreError::band_overflow(format!(
            "pinned band (x radius {x_radius}, y mode {ymax}) exceeds a {n}-point axis"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coeffs = vec![czero(); n * n];
    for k in -x_radius..=x_radius {
        for &m in &plat {
            for l in [m, -m] {
                let re = rng.gen::<f64>() - 0.5;
                let im = rng.gen::<f64>() - 0.5;
                coeffs[mode_index(l, n) * n + mode_index(k, n)] = Complex64::new(re, im);
            }
        }
    }
    let mut g = SampledFunction::from_coeffs_2d(n, n, grid.periods[0], grid.periods[1], coeffs)?;
    g.set_band(0, Some(Band::symmetric(x_radius)));
    g.set_band(1, Some(Band::symmetric(ymax)));
    Ok(g)
}

struct VectorCandidate {
    label: String,
    fs: Vec<SampledFunction>,
    gs: Vec<SampledFunction>,
    outs: Vec<SampledFunction>,
    ratio: f64,
}

fn vector_ratio(
    fs: &[SampledFunction],
    gs: &[SampledFunction],
    outs: &[SampledFunction],
    p: f64,
    q: f64,
    r: f64,
    inner: f64,
) -> Result<Option<f64>, CoreError> {
    let denom =
        successive_norm(fs, f64::INFINITY, p)? * successive_norm(gs, inner, q)?;
    if !(denom > 0.0) {
        return Ok(None);
    }
    Ok(Some(successive_norm(outs, inner, r)? / denom))
}

/// The gate-free engine behind [`probe_vector_valued`]; the public entry
/// point validates the exponent region first, then also drives this engine
/// at just-outside exponents when a contrast run is requested.
fn vector_probe_engine(
    spec: &VectorProbeSpec,
    operator_label: &str,
) -> Result<ProbeResult, CoreError> {
    let [p, q, r] = spec.exponents;
    check_holder_line(p, q, r)?;
    if spec.bands == 0 {
        return Err(CoreError::degenerate("at least one band index is required"));
    }
    if spec.candidates == 0 {
        return Err(CoreError::degenerate(
            "at least one seeded candidate family is required",
        ));
    }
    if spec.levels == 0 {
        return Err(CoreError::degenerate("at least one refinement level is required"));
    }
    if spec.base_grid < 32 || !spec.base_grid.is_power_of_two() {
        return Err(CoreError::grid_mismatch(format!(
            "vector probes need a power-of-two base grid of at least 32, got {}",
            spec.base_grid
        )));
    }
    let family_lp = LpFamily::new(PROBE_SHARPNESS)?;
    let all_scales = valid_band_scales(spec.base_grid, 1.0, &family_lp);
    if all_scales.len() < spec.bands {
        return Err(CoreError::scale_overflow(format!(
            "a {}-point axis resolves only {} dyadic bands; {} were requested",
            spec.base_grid,
            all_scales.len(),
            spec.bands
        )));
    }
    let scales: Vec<i32> = all_scales[all_scales.len() - spec.bands..].to_vec();
    let x_radius = (spec.base_grid / 8) as i64;

    let mut records = Vec::with_capacity(spec.levels);
    let mut degenerate = false;
    for level in 0..spec.levels {
        let n = spec.base_grid << level;
        let grid = ProbeGrid::square(n, 1.0, 1.0);
        let mut best: Option<VectorCandidate> = None;
        for c in 0..spec.candidates {
            let seed_c = spec.seed.wrapping_add(c as u64);
            let bump = generate_test_function(&TestFamily::TensorBump { width: 0.12 }, &grid)?;
            let f = band_project(&bump, x_radius)?;
            let fs = vec![f; spec.bands];
            let mut gs = Vec::with_capacity(spec.bands);
            for (idx, &j) in scales.iter().enumerate() {
                let seed_band = seed_c.wrapping_add(1000 * (idx as u64 + 1));
                gs.push(pinned_band_function(
                    seed_band, &grid, x_radius, j, &family_lp,
                )?);
            }
            let outs = scales
                .par_iter()
                .enumerate()
                .map(|(idx, &j)| {
                    apply_bp_scale(&fs[idx], &gs[idx], j, &family_lp, &BilinearSymbol::Bht)
                })
                .collect::<Result<Vec<_>, CoreError>>()?;
            match vector_ratio(&fs, &gs, &outs, p, q, r, spec.inner)? {
                None => degenerate = true,
                Some(ratio) => {
                    let better = best
                        .as_ref()
                        .map_or(true, |b| ratio > b.ratio * (1.0 + 1e-12));
                    if better {
                        best = Some(VectorCandidate {
                            label: format!("pinned(seed={seed_c})"),
                            fs,
                            gs,
                            outs,
                            ratio,
                        });
                    }
                }
            }
        }
        let Some(mut cand) = best else {
            degenerate = true;
            records.push(LevelRecord {
                level,
                grid: n,
                best_ratio: 0.0,
                best_candidate: "none".to_string(),
            });
            continue;
        };
        if spec.search_steps > 0 {
            let base_label = cand.label.clone();
            let mut rng = ChaCha8Rng::seed_from_u64(
                spec.seed ^ (level as u64 + 1).wrapping_mul(0xA076_1D64_78BD_642F),
            );
            for step in 0..spec.search_steps {
                // Kick one band's g within its own pinned rectangle and
                // recompute only that band's output.
                let idx = rng.gen_range(0..spec.bands);
                let ymax = cand.gs[idx]
                    .declared_band(1)
                    .map_or(x_radius, |b| b.hi);
                let mut coeffs = cand.gs[idx].coeffs();
                let peak = coeffs.iter().map(|v| v.norm()).fold(0.0, f64::max);
                let kick = 0.25 * if peak > 0.0 { peak } else { 1.0 };
                for _ in 0..4 {
                    let k = rng.gen_range(-x_radius..=x_radius);
                    let m = rng.gen_range(1..=ymax.max(1));
                    let sign = if rng.gen::<bool>() { 1 } else { -1 };
                    let re = rng.gen::<f64>() - 0.5;
                    let im = rng.gen::<f64>() - 0.5;
                    coeffs[mode_index(sign * m, n) * n + mode_index(k, n)] +=
                        Complex64::new(2.0 * kick * re, 2.0 * kick * im);
                }
                let mut g2 = SampledFunction::from_coeffs_like(&cand.gs[idx], coeffs)?;
                g2.set_band(0, Some(Band::symmetric(x_radius)));
                g2.set_band(1, Some(Band::symmetric(ymax)));
                let out2 = apply_bp_scale(
                    &cand.fs[idx],
                    &g2,
                    scales[idx],
                    &family_lp,
                    &BilinearSymbol::Bht,
                )?;
                let mut gs2 = cand.gs.clone();
                let mut outs2 = cand.outs.clone();
                gs2[idx] = g2;
                outs2[idx] = out2;
                if let Some(ratio) =
                    vector_ratio(&cand.fs, &gs2, &outs2, p, q, r, spec.inner)?
                {
                    if ratio > cand.ratio * (1.0 + 1e-12) {
                        cand.gs = gs2;
                        cand.outs = outs2;
                        cand.ratio = ratio;
                        cand.label = format!("search-{step}({base_label})");
                    }
                }
            }
        }
        records.push(LevelRecord {
            level,
            grid: n,
            best_ratio: cand.ratio,
            best_candidate: cand.label,
        });
    }
    let (classification, growth_factor) = classify_levels(&records);
    Ok(ProbeResult {
        operator: operator_label.to_string(),
        exponents: vec![p, q, r],
        inner_exponent: Some(spec.inner),
        seed: spec.seed,
        levels: records,
        classification,
        growth_factor,
        degenerate,
        contrast: None,
    })
}

/// Vector-valued ratio probe of the hybrid operator, gated by exact
/// exponent-region arithmetic.
///
/// The triple `(1/p, 1/q, 1/r')` must lie in the configured region at the
/// sequence exponent `R`; violations are rejected with each failed
/// inequality named. `R` itself must satisfy `4/3 < R < 4` strictly. When
/// `with_contrast` is set, the same experiment also runs at exponents just
/// outside the region (`p = 1`, which breaks the `a1` bound for every `R`)
/// and the outcome is attached as `contrast` — recorded, but carrying no
/// boundedness claim either way.
pub fn probe_vector_valued(spec: &VectorProbeSpec) -> Result<ProbeResult, CoreError> {
    let [p, q, r] = spec.exponents;
    check_holder_line(p, q, r)?;
    if !(spec.inner > 4.0 / 3.0 && spec.inner < 4.0) {
        return Err(CoreError::exponent(format!(
            "sequence exponent R = {} is degenerate: the vector-valued bound needs 4/3 < R < 4",
            spec.inner
        )));
    }
    let a1 = rationalize(1.0 / p, 4096)?;
    let a2 = rationalize(1.0 / q, 4096)?;
    let a3 = rationalize(1.0 - 1.0 / r, 4096)?;
    let alpha = ExponentTriple::new(a1, a2, a3)?;
    let r_param = rationalize(spec.inner, 4096)?;
    let param = if spec.region.needs_parameter() {
        Some(r_param.clone())
    } else {
        None
    };
    if !region_membership(spec.region, param.as_ref(), &alpha)? {
        let detail = match spec.region {
            RegionId::Ar | RegionId::Ar1 | RegionId::Ar2 | RegionId::ArHull => {
                ar_closed_form_violations(&alpha, &r_param)?.join("; ")
            }
            other => format!("{alpha} lies outside region {other}"),
        };
        return Err(CoreError::exponent(format!(
            "exponent triple (1/p, 1/q, 1/r') = {alpha} fails the vector-valued range at R = {}: {detail}",
            spec.inner
        )));
    }
    let mut result = vector_probe_engine(spec, "bp-vector")?;
    if spec.with_contrast {
        // Just outside: p = 1 puts a1 = 1 at or past the a1 bound of the
        // closed form for every admissible R. Hölder then forces a
        // quasi-norm output exponent r' = q/(q+1) < 1.
        let mut cspec = spec.clone();
        cspec.exponents = [1.0, q, q / (q + 1.0)];
        cspec.with_contrast = false;
        let contrast = vector_probe_engine(&cspec, "bp-vector-contrast")?;
        result.contrast = Some(Box::new(contrast));
    }
    Ok(result)
}
