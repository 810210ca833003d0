//! Shifted dyadic meshes, tiles, tri-tiles, and product tri-tiles with
//! exact rational geometry.
//!
//! All endpoint arithmetic runs in `BigRational`; floating point never
//! enters a containment or separation decision. Intervals are half-open
//! `[lo, hi)`. Dilates `c * I` keep the center and scale the length; for
//! dilates, containment is tested with closed inequalities and
//! disjointness means the interiors do not meet (touching endpoints are
//! disjoint).
//!
//! A mesh interval at scale `j`, position `k`, shift `sigma` is
//! `[2^j (k + sigma'), 2^j (k + 1 + sigma'))` with `sigma' = (-1)^j sigma`.
//! Shifts are normalized to `[0, 1)` at construction; the integer part
//! folds into the position without moving any endpoint. Two quoted shift
//! alphabets are kept as presets together with the thirds alphabet, which
//! is the one that actually realizes the 7/10 covering property (integer
//! shifts reproduce the plain mesh).

use num_bigint::BigInt;
use num_rational::Ratio;
use num_traits::{One, ToPrimitive, Zero};
use std::collections::BTreeMap;
use std::fmt;

use crate::error::CoreError;

pub type Q = Ratio<BigInt>;

pub fn q_int(n: i64) -> Q {
    Ratio::from_integer(BigInt::from(n))
}

pub fn q_ratio(num: i64, den: i64) -> Q {
    Ratio::new(BigInt::from(num), BigInt::from(den))
}

/// Exact 2^j for any integer j.
pub fn pow2(j: i32) -> Q {
    if j >= 0 {
        Ratio::from_integer(BigInt::one() << j as usize)
    } else {
        Ratio::new(BigInt::one(), BigInt::one() << (-j) as usize)
    }
}

pub fn format_q(x: &Q) -> String {
    if x.denom().is_one() {
        format!("{}", x.numer())
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

pub fn parse_q(s: &str) -> Result<Q, CoreError> {
    let s = s.trim();
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n, d),
        None => (s, "1"),
    };
    let n: BigInt =
        num.parse().map_err(|_| CoreError::parse(format!("bad rational numerator {num:?}")))?;
    let d: BigInt =
        den.parse().map_err(|_| CoreError::parse(format!("bad rational denominator {den:?}")))?;
    if d.is_zero() {
        return Err(CoreError::parse("zero denominator"));
    }
    Ok(Ratio::new(n, d))
}

/// Closed rational interval used for dilates and search windows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RatInterval {
    pub lo: Q,
    pub hi: Q,
}

impl RatInterval {
    pub fn new(lo: Q, hi: Q) -> Self {
        RatInterval { lo, hi }
    }
    pub fn length(&self) -> Q {
        &self.hi - &self.lo
    }
    pub fn contains_closed(&self, other: &RatInterval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }
    pub fn interiors_disjoint(&self, other: &RatInterval) -> bool {
        self.hi <= other.lo || other.hi <= self.lo
    }
}

/// One interval of a shifted dyadic mesh.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DyadicInterval {
    scale: i32,
    pos: i64,
    /// Normalized shift in [0, 1).
    shift: Q,
}

impl DyadicInterval {
    /// Normalizes the shift into [0, 1): for the mesh formula the signed
    /// shift enters as `(-1)^j sigma`, so an integer adjustment of sigma
    /// moves the position by the same integer with sign `(-1)^j`.
    pub fn new(scale: i32, pos: i64, shift: Q) -> Result<Self, CoreError> {
        let floor = shift.floor();
        let frac = &shift - &floor;
        let whole = floor
            .to_integer()
            .to_i64()
            .ok_or_else(|| CoreError::geometry("shift integer part out of range"))?;
        let pos = if scale.rem_euclid(2) == 0 {
            pos.checked_add(whole)
        } else {
            pos.checked_sub(whole)
        }
        .ok_or_else(|| CoreError::geometry("position overflow"))?;
        Ok(DyadicInterval { scale, pos, shift: frac })
    }

    pub fn unshifted(scale: i32, pos: i64) -> Self {
        DyadicInterval { scale, pos, shift: Q::zero() }
    }

    pub fn scale(&self) -> i32 {
        self.scale
    }
    pub fn pos(&self) -> i64 {
        self.pos
    }
    pub fn shift(&self) -> &Q {
        &self.shift
    }

    /// Signed shift (-1)^j * sigma entering the endpoint formula.
    fn signed_shift(&self) -> Q {
        if self.scale.rem_euclid(2) == 0 { self.shift.clone() } else { -self.shift.clone() }
    }

    pub fn length(&self) -> Q {
        pow2(self.scale)
    }

    pub fn lo(&self) -> Q {
        pow2(self.scale) * (q_int(self.pos) + self.signed_shift())
    }

    pub fn hi(&self) -> Q {
        pow2(self.scale) * (q_int(self.pos + 1) + self.signed_shift())
    }

    pub fn center(&self) -> Q {
        (self.lo() + self.hi()) / q_int(2)
    }

    pub fn as_rat(&self) -> RatInterval {
        RatInterval::new(self.lo(), self.hi())
    }

    pub fn contains_point(&self, x: &Q) -> bool {
        &self.lo() <= x && x < &self.hi()
    }

    /// Set containment of half-open intervals.
    pub fn contains(&self, other: &DyadicInterval) -> bool {
        self.lo() <= other.lo() && other.hi() <= self.hi()
    }

    pub fn strictly_contains(&self, other: &DyadicInterval) -> bool {
        self.contains(other) && (self.lo() != other.lo() || self.hi() != other.hi())
    }

    /// Dilate by a positive rational factor about the center.
    pub fn dilate(&self, c: &Q) -> RatInterval {
        let center = self.center();
        let half = c * self.length() / q_int(2);
        RatInterval::new(&center - &half, center + half)
    }

    /// Reconstruct a mesh interval from its left endpoint and scale, using
    /// the canonical (position, shift in [0,1)) split.
    pub fn from_lo_scale(lo: &Q, scale: i32) -> Result<Self, CoreError> {
        let t = lo / pow2(scale);
        let k = t.floor();
        let frac = &t - &k;
        let pos = k
            .to_integer()
            .to_i64()
            .ok_or_else(|| CoreError::geometry("position out of i64 range"))?;
        // t = pos' + (-1)^j sigma with sigma in [0,1): even scales take the
        // floor split directly; odd scales with a fractional part write
        // t = (k+1) - (1 - frac).
        let (pos, sigma) = if scale.rem_euclid(2) == 0 || frac.is_zero() {
            (pos, frac)
        } else {
            (
                pos.checked_add(1)
                    .ok_or_else(|| CoreError::geometry("position out of i64 range"))?,
                Q::one() - frac,
            )
        };
        let iv = DyadicInterval::new(scale, pos, sigma)?;
        debug_assert_eq!(&iv.lo(), lo);
        Ok(iv)
    }

    /// Serialized form `lo@scale` with `lo` an exact rational.
    pub fn to_token(&self) -> String {
        format!("{}@{}", format_q(&self.lo()), self.scale)
    }

    pub fn from_token(tok: &str) -> Result<Self, CoreError> {
        let (lo, sc) = tok
            .split_once('@')
            .ok_or_else(|| CoreError::parse(format!("bad interval token {tok:?}")))?;
        let lo = parse_q(lo)?;
        let scale: i32 =
            sc.parse().map_err(|_| CoreError::parse(format!("bad scale in token {tok:?}")))?;
        DyadicInterval::from_lo_scale(&lo, scale)
    }
}

impl fmt::Display for DyadicInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", format_q(&self.lo()), format_q(&self.hi()))
    }
}

/// Deterministic ordering: by scale, then left endpoint, then shift.
impl PartialOrd for DyadicInterval {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for DyadicInterval {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.scale
            .cmp(&other.scale)
            .then_with(|| self.lo().cmp(&other.lo()))
            .then_with(|| self.shift.cmp(&other.shift))
    }
}

/// Shift alphabets. The two quoted presets consist of integers and hence
/// normalize to the plain mesh; the thirds preset is the alphabet with the
/// covering property.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShiftPreset {
    /// {1, 2, 3}
    GridAlphabet,
    /// {0, 1, 3}
    TileAlphabet,
    /// {0, 1/3, 2/3}
    Thirds,
}

impl ShiftPreset {
    pub fn shifts(&self) -> Vec<Q> {
        match self {
            ShiftPreset::GridAlphabet => vec![q_int(1), q_int(2), q_int(3)],
            ShiftPreset::TileAlphabet => vec![q_int(0), q_int(1), q_int(3)],
            ShiftPreset::Thirds => vec![q_int(0), q_ratio(1, 3), q_ratio(2, 3)],
        }
    }
}

/// Axis-aligned cube of a shifted n-dyadic mesh: one interval per axis,
/// all at the same scale.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MeshCube {
    pub intervals: Vec<DyadicInterval>,
}

impl MeshCube {
    pub fn new(intervals: Vec<DyadicInterval>) -> Result<Self, CoreError> {
        if intervals.is_empty() {
            return Err(CoreError::degenerate("empty cube"));
        }
        let s = intervals[0].scale();
        if intervals.iter().any(|iv| iv.scale() != s) {
            return Err(CoreError::geometry("cube sides must share one scale"));
        }
        Ok(MeshCube { intervals })
    }

    pub fn dim(&self) -> usize {
        self.intervals.len()
    }
    pub fn scale(&self) -> i32 {
        self.intervals[0].scale()
    }
    pub fn side(&self) -> Q {
        self.intervals[0].length()
    }

    pub fn dilate(&self, c: &Q) -> Vec<RatInterval> {
        self.intervals.iter().map(|iv| iv.dilate(c)).collect()
    }

    /// Dilated boxes intersect iff every coordinate pair overlaps.
    pub fn dilates_disjoint(&self, other: &MeshCube, c: &Q) -> bool {
        self.intervals
            .iter()
            .zip(other.intervals.iter())
            .any(|(a, b)| a.dilate(c).interiors_disjoint(&b.dilate(c)))
    }
}

/// Cubes of the mesh `D^n_sigma` at the given scales meeting a window.
/// `shifts` holds one shift per axis; `window` one closed rational
/// interval per axis. Cubes are returned in deterministic order.
pub fn mesh_generate(
    scales: &[i32],
    shifts: &[Q],
    window: &[RatInterval],
) -> Result<Vec<MeshCube>, CoreError> {
    let n = shifts.len();
    if n == 0 || window.len() != n {
        return Err(CoreError::geometry("shift and window dimensions must match and be positive"));
    }
    for w in window {
        if w.hi <= w.lo {
            return Err(CoreError::degenerate("empty window"));
        }
    }
    let mut out = Vec::new();
    let mut scales_sorted = scales.to_vec();
    scales_sorted.sort_unstable();
    scales_sorted.dedup();
    for &j in &scales_sorted {
        // Per-axis admissible positions.
        let mut axis_ivs: Vec<Vec<DyadicInterval>> = Vec::with_capacity(n);
        for axis in 0..n {
            let len = pow2(j);
            let sigma = shifts[axis].clone();
            let signed = if j.rem_euclid(2) == 0 { sigma.clone() } else { -sigma.clone() };
            // lo(k) = 2^j (k + signed) in [win.lo - 2^j, win.hi].
            let k_min = ((&window[axis].lo / &len) - &signed - Q::one()).ceil();
            let k_max = ((&window[axis].hi / &len) - &signed).floor();
            let k_min = k_min
                .to_integer()
                .to_i64()
                .ok_or_else(|| CoreError::geometry("window too wide for i64 positions"))?;
            let k_max = k_max
                .to_integer()
                .to_i64()
                .ok_or_else(|| CoreError::geometry("window too wide for i64 positions"))?;
            let mut ivs = Vec::new();
            for k in k_min..=k_max {
                let iv = DyadicInterval::new(j, k, sigma.clone())?;
                if iv.lo() < window[axis].hi && window[axis].lo < iv.hi() {
                    ivs.push(iv);
                }
            }
            axis_ivs.push(ivs);
        }
        // Cartesian product across axes.
        let mut idx = vec![0usize; n];
        if axis_ivs.iter().any(|v| v.is_empty()) {
            continue;
        }
        loop {
            let cube: Vec<DyadicInterval> =
                (0..n).map(|a| axis_ivs[a][idx[a]].clone()).collect();
            out.push(MeshCube::new(cube)?);
            let mut a = n;
            loop {
                if a == 0 {
                    break;
                }
                a -= 1;
                idx[a] += 1;
                if idx[a] < axis_ivs[a].len() {
                    break;
                }
                idx[a] = 0;
                if a == 0 {
                    break;
                }
            }
            if idx.iter().all(|&i| i == 0) {
                break;
            }
        }
    }
    Ok(out)
}

/// Search result of [`cover_in_shifted_mesh`].
#[derive(Debug, Clone)]
pub struct CoverWitness {
    pub cube: MeshCube,
    pub shifts: Vec<Q>,
}

/// Find a shifted mesh cube `Q'` with `target subset (7/10) Q'` and
/// `|Q'|` comparable to `|target|` (side ratio at most 8). Searches the
/// given shift alphabet per axis over a bounded scale range.
pub fn cover_in_shifted_mesh(
    target: &[RatInterval],
    alphabet: &[Q],
) -> Option<CoverWitness> {
    if target.is_empty() || alphabet.is_empty() {
        return None;
    }
    let seven_tenths = q_ratio(7, 10);
    let max_len = target.iter().map(|t| t.length()).max()?;
    if max_len <= Q::zero() {
        return None;
    }
    // Smallest scale with 2^j >= max side length.
    let mut j = 0i32;
    while pow2(j) < max_len {
        j += 1;
    }
    while pow2(j - 1) >= max_len {
        j -= 1;
    }
    for jj in j..=j + 3 {
        let len = pow2(jj);
        let mut chosen: Vec<(DyadicInterval, Q)> = Vec::with_capacity(target.len());
        let mut ok = true;
        'axis: for t in target {
            for sigma in alphabet {
                let signed =
                    if jj.rem_euclid(2) == 0 { sigma.clone() } else { -sigma.clone() };
                // Candidate positions straddling the target.
                let k0 = ((&t.lo / &len) - &signed).floor().to_integer().to_i64();
                let Some(k0) = k0 else {
                    continue;
                };
                for k in k0 - 1..=k0 + 1 {
                    let Ok(iv) = DyadicInterval::new(jj, k, sigma.clone()) else {
                        continue;
                    };
                    if iv.dilate(&seven_tenths).contains_closed(t) {
                        chosen.push((iv, sigma.clone()));
                        continue 'axis;
                    }
                }
            }
            ok = false;
            break;
        }
        if ok {
            let shifts = chosen.iter().map(|(_, s)| s.clone()).collect();
            let cube = MeshCube::new(chosen.into_iter().map(|(iv, _)| iv).collect()).ok()?;
            return Some(CoverWitness { cube, shifts });
        }
    }
    None
}

/// Rectangular tile of unit area: spatial interval from the plain mesh,
/// frequency interval from any shifted mesh.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tile {
    spatial: DyadicInterval,
    freq: DyadicInterval,
}

impl Tile {
    pub fn new(spatial: DyadicInterval, freq: DyadicInterval) -> Result<Self, CoreError> {
        if !spatial.shift().is_zero() {
            return Err(CoreError::geometry("spatial interval must come from the plain mesh"));
        }
        if spatial.scale() + freq.scale() != 0 {
            return Err(CoreError::geometry(format!(
                "tile area must be 1: spatial scale {} + frequency scale {} != 0",
                spatial.scale(),
                freq.scale()
            )));
        }
        Ok(Tile { spatial, freq })
    }

    pub fn spatial(&self) -> &DyadicInterval {
        &self.spatial
    }
    pub fn freq(&self) -> &DyadicInterval {
        &self.freq
    }
}

impl PartialOrd for Tile {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Tile {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.spatial.cmp(&other.spatial).then_with(|| self.freq.cmp(&other.freq))
    }
}

/// Tile order relations, strongest first.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TileOrder {
    Eq,
    Lt,
    Leq,
    Lesssim,
    LesssimPrime,
    Incomparable,
}

/// `p_prime < p` iff the spatial interval strictly nests and the 3-dilated
/// frequency intervals nest the other way.
pub fn tile_lt(p_prime: &Tile, p: &Tile) -> bool {
    p.spatial.strictly_contains(&p_prime.spatial)
        && p_prime.freq.dilate(&q_int(3)).contains_closed(&p.freq.dilate(&q_int(3)))
}

pub fn tile_leq(p_prime: &Tile, p: &Tile) -> bool {
    p_prime == p || tile_lt(p_prime, p)
}

/// Weak order with configurable dilation (the quoted constant is 1e7;
/// desk tests use 3).
pub fn tile_lesssim(p_prime: &Tile, p: &Tile, dilation: &Q) -> bool {
    p.spatial.contains(&p_prime.spatial)
        && p_prime.freq.dilate(dilation).contains_closed(&p.freq.dilate(dilation))
}

pub fn tile_lesssim_prime(p_prime: &Tile, p: &Tile, dilation: &Q) -> bool {
    tile_lesssim(p_prime, p, dilation) && !tile_leq(p_prime, p)
}

/// Strongest relation of `p_prime` against `p`. Strict spatial nesting in
/// a dyadic mesh halves the length, so `lt` implies `lesssim` for every
/// dilation >= 3 and the reachable tags are Eq, Lt, LesssimPrime,
/// Incomparable; Leq and Lesssim remain as queryable predicates.
pub fn tile_order(p_prime: &Tile, p: &Tile, dilation: &Q) -> TileOrder {
    if p_prime == p {
        TileOrder::Eq
    } else if tile_lt(p_prime, p) {
        TileOrder::Lt
    } else if tile_lesssim(p_prime, p, dilation) {
        TileOrder::LesssimPrime
    } else {
        TileOrder::Incomparable
    }
}

pub fn order_holds(rel: TileOrder, p_prime: &Tile, p: &Tile, dilation: &Q) -> bool {
    match rel {
        TileOrder::Eq => p_prime == p,
        TileOrder::Lt => tile_lt(p_prime, p),
        TileOrder::Leq => tile_leq(p_prime, p),
        TileOrder::Lesssim => tile_lesssim(p_prime, p, dilation),
        TileOrder::LesssimPrime => tile_lesssim_prime(p_prime, p, dilation),
        TileOrder::Incomparable => tile_order(p_prime, p, dilation) == TileOrder::Incomparable,
    }
}

/// Three tiles over one spatial interval; the frequency cube is the
/// product of the three frequency intervals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TriTile {
    tiles: [Tile; 3],
}

impl TriTile {
    pub fn new(tiles: [Tile; 3]) -> Result<Self, CoreError> {
        let i0 = tiles[0].spatial().clone();
        if tiles.iter().any(|t| t.spatial() != &i0) {
            return Err(CoreError::geometry("tri-tile components must share one spatial interval"));
        }
        Ok(TriTile { tiles })
    }

    pub fn component(&self, i: usize) -> &Tile {
        &self.tiles[i]
    }
    pub fn spatial(&self) -> &DyadicInterval {
        self.tiles[0].spatial()
    }
    pub fn freq(&self, i: usize) -> &DyadicInterval {
        self.tiles[i].freq()
    }

    pub fn freq_cube(&self) -> MeshCube {
        MeshCube::new(self.tiles.iter().map(|t| t.freq().clone()).collect()).unwrap()
    }

    pub fn shift_vector(&self) -> Vec<Q> {
        self.tiles.iter().map(|t| t.freq().shift().clone()).collect()
    }

    /// Unique component whose frequency interval contains 0; `None` when
    /// no component does (two or more is a rank violation).
    pub fn overlapping_component(&self) -> Result<Option<usize>, CoreError> {
        let zero = Q::zero();
        let hits: Vec<usize> =
            (0..3).filter(|&i| self.tiles[i].freq().contains_point(&zero)).collect();
        match hits.len() {
            0 => Ok(None),
            1 => Ok(Some(hits[0])),
            _ => Err(CoreError::geometry(format!(
                "{} components contain frequency 0; rank-0 structure allows one",
                hits.len()
            ))),
        }
    }
}

impl PartialOrd for TriTile {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for TriTile {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.tiles.cmp(&other.tiles)
    }
}

/// Product tri-tile: x-direction tri-tile (rank-1 family) times
/// y-direction tri-tile (rank-0 family). Component `i` of the product is
/// the rectangle pair `B_i x P_i`; the spatial rectangle `R` is
/// `I_x x I_y`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProductTriTile {
    pub x: TriTile,
    pub y: TriTile,
}

impl ProductTriTile {
    pub fn new(x: TriTile, y: TriTile) -> Self {
        ProductTriTile { x, y }
    }

    /// Area of the spatial rectangle R = I_x x I_y.
    pub fn rect_area(&self) -> Q {
        self.x.spatial().length() * self.y.spatial().length()
    }

    /// Scale index j of the y tri-tile: |I_y| = 2^{-j}.
    pub fn y_scale_index(&self) -> i32 {
        -self.y.spatial().scale()
    }
}

impl PartialOrd for ProductTriTile {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for ProductTriTile {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.x.cmp(&other.x).then_with(|| self.y.cmp(&other.y))
    }
}

/// Overlap class of the y tri-tile: the overlapping component when one
/// exists, component 1 (index 0) by convention otherwise.
pub fn overlapping_index(s: &ProductTriTile) -> Result<usize, CoreError> {
    Ok(s.y.overlapping_component()?.unwrap_or(0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct RankTag {
    pub rank1_sparse_x: bool,
    pub rank0_y: bool,
}

#[derive(Debug, Clone)]
pub struct TileCollection {
    pub tiles: Vec<ProductTriTile>,
    pub rank_tag: Option<RankTag>,
    /// Separation constant for sparsity checks (quoted value 1e9; desk
    /// tests use 4).
    pub c_sep: Q,
    /// Dilation for the near-order relation in rank checks (quoted value
    /// 1e7; desk tests 10). Must exceed the tile order's dilation 3:
    /// rank 1 wants components beside an ordered one to sit within the
    /// larger dilate while escaping the order itself, which is vacuous
    /// when the two dilations coincide.
    pub lesssim_dilation: Q,
}

impl TileCollection {
    pub fn new(tiles: Vec<ProductTriTile>) -> Self {
        TileCollection {
            tiles,
            rank_tag: None,
            c_sep: q_int(4),
            lesssim_dilation: q_int(10),
        }
    }

    pub fn len(&self) -> usize {
        self.tiles.len()
    }
    pub fn is_empty(&self) -> bool {
        self.tiles.is_empty()
    }
}

/// First violating pair of the sparsity conditions, if any: distinct
/// cubes must either differ in scale by more than the separation factor
/// or have disjoint dilates.
pub fn sparsity_violation(cubes: &[MeshCube], c_sep: &Q) -> Option<(usize, usize)> {
    for i in 0..cubes.len() {
        for jx in i + 1..cubes.len() {
            let (a, b) = (&cubes[i], &cubes[jx]);
            if a.scale() == b.scale() {
                if a == b || !a.dilates_disjoint(b, c_sep) {
                    return Some((i, jx));
                }
            } else {
                let (small, big) = if a.side() < b.side() { (a, b) } else { (b, a) };
                if c_sep * small.side() >= big.side() {
                    return Some((i, jx));
                }
            }
        }
    }
    None
}

pub fn is_sparse_cubes(cubes: &[MeshCube], c_sep: &Q) -> bool {
    sparsity_violation(cubes, c_sep).is_none()
}

/// Sparsity of a product collection: the x-direction frequency cubes form
/// a sparse family. Sparsity is a property of the distinct cubes — many
/// tiles may legitimately share one frequency cube at different spatial
/// positions — so duplicates are collapsed before the pairwise check.
pub fn is_sparse(collection: &TileCollection) -> bool {
    let mut cubes: Vec<MeshCube> = Vec::new();
    for s in &collection.tiles {
        let cube = s.x.freq_cube();
        if !cubes.contains(&cube) {
            cubes.push(cube);
        }
    }
    is_sparse_cubes(&cubes, &collection.c_sep)
}

/// Partition cube indices into sparse parts: scales are grouped into
/// residue classes spaced so that distinct in-class scales beat the
/// separation factor, then cubes first-fit into parts within each class.
/// The part count is bounded in terms of `c_sep` alone for mesh inputs.
pub fn split_sparse(cubes: &[MeshCube], c_sep: &Q) -> Vec<Vec<usize>> {
    // Smallest g with 2^g > c_sep.
    let mut g = 1i32;
    while &pow2(g) <= c_sep {
        g += 1;
    }
    let mut order: Vec<usize> = (0..cubes.len()).collect();
    order.sort_by(|&a, &b| {
        cubes[a]
            .scale()
            .cmp(&cubes[b].scale())
            .then_with(|| cubes[a].intervals.iter().map(|iv| iv.lo()).collect::<Vec<_>>()
                .cmp(&cubes[b].intervals.iter().map(|iv| iv.lo()).collect::<Vec<_>>()))
    });
    // parts per residue class
    let mut classes: BTreeMap<i32, Vec<Vec<usize>>> = BTreeMap::new();
    for idx in order {
        let class = cubes[idx].scale().rem_euclid(g);
        let parts = classes.entry(class).or_default();
        let mut placed = false;
        for part in parts.iter_mut() {
            let ok = part.iter().all(|&other| {
                let member = [cubes[other].clone(), cubes[idx].clone()];
                sparsity_violation(&member, c_sep).is_none()
            });
            if ok {
                part.push(idx);
                placed = true;
                break;
            }
        }
        if !placed {
            parts.push(vec![idx]);
        }
    }
    classes.into_values().flatten().collect()
}

/// Detailed result of the structural rank verification.
#[derive(Debug, Clone, Default)]
pub struct RankReport {
    pub rank1_x: bool,
    pub rank0_y: bool,
    pub sparse_x: bool,
    pub violations: Vec<String>,
}

impl RankReport {
    pub fn all_ok(&self) -> bool {
        self.rank1_x && self.rank0_y && self.sparse_x
    }
}

/// Check the two rank-1 bullets on the x tri-tiles, the rank-0 shape of
/// every y tri-tile, and sparsity of the x frequency cubes.
pub fn rank_check(collection: &TileCollection) -> RankReport {
    let mut report = RankReport { rank1_x: true, rank0_y: true, sparse_x: true, violations: vec![] };
    let dil = &collection.lesssim_dilation;
    let tiles = &collection.tiles;
    for (a, sa) in tiles.iter().enumerate() {
        for (b, sb) in tiles.iter().enumerate() {
            if a == b {
                continue;
            }
            let (xa, xb) = (&sa.x, &sb.x);
            // Bullet 1 (symmetric, check each ordered pair once suffices
            // for reporting): one shared frequency interval forces all.
            if a < b {
                let shared = (0..3).any(|i| xa.freq(i) == xb.freq(i));
                let all = (0..3).all(|i| xa.freq(i) == xb.freq(i));
                if shared && !all {
                    report.rank1_x = false;
                    report
                        .violations
                        .push(format!("x tri-tiles {a} and {b} share one frequency interval but not all"));
                }
            }
            // Bullet 2 (ordered): smaller spatial side with one leq forces
            // lesssim-prime in the other components.
            if xa.spatial().length() < xb.spatial().length() {
                for j in 0..3 {
                    if tile_leq(xa.component(j), xb.component(j)) {
                        for i in 0..3 {
                            if i != j && !tile_lesssim_prime(xa.component(i), xb.component(i), dil)
                            {
                                report.rank1_x = false;
                                report.violations.push(format!(
                                    "x tri-tiles {a} <= {b} in component {j} but component {i} is not lesssim-prime"
                                ));
                            }
                        }
                    }
                }
            }
        }
    }
    for (a, s) in tiles.iter().enumerate() {
        match s.y.overlapping_component() {
            Err(e) => {
                report.rank0_y = false;
                report.violations.push(format!("y tri-tile {a}: {e}"));
            }
            Ok(overlap) => {
                let inv_len = pow2(-s.y.spatial().scale());
                let expected_lo = inv_len.clone();
                let expected_hi = &inv_len + &inv_len;
                for i in 0..3 {
                    if Some(i) == overlap {
                        continue;
                    }
                    let w = s.y.freq(i);
                    if w.lo() != expected_lo || w.hi() != expected_hi {
                        report.rank0_y = false;
                        report.violations.push(format!(
                            "y tri-tile {a} component {i} must be [1/|I|, 2/|I|) = [{}, {})",
                            format_q(&expected_lo),
                            format_q(&expected_hi)
                        ));
                    }
                }
            }
        }
    }
    // Sparsity concerns the distinct cubes; tiles sharing one frequency
    // cube at different spatial positions are a single entry here.
    let mut cubes: Vec<MeshCube> = Vec::new();
    for s in tiles {
        let cube = s.x.freq_cube();
        if !cubes.contains(&cube) {
            cubes.push(cube);
        }
    }
    if let Some((i, j)) = sparsity_violation(&cubes, &collection.c_sep) {
        report.sparse_x = false;
        report.violations.push(format!("x frequency cubes {i} and {j} violate sparsity"));
    }
    report
}

/// Partition a collection into cells keyed by (overlap class, y scale
/// index): every tile lands in exactly one cell.
pub fn collection_split(
    collection: &TileCollection,
) -> Result<BTreeMap<(usize, i32), Vec<usize>>, CoreError> {
    let mut cells: BTreeMap<(usize, i32), Vec<usize>> = BTreeMap::new();
    for (idx, s) in collection.tiles.iter().enumerate() {
        let i = overlapping_index(s)?;
        let j = s.y_scale_index();
        cells.entry((i, j)).or_default().push(idx);
    }
    Ok(cells)
}

const TEXT_HEADER: &str = "# bplab-tiles v1";

/// Line-oriented text serialization: header with rank tags and constants,
/// then one product tri-tile per line as eight `lo@scale` interval tokens
/// (x spatial, y spatial, three x frequencies, three y frequencies).
pub fn collection_to_text(c: &TileCollection) -> String {
    let mut out = String::new();
    out.push_str(TEXT_HEADER);
    out.push('\n');
    match c.rank_tag {
        Some(tag) => {
            out.push_str(&format!(
                "# rank: rank1x-sparse={} rank0y={}\n",
                tag.rank1_sparse_x, tag.rank0_y
            ));
        }
        None => out.push_str("# rank: untagged\n"),
    }
    out.push_str(&format!("# c_sep: {}\n", format_q(&c.c_sep)));
    out.push_str(&format!("# lesssim_dilation: {}\n", format_q(&c.lesssim_dilation)));
    out.push_str(&format!("# count: {}\n", c.tiles.len()));
    for s in &c.tiles {
        out.push_str("tile ");
        out.push_str(&tile_tokens(s));
        out.push('\n');
    }
    out
}

/// The eight `lo@scale` interval tokens of one product tri-tile, in the
/// text-format field order.
pub fn tile_tokens(s: &ProductTriTile) -> String {
    let mut fields = vec![s.x.spatial().to_token(), s.y.spatial().to_token()];
    for i in 0..3 {
        fields.push(s.x.freq(i).to_token());
    }
    for i in 0..3 {
        fields.push(s.y.freq(i).to_token());
    }
    fields.join(" ")
}

pub fn collection_from_text(text: &str) -> Result<TileCollection, CoreError> {
    let mut lines = text.lines();
    let first = lines.next().ok_or_else(|| CoreError::parse("empty tile file"))?;
    if first.trim() != TEXT_HEADER {
        return Err(CoreError::parse(format!("unexpected header {first:?}")));
    }
    let mut rank_tag = None;
    let mut c_sep = q_int(4);
    let mut dilation = q_int(3);
    let mut declared_count: Option<usize> = None;
    let mut tiles = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("# rank:") {
            let rest = rest.trim();
            if rest != "untagged" {
                let mut r1 = None;
                let mut r0 = None;
                for tokenized in rest.split_whitespace() {
                    if let Some(v) = tokenized.strip_prefix("rank1x-sparse=") {
                        r1 = v.parse::<bool>().ok();
                    } else if let Some(v) = tokenized.strip_prefix("rank0y=") {
                        r0 = v.parse::<bool>().ok();
                    }
                }
                match (r1, r0) {
                    (Some(a), Some(b)) => {
                        rank_tag = Some(RankTag { rank1_sparse_x: a, rank0_y: b })
                    }
                    _ => return Err(CoreError::parse(format!("bad rank line {line:?}"))),
                }
            }
        } else if let Some(rest) = line.strip_prefix("# c_sep:") {
            c_sep = parse_q(rest)?;
        } else if let Some(rest) = line.strip_prefix("# lesssim_dilation:") {
            dilation = parse_q(rest)?;
        } else if let Some(rest) = line.strip_prefix("# count:") {
            declared_count = Some(
                rest.trim()
                    .parse()
                    .map_err(|_| CoreError::parse(format!("bad count line {line:?}")))?,
            );
        } else if line.starts_with('#') {
            continue;
        } else if let Some(rest) = line.strip_prefix("tile ") {
            let toks: Vec<&str> = rest.split_whitespace().collect();
            if toks.len() != 8 {
                return Err(CoreError::parse(format!(
                    "line {}: expected 8 interval tokens, found {}",
                    lineno + 2,
                    toks.len()
                )));
            }
            let ivs: Vec<DyadicInterval> = toks
                .iter()
                .map(|t| DyadicInterval::from_token(t))
                .collect::<Result<_, _>>()?;
            let x_sp = ivs[0].clone();
            let y_sp = ivs[1].clone();
            let x = TriTile::new([
                Tile::new(x_sp.clone(), ivs[2].clone())?,
                Tile::new(x_sp.clone(), ivs[3].clone())?,
                Tile::new(x_sp.clone(), ivs[4].clone())?,
            ])?;
            let y = TriTile::new([
                Tile::new(y_sp.clone(), ivs[5].clone())?,
                Tile::new(y_sp.clone(), ivs[6].clone())?,
                Tile::new(y_sp.clone(), ivs[7].clone())?,
            ])?;
            tiles.push(ProductTriTile::new(x, y));
        } else {
            return Err(CoreError::parse(format!("line {}: unrecognized {line:?}", lineno + 2)));
        }
    }
    if let Some(n) = declared_count {
        if n != tiles.len() {
            return Err(CoreError::parse(format!(
                "count header says {n} but file holds {} tiles",
                tiles.len()
            )));
        }
    }
    let mut c = TileCollection::new(tiles);
    c.rank_tag = rank_tag;
    c.c_sep = c_sep;
    c.lesssim_dilation = dilation;
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn di(scale: i32, pos: i64) -> DyadicInterval {
        DyadicInterval::unshifted(scale, pos)
    }

    #[test]
    fn endpoints_follow_the_shift_formula() {
        // j = 1 (odd): signed shift is -sigma.
        let iv = DyadicInterval::new(1, 3, q_ratio(1, 3)).unwrap();
        assert_eq!(iv.lo(), q_ratio(2 * 3 * 3 - 2, 3)); // 2*(3 - 1/3) = 16/3
        assert_eq!(iv.hi(), q_ratio(22, 3));
        // j = 2 (even): signed shift is +sigma.
        let iv = DyadicInterval::new(2, -1, q_ratio(1, 3)).unwrap();
        assert_eq!(iv.lo(), q_ratio(-8, 3));
    }

    #[test]
    fn integer_shifts_fold_into_position() {
        let a = DyadicInterval::new(1, 0, q_int(1)).unwrap();
        let b = DyadicInterval::new(1, -1, q_int(0)).unwrap();
        assert_eq!(a, b);
        assert!(a.shift().is_zero());
    }

    #[test]
    fn mesh_window_scale1_integer_shift_equals_plain_mesh() {
        let window = [RatInterval::new(q_int(0), q_int(8))];
        let shifted = mesh_generate(&[1], &[q_int(1)], &window).unwrap();
        let plain = mesh_generate(&[1], &[q_int(0)], &window).unwrap();
        let lows = |cubes: &[MeshCube]| -> Vec<Q> {
            let mut v: Vec<Q> = cubes.iter().map(|c| c.intervals[0].lo()).collect();
            v.sort();
            v
        };
        assert_eq!(lows(&shifted), lows(&plain));
        assert_eq!(shifted.len(), 4);
    }

    #[test]
    fn covering_search_succeeds_with_thirds() {
        let alphabet = ShiftPreset::Thirds.shifts();
        // Intervals straddling 0 and awkward rational targets.
        let targets = [
            RatInterval::new(q_ratio(-1, 7), q_ratio(1, 9)),
            RatInterval::new(q_ratio(5, 3), q_ratio(12, 5)),
            RatInterval::new(q_int(-3), q_ratio(-13, 5)),
            RatInterval::new(q_ratio(999, 1000), q_ratio(1001, 1000)),
        ];
        for t in &targets {
            let w = cover_in_shifted_mesh(std::slice::from_ref(t), &alphabet)
                .unwrap_or_else(|| panic!("no cover for {t:?}"));
            let dil = w.cube.intervals[0].dilate(&q_ratio(7, 10));
            assert!(dil.contains_closed(t));
            assert!(w.cube.side() <= q_int(8) * t.length());
        }
        // 2D cube target.
        let t2 = [
            RatInterval::new(q_ratio(-1, 5), q_ratio(1, 5)),
            RatInterval::new(q_ratio(1, 3), q_ratio(2, 3)),
        ];
        let w = cover_in_shifted_mesh(&t2, &alphabet).expect("2d cover");
        for (axis, t) in t2.iter().enumerate() {
            assert!(w.cube.intervals[axis].dilate(&q_ratio(7, 10)).contains_closed(t));
        }
    }

    #[test]
    fn integer_alphabets_cannot_cover_zero_straddlers() {
        let t = RatInterval::new(q_ratio(-1, 100), q_ratio(1, 100));
        for preset in [ShiftPreset::GridAlphabet, ShiftPreset::TileAlphabet] {
            assert!(
                cover_in_shifted_mesh(std::slice::from_ref(&t), &preset.shifts()).is_none(),
                "integer preset {preset:?} should degenerate to the plain mesh"
            );
        }
    }

    #[test]
    fn tile_area_enforced() {
        assert!(Tile::new(di(-1, 0), di(1, 0)).is_ok());
        assert!(Tile::new(di(-1, 0), di(2, 0)).is_err());
        let shifted_spatial = DyadicInterval::new(0, 0, q_ratio(1, 3)).unwrap();
        assert!(Tile::new(shifted_spatial, di(0, 0)).is_err());
    }

    #[test]
    fn order_example_from_definition() {
        // P' = [0,1/2) x [0,2), P = [0,1) x [0,1).
        let p_prime = Tile::new(di(-1, 0), di(1, 0)).unwrap();
        let p = Tile::new(di(0, 0), di(0, 0)).unwrap();
        assert_eq!(tile_order(&p_prime, &p, &q_int(3)), TileOrder::Lt);
        assert!(tile_leq(&p_prime, &p));
        // Reflexivity.
        assert_eq!(tile_order(&p, &p, &q_int(3)), TileOrder::Eq);
        assert!(order_holds(TileOrder::Leq, &p, &p, &q_int(3)));
    }

    #[test]
    fn lt_implies_lesssim_for_larger_dilations() {
        let p_prime = Tile::new(di(-2, 1), di(2, 0)).unwrap();
        let p = Tile::new(di(0, 0), di(0, 1)).unwrap();
        if tile_lt(&p_prime, &p) {
            for d in [q_int(3), q_int(10), q_int(10_000_000)] {
                assert!(tile_lesssim(&p_prime, &p, &d));
            }
        }
        // Disjoint spatial intervals are incomparable.
        let far = Tile::new(di(0, 5), di(0, 0)).unwrap();
        assert_eq!(tile_order(&far, &p, &q_int(3)), TileOrder::Incomparable);
    }

    #[test]
    fn sparsity_detects_equal_scale_crowding() {
        let cube = |pos: i64| MeshCube::new(vec![di(0, pos)]).unwrap();
        // Dilates 4*[k, k+1) overlap for adjacent k.
        assert!(!is_sparse_cubes(&[cube(0), cube(1)], &q_int(4)));
        assert!(is_sparse_cubes(&[cube(0), cube(10)], &q_int(4)));
        // Scale gap: lengths 1 vs 4 fails 4*1 < 4; 1 vs 8 passes.
        let big4 = MeshCube::new(vec![di(2, 5)]).unwrap();
        let big8 = MeshCube::new(vec![di(3, 5)]).unwrap();
        assert!(!is_sparse_cubes(&[cube(0), big4], &q_int(4)));
        assert!(is_sparse_cubes(&[cube(0), big8], &q_int(4)));
    }

    #[test]
    fn split_sparse_covers_dense_grid_with_bounded_parts() {
        let cubes: Vec<MeshCube> =
            (0..16).map(|k| MeshCube::new(vec![di(0, k)]).unwrap()).collect();
        let parts = split_sparse(&cubes, &q_int(4));
        let total: usize = parts.iter().map(|p| p.len()).sum();
        assert_eq!(total, 16);
        for part in &parts {
            let sel: Vec<MeshCube> = part.iter().map(|&i| cubes[i].clone()).collect();
            assert!(is_sparse_cubes(&sel, &q_int(4)), "part {part:?} not sparse");
        }
        // Equal-scale cubes at unit spacing need about c_sep+1 parts.
        assert!(parts.len() <= 6, "got {} parts", parts.len());
        let mut seen: Vec<usize> = parts.concat();
        seen.sort_unstable();
        assert_eq!(seen, (0..16).collect::<Vec<_>>());
    }

    #[test]
    fn split_sparse_separates_close_scales() {
        let cubes = vec![
            MeshCube::new(vec![di(0, 0)]).unwrap(),
            MeshCube::new(vec![di(1, 0)]).unwrap(),
            MeshCube::new(vec![di(2, 0)]).unwrap(),
            MeshCube::new(vec![di(3, 0)]).unwrap(),
        ];
        let parts = split_sparse(&cubes, &q_int(4));
        for part in &parts {
            let sel: Vec<MeshCube> = part.iter().map(|&i| cubes[i].clone()).collect();
            assert!(is_sparse_cubes(&sel, &q_int(4)));
        }
    }

    fn y_tri(scale_j: i32, pos: i64, overlap: bool) -> TriTile {
        // |I_y| = 2^{-j}; frequency length 2^{j}.
        let sp = di(-scale_j, pos);
        let standard = di(scale_j, 1); // [2^j, 2^{j+1})
        let first = if overlap { di(scale_j, 0) } else { standard.clone() };
        TriTile::new([
            Tile::new(sp.clone(), first).unwrap(),
            Tile::new(sp.clone(), standard.clone()).unwrap(),
            Tile::new(sp, standard).unwrap(),
        ])
        .unwrap()
    }

    fn x_tri(scale_j: i32, pos: i64, base: i64) -> TriTile {
        // Three consecutive frequency intervals at the dual scale.
        let sp = di(-scale_j, pos);
        let f = |m: i64| di(scale_j, m);
        TriTile::new([
            Tile::new(sp.clone(), f(base)).unwrap(),
            Tile::new(sp.clone(), f(base + 1)).unwrap(),
            Tile::new(sp, f(base + 2)).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn overlap_classes_and_cell_split() {
        let s1 = ProductTriTile::new(x_tri(1, 0, 4), y_tri(1, 0, true));
        let s2 = ProductTriTile::new(x_tri(1, 1, 9), y_tri(1, 1, false));
        let s3 = ProductTriTile::new(x_tri(2, 0, 4), y_tri(2, 0, true));
        assert_eq!(overlapping_index(&s1).unwrap(), 0);
        assert_eq!(overlapping_index(&s2).unwrap(), 0); // convention
        let c = TileCollection::new(vec![s1, s2, s3]);
        let cells = collection_split(&c).unwrap();
        assert_eq!(cells.len(), 2);
        assert_eq!(cells[&(0, 1)].len(), 2);
        assert_eq!(cells[&(0, 2)].len(), 1);
        let total: usize = cells.values().map(|v| v.len()).sum();
        assert_eq!(total, c.len());
    }

    #[test]
    fn rank_report_accepts_standard_families() {
        let tiles = vec![
            ProductTriTile::new(x_tri(0, 0, 0), y_tri(0, 0, true)),
            ProductTriTile::new(x_tri(0, 1, 8), y_tri(0, 1, false)),
        ];
        let mut c = TileCollection::new(tiles);
        c.c_sep = q_int(4);
        let report = rank_check(&c);
        assert!(report.all_ok(), "violations: {:?}", report.violations);
    }

    #[test]
    fn rank_report_rejects_bad_nonoverlap_interval() {
        // Non-overlapping component not equal to [1/|I|, 2/|I|).
        let sp = di(0, 0);
        let bad = TriTile::new([
            Tile::new(sp.clone(), di(0, 3)).unwrap(),
            Tile::new(sp.clone(), di(0, 1)).unwrap(),
            Tile::new(sp, di(0, 5)).unwrap(),
        ])
        .unwrap();
        let c = TileCollection::new(vec![ProductTriTile::new(x_tri(0, 0, 6), bad)]);
        let report = rank_check(&c);
        assert!(!report.rank0_y);
    }

    #[test]
    fn rank_report_rejects_shared_interval_mismatch() {
        // Same omega in component 0 but different elsewhere.
        let a = x_tri(0, 0, 0);
        let sp = di(0, 3);
        let b = TriTile::new([
            Tile::new(sp.clone(), di(0, 0)).unwrap(),
            Tile::new(sp.clone(), di(0, 7)).unwrap(),
            Tile::new(sp, di(0, 8)).unwrap(),
        ])
        .unwrap();
        let y = y_tri(0, 0, false);
        let c = TileCollection::new(vec![
            ProductTriTile::new(a, y.clone()),
            ProductTriTile::new(b, y),
        ]);
        let report = rank_check(&c);
        assert!(!report.rank1_x);
    }

    #[test]
    fn text_roundtrip_preserves_geometry_exactly() {
        let tiles = vec![
            ProductTriTile::new(x_tri(1, 0, 4), y_tri(1, 0, true)),
            ProductTriTile::new(x_tri(2, -1, 9), y_tri(2, 3, false)),
        ];
        let mut c = TileCollection::new(tiles);
        c.rank_tag = Some(RankTag { rank1_sparse_x: true, rank0_y: true });
        c.c_sep = q_int(4);
        c.lesssim_dilation = q_int(3);
        let text = collection_to_text(&c);
        let back = collection_from_text(&text).unwrap();
        assert_eq!(back.tiles, c.tiles);
        assert_eq!(back.rank_tag, c.rank_tag);
        assert_eq!(back.c_sep, c.c_sep);
        assert_eq!(collection_to_text(&back), text);
    }

    #[test]
    fn text_parser_rejects_malformed_lines() {
        assert!(collection_from_text("nonsense").is_err());
        let mut good = collection_to_text(&TileCollection::new(vec![ProductTriTile::new(
            x_tri(0, 0, 0),
            y_tri(0, 0, true),
        )]));
        good.push_str("tile 1@0 1@0\n");
        assert!(collection_from_text(&good).is_err());
    }

    #[test]
    fn shifted_interval_token_roundtrip() {
        let iv = DyadicInterval::new(-3, 41, q_ratio(2, 3)).unwrap();
        let tok = iv.to_token();
        let back = DyadicInterval::from_token(&tok).unwrap();
        assert_eq!(back.lo(), iv.lo());
        assert_eq!(back.hi(), iv.hi());
        assert_eq!(back.scale(), iv.scale());
    }
}
