//! Exact rational calculus on the exponent simplex: classification of
//! Holder triples, named boundedness ranges as predicates and polygons,
//! convex hulls, affine interpolation, and figure export.
//!
//! A point is a triple `(a1, a2, a3)` of rationals with `a1 + a2 + a3 = 1`,
//! charted by its first two coordinates. Every decision in this module is
//! made in exact `BigRational` arithmetic; floating point never appears,
//! not even in the SVG emitter, whose layout runs in fixed-point rationals.
//!
//! Named regions come in three groups:
//!
//! * simplex strata `pi0`/`pi1`/`pi2`: admissible triples (each entry
//!   below one, at most one negative), triples with no nonpositive entry,
//!   and triples with all entries strictly between 0 and 1/2;
//! * the boundedness range `main` of the hybrid operator together with
//!   the ranges `t1`/`t2`/`t3` of its three model pieces, and the
//!   restricted-type triangles `triangle-a`/`triangle-b` plus the half
//!   `triangle-a-prime` that a swap symmetry reduces the first one to;
//! * a one-parameter family indexed by a sequence-space exponent `R`
//!   between 4/3 and 4 (the closed endpoints are accepted and give empty
//!   regions, values strictly outside are rejected): `ar` is a closed
//!   form, `ar1`/`ar2` are two generating pieces, and `ar-hull` is the
//!   convex hull of their union. Whether `ar` and `ar-hull` agree is not
//!   hard-coded either way; [`ar_hull_disagreement`] compares them on a
//!   rational grid and reports the exact disagreement set.
//!
//! Every named region is an open set cut out by strict inequalities, so
//! polygon edges default to open; hulls of explicit point sets are closed
//! and carry closed edge flags. Membership is decided twice over — by the
//! inequality predicate and by point-in-polygon location against the
//! clipped polygon — and the agreement of the two routes on a rational
//! grid is part of the test suite.

use num_traits::{One, Signed, ToPrimitive, Zero};
use std::fmt;
use std::str::FromStr;

use crate::error::CoreError;
use crate::grid::{format_q, parse_q, q_int, q_ratio, Q};

fn half() -> Q {
    q_ratio(1, 2)
}

/// A rational triple on the plane `a1 + a2 + a3 = 1`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ExponentTriple {
    parts: [Q; 3],
}

impl ExponentTriple {
    /// Builds a triple, rejecting inputs whose entries do not sum to one.
    pub fn new(a1: Q, a2: Q, a3: Q) -> Result<Self, CoreError> {
        let sum = &a1 + &a2 + &a3;
        if !sum.is_one() {
            return Err(CoreError::exponent(format!(
                "triple ({}, {}, {}) sums to {}, not 1",
                format_q(&a1),
                format_q(&a2),
                format_q(&a3),
                format_q(&sum)
            )));
        }
        Ok(ExponentTriple { parts: [a1, a2, a3] })
    }

    /// Completes a chart point `(a1, a2)` with `a3 = 1 - a1 - a2`.
    pub fn from_chart(a1: Q, a2: Q) -> Self {
        let a3 = Q::one() - &a1 - &a2;
        ExponentTriple { parts: [a1, a2, a3] }
    }

    /// Parses `"1/3,1/3,1/3"` (spaces allowed) and checks the sum.
    pub fn parse(text: &str) -> Result<Self, CoreError> {
        let parts: Vec<&str> = text.split(',').collect();
        if parts.len() != 3 {
            return Err(CoreError::parse(format!(
                "expected three comma-separated rationals, got `{text}`"
            )));
        }
        ExponentTriple::new(parse_q(parts[0])?, parse_q(parts[1])?, parse_q(parts[2])?)
    }

    pub fn parts(&self) -> &[Q; 3] {
        &self.parts
    }

    pub fn a1(&self) -> &Q {
        &self.parts[0]
    }

    pub fn a2(&self) -> &Q {
        &self.parts[1]
    }

    pub fn a3(&self) -> &Q {
        &self.parts[2]
    }

    /// Chart coordinates `(a1, a2)`.
    pub fn chart(&self) -> (Q, Q) {
        (self.parts[0].clone(), self.parts[1].clone())
    }

    /// Swaps the first two entries.
    pub fn bar(&self) -> Self {
        ExponentTriple {
            parts: [
                self.parts[1].clone(),
                self.parts[0].clone(),
                self.parts[2].clone(),
            ],
        }
    }

    /// Swaps the last two entries.
    pub fn swap23(&self) -> Self {
        ExponentTriple {
            parts: [
                self.parts[0].clone(),
                self.parts[2].clone(),
                self.parts[1].clone(),
            ],
        }
    }
}

impl fmt::Display for ExponentTriple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({}, {}, {})",
            format_q(&self.parts[0]),
            format_q(&self.parts[1]),
            format_q(&self.parts[2])
        )
    }
}

/// Where a triple sits relative to the simplex strata.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Classification {
    /// Every entry below one and at most one entry strictly negative.
    pub admissible: bool,
    /// Indices with a strictly positive entry.
    pub good: [bool; 3],
    /// Indices with a nonpositive entry.
    pub bad: [bool; 3],
    /// Number of strictly negative entries.
    pub negative_count: usize,
    /// Admissible with no bad index.
    pub pi1: bool,
    /// Every entry strictly between 0 and 1/2.
    pub pi2: bool,
}

/// Classifies a triple: admissibility, good/bad indices, strata membership.
pub fn classify_triple(alpha: &ExponentTriple) -> Classification {
    let one = Q::one();
    let h = half();
    let mut good = [false; 3];
    let mut bad = [false; 3];
    let mut negative_count = 0usize;
    for (i, a) in alpha.parts().iter().enumerate() {
        good[i] = a.is_positive();
        bad[i] = !a.is_positive();
        if a.is_negative() {
            negative_count += 1;
        }
    }
    let admissible = alpha.parts().iter().all(|a| *a < one) && negative_count <= 1;
    let pi1 = admissible && good.iter().all(|g| *g);
    let pi2 = alpha.parts().iter().all(|a| a.is_positive() && *a < h);
    Classification {
        admissible,
        good,
        bad,
        negative_count,
        pi1,
        pi2,
    }
}

/// Identifiers for the named regions of the exponent plane.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize,
)]
#[serde(rename_all = "kebab-case")]
pub enum RegionId {
    /// Admissible triples: each entry below one, at most one negative.
    Pi0,
    /// Admissible triples with every entry strictly positive.
    Pi1,
    /// Triples with every entry strictly between 0 and 1/2.
    Pi2,
    /// Boundedness range of the hybrid operator: the open quadrilateral
    /// `a1 > 0, a2 > 0, a1 + 2 a2 < 2, 2 a1 + a2 < 2` (with the unit
    /// bounds on the first two entries, which the slants already imply).
    Main,
    /// Range of the first model piece: `a1 + 2 a2 < 2` inside the band
    /// `0 < a1 < 1, 0 < a2 < 1`.
    T1,
    /// Range of the second model piece: `2 a1 + a2 < 2` inside the band.
    T2,
    /// Range of the third model piece: `a1 + a2 < 3/2` inside the band.
    T3,
    /// Open restricted-type triangle with a negative first entry.
    TriangleA,
    /// Open restricted-type triangle with a negative second entry.
    TriangleB,
    /// Half of `TriangleA` singled out by the swap of the last two
    /// entries; the full triangle is the hull of this half and its image.
    TriangleAPrime,
    /// Closed-form sequence-exponent region; takes the parameter R.
    Ar,
    /// First generating piece of the R-family; takes the parameter R.
    Ar1,
    /// Second generating piece: the same shape at the dual exponent with
    /// the last two entries swapped; takes the parameter R.
    Ar2,
    /// Convex hull of the union of `Ar1` and `Ar2`; takes the parameter R.
    ArHull,
}

impl RegionId {
    pub const ALL: [RegionId; 14] = [
        RegionId::Pi0,
        RegionId::Pi1,
        RegionId::Pi2,
        RegionId::Main,
        RegionId::T1,
        RegionId::T2,
        RegionId::T3,
        RegionId::TriangleA,
        RegionId::TriangleB,
        RegionId::TriangleAPrime,
        RegionId::Ar,
        RegionId::Ar1,
        RegionId::Ar2,
        RegionId::ArHull,
    ];

    /// Regions of the R-family take the sequence exponent as parameter.
    pub fn needs_parameter(self) -> bool {
        matches!(
            self,
            RegionId::Ar | RegionId::Ar1 | RegionId::Ar2 | RegionId::ArHull
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RegionId::Pi0 => "pi0",
            RegionId::Pi1 => "pi1",
            RegionId::Pi2 => "pi2",
            RegionId::Main => "main",
            RegionId::T1 => "t1",
            RegionId::T2 => "t2",
            RegionId::T3 => "t3",
            RegionId::TriangleA => "triangle-a",
            RegionId::TriangleB => "triangle-b",
            RegionId::TriangleAPrime => "triangle-a-prime",
            RegionId::Ar => "ar",
            RegionId::Ar1 => "ar1",
            RegionId::Ar2 => "ar2",
            RegionId::ArHull => "ar-hull",
        }
    }
}

impl fmt::Display for RegionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RegionId {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self, CoreError> {
        for id in RegionId::ALL {
            if id.as_str() == s {
                return Ok(id);
            }
        }
        Err(CoreError::parse(format!(
            "unknown region id `{s}`; expected one of pi0, pi1, pi2, main, t1, t2, t3, \
             triangle-a, triangle-b, triangle-a-prime, ar, ar1, ar2, ar-hull"
        )))
    }
}

/// Validates the sequence exponent of the R-family: `4/3 <= R <= 4`. The
/// endpoints are degenerate (the regions come out empty) but accepted;
/// values strictly outside are rejected.
pub fn validate_sequence_exponent(r: &Q) -> Result<(), CoreError> {
    if *r < q_ratio(4, 3) || *r > q_int(4) {
        return Err(CoreError::exponent(format!(
            "sequence exponent R must lie in [4/3, 4], got {}",
            format_q(r)
        )));
    }
    Ok(())
}

fn validate_parameter(id: RegionId, r: Option<&Q>) -> Result<Option<Q>, CoreError> {
    match (id.needs_parameter(), r) {
        (true, Some(r)) => {
            validate_sequence_exponent(r)?;
            Ok(Some(r.clone()))
        }
        (true, None) => Err(CoreError::exponent(format!(
            "region {id} needs the sequence exponent R"
        ))),
        (false, Some(_)) => Err(CoreError::exponent(format!(
            "region {id} takes no parameter"
        ))),
        (false, None) => Ok(None),
    }
}

/// Dual exponent `r'` with `1/r + 1/r' = 1`; requires `r > 1`.
pub fn conjugate_exponent(r: &Q) -> Result<Q, CoreError> {
    if *r <= Q::one() {
        return Err(CoreError::exponent(format!(
            "conjugate exponent needs r > 1, got {}",
            format_q(r)
        )));
    }
    Ok(r / &(r - Q::one()))
}

// ---------------------------------------------------------------------------
// Predicates.
// ---------------------------------------------------------------------------

/// Closed-form R-family region: admissible triples with
/// `0 < a1 < 1 - 4|1/2 - 1/R|` and `|a2 - a3| < 1 - 2|1/2 - 1/R|`.
fn ar_closed_form(alpha: &ExponentTriple, r: &Q) -> bool {
    let d = (half() - r.recip()).abs();
    classify_triple(alpha).admissible
        && alpha.a1().is_positive()
        && *alpha.a1() < Q::one() - q_int(4) * &d
        && (alpha.a2() - alpha.a3()).abs() < Q::one() - q_int(2) * &d
}

/// First generating piece: admissible triples with `a1 > 0`, `a2 > 1/R`,
/// `1/2 - a1/2 - |a2 - 1/2| - |1/R - 1/2| > 0`, and
/// `|1/R - 1/2| + a1/2 < 1/R`.
fn ar_piece_one(alpha: &ExponentTriple, r: &Q) -> bool {
    let t = r.recip();
    let d = (&t - half()).abs();
    let half_a1 = alpha.a1() / q_int(2);
    classify_triple(alpha).admissible
        && alpha.a1().is_positive()
        && *alpha.a2() > t
        && (half() - &half_a1 - (alpha.a2() - half()).abs() - &d).is_positive()
        && &d + &half_a1 < t
}

/// Second generating piece: the same inequalities at the dual exponent
/// with the roles of the second and third entries exchanged — `a1 > 0`,
/// `a3 > 1/R'`, `1/2 - a1/2 - |a3 - 1/2| - |1/R' - 1/2| > 0`, and
/// `|1/R' - 1/2| + a1/2 < 1/R'`.
fn ar_piece_two(alpha: &ExponentTriple, r: &Q) -> bool {
    let t = Q::one() - r.recip();
    let d = (&t - half()).abs();
    let half_a1 = alpha.a1() / q_int(2);
    classify_triple(alpha).admissible
        && alpha.a1().is_positive()
        && *alpha.a3() > t
        && (half() - &half_a1 - (alpha.a3() - half()).abs() - &d).is_positive()
        && &d + &half_a1 < t
}

/// Failed inequalities of the closed-form region at R, named verbatim;
/// empty exactly when the point is a member.
pub fn ar_closed_form_violations(
    alpha: &ExponentTriple,
    r: &Q,
) -> Result<Vec<String>, CoreError> {
    validate_sequence_exponent(r)?;
    let d = (half() - r.recip()).abs();
    let mut out = Vec::new();
    if !classify_triple(alpha).admissible {
        out.push("alpha admissible (each entry below 1, at most one negative)".to_string());
    }
    if !alpha.a1().is_positive() {
        out.push("0 < a1".to_string());
    }
    if !(*alpha.a1() < Q::one() - q_int(4) * &d) {
        out.push("a1 < 1 - 4|1/2 - 1/R|".to_string());
    }
    if !((alpha.a2() - alpha.a3()).abs() < Q::one() - q_int(2) * &d) {
        out.push("|a2 - a3| < 1 - 2|1/2 - 1/R|".to_string());
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Halfplane lists and polygon construction.
// ---------------------------------------------------------------------------

/// Strict halfplane `a*x + b*y < c` in the chart.
#[derive(Debug, Clone)]
struct HalfPlane {
    a: Q,
    b: Q,
    c: Q,
}

impl HalfPlane {
    fn new(a: Q, b: Q, c: Q) -> Self {
        HalfPlane { a, b, c }
    }

    /// `a*x + b*y - c`; negative strictly inside, zero on the boundary.
    fn excess(&self, x: &Q, y: &Q) -> Q {
        &self.a * x + &self.b * y - &self.c
    }

    fn holds(&self, x: &Q, y: &Q) -> bool {
        self.excess(x, y).is_negative()
    }
}

fn hp(a: i64, b: i64, c: Q) -> HalfPlane {
    HalfPlane::new(q_int(a), q_int(b), c)
}

/// The admissible stratum as halfplanes: `a1 < 1`, `a2 < 1`, and `a3 < 1`
/// (which reads `a1 + a2 > 0` on the chart). The cap of at most one
/// negative entry is implied by these three on the simplex plane, and the
/// grid agreement test between this list and the counting predicate is
/// what checks that implication.
fn admissible_halfplanes() -> Vec<HalfPlane> {
    vec![
        hp(1, 0, q_int(1)),
        hp(0, 1, q_int(1)),
        hp(-1, -1, q_int(0)),
    ]
}

/// The band `0 < a1 < 1`, `0 < a2 < 1` shared by the model-piece ranges.
fn unit_band_halfplanes() -> Vec<HalfPlane> {
    vec![
        hp(-1, 0, q_int(0)),
        hp(1, 0, q_int(1)),
        hp(0, -1, q_int(0)),
        hp(0, 1, q_int(1)),
    ]
}

/// Inequality lists for the halfplane-defined regions; `None` for regions
/// whose polygon is specified by vertices or produced by a hull.
fn halfplanes_for(id: RegionId, r: Option<&Q>) -> Option<Vec<HalfPlane>> {
    match id {
        RegionId::Pi0 => Some(admissible_halfplanes()),
        RegionId::Pi1 => Some(vec![
            hp(-1, 0, q_int(0)),
            hp(0, -1, q_int(0)),
            hp(1, 1, q_int(1)),
        ]),
        RegionId::Pi2 => Some(vec![
            hp(-1, 0, q_int(0)),
            hp(0, -1, q_int(0)),
            hp(1, 0, half()),
            hp(0, 1, half()),
            hp(-1, -1, -half()),
            hp(1, 1, q_int(1)),
        ]),
        RegionId::Main => {
            let mut hps = unit_band_halfplanes();
            hps.push(hp(1, 2, q_int(2)));
            hps.push(hp(2, 1, q_int(2)));
            Some(hps)
        }
        RegionId::T1 => {
            let mut hps = unit_band_halfplanes();
            hps.push(hp(1, 2, q_int(2)));
            Some(hps)
        }
        RegionId::T2 => {
            let mut hps = unit_band_halfplanes();
            hps.push(hp(2, 1, q_int(2)));
            Some(hps)
        }
        RegionId::T3 => {
            let mut hps = unit_band_halfplanes();
            hps.push(hp(1, 1, q_ratio(3, 2)));
            Some(hps)
        }
        // a1 > -1/2, a2 > 1/2, a3 > 1/2 (the last reads a1 + a2 < 1/2).
        RegionId::TriangleA => Some(vec![
            hp(-1, 0, half()),
            hp(0, -1, -half()),
            hp(1, 1, half()),
        ]),
        // a2 < 0, a1 + 2 a2 > 0, a3 > 1/2.
        RegionId::TriangleB => Some(vec![
            hp(0, 1, q_int(0)),
            hp(-1, -2, q_int(0)),
            hp(1, 1, half()),
        ]),
        // a2 > 1/2, 2 a1 + a2 > 0, a3 > 1/2.
        RegionId::TriangleAPrime => Some(vec![
            hp(0, -1, -half()),
            hp(-2, -1, q_int(0)),
            hp(1, 1, half()),
        ]),
        RegionId::Ar => {
            let r = r.expect("validated parameter");
            let d = (half() - r.recip()).abs();
            let mut hps = admissible_halfplanes();
            hps.push(hp(-1, 0, q_int(0)));
            hps.push(hp(1, 0, Q::one() - q_int(4) * &d));
            // |a2 - a3| = |a1 + 2 a2 - 1| split into two sides.
            hps.push(hp(1, 2, q_int(2) - q_int(2) * &d));
            hps.push(hp(-1, -2, q_int(-2) * &d));
            Some(hps)
        }
        RegionId::Ar1 => {
            let r = r.expect("validated parameter");
            let t = r.recip();
            let d = (&t - half()).abs();
            let mut hps = admissible_halfplanes();
            hps.push(hp(-1, 0, q_int(0)));
            hps.push(hp(0, -1, -&t));
            // |a2 - 1/2| < 1/2 - a1/2 - d split into two sides.
            hps.push(hp(1, 2, q_int(2) - q_int(2) * &d));
            hps.push(hp(1, -2, q_int(-2) * &d));
            hps.push(hp(1, 0, q_int(2) * (&t - &d)));
            Some(hps)
        }
        RegionId::Ar2 => {
            let r = r.expect("validated parameter");
            let t = Q::one() - r.recip();
            let d = (&t - half()).abs();
            let mut hps = admissible_halfplanes();
            hps.push(hp(-1, 0, q_int(0)));
            hps.push(hp(1, 1, Q::one() - &t));
            // |a3 - 1/2| < 1/2 - a1/2 - d split into two sides.
            hps.push(hp(-1, -2, q_int(-2) * &d));
            hps.push(hp(3, 2, q_int(2) - q_int(2) * &d));
            hps.push(hp(1, 0, q_int(2) * (&t - &d)));
            Some(hps)
        }
        RegionId::ArHull => None,
    }
}

fn membership_unchecked(id: RegionId, r: Option<&Q>, alpha: &ExponentTriple) -> bool {
    match id {
        RegionId::Pi0 => classify_triple(alpha).admissible,
        RegionId::Pi1 => classify_triple(alpha).pi1,
        RegionId::Pi2 => classify_triple(alpha).pi2,
        RegionId::Main
        | RegionId::T1
        | RegionId::T2
        | RegionId::T3
        | RegionId::TriangleA
        | RegionId::TriangleB
        | RegionId::TriangleAPrime => halfplanes_for(id, r)
            .expect("halfplane region")
            .iter()
            .all(|h| h.holds(alpha.a1(), alpha.a2())),
        RegionId::Ar => ar_closed_form(alpha, r.expect("validated parameter")),
        RegionId::Ar1 => ar_piece_one(alpha, r.expect("validated parameter")),
        RegionId::Ar2 => ar_piece_two(alpha, r.expect("validated parameter")),
        RegionId::ArHull => {
            let poly = polygon_unchecked(id, r);
            matches!(poly.location(alpha), PointLocation::Inside)
        }
    }
}

/// Exact membership of a triple in a named region. R-family regions need
/// the sequence exponent; every other region rejects a parameter.
pub fn region_membership(
    id: RegionId,
    r: Option<&Q>,
    point: &ExponentTriple,
) -> Result<bool, CoreError> {
    let owned = validate_parameter(id, r)?;
    Ok(membership_unchecked(id, owned.as_ref(), point))
}

// ---------------------------------------------------------------------------
// Polygon geometry.
// ---------------------------------------------------------------------------

/// Location of a point relative to a convex polygon.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointLocation {
    Inside,
    /// On the open edge joining vertex `i` to the next vertex.
    OnEdge(usize),
    /// Coincides with vertex `i`.
    OnVertex(usize),
    Outside,
}

fn cross(o: &(Q, Q), a: &(Q, Q), b: &(Q, Q)) -> Q {
    (&a.0 - &o.0) * (&b.1 - &o.1) - (&a.1 - &o.1) * (&b.0 - &o.0)
}

fn signed_area_twice(poly: &[(Q, Q)]) -> Q {
    let mut s = Q::zero();
    let n = poly.len();
    for i in 0..n {
        let j = (i + 1) % n;
        s = s + &poly[i].0 * &poly[j].1 - &poly[j].0 * &poly[i].1;
    }
    s
}

fn locate_chart(p: &(Q, Q), verts: &[(Q, Q)]) -> PointLocation {
    let n = verts.len();
    if n == 0 {
        return PointLocation::Outside;
    }
    for (i, v) in verts.iter().enumerate() {
        if v == p {
            return PointLocation::OnVertex(i);
        }
    }
    if n == 1 {
        return PointLocation::Outside;
    }
    if n == 2 {
        let (a, b) = (&verts[0], &verts[1]);
        let along_x = (a.0 <= p.0 && p.0 <= b.0) || (b.0 <= p.0 && p.0 <= a.0);
        let along_y = (a.1 <= p.1 && p.1 <= b.1) || (b.1 <= p.1 && p.1 <= a.1);
        if cross(a, b, p).is_zero() && along_x && along_y {
            return PointLocation::OnEdge(0);
        }
        return PointLocation::Outside;
    }
    let mut on_edge = None;
    for i in 0..n {
        let j = (i + 1) % n;
        let c = cross(&verts[i], &verts[j], p);
        if c.is_negative() {
            return PointLocation::Outside;
        }
        if c.is_zero() {
            on_edge = Some(i);
        }
    }
    match on_edge {
        Some(i) => PointLocation::OnEdge(i),
        None => PointLocation::Inside,
    }
}

/// A convex polygon on the simplex plane with per-edge open flags.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionPolygon {
    /// Human-readable identifier, e.g. `ar1[R=2]` or `hull(...)`.
    pub id: String,
    /// Vertices in counterclockwise chart order, starting at the
    /// lexicographically smallest chart point; empty for empty regions.
    pub vertices: Vec<ExponentTriple>,
    /// `edges_open[i]` marks the edge from vertex `i` to vertex `i + 1`
    /// (wrapping) as excluded from the region.
    pub edges_open: Vec<bool>,
}

impl RegionPolygon {
    pub fn empty(id: impl Into<String>) -> Self {
        RegionPolygon {
            id: id.into(),
            vertices: Vec::new(),
            edges_open: Vec::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn chart_vertices(&self) -> Vec<(Q, Q)> {
        self.vertices.iter().map(|v| v.chart()).collect()
    }

    pub fn location(&self, point: &ExponentTriple) -> PointLocation {
        let chart = (point.a1().clone(), point.a2().clone());
        locate_chart(&chart, &self.chart_vertices())
    }

    /// Membership honoring the edge flags: interior points always count,
    /// boundary points only where the touched edges are closed.
    pub fn contains(&self, point: &ExponentTriple) -> bool {
        let n = self.vertices.len();
        match self.location(point) {
            PointLocation::Inside => true,
            PointLocation::OnEdge(i) => !self.edges_open[i],
            PointLocation::OnVertex(i) => {
                let prev = (i + n - 1) % n;
                !self.edges_open[i] && !self.edges_open[prev]
            }
            PointLocation::Outside => false,
        }
    }

    /// JSON export: exact rational chart pairs, the full triples, and the
    /// edge flags.
    pub fn to_json(&self) -> String {
        #[derive(serde::Serialize)]
        struct EdgeJson {
            from: usize,
            to: usize,
            open: bool,
        }
        #[derive(serde::Serialize)]
        struct PolygonJson<'a> {
            id: &'a str,
            vertices: Vec<[String; 2]>,
            alpha: Vec<[String; 3]>,
            edges: Vec<EdgeJson>,
        }
        let n = self.vertices.len();
        let body = PolygonJson {
            id: &self.id,
            vertices: self
                .vertices
                .iter()
                .map(|v| [format_q(v.a1()), format_q(v.a2())])
                .collect(),
            alpha: self
                .vertices
                .iter()
                .map(|v| [format_q(v.a1()), format_q(v.a2()), format_q(v.a3())])
                .collect(),
            edges: (0..n)
                .map(|i| EdgeJson {
                    from: i,
                    to: (i + 1) % n,
                    open: self.edges_open[i],
                })
                .collect(),
        };
        serde_json::to_string_pretty(&body).expect("polygon serializes")
    }

    /// SVG export in a ternary layout: `sx = 2 + a2 - a1` and
    /// `sy = k (a1 + a2)` with the fixed rational `k = 1732/1000` standing
    /// in for sqrt(3). The constant shapes the drawing only; no membership
    /// decision depends on it, and all coordinates are formatted from
    /// rationals in fixed point.
    pub fn to_svg(&self) -> String {
        let k = q_ratio(1732, 1000);
        let map = |x: &Q, y: &Q| -> (Q, Q) { (q_int(2) + y - x, &k * &(x + y)) };
        let frame: Vec<(Q, Q)> = [
            (q_int(-1), q_int(1)),
            (q_int(1), q_int(-1)),
            (q_int(1), q_int(1)),
        ]
        .iter()
        .map(|(x, y)| map(x, y))
        .collect();
        let simplex: Vec<(Q, Q)> = [
            (q_int(0), q_int(0)),
            (q_int(1), q_int(0)),
            (q_int(0), q_int(1)),
        ]
        .iter()
        .map(|(x, y)| map(x, y))
        .collect();
        let region: Vec<(Q, Q)> = self
            .vertices
            .iter()
            .map(|v| map(v.a1(), v.a2()))
            .collect();

        let mut all: Vec<(Q, Q)> = frame.clone();
        all.extend(simplex.iter().cloned());
        all.extend(region.iter().cloned());
        let margin = q_ratio(2, 5);
        let min_x = all.iter().map(|p| &p.0).min().expect("nonempty") - &margin;
        let max_x = all.iter().map(|p| &p.0).max().expect("nonempty") + &margin;
        let min_y = all.iter().map(|p| &p.1).min().expect("nonempty") - &margin;
        let max_y = all.iter().map(|p| &p.1).max().expect("nonempty") + &margin;

        let points_attr = |poly: &[(Q, Q)]| {
            poly.iter()
                .map(|p| format!("{},{}", fmt_fixed(&p.0, 3), fmt_fixed(&p.1, 3)))
                .collect::<Vec<_>>()
                .join(" ")
        };

        let mut s = String::new();
        s.push_str(&format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"{} {} {} {}\">\n",
            fmt_fixed(&min_x, 3),
            fmt_fixed(&min_y, 3),
            fmt_fixed(&(&max_x - &min_x), 3),
            fmt_fixed(&(&max_y - &min_y), 3)
        ));
        s.push_str(&format!("  <title>{}</title>\n", self.id));
        s.push_str(&format!(
            "  <polygon points=\"{}\" fill=\"none\" stroke=\"#b0b0b0\" stroke-width=\"0.02\"/>\n",
            points_attr(&frame)
        ));
        s.push_str(&format!(
            "  <polygon points=\"{}\" fill=\"none\" stroke=\"#d8d8d8\" stroke-width=\"0.015\"/>\n",
            points_attr(&simplex)
        ));
        if region.is_empty() {
            s.push_str(&format!(
                "  <text x=\"{}\" y=\"{}\" font-size=\"0.2\" fill=\"#444444\">{} (empty region)</text>\n",
                fmt_fixed(&(&min_x + &margin), 3),
                fmt_fixed(&(&min_y + &margin), 3),
                self.id
            ));
        } else {
            s.push_str(&format!(
                "  <polygon points=\"{}\" fill=\"#3b6ea5\" fill-opacity=\"0.22\" stroke=\"none\"/>\n",
                points_attr(&region)
            ));
            let n = region.len();
            for i in 0..n {
                let a = &region[i];
                let b = &region[(i + 1) % n];
                let dash = if self.edges_open[i] {
                    " stroke-dasharray=\"0.07,0.05\""
                } else {
                    ""
                };
                s.push_str(&format!(
                    "  <line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#1d4e89\" stroke-width=\"0.025\"{}/>\n",
                    fmt_fixed(&a.0, 3),
                    fmt_fixed(&a.1, 3),
                    fmt_fixed(&b.0, 3),
                    fmt_fixed(&b.1, 3),
                    dash
                ));
            }
            for p in &region {
                s.push_str(&format!(
                    "  <circle cx=\"{}\" cy=\"{}\" r=\"0.035\" fill=\"#ffffff\" stroke=\"#1d4e89\" stroke-width=\"0.02\"/>\n",
                    fmt_fixed(&p.0, 3),
                    fmt_fixed(&p.1, 3)
                ));
            }
            s.push_str(&format!(
                "  <text x=\"{}\" y=\"{}\" font-size=\"0.2\" fill=\"#444444\">{}</text>\n",
                fmt_fixed(&(&min_x + &margin), 3),
                fmt_fixed(&(&min_y + &margin), 3),
                self.id
            ));
        }
        s.push_str("</svg>\n");
        s
    }
}

/// Fixed-point decimal rendering of a rational, for SVG attributes.
fn fmt_fixed(q: &Q, decimals: u32) -> String {
    let scale = 10i64.pow(decimals);
    let scaled = q * q_int(scale);
    let rounded = scaled.round().to_integer();
    let n = rounded.to_i64().unwrap_or(0);
    let sign = if n < 0 { "-" } else { "" };
    let a = n.abs();
    format!(
        "{}{}.{:0width$}",
        sign,
        a / scale,
        a % scale,
        width = decimals as usize
    )
}

fn canonical_ccw(mut poly: Vec<(Q, Q)>) -> Vec<(Q, Q)> {
    if poly.len() < 3 {
        return poly;
    }
    if signed_area_twice(&poly).is_negative() {
        poly.reverse();
    }
    let min_idx = poly
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| a.cmp(b))
        .map(|(i, _)| i)
        .expect("nonempty polygon");
    poly.rotate_left(min_idx);
    poly
}

/// Cuts a convex polygon with the closed side `a*x + b*y <= c`.
fn clip_once(poly: Vec<(Q, Q)>, hplane: &HalfPlane) -> Vec<(Q, Q)> {
    let n = poly.len();
    if n == 0 {
        return poly;
    }
    let mut out: Vec<(Q, Q)> = Vec::with_capacity(n + 2);
    for i in 0..n {
        let cur = &poly[i];
        let nxt = &poly[(i + 1) % n];
        let ec = hplane.excess(&cur.0, &cur.1);
        let en = hplane.excess(&nxt.0, &nxt.1);
        let cur_in = !ec.is_positive();
        let nxt_in = !en.is_positive();
        if cur_in {
            out.push(cur.clone());
        }
        if cur_in != nxt_in {
            let s = &ec / &(&ec - &en);
            let dx = &nxt.0 - &cur.0;
            let dy = &nxt.1 - &cur.1;
            out.push((&cur.0 + &s * dx, &cur.1 + &s * dy));
        }
    }
    out
}

/// Removes duplicate and collinear vertices; returns the canonical
/// counterclockwise polygon, or empty when no interior is left.
fn tidy_polygon(poly: Vec<(Q, Q)>) -> Vec<(Q, Q)> {
    let mut poly = poly;
    loop {
        if poly.len() < 3 {
            return Vec::new();
        }
        let mut dedup: Vec<(Q, Q)> = Vec::with_capacity(poly.len());
        for p in poly.drain(..) {
            if dedup.last() != Some(&p) {
                dedup.push(p);
            }
        }
        while dedup.len() > 1 && dedup.first() == dedup.last() {
            dedup.pop();
        }
        if dedup.len() < 3 {
            return Vec::new();
        }
        let n = dedup.len();
        let mut keep: Vec<(Q, Q)> = Vec::with_capacity(n);
        for i in 0..n {
            let prev = &dedup[(i + n - 1) % n];
            let next = &dedup[(i + 1) % n];
            if !cross(prev, &dedup[i], next).is_zero() {
                keep.push(dedup[i].clone());
            }
        }
        let stable = keep.len() == n;
        poly = keep;
        if stable {
            break;
        }
    }
    if poly.len() < 3 || !signed_area_twice(&poly).is_positive() {
        return Vec::new();
    }
    canonical_ccw(poly)
}

/// Intersects the halfplanes inside a box that strictly contains the
/// admissible triangle; the output is the closure of the open region.
fn clip_convex(halfplanes: &[HalfPlane]) -> Vec<(Q, Q)> {
    let mut poly: Vec<(Q, Q)> = vec![
        (q_int(-2), q_int(-2)),
        (q_int(2), q_int(-2)),
        (q_int(2), q_int(2)),
        (q_int(-2), q_int(2)),
    ];
    for hplane in halfplanes {
        poly = clip_once(poly, hplane);
        if poly.is_empty() {
            return poly;
        }
    }
    tidy_polygon(poly)
}

fn polygon_from_chart(id: String, chart: Vec<(Q, Q)>, open: bool) -> RegionPolygon {
    let chart = if chart.len() >= 3 {
        canonical_ccw(chart)
    } else {
        chart
    };
    let n = chart.len();
    RegionPolygon {
        id,
        vertices: chart
            .into_iter()
            .map(|(x, y)| ExponentTriple::from_chart(x, y))
            .collect(),
        edges_open: vec![open; n],
    }
}

fn region_label(id: RegionId, r: Option<&Q>) -> String {
    match r {
        Some(r) => format!("{}[R={}]", id, format_q(r)),
        None => id.to_string(),
    }
}

fn polygon_unchecked(id: RegionId, r: Option<&Q>) -> RegionPolygon {
    let label = region_label(id, r);
    match id {
        RegionId::TriangleA => polygon_from_chart(
            label,
            vec![
                (q_ratio(-1, 2), half()),
                (q_int(0), half()),
                (q_ratio(-1, 2), q_int(1)),
            ],
            true,
        ),
        RegionId::TriangleB => polygon_from_chart(
            label,
            vec![
                (q_int(0), q_int(0)),
                (q_int(1), q_ratio(-1, 2)),
                (half(), q_int(0)),
            ],
            true,
        ),
        RegionId::TriangleAPrime => polygon_from_chart(
            label,
            vec![
                (q_ratio(-1, 2), q_int(1)),
                (q_ratio(-1, 4), half()),
                (q_int(0), half()),
            ],
            true,
        ),
        RegionId::ArHull => {
            let p1 = polygon_unchecked(RegionId::Ar1, r);
            let p2 = polygon_unchecked(RegionId::Ar2, r);
            let mut pts = p1.chart_vertices();
            pts.extend(p2.chart_vertices());
            let hull = convex_hull_chart(&pts);
            let hull = if hull.len() < 3 { Vec::new() } else { hull };
            polygon_from_chart(label, hull, true)
        }
        _ => {
            let hps = halfplanes_for(id, r).expect("halfplane region");
            polygon_from_chart(label, clip_convex(&hps), true)
        }
    }
}

/// The polygon of a named region: counterclockwise exact vertices with
/// open edge flags (every named region is open). Degenerate parameter
/// values yield an empty polygon.
pub fn region_polygon(id: RegionId, r: Option<&Q>) -> Result<RegionPolygon, CoreError> {
    let owned = validate_parameter(id, r)?;
    Ok(polygon_unchecked(id, owned.as_ref()))
}

/// A validated region reference: identifier plus optional parameter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Region {
    id: RegionId,
    parameter: Option<Q>,
}

impl Region {
    pub fn new(id: RegionId, parameter: Option<Q>) -> Result<Self, CoreError> {
        validate_parameter(id, parameter.as_ref())?;
        Ok(Region { id, parameter })
    }

    pub fn id(&self) -> RegionId {
        self.id
    }

    pub fn parameter(&self) -> Option<&Q> {
        self.parameter.as_ref()
    }

    pub fn label(&self) -> String {
        region_label(self.id, self.parameter.as_ref())
    }

    pub fn contains(&self, point: &ExponentTriple) -> bool {
        membership_unchecked(self.id, self.parameter.as_ref(), point)
    }

    pub fn polygon(&self) -> RegionPolygon {
        polygon_unchecked(self.id, self.parameter.as_ref())
    }
}

// ---------------------------------------------------------------------------
// Convex hulls.
// ---------------------------------------------------------------------------

/// Convex hull of chart points by the monotone chain: counterclockwise,
/// collinear points dropped, starting at the lexicographically smallest
/// vertex. Degenerate inputs return what survives — empty, a single
/// point, or the two endpoints of a segment.
pub fn convex_hull_chart(points: &[(Q, Q)]) -> Vec<(Q, Q)> {
    let mut pts = points.to_vec();
    pts.sort();
    pts.dedup();
    let n = pts.len();
    if n <= 2 {
        return pts;
    }
    let mut lower: Vec<(Q, Q)> = Vec::new();
    for p in &pts {
        while lower.len() >= 2
            && !cross(&lower[lower.len() - 2], &lower[lower.len() - 1], p).is_positive()
        {
            lower.pop();
        }
        lower.push(p.clone());
    }
    let mut upper: Vec<(Q, Q)> = Vec::new();
    for p in pts.iter().rev() {
        while upper.len() >= 2
            && !cross(&upper[upper.len() - 2], &upper[upper.len() - 1], p).is_positive()
        {
            upper.pop();
        }
        upper.push(p.clone());
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Closed convex hull of explicit triples.
pub fn convex_hull_triples(points: &[ExponentTriple]) -> RegionPolygon {
    let chart: Vec<(Q, Q)> = points.iter().map(|p| p.chart()).collect();
    let hull = convex_hull_chart(&chart);
    let n = hull.len();
    RegionPolygon {
        id: "hull".to_string(),
        vertices: hull
            .into_iter()
            .map(|(x, y)| ExponentTriple::from_chart(x, y))
            .collect(),
        edges_open: vec![false; n],
    }
}

/// Convex hull of polygon regions. The hull of open regions is open, so
/// the result keeps open edges exactly when every nonempty input is
/// all-open; mixing in a closed polygon closes the hull. An empty input
/// list gives the empty region.
pub fn convex_hull_of_regions(inputs: &[&RegionPolygon]) -> RegionPolygon {
    let mut chart: Vec<(Q, Q)> = Vec::new();
    let mut all_open = true;
    let mut names: Vec<&str> = Vec::new();
    for poly in inputs {
        if poly.vertices.is_empty() {
            continue;
        }
        names.push(&poly.id);
        chart.extend(poly.chart_vertices());
        all_open &= poly.edges_open.iter().all(|o| *o);
    }
    let hull = convex_hull_chart(&chart);
    let id = format!("hull({})", names.join(" | "));
    let n = hull.len();
    RegionPolygon {
        id,
        vertices: hull
            .into_iter()
            .map(|(x, y)| ExponentTriple::from_chart(x, y))
            .collect(),
        edges_open: vec![all_open; n],
    }
}

// ---------------------------------------------------------------------------
// Interpolation.
// ---------------------------------------------------------------------------

fn check_theta(theta: &Q) -> Result<(), CoreError> {
    if !theta.is_positive() || *theta >= Q::one() {
        return Err(CoreError::exponent(format!(
            "interpolation weight theta must lie strictly between 0 and 1, got {}",
            format_q(theta)
        )));
    }
    Ok(())
}

/// Affine combination `(1 - theta) a + theta b` of two triples; the
/// weight must lie strictly between 0 and 1.
pub fn geometric_mean_combine(
    a: &ExponentTriple,
    b: &ExponentTriple,
    theta: &Q,
) -> Result<ExponentTriple, CoreError> {
    check_theta(theta)?;
    let om = Q::one() - theta;
    Ok(ExponentTriple::from_chart(
        &om * a.a1() + theta * b.a1(),
        &om * a.a2() + theta * b.a2(),
    ))
}

/// Componentwise affine combination of paired tuples (inner and outer).
pub fn geometric_mean_combine_mixed(
    a: &MixedTuple,
    b: &MixedTuple,
    theta: &Q,
) -> Result<MixedTuple, CoreError> {
    Ok(MixedTuple::new(
        geometric_mean_combine(&a.inner, &b.inner, theta)?,
        geometric_mean_combine(&a.outer, &b.outer, theta)?,
    ))
}

/// Exponents of the two constants in an interpolated bound
/// `K1^(1-theta) K2^theta`, kept symbolic as the pair of powers.
pub fn constant_exponents(theta: &Q) -> Result<(Q, Q), CoreError> {
    check_theta(theta)?;
    Ok((Q::one() - theta, theta.clone()))
}

// ---------------------------------------------------------------------------
// Paired tuples and their hull.
// ---------------------------------------------------------------------------

/// A pair of triples: inner sequence-space exponents and outer Lebesgue
/// exponents, each on its own simplex plane.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MixedTuple {
    pub inner: ExponentTriple,
    pub outer: ExponentTriple,
}

impl MixedTuple {
    pub fn new(inner: ExponentTriple, outer: ExponentTriple) -> Self {
        MixedTuple { inner, outer }
    }

    /// Swaps the first two entries of both components.
    pub fn bar(&self) -> Self {
        MixedTuple {
            inner: self.inner.bar(),
            outer: self.outer.bar(),
        }
    }
}

impl fmt::Display for MixedTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.inner, self.outer)
    }
}

/// Vertex tuples generating the hull of the paired region at R: the inner
/// anchor `(0, 1/R, 1/R')` paired with each vertex of the closed-form
/// base polygon, plus the bar image of both. Empty when the base region
/// is empty.
pub fn mixed_hull_vertices(r: &Q) -> Result<Vec<MixedTuple>, CoreError> {
    validate_sequence_exponent(r)?;
    let t = r.recip();
    let inner = ExponentTriple::new(q_int(0), t.clone(), Q::one() - &t)?;
    let base = polygon_unchecked(RegionId::Ar, Some(r));
    let mut out = Vec::with_capacity(2 * base.vertices.len());
    for v in &base.vertices {
        out.push(MixedTuple::new(inner.clone(), v.clone()));
    }
    let bar_inner = inner.bar();
    for v in &base.vertices {
        out.push(MixedTuple::new(bar_inner.clone(), v.bar()));
    }
    Ok(out)
}

/// Membership of a pair in the convex hull of the paired region at R.
///
/// The paired region is the union of two fibers: the inner anchor
/// `(0, 1/R, 1/R')` over the base region, and its bar image over the
/// bar-reflected base. Every point of the hull therefore has inner triple
/// `(1-t) (0, 1/R, 1/R') + t (1/R, 0, 1/R')` for a unique hull parameter
/// `t` read off the first inner entry, and the slice of the hull at `t`
/// is the Minkowski combination `(1-t) C + t bar(C)` of the open base
/// `C` — open for `t` strictly inside, and exactly the open fiber at the
/// two endpoints.
pub fn mixed_hull_membership(point: &MixedTuple, r: &Q) -> Result<bool, CoreError> {
    validate_sequence_exponent(r)?;
    let t_inv = r.recip();
    let dual = Q::one() - &t_inv;
    if *point.inner.a3() != dual {
        return Ok(false);
    }
    if point.inner.a1().is_negative() || point.inner.a2().is_negative() {
        return Ok(false);
    }
    let base = polygon_unchecked(RegionId::Ar, Some(r));
    if base.vertices.is_empty() {
        return Ok(false);
    }
    let t = point.inner.a1() / &t_inv;
    if t.is_zero() {
        return Ok(ar_closed_form(&point.outer, r));
    }
    if t.is_one() {
        return Ok(ar_closed_form(&point.outer.bar(), r));
    }
    let om = Q::one() - &t;
    let charts = base.chart_vertices();
    let mut pts: Vec<(Q, Q)> = Vec::with_capacity(charts.len() * charts.len());
    for w in &charts {
        for v in &charts {
            // The bar swap acts on the chart by exchanging the coordinates.
            pts.push((&om * &w.0 + &t * &v.1, &om * &w.1 + &t * &v.0));
        }
    }
    let hull = convex_hull_chart(&pts);
    let p = point.outer.chart();
    Ok(matches!(locate_chart(&p, &hull), PointLocation::Inside))
}

// ---------------------------------------------------------------------------
// Grid scans.
// ---------------------------------------------------------------------------

/// Chart grid `(i/denom, j/denom)` for `i, j` in `[-denom, denom]`; the
/// square covers the admissible triangle.
pub fn rational_grid(denom: u32) -> Vec<ExponentTriple> {
    let d = denom as i64;
    let mut out = Vec::with_capacity(((2 * d + 1) * (2 * d + 1)) as usize);
    for i in -d..=d {
        for j in -d..=d {
            out.push(ExponentTriple::from_chart(q_ratio(i, d), q_ratio(j, d)));
        }
    }
    out
}

/// Grid points where the main range and the intersection of the three
/// model-piece ranges disagree. Expected empty: inside the main
/// quadrilateral the third piece's constraint is implied by the other
/// two, which is exactly what this scan verifies.
pub fn main_vs_components_disagreement(denom: u32) -> Vec<ExponentTriple> {
    rational_grid(denom)
        .into_iter()
        .filter(|alpha| {
            let main = membership_unchecked(RegionId::Main, None, alpha);
            let pieces = membership_unchecked(RegionId::T1, None, alpha)
                && membership_unchecked(RegionId::T2, None, alpha)
                && membership_unchecked(RegionId::T3, None, alpha);
            main != pieces
        })
        .collect()
}

/// One grid point where the closed form and the hull of the generating
/// pieces disagree.
#[derive(Debug, Clone)]
pub struct GridDisagreement {
    pub alpha: ExponentTriple,
    pub closed_form: bool,
    pub hull_of_pieces: bool,
    /// The point lies on the boundary of either polygon.
    pub on_boundary: bool,
}

impl fmt::Display for GridDisagreement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "alpha={} closed-form={} hull-of-pieces={} on-boundary={}",
            self.alpha, self.closed_form, self.hull_of_pieces, self.on_boundary
        )
    }
}

/// Compares the closed-form region against the convex hull of the two
/// generating pieces on the `1/denom` grid and reports every disagreeing
/// point verbatim; neither side is taken as ground truth.
pub fn ar_hull_disagreement(r: &Q, denom: u32) -> Result<Vec<GridDisagreement>, CoreError> {
    validate_sequence_exponent(r)?;
    let closed_poly = polygon_unchecked(RegionId::Ar, Some(r));
    let hull_poly = polygon_unchecked(RegionId::ArHull, Some(r));
    let mut out = Vec::new();
    for alpha in rational_grid(denom) {
        let cf = ar_closed_form(&alpha, r);
        let hl = matches!(hull_poly.location(&alpha), PointLocation::Inside);
        if cf != hl {
            let near_closed = !matches!(
                closed_poly.location(&alpha),
                PointLocation::Inside | PointLocation::Outside
            );
            let near_hull = !matches!(
                hull_poly.location(&alpha),
                PointLocation::Inside | PointLocation::Outside
            );
            out.push(GridDisagreement {
                alpha,
                closed_form: cf,
                hull_of_pieces: hl,
                on_boundary: near_closed || near_hull,
            });
        }
    }
    Ok(out)
}
