//! Projective fitting and classification of rank-curve components.
//!
//! The arcs traced by an Abelian-relation basis live in P²; for the webs
//! studied here the degree-4 rank curve splits into lines and conics.
//! This module fits lines/conics to arcs by homogeneous least squares and
//! evaluates the incidence patterns that distinguish the three splitting
//! types: conic + two lines meeting on the conic, four lines in general
//! position, and four concurrent lines forming a harmonic quadruple.

use crate::conics::Slope;
use crate::{Error, Result};
use nalgebra::{DMatrix, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

/// A point of P², stored with unit Euclidean norm and the first nonzero
/// coordinate positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectivePoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl ProjectivePoint {
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        let n = (x * x + y * y + z * z).sqrt();
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::Degenerate("zero or non-finite projective point".into()));
        }
        let mut p = [x / n, y / n, z / n];
        let lead = p.iter().find(|v| v.abs() > 1e-15).copied().unwrap_or(0.0);
        if lead < 0.0 {
            for v in &mut p {
                *v = -*v;
            }
        }
        Ok(Self {
            x: p[0],
            y: p[1],
            z: p[2],
        })
    }

    pub fn coords(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    /// Chordal projective distance: the sine of the angle between rays.
    pub fn distance(self, other: ProjectivePoint) -> f64 {
        let a = Vector3::new(self.x, self.y, self.z);
        let b = Vector3::new(other.x, other.y, other.z);
        a.cross(&b).norm()
    }
}

/// Kind of component a set of arc points is fitted with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ComponentKind {
    Line,
    Conic,
}

/// A fitted projective component with its worst-case algebraic residual
/// over the input points (points and coefficients unit-normalized).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FittedComponent {
    pub kind: ComponentKind,
    /// 3 line coefficients or 6 conic coefficients
    /// (X², XY, Y², XZ, YZ, Z²), unit norm.
    pub coefficients: Vec<f64>,
    pub residual: f64,
    /// Determinant of the symmetric conic matrix; `None` for lines.
    pub conic_determinant: Option<f64>,
}

impl FittedComponent {
    /// Evaluate the component's form at a projective point.
    pub fn evaluate(&self, p: ProjectivePoint) -> f64 {
        match self.kind {
            ComponentKind::Line => {
                self.coefficients[0] * p.x + self.coefficients[1] * p.y + self.coefficients[2] * p.z
            }
            ComponentKind::Conic => {
                let c = &self.coefficients;
                c[0] * p.x * p.x
                    + c[1] * p.x * p.y
                    + c[2] * p.y * p.y
                    + c[3] * p.x * p.z
                    + c[4] * p.y * p.z
                    + c[5] * p.z * p.z
            }
        }
    }

    /// Symmetric matrix of a conic component.
    pub fn conic_matrix(&self) -> Option<Matrix3<f64>> {
        if self.kind != ComponentKind::Conic {
            return None;
        }
        let c = &self.coefficients;
        Some(Matrix3::new(
            c[0],
            c[1] / 2.0,
            c[3] / 2.0,
            c[1] / 2.0,
            c[2],
            c[4] / 2.0,
            c[3] / 2.0,
            c[4] / 2.0,
            c[5],
        ))
    }

    /// True for a conic whose symmetric matrix is far from singular.
    pub fn is_smooth_conic(&self) -> bool {
        match self.conic_determinant {
            Some(d) => d.abs() > 1e-8,
            None => false,
        }
    }
}

/// Smallest-singular-vector fit of a line or conic through arc points.
pub fn fit_component(points: &[ProjectivePoint], kind: ComponentKind) -> Result<FittedComponent> {
    let (cols, needed) = match kind {
        ComponentKind::Line => (3, 3),
        ComponentKind::Conic => (6, 6),
    };
    if points.len() < needed {
        return Err(Error::Fit(format!(
            "need at least {needed} points, got {}",
            points.len()
        )));
    }
    let mut m = DMatrix::zeros(points.len(), cols);
    for (i, p) in points.iter().enumerate() {
        match kind {
            ComponentKind::Line => {
                m[(i, 0)] = p.x;
                m[(i, 1)] = p.y;
                m[(i, 2)] = p.z;
            }
            ComponentKind::Conic => {
                m[(i, 0)] = p.x * p.x;
                m[(i, 1)] = p.x * p.y;
                m[(i, 2)] = p.y * p.y;
                m[(i, 3)] = p.x * p.z;
                m[(i, 4)] = p.y * p.z;
                m[(i, 5)] = p.z * p.z;
            }
        }
    }
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t.as_ref().ok_or_else(|| Error::Fit("svd failed".into()))?;
    // guard against rank-deficient point sets: the second-smallest
    // singular value must dominate the smallest
    let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    sv.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if sv.len() >= 2 && sv[1] < 1e-10 * sv.last().unwrap().max(1e-300) {
        return Err(Error::Fit("point set is rank deficient for this fit".into()));
    }
    let last = v_t.nrows() - 1;
    let coeffs: Vec<f64> = (0..cols).map(|j| v_t[(last, j)]).collect();
    let norm: f64 = coeffs.iter().map(|c| c * c).sum::<f64>().sqrt();
    let coefficients: Vec<f64> = coeffs.iter().map(|c| c / norm).collect();

    let mut comp = FittedComponent {
        kind,
        coefficients,
        residual: 0.0,
        conic_determinant: None,
    };
    comp.residual = points
        .iter()
        .map(|p| comp.evaluate(*p).abs())
        .fold(0.0, f64::max);
    if kind == ComponentKind::Conic {
        comp.conic_determinant = comp.conic_matrix().map(|m| m.determinant());
    }
    Ok(comp)
}

/// Cross-ratio ((m₁−m₃)(m₂−m₄)) / ((m₁−m₄)(m₂−m₃)) of four concurrent
/// line slopes, with vertical slopes handled by limits.
pub fn cross_ratio(m1: Slope, m2: Slope, m3: Slope, m4: Slope) -> Result<f64> {
    let ms = [m1, m2, m3, m4];
    for i in 0..4 {
        for j in (i + 1)..4 {
            if ms[i].line_distance(ms[j]) < 1e-14 {
                return Err(Error::Degenerate("cross-ratio of coincident slopes".into()));
            }
        }
    }
    // work projectively: slope m ↦ [m : 1], vertical ↦ [1 : 0];
    // differences become 2×2 determinants, which keeps the limits exact
    let h = |m: Slope| -> [f64; 2] {
        match m {
            Slope::Finite(v) => [v, 1.0],
            Slope::Vertical => [1.0, 0.0],
        }
    };
    let det = |a: [f64; 2], b: [f64; 2]| a[0] * b[1] - a[1] * b[0];
    let (p1, p2, p3, p4) = (h(m1), h(m2), h(m3), h(m4));
    let num = det(p1, p3) * det(p2, p4);
    let den = det(p1, p4) * det(p2, p3);
    if den == 0.0 {
        return Err(Error::Degenerate("cross-ratio denominator vanished".into()));
    }
    Ok(num / den)
}

/// Harmonic conjugate of m₃ with respect to the pair (m₁, m₂): the slope
/// m₄ with cross-ratio −1.
pub fn harmonic_conjugate(m1: f64, m2: f64, m3: f64) -> Slope {
    let den = 2.0 * m3 - m1 - m2;
    if den.abs() < 1e-14 * (1.0 + m3.abs()) {
        Slope::Vertical
    } else {
        Slope::Finite(((m1 + m2) * m3 - 2.0 * m1 * m2) / den)
    }
}

/// A named incidence check evaluated on the fitted components.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IncidenceCheck {
    pub name: String,
    pub value: f64,
    pub passed: bool,
}

/// Classification of a rank curve from its four fitted arcs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuarticReport {
    pub components: Vec<FittedComponent>,
    pub incidences: Vec<IncidenceCheck>,
}

impl QuarticReport {
    pub fn all_passed(&self) -> bool {
        self.incidences.iter().all(|c| c.passed)
    }
}

/// The three splitting patterns of the rank curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SplitPattern {
    /// Two line arcs plus two arcs on one smooth conic; the lines meet on
    /// the conic. `line_arcs` gives the indices expected to be lines.
    ConicAndTwoLines,
    /// Four lines, pairwise non-parallel, no three concurrent.
    FourLinesGeneralPosition,
    /// Four concurrent lines forming a harmonic quadruple, ordered so
    /// that arcs (0, 1) and (2, 3) are the harmonic pairs.
    FourConcurrentHarmonic,
}

/// Tolerances for the classification checks.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ClassifyTolerances {
    pub line_residual: f64,
    pub conic_residual: f64,
    pub incidence: f64,
    pub concurrency: f64,
    pub cross_ratio: f64,
}

impl Default for ClassifyTolerances {
    fn default() -> Self {
        Self {
            line_residual: 1e-6,
            conic_residual: 1e-8,
            incidence: 1e-5,
            concurrency: 1e-6,
            cross_ratio: 1e-4,
        }
    }
}

fn push(checks: &mut Vec<IncidenceCheck>, name: &str, value: f64, passed: bool) {
    checks.push(IncidenceCheck {
        name: name.to_string(),
        value,
        passed,
    });
}

/// Intersection point of two projective lines.
pub fn line_intersection(a: &[f64], b: &[f64]) -> Result<ProjectivePoint> {
    let u = Vector3::new(a[0], a[1], a[2]);
    let v = Vector3::new(b[0], b[1], b[2]);
    let w = u.cross(&v);
    ProjectivePoint::new(w[0], w[1], w[2])
}

/// Scale-free concurrency measure of a set of lines: smallest singular
/// value of the stacked coefficient matrix over the largest.
pub fn concurrency_measure(lines: &[&FittedComponent]) -> f64 {
    let mut m = DMatrix::zeros(lines.len(), 3);
    for (i, l) in lines.iter().enumerate() {
        for j in 0..3 {
            m[(i, j)] = l.coefficients[j];
        }
    }
    let svd = m.svd(false, false);
    let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    sv.sort_by(|a, b| a.partial_cmp(b).unwrap());
    sv[0] / sv.last().unwrap().max(1e-300)
}

/// Pencil parameter of a line around a common vertex: slope of its
/// intersection with the ideal line Z = 0, i.e. [b : −a] read as a slope.
fn pencil_slope(line: &FittedComponent) -> Slope {
    let a = line.coefficients[0];
    let b = line.coefficients[1];
    if b.abs() <= 1e-14 * (a.abs() + b.abs()) {
        Slope::Vertical
    } else {
        Slope::Finite(-a / b)
    }
}

/// Fit the four arcs and evaluate the incidences of the expected pattern.
///
/// Arcs are fitted as lines first; arcs whose line residual exceeds the
/// tolerance are refitted as conics.
pub fn classify(
    arcs: &[Vec<ProjectivePoint>; 4],
    pattern: SplitPattern,
    tol: &ClassifyTolerances,
) -> Result<QuarticReport> {
    for (i, arc) in arcs.iter().enumerate() {
        if arc.len() < 12 {
            return Err(Error::Fit(format!(
                "arc {i} has {} samples; need at least 12",
                arc.len()
            )));
        }
    }
    let mut checks = Vec::new();
    match pattern {
        SplitPattern::ConicAndTwoLines => {
            let line_a = fit_component(&arcs[2], ComponentKind::Line)?;
            let line_b = fit_component(&arcs[3], ComponentKind::Line)?;
            // both conic-type arcs must lie on one common conic
            let joint: Vec<ProjectivePoint> =
                arcs[0].iter().chain(arcs[1].iter()).copied().collect();
            let conic = fit_component(&joint, ComponentKind::Conic)?;
            push(
                &mut checks,
                "line residual (first pencil arc)",
                line_a.residual,
                line_a.residual < tol.line_residual,
            );
            push(
                &mut checks,
                "line residual (second pencil arc)",
                line_b.residual,
                line_b.residual < tol.line_residual,
            );
            push(
                &mut checks,
                "joint conic residual (net arcs)",
                conic.residual,
                conic.residual < tol.conic_residual,
            );
            push(
                &mut checks,
                "conic smoothness |det|",
                conic.conic_determinant.unwrap_or(0.0).abs(),
                conic.is_smooth_conic(),
            );
            let meet = line_intersection(&line_a.coefficients, &line_b.coefficients)?;
            let on_conic = conic.evaluate(meet).abs();
            push(
                &mut checks,
                "line intersection on conic",
                on_conic,
                on_conic < tol.incidence,
            );
            Ok(QuarticReport {
                components: vec![conic.clone(), conic, line_a, line_b],
                incidences: checks,
            })
        }
        SplitPattern::FourLinesGeneralPosition => {
            let lines: Vec<FittedComponent> = arcs
                .iter()
                .map(|a| fit_component(a, ComponentKind::Line))
                .collect::<Result<_>>()?;
            for (i, l) in lines.iter().enumerate() {
                push(
                    &mut checks,
                    &format!("line residual (arc {i})"),
                    l.residual,
                    l.residual < tol.line_residual,
                );
            }
            // pairwise non-parallel: intersection of each pair is a
            // well-conditioned point (cross product not tiny)
            let mut min_pair = f64::INFINITY;
            for i in 0..4 {
                for j in (i + 1)..4 {
                    let u = Vector3::from_column_slice(&lines[i].coefficients);
                    let v = Vector3::from_column_slice(&lines[j].coefficients);
                    min_pair = min_pair.min(u.cross(&v).norm());
                }
            }
            push(
                &mut checks,
                "pairwise independence",
                min_pair,
                min_pair > 1e-3,
            );
            let mut min_triple = f64::INFINITY;
            for i in 0..4 {
                let trip: Vec<&FittedComponent> =
                    (0..4).filter(|&j| j != i).map(|j| &lines[j]).collect();
                min_triple = min_triple.min(concurrency_measure(&trip));
            }
            push(
                &mut checks,
                "no three concurrent",
                min_triple,
                min_triple > 1e-3,
            );
            Ok(QuarticReport {
                components: lines,
                incidences: checks,
            })
        }
        SplitPattern::FourConcurrentHarmonic => {
            let lines: Vec<FittedComponent> = arcs
                .iter()
                .map(|a| fit_component(a, ComponentKind::Line))
                .collect::<Result<_>>()?;
            for (i, l) in lines.iter().enumerate() {
                push(
                    &mut checks,
                    &format!("line residual (arc {i})"),
                    l.residual,
                    l.residual < tol.line_residual,
                );
            }
            let refs: Vec<&FittedComponent> = lines.iter().collect();
            let conc = concurrency_measure(&refs);
            push(&mut checks, "concurrency", conc, conc < tol.concurrency);
            let cr = cross_ratio(
                pencil_slope(&lines[0]),
                pencil_slope(&lines[1]),
                pencil_slope(&lines[2]),
                pencil_slope(&lines[3]),
            )?;
            push(
                &mut checks,
                "harmonic cross-ratio",
                cr,
                (cr + 1.0).abs() < tol.cross_ratio,
            );
            Ok(QuarticReport {
                components: lines,
                incidences: checks,
            })
        }
    }
}
