//! Foliations, webs, leaf-following and the hexagonal closure figure.
//!
//! A [`Foliation`] bundles a slope field with an exact first integral and
//! its gradient. A [`Web`] is an ordered list of foliations over a
//! rectangular sampling domain with an exclusion predicate. Leaf
//! following ([`flow`]) integrates the unit-speed leaf ODE and stops at a
//! prescribed level of another foliation's first integral, which is the
//! building block of the hexagon closure test.

use crate::conics::{
    self, admissible_net, bipolar_coords, bipolar_gradients, elliptic_coords, tangency_point,
    tangent_slopes, ConfocalFamily, ConicMember, Point, Slope,
};
use crate::ode::{self, OdeOptions};
use crate::{Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Field interface a foliation exposes to the numerical suites.
pub trait FoliationField: Send + Sync {
    fn name(&self) -> &str;
    /// Exact first integral, constant along leaves.
    fn first_integral(&self, p: Point) -> Result<f64>;
    /// Exact gradient of the first integral.
    fn gradient(&self, p: Point) -> Result<[f64; 2]>;
    /// Leaf slope; default is the direction orthogonal to the gradient.
    fn slope(&self, p: Point) -> Result<Slope> {
        let g = self.gradient(p)?;
        if g[0] == 0.0 && g[1] == 0.0 {
            return Err(Error::Degenerate(format!(
                "vanishing gradient of {} at ({}, {})",
                self.name(),
                p.x,
                p.y
            )));
        }
        Ok(Slope::from_direction(-g[1], g[0]))
    }
    fn is_singular(&self, p: Point) -> bool {
        self.first_integral(p).is_err() || self.gradient(p).is_err()
    }
}

/// One foliation of the plane.
#[derive(Clone)]
pub struct Foliation {
    inner: Arc<dyn FoliationField>,
}

impl std::fmt::Debug for Foliation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Foliation({})", self.inner.name())
    }
}

impl Foliation {
    pub fn from_field(field: impl FoliationField + 'static) -> Self {
        Self {
            inner: Arc::new(field),
        }
    }

    pub fn name(&self) -> &str {
        self.inner.name()
    }

    pub fn first_integral(&self, p: Point) -> Result<f64> {
        self.inner.first_integral(p)
    }

    pub fn gradient(&self, p: Point) -> Result<[f64; 2]> {
        self.inner.gradient(p)
    }

    pub fn slope(&self, p: Point) -> Result<Slope> {
        self.inner.slope(p)
    }

    pub fn is_singular(&self, p: Point) -> bool {
        self.inner.is_singular(p)
    }

    /// Vertical coordinate lines x = const (the dx = 0 foliation).
    pub fn vertical_lines() -> Self {
        Self::from_closures("vertical", |p| Ok(p.x), |_| Ok([1.0, 0.0]))
    }

    /// Horizontal coordinate lines y = const (the dy = 0 foliation).
    pub fn horizontal_lines() -> Self {
        Self::from_closures("horizontal", |p| Ok(p.y), |_| Ok([0.0, 1.0]))
    }

    /// Pencil of parallel lines with the given slope.
    pub fn parallel_lines(m: Slope) -> Self {
        match m {
            Slope::Vertical => Self::from_closures("parallel-vertical", |p| Ok(p.x), |_| Ok([1.0, 0.0])),
            Slope::Finite(m) => Self::from_closures(
                "parallel",
                move |p| Ok(p.y - m * p.x),
                move |_| Ok([-m, 1.0]),
            ),
        }
    }

    /// Confocal ellipses, first integral λ₁.
    pub fn confocal_ellipses(fam: ConfocalFamily) -> Self {
        Self::from_field(ConfocalFoliation { fam, ellipse: true })
    }

    /// Confocal hyperbolas, first integral λ₂.
    pub fn confocal_hyperbolas(fam: ConfocalFamily) -> Self {
        Self::from_field(ConfocalFoliation { fam, ellipse: false })
    }

    /// Circles through both foci (σ level sets of the bipolar net).
    pub fn bipolar_sigma(c: f64) -> Self {
        Self::from_field(BipolarFoliation { c, sigma: true })
    }

    /// Circles of the orthogonal pencil (τ level sets).
    pub fn bipolar_tau(c: f64) -> Self {
        Self::from_field(BipolarFoliation { c, sigma: false })
    }

    /// Tangent lines to Q, one of the two branches; the first integral is
    /// the tangency angle on Q.
    pub fn tangent_lines(q: ConicMember, branch: TangentBranch) -> Self {
        Self::from_field(TangentFoliation { q, branch })
    }

    /// A foliation of the tangent-web family carrying the canonical
    /// quadrature integrals (s₁, s₂) adapted to Q: the net parts are the
    /// confocal ellipses/hyperbolas reparametrized by s₁ and s₂, and the
    /// sum/difference parts are the tangent-line families on which
    /// s₁ ± s₂ is constant. `probe` (an admissible point outside Q)
    /// sanity-checks the sum/difference assignment.
    pub fn tangent_canonical(q: ConicMember, part: CanonicalPart, probe: Point) -> Result<Self> {
        let field = CanonicalTangentFoliation::new(q, part, probe)?;
        Ok(Self::from_field(field))
    }

    /// Wrap the first integral by a smooth monotone map v = f(u) with
    /// derivative df; leaves are unchanged.
    pub fn reparametrized(
        &self,
        name: &'static str,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        df: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        let base = self.inner.clone();
        Self::from_field(Reparametrized {
            name,
            base,
            f: Box::new(f),
            df: Box::new(df),
        })
    }

    /// Build a foliation from closures (test and CLI hook).
    pub fn from_closures(
        name: &'static str,
        integral: impl Fn(Point) -> Result<f64> + Send + Sync + 'static,
        gradient: impl Fn(Point) -> Result<[f64; 2]> + Send + Sync + 'static,
    ) -> Self {
        Self::from_field(ClosureFoliation {
            name,
            integral: Box::new(integral),
            gradient: Box::new(gradient),
        })
    }
}

struct ClosureFoliation {
    name: &'static str,
    integral: Box<dyn Fn(Point) -> Result<f64> + Send + Sync>,
    gradient: Box<dyn Fn(Point) -> Result<[f64; 2]> + Send + Sync>,
}

impl FoliationField for ClosureFoliation {
    fn name(&self) -> &str {
        self.name
    }
    fn first_integral(&self, p: Point) -> Result<f64> {
        (self.integral)(p)
    }
    fn gradient(&self, p: Point) -> Result<[f64; 2]> {
        (self.gradient)(p)
    }
}

struct Reparametrized {
    name: &'static str,
    base: Arc<dyn FoliationField>,
    f: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    df: Box<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl FoliationField for Reparametrized {
    fn name(&self) -> &str {
        self.name
    }
    fn first_integral(&self, p: Point) -> Result<f64> {
        Ok((self.f)(self.base.first_integral(p)?))
    }
    fn gradient(&self, p: Point) -> Result<[f64; 2]> {
        let u = self.base.first_integral(p)?;
        let g = self.base.gradient(p)?;
        let d = (self.df)(u);
        Ok([d * g[0], d * g[1]])
    }
    fn slope(&self, p: Point) -> Result<Slope> {
        self.base.slope(p)
    }
}

struct ConfocalFoliation {
    fam: ConfocalFamily,
    ellipse: bool,
}

impl ConfocalFoliation {
    fn lambda(&self, p: Point) -> Result<f64> {
        let (l1, l2) = elliptic_coords(p, self.fam)?;
        Ok(if self.ellipse { l1 } else { l2 })
    }
}

impl FoliationField for ConfocalFoliation {
    fn name(&self) -> &str {
        if self.ellipse {
            "confocal-ellipses"
        } else {
            "confocal-hyperbolas"
        }
    }

    fn first_integral(&self, p: Point) -> Result<f64> {
        self.lambda(p)
    }

    fn gradient(&self, p: Point) -> Result<[f64; 2]> {
        let (l1, l2) = elliptic_coords(p, self.fam)?;
        let (l, other) = if self.ellipse { (l1, l2) } else { (l2, l1) };
        let den = l - other;
        if den.abs() < 1e-13 * (1.0 + l.abs()) {
            return Err(Error::Degenerate(
                "confocal gradient degenerates at the foci".into(),
            ));
        }
        Ok([
            2.0 * p.x * (self.fam.b2 - l) / den,
            2.0 * p.y * (self.fam.a2 - l) / den,
        ])
    }
}

struct BipolarFoliation {
    c: f64,
    sigma: bool,
}

impl FoliationField for BipolarFoliation {
    fn name(&self) -> &str {
        if self.sigma {
            "bipolar-sigma"
        } else {
            "bipolar-tau"
        }
    }

    fn first_integral(&self, p: Point) -> Result<f64> {
        let (s, t) = bipolar_coords(p, self.c)?;
        Ok(if self.sigma { s } else { t })
    }

    fn gradient(&self, p: Point) -> Result<[f64; 2]> {
        let (gs, gt) = bipolar_gradients(p, self.c)?;
        Ok(if self.sigma { gs } else { gt })
    }
}

/// The two tangent-line families from an exterior point, labelled by the
/// sign of the adapted slope parameter P.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TangentBranch {
    /// Leaf slope (P − T)/(1 + PT) with P > 0.
    PlusP,
    /// Leaf slope (P + T)/(PT − 1) with P > 0.
    MinusP,
}

struct TangentFoliation {
    q: ConicMember,
    branch: TangentBranch,
}

impl TangentFoliation {
    fn branch_slope(&self, p: Point) -> Result<Slope> {
        let t = conics::confocal_slope(p, self.q.family)?;
        let pp = conics::tangent_web_p(p, self.q)?;
        let (num, den) = match self.branch {
            TangentBranch::PlusP => (pp - t, 1.0 + pp * t),
            TangentBranch::MinusP => (pp + t, pp * t - 1.0),
        };
        if den.abs() <= 1e-14 * (num.abs() + 1.0) {
            Ok(Slope::Vertical)
        } else {
            Ok(Slope::Finite(num / den))
        }
    }

    fn tangency_angle(&self, p: Point) -> Result<f64> {
        let m = self.branch_slope(p)?;
        let touch = tangency_point(p, m, self.q)?;
        let (a, b) = self.q.semi_axis_squares();
        Ok((touch.y / b.sqrt()).atan2(touch.x / a.sqrt()))
    }
}

impl FoliationField for TangentFoliation {
    fn name(&self) -> &str {
        match self.branch {
            TangentBranch::PlusP => "tangent-lines-plus",
            TangentBranch::MinusP => "tangent-lines-minus",
        }
    }

    fn first_integral(&self, p: Point) -> Result<f64> {
        self.tangency_angle(p)
    }

    fn gradient(&self, p: Point) -> Result<[f64; 2]> {
        let t = self.tangency_angle(p)?;
        let (a, b) = self.q.semi_axis_squares();
        let (ra, rb) = (a.sqrt(), b.sqrt());
        let ft = -p.x * t.sin() / ra + p.y * t.cos() / rb;
        if ft.abs() < 1e-13 {
            return Err(Error::Degenerate("tangency-angle gradient on Q".into()));
        }
        Ok([-(t.cos() / ra) / ft, -(t.sin() / rb) / ft])
    }

    fn slope(&self, p: Point) -> Result<Slope> {
        self.branch_slope(p)
    }

    fn is_singular(&self, p: Point) -> bool {
        self.q.residual(p) <= 0.0 || self.first_integral(p).is_err()
    }
}

/// Which canonical integral a foliation of the tangent web carries:
/// s₁ on the ellipses, s₂ on the hyperbolas, s₁ ± s₂ on the two
/// tangent-line families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CanonicalPart {
    Ellipses,
    Hyperbolas,
    Sum,
    Diff,
}

struct CanonicalTangentFoliation {
    q: ConicMember,
    part: CanonicalPart,
    lambda_ref1: f64,
    lambda_ref2: f64,
}

impl CanonicalTangentFoliation {
    fn new(q: ConicMember, part: CanonicalPart, probe: Point) -> Result<Self> {
        if !q.is_ellipse() {
            return Err(Error::Degenerate(
                "canonical tangent integrals are implemented for ellipse members".into(),
            ));
        }
        let fam = q.family;
        let field = Self {
            q,
            part,
            lambda_ref1: q.lambda - 1.0,
            lambda_ref2: 0.5 * (fam.a2 + fam.b2),
        };
        if matches!(part, CanonicalPart::Sum | CanonicalPart::Diff) {
            // sanity: the gradient must annihilate one of the two tangent
            // directions at the probe point
            let g = field.gradient(probe)?;
            let pair = tangent_slopes(probe, q)?;
            let ok = [pair.m1, pair.m2].iter().any(|m| {
                let d = m.direction();
                (g[0] * d[0] + g[1] * d[1]).abs() < 1e-8 * (g[0].abs() + g[1].abs())
            });
            if !ok {
                return Err(Error::Degenerate(
                    "canonical integral is not constant on either tangent family at the probe"
                        .into(),
                ));
            }
        }
        Ok(field)
    }

    fn s1_density(&self, l: f64) -> f64 {
        let fam = self.q.family;
        1.0 / (2.0 * ((fam.a2 - l) * (fam.b2 - l) * (self.q.lambda - l)).sqrt())
    }

    fn s2_density(&self, l: f64) -> f64 {
        let fam = self.q.family;
        1.0 / (2.0 * ((fam.a2 - l) * (l - fam.b2) * (l - self.q.lambda)).sqrt())
    }

    fn coords(&self, p: Point) -> Result<(f64, f64)> {
        let (l1, l2) = elliptic_coords(p, self.q.family)?;
        if self.q.lambda - l1 < 1e-9 {
            return Err(Error::Inadmissible(
                "canonical integral needs the point strictly outside Q".into(),
            ));
        }
        Ok((l1, l2))
    }

    fn s1(&self, l1: f64) -> f64 {
        ode::quad_adaptive(&mut |l| self.s1_density(l), self.lambda_ref1, l1, 1e-13)
    }

    fn s2(&self, l2: f64) -> f64 {
        ode::quad_adaptive(&mut |l| self.s2_density(l), self.lambda_ref2, l2, 1e-13)
    }
}

impl FoliationField for CanonicalTangentFoliation {
    fn name(&self) -> &str {
        match self.part {
            CanonicalPart::Ellipses => "confocal-ellipses-canonical",
            CanonicalPart::Hyperbolas => "confocal-hyperbolas-canonical",
            CanonicalPart::Sum => "tangent-canonical-sum",
            CanonicalPart::Diff => "tangent-canonical-diff",
        }
    }

    fn first_integral(&self, p: Point) -> Result<f64> {
        let (l1, l2) = self.coords(p)?;
        Ok(match self.part {
            CanonicalPart::Ellipses => self.s1(l1),
            CanonicalPart::Hyperbolas => self.s2(l2),
            CanonicalPart::Sum => self.s1(l1) + self.s2(l2),
            CanonicalPart::Diff => self.s1(l1) - self.s2(l2),
        })
    }

    fn gradient(&self, p: Point) -> Result<[f64; 2]> {
        let (l1, l2) = self.coords(p)?;
        let fam = self.q.family;
        let den = l1 - l2;
        let g1 = [
            2.0 * p.x * (fam.b2 - l1) / den,
            2.0 * p.y * (fam.a2 - l1) / den,
        ];
        let g2 = [
            2.0 * p.x * (fam.b2 - l2) / -den,
            2.0 * p.y * (fam.a2 - l2) / -den,
        ];
        let d1 = self.s1_density(l1);
        let d2 = self.s2_density(l2);
        let (c1, c2) = match self.part {
            CanonicalPart::Ellipses => (1.0, 0.0),
            CanonicalPart::Hyperbolas => (0.0, 1.0),
            CanonicalPart::Sum => (1.0, 1.0),
            CanonicalPart::Diff => (1.0, -1.0),
        };
        Ok([
            c1 * d1 * g1[0] + c2 * d2 * g2[0],
            c1 * d1 * g1[1] + c2 * d2 * g2[1],
        ])
    }

    fn is_singular(&self, p: Point) -> bool {
        self.q.residual(p) <= 0.0 || self.first_integral(p).is_err()
    }
}

/// Rectangular sampling box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleBox {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
}

impl SampleBox {
    pub fn new(xmin: f64, xmax: f64, ymin: f64, ymax: f64) -> Self {
        Self {
            xmin,
            xmax,
            ymin,
            ymax,
        }
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.xmin && p.x <= self.xmax && p.y >= self.ymin && p.y <= self.ymax
    }

    pub fn diameter(&self) -> f64 {
        ((self.xmax - self.xmin).powi(2) + (self.ymax - self.ymin).powi(2)).sqrt()
    }
}

/// Sampling domain: a box intersected with an admissibility predicate.
#[derive(Clone)]
pub struct Domain {
    pub bbox: SampleBox,
    pub margin: f64,
    exclusion: Arc<dyn Fn(Point) -> bool + Send + Sync>,
}

impl std::fmt::Debug for Domain {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Domain({:?}, margin {})", self.bbox, self.margin)
    }
}

impl Domain {
    pub fn new(
        bbox: SampleBox,
        margin: f64,
        exclusion: impl Fn(Point) -> bool + Send + Sync + 'static,
    ) -> Self {
        Self {
            bbox,
            margin,
            exclusion: Arc::new(exclusion),
        }
    }

    /// Box-only domain with no excluded sets.
    pub fn plain(bbox: SampleBox) -> Self {
        Self::new(bbox, 0.0, |_| false)
    }

    /// Standard domain for webs over a confocal family: excludes the axis
    /// strips and focus disks. (The T² = 1 band is harmless for leaves and
    /// first integrals; only the displayed coefficient systems need it.)
    pub fn confocal(bbox: SampleBox, fam: ConfocalFamily, margin: f64) -> Self {
        Self::new(bbox, margin, move |p| !admissible_net(p, fam, margin))
    }

    /// Domain for the tangent web: net exclusions plus the inside of Q
    /// with a margin in the pencil parameter.
    pub fn tangent(bbox: SampleBox, q: ConicMember, margin: f64) -> Self {
        let fam = q.family;
        Self::new(bbox, margin, move |p| {
            if !admissible_net(p, fam, margin) {
                return true;
            }
            match elliptic_coords(p, fam) {
                Ok((l1, _)) => q.lambda - l1 < margin,
                Err(_) => true,
            }
        })
    }

    pub fn admissible(&self, p: Point) -> bool {
        self.bbox.contains(p) && !(self.exclusion)(p)
    }
}

/// An ordered list of foliations over a common sampling domain.
#[derive(Debug, Clone)]
pub struct Web {
    pub foliations: Vec<Foliation>,
    pub domain: Domain,
}

impl Web {
    pub fn new(foliations: Vec<Foliation>, domain: Domain) -> Self {
        Self { foliations, domain }
    }

    pub fn size(&self) -> usize {
        self.foliations.len()
    }

    /// Leaf directions pairwise distinct at `p` (web regularity).
    pub fn regular_at(&self, p: Point) -> bool {
        let slopes: Vec<Slope> = match self
            .foliations
            .iter()
            .map(|f| f.slope(p))
            .collect::<Result<_>>()
        {
            Ok(s) => s,
            Err(_) => return false,
        };
        for i in 0..slopes.len() {
            for j in (i + 1)..slopes.len() {
                if slopes[i].line_distance(slopes[j]) < 1e-4 {
                    return false;
                }
            }
        }
        true
    }

    /// Draw `n` admissible, web-regular sample points (deterministic for a
    /// given RNG state).
    pub fn sample_points(&self, n: usize, rng: &mut impl Rng) -> Result<Vec<Point>> {
        let mut pts = Vec::with_capacity(n);
        let mut attempts = 0usize;
        while pts.len() < n {
            attempts += 1;
            if attempts > 1000 * n.max(10) {
                return Err(Error::Inadmissible(
                    "sampling domain appears to be empty".into(),
                ));
            }
            let p = Point::new(
                rng.gen_range(self.domain.bbox.xmin..=self.domain.bbox.xmax),
                rng.gen_range(self.domain.bbox.ymin..=self.domain.bbox.ymax),
            );
            if self.domain.admissible(p) && self.regular_at(p) {
                pts.push(p);
            }
        }
        Ok(pts)
    }

    /// All k-element subwebs in lexicographic order of foliation indices.
    pub fn subwebs(&self, k: usize) -> Vec<Web> {
        let n = self.size();
        if k > n {
            return Vec::new();
        }
        let mut out = Vec::new();
        let mut idx: Vec<usize> = (0..k).collect();
        loop {
            out.push(Web::new(
                idx.iter().map(|&i| self.foliations[i].clone()).collect(),
                self.domain.clone(),
            ));
            // next combination
            let mut i = k;
            loop {
                if i == 0 {
                    return out;
                }
                i -= 1;
                if idx[i] != i + n - k {
                    break;
                }
                if i == 0 {
                    return out;
                }
            }
            idx[i] += 1;
            for j in (i + 1)..k {
                idx[j] = idx[j - 1] + 1;
            }
        }
    }

    /// Confocal net + Cartesian coordinate lines (order: ellipses,
    /// hyperbolas, vertical, horizontal).
    pub fn confocal_cartesian(fam: ConfocalFamily, bbox: SampleBox, margin: f64) -> Self {
        Web::new(
            vec![
                Foliation::confocal_ellipses(fam),
                Foliation::confocal_hyperbolas(fam),
                Foliation::vertical_lines(),
                Foliation::horizontal_lines(),
            ],
            Domain::confocal(bbox, fam, margin),
        )
    }

    /// Confocal net + bipolar coordinate lines sharing the foci (order:
    /// ellipses, hyperbolas, σ circles, τ circles).
    pub fn confocal_bipolar(fam: ConfocalFamily, bbox: SampleBox, margin: f64) -> Self {
        let c = fam.focal_distance();
        Web::new(
            vec![
                Foliation::confocal_ellipses(fam),
                Foliation::confocal_hyperbolas(fam),
                Foliation::bipolar_sigma(c),
                Foliation::bipolar_tau(c),
            ],
            Domain::confocal(bbox, fam, margin),
        )
    }

    /// Confocal net + tangent lines to the member λ₀, with the canonical
    /// quadrature integrals on the line families (order: ellipses,
    /// hyperbolas, sum family, difference family).
    pub fn confocal_tangent(
        fam: ConfocalFamily,
        lambda0: f64,
        bbox: SampleBox,
        margin: f64,
    ) -> Result<Self> {
        let q = fam.member(lambda0)?;
        let domain = Domain::tangent(bbox, q, margin);
        // probe: walk the box diagonal for an admissible exterior point
        let probe = (1..40)
            .map(|i| {
                let t = i as f64 / 40.0;
                Point::new(
                    bbox.xmin + t * (bbox.xmax - bbox.xmin),
                    bbox.ymin + t * (bbox.ymax - bbox.ymin),
                )
            })
            .find(|p| domain.admissible(*p))
            .ok_or_else(|| Error::Inadmissible("no admissible probe point in the box".into()))?;
        Ok(Web::new(
            vec![
                Foliation::tangent_canonical(q, CanonicalPart::Ellipses, probe)?,
                Foliation::tangent_canonical(q, CanonicalPart::Hyperbolas, probe)?,
                Foliation::tangent_canonical(q, CanonicalPart::Sum, probe)?,
                Foliation::tangent_canonical(q, CanonicalPart::Diff, probe)?,
            ],
            domain,
        ))
    }

    /// Confocal net + Cartesian lines + bipolar circles (six foliations).
    pub fn six_web(fam: ConfocalFamily, bbox: SampleBox, margin: f64) -> Self {
        let c = fam.focal_distance();
        Web::new(
            vec![
                Foliation::confocal_ellipses(fam),
                Foliation::confocal_hyperbolas(fam),
                Foliation::vertical_lines(),
                Foliation::horizontal_lines(),
                Foliation::bipolar_sigma(c),
                Foliation::bipolar_tau(c),
            ],
            Domain::confocal(bbox, fam, margin),
        )
    }
}

/// Follow the leaf of `leaf` through `from` until the first integral of
/// `stop` reaches `target`. The leaf is integrated at unit speed with the
/// initial orientation chosen to approach the target level; the stopping
/// point is refined to the integrator tolerance.
pub fn flow(
    leaf: &Foliation,
    from: Point,
    stop: &Foliation,
    target: f64,
    domain: &Domain,
    opts: &OdeOptions,
) -> Result<Point> {
    let phi0 = stop.first_integral(from)? - target;
    let scale = 1.0 + target.abs();
    if phi0.abs() <= 1e-14 * scale {
        return Ok(from);
    }
    let d0 = leaf.slope(from)?.direction();
    let g0 = stop.gradient(from)?;
    let deriv = g0[0] * d0[0] + g0[1] * d0[1];
    if deriv.abs() <= 1e-12 * (g0[0].abs() + g0[1].abs()) {
        return Err(Error::Degenerate(
            "leaf is tangent to the stopping foliation".into(),
        ));
    }
    let orient = if phi0 * deriv > 0.0 { -1.0 } else { 1.0 };

    let mut prev_dir = [orient * d0[0], orient * d0[1]];
    let mut rhs = |_s: f64, y: &[f64; 2]| -> Result<[f64; 2]> {
        let p = Point::new(y[0], y[1]);
        let d = leaf.slope(p)?.direction();
        let mut d = d;
        if d[0] * prev_dir[0] + d[1] * prev_dir[1] < 0.0 {
            d = [-d[0], -d[1]];
        }
        prev_dir = d;
        Ok(d)
    };

    let s_max = 4.0 * domain.bbox.diameter().max(1.0);
    let opts = &OdeOptions {
        max_step: 0.05 * domain.bbox.diameter().max(0.2),
        ..*opts
    };
    let mut checkpoint = (0.0_f64, [from.x, from.y], phi0);
    let mut bracket: Option<(f64, [f64; 2], f64)> = None;
    let mut left_domain: Option<Point> = None;

    {
        let mut observer = |s: f64, y: &[f64; 2]| -> bool {
            let p = Point::new(y[0], y[1]);
            if !domain.admissible(p) {
                left_domain = Some(p);
                return false;
            }
            match stop.first_integral(p) {
                Ok(u) => {
                    let phi = u - target;
                    if phi == 0.0 || phi.signum() != checkpoint.2.signum() {
                        bracket = Some((s, *y, phi));
                        false
                    } else {
                        checkpoint = (s, *y, phi);
                        true
                    }
                }
                Err(_) => {
                    left_domain = Some(p);
                    false
                }
            }
        };
        ode::integrate_observed(&mut rhs, 0.0, s_max, [from.x, from.y], opts, &mut observer)?;
    }

    if bracket.is_none() {
        if let Some(p) = left_domain {
            return Err(Error::LeftDomain(p.x, p.y));
        }
        return Err(Error::Integration(
            "stopping level not reached within the arc-length budget".into(),
        ));
    }
    let (s_hi, _, _) = bracket.unwrap();
    let (s_lo, y_lo, _) = checkpoint;

    // refine the crossing by re-integrating short spans from the checkpoint
    let mut eval = |s: f64| -> Result<f64> {
        let y = if s == s_lo {
            y_lo
        } else {
            ode::integrate(&mut rhs, s_lo, s, y_lo, opts)?
        };
        Ok(stop.first_integral(Point::new(y[0], y[1]))? - target)
    };
    let s_root = ode::brent(&mut eval, s_lo, s_hi, 1e-13, 100)?;
    let y = ode::integrate(&mut rhs, s_lo, s_root, y_lo, opts)?;
    Ok(Point::new(y[0], y[1]))
}

/// Move along the leaf of `f` through `p` by signed arc length `s`.
pub fn flow_by_arclength(
    f: &Foliation,
    p: Point,
    s: f64,
    domain: &Domain,
    opts: &OdeOptions,
) -> Result<Point> {
    if s == 0.0 {
        return Ok(p);
    }
    let d0 = f.slope(p)?.direction();
    let sgn = s.signum();
    let mut prev = [sgn * d0[0], sgn * d0[1]];
    let mut rhs = |_t: f64, y: &[f64; 2]| -> Result<[f64; 2]> {
        let q = Point::new(y[0], y[1]);
        if !domain.admissible(q) {
            return Err(Error::LeftDomain(q.x, q.y));
        }
        let mut d = f.slope(q)?.direction();
        if d[0] * prev[0] + d[1] * prev[1] < 0.0 {
            d = [-d[0], -d[1]];
        }
        prev = d;
        Ok(d)
    };
    let y = ode::integrate(&mut rhs, 0.0, s.abs(), [p.x, p.y], opts)?;
    Ok(Point::new(y[0], y[1]))
}

/// Outcome of one hexagonal closure figure.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct HexagonDefect {
    pub epsilon: f64,
    /// Euclidean gap between the start and end point of the figure.
    pub defect: f64,
    /// Slope of log defect against log ε over {ε, ε/2, ε/4}; zero when
    /// the defects sit at the integrator floor.
    pub order_estimate: f64,
}

/// Closure defect of a single hexagon figure at one ε.
pub fn hexagon_defect_single(
    web: &Web,
    center: Point,
    eps: f64,
    opts: &OdeOptions,
) -> Result<f64> {
    if web.size() != 3 {
        return Err(Error::Degenerate(format!(
            "hexagon figure needs a 3-web, got {} foliations",
            web.size()
        )));
    }
    let targets: Vec<f64> = web
        .foliations
        .iter()
        .map(|f| f.first_integral(center))
        .collect::<Result<_>>()?;
    let start = flow_by_arclength(&web.foliations[0], center, eps, &web.domain, opts)?;

    // stop-leaf sequence (1, 2, 0, 1, 2, 0); travel along the remaining
    // foliation each time, beginning on the fixed leaf of foliation 0
    let mut host = 0usize;
    let mut p = start;
    for step in 0..6 {
        let stop = (step + 1) % 3;
        let travel = 3 - host - stop;
        p = flow(
            &web.foliations[travel],
            p,
            &web.foliations[stop],
            targets[stop],
            &web.domain,
            opts,
        )?;
        host = stop;
    }
    Ok(p.dist(start))
}

/// Run the closure figure at ε, ε/2, ε/4 and report the defect at ε with
/// a log–log convergence-order estimate.
pub fn hexagon_defect(
    web: &Web,
    center: Point,
    eps: f64,
    opts: &OdeOptions,
) -> Result<HexagonDefect> {
    let d0 = hexagon_defect_single(web, center, eps, opts)?;
    let d1 = hexagon_defect_single(web, center, eps / 2.0, opts)?;
    let d2 = hexagon_defect_single(web, center, eps / 4.0, opts)?;
    let floor = 100.0 * opts.abs_tol;
    let order = if d0 < floor || d1 < floor || d2 < floor {
        0.0
    } else {
        // least-squares slope over the three (ln ε, ln defect) pairs
        let xs = [eps.ln(), (eps / 2.0).ln(), (eps / 4.0).ln()];
        let ys = [d0.ln(), d1.ln(), d2.ln()];
        let xm = xs.iter().sum::<f64>() / 3.0;
        let ym = ys.iter().sum::<f64>() / 3.0;
        let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
        let den: f64 = xs.iter().map(|x| (x - xm) * (x - xm)).sum();
        num / den
    };
    Ok(HexagonDefect {
        epsilon: eps,
        defect: d0,
        order_estimate: order,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn fam() -> ConfocalFamily {
        ConfocalFamily::new(2.0, 1.0).unwrap()
    }

    fn bbox() -> SampleBox {
        SampleBox::new(0.3, 2.5, 0.3, 2.0)
    }

    fn opts() -> OdeOptions {
        OdeOptions::default()
    }

    #[test]
    fn flow_along_vertical_leaf() {
        let v = Foliation::vertical_lines();
        let h = Foliation::horizontal_lines();
        let domain = Domain::plain(SampleBox::new(-5.0, 5.0, -5.0, 5.0));
        let p = flow(&v, Point::new(1.0, 1.0), &h, 1.5, &domain, &opts()).unwrap();
        assert_relative_eq!(p.x, 1.0, epsilon = 1e-12);
        assert_relative_eq!(p.y, 1.5, epsilon = 1e-12);
    }

    #[test]
    fn flow_zero_length_is_identity() {
        let v = Foliation::vertical_lines();
        let h = Foliation::horizontal_lines();
        let domain = Domain::plain(SampleBox::new(-5.0, 5.0, -5.0, 5.0));
        let p = flow(&v, Point::new(1.0, 1.0), &h, 1.0, &domain, &opts()).unwrap();
        assert_eq!(p, Point::new(1.0, 1.0));
    }

    #[test]
    fn flow_conserves_own_integral_on_ellipse_leaf() {
        let f = fam();
        let e = Foliation::confocal_ellipses(f);
        let h = Foliation::confocal_hyperbolas(f);
        let domain = Domain::confocal(bbox(), f, 0.05);
        let p0 = Point::new(1.0, 1.0);
        let l1_start = e.first_integral(p0).unwrap();
        let target = h.first_integral(Point::new(1.3, 0.9)).unwrap();
        let p1 = flow(&e, p0, &h, target, &domain, &opts()).unwrap();
        let l1_end = e.first_integral(p1).unwrap();
        assert!(
            (l1_end - l1_start).abs() < 1e-9,
            "λ₁ drifted by {:.3e}",
            l1_end - l1_start
        );
        assert!((h.first_integral(p1).unwrap() - target).abs() < 1e-10);
    }

    #[test]
    fn flow_reports_domain_exit() {
        let v = Foliation::vertical_lines();
        let h = Foliation::horizontal_lines();
        let domain = Domain::plain(SampleBox::new(0.0, 2.0, 0.0, 2.0));
        let r = flow(&v, Point::new(1.0, 1.0), &h, 5.0, &domain, &opts());
        assert!(matches!(r, Err(Error::LeftDomain(_, _))));
    }

    #[test]
    fn gradients_match_finite_differences() {
        let f = fam();
        let c = f.focal_distance();
        let q = f.member(0.0).unwrap();
        let fols = vec![
            Foliation::confocal_ellipses(f),
            Foliation::confocal_hyperbolas(f),
            Foliation::bipolar_sigma(c),
            Foliation::bipolar_tau(c),
            Foliation::tangent_lines(q, TangentBranch::PlusP),
            Foliation::tangent_lines(q, TangentBranch::MinusP),
        ];
        let pts = [Point::new(1.4, 1.1), Point::new(2.0, 0.7), Point::new(1.7, 1.6)];
        let h = 1e-6;
        for fol in &fols {
            for &p in &pts {
                let g = fol.gradient(p).unwrap();
                let ux = (fol.first_integral(Point::new(p.x + h, p.y)).unwrap()
                    - fol.first_integral(Point::new(p.x - h, p.y)).unwrap())
                    / (2.0 * h);
                let uy = (fol.first_integral(Point::new(p.x, p.y + h)).unwrap()
                    - fol.first_integral(Point::new(p.x, p.y - h)).unwrap())
                    / (2.0 * h);
                let scale = 1.0 + g[0].abs() + g[1].abs();
                assert!(
                    ((g[0] - ux).abs() + (g[1] - uy).abs()) / scale < 1e-8,
                    "{} gradient mismatch at ({}, {}): got {:?}, fd ({ux}, {uy})",
                    fol.name(),
                    p.x,
                    p.y,
                    g
                );
            }
        }
    }

    #[test]
    fn gradient_is_orthogonal_to_leaf_direction() {
        let f = fam();
        let c = f.focal_distance();
        let fols = vec![
            Foliation::confocal_ellipses(f),
            Foliation::confocal_hyperbolas(f),
            Foliation::bipolar_sigma(c),
            Foliation::bipolar_tau(c),
        ];
        for fol in &fols {
            for &(x, y) in &[(1.0, 1.0), (1.8, 0.6), (0.6, 1.7)] {
                let p = Point::new(x, y);
                let g = fol.gradient(p).unwrap();
                let d = fol.slope(p).unwrap().direction();
                let dot = (g[0] * d[0] + g[1] * d[1]).abs();
                assert!(dot < 1e-8 * (g[0].abs() + g[1].abs()), "{}", fol.name());
            }
        }
    }

    #[test]
    fn canonical_integral_constant_on_tangent_lines() {
        let f = fam();
        let q = f.member(0.0).unwrap();
        let web = Web::confocal_tangent(f, 0.0, bbox(), 0.05).unwrap();
        // take an admissible point, draw a tangent line through it, sample
        // along the straight line and check constancy of the integral
        let p = Point::new(1.9, 1.2);
        let pair = tangent_slopes(p, q).unwrap();
        for fol in &web.foliations[2..] {
            let u0 = fol.first_integral(p).unwrap();
            // find which of the two tangent directions this foliation follows
            let d_fol = fol.slope(p).unwrap();
            let m = [pair.m1, pair.m2]
                .into_iter()
                .min_by(|a, b| {
                    d_fol
                        .line_distance(*a)
                        .partial_cmp(&d_fol.line_distance(*b))
                        .unwrap()
                })
                .unwrap();
            let d = m.direction();
            for step in [-0.3, -0.1, 0.2, 0.4] {
                let qpt = Point::new(p.x + step * d[0], p.y + step * d[1]);
                if !web.domain.admissible(qpt) {
                    continue;
                }
                let u = fol.first_integral(qpt).unwrap();
                assert!(
                    (u - u0).abs() < 1e-9,
                    "{} drifts by {:.3e} along its leaf",
                    fol.name(),
                    u - u0
                );
            }
        }
    }

    #[test]
    fn tangency_angle_constant_on_its_leaf() {
        let f = fam();
        let q = f.member(0.0).unwrap();
        let fol = Foliation::tangent_lines(q, TangentBranch::PlusP);
        let p = Point::new(2.1, 0.9);
        let u0 = fol.first_integral(p).unwrap();
        let d = fol.slope(p).unwrap().direction();
        for step in [-0.4, 0.25, 0.5] {
            let qpt = Point::new(p.x + step * d[0], p.y + step * d[1]);
            let u = fol.first_integral(qpt).unwrap();
            assert!((u - u0).abs() < 1e-10, "angle drift {:.3e}", u - u0);
        }
    }

    #[test]
    fn subweb_enumeration_counts() {
        let w = Web::confocal_cartesian(fam(), bbox(), 0.05);
        assert_eq!(w.subwebs(3).len(), 4);
        assert_eq!(w.subwebs(2).len(), 6);
        let six = Web::six_web(fam(), bbox(), 0.05);
        assert_eq!(six.subwebs(3).len(), 20);
        // lexicographic order: first 3-subweb drops the last foliation
        let first = &w.subwebs(3)[0];
        assert_eq!(first.foliations[0].name(), "confocal-ellipses");
        assert_eq!(first.foliations[2].name(), "vertical");
    }

    #[test]
    fn parallel_pencils_close_exactly() {
        let web = Web::new(
            vec![
                Foliation::parallel_lines(Slope::Finite(0.0)),
                Foliation::parallel_lines(Slope::Vertical),
                Foliation::parallel_lines(Slope::Finite(1.0)),
            ],
            Domain::plain(SampleBox::new(-3.0, 3.0, -3.0, 3.0)),
        );
        let d = hexagon_defect(&web, Point::new(0.2, -0.1), 0.4, &opts()).unwrap();
        assert!(d.defect < 1e-12, "affine web defect {:.3e}", d.defect);
    }

    #[test]
    fn confocal_bipolar_subweb_is_hexagonal() {
        let f = fam();
        let c = f.focal_distance();
        let web = Web::new(
            vec![
                Foliation::confocal_ellipses(f),
                Foliation::bipolar_sigma(c),
                Foliation::bipolar_tau(c),
            ],
            Domain::confocal(bbox(), f, 0.05),
        );
        for center in [Point::new(1.0, 1.0), Point::new(1.6, 0.8)] {
            for eps in [0.05, -0.05] {
                let d = hexagon_defect(&web, center, eps, &opts()).unwrap();
                assert!(
                    d.defect < 1e-8,
                    "hexagonal subweb defect {:.3e} at ({}, {})",
                    d.defect,
                    center.x,
                    center.y
                );
            }
        }
    }

    #[test]
    fn generic_web_defect_is_third_order() {
        // slopes 0, ∞ and the non-integrable-looking field x + 2y: build
        // the third foliation from an explicit integral whose leaves have
        // slope x + 2y nowhere aligned with the axes in the box
        // dy/dx = x + 2y has integrating solution y(x) = Ce^{2x} − x/2 − 1/4,
        // so u = (y + x/2 + 1/4) e^{−2x} is a first integral.
        let third = Foliation::from_closures(
            "slope-x-plus-2y",
            |p| Ok((p.y + 0.5 * p.x + 0.25) * (-2.0 * p.x).exp()),
            |p| {
                let e = (-2.0 * p.x).exp();
                Ok([
                    e * (0.5 - 2.0 * (p.y + 0.5 * p.x + 0.25)),
                    e,
                ])
            },
        );
        let web = Web::new(
            vec![
                Foliation::parallel_lines(Slope::Finite(0.0)),
                Foliation::parallel_lines(Slope::Vertical),
                third,
            ],
            Domain::plain(SampleBox::new(-2.0, 2.0, -2.0, 2.0)),
        );
        let center = Point::new(0.3, 0.2);
        let d1 = hexagon_defect_single(&web, center, 0.06, &opts()).unwrap();
        let d2 = hexagon_defect_single(&web, center, 0.03, &opts()).unwrap();
        let ratio = d1 / d2;
        assert!(
            (ratio - 8.0).abs() < 1.6,
            "expected third-order defect decay, ratio {ratio:.3}"
        );
        let rep = hexagon_defect(&web, center, 0.06, &opts()).unwrap();
        assert!(
            (rep.order_estimate - 3.0).abs() < 0.3,
            "order estimate {:.3}",
            rep.order_estimate
        );
    }

    #[test]
    fn hexagon_defect_invariant_under_relabeling() {
        let f = fam();
        let c = f.focal_distance();
        let mk = |order: [usize; 3]| {
            let all = [
                Foliation::confocal_ellipses(f),
                Foliation::bipolar_sigma(c),
                Foliation::bipolar_tau(c),
            ];
            Web::new(
                order.iter().map(|&i| all[i].clone()).collect(),
                Domain::confocal(bbox(), f, 0.05),
            )
        };
        let d1 = hexagon_defect(&mk([0, 1, 2]), Point::new(1.2, 0.9), 0.05, &opts()).unwrap();
        let d2 = hexagon_defect(&mk([1, 2, 0]), Point::new(1.2, 0.9), 0.05, &opts()).unwrap();
        // both tiny for a hexagonal web; differences are O(ε⁴) at most
        assert!(d1.defect < 1e-8 && d2.defect < 1e-8);
        assert!((d1.defect - d2.defect).abs() < 1e-8);
    }
}
