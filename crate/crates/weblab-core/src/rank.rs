//! Numerical web-rank estimation by polynomial collocation over first
//! integrals.
//!
//! An Abelian relation is sought in derivative form: per-foliation
//! densities g_i with Σ g_i(u_i(p)) ∇u_i(p) = 0 at every point. Closedness
//! of the summand forms is automatic in this ansatz. Expanding each g_i in
//! Chebyshev polynomials of the rescaled first integral turns the search
//! into a nullspace problem for a tall collocation matrix; true relations
//! reveal themselves as trailing singular values that keep shrinking when
//! the polynomial degree doubles, while the rest of the spectrum stays put.

use crate::conics::Point;
use crate::quartic::ProjectivePoint;
use crate::web::Web;
use crate::{Error, Result};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Monotone reparametrization applied to a first integral before the
/// polynomial expansion. Used to keep the relation densities analytic
/// with comfortable margins on the sampled range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Transform {
    Identity,
    /// ln u (u > 0)
    Ln,
    /// ln(c − u) (u < c)
    LnDiff { c: f64 },
    /// ln((u − lo)/(hi − u)) (lo < u < hi)
    LnRatio { lo: f64, hi: f64 },
    /// ln tan(u/2) (0 < u < π)
    LnTanHalf,
    /// ln tanh(u/2) (u > 0)
    LnTanhHalf,
}

impl Transform {
    pub fn apply(self, u: f64) -> Result<f64> {
        let bad = |what: &str| Error::Rank(format!("transform domain violated: {what} at u = {u}"));
        match self {
            Transform::Identity => Ok(u),
            Transform::Ln => {
                if u <= 0.0 {
                    Err(bad("ln needs u > 0"))
                } else {
                    Ok(u.ln())
                }
            }
            Transform::LnDiff { c } => {
                if u >= c {
                    Err(bad("ln(c − u) needs u < c"))
                } else {
                    Ok((c - u).ln())
                }
            }
            Transform::LnRatio { lo, hi } => {
                if u <= lo || u >= hi {
                    Err(bad("ln ratio needs lo < u < hi"))
                } else {
                    Ok(((u - lo) / (hi - u)).ln())
                }
            }
            Transform::LnTanHalf => {
                if u <= 0.0 || u >= std::f64::consts::PI {
                    Err(bad("ln tan(u/2) needs 0 < u < π"))
                } else {
                    Ok((u / 2.0).tan().ln())
                }
            }
            Transform::LnTanhHalf => {
                if u <= 0.0 {
                    Err(bad("ln tanh(u/2) needs u > 0"))
                } else {
                    Ok((u / 2.0).tanh().ln())
                }
            }
        }
    }

    pub fn deriv(self, u: f64) -> Result<f64> {
        match self {
            Transform::Identity => Ok(1.0),
            Transform::Ln => Ok(1.0 / u),
            Transform::LnDiff { c } => Ok(-1.0 / (c - u)),
            Transform::LnRatio { lo, hi } => Ok((hi - lo) / ((u - lo) * (hi - u))),
            Transform::LnTanHalf => Ok(1.0 / u.sin()),
            Transform::LnTanhHalf => Ok(1.0 / u.sinh()),
        }
    }
}

/// Collocation controls.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CollocationConfig {
    /// Base polynomial degree per foliation; the spectral test compares
    /// this degree against its double.
    pub degree: usize,
    /// Number of sample points (each contributes two equations).
    pub samples: usize,
    /// Minimal shrink factor across the degree doubling for a trailing
    /// singular value to count as a relation.
    pub gap_threshold: f64,
    pub seed: u64,
    /// Per-foliation integral transforms; empty means identity for all.
    #[serde(default)]
    pub transforms: Vec<Transform>,
}

impl Default for CollocationConfig {
    fn default() -> Self {
        Self {
            degree: 8,
            samples: 800,
            gap_threshold: 1e3,
            seed: 42,
            transforms: Vec::new(),
        }
    }
}

/// Spectral evidence of the detected rank.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RankReport {
    /// Singular spectrum at the doubled degree, descending.
    pub singular_values: Vec<f64>,
    /// Singular spectrum at the base degree, descending.
    pub singular_values_low: Vec<f64>,
    pub detected_rank: usize,
    /// Smallest shrink factor among the detected relations.
    pub gap_ratio: f64,
    pub degrees_tested: Vec<usize>,
}

/// A numerical basis of the detected Abelian relations: per-relation,
/// per-foliation Chebyshev coefficients of the densities in the rescaled
/// transformed integrals.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AbelianBasisNumeric {
    pub degree: usize,
    /// `densities[r][i]` = coefficients of g_i for relation r.
    pub densities: Vec<Vec<Vec<f64>>>,
    /// Rescaling intervals (lo, hi) of the transformed integrals.
    pub ranges: Vec<(f64, f64)>,
    pub transforms: Vec<Transform>,
    /// Held-out collocation residual per relation.
    pub residuals: Vec<f64>,
    /// The trailing singular values matched to the relations.
    pub singular_values: Vec<f64>,
}

fn chebyshev_values(x: f64, degree: usize, out: &mut Vec<f64>) {
    out.clear();
    out.push(1.0);
    if degree == 0 {
        return;
    }
    out.push(x);
    for k in 2..=degree {
        let v = 2.0 * x * out[k - 1] - out[k - 2];
        out.push(v);
    }
}

/// Per-sample transformed integrals and gradients.
struct SampleData {
    /// `values[i]` = transformed integral of foliation i at the sample.
    values: Vec<f64>,
    grads: Vec<[f64; 2]>,
}

struct Assembly {
    ranges: Vec<(f64, f64)>,
    data: Vec<SampleData>,
}

fn effective_transforms(web: &Web, cfg: &CollocationConfig) -> Result<Vec<Transform>> {
    if cfg.transforms.is_empty() {
        Ok(vec![Transform::Identity; web.size()])
    } else if cfg.transforms.len() == web.size() {
        Ok(cfg.transforms.clone())
    } else {
        Err(Error::Rank(format!(
            "{} transforms for {} foliations",
            cfg.transforms.len(),
            web.size()
        )))
    }
}

fn collect_samples(
    web: &Web,
    transforms: &[Transform],
    points: &[Point],
) -> Result<Assembly> {
    let d = web.size();
    let mut data = Vec::with_capacity(points.len());
    for &p in points {
        let mut values = Vec::with_capacity(d);
        let mut grads = Vec::with_capacity(d);
        for (i, fol) in web.foliations.iter().enumerate() {
            let u = fol.first_integral(p)?;
            let g = fol.gradient(p)?;
            let v = transforms[i].apply(u)?;
            let dv = transforms[i].deriv(u)?;
            values.push(v);
            grads.push([dv * g[0], dv * g[1]]);
        }
        data.push(SampleData { values, grads });
    }
    let ranges: Vec<(f64, f64)> = (0..d)
        .map(|i| {
            let lo = data.iter().map(|s| s.values[i]).fold(f64::INFINITY, f64::min);
            let hi = data
                .iter()
                .map(|s| s.values[i])
                .fold(f64::NEG_INFINITY, f64::max);
            (lo, hi)
        })
        .collect();
    for (i, (lo, hi)) in ranges.iter().enumerate() {
        if !(hi - lo).is_finite() || hi - lo < 1e-10 {
            return Err(Error::Rank(format!(
                "first-integral range of foliation {i} is ill-conditioned: [{lo}, {hi}]"
            )));
        }
    }
    Ok(Assembly { ranges, data })
}

fn build_matrix(assembly: &Assembly, degree: usize) -> DMatrix<f64> {
    let d = assembly.ranges.len();
    let cols = d * (degree + 1);
    let rows = 2 * assembly.data.len();
    let mut m = DMatrix::zeros(rows, cols);
    let mut cheb = Vec::with_capacity(degree + 1);
    for (s, sample) in assembly.data.iter().enumerate() {
        for i in 0..d {
            let (lo, hi) = assembly.ranges[i];
            let half = 0.5 * (hi - lo);
            let mid = 0.5 * (hi + lo);
            // held-out points may fall slightly outside the training
            // range; the recurrence extrapolates harmlessly
            let vhat = (sample.values[i] - mid) / half;
            // rescaled gradient: the relation is invariant under the
            // affine change, the scaling only conditions the matrix
            let gx = sample.grads[i][0] / half;
            let gy = sample.grads[i][1] / half;
            chebyshev_values(vhat, degree, &mut cheb);
            for k in 0..=degree {
                m[(2 * s, i * (degree + 1) + k)] = cheb[k] * gx;
                m[(2 * s + 1, i * (degree + 1) + k)] = cheb[k] * gy;
            }
        }
    }
    m
}

fn ascending_singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    let svd = m.clone().svd(false, false);
    let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    sv.sort_by(|a, b| a.partial_cmp(b).unwrap());
    sv
}

fn bol_bound(d: usize) -> usize {
    if d < 2 {
        0
    } else {
        (d - 1) * (d - 2) / 2
    }
}

/// Count trailing relations by the degree-doubling criterion: a singular
/// value is a relation when it shrinks by at least the gap factor, or when
/// it already sits at the numerical floor at both degrees (exactly
/// representable densities).
fn detect_rank(lo: &[f64], hi: &[f64], gap: f64) -> (usize, f64) {
    let floor_lo = 1e-10 * lo.last().copied().unwrap_or(1.0);
    let floor_hi = 1e-10 * hi.last().copied().unwrap_or(1.0);
    let mut rank = 0;
    let mut gap_ratio = f64::INFINITY;
    for j in 0..lo.len().min(hi.len()) {
        let ratio = lo[j] / hi[j].max(1e-300);
        let at_floor = hi[j] <= floor_hi && lo[j] <= floor_lo;
        if ratio >= gap || at_floor {
            rank += 1;
            gap_ratio = gap_ratio.min(ratio);
        } else {
            break;
        }
    }
    if rank == 0 {
        gap_ratio = if lo.is_empty() || hi.is_empty() {
            0.0
        } else {
            lo[0] / hi[0].max(1e-300)
        };
    }
    (rank, gap_ratio)
}

fn sample_web_points(web: &Web, n: usize, seed: u64) -> Result<Vec<Point>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    web.sample_points(n, &mut rng)
}

/// Estimate the rank of the web's space of Abelian relations.
pub fn rank_estimate(web: &Web, cfg: &CollocationConfig) -> Result<RankReport> {
    let transforms = effective_transforms(web, cfg)?;
    let high = 2 * cfg.degree;
    let needed = 4 * (high + 1) * web.size();
    if cfg.samples < needed {
        return Err(Error::Rank(format!(
            "{} samples are too few for degree {high} on {} foliations (need ≥ {needed})",
            cfg.samples,
            web.size()
        )));
    }
    let points = sample_web_points(web, cfg.samples, cfg.seed)?;
    let assembly = collect_samples(web, &transforms, &points)?;
    let sv_lo = ascending_singular_values(&build_matrix(&assembly, cfg.degree));
    let sv_hi = ascending_singular_values(&build_matrix(&assembly, high));
    let (rank, gap_ratio) = detect_rank(&sv_lo, &sv_hi, cfg.gap_threshold);
    if rank > bol_bound(web.size()) {
        return Err(Error::Rank(format!(
            "detected rank {rank} exceeds the rank bound {} for a {}-web: degenerate sampling",
            bol_bound(web.size()),
            web.size()
        )));
    }
    Ok(RankReport {
        singular_values: sv_hi.iter().rev().copied().collect(),
        singular_values_low: sv_lo.iter().rev().copied().collect(),
        detected_rank: rank,
        gap_ratio,
        degrees_tested: vec![cfg.degree, high],
    })
}

/// Extract a numerical basis of the detected relations from the trailing
/// right-singular vectors at the doubled degree.
pub fn extract_basis(web: &Web, cfg: &CollocationConfig) -> Result<AbelianBasisNumeric> {
    let report = rank_estimate(web, cfg)?;
    let rank = report.detected_rank;
    if rank == 0 {
        return Err(Error::Rank("no Abelian relation detected".into()));
    }
    let transforms = effective_transforms(web, cfg)?;
    let high = 2 * cfg.degree;
    let points = sample_web_points(web, cfg.samples, cfg.seed)?;
    let assembly = collect_samples(web, &transforms, &points)?;
    let m = build_matrix(&assembly, high);
    let svd = m.svd(false, true);
    let v_t = svd
        .v_t
        .as_ref()
        .ok_or_else(|| Error::Rank("svd did not produce singular vectors".into()))?;
    // pair up singular values with rows of Vᵀ, ascending
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[a]
            .partial_cmp(&svd.singular_values[b])
            .unwrap()
    });

    // held-out validation points, drawn from an independent stream
    let holdout = sample_web_points(web, 200, cfg.seed.wrapping_add(0x9e3779b9))?;
    let holdout_assembly = collect_samples_with_ranges(web, &transforms, &holdout, &assembly.ranges)?;
    let m_holdout = build_matrix(&holdout_assembly, high);

    let d = web.size();
    let mut densities = Vec::with_capacity(rank);
    let mut residuals = Vec::with_capacity(rank);
    let mut sigmas = Vec::with_capacity(rank);
    for r in 0..rank {
        let row = order[r];
        let coeffs: Vec<f64> = (0..v_t.ncols()).map(|c| v_t[(row, c)]).collect();
        let vec = nalgebra::DVector::from_vec(coeffs.clone());
        let res = (&m_holdout * &vec).norm();
        let sigma = svd.singular_values[row];
        if res > 100.0 * sigma + 1e-9 {
            return Err(Error::Rank(format!(
                "relation {r} fails held-out validation: residual {res:.3e} vs σ = {sigma:.3e}"
            )));
        }
        let per_fol: Vec<Vec<f64>> = (0..d)
            .map(|i| coeffs[i * (high + 1)..(i + 1) * (high + 1)].to_vec())
            .collect();
        densities.push(per_fol);
        residuals.push(res);
        sigmas.push(sigma);
    }
    Ok(AbelianBasisNumeric {
        degree: high,
        densities,
        ranges: assembly.ranges,
        transforms,
        residuals,
        singular_values: sigmas,
    })
}

fn collect_samples_with_ranges(
    web: &Web,
    transforms: &[Transform],
    points: &[Point],
    ranges: &[(f64, f64)],
) -> Result<Assembly> {
    let mut a = collect_samples(web, transforms, points)?;
    a.ranges = ranges.to_vec();
    Ok(a)
}

impl AbelianBasisNumeric {
    /// Evaluate the density of relation `r` for foliation `i` at a point.
    pub fn density_at(&self, r: usize, i: usize, web: &Web, p: Point) -> Result<f64> {
        let u = web.foliations[i].first_integral(p)?;
        let v = self.transforms[i].apply(u)?;
        let (lo, hi) = self.ranges[i];
        let vhat = ((v - 0.5 * (hi + lo)) / (0.5 * (hi - lo))).clamp(-1.2, 1.2);
        let mut cheb = Vec::new();
        chebyshev_values(vhat, self.degree, &mut cheb);
        Ok(self.densities[r][i]
            .iter()
            .zip(&cheb)
            .map(|(c, t)| c * t)
            .sum())
    }

    /// Chebyshev coefficient vector (in the basis layout) of prescribed
    /// per-foliation densities, given as functions of the *transformed*
    /// integral.
    pub fn density_vector(&self, h: &[Option<&dyn Fn(f64) -> f64>]) -> Vec<f64> {
        let n = self.degree + 1;
        let mut out = vec![0.0; self.ranges.len() * n];
        for (i, hf) in h.iter().enumerate() {
            let Some(hf) = hf else { continue };
            let (lo, hi) = self.ranges[i];
            let half = 0.5 * (hi - lo);
            let mid = 0.5 * (hi + lo);
            // Chebyshev interpolation at first-kind nodes; the half-width
            // factor converts a density in v into one in the rescaled
            // variable
            let nodes: Vec<f64> = (0..n)
                .map(|j| (std::f64::consts::PI * (j as f64 + 0.5) / n as f64).cos())
                .collect();
            let fvals: Vec<f64> = nodes.iter().map(|&x| hf(mid + half * x) * half).collect();
            for k in 0..n {
                let mut c = 0.0;
                for (j, &x) in nodes.iter().enumerate() {
                    c += fvals[j] * (k as f64 * (std::f64::consts::PI * (j as f64 + 0.5) / n as f64)).cos();
                    let _ = x;
                }
                c *= 2.0 / n as f64;
                if k == 0 {
                    c *= 0.5;
                }
                out[i * n + k] = c;
            }
        }
        out
    }

    /// Relative residual of projecting a coefficient vector onto the span
    /// of the extracted relations.
    pub fn projection_residual(&self, vec: &[f64]) -> f64 {
        let v = nalgebra::DVector::from_column_slice(vec);
        let norm = v.norm();
        if norm == 0.0 {
            return 0.0;
        }
        // orthonormalize the basis (right-singular vectors are orthonormal
        // already; re-orthonormalize defensively after the reshaping)
        let n = self.degree + 1;
        let dim = self.ranges.len() * n;
        let mut basis: Vec<nalgebra::DVector<f64>> = Vec::new();
        for rel in &self.densities {
            let mut flat = Vec::with_capacity(dim);
            for per_fol in rel {
                flat.extend_from_slice(per_fol);
            }
            let mut b = nalgebra::DVector::from_vec(flat);
            for prev in &basis {
                let proj = prev.dot(&b);
                b -= prev * proj;
            }
            let bn = b.norm();
            if bn > 1e-12 {
                basis.push(b / bn);
            }
        }
        let mut residual = v.clone();
        for b in &basis {
            let proj = b.dot(&residual);
            residual -= b * proj;
        }
        residual.norm() / norm
    }
}

/// Lie's construction: for each foliation, the projective points
/// [g_i¹(u_i(p)) : g_i²(u_i(p)) : g_i³(u_i(p))] over the given samples.
/// Requires exactly three relations (a 4-web of maximal rank).
pub fn lie_arcs(
    basis: &AbelianBasisNumeric,
    web: &Web,
    samples: &[Point],
) -> Result<Vec<Vec<ProjectivePoint>>> {
    if basis.densities.len() != 3 {
        return Err(Error::Rank(format!(
            "Lie arcs need exactly 3 relations, found {}",
            basis.densities.len()
        )));
    }
    let mut arcs = Vec::with_capacity(web.size());
    for i in 0..web.size() {
        let mut arc = Vec::with_capacity(samples.len());
        for &p in samples {
            let g: Vec<f64> = (0..3)
                .map(|r| basis.density_at(r, i, web, p))
                .collect::<Result<_>>()?;
            arc.push(ProjectivePoint::new(g[0], g[1], g[2])?);
        }
        arcs.push(arc);
    }
    Ok(arcs)
}

/// Transforms that keep the relation densities of the confocal + Cartesian
/// web analytic with wide margins: logs of the factorization quantities.
pub fn confocal_cartesian_transforms(a2: f64, b2: f64) -> Vec<Transform> {
    vec![
        Transform::LnDiff { c: b2 },
        Transform::LnRatio { lo: b2, hi: a2 },
        Transform::Ln,
        Transform::Ln,
    ]
}

/// Transforms adapted to the confocal + bipolar web: the flat conformal
/// coordinates of the bipolar net for the circle pencils.
pub fn confocal_bipolar_transforms(a2: f64, b2: f64) -> Vec<Transform> {
    vec![
        Transform::LnDiff { c: b2 },
        Transform::LnRatio { lo: b2, hi: a2 },
        Transform::LnTanHalf,
        Transform::LnTanhHalf,
    ]
}

/// Transforms for the six-foliation union of the Cartesian and bipolar
/// webs over the confocal net.
pub fn six_web_transforms(a2: f64, b2: f64) -> Vec<Transform> {
    vec![
        Transform::LnDiff { c: b2 },
        Transform::LnRatio { lo: b2, hi: a2 },
        Transform::Ln,
        Transform::Ln,
        Transform::LnTanHalf,
        Transform::LnTanhHalf,
    ]
}
