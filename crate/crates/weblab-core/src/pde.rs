//! Finite-difference residual verification of the differential identities
//! satisfied by the confocal slope field and its companions.
//!
//! Each identity is evaluated as LHS − RHS with the derivatives of the
//! exact analytic fields approximated by central differences of step h,
//! so a true identity leaves a pure O(h²) discretization residual. An
//! order estimate close to 2 over a decreasing h-schedule certifies the
//! identity; perturbed or wrong fields plateau instead.

use crate::conics::{self, ConfocalFamily, Point};
use crate::frobenius::{split_lines_s, split_lines_second_derivs, tangent_p_rates};
use crate::ode::{self, OdeOptions};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// The displayed identities under test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdentityId {
    /// First-order system for the confocal slope T.
    TSystem,
    /// Isothermal-coordinate condition T_xx + T_yy = 2T(T_x²+T_y²)/(1+T²).
    LaplaceT,
    /// First-order system for the tangent-web slope parameter P.
    PSystem,
    /// Vanishing of the common Blaschke curvature of the tangent 3-subwebs.
    CurvatureB,
    /// Closedness of the derived S-system of the two-net analysis.
    SCompat,
    /// Second derivatives of T prescribed by the tangent-web system.
    TxxTyyTangent,
    /// Closedness of the integrating-factor form d ln R.
    RFormClosed,
    /// Reduction of the split rank curve: S-expression and the T_xy,
    /// T_xx, T_yy constraints.
    Remark2Split,
    /// S = 2T/(1−T²) for the bipolar net as a differential consequence.
    BipolarS,
}

impl IdentityId {
    pub const ALL: [IdentityId; 9] = [
        IdentityId::TSystem,
        IdentityId::LaplaceT,
        IdentityId::PSystem,
        IdentityId::CurvatureB,
        IdentityId::SCompat,
        IdentityId::TxxTyyTangent,
        IdentityId::RFormClosed,
        IdentityId::Remark2Split,
        IdentityId::BipolarS,
    ];

    pub fn name(self) -> &'static str {
        match self {
            IdentityId::TSystem => "t_system",
            IdentityId::LaplaceT => "laplace_t",
            IdentityId::PSystem => "p_system",
            IdentityId::CurvatureB => "curvature_b",
            IdentityId::SCompat => "s_compat",
            IdentityId::TxxTyyTangent => "txx_tyy_tangent",
            IdentityId::RFormClosed => "r_form_closed",
            IdentityId::Remark2Split => "remark2_split",
            IdentityId::BipolarS => "bipolar_s",
        }
    }

    /// Identities whose denominators involve the tangent-web parameter P.
    pub fn needs_exterior_point(self) -> bool {
        matches!(self, IdentityId::PSystem | IdentityId::CurvatureB)
    }

    /// True when `p` keeps all denominators of this identity at least
    /// `margin` away from zero, so the finite-difference constants stay
    /// bounded. The band around T² = 1 matters only for identities that
    /// divide by it; the bipolar slope needs extra clearance because its
    /// value itself has the pole.
    pub fn admissible_at(
        self,
        fam: ConfocalFamily,
        lambda0: f64,
        p: Point,
        margin: f64,
    ) -> bool {
        if !conics::admissible_net(p, fam, margin) {
            return false;
        }
        let Ok(t) = conics::confocal_slope(p, fam) else {
            return false;
        };
        let t_band = (t * t - 1.0).abs();
        let band_ok = match self {
            IdentityId::BipolarS => t_band >= (1.9 * margin).max(0.5),
            IdentityId::TxxTyyTangent | IdentityId::Remark2Split => t_band >= margin,
            _ => true,
        };
        if !band_ok {
            return false;
        }
        if self.needs_exterior_point() {
            match conics::elliptic_coords(p, fam) {
                Ok((l1, _)) => lambda0 - l1 >= margin,
                Err(_) => false,
            }
        } else {
            true
        }
    }
}

/// Residuals of one identity over an h-schedule at one point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResidualReport {
    pub identity: IdentityId,
    pub point: Point,
    pub h_values: Vec<f64>,
    pub residuals: Vec<f64>,
    pub order_estimate: f64,
}

impl ResidualReport {
    /// An identity is certified when the residual converges at second
    /// order, or is already at rounding level throughout.
    pub fn passes(&self, min_order: f64, max_residual: f64) -> bool {
        let last = *self.residuals.last().unwrap_or(&f64::INFINITY);
        let at_floor = self.residuals.iter().all(|r| *r < 1e-11);
        (self.order_estimate >= min_order || at_floor) && last < max_residual
    }
}

fn t_of(fam: ConfocalFamily, p: Point) -> Result<f64> {
    conics::confocal_slope(p, fam)
}

/// Central difference of a scalar field in x.
fn fd_x(f: &dyn Fn(Point) -> Result<f64>, p: Point, h: f64) -> Result<f64> {
    Ok((f(Point::new(p.x + h, p.y))? - f(Point::new(p.x - h, p.y))?) / (2.0 * h))
}

fn fd_y(f: &dyn Fn(Point) -> Result<f64>, p: Point, h: f64) -> Result<f64> {
    Ok((f(Point::new(p.x, p.y + h))? - f(Point::new(p.x, p.y - h))?) / (2.0 * h))
}

/// Relative residual: |lhs − rhs| / max(term magnitudes, tiny).
fn rel(lhs: f64, rhs: f64, terms: &[f64]) -> f64 {
    let scale = terms
        .iter()
        .map(|t| t.abs())
        .fold(lhs.abs().max(rhs.abs()), f64::max)
        .max(1e-14);
    (lhs - rhs).abs() / scale
}

/// Relative residual of a multi-component identity with one shared scale,
/// so that a component whose exact value happens to vanish is not
/// normalized against its own discretization noise.
fn rel_joint(pairs: &[(f64, f64)], extra_terms: &[f64]) -> f64 {
    let scale = pairs
        .iter()
        .flat_map(|(l, r)| [l.abs(), r.abs()])
        .chain(extra_terms.iter().map(|t| t.abs()))
        .fold(1e-14, f64::max);
    pairs
        .iter()
        .map(|(l, r)| (l - r).abs())
        .fold(0.0, f64::max)
        / scale
}

/// Second-derivative estimates of T by central differences of the exact
/// first-derivative fields.
fn fd_second_derivs(fam: ConfocalFamily, p: Point, h: f64) -> Result<(f64, f64, f64)> {
    let tx_field = |q: Point| -> Result<f64> { Ok(conics::confocal_slope_derivs(q, fam)?.0) };
    let ty_field = |q: Point| -> Result<f64> { Ok(conics::confocal_slope_derivs(q, fam)?.1) };
    let txx = fd_x(&tx_field, p, h)?;
    let txy = 0.5 * (fd_y(&tx_field, p, h)? + fd_x(&ty_field, p, h)?);
    let tyy = fd_y(&ty_field, p, h)?;
    Ok((txx, txy, tyy))
}

/// Evaluate the relative residual of an identity at (p, h). `rhs_scale`
/// multiplies the right-hand side and exists for negative controls; the
/// physical value is 1.
pub fn residual_scaled(
    id: IdentityId,
    fam: ConfocalFamily,
    lambda0: f64,
    p: Point,
    h: f64,
    rhs_scale: f64,
) -> Result<f64> {
    if !(1e-6..=0.2).contains(&h) {
        return Err(Error::Degenerate(format!("step {h} outside the useful range")));
    }
    let t = t_of(fam, p)?;
    let (tx, ty) = conics::slope_system_rhs(p, t);
    match id {
        IdentityId::TSystem => {
            let t_field = |q: Point| t_of(fam, q);
            let fdx = fd_x(&t_field, p, h)?;
            let fdy = fd_y(&t_field, p, h)?;
            Ok(rel_joint(
                &[(fdx, rhs_scale * tx), (fdy, rhs_scale * ty)],
                &[],
            ))
        }
        IdentityId::LaplaceT => {
            let (txx, _, tyy) = fd_second_derivs(fam, p, h)?;
            let rhs = 2.0 * t * (tx * tx + ty * ty) / (1.0 + t * t);
            Ok(rel(txx + tyy, rhs_scale * rhs, &[txx, tyy, rhs]))
        }
        IdentityId::PSystem => {
            let q = fam.member(lambda0)?;
            let p_field = |r: Point| conics::tangent_web_p(r, q);
            let pv = p_field(p)?;
            let (px_formula, py_formula) = tangent_p_rates(pv, t, tx, ty);
            let fdx = fd_x(&p_field, p, h)?;
            let fdy = fd_y(&p_field, p, h)?;
            Ok(rel_joint(
                &[(fdx, rhs_scale * px_formula), (fdy, rhs_scale * py_formula)],
                &[],
            ))
        }
        IdentityId::CurvatureB => {
            let q = fam.member(lambda0)?;
            let pv = conics::tangent_web_p(p, q)?;
            let (txx, txy, tyy) = fd_second_derivs(fam, p, h)?;
            let p2 = pv * pv;
            let t2 = t * t;
            let term_xx = (t2 * p2 + 2.0 * p2 + 1.0) / (2.0 * t * (p2 + 1.0)) * txx;
            let term_yy = (2.0 * t2 * p2 + p2 + t2) / (2.0 * t * (p2 + 1.0)) * tyy;
            let lhs = term_xx + term_yy - txy;
            let rhs = (t * (t2 * p2 + 4.0 * p2 + 3.0) * tx * tx
                - 2.0 * (2.0 * t2 - 1.0) * (p2 + 1.0) * tx * ty
                + t * (2.0 * t2 * p2 - p2 + t2 - 2.0) * ty * ty)
                / (t * (t2 + 1.0) * (p2 + 1.0));
            Ok(rel(lhs, rhs_scale * rhs, &[term_xx, term_yy, txy, rhs]))
        }
        IdentityId::SCompat => {
            // S from the exact second derivatives; its gradient against
            // the displayed system
            let s_field = |q: Point| -> Result<f64> {
                let (sxx, _, syy) = conics::confocal_slope_second_derivs(q, fam)?;
                Ok(0.5 * (sxx - syy))
            };
            let s = s_field(p)?;
            let (_, txy, _) = conics::confocal_slope_second_derivs(p, fam)?;
            let t2 = t * t;
            let x1 = txy * (4.0 * t * tx + (t2 - 3.0) * ty) / (t * (t2 + 1.0));
            let x2 = tx * ty * ((t2 + 3.0) * ty - 4.0 * t * tx) / (t2 * (t2 + 1.0));
            let x3 = s * tx * (3.0 * t2 + 1.0) / (t * (t2 + 1.0));
            let y1 = txy * (4.0 * t * ty - (t2 - 3.0) * tx) / (t * (t2 + 1.0));
            let y2 = -tx * ty * ((t2 + 3.0) * tx + 4.0 * t * ty) / (t2 * (t2 + 1.0));
            let y3 = s * ty * (3.0 * t2 + 1.0) / (t * (t2 + 1.0));
            let fdx = fd_x(&s_field, p, h)?;
            let fdy = fd_y(&s_field, p, h)?;
            Ok(rel_joint(
                &[
                    (fdx, rhs_scale * (x1 + x2 + x3)),
                    (fdy, rhs_scale * (y1 + y2 + y3)),
                ],
                &[x1, x2, x3, y1, y2, y3],
            ))
        }
        IdentityId::TxxTyyTangent => {
            let (txx, txy, tyy) = fd_second_derivs(fam, p, h)?;
            let (txx_rhs, tyy_rhs) = crate::frobenius::tangent_second_derivs(t, tx, ty, txy);
            // normalize by the individual summands of the right-hand sides
            let t2 = t * t;
            let t4 = t2 * t2;
            let a = 2.0 * t / (1.0 - t2) * txy;
            let b = 2.0 * t * (t2 - 3.0) / (t4 - 1.0);
            let c = 4.0 * t / (t4 - 1.0);
            let e = 4.0 * (2.0 * t2 - 1.0) / (t4 - 1.0);
            let terms1 = [txx, a, b * tx * tx, c * ty * ty, e * tx * ty];
            let terms2 = [tyy, a, c * tx * tx, b * ty * ty, e * tx * ty];
            let r1 = rel(txx, rhs_scale * txx_rhs, &terms1);
            let r2 = rel(tyy, rhs_scale * tyy_rhs, &terms2);
            Ok(r1.max(r2))
        }
        IdentityId::RFormClosed => {
            let f1 = |q: Point| -> Result<f64> {
                let tq = t_of(fam, q)?;
                let (txq, tyq) = conics::slope_system_rhs(q, tq);
                Ok((tyq - tq * txq) / (1.0 + tq * tq))
            };
            let f2 = |q: Point| -> Result<f64> {
                let tq = t_of(fam, q)?;
                let (txq, tyq) = conics::slope_system_rhs(q, tq);
                Ok(-(txq + tq * tyq) / (1.0 + tq * tq))
            };
            let d2x = fd_x(&f2, p, h)?;
            let d1y = fd_y(&f1, p, h)?;
            // the component magnitudes of the form keep the scale honest
            // where the two cross derivatives happen to vanish together
            Ok(rel(
                d2x,
                rhs_scale * d1y,
                &[d2x, d1y, f1(p)?, f2(p)?],
            ))
        }
        IdentityId::Remark2Split => {
            let (txx, txy, tyy) = fd_second_derivs(fam, p, h)?;
            let (txx_c, txy_c, tyy_c) = split_lines_second_derivs(t, tx, ty);
            let s_lhs = 0.5 * (txx - tyy);
            let s_rhs = split_lines_s(t, tx, ty, txy);
            let t2 = t * t;
            let den = (t2 + 1.0).powi(3);
            // summands of the displayed right-hand sides
            let txy_1 = 8.0 * t2 * (ty * ty - tx * tx) / den;
            let txy_2 = (t2 * t2 * t2 + 11.0 * t2 * t2 - 5.0 * t2 + 1.0) * tx * ty / (t * den);
            let s_1 = t * (tx * tx - ty * ty) / (t2 + 1.0);
            let s_2 = -(t2 * t2 - 4.0 * t2 - 1.0) * tx * ty / (2.0 * t2 * (t2 + 1.0));
            let s_3 = (t2 - 1.0) * txy / (2.0 * t);
            let rs = [
                rel(txy, rhs_scale * txy_c, &[txy, txy_1, txy_2]),
                rel(txx, rhs_scale * txx_c, &[txx, txx_c, txy_1, txy_2]),
                rel(tyy, rhs_scale * tyy_c, &[tyy, tyy_c, txy_1, txy_2]),
                rel(s_lhs, rhs_scale * s_rhs, &[txx, tyy, s_1, s_2, s_3]),
            ];
            Ok(rs.into_iter().fold(0.0, f64::max))
        }
        IdentityId::BipolarS => {
            let s_field = |q: Point| conics::bipolar_slope(q, fam);
            let fdx = fd_x(&s_field, p, h)?;
            let fdy = fd_y(&s_field, p, h)?;
            let chain = 2.0 * (1.0 + t * t) / (1.0 - t * t).powi(2);
            Ok(rel_joint(
                &[
                    (fdx, rhs_scale * chain * tx),
                    (fdy, rhs_scale * chain * ty),
                ],
                &[],
            ))
        }
    }
}

/// Relative residual of the identity with physical right-hand side.
pub fn residual(
    id: IdentityId,
    fam: ConfocalFamily,
    lambda0: f64,
    p: Point,
    h: f64,
) -> Result<f64> {
    residual_scaled(id, fam, lambda0, p, h, 1.0)
}

const ORDER_H: [f64; 4] = [1e-2, 5e-3, 2.5e-3, 1.25e-3];

/// Run the residual over the h-schedule and fit the convergence order.
pub fn order_check(
    id: IdentityId,
    fam: ConfocalFamily,
    lambda0: f64,
    p: Point,
) -> Result<ResidualReport> {
    order_check_scaled(id, fam, lambda0, p, 1.0)
}

/// Order check with a scaled right-hand side (negative-control hook).
pub fn order_check_scaled(
    id: IdentityId,
    fam: ConfocalFamily,
    lambda0: f64,
    p: Point,
    rhs_scale: f64,
) -> Result<ResidualReport> {
    let mut residuals = Vec::with_capacity(ORDER_H.len());
    for &h in &ORDER_H {
        residuals.push(residual_scaled(id, fam, lambda0, p, h, rhs_scale)?);
    }
    let order_estimate = fit_order(&ORDER_H, &residuals);
    Ok(ResidualReport {
        identity: id,
        point: p,
        h_values: ORDER_H.to_vec(),
        residuals,
        order_estimate,
    })
}

fn fit_order(hs: &[f64], rs: &[f64]) -> f64 {
    let pairs: Vec<(f64, f64)> = hs
        .iter()
        .zip(rs)
        .filter(|(_, r)| **r > 1e-300)
        .map(|(h, r)| (h.ln(), r.ln()))
        .collect();
    if pairs.len() < 2 {
        return 0.0;
    }
    let n = pairs.len() as f64;
    let xm = pairs.iter().map(|(x, _)| x).sum::<f64>() / n;
    let ym = pairs.iter().map(|(_, y)| y).sum::<f64>() / n;
    let num: f64 = pairs.iter().map(|(x, y)| (x - xm) * (y - ym)).sum();
    let den: f64 = pairs.iter().map(|(x, _)| (x - xm) * (x - xm)).sum();
    num / den
}

/// The laplace-type residual for an arbitrary slope field, with every
/// derivative taken by central differences of the field itself. Lets the
/// suite demonstrate that non-confocal fields fail the isothermal
/// condition.
pub fn laplace_residual_of_field(
    field: &dyn Fn(Point) -> Result<f64>,
    p: Point,
    h: f64,
) -> Result<f64> {
    let t = field(p)?;
    let tx = fd_x(field, p, h)?;
    let ty = fd_y(field, p, h)?;
    let txx = (field(Point::new(p.x + h, p.y))? - 2.0 * t + field(Point::new(p.x - h, p.y))?)
        / (h * h);
    let tyy = (field(Point::new(p.x, p.y + h))? - 2.0 * t + field(Point::new(p.x, p.y - h))?)
        / (h * h);
    let rhs = 2.0 * t * (tx * tx + ty * ty) / (1.0 + t * t);
    Ok(rel(txx + tyy, rhs, &[txx, tyy, rhs]))
}

/// Loop transport of S by the displayed S-system: integrates
/// dS = S_x dx + S_y dy around a closed polyline, with the slope jet
/// supplied analytically. Returns the relative return defect.
pub fn s_transport_loop_defect(
    fam: ConfocalFamily,
    loop_path: &[Point],
    opts: &OdeOptions,
) -> Result<f64> {
    if loop_path.len() < 2 {
        return Ok(0.0);
    }
    let mut closed: Vec<Point> = loop_path.to_vec();
    if closed.last() != closed.first() {
        closed.push(closed[0]);
    }
    let p0 = closed[0];
    let (sxx0, _, syy0) = conics::confocal_slope_second_derivs(p0, fam)?;
    let mut s = 0.5 * (sxx0 - syy0);
    let s_start = s;
    for w in closed.windows(2) {
        let (a, b) = (w[0], w[1]);
        let rhs = move |tau: f64, y: &[f64; 1]| -> Result<[f64; 1]> {
            let q = Point::new(a.x + tau * (b.x - a.x), a.y + tau * (b.y - a.y));
            let t = conics::confocal_slope(q, fam)?;
            let (tx, ty) = conics::slope_system_rhs(q, t);
            let (_, txy, _) = conics::confocal_slope_second_derivs(q, fam)?;
            let t2 = t * t;
            let s = y[0];
            let sx = txy * (4.0 * t * tx + (t2 - 3.0) * ty) / (t * (t2 + 1.0))
                + tx * ty * ((t2 + 3.0) * ty - 4.0 * t * tx) / (t2 * (t2 + 1.0))
                + s * tx * (3.0 * t2 + 1.0) / (t * (t2 + 1.0));
            let sy = txy * (4.0 * t * ty - (t2 - 3.0) * tx) / (t * (t2 + 1.0))
                - tx * ty * ((t2 + 3.0) * tx + 4.0 * t * ty) / (t2 * (t2 + 1.0))
                + s * ty * (3.0 * t2 + 1.0) / (t * (t2 + 1.0));
            Ok([sx * (b.x - a.x) + sy * (b.y - a.y)])
        };
        let y = ode::integrate(rhs, 0.0, 1.0, [s], opts)?;
        s = y[0];
    }
    Ok((s - s_start).abs() / (1.0 + s_start.abs()))
}
