//! Transport of the closed first-order systems satisfied by
//! Abelian-relation coefficients along paths.
//!
//! Two of the systems evolve a 3×3 frame of independent (K, L, J)
//! solutions: one for the web of confocal conics with Cartesian
//! coordinate lines, one for the web with bipolar coordinate circles.
//! The other two evolve jets of the net slope: the reduced second-order
//! system characterizing rank curves that split off two lines, and the
//! tangent-web system that carries the adapted line-slope parameter P
//! alongside the slope 2-jet. Integrability shows up numerically as
//! path-independence: transport around closed loops returns the initial
//! state to integration accuracy.

use crate::conics::{self, ConfocalFamily, Point};
use crate::ode::{self, OdeOptions};
use crate::quartic::ProjectivePoint;
use crate::{Error, Result};
use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

/// Which closed system is transported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SystemKind {
    /// (K, L, J) frame for the confocal + Cartesian web.
    Cartesian,
    /// (K, L, J) frame for the confocal + bipolar web.
    Bipolar,
    /// Reduced (T, T_x, T_y) system for nets whose rank curve splits off
    /// two lines meeting on the residual conic.
    SplitLines,
    /// (P, T, T_x, T_y, T_xy) system of the tangent-line web.
    Tangent,
}

/// State carried by [`transport`]; the variant must match the system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FrameState {
    /// Three stacked solutions: `k[α], l[α], j[α]` are the values of the
    /// α-th solution.
    Frame {
        k: [f64; 3],
        l: [f64; 3],
        j: [f64; 3],
        base: Point,
    },
    /// Slope 2-jet (T, T_x, T_y).
    SlopeJet { t: f64, tx: f64, ty: f64, base: Point },
    /// Tangent-web jet (P, T, T_x, T_y, T_xy).
    TangentJet {
        p: f64,
        t: f64,
        tx: f64,
        ty: f64,
        txy: f64,
        base: Point,
    },
}

impl FrameState {
    /// Identity frame at a base point: solution α starts as the α-th
    /// standard basis vector of (K, L, J).
    pub fn identity_frame(base: Point) -> Self {
        FrameState::Frame {
            k: [1.0, 0.0, 0.0],
            l: [0.0, 1.0, 0.0],
            j: [0.0, 0.0, 1.0],
            base,
        }
    }

    /// Slope jet of the confocal field at a base point.
    pub fn confocal_slope_jet(base: Point, fam: ConfocalFamily) -> Result<Self> {
        let t = conics::confocal_slope(base, fam)?;
        let (tx, ty) = conics::confocal_slope_derivs(base, fam)?;
        Ok(FrameState::SlopeJet { t, tx, ty, base })
    }

    /// Tangent-web jet of the confocal field and the adapted slope
    /// parameter of the tangents to the member λ₀.
    pub fn confocal_tangent_jet(base: Point, fam: ConfocalFamily, lambda0: f64) -> Result<Self> {
        let q = fam.member(lambda0)?;
        let p = conics::tangent_web_p(base, q)?;
        let t = conics::confocal_slope(base, fam)?;
        let (tx, ty) = conics::confocal_slope_derivs(base, fam)?;
        let (_, txy, _) = conics::confocal_slope_second_derivs(base, fam)?;
        Ok(FrameState::TangentJet {
            p,
            t,
            tx,
            ty,
            txy,
            base,
        })
    }

    pub fn base(&self) -> Point {
        match self {
            FrameState::Frame { base, .. }
            | FrameState::SlopeJet { base, .. }
            | FrameState::TangentJet { base, .. } => *base,
        }
    }

    fn to_vec(&self) -> Vec<f64> {
        match self {
            FrameState::Frame { k, l, j, .. } => {
                let mut v = Vec::with_capacity(9);
                v.extend_from_slice(k);
                v.extend_from_slice(l);
                v.extend_from_slice(j);
                v
            }
            FrameState::SlopeJet { t, tx, ty, .. } => vec![*t, *tx, *ty],
            FrameState::TangentJet {
                p, t, tx, ty, txy, ..
            } => vec![*p, *t, *tx, *ty, *txy],
        }
    }

    fn with_vec(&self, v: &[f64], base: Point) -> FrameState {
        match self {
            FrameState::Frame { .. } => FrameState::Frame {
                k: [v[0], v[1], v[2]],
                l: [v[3], v[4], v[5]],
                j: [v[6], v[7], v[8]],
                base,
            },
            FrameState::SlopeJet { .. } => FrameState::SlopeJet {
                t: v[0],
                tx: v[1],
                ty: v[2],
                base,
            },
            FrameState::TangentJet { .. } => FrameState::TangentJet {
                p: v[0],
                t: v[1],
                tx: v[2],
                ty: v[3],
                txy: v[4],
                base,
            },
        }
    }

    /// Matrix with columns K⃗, L⃗, J⃗.
    pub fn frame_matrix(&self) -> Result<Matrix3<f64>> {
        match self {
            FrameState::Frame { k, l, j, .. } => Ok(Matrix3::new(
                k[0], l[0], j[0], k[1], l[1], j[1], k[2], l[2], j[2],
            )),
            _ => Err(Error::Degenerate("state carries no frame".into())),
        }
    }

    /// Condition number of the frame matrix.
    pub fn condition_number(&self) -> Result<f64> {
        let m = self.frame_matrix()?;
        let svd = m.svd(false, false);
        let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
        sv.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Ok(sv[2] / sv[0].max(1e-300))
    }
}

/// Coefficients of dK, dL, dJ as linear forms in (K, L, J) at a point.
struct FrameRates {
    kx: [f64; 3],
    ky: [f64; 3],
    lx: [f64; 3],
    ly: [f64; 3],
    jx: [f64; 3],
    jy: [f64; 3],
}

/// Linear rates of the Cartesian-web frame system at (x, y, T).
fn cartesian_rates(x: f64, y: f64, t: f64) -> FrameRates {
    let t2 = t * t;
    let d1 = 2.0 * x * y * (t2 + 1.0);
    let alpha = (x * t2 + 2.0 * y * t - x) / d1;
    let beta = (y * t2 - 2.0 * x * t - y) / d1;
    // K_x = T J − Tα K + Tβ L,  K_y = J + α K + β L
    let kx = [-t * alpha, t * beta, t];
    let ky = [alpha, beta, 1.0];
    // L_x = K_y − 2J,  L_y = K_x
    let lx = [alpha, beta, -1.0];
    let ly = kx;

    let (p1, q1, p2, q2, p3, q3) = cartesian_j_polynomials(x, y, t);
    let dj1 = 2.0 * x * y * (t2 + 1.0).powi(2);
    let dj2 = 4.0 * x * x * y * y * (t2 + 1.0).powi(4);
    let jx = [-p2 / dj2, p3 / dj2, p1 / dj1];
    let jy = [q2 / dj2, -q3 / dj2, -q1 / dj1];
    FrameRates {
        kx,
        ky,
        lx,
        ly,
        jx,
        jy,
    }
}

/// The six numerator polynomials of the J-derivatives for the Cartesian
/// system.
fn cartesian_j_polynomials(x: f64, y: f64, t: f64) -> (f64, f64, f64, f64, f64, f64) {
    let x2 = x * x;
    let y2 = y * y;
    let xy = x * y;
    let tp: [f64; 10] = {
        let mut v = [1.0; 10];
        for i in 1..10 {
            v[i] = v[i - 1] * t;
        }
        v
    };
    let p1 = x * tp[5] + 7.0 * y * tp[4] - 14.0 * x * tp[3] - 10.0 * y * tp[2] + x * tp[1] - y;
    let q1 = y * tp[5] - 7.0 * x * tp[4] - 14.0 * y * tp[3] + 10.0 * x * tp[2] + y * tp[1] + x;
    let p2 = x2 * tp[9] + 9.0 * xy * tp[8] + 14.0 * (y2 - x2) * tp[7] - 20.0 * xy * tp[6]
        + (10.0 * y2 - 16.0 * x2) * tp[5]
        - 66.0 * xy * tp[4]
        + (30.0 * x2 - 38.0 * y2) * tp[3]
        + 28.0 * xy * tp[2]
        - (x2 + 2.0 * y2) * tp[1]
        + xy;
    let q2 = xy * tp[9] + (2.0 * y2 - 7.0 * x2) * tp[8] - 16.0 * xy * tp[7]
        - (2.0 * x2 + 10.0 * y2) * tp[6]
        - 38.0 * xy * tp[5]
        + (36.0 * x2 - 42.0 * y2) * tp[4]
        + 40.0 * xy * tp[3]
        + 2.0 * (x2 + y2) * tp[2]
        - 3.0 * xy * tp[1]
        + 3.0 * x2;
    let p3 = xy * tp[9] + (7.0 * y2 - 2.0 * x2) * tp[8] - 16.0 * xy * tp[7]
        + (10.0 * x2 + 2.0 * y2) * tp[6]
        - 38.0 * xy * tp[5]
        + (42.0 * x2 - 36.0 * y2) * tp[4]
        + 40.0 * xy * tp[3]
        - 2.0 * (x2 + y2) * tp[2]
        - 3.0 * xy * tp[1]
        - 3.0 * y2;
    let q3 = y2 * tp[9] - 9.0 * xy * tp[8] + 14.0 * (x2 - y2) * tp[7] + 20.0 * xy * tp[6]
        + (10.0 * x2 - 16.0 * y2) * tp[5]
        + 66.0 * xy * tp[4]
        + (30.0 * y2 - 38.0 * x2) * tp[3]
        - 28.0 * xy * tp[2]
        - (2.0 * x2 + y2) * tp[1]
        - xy;
    (p1, q1, p2, q2, p3, q3)
}

/// Linear rates of the bipolar-web frame system at (x, y, T).
fn bipolar_rates(x: f64, y: f64, t: f64) -> FrameRates {
    let x2 = x * x;
    let y2 = y * y;
    let xy = x * y;
    let t2 = t * t;
    let tp: [f64; 8] = {
        let mut v = [1.0; 8];
        for i in 1..8 {
            v[i] = v[i - 1] * t;
        }
        v
    };
    let d2 = 2.0 * xy * (t2 + 1.0).powi(2);
    let a_kx = (x * tp[4] + 2.0 * y * tp[3] + 4.0 * x * tp[2] + 6.0 * y * tp[1] - x) / d2;
    let b_k = (y * tp[4] - 2.0 * x * tp[3] - 4.0 * y * tp[2] + 2.0 * x * tp[1] - y) / d2;
    let a_ky = (x * tp[4] + 2.0 * y * tp[3] - 4.0 * x * tp[2] - 2.0 * y * tp[1] - x) / d2;
    let b_ly = (y * tp[4] - 2.0 * x * tp[3] + 4.0 * y * tp[2] - 6.0 * x * tp[1] - y) / d2;

    let kx = [-t * a_kx, t * b_k, t];
    let ky = [a_ky, b_k, 1.0];
    let lx = [a_ky, b_k, -1.0];
    let ly = [-t * a_ky, t * b_ly, t];

    let j_den1 = d2;
    let j_den2 = 4.0 * x2 * y2 * (t2 + 1.0).powi(3);
    let jx_j = (x * tp[5] + 7.0 * y * tp[4] - 18.0 * x * tp[3] - 18.0 * y * tp[2] + 5.0 * x * tp[1]
        - y)
        / j_den1;
    let jy_j = -(y * tp[5] - 7.0 * x * tp[4] - 18.0 * y * tp[3]
        + 18.0 * x * tp[2]
        + 5.0 * y * tp[1]
        + x)
        / j_den1;
    let jx_k = -(x2 * tp[7] + 9.0 * xy * tp[6] + (14.0 * y2 - 15.0 * x2) * tp[5] - 37.0 * xy * tp[4]
        + (11.0 * x2 - 16.0 * y2) * tp[3]
        + 19.0 * xy * tp[2]
        + (2.0 * y2 - 5.0 * x2) * tp[1]
        + xy)
        / j_den2;
    let jx_l = (xy * tp[7] + (7.0 * y2 - 2.0 * x2) * tp[6] - 25.0 * xy * tp[5]
        + (24.0 * x2 - 17.0 * y2) * tp[4]
        + 35.0 * xy * tp[3]
        + (5.0 * y2 - 6.0 * x2) * tp[2]
        - 3.0 * xy * tp[1]
        - 3.0 * y2)
        / j_den2;
    let jy_k = (xy * tp[7] + (2.0 * y2 - 7.0 * x2) * tp[6] - 25.0 * xy * tp[5]
        + (17.0 * x2 - 24.0 * y2) * tp[4]
        + 35.0 * xy * tp[3]
        + (6.0 * y2 - 5.0 * x2) * tp[2]
        - 3.0 * xy * tp[1]
        + 3.0 * x2)
        / j_den2;
    let jy_l = -(y2 * tp[7] - 9.0 * xy * tp[6] + (14.0 * x2 - 15.0 * y2) * tp[5]
        + 37.0 * xy * tp[4]
        + (11.0 * y2 - 16.0 * x2) * tp[3]
        - 19.0 * xy * tp[2]
        + (2.0 * x2 - 5.0 * y2) * tp[1]
        - xy)
        / j_den2;

    FrameRates {
        kx,
        ky,
        lx,
        ly,
        jx: [jx_k, jx_l, jx_j],
        jy: [jy_k, jy_l, jy_j],
    }
}

/// Second derivatives prescribed by the reduced split-lines system at a
/// slope jet (T, T_x, T_y).
pub fn split_lines_second_derivs(t: f64, tx: f64, ty: f64) -> (f64, f64, f64) {
    let t2 = t * t;
    let den = (t2 + 1.0).powi(3);
    let txy = 8.0 * t2 * (ty * ty - tx * tx) / den
        + (t2 * t2 * t2 + 11.0 * t2 * t2 - 5.0 * t2 + 1.0) * tx * ty / (t * den);
    let txx = (2.0 * t * (t2 * t2 + 3.0) * tx * tx
        + 2.0 * (3.0 * t2 * t2 - 2.0 * t2 + 3.0) * tx * ty
        + 4.0 * t * (t2 - 1.0) * ty * ty)
        / den;
    let tyy = (4.0 * t * (t2 - 1.0) * tx * tx
        - 2.0 * (3.0 * t2 * t2 - 2.0 * t2 + 3.0) * tx * ty
        + 2.0 * t * (t2 * t2 + 3.0) * ty * ty)
        / den;
    (txx, txy, tyy)
}

/// S-expression of the split-lines reduction, in terms of the slope jet
/// and T_xy.
pub fn split_lines_s(t: f64, tx: f64, ty: f64, txy: f64) -> f64 {
    let t2 = t * t;
    t * (tx * tx - ty * ty) / (t2 + 1.0)
        - (t2 * t2 - 4.0 * t2 - 1.0) * tx * ty / (2.0 * t2 * (t2 + 1.0))
        + (t2 - 1.0) * txy / (2.0 * t)
}

/// Tangent-web second derivatives (T_xx, T_yy) in terms of the jet with
/// free T_xy.
pub fn tangent_second_derivs(t: f64, tx: f64, ty: f64, txy: f64) -> (f64, f64) {
    let (a, b, c, e) = tangent_coeffs(t);
    let txx = a * txy + b * tx * tx + c * ty * ty + e * tx * ty;
    let tyy = -a * txy + c * tx * tx + b * ty * ty - e * tx * ty;
    (txx, tyy)
}

fn tangent_coeffs(t: f64) -> (f64, f64, f64, f64) {
    let t2 = t * t;
    let t4 = t2 * t2;
    let a = 2.0 * t / (1.0 - t2);
    let b = 2.0 * t * (t2 - 3.0) / (t4 - 1.0);
    let c = 4.0 * t / (t4 - 1.0);
    let e = 4.0 * (2.0 * t2 - 1.0) / (t4 - 1.0);
    (a, b, c, e)
}

fn tangent_coeff_derivs(t: f64) -> (f64, f64, f64, f64) {
    let t2 = t * t;
    let t4 = t2 * t2;
    let t6 = t4 * t2;
    let da = 2.0 * (1.0 + t2) / (1.0 - t2).powi(2);
    let den2 = (t4 - 1.0).powi(2);
    let db = (-2.0 * t6 + 18.0 * t4 - 6.0 * t2 + 6.0) / den2;
    let dc = (-12.0 * t4 - 4.0) / den2;
    let de = (-16.0 * t4 * t + 16.0 * t2 * t - 16.0 * t) / den2;
    (da, db, dc, de)
}

/// Mixed third derivatives (T_xxy, T_xyy) of the tangent-web system,
/// obtained by differentiating the second-derivative expressions and
/// solving the resulting 2×2 linear system.
pub fn tangent_third_derivs(t: f64, tx: f64, ty: f64, txy: f64) -> (f64, f64) {
    let (a, b, c, e) = tangent_coeffs(t);
    let (da, db, dc, de) = tangent_coeff_derivs(t);
    let (txx, tyy) = tangent_second_derivs(t, tx, ty, txy);
    let f_t = da * txy + db * tx * tx + dc * ty * ty + de * tx * ty;
    let f_tx = 2.0 * b * tx + e * ty;
    let f_ty = 2.0 * c * ty + e * tx;
    let g_t = -da * txy + dc * tx * tx + db * ty * ty - de * tx * ty;
    let g_tx = 2.0 * c * tx - e * ty;
    let g_ty = 2.0 * b * ty - e * tx;
    // T_xxy = ∂_y(T_xx): F_T T_y + F_Tx T_xy + F_Ty T_yy + a T_xyy
    // T_xyy = ∂_x(T_yy): G_T T_x + G_Tx T_xx + G_Ty T_xy − a T_xxy
    let r1 = f_t * ty + f_tx * txy + f_ty * tyy;
    let r2 = g_t * tx + g_tx * txx + g_ty * txy;
    let det = 1.0 + a * a;
    let txxy = (r1 + a * r2) / det;
    let txyy = (r2 - a * r1) / det;
    (txxy, txyy)
}

/// Rates of the tangent-web slope parameter P given the slope jet.
pub fn tangent_p_rates(p: f64, t: f64, tx: f64, ty: f64) -> (f64, f64) {
    let p2 = p * p;
    let t2 = t * t;
    let pref = (p2 + 1.0) / (p * (t2 + 1.0).powi(2));
    let px = pref * (t * (p2 + 1.0) * tx + (p2 - t2) * ty);
    let py = pref * ((1.0 - p2 * t2) * tx - t * (p2 + 1.0) * ty);
    (px, py)
}

fn guard_frame_point(p: Point, kind: SystemKind, fam: ConfocalFamily) -> Result<f64> {
    if p.x.abs() < 1e-6 || p.y.abs() < 1e-6 {
        return Err(Error::Inadmissible(format!(
            "transport path touches a coordinate axis at ({}, {})",
            p.x, p.y
        )));
    }
    let t = conics::confocal_slope(p, fam)?;
    match kind {
        SystemKind::SplitLines | SystemKind::Tangent => {
            if (t * t - 1.0).abs() < 1e-6 || t.abs() < 1e-6 {
                return Err(Error::Inadmissible(format!(
                    "transport path touches T(T²−1) = 0 at ({}, {})",
                    p.x, p.y
                )));
            }
        }
        _ => {}
    }
    Ok(t)
}

fn rhs_for(
    kind: SystemKind,
    fam: ConfocalFamily,
    a: Point,
    b: Point,
) -> impl Fn(f64, &Vec<f64>) -> Result<Vec<f64>> {
    move |s: f64, state: &Vec<f64>| -> Result<Vec<f64>> {
        let p = Point::new(a.x + s * (b.x - a.x), a.y + s * (b.y - a.y));
        let (dx, dy) = (b.x - a.x, b.y - a.y);
        let t = guard_frame_point(p, kind, fam)?;
        let mut out = vec![0.0; state.len()];
        match kind {
            SystemKind::Cartesian | SystemKind::Bipolar => {
                let r = if kind == SystemKind::Cartesian {
                    cartesian_rates(p.x, p.y, t)
                } else {
                    bipolar_rates(p.x, p.y, t)
                };
                for alpha in 0..3 {
                    let (k, l, j) = (state[alpha], state[3 + alpha], state[6 + alpha]);
                    let lin = |c: &[f64; 3]| c[0] * k + c[1] * l + c[2] * j;
                    out[alpha] = lin(&r.kx) * dx + lin(&r.ky) * dy;
                    out[3 + alpha] = lin(&r.lx) * dx + lin(&r.ly) * dy;
                    out[6 + alpha] = lin(&r.jx) * dx + lin(&r.jy) * dy;
                }
            }
            SystemKind::SplitLines => {
                let (tt, tx, ty) = (state[0], state[1], state[2]);
                let (txx, txy, tyy) = split_lines_second_derivs(tt, tx, ty);
                out[0] = tx * dx + ty * dy;
                out[1] = txx * dx + txy * dy;
                out[2] = txy * dx + tyy * dy;
            }
            SystemKind::Tangent => {
                let (pp, tt, tx, ty, txy) = (state[0], state[1], state[2], state[3], state[4]);
                let (px, py) = tangent_p_rates(pp, tt, tx, ty);
                let (txx, tyy) = tangent_second_derivs(tt, tx, ty, txy);
                let (txxy, txyy) = tangent_third_derivs(tt, tx, ty, txy);
                out[0] = px * dx + py * dy;
                out[1] = tx * dx + ty * dy;
                out[2] = txx * dx + txy * dy;
                out[3] = txy * dx + tyy * dy;
                out[4] = txxy * dx + txyy * dy;
            }
        }
        Ok(out)
    }
}

// the generic integrator works on fixed-size arrays; dispatch per state
// dimension
fn integrate_segment(
    kind: SystemKind,
    fam: ConfocalFamily,
    a: Point,
    b: Point,
    state: Vec<f64>,
    opts: &OdeOptions,
) -> Result<Vec<f64>> {
    let f = rhs_for(kind, fam, a, b);
    match state.len() {
        3 => {
            let y0 = [state[0], state[1], state[2]];
            let y = ode::integrate(
                |s, y: &[f64; 3]| {
                    let v = f(s, &y.to_vec())?;
                    Ok([v[0], v[1], v[2]])
                },
                0.0,
                1.0,
                y0,
                opts,
            )?;
            Ok(y.to_vec())
        }
        5 => {
            let y0 = [state[0], state[1], state[2], state[3], state[4]];
            let y = ode::integrate(
                |s, y: &[f64; 5]| {
                    let v = f(s, &y.to_vec())?;
                    Ok([v[0], v[1], v[2], v[3], v[4]])
                },
                0.0,
                1.0,
                y0,
                opts,
            )?;
            Ok(y.to_vec())
        }
        9 => {
            let mut y0 = [0.0; 9];
            y0.copy_from_slice(&state);
            let y = ode::integrate(
                |s, y: &[f64; 9]| {
                    let v = f(s, &y.to_vec())?;
                    let mut out = [0.0; 9];
                    out.copy_from_slice(&v);
                    Ok(out)
                },
                0.0,
                1.0,
                y0,
                opts,
            )?;
            Ok(y.to_vec())
        }
        n => Err(Error::Degenerate(format!("unsupported state dimension {n}"))),
    }
}

fn check_state_kind(kind: SystemKind, init: &FrameState) -> Result<()> {
    let ok = matches!(
        (kind, init),
        (SystemKind::Cartesian, FrameState::Frame { .. })
            | (SystemKind::Bipolar, FrameState::Frame { .. })
            | (SystemKind::SplitLines, FrameState::SlopeJet { .. })
            | (SystemKind::Tangent, FrameState::TangentJet { .. })
    );
    if ok {
        Ok(())
    } else {
        Err(Error::Degenerate(format!(
            "state variant does not match system kind {kind:?}"
        )))
    }
}

/// Transport a state along a polyline. The right-hand sides are evaluated
/// with the analytic confocal slope of `fam` at each path point.
pub fn transport(
    kind: SystemKind,
    fam: ConfocalFamily,
    path: &[Point],
    init: &FrameState,
    opts: &OdeOptions,
) -> Result<FrameState> {
    check_state_kind(kind, init)?;
    if path.is_empty() {
        return Ok(init.clone());
    }
    let mut state = init.to_vec();
    let mut current = init.base();
    if path[0] != current {
        return Err(Error::Degenerate(
            "path must start at the state's base point".into(),
        ));
    }
    for w in path.windows(2) {
        state = integrate_segment(kind, fam, w[0], w[1], state, opts)?;
        current = w[1];
    }
    let out = init.with_vec(&state, current);
    if let FrameState::Frame { .. } = out {
        let cond = out.condition_number()?;
        if cond > 1e8 {
            return Err(Error::SingularFrame(cond));
        }
    }
    Ok(out)
}

/// Transport along a polyline, returning the state at every waypoint.
pub fn transport_many(
    kind: SystemKind,
    fam: ConfocalFamily,
    path: &[Point],
    init: &FrameState,
    opts: &OdeOptions,
) -> Result<Vec<FrameState>> {
    check_state_kind(kind, init)?;
    let mut out = Vec::with_capacity(path.len());
    let mut state = init.clone();
    out.push(state.clone());
    for w in path.windows(2) {
        state = transport(kind, fam, &[w[0], w[1]], &state, opts)?;
        out.push(state.clone());
    }
    Ok(out)
}

/// Relative return defect of transport around a closed polyline.
pub fn loop_defect(
    kind: SystemKind,
    fam: ConfocalFamily,
    loop_path: &[Point],
    init: &FrameState,
    opts: &OdeOptions,
) -> Result<f64> {
    if loop_path.len() < 2 {
        return Ok(0.0);
    }
    let mut closed: Vec<Point> = loop_path.to_vec();
    if closed.last() != closed.first() {
        closed.push(closed[0]);
    }
    let end = transport(kind, fam, &closed, init, opts)?;
    let v0 = init.to_vec();
    let v1 = end.to_vec();
    let num: f64 = v0
        .iter()
        .zip(&v1)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let den: f64 = v0.iter().map(|a| a * a).sum::<f64>().sqrt();
    Ok(num / den.max(1e-300))
}

/// Fixed-coordinate arc points of the four foliations at `p`, in web
/// order. For the Cartesian system the order is (ellipses [K⃗],
/// hyperbolas [L⃗], vertical [T K⃗ − L⃗], horizontal [K⃗ + T L⃗]); for the
/// bipolar system (ellipses [K⃗], hyperbolas [L⃗], σ circles [K⃗ − T L⃗],
/// τ circles [T K⃗ + L⃗]).
pub fn frame_arc_points(
    kind: SystemKind,
    state: &FrameState,
    fam: ConfocalFamily,
) -> Result<[ProjectivePoint; 4]> {
    let p = state.base();
    let t = conics::confocal_slope(p, fam)?;
    let (k, l) = match state {
        FrameState::Frame { k, l, .. } => (*k, *l),
        _ => return Err(Error::Degenerate("state carries no frame".into())),
    };
    let comb = |ck: f64, cl: f64| -> Result<ProjectivePoint> {
        ProjectivePoint::new(
            ck * k[0] + cl * l[0],
            ck * k[1] + cl * l[1],
            ck * k[2] + cl * l[2],
        )
    };
    match kind {
        SystemKind::Cartesian => Ok([
            comb(1.0, 0.0)?,
            comb(0.0, 1.0)?,
            comb(t, -1.0)?,
            comb(1.0, t)?,
        ]),
        SystemKind::Bipolar => Ok([
            comb(1.0, 0.0)?,
            comb(0.0, 1.0)?,
            comb(1.0, -t)?,
            comb(t, 1.0)?,
        ]),
        _ => Err(Error::Degenerate(
            "arc points are defined for the frame systems only".into(),
        )),
    }
}

/// Moving-frame coefficients of the straight rank-curve component of a
/// foliation, where one exists: coefficients (c_K, c_L, c_J) of the line
/// {X c_K + Y c_L + Z c_J = 0} in frame coordinates at `p`.
pub fn displayed_moving_line(
    kind: SystemKind,
    foliation: usize,
    p: Point,
    fam: ConfocalFamily,
) -> Result<Option<[f64; 3]>> {
    let t = conics::confocal_slope(p, fam)?;
    let (x, y) = (p.x, p.y);
    let t2 = t * t;
    match kind {
        SystemKind::Cartesian => {
            let den = 2.0 * x * y * (t2 + 1.0).powi(2);
            match foliation {
                // vertical-line arc [T K⃗ − L⃗]
                2 => {
                    let kappa = (y * t2 * t2 * t - 3.0 * x * t2 * t2 - 6.0 * y * t2 * t
                        + 6.0 * x * t2
                        + y * t
                        + x)
                        / den;
                    Ok(Some([1.0, t, -kappa]))
                }
                // horizontal-line arc [K⃗ + T L⃗]
                3 => {
                    let kappa = (x * t2 * t2 * t + 3.0 * y * t2 * t2 - 6.0 * x * t2 * t
                        - 6.0 * y * t2
                        + x * t
                        - y)
                        / den;
                    Ok(Some([-t, 1.0, -kappa]))
                }
                _ => Ok(None),
            }
        }
        SystemKind::Bipolar => {
            let den = 2.0 * x * y * (t2 + 1.0).powi(2);
            match foliation {
                // ellipse arc [K⃗]
                0 => {
                    let c = (y * t2 * t2 - 2.0 * x * t2 * t - 4.0 * y * t2 + 2.0 * x * t - y) / den;
                    Ok(Some([0.0, 1.0, -c]))
                }
                // hyperbola arc [L⃗]
                1 => {
                    let c = (x * t2 * t2 + 2.0 * y * t2 * t - 4.0 * x * t2 - 2.0 * y * t - x) / den;
                    Ok(Some([1.0, 0.0, c]))
                }
                // σ-circle arc [K⃗ − T L⃗]
                2 => Ok(Some([t, 1.0, (x * t + y) / (2.0 * x * y)])),
                // τ-circle arc [T K⃗ + L⃗]
                3 => Ok(Some([1.0, -t, (y * t - x) / (2.0 * x * y)])),
                _ => Ok(None),
            }
        }
        _ => Ok(None),
    }
}

/// Moving-frame coefficient matrix of the conic through the confocal arcs
/// of the Cartesian system: XY − c₁ XZ + c₂ YZ − c₃ Z².
pub fn displayed_moving_conic(p: Point, fam: ConfocalFamily) -> Result<Matrix3<f64>> {
    let t = conics::confocal_slope(p, fam)?;
    let (x, y) = (p.x, p.y);
    let t2 = t * t;
    let d1 = 2.0 * x * y * (t2 + 1.0);
    let c1 = (y * t2 - 2.0 * x * t - y) / d1;
    let c2 = (x * t2 + 2.0 * y * t - x) / d1;
    let t4 = t2 * t2;
    let t6 = t4 * t2;
    let t8 = t4 * t4;
    let c3 = (x * y * (t8 - 4.0 * t6 - 26.0 * t4 + 12.0 * t2 + 1.0)
        + 2.0 * (y * y - x * x) * t * (t6 + t4 - 9.0 * t2 - 1.0))
        / (4.0 * x * x * y * y * (t2 + 1.0).powi(4));
    Ok(Matrix3::new(
        0.0,
        0.5,
        -c1 / 2.0,
        0.5,
        0.0,
        c2 / 2.0,
        -c1 / 2.0,
        c2 / 2.0,
        -c3,
    ))
}

/// Largest deviation between the fixed-space images of the displayed
/// moving conic across transported frames: zero means the moving
/// equation describes one fixed conic.
pub fn moving_conic_drift(states: &[FrameState], fam: ConfocalFamily) -> Result<f64> {
    let mut first: Option<Matrix3<f64>> = None;
    let mut drift = 0.0_f64;
    for state in states {
        let cm = displayed_moving_conic(state.base(), fam)?;
        let a = fixed_conic_from_moving(state, &cm)?;
        let mut a = a / a.norm();
        let lead = a.iter().find(|v| v.abs() > 1e-12).copied().unwrap_or(1.0);
        if lead < 0.0 {
            a = -a;
        }
        match &first {
            None => first = Some(a),
            Some(f) => drift = drift.max((a - f).norm()),
        }
    }
    Ok(drift)
}

/// Fixed-space line coefficients of a moving line at a transported frame:
/// solves Bᵀ a = m for the frame matrix B = [K⃗ L⃗ J⃗].
pub fn fixed_line_from_moving(state: &FrameState, moving: [f64; 3]) -> Result<[f64; 3]> {
    let b = state.frame_matrix()?;
    let bt = b.transpose();
    let m = nalgebra::Vector3::new(moving[0], moving[1], moving[2]);
    let a = bt
        .lu()
        .solve(&m)
        .ok_or_else(|| Error::SingularFrame(f64::INFINITY))?;
    Ok([a[0], a[1], a[2]])
}

/// Fixed-space symmetric matrix of a moving conic at a transported frame:
/// A = B⁻ᵀ C_m B⁻¹.
pub fn fixed_conic_from_moving(state: &FrameState, moving: &Matrix3<f64>) -> Result<Matrix3<f64>> {
    let b = state.frame_matrix()?;
    let binv = b
        .try_inverse()
        .ok_or_else(|| Error::SingularFrame(f64::INFINITY))?;
    Ok(binv.transpose() * moving * binv)
}
