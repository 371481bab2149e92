//! Registry of named identity checks and the seeded verification runner.
//!
//! Each check binds one tensor identity to a residual computation at a
//! chart point. The runner samples domain points deterministically,
//! evaluates every requested check at every point (optionally fanning the
//! points out across threads), and reduces to a per-check maximum residual
//! with the first point attaining it. Reports serialize to a stable JSON
//! schema and are byte-identical across runs and execution modes.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::catalog::HermitianModel;
use crate::connection::{
    agricola_friedrich_residual, covariant_eta_derivatives, covariant_torsion_derivatives,
    curvature_pack, full_connection, real_torsion_components, ConnectionKind, ConnectionPack,
    CurvaturePack,
};
use crate::error::{Error, Result};
use crate::exec::{map_indexed, ExecMode};
use crate::forms::{Form, FormMatrix};
use crate::jets::{format_c64, ChartPoint, C64};
use crate::linalg::hermitian_eigenvalues;

/// Which models a check applies to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Applicability {
    /// Any Hermitian metric.
    AnyMetric,
    /// Surfaces only (`n = 2`).
    DimTwoOnly,
    /// Models claiming a vanishing Bismut curvature.
    BismutFlatOnly,
    /// Models claiming a vanishing Chern curvature.
    ChernFlatOnly,
    /// Models claiming vanishing Levi-Civita curvature.
    RiemannFlatOnly,
    /// Handled by the Lie-algebra reports, not the chart runner.
    LieAlgebraic,
}

/// How the reported residual is aggregated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ResidualKind {
    MaxAbs,
    /// The residual folds in a minimum-eigenvalue defect.
    MinEigenvalue,
}

/// A named identity check.
pub struct CheckDescriptor {
    pub id: &'static str,
    pub applicability: Applicability,
    pub tolerance: f64,
    pub residual_kind: ResidualKind,
    pub description: &'static str,
    eval: Option<fn(&mut PointCtx) -> Result<f64>>,
}

impl std::fmt::Debug for CheckDescriptor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CheckDescriptor")
            .field("id", &self.id)
            .field("applicability", &self.applicability)
            .field("tolerance", &self.tolerance)
            .finish()
    }
}

/// Per-point evaluation context with shared lazily computed arrays.
pub struct PointCtx<'a> {
    pub model: &'a HermitianModel,
    pub point: &'a ChartPoint,
    pub pack: ConnectionPack,
    pub curv: CurvaturePack,
    d_chern: Option<Vec<C64>>,
    d_bismut: Option<Vec<C64>>,
}

impl<'a> PointCtx<'a> {
    pub fn new(model: &'a HermitianModel, point: &'a ChartPoint) -> Result<Self> {
        let pack = ConnectionPack::new(model.coframe.as_ref(), point, 2)?;
        let curv = curvature_pack(&pack)?;
        Ok(PointCtx { model, point, pack, curv, d_chern: None, d_bismut: None })
    }

    fn chern_derivs(&mut self) -> Result<&[C64]> {
        if self.d_chern.is_none() {
            self.d_chern = Some(covariant_torsion_derivatives(&self.pack, &self.pack.theta)?);
        }
        Ok(self.d_chern.as_deref().unwrap())
    }

    fn bismut_derivs(&mut self) -> Result<&[C64]> {
        if self.d_bismut.is_none() {
            self.d_bismut = Some(covariant_torsion_derivatives(&self.pack, &self.pack.theta_b)?);
        }
        Ok(self.d_bismut.as_deref().unwrap())
    }

    fn n(&self) -> usize {
        self.pack.frame.dim
    }

    /// Frame vector coordinate values, unbarred then barred.
    fn frame_vectors(&self) -> Vec<Vec<C64>> {
        let w = 2 * self.n();
        (0..w).map(|a| self.pack.frame.frame_vector_values(a)).collect()
    }

    fn frame_residual(&self, f: &Form) -> f64 {
        self.pack.frame.to_frame_basis(f).max_abs_value()
    }

    fn frame_residual_matrix(&self, m: &FormMatrix) -> f64 {
        let mut worst = 0.0f64;
        for r in 0..m.rows {
            for c in 0..m.cols {
                worst = worst.max(self.frame_residual(m.at(r, c)));
            }
        }
        worst
    }

    /// `omega^k` in the coordinate basis, with jet coefficients.
    fn omega_power(&self, k: usize) -> Form {
        let omega = self.pack.kaehler_form();
        let mut acc = omega.clone();
        for _ in 1..k {
            acc = acc.wedge(&omega);
        }
        acc
    }

    /// `omega^k` over the frame slots (constant coefficients).
    fn omega_power_frame(&self, k: usize) -> Form {
        let n = self.n();
        let mut omega = Form::zero(n, 2);
        for j in 0..n {
            let basis_j = Form::basis(n, j, crate::jets::Jet2::one(n, 0));
            let basis_jb = Form::basis(n, n + j, crate::jets::Jet2::one(n, 0));
            omega = omega.add(&basis_j.wedge(&basis_jb));
        }
        let omega = omega.scale(C64::new(0.0, 1.0));
        let mut acc = omega.clone();
        for _ in 1..k {
            acc = acc.wedge(&omega);
        }
        acc
    }
}

const FD_STEP_BIANCHI: f64 = 1e-5;
const FD_STEP_HESSIAN: f64 = 1e-4;

// ---------------------------------------------------------------------------
// Check implementations
// ---------------------------------------------------------------------------

fn check_structure_eq_1(ctx: &mut PointCtx) -> Result<f64> {
    Ok(ctx.pack.tau_type_residual.max(ctx.pack.integrability_residual))
}

fn check_bianchi_3(ctx: &mut PointCtx) -> Result<f64> {
    // d tau + theta^t ^ tau - Theta^t ^ phi = 0
    let n = ctx.n();
    let mut worst = 0.0f64;
    for k in 0..n {
        let mut residual = ctx.pack.tau[k].d()?;
        for j in 0..n {
            residual = residual.add(&ctx.pack.theta.at(j, k).wedge(&ctx.pack.tau[j]));
            residual = residual.sub(&ctx.curv.chern.at(j, k).wedge(&ctx.pack.frame.phi[j]));
        }
        worst = worst.max(ctx.frame_residual(&residual));
    }
    Ok(worst)
}

fn check_bianchi_4(ctx: &mut PointCtx) -> Result<f64> {
    // d Theta = theta ^ Theta - Theta ^ theta; the curvature coefficients
    // carry no derivative data (they already used both jet orders), so the
    // outer derivative is taken by central differences of the curvature
    // field.
    let n = ctx.n();
    let model = ctx.model;
    let curvature_at = |q: &ChartPoint| -> Result<FormMatrix> {
        let pack = ConnectionPack::new(model.coframe.as_ref(), q, 2)?;
        Ok(pack.theta.d()?.sub(&pack.theta.wedge_mul(&pack.theta)))
    };
    let d_theta_big = fd_exterior_derivative_matrix(&curvature_at, ctx.point, n, FD_STEP_BIANCHI)?;
    let commutator = ctx
        .pack
        .theta
        .wedge_mul(&ctx.curv.chern)
        .sub(&ctx.curv.chern.wedge_mul(&ctx.pack.theta));
    let residual = d_theta_big.sub(&commutator);
    Ok(ctx.frame_residual_matrix(&residual))
}

fn check_riem_structure_eq_7(ctx: &mut PointCtx) -> Result<f64> {
    let n = ctx.n();
    let phi_col = FormMatrix::from_fn(n, 1, |r, _| ctx.pack.frame.phi[r].clone());
    let phibar_col = FormMatrix::from_fn(n, 1, |r, _| ctx.pack.frame.phibar[r].clone());
    let row1 = ctx.pack.theta1.transpose().wedge_mul(&phi_col);
    let row2 = ctx.pack.theta2.transpose().wedge_mul(&phibar_col);
    let mut worst = 0.0f64;
    for k in 0..n {
        let residual = ctx.pack.frame.phi[k].d()?.add(row1.at(k, 0)).add(row2.at(k, 0));
        worst = worst.max(ctx.frame_residual(&residual));
    }
    Ok(worst)
}

fn check_gauduchon_12(ctx: &mut PointCtx) -> Result<f64> {
    // the (n, n-1) part of d(omega^{n-1}) plus 2 eta ^ omega^{n-1}
    let n = ctx.n();
    let om_pow = ctx.omega_power(n - 1);
    let d_om = om_pow.d()?;
    let d_om_frame = ctx.pack.frame.to_frame_basis(&d_om);
    let del_part = d_om_frame.type_project(n, n - 1)?;

    let mut eta_frame = Form::zero(n, 1);
    for j in 0..n {
        eta_frame = eta_frame.add(&Form::basis(n, j, ctx.pack.eta[j].clone()));
    }
    let om_frame = ctx.omega_power_frame(n - 1);
    let second = eta_frame.wedge(&om_frame).scale(C64::new(2.0, 0.0));
    Ok(del_part.add(&second).max_abs_value())
}

fn check_gray_02(ctx: &mut PointCtx) -> Result<f64> {
    let n = ctx.n();
    let mut worst = 0.0f64;
    for r in 0..n {
        for c in 0..n {
            let frame_form = ctx.pack.frame.to_frame_basis(ctx.curv.riem2.at(r, c));
            worst = worst.max(frame_form.type_project(0, 2)?.max_abs_value());
        }
    }
    Ok(worst)
}

fn check_lemma1_17(ctx: &mut PointCtx) -> Result<f64> {
    let n = ctx.n();
    let vectors = ctx.frame_vectors();
    let d = ctx.chern_derivs()?.to_vec();
    let w = 2 * n;
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let lhs = 2.0 * d[((k * n + i) * n + j) * w + n + l];
                    let r1 = ctx.curv.chern.at(i, k).eval2(&vectors[j], &vectors[n + l]);
                    let r2 = ctx.curv.chern.at(j, k).eval2(&vectors[i], &vectors[n + l]);
                    worst = worst.max((lhs - (r1 - r2)).norm());
                }
            }
        }
    }
    Ok(worst)
}

fn check_lemma1_18(ctx: &mut PointCtx) -> Result<f64> {
    let n = ctx.n();
    let vectors = ctx.frame_vectors();
    let d = ctx.chern_derivs()?.to_vec();
    let w = 2 * n;
    let t = &ctx.pack.torsion;
    let riem2_bar = ctx.curv.riem2.conj();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let lhs = riem2_bar.at(i, j).eval2(&vectors[k], &vectors[n + l]);
                    let mut rhs = d[((l * n + i) * n + j) * w + k];
                    for r in 0..n {
                        rhs += t.value(l, r, i) * t.value(r, j, k) - t.value(l, r, j) * t.value(r, i, k);
                    }
                    worst = worst.max((lhs - rhs).norm());
                }
            }
        }
    }
    Ok(worst)
}

fn check_lemma1_19(ctx: &mut PointCtx) -> Result<f64> {
    let n = ctx.n();
    let vectors = ctx.frame_vectors();
    let d = ctx.chern_derivs()?.to_vec();
    let w = 2 * n;
    let t = &ctx.pack.torsion;
    let riem2_bar = ctx.curv.riem2.conj();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let lhs = riem2_bar.at(i, j).eval2(&vectors[n + k], &vectors[n + l]);
                    let mut rhs =
                        d[((l * n + i) * n + j) * w + n + k] - d[((k * n + i) * n + j) * w + n + l];
                    for r in 0..n {
                        rhs += 2.0 * t.value(r, i, j) * t.value(r, k, l).conj()
                            + t.value(k, r, i) * t.value(j, r, l).conj()
                            + t.value(l, r, j) * t.value(i, r, k).conj()
                            - t.value(l, r, i) * t.value(j, r, k).conj()
                            - t.value(k, r, j) * t.value(i, r, l).conj();
                    }
                    worst = worst.max((lhs - rhs).norm());
                }
            }
        }
    }
    Ok(worst)
}

fn check_lemma1_20(ctx: &mut PointCtx) -> Result<f64> {
    let n = ctx.n();
    let vectors = ctx.frame_vectors();
    let d = ctx.chern_derivs()?.to_vec();
    let w = 2 * n;
    let t = &ctx.pack.torsion;
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let lhs = ctx.curv.riem1.at(i, j).eval2(&vectors[k], &vectors[n + l]);
                    let chern = ctx.curv.chern.at(i, j).eval2(&vectors[k], &vectors[n + l]);
                    let mut rhs = chern - d[((j * n + i) * n + k) * w + n + l]
                        - d[((i * n + j) * n + l) * w + n + k].conj();
                    for r in 0..n {
                        rhs += t.value(r, i, k) * t.value(r, j, l).conj()
                            - t.value(j, r, k) * t.value(i, r, l).conj()
                            - t.value(l, r, i) * t.value(k, r, j).conj();
                    }
                    worst = worst.max((lhs - rhs).norm());
                }
            }
        }
    }
    Ok(worst)
}

fn check_riem_holomorphic_vanish(ctx: &mut PointCtx) -> Result<f64> {
    let n = ctx.n();
    let vectors = ctx.frame_vectors();
    let riem2_bar = ctx.curv.riem2.conj();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    worst =
                        worst.max(riem2_bar.at(i, j).eval2(&vectors[k], &vectors[l]).norm());
                }
            }
        }
    }
    Ok(worst)
}

fn check_torsion_norm_8x(ctx: &mut PointCtx) -> Result<f64> {
    let omega = full_connection(&ctx.pack, ConnectionKind::Chern);
    let t_full = real_torsion_components(&ctx.pack, &omega)?;
    let full = t_full.norm_sq();
    let expect = 8.0 * ctx.pack.torsion.norm_sq();
    Ok((full.re - expect).abs().max(full.im.abs()))
}

fn check_torsion_norm_24x(ctx: &mut PointCtx) -> Result<f64> {
    let omega = full_connection(&ctx.pack, ConnectionKind::Bismut);
    let t_full = real_torsion_components(&ctx.pack, &omega)?;
    let full = t_full.norm_sq();
    let expect = 24.0 * ctx.pack.torsion.norm_sq();
    Ok((full.re - expect).abs().max(full.im.abs()))
}

fn check_n2_eta_relation(ctx: &mut PointCtx) -> Result<f64> {
    let t = &ctx.pack.torsion;
    let r1 = (ctx.pack.eta[0].value() + t.value(1, 0, 1)).norm();
    let r2 = (ctx.pack.eta[1].value() - t.value(0, 0, 1)).norm();
    Ok(r1.max(r2))
}

fn check_lemma9_32(ctx: &mut PointCtx) -> Result<f64> {
    let n = ctx.n();
    let d = ctx.bismut_derivs()?;
    let w = 2 * n;
    let mut worst = 0.0f64;
    for idx in 0..n * n * n {
        for l in 0..n {
            worst = worst.max(d[idx * w + l].norm());
        }
    }
    Ok(worst)
}

fn check_lemma9_33(ctx: &mut PointCtx) -> Result<f64> {
    let n = ctx.n();
    let t = &ctx.pack.torsion;
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let mut acc = C64::default();
                    for r in 0..n {
                        acc += t.value(r, i, j) * t.value(l, r, k)
                            + t.value(r, j, k) * t.value(l, r, i)
                            + t.value(r, k, i) * t.value(l, r, j);
                    }
                    worst = worst.max(acc.norm());
                }
            }
        }
    }
    Ok(worst)
}

fn check_lemma9_34(ctx: &mut PointCtx) -> Result<f64> {
    let n = ctx.n();
    let d = ctx.bismut_derivs()?.to_vec();
    let w = 2 * n;
    let at = |upper: usize, lo1: usize, lo2: usize, dir: usize| d[((upper * n + lo1) * n + lo2) * w + dir];
    let mut worst = 0.0f64;
    for i in 0..n {
        for k in 0..n {
            for l in 0..n {
                for j in 0..n {
                    let a = at(i, k, l, n + j);
                    let b = at(j, k, l, n + i);
                    let c = at(k, i, j, n + l);
                    worst = worst.max((a + b).norm());
                    worst = worst.max((a - c.conj()).norm());
                }
            }
        }
    }
    Ok(worst)
}

fn check_lemma9_35(ctx: &mut PointCtx) -> Result<f64> {
    let n = ctx.n();
    let d = ctx.bismut_derivs()?.to_vec();
    let w = 2 * n;
    let t = &ctx.pack.torsion;
    let mut worst = 0.0f64;
    for i in 0..n {
        for k in 0..n {
            for l in 0..n {
                for j in 0..n {
                    let lhs = d[((i * n + k) * n + l) * w + n + j];
                    let mut acc = C64::default();
                    for r in 0..n {
                        acc += t.value(i, l, r) * t.value(k, j, r).conj()
                            - t.value(i, k, r) * t.value(l, j, r).conj()
                            - t.value(j, l, r) * t.value(k, i, r).conj()
                            + t.value(j, k, r) * t.value(l, i, r).conj()
                            - t.value(r, k, l) * t.value(r, i, j).conj();
                    }
                    worst = worst.max((lhs - acc * (2.0 / 3.0)).norm());
                }
            }
        }
    }
    Ok(worst)
}

fn check_eq36_trace(ctx: &mut PointCtx) -> Result<f64> {
    let n = ctx.n();
    let e = covariant_eta_derivatives(&ctx.pack, &ctx.pack.theta_b)?;
    let w = 2 * n;
    let mut trace = C64::default();
    for r in 0..n {
        trace += e[r * w + n + r];
    }
    let expect = (2.0 / 3.0) * (ctx.pack.torsion.norm_sq() - 2.0 * ctx.pack.eta_norm_sq());
    Ok((trace - C64::new(expect, 0.0)).norm())
}

fn check_lemma10_37(ctx: &mut PointCtx) -> Result<f64> {
    let n = ctx.n();
    // dbar(omega^{n-1}): the (n-1, n) frame part of d(omega^{n-1}),
    // re-expressed over the coordinate covectors with jet coefficients.
    let om_pow = ctx.omega_power(n - 1);
    let d_om = om_pow.d()?;
    let dbar_frame = ctx.pack.frame.to_frame_basis(&d_om).type_project(n - 1, n)?;
    let dbar_coord = ctx.pack.frame.to_coord_basis(&dbar_frame);
    // outer derivative: the top-degree part of d(dbar part)
    let dd = dbar_coord.d()?;
    let dd_frame = ctx.pack.frame.to_frame_basis(&dd);
    let full_mask: u32 = (1 << (2 * n)) - 1;
    let lhs_coeff = dd_frame.coefficient_value(full_mask) * C64::new(0.0, -1.0);
    let top = ctx.omega_power_frame(n).coefficient_value(full_mask);
    let lambda_lhs = lhs_coeff / top;
    let lambda_rhs =
        (4.0 / (3.0 * n as f64)) * (ctx.pack.torsion.norm_sq() - 2.0 * ctx.pack.eta_norm_sq());
    Ok((lambda_lhs - C64::new(lambda_rhs, 0.0)).norm())
}

fn check_psh_38(ctx: &mut PointCtx) -> Result<f64> {
    // Hessian of |T|^2: exact antiholomorphic gradient from jets, one
    // central-difference layer (Richardson extrapolated) on top.
    let n = ctx.n();
    let model = ctx.model;
    let gradient = |q: &ChartPoint| -> Result<Vec<C64>> {
        let pack = ConnectionPack::new(model.coframe.as_ref(), q, 2)?;
        let norm_jet = pack.torsion.norm_sq_jet();
        Ok((0..n).map(|l| norm_jet.d1(n + l)).collect())
    };
    let mut hessian = vec![C64::default(); n * n];
    for a in 0..n {
        let col_h = fd_holomorphic_derivative_vec(&gradient, ctx.point, a, FD_STEP_HESSIAN)?;
        let col_h2 = fd_holomorphic_derivative_vec(&gradient, ctx.point, a, FD_STEP_HESSIAN / 2.0)?;
        for b in 0..n {
            // Richardson: (4 D(h/2) - D(h)) / 3
            hessian[a * n + b] = (col_h2[b] * 4.0 - col_h[b]) / 3.0;
        }
    }
    // coordinate Hessian two-form sum H_ab dz_a ^ dzbar_b -> frame matrix
    let mut form = Form::zero(n, 2);
    for a in 0..n {
        for b in 0..n {
            let basis_a = Form::basis(n, a, crate::jets::Jet2::constant(n, 0, hessian[a * n + b]));
            let basis_bb = Form::basis(n, n + b, crate::jets::Jet2::one(n, 0));
            form = form.add(&basis_a.wedge(&basis_bb));
        }
    }
    let frame_form = ctx.pack.frame.to_frame_basis(&form);
    let mut frame_hessian = vec![C64::default(); n * n];
    for m in 0..n {
        for l in 0..n {
            frame_hessian[m * n + l] = frame_form.coefficient_value((1 << m) | (1 << (n + l)));
        }
    }
    // right side: sum_ijk T^i_{jk, lbar} conj(T^i_{jk, mbar}) on phi_m ^ phibar_l
    let d = ctx.bismut_derivs()?.to_vec();
    let w = 2 * n;
    let mut mismatch = 0.0f64;
    for m in 0..n {
        for l in 0..n {
            let mut rhs = C64::default();
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let dl = d[((i * n + j) * n + k) * w + n + l];
                        let dm = d[((i * n + j) * n + k) * w + n + m];
                        rhs += dl * dm.conj();
                    }
                }
            }
            mismatch = mismatch.max((frame_hessian[m * n + l] - rhs).norm());
        }
    }
    // plurisubharmonicity: the frame Hessian must be positive semidefinite
    let eigs = hermitian_eigenvalues(&frame_hessian, n);
    let psd_defect = (-eigs[0]).max(0.0);
    // one threshold covers both: the PSD defect budget is a tenth of the
    // mismatch budget, so it enters scaled by ten
    Ok(mismatch.max(10.0 * psd_defect))
}

fn check_af_parallel(ctx: &mut PointCtx) -> Result<f64> {
    agricola_friedrich_residual(&ctx.pack)
}

fn check_chern_curvature_zero(ctx: &mut PointCtx) -> Result<f64> {
    Ok(ctx.frame_residual_matrix(&ctx.curv.chern))
}

fn check_riem_curvature_zero(ctx: &mut PointCtx) -> Result<f64> {
    Ok(ctx
        .frame_residual_matrix(&ctx.curv.riem1)
        .max(ctx.frame_residual_matrix(&ctx.curv.riem2)))
}

fn check_bismut_curvature_zero(ctx: &mut PointCtx) -> Result<f64> {
    Ok(ctx.frame_residual_matrix(&ctx.curv.bismut))
}

fn check_balanced_implies_kaehler(ctx: &mut PointCtx) -> Result<f64> {
    // conditional: wherever the trace form vanishes, so must the torsion
    let eta_norm = ctx.pack.eta_norm_sq().sqrt();
    if eta_norm < 1e-10 {
        Ok(ctx.pack.torsion.norm_sq().sqrt())
    } else {
        Ok(0.0)
    }
}

// ---------------------------------------------------------------------------
// Finite-difference helpers
// ---------------------------------------------------------------------------

/// Central-difference holomorphic Wirtinger derivative of a vector field.
fn fd_holomorphic_derivative_vec(
    field: &dyn Fn(&ChartPoint) -> Result<Vec<C64>>,
    point: &ChartPoint,
    index: usize,
    h: f64,
) -> Result<Vec<C64>> {
    let re = C64::new(h, 0.0);
    let im = C64::new(0.0, h);
    let fp = field(&point.shifted(index, re))?;
    let fm = field(&point.shifted(index, -re))?;
    let gp = field(&point.shifted(index, im))?;
    let gm = field(&point.shifted(index, -im))?;
    let i = C64::new(0.0, 1.0);
    Ok((0..fp.len())
        .map(|k| {
            let fx = (fp[k] - fm[k]) / (2.0 * h);
            let fy = (gp[k] - gm[k]) / (2.0 * h);
            (fx - i * fy) / 2.0
        })
        .collect())
}

/// Exterior derivative of a matrix of forms by central differences of the
/// coefficient fields in every Wirtinger direction.
fn fd_exterior_derivative_matrix(
    field: &dyn Fn(&ChartPoint) -> Result<FormMatrix>,
    point: &ChartPoint,
    n: usize,
    h: f64,
) -> Result<FormMatrix> {
    let re = C64::new(h, 0.0);
    let im = C64::new(0.0, h);
    let mut shifted = Vec::with_capacity(4 * n);
    for a in 0..n {
        shifted.push(field(&point.shifted(a, re))?);
        shifted.push(field(&point.shifted(a, -re))?);
        shifted.push(field(&point.shifted(a, im))?);
        shifted.push(field(&point.shifted(a, -im))?);
    }
    let base = field(point)?;
    let degree = base.at(0, 0).degree();
    let i = C64::new(0.0, 1.0);
    let out = FormMatrix::from_fn(base.rows, base.cols, |r, c| {
        let mut acc = Form::zero(n, degree + 1);
        // collect the union of masks appearing in any sample
        let mut masks: Vec<u32> = Vec::new();
        for m in shifted.iter() {
            for (mask, _) in m.at(r, c).terms() {
                if !masks.contains(mask) {
                    masks.push(*mask);
                }
            }
        }
        for mask in masks {
            for a in 0..n {
                let fp = shifted[4 * a].at(r, c).coefficient_value(mask);
                let fm = shifted[4 * a + 1].at(r, c).coefficient_value(mask);
                let gp = shifted[4 * a + 2].at(r, c).coefficient_value(mask);
                let gm = shifted[4 * a + 3].at(r, c).coefficient_value(mask);
                let fx = (fp - fm) / (2.0 * h);
                let fy = (gp - gm) / (2.0 * h);
                let dz = (fx - i * fy) / 2.0;
                let dzbar = (fx + i * fy) / 2.0;
                for (slot, deriv) in [(a, dz), (n + a, dzbar)] {
                    if mask & (1 << slot) != 0 || deriv.norm() == 0.0 {
                        continue;
                    }
                    let basis = Form::basis(n, slot, crate::jets::Jet2::constant(n, 0, deriv));
                    let term_form = Form::basis_from_mask(n, mask);
                    acc = acc.add(&basis.wedge(&term_form));
                }
            }
        }
        acc
    });
    Ok(out)
}

// ---------------------------------------------------------------------------
// Registry
// ---------------------------------------------------------------------------

/// The full check registry, in report order.
pub fn registry() -> &'static [CheckDescriptor] {
    use Applicability::*;
    use ResidualKind::*;
    static REGISTRY: &[CheckDescriptor] = &[
        CheckDescriptor {
            id: "structure-eq-1",
            applicability: AnyMetric,
            tolerance: 1e-10,
            residual_kind: MaxAbs,
            description: "first structure equation: d phi + theta^t ^ phi has pure (2,0) type",
            eval: Some(check_structure_eq_1),
        },
        CheckDescriptor {
            id: "bianchi-3",
            applicability: AnyMetric,
            tolerance: 1e-9,
            residual_kind: MaxAbs,
            description: "first Bianchi identity: d tau + theta^t ^ tau = Theta^t ^ phi",
            eval: Some(check_bianchi_3),
        },
        CheckDescriptor {
            id: "bianchi-4",
            applicability: AnyMetric,
            tolerance: 1e-8,
            residual_kind: MaxAbs,
            description: "second Bianchi identity: d Theta = theta ^ Theta - Theta ^ theta",
            eval: Some(check_bianchi_4),
        },
        CheckDescriptor {
            id: "riem-structure-eq-7",
            applicability: AnyMetric,
            tolerance: 1e-10,
            residual_kind: MaxAbs,
            description: "Levi-Civita structure equation: d phi + theta1^t ^ phi + theta2^t ^ phibar = 0",
            eval: Some(check_riem_structure_eq_7),
        },
        CheckDescriptor {
            id: "gauduchon-12",
            applicability: AnyMetric,
            tolerance: 1e-9,
            residual_kind: MaxAbs,
            description: "trace identity: del(omega^{n-1}) + 2 eta ^ omega^{n-1} = 0",
            eval: Some(check_gauduchon_12),
        },
        CheckDescriptor {
            id: "gray-02",
            applicability: AnyMetric,
            tolerance: 1e-9,
            residual_kind: MaxAbs,
            description: "the (0,2) part of the mixed Levi-Civita curvature block vanishes",
            eval: Some(check_gray_02),
        },
        CheckDescriptor {
            id: "lemma1-17",
            applicability: AnyMetric,
            tolerance: 1e-8,
            residual_kind: MaxAbs,
            description: "2 T^k_{ij,lbar} equals the antisymmetrized Chern curvature",
            eval: Some(check_lemma1_17),
        },
        CheckDescriptor {
            id: "lemma1-18",
            applicability: AnyMetric,
            tolerance: 1e-8,
            residual_kind: MaxAbs,
            description: "R_{ijk lbar} against Chern-derivatives and quadratic torsion",
            eval: Some(check_lemma1_18),
        },
        CheckDescriptor {
            id: "lemma1-19",
            applicability: AnyMetric,
            tolerance: 1e-8,
            residual_kind: MaxAbs,
            description: "R_{ij kbar lbar} against Chern-derivatives and quadratic torsion",
            eval: Some(check_lemma1_19),
        },
        CheckDescriptor {
            id: "lemma1-20",
            applicability: AnyMetric,
            tolerance: 1e-8,
            residual_kind: MaxAbs,
            description: "mixed Riemannian vs Chern curvature with torsion corrections",
            eval: Some(check_lemma1_20),
        },
        CheckDescriptor {
            id: "riem-holomorphic-vanish",
            applicability: AnyMetric,
            tolerance: 1e-9,
            residual_kind: MaxAbs,
            description: "all-holomorphic Riemannian curvature components vanish",
            eval: Some(check_riem_holomorphic_vanish),
        },
        CheckDescriptor {
            id: "torsion-norm-8x",
            applicability: AnyMetric,
            tolerance: 1e-12,
            residual_kind: MaxAbs,
            description: "full contraction of the Chern torsion equals 8 |T|^2",
            eval: Some(check_torsion_norm_8x),
        },
        CheckDescriptor {
            id: "torsion-norm-24x",
            applicability: AnyMetric,
            tolerance: 1e-12,
            residual_kind: MaxAbs,
            description: "full contraction of the Bismut torsion equals 24 |T|^2",
            eval: Some(check_torsion_norm_24x),
        },
        CheckDescriptor {
            id: "n2-eta-relation",
            applicability: DimTwoOnly,
            tolerance: 1e-12,
            residual_kind: MaxAbs,
            description: "on surfaces: eta_1 = -T^2_12 and eta_2 = T^1_12",
            eval: Some(check_n2_eta_relation),
        },
        CheckDescriptor {
            id: "bismut-lemma9-32",
            applicability: BismutFlatOnly,
            tolerance: 1e-7,
            residual_kind: MaxAbs,
            description: "holomorphic-direction Bismut derivatives of the torsion vanish",
            eval: Some(check_lemma9_32),
        },
        CheckDescriptor {
            id: "bismut-lemma9-33",
            applicability: BismutFlatOnly,
            tolerance: 1e-7,
            residual_kind: MaxAbs,
            description: "cyclic quadratic torsion identity",
            eval: Some(check_lemma9_33),
        },
        CheckDescriptor {
            id: "bismut-lemma9-34",
            applicability: BismutFlatOnly,
            tolerance: 1e-7,
            residual_kind: MaxAbs,
            description: "conjugate-direction derivative symmetries of the torsion",
            eval: Some(check_lemma9_34),
        },
        CheckDescriptor {
            id: "bismut-lemma9-35",
            applicability: BismutFlatOnly,
            tolerance: 1e-7,
            residual_kind: MaxAbs,
            description: "conjugate-direction derivative equals its quadratic torsion expression",
            eval: Some(check_lemma9_35),
        },
        CheckDescriptor {
            id: "bismut-eq36-trace",
            applicability: BismutFlatOnly,
            tolerance: 1e-7,
            residual_kind: MaxAbs,
            description: "trace of conjugate eta-derivatives equals (2/3)(|T|^2 - 2|eta|^2)",
            eval: Some(check_eq36_trace),
        },
        CheckDescriptor {
            id: "bismut-lemma10-37",
            applicability: BismutFlatOnly,
            tolerance: 1e-7,
            residual_kind: MaxAbs,
            description: "-i del dbar omega^{n-1} equals (4/3n)(|T|^2 - 2|eta|^2) omega^n",
            eval: Some(check_lemma10_37),
        },
        CheckDescriptor {
            id: "bismut-psh-38",
            applicability: BismutFlatOnly,
            tolerance: 1e-4,
            residual_kind: MinEigenvalue,
            description: "complex Hessian of |T|^2 matches its derivative expression and is PSD",
            eval: Some(check_psh_38),
        },
        CheckDescriptor {
            id: "af-parallel-13",
            applicability: BismutFlatOnly,
            tolerance: 1e-8,
            residual_kind: MaxAbs,
            description: "Bismut torsion is parallel for (2/3) LeviCivita + (1/3) Bismut",
            eval: Some(check_af_parallel),
        },
        CheckDescriptor {
            id: "chern-curvature-zero",
            applicability: ChernFlatOnly,
            tolerance: 1e-8,
            residual_kind: MaxAbs,
            description: "Chern curvature vanishes",
            eval: Some(check_chern_curvature_zero),
        },
        CheckDescriptor {
            id: "riem-curvature-zero",
            applicability: RiemannFlatOnly,
            tolerance: 1e-8,
            residual_kind: MaxAbs,
            description: "Levi-Civita curvature vanishes",
            eval: Some(check_riem_curvature_zero),
        },
        CheckDescriptor {
            id: "bismut-curvature-zero",
            applicability: BismutFlatOnly,
            tolerance: 1e-8,
            residual_kind: MaxAbs,
            description: "Bismut curvature vanishes",
            eval: Some(check_bismut_curvature_zero),
        },
        CheckDescriptor {
            id: "balanced-implies-kahler-pointwise",
            applicability: BismutFlatOnly,
            tolerance: 1e-9,
            residual_kind: MaxAbs,
            description: "pointwise: |eta| below threshold forces |T| below tolerance",
            eval: Some(check_balanced_implies_kaehler),
        },
        // Lie-algebraic checks are reported through the algebra commands;
        // they are listed for completeness and rejected by the chart runner.
        CheckDescriptor {
            id: "lie-eq39-ad-skew",
            applicability: LieAlgebraic,
            tolerance: 1e-12,
            residual_kind: MaxAbs,
            description: "bi-invariance: <[X,Y],Z> is skew in the last two slots",
            eval: None,
        },
        CheckDescriptor {
            id: "lie-eq23-integrability",
            applicability: LieAlgebraic,
            tolerance: 1e-12,
            residual_kind: MaxAbs,
            description: "integrability of the left-invariant complex structure",
            eval: None,
        },
        CheckDescriptor {
            id: "lie-samelson-conditions",
            applicability: LieAlgebraic,
            tolerance: 1e-10,
            residual_kind: MaxAbs,
            description: "isotropy, trivial real intersection, and spanning of the polarization",
            eval: None,
        },
        CheckDescriptor {
            id: "lie-lemma6-flat",
            applicability: LieAlgebraic,
            tolerance: 1e-12,
            residual_kind: MaxAbs,
            description: "all Bismut connection coefficients vanish in the invariant frame",
            eval: None,
        },
        CheckDescriptor {
            id: "lie-eq33-torsion-jacobi",
            applicability: LieAlgebraic,
            tolerance: 1e-12,
            residual_kind: MaxAbs,
            description: "cyclic quadratic torsion identity from structure constants",
            eval: None,
        },
    ];
    REGISTRY
}

pub fn check_by_id(id: &str) -> Option<&'static CheckDescriptor> {
    registry().iter().find(|c| c.id == id)
}

/// Why a check does or does not apply to a model.
pub fn applicable(check: &CheckDescriptor, model: &HermitianModel) -> std::result::Result<(), String> {
    match check.applicability {
        Applicability::AnyMetric => Ok(()),
        Applicability::DimTwoOnly => {
            if model.dim == 2 {
                Ok(())
            } else {
                Err(format!("requires a surface (n = 2), model has n = {}", model.dim))
            }
        }
        Applicability::BismutFlatOnly => {
            if model.flags.bismut_flat {
                Ok(())
            } else {
                Err("model does not claim Bismut flatness".into())
            }
        }
        Applicability::ChernFlatOnly => {
            if model.flags.chern_flat {
                Ok(())
            } else {
                Err("model does not claim Chern flatness".into())
            }
        }
        Applicability::RiemannFlatOnly => {
            if model.flags.riemann_flat {
                Ok(())
            } else {
                Err("model does not claim Riemannian flatness".into())
            }
        }
        Applicability::LieAlgebraic => Err("algebraic check, run through the algebra commands".into()),
    }
}

/// All chart checks applicable to the model, in registry order.
pub fn default_checks(model: &HermitianModel) -> Vec<&'static CheckDescriptor> {
    registry()
        .iter()
        .filter(|c| c.eval.is_some() && applicable(c, model).is_ok())
        .collect()
}

/// Resolves explicit check ids, rejecting unknown or inapplicable ones.
pub fn resolve_checks(
    model: &HermitianModel,
    ids: &[String],
) -> Result<Vec<&'static CheckDescriptor>> {
    let mut out = Vec::with_capacity(ids.len());
    for id in ids {
        let check = check_by_id(id).ok_or_else(|| Error::Unknown {
            kind: "check",
            name: id.clone(),
        })?;
        if check.eval.is_none() {
            return Err(Error::InapplicableCheck {
                check: id.clone(),
                reason: "algebraic check, run through the algebra commands".into(),
            });
        }
        if let Err(reason) = applicable(check, model) {
            return Err(Error::InapplicableCheck { check: id.clone(), reason });
        }
        out.push(check);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Runner
// ---------------------------------------------------------------------------

/// Runner configuration.
#[derive(Clone, Debug)]
pub struct SuiteConfig {
    pub seed: u64,
    pub points: usize,
    pub tol_overrides: BTreeMap<String, f64>,
    pub exec: ExecMode,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig { seed: 42, points: 100, tol_overrides: BTreeMap::new(), exec: ExecMode::Parallel }
    }
}

/// One check's aggregated result.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckReport {
    pub id: String,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// Point attaining the maximum residual (ties: first sampled).
    pub argmax_point: Vec<String>,
}

/// Deterministic verification report.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VerificationReport {
    pub schema: u32,
    pub model: String,
    pub seed: u64,
    pub points: usize,
    pub checks: Vec<CheckReport>,
    pub footer: String,
    /// Wall time is printed separately and excluded from the serialized
    /// report so identical inputs give byte-identical files.
    #[serde(skip)]
    pub wall_time: Duration,
}

impl VerificationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }
}

const REPORT_FOOTER: &str = "pointwise identities at sampled chart points; \
no integrals over compact quotients are evaluated";

/// Runs the given checks over seeded domain points of the model.
pub fn run_suite(
    model: &HermitianModel,
    checks: &[&'static CheckDescriptor],
    cfg: &SuiteConfig,
) -> Result<VerificationReport> {
    let start = Instant::now();
    let points = model.sample_points(cfg.seed, cfg.points)?;

    let per_point: Vec<Result<Vec<f64>>> = map_indexed(cfg.exec, points.len(), |idx| {
        let mut ctx = PointCtx::new(model, &points[idx])?;
        let mut residuals = Vec::with_capacity(checks.len());
        for check in checks {
            let eval = check.eval.expect("runner only receives chart checks");
            residuals.push(eval(&mut ctx)?);
        }
        Ok(residuals)
    });

    let mut table = Vec::with_capacity(points.len());
    for row in per_point {
        table.push(row?);
    }

    let mut reports = Vec::with_capacity(checks.len());
    for (ci, check) in checks.iter().enumerate() {
        let mut max_residual = f64::NEG_INFINITY;
        let mut argmax = 0usize;
        for (pi, row) in table.iter().enumerate() {
            if row[ci] > max_residual {
                max_residual = row[ci];
                argmax = pi;
            }
        }
        let tolerance = cfg.tol_overrides.get(check.id).copied().unwrap_or(check.tolerance);
        reports.push(CheckReport {
            id: check.id.to_string(),
            residual: max_residual,
            tolerance,
            pass: max_residual <= tolerance,
            argmax_point: points[argmax].coords().iter().map(|c| format_c64(*c)).collect(),
        });
    }

    Ok(VerificationReport {
        schema: 1,
        model: model.name.clone(),
        seed: cfg.seed,
        points: cfg.points,
        checks: reports,
        footer: REPORT_FOOTER.into(),
        wall_time: start.elapsed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;

    fn cfg(seed: u64, points: usize) -> SuiteConfig {
        SuiteConfig { seed, points, ..Default::default() }
    }

    #[test]
    fn euclidean_passes_everything() {
        let model = catalog::euclidean(2).unwrap();
        let checks = default_checks(&model);
        // euclidean claims every flag, so the whole registry applies
        assert!(checks.iter().any(|c| c.id == "bismut-curvature-zero"));
        assert!(checks.iter().any(|c| c.id == "balanced-implies-kahler-pointwise"));
        let report = run_suite(&model, &checks, &cfg(1, 10)).unwrap();
        assert!(report.all_passed(), "{}", report.to_json());
        for check in &report.checks {
            assert!(check.residual < 1e-10, "{}: {:.3e}", check.id, check.residual);
        }
    }

    #[test]
    fn hopf_full_bismut_suite_passes() {
        let model = catalog::hopf_surface(1.0).unwrap();
        let checks = default_checks(&model);
        let ids: Vec<&str> = checks.iter().map(|c| c.id).collect();
        for expected in [
            "structure-eq-1",
            "bianchi-3",
            "bianchi-4",
            "riem-structure-eq-7",
            "gauduchon-12",
            "gray-02",
            "lemma1-17",
            "lemma1-18",
            "lemma1-19",
            "lemma1-20",
            "riem-holomorphic-vanish",
            "torsion-norm-8x",
            "torsion-norm-24x",
            "n2-eta-relation",
            "bismut-lemma9-32",
            "bismut-lemma9-33",
            "bismut-lemma9-34",
            "bismut-lemma9-35",
            "bismut-eq36-trace",
            "bismut-lemma10-37",
            "bismut-psh-38",
            "af-parallel-13",
            "bismut-curvature-zero",
            "balanced-implies-kahler-pointwise",
        ] {
            assert!(ids.contains(&expected), "missing {expected}");
        }
        assert!(!ids.contains(&"chern-curvature-zero"));
        let report = run_suite(&model, &checks, &cfg(7, 25)).unwrap();
        for check in &report.checks {
            assert!(
                check.pass,
                "{} failed: residual {:.3e} > {:.1e} at {:?}",
                check.id, check.residual, check.tolerance, check.argmax_point
            );
        }
    }

    #[test]
    fn perturbed_metric_general_battery() {
        for dim in [2usize, 3] {
            let model = catalog::perturbed_metric(5, 0.15, dim).unwrap();
            let checks = default_checks(&model);
            // no flatness claims, no Bismut-only checks
            assert!(checks.iter().all(|c| !c.id.starts_with("bismut-")));
            let report = run_suite(&model, &checks, &cfg(3, 10)).unwrap();
            for check in &report.checks {
                assert!(
                    check.pass,
                    "dim {dim} {}: residual {:.3e} at {:?}",
                    check.id, check.residual, check.argmax_point
                );
            }
        }
    }

    #[test]
    fn inapplicable_checks_rejected() {
        let model = catalog::boothby(crate::expr::parse("z2", 2).unwrap(), crate::expr::Expr::real(0.0))
            .unwrap();
        let err = resolve_checks(&model, &["bismut-curvature-zero".into()]).unwrap_err();
        assert!(matches!(err, Error::InapplicableCheck { .. }));
        let err = resolve_checks(&model, &["nope".into()]).unwrap_err();
        assert!(matches!(err, Error::Unknown { .. }));
        let err = resolve_checks(&model, &["lie-eq39-ad-skew".into()]).unwrap_err();
        assert!(matches!(err, Error::InapplicableCheck { .. }));
        // chern flatness applies
        let checks = resolve_checks(&model, &["chern-curvature-zero".into()]).unwrap();
        let report = run_suite(&model, &checks, &cfg(2, 10)).unwrap();
        assert!(report.all_passed());
    }

    #[test]
    fn n3_models_reject_surface_checks() {
        let model = catalog::hopf_x_c().unwrap();
        let err = resolve_checks(&model, &["n2-eta-relation".into()]).unwrap_err();
        assert!(matches!(err, Error::InapplicableCheck { .. }));
        // but the Bismut battery applies and passes
        let checks = resolve_checks(
            &model,
            &[
                "bismut-lemma9-32".into(),
                "bismut-lemma9-33".into(),
                "bismut-lemma9-34".into(),
                "bismut-lemma9-35".into(),
                "bismut-eq36-trace".into(),
                "bismut-lemma10-37".into(),
                "bismut-curvature-zero".into(),
            ],
        )
        .unwrap();
        let report = run_suite(&model, &checks, &cfg(9, 6)).unwrap();
        for check in &report.checks {
            assert!(
                check.pass,
                "{}: residual {:.3e} at {:?}",
                check.id, check.residual, check.argmax_point
            );
        }
    }

    #[test]
    fn failure_injection_is_detected() {
        let model = catalog::hopf_perturbed(1e-3).unwrap();
        let checks = resolve_checks(&model, &["bismut-curvature-zero".into()]).unwrap();
        let report = run_suite(&model, &checks, &cfg(7, 20)).unwrap();
        assert!(!report.all_passed());
        assert!(report.checks[0].residual > 1e-5, "residual {:.3e}", report.checks[0].residual);
    }

    #[test]
    fn reports_are_deterministic_across_modes() {
        let model = catalog::hopf_surface(1.0).unwrap();
        let checks = resolve_checks(
            &model,
            &["structure-eq-1".into(), "torsion-norm-8x".into(), "bismut-curvature-zero".into()],
        )
        .unwrap();
        let mut cfg_par = cfg(7, 30);
        cfg_par.exec = ExecMode::Parallel;
        let mut cfg_seq = cfg(7, 30);
        cfg_seq.exec = ExecMode::Sequential;
        let a = run_suite(&model, &checks, &cfg_par).unwrap().to_json();
        let b = run_suite(&model, &checks, &cfg_par).unwrap().to_json();
        let c = run_suite(&model, &checks, &cfg_seq).unwrap().to_json();
        assert_eq!(a, b);
        assert_eq!(a, c);
    }

    #[test]
    fn registry_ids_unique_and_tolerances_positive() {
        let mut seen = std::collections::BTreeSet::new();
        for check in registry() {
            assert!(seen.insert(check.id), "duplicate id {}", check.id);
            assert!(check.tolerance > 0.0);
        }
    }
}
