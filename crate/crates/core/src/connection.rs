//! Connections, torsion, and curvature of a Hermitian metric at a point.
//!
//! The input is a *unitary coframe field*: `n` one-forms
//! `phi_i = sum_j a_ij dz_j + b_ij dzbar_j` whose span defines the `(1,0)`
//! covectors and which are declared orthonormal for the metric. From the
//! order-2 jets of the coefficients the pipeline computes
//!
//! * the Chern connection matrix `theta` (skew-Hermitian in the frame, with
//!   torsion of pure type `(2,0)`),
//! * the torsion components `T^k_ij` with the halved convention
//!   `tau_k = sum_{i<j} 2 T^k_ij phi_i ^ phi_j`, the trace one-form `eta`,
//!   and the difference tensor `gamma` between the Levi-Civita and Chern
//!   connections,
//! * the Levi-Civita blocks `theta_1 = theta + gamma`,
//!   `(theta_2)_ij = sum_k conj(T^k_ij) phi_k`, and the Bismut matrix
//!   `theta_b = theta + 2 gamma`,
//! * all four curvature matrices by differentiating the construction at the
//!   jet level (one code path serves every connection), and
//! * frame-covariant derivatives of the torsion tensor with respect to any
//!   of the connections.
//!
//! Type `(p, q)` projections are graded against the coframe itself, not
//! against the coordinate covectors: a form is first rewritten over the
//! `phi` basis. That keeps the pipeline correct for coframes with nonzero
//! `dzbar` blocks (exponential charts of group metrics), where the complex
//! structure differs from the ambient one.

use crate::error::{Error, Result};
use crate::forms::{Form, FormMatrix};
use crate::jets::{ChartPoint, Jet2, C64};
use crate::linalg::{hermitian_eigenvalues, JetMatrix};

/// Threshold below which the induced metric counts as degenerate.
pub const MIN_METRIC_EIGENVALUE: f64 = 1e-10;

/// Tolerance for the `(0,2)` part of `d phi`; a larger residual means the
/// coframe does not define an integrable complex structure.
pub const INTEGRABILITY_TOL: f64 = 1e-7;

/// A field of unitary coframes over a chart domain.
pub trait CoframeField: Send + Sync {
    fn dim(&self) -> usize;

    /// Cheap domain predicate used by samplers and the CLI.
    fn in_domain(&self, point: &ChartPoint) -> bool;

    /// The `n x 2n` jet coefficient matrix of the coframe at `point`:
    /// row `i`, column `j < n` is the `dz_{j+1}` coefficient of `phi_i`,
    /// column `n + j` the `dzbar_{j+1}` coefficient.
    fn coefficients(&self, point: &ChartPoint, order: usize) -> Result<Vec<Vec<Jet2>>>;
}

/// Expression-backed coframe field.
pub struct ExprCoframe {
    dim: usize,
    entries: Vec<Vec<Option<crate::expr::Expr>>>,
    domain: Option<crate::expr::Expr>,
}

impl ExprCoframe {
    /// `entries[i][s]` gives the coefficient of `phi_{i+1}` on slot `s`
    /// (`s < n`: `dz_{s+1}`; `s >= n`: `dzbar_{s+1-n}`). `None` means zero.
    /// The optional `domain` expression marks a point valid iff its real
    /// part is positive.
    pub fn new(
        dim: usize,
        entries: Vec<Vec<Option<crate::expr::Expr>>>,
        domain: Option<crate::expr::Expr>,
    ) -> Result<Self> {
        if entries.len() != dim || entries.iter().any(|row| row.len() != 2 * dim) {
            return Err(Error::InvalidModel(format!(
                "coframe must be {dim} x {} expressions",
                2 * dim
            )));
        }
        for row in &entries {
            for e in row.iter().flatten() {
                if let Some(v) = e.max_var() {
                    if v >= dim {
                        return Err(Error::InvalidModel(format!(
                            "coframe entry uses z{} beyond dimension {dim}",
                            v + 1
                        )));
                    }
                }
            }
        }
        Ok(ExprCoframe { dim, entries, domain })
    }
}

impl CoframeField for ExprCoframe {
    fn dim(&self) -> usize {
        self.dim
    }

    fn in_domain(&self, point: &ChartPoint) -> bool {
        match &self.domain {
            None => true,
            Some(e) => e.eval(point).map(|v| v.re > 0.0).unwrap_or(false),
        }
    }

    fn coefficients(&self, point: &ChartPoint, order: usize) -> Result<Vec<Vec<Jet2>>> {
        let mut rows = Vec::with_capacity(self.dim);
        for row in &self.entries {
            let mut jets = Vec::with_capacity(2 * self.dim);
            for entry in row {
                jets.push(match entry {
                    None => Jet2::zero(self.dim, order),
                    Some(e) => e.eval_jet(point, order)?,
                });
            }
            rows.push(jets);
        }
        Ok(rows)
    }
}

/// A coframe rotated by a constant matrix: `phi~ = U phi` rowwise. For a
/// unitary frame change `e~ = P e` take `U = conj(P)`.
pub struct RotatedCoframe {
    pub inner: std::sync::Arc<dyn CoframeField>,
    pub u: Vec<C64>,
}

impl CoframeField for RotatedCoframe {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn in_domain(&self, point: &ChartPoint) -> bool {
        self.inner.in_domain(point)
    }

    fn coefficients(&self, point: &ChartPoint, order: usize) -> Result<Vec<Vec<Jet2>>> {
        let n = self.dim();
        let base = self.inner.coefficients(point, order)?;
        let mut rows = Vec::with_capacity(n);
        for i in 0..n {
            let mut jets = Vec::with_capacity(2 * n);
            for s in 0..2 * n {
                let mut acc = Jet2::zero(n, order);
                for j in 0..n {
                    acc = acc.add(&base[j][s].scale(self.u[i * n + j]));
                }
                jets.push(acc);
            }
            rows.push(jets);
        }
        Ok(rows)
    }
}

/// Antisymmetric torsion components `T^k_ij` as jets in the frame.
#[derive(Clone, Debug)]
pub struct TorsionTensor {
    pub n: usize,
    data: Vec<Jet2>,
}

impl TorsionTensor {
    fn zero(n: usize, dim: usize, order: usize) -> Self {
        TorsionTensor { n, data: vec![Jet2::zero(dim, order); n * n * n] }
    }

    pub fn at(&self, k: usize, i: usize, j: usize) -> &Jet2 {
        &self.data[(k * self.n + i) * self.n + j]
    }

    fn set(&mut self, k: usize, i: usize, j: usize, v: Jet2) {
        self.data[(k * self.n + i) * self.n + j] = v;
    }

    pub fn value(&self, k: usize, i: usize, j: usize) -> C64 {
        self.at(k, i, j).value()
    }

    /// `|T|^2 = sum |T^k_ij|^2` as a jet (value plus exact derivatives).
    pub fn norm_sq_jet(&self) -> Jet2 {
        let mut acc = Jet2::zero(self.data[0].dim(), self.data[0].order());
        for t in &self.data {
            acc = acc.add(&t.mul(&t.conj()));
        }
        acc
    }

    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|t| t.value().norm_sqr()).sum()
    }

    pub fn max_antisymmetry_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for k in 0..self.n {
            for i in 0..self.n {
                for j in 0..self.n {
                    worst = worst.max((self.value(k, i, j) + self.value(k, j, i)).norm());
                }
            }
        }
        worst
    }
}

/// Frame data at a point: coframe jets, the `2n x 2n` coefficient matrix
/// `M` of `(phi, phibar)` over `(dz, dzbar)`, its inverse, and the basis
/// conversion rows derived from them.
pub struct FramePack {
    pub dim: usize,
    pub order: usize,
    pub point: ChartPoint,
    pub coeffs: Vec<Vec<Jet2>>,
    pub phi: Vec<Form>,
    pub phibar: Vec<Form>,
    pub m_inv: JetMatrix,
    /// `to_frame[s]`: coordinate covector `s` written over the frame slots.
    pub to_frame: Vec<Form>,
    /// `to_coord[t]`: frame covector `t` written over coordinate slots.
    pub to_coord: Vec<Form>,
    pub min_metric_eig: f64,
}

impl FramePack {
    pub fn new(cf: &dyn CoframeField, point: &ChartPoint, order: usize) -> Result<Self> {
        let n = cf.dim();
        if point.dim() != n {
            return Err(Error::DimensionMismatch(format!(
                "point has dimension {}, model has {n}",
                point.dim()
            )));
        }
        if !cf.in_domain(point) {
            return Err(Error::OutsideDomain { point: point.to_string() });
        }
        let coeffs = cf.coefficients(point, order)?;
        let w = 2 * n;

        // M rows: phi_1..phi_n then their conjugates.
        let m = JetMatrix::from_fn(w, |r, s| {
            if r < n {
                coeffs[r][s].clone()
            } else {
                let swapped = if s < n { s + n } else { s - n };
                coeffs[r - n][swapped].conj()
            }
        });

        // Positivity guard: the Gram matrix M M^H must be well conditioned.
        let mv = m.values();
        let mut gram = vec![C64::default(); w * w];
        for r in 0..w {
            for c in 0..w {
                let mut acc = C64::default();
                for s in 0..w {
                    acc += mv[r * w + s] * mv[c * w + s].conj();
                }
                gram[r * w + c] = acc;
            }
        }
        let eigs = hermitian_eigenvalues(&gram, w);
        let min_metric_eig = eigs[0];
        if min_metric_eig < MIN_METRIC_EIGENVALUE {
            return Err(Error::NotPositiveDefinite {
                point: point.to_string(),
                min_eig: min_metric_eig,
            });
        }

        let m_inv = m.inverse(1e-13).map_err(|e| match e {
            Error::SingularCoframe { detail, .. } => Error::SingularCoframe {
                point: point.to_string(),
                detail,
            },
            other => other,
        })?;

        let phi: Vec<Form> = (0..n)
            .map(|i| {
                let mut f = Form::zero(n, 1);
                for s in 0..w {
                    f = f.add(&Form::basis(n, s, coeffs[i][s].clone()));
                }
                f.compact()
            })
            .collect();
        let phibar: Vec<Form> = phi.iter().map(Form::conj).collect();

        let to_frame: Vec<Form> = (0..w)
            .map(|s| {
                let mut f = Form::zero(n, 1);
                for t in 0..w {
                    f = f.add(&Form::basis(n, t, m_inv.at(s, t).clone()));
                }
                f.compact()
            })
            .collect();
        let to_coord: Vec<Form> = (0..w)
            .map(|t| if t < n { phi[t].clone() } else { phibar[t - n].clone() })
            .collect();

        Ok(FramePack {
            dim: n,
            order,
            point: point.clone(),
            coeffs,
            phi,
            phibar,
            m_inv,
            to_frame,
            to_coord,
            min_metric_eig,
        })
    }

    /// Coordinate components of frame vector `a` (`a < n`: `e_a`, else
    /// `ebar_{a-n}`), as plain values.
    pub fn frame_vector_values(&self, a: usize) -> Vec<C64> {
        let w = 2 * self.dim;
        (0..w).map(|s| self.m_inv.at(s, a).value()).collect()
    }

    /// Same as [`FramePack::frame_vector_values`] but keeping jets.
    pub fn frame_vector_jets(&self, a: usize) -> Vec<Jet2> {
        let w = 2 * self.dim;
        (0..w).map(|s| self.m_inv.at(s, a).clone()).collect()
    }

    pub fn to_frame_basis(&self, f: &Form) -> Form {
        f.substitute(&self.to_frame)
    }

    pub fn to_coord_basis(&self, f: &Form) -> Form {
        f.substitute(&self.to_coord)
    }

    /// Hermitian Gram matrix `g[a][b] = sum_i a_ia conj(a_ib)` over the
    /// coordinate covectors; this is the metric tensor whenever the coframe
    /// has no `dzbar` block.
    pub fn metric_values(&self) -> Vec<C64> {
        let n = self.dim;
        let mut g = vec![C64::default(); n * n];
        for a in 0..n {
            for b in 0..n {
                let mut acc = C64::default();
                for i in 0..n {
                    acc += self.coeffs[i][a].value() * self.coeffs[i][b].value().conj();
                }
                g[a * n + b] = acc;
            }
        }
        g
    }

    /// True when every `dzbar` coefficient of the coframe vanishes, i.e.
    /// the coordinate grading and the frame grading agree.
    pub fn standard_grading(&self) -> bool {
        let n = self.dim;
        self.coeffs
            .iter()
            .all(|row| row[n..].iter().all(|j| j.value().norm() < 1e-13))
    }
}

/// Connection-level data: everything up to first derivatives of the metric.
pub struct ConnectionPack {
    pub frame: FramePack,
    pub theta: FormMatrix,
    /// Torsion two-forms, coordinate basis, pure `(2,0)` by construction.
    pub tau: Vec<Form>,
    pub torsion: TorsionTensor,
    pub gamma_prime: FormMatrix,
    pub gamma_double: FormMatrix,
    pub gamma: FormMatrix,
    /// Frame components of the torsion trace one-form.
    pub eta: Vec<Jet2>,
    /// The same one-form over the coordinate covectors.
    pub eta_form: Form,
    pub theta1: FormMatrix,
    pub theta2: FormMatrix,
    pub theta_b: FormMatrix,
    /// Magnitude of the non-`(2,0)` part of `d phi + theta^t ^ phi`.
    pub tau_type_residual: f64,
    /// Magnitude of the `(0,2)` part of `d phi` in the frame grading.
    pub integrability_residual: f64,
}

impl ConnectionPack {
    pub fn new(cf: &dyn CoframeField, point: &ChartPoint, order: usize) -> Result<Self> {
        let frame = FramePack::new(cf, point, order)?;
        Self::from_frame(frame)
    }

    pub fn from_frame(frame: FramePack) -> Result<Self> {
        let n = frame.dim;

        // d phi in the coordinate basis, then over the frame basis.
        let dphi: Vec<Form> = frame.phi.iter().map(Form::d).collect::<Result<_>>()?;
        let dphi_f: Vec<Form> = dphi.iter().map(|f| frame.to_frame_basis(f)).collect();

        let mut integrability_residual = 0.0f64;
        for f in &dphi_f {
            integrability_residual =
                integrability_residual.max(f.max_abs_where(|p, q| p == 0 && q == 2));
        }
        if integrability_residual > INTEGRABILITY_TOL {
            return Err(Error::NonIntegrable {
                point: frame.point.to_string(),
                magnitude: integrability_residual,
            });
        }

        // Solve for the (0,1) block: (d phi_k)^{1,1} = sum_{j,m} s_{jkm}
        // phi_j ^ phibar_m gives theta''_{jk} = sum_m s_{jkm} phibar_m,
        // then close up to a skew-Hermitian matrix.
        let mut theta = FormMatrix::zero(n, n, n, 1);
        for j in 0..n {
            for k in 0..n {
                let mut entry = Form::zero(n, 1);
                for m in 0..n {
                    let mask = (1u32 << j) | (1u32 << (n + m));
                    let s_jkm = dphi_f[k].coefficient(mask);
                    if s_jkm.max_abs() == 0.0 {
                        continue;
                    }
                    entry = entry.add(&frame.phibar[m].scale_jet(&s_jkm));
                }
                theta.set(j, k, entry.compact());
            }
        }
        let double_part = theta.clone();
        for j in 0..n {
            for k in 0..n {
                let prime = double_part.at(k, j).conj().neg();
                let merged = double_part.at(j, k).add(&prime);
                theta.set(j, k, merged);
            }
        }

        // tau = d phi + theta^t ^ phi, projected onto type (2,0); whatever
        // falls outside (2,0) is the structure-equation residual.
        let phi_col = FormMatrix::from_fn(n, 1, |r, _| frame.phi[r].clone());
        let correction = theta.transpose().wedge_mul(&phi_col);
        let mut tau = Vec::with_capacity(n);
        let mut tau_type_residual = 0.0f64;
        let dim = n;
        let jet_order = frame.order.saturating_sub(1);
        let mut torsion = TorsionTensor::zero(n, dim, jet_order);
        for k in 0..n {
            let raw = dphi[k].add(correction.at(k, 0));
            let raw_f = frame.to_frame_basis(&raw);
            tau_type_residual =
                tau_type_residual.max(raw_f.max_abs_where(|p, q| !(p == 2 && q == 0)));
            let tau_f = raw_f.type_project(2, 0)?;
            for i in 0..n {
                for j in i + 1..n {
                    let mask = (1u32 << i) | (1u32 << j);
                    let coeff = tau_f.coefficient(mask);
                    let t = coeff.scale(C64::new(0.5, 0.0)).pad_to(jet_order);
                    torsion.set(k, j, i, t.neg());
                    torsion.set(k, i, j, t);
                }
            }
            tau.push(frame.to_coord_basis(&tau_f));
        }

        // gamma, eta, Levi-Civita blocks, Bismut matrix.
        let mut gamma_prime = FormMatrix::zero(n, n, n, 1);
        let mut gamma_double = FormMatrix::zero(n, n, n, 1);
        let mut theta2 = FormMatrix::zero(n, n, n, 1);
        for i in 0..n {
            for j in 0..n {
                let mut gp = Form::zero(n, 1);
                let mut gd = Form::zero(n, 1);
                let mut t2 = Form::zero(n, 1);
                for k in 0..n {
                    gp = gp.add(&frame.phi[k].scale_jet(torsion.at(j, i, k)));
                    gd = gd.add(&frame.phibar[k].scale_jet(&torsion.at(i, j, k).conj()));
                    t2 = t2.add(&frame.phi[k].scale_jet(&torsion.at(k, i, j).conj()));
                }
                gamma_prime.set(i, j, gp.compact());
                gamma_double.set(i, j, gd.neg().compact());
                theta2.set(i, j, t2.compact());
            }
        }
        let gamma = gamma_prime.add(&gamma_double);
        let theta1 = theta.add(&gamma);
        let theta_b = theta.add(&gamma.scale(C64::new(2.0, 0.0)));

        let mut eta = Vec::with_capacity(n);
        for j in 0..n {
            let mut acc = Jet2::zero(dim, jet_order);
            for i in 0..n {
                acc = acc.add(torsion.at(i, i, j));
            }
            eta.push(acc);
        }
        let mut eta_form = Form::zero(n, 1);
        for j in 0..n {
            eta_form = eta_form.add(&frame.phi[j].scale_jet(&eta[j]));
        }

        Ok(ConnectionPack {
            frame,
            theta,
            tau,
            torsion,
            gamma_prime,
            gamma_double,
            gamma,
            eta,
            eta_form,
            theta1,
            theta2,
            theta_b,
            tau_type_residual,
            integrability_residual,
        })
    }

    /// The metric two-form `omega = i sum phi_i ^ phibar_i` (coordinate basis).
    pub fn kaehler_form(&self) -> Form {
        let n = self.frame.dim;
        let mut omega = Form::zero(n, 2);
        for i in 0..n {
            omega = omega.add(&self.frame.phi[i].wedge(&self.frame.phibar[i]));
        }
        omega.scale(C64::new(0.0, 1.0))
    }

    /// Pointwise `|eta|^2 = sum |eta_j|^2` in the unitary frame.
    pub fn eta_norm_sq(&self) -> f64 {
        self.eta.iter().map(|j| j.value().norm_sqr()).sum()
    }
}

/// Which connection a curvature or covariant derivative refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConnectionKind {
    Chern,
    Riemannian,
    Bismut,
}

/// Curvature matrices of all four connection blocks.
pub struct CurvaturePack {
    pub chern: FormMatrix,
    pub riem1: FormMatrix,
    pub riem2: FormMatrix,
    pub bismut: FormMatrix,
}

/// `d theta - theta ^ theta` for each connection, with the mixed terms of
/// the Levi-Civita blocks.
pub fn curvature_pack(pack: &ConnectionPack) -> Result<CurvaturePack> {
    let chern = pack.theta.d()?.sub(&pack.theta.wedge_mul(&pack.theta));
    let theta2_bar = pack.theta2.conj();
    let theta1_bar = pack.theta1.conj();
    let riem1 = pack
        .theta1
        .d()?
        .sub(&pack.theta1.wedge_mul(&pack.theta1))
        .sub(&theta2_bar.wedge_mul(&pack.theta2));
    let riem2 = pack
        .theta2
        .d()?
        .sub(&pack.theta2.wedge_mul(&pack.theta1))
        .sub(&theta1_bar.wedge_mul(&pack.theta2));
    let bismut = pack.theta_b.d()?.sub(&pack.theta_b.wedge_mul(&pack.theta_b));
    Ok(CurvaturePack { chern, riem1, riem2, bismut })
}

/// Curvature of a single connection matrix, `d theta - theta ^ theta`.
pub fn curvature_of(theta: &FormMatrix) -> Result<FormMatrix> {
    Ok(theta.d()?.sub(&theta.wedge_mul(theta)))
}

/// Largest frame component of a matrix of two-forms: entries are evaluated
/// on all pairs of frame vectors, which makes the residual independent of
/// the chart scaling.
pub fn max_frame_component(pack: &FramePack, m: &FormMatrix) -> f64 {
    let w = 2 * pack.dim;
    let vectors: Vec<Vec<C64>> = (0..w).map(|a| pack.frame_vector_values(a)).collect();
    let mut worst = 0.0f64;
    for r in 0..m.rows {
        for c in 0..m.cols {
            let f = m.at(r, c);
            for a in 0..w {
                for b in a + 1..w {
                    worst = worst.max(f.eval2(&vectors[a], &vectors[b]).norm());
                }
            }
        }
    }
    worst
}

/// Largest frame component of a list of two-forms.
pub fn max_frame_component_vec(pack: &FramePack, forms: &[Form]) -> f64 {
    let w = 2 * pack.dim;
    let vectors: Vec<Vec<C64>> = (0..w).map(|a| pack.frame_vector_values(a)).collect();
    let mut worst = 0.0f64;
    for f in forms {
        for a in 0..w {
            for b in a + 1..w {
                worst = worst.max(f.eval2(&vectors[a], &vectors[b]).norm());
            }
        }
    }
    worst
}

/// Covariant derivatives of the torsion tensor with respect to the
/// connection with frame matrix `conn`.
///
/// Returns the flat array `D[((k n + i) n + j) 2n + a] = T^k_{ij, a}` with
/// `a < n` the `e_a` directions and `a >= n` the conjugate directions.
pub fn covariant_torsion_derivatives(
    pack: &ConnectionPack,
    conn: &FormMatrix,
) -> Result<Vec<C64>> {
    let n = pack.frame.dim;
    let w = 2 * n;
    let vectors: Vec<Vec<C64>> = (0..w).map(|a| pack.frame.frame_vector_values(a)).collect();
    let mut out = vec![C64::default(); n * n * n * w];
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                // nabla T^k_ij = d T^k_ij + sum_r T^r_ij conn_rk
                //               - sum_r conn_ir T^k_rj - sum_r conn_jr T^k_ir
                let mut covariant = Form::scalar(n, pack.torsion.at(k, i, j).clone()).d()?;
                for r in 0..n {
                    covariant = covariant.add(&conn.at(r, k).scale(pack.torsion.value(r, i, j)));
                    covariant = covariant.sub(&conn.at(i, r).scale(pack.torsion.value(k, r, j)));
                    covariant = covariant.sub(&conn.at(j, r).scale(pack.torsion.value(k, i, r)));
                }
                for a in 0..w {
                    out[((k * n + i) * n + j) * w + a] = covariant.eval1(&vectors[a]);
                }
            }
        }
    }
    Ok(out)
}

/// Covariant derivatives `eta_{r, a}` of the trace one-form.
pub fn covariant_eta_derivatives(pack: &ConnectionPack, conn: &FormMatrix) -> Result<Vec<C64>> {
    let n = pack.frame.dim;
    let w = 2 * n;
    let vectors: Vec<Vec<C64>> = (0..w).map(|a| pack.frame.frame_vector_values(a)).collect();
    let mut out = vec![C64::default(); n * w];
    for r in 0..n {
        let mut covariant = Form::scalar(n, pack.eta[r].clone()).d()?;
        for s in 0..n {
            covariant = covariant.sub(&conn.at(r, s).scale(pack.eta[s].value()));
        }
        for a in 0..w {
            out[r * w + a] = covariant.eval1(&vectors[a]);
        }
    }
    Ok(out)
}

/// Connection matrix over the full complexified frame `(e, ebar)`.
pub fn full_connection(pack: &ConnectionPack, kind: ConnectionKind) -> FormMatrix {
    let n = pack.frame.dim;
    let w = 2 * n;
    let (top_left, top_right, bottom_left, bottom_right) = match kind {
        ConnectionKind::Chern => (
            pack.theta.clone(),
            FormMatrix::zero(n, n, n, 1),
            FormMatrix::zero(n, n, n, 1),
            pack.theta.conj(),
        ),
        ConnectionKind::Bismut => (
            pack.theta_b.clone(),
            FormMatrix::zero(n, n, n, 1),
            FormMatrix::zero(n, n, n, 1),
            pack.theta_b.conj(),
        ),
        ConnectionKind::Riemannian => (
            pack.theta1.clone(),
            pack.theta2.conj(),
            pack.theta2.clone(),
            pack.theta1.conj(),
        ),
    };
    FormMatrix::from_fn(w, w, |r, c| match (r < n, c < n) {
        (true, true) => top_left.at(r, c).clone(),
        (true, false) => top_right.at(r, c - n).clone(),
        (false, true) => bottom_left.at(r - n, c).clone(),
        (false, false) => bottom_right.at(r - n, c - n).clone(),
    })
}

/// Torsion two-forms of an arbitrary metric connection over the full frame:
/// `tau_c = d Phi_c + sum_b omega_bc ^ Phi_b` with `Phi = (phi, phibar)`.
pub fn torsion_two_forms(pack: &ConnectionPack, omega: &FormMatrix) -> Result<Vec<Form>> {
    let n = pack.frame.dim;
    let w = 2 * n;
    let mut out = Vec::with_capacity(w);
    for c in 0..w {
        let base = if c < n { &pack.frame.phi[c] } else { &pack.frame.phibar[c - n] };
        let mut tau = base.d()?;
        for b in 0..w {
            let phi_b = if b < n { &pack.frame.phi[b] } else { &pack.frame.phibar[b - n] };
            tau = tau.add(&omega.at(b, c).wedge(phi_b));
        }
        out.push(tau);
    }
    Ok(out)
}

/// Components of a vector-valued torsion two-form over the full frame,
/// kept as jets so they can be differentiated once more.
pub struct RealTorsion {
    pub n: usize,
    /// `comps[(c * 2n + a) * 2n + b] = tau_c(E_a, E_b)`.
    pub comps: Vec<Jet2>,
}

impl RealTorsion {
    pub fn at(&self, c: usize, a: usize, b: usize) -> &Jet2 {
        let w = 2 * self.n;
        &self.comps[(c * w + a) * w + b]
    }

    pub fn value(&self, c: usize, a: usize, b: usize) -> C64 {
        self.at(c, a, b).value()
    }

    /// Full metric contraction of the squared norm. With the frame metric
    /// `<e_i, ebar_j> = delta_ij` the dual pairing swaps barred and
    /// unbarred slots.
    pub fn norm_sq(&self) -> C64 {
        let w = 2 * self.n;
        let swap = |a: usize| (a + self.n) % w;
        let mut acc = C64::default();
        for c in 0..w {
            for a in 0..w {
                for b in 0..w {
                    acc += self.value(c, a, b) * self.value(swap(c), swap(a), swap(b));
                }
            }
        }
        acc
    }

    /// Defect of total skew symmetry `<T(X,Y),Z> = -<T(X,Z),Y>`.
    pub fn skew_symmetry_defect(&self) -> f64 {
        let w = 2 * self.n;
        let swap = |a: usize| (a + self.n) % w;
        let mut worst = 0.0f64;
        for a in 0..w {
            for b in 0..w {
                for c in 0..w {
                    let lhs = self.value(swap(c), a, b);
                    let rhs = -self.value(swap(b), a, c);
                    worst = worst.max((lhs - rhs).norm());
                }
            }
        }
        worst
    }
}

/// Evaluates the torsion two-forms of `omega` on all frame pairs, with jets.
pub fn real_torsion_components(pack: &ConnectionPack, omega: &FormMatrix) -> Result<RealTorsion> {
    let n = pack.frame.dim;
    let w = 2 * n;
    let taus = torsion_two_forms(pack, omega)?;
    let vectors: Vec<Vec<Jet2>> = (0..w).map(|a| pack.frame.frame_vector_jets(a)).collect();
    let mut comps = vec![Jet2::zero(n, 0); w * w * w];
    for c in 0..w {
        for a in 0..w {
            for b in 0..w {
                comps[(c * w + a) * w + b] = eval2_jets(&taus[c], &vectors[a], &vectors[b]);
            }
        }
    }
    Ok(RealTorsion { n, comps })
}

/// Degree-2 form evaluated on jet-valued vectors (keeps derivatives).
fn eval2_jets(f: &Form, v: &[Jet2], w: &[Jet2]) -> Jet2 {
    let dim = v[0].dim();
    let mut acc = Jet2::zero(dim, v[0].order().min(2));
    for (mask, coeff) in f.terms() {
        let a = mask.trailing_zeros() as usize;
        let b = (mask & (mask - 1)).trailing_zeros() as usize;
        let pair = v[a].mul(&w[b]).sub(&v[b].mul(&w[a]));
        acc = acc.add(&coeff.mul(&pair));
    }
    acc
}

/// Max component of the covariant derivative of a full-frame tensor
/// `S^c_{ab}` with respect to the connection matrix `omega` (all three
/// indices transform in the frame representation).
pub fn full_tensor_covariant_residual(
    pack: &ConnectionPack,
    tensor: &RealTorsion,
    omega: &FormMatrix,
) -> Result<f64> {
    let n = pack.frame.dim;
    let w = 2 * n;
    let vectors: Vec<Vec<C64>> = (0..w).map(|a| pack.frame.frame_vector_values(a)).collect();
    let mut worst = 0.0f64;
    for c in 0..w {
        for a in 0..w {
            for b in 0..w {
                let mut covariant = Form::scalar(n, tensor.at(c, a, b).clone()).d()?;
                for r in 0..w {
                    covariant = covariant.add(&omega.at(r, c).scale(tensor.value(r, a, b)));
                    covariant = covariant.sub(&omega.at(a, r).scale(tensor.value(c, r, b)));
                    covariant = covariant.sub(&omega.at(b, r).scale(tensor.value(c, a, r)));
                }
                for d in 0..w {
                    worst = worst.max(covariant.eval1(&vectors[d]).norm());
                }
            }
        }
    }
    Ok(worst)
}

/// Residual of the auxiliary-connection parallelism of the Bismut torsion:
/// the combination `(2/3) LeviCivita + (1/3) Bismut` must make `T^b`
/// parallel whenever the Bismut curvature vanishes.
pub fn agricola_friedrich_residual(pack: &ConnectionPack) -> Result<f64> {
    let omega_b = full_connection(pack, ConnectionKind::Bismut);
    let omega_lc = full_connection(pack, ConnectionKind::Riemannian);
    let t_b = real_torsion_components(pack, &omega_b)?;
    let two_thirds = C64::new(2.0 / 3.0, 0.0);
    let one_third = C64::new(1.0 / 3.0, 0.0);
    let omega_prime = omega_lc.scale(two_thirds).add(&omega_b.scale(one_third));
    full_tensor_covariant_residual(pack, &t_b, &omega_prime)
}
