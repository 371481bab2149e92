//! Built-in Hermitian models with chart domains, flatness claims, and
//! closed-form reference data.
//!
//! Every model carries *claims* (flatness flags) that the identity suite
//! verifies rather than assumes, a seeded sampler that draws chart points
//! away from singular loci, and, where a closed form is known, a reference
//! torsion used to cross-check the computed one.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::connection::{CoframeField, ExprCoframe};
use crate::error::{Error, Result};
use crate::expr::{holomorphic_derivative, parse, Expr};
use crate::jets::{ChartPoint, Jet2, C64};
use crate::linalg::{complex_det, jet_cholesky, JetMatrix};

/// Flatness / Kaehler claims attached to a model. The identity suite treats
/// a failed claim as a test failure.
#[derive(Clone, Copy, Debug, Default)]
pub struct ModelFlags {
    pub chern_flat: bool,
    pub riemann_flat: bool,
    pub bismut_flat: bool,
    pub kaehler: bool,
}

/// Seeded domain sampler. Candidates are drawn from simple boxes or bands
/// and then rejected against the model's own domain predicate.
#[derive(Clone, Debug)]
pub enum Sampler {
    /// Each coordinate uniform in the complex disc of the given radius.
    Polydisc { radius: f64 },
    /// Total norm of the coordinate vector constrained to `(rmin, rmax)`.
    Annulus { rmin: f64, rmax: f64 },
    /// Per-coordinate modulus bands `|z_i|` in `(lo, hi)`.
    Bands { bounds: Vec<(f64, f64)> },
    /// Concatenation of two samplers over explicit coordinate blocks.
    Product { a: Box<Sampler>, a_dim: usize, b: Box<Sampler>, b_dim: usize },
}

impl Sampler {
    fn draw_into(&self, rng: &mut ChaCha8Rng, dim: usize, out: &mut Vec<C64>) {
        match self {
            Sampler::Polydisc { radius } => {
                for _ in 0..dim {
                    out.push(draw_disc(rng, *radius));
                }
            }
            Sampler::Annulus { rmin, rmax } => loop {
                let mark = out.len();
                for _ in 0..dim {
                    out.push(draw_disc(rng, *rmax));
                }
                let norm: f64 = out[mark..].iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
                if norm > *rmin && norm < *rmax {
                    break;
                }
                out.truncate(mark);
            },
            Sampler::Bands { bounds } => {
                for &(lo, hi) in bounds {
                    loop {
                        let z = draw_disc(rng, hi);
                        if z.norm() > lo && z.norm() < hi {
                            out.push(z);
                            break;
                        }
                    }
                }
            }
            Sampler::Product { a, a_dim, b, b_dim } => {
                a.draw_into(rng, *a_dim, out);
                b.draw_into(rng, *b_dim, out);
            }
        }
    }

    pub fn draw(&self, rng: &mut ChaCha8Rng, dim: usize) -> ChartPoint {
        let mut coords = Vec::with_capacity(dim);
        self.draw_into(rng, dim, &mut coords);
        ChartPoint::new(coords).expect("sampler produced invalid point")
    }
}

fn draw_disc(rng: &mut ChaCha8Rng, radius: f64) -> C64 {
    loop {
        let re = rng.gen_range(-radius..radius);
        let im = rng.gen_range(-radius..radius);
        if re * re + im * im < radius * radius {
            return C64::new(re, im);
        }
    }
}

/// Closed-form torsion oracle: returns the flattened `n^3` array `T^k_ij`.
pub type TorsionOracle = Arc<dyn Fn(&ChartPoint) -> Result<Vec<C64>> + Send + Sync>;

/// A chart model: coframe field plus metadata.
#[derive(Clone)]
pub struct HermitianModel {
    pub name: String,
    pub dim: usize,
    pub coframe: Arc<dyn CoframeField>,
    pub flags: ModelFlags,
    pub sampler: Sampler,
    pub reference_torsion: Option<TorsionOracle>,
}

impl HermitianModel {
    /// Draws `count` in-domain points; fails when the acceptance rate of
    /// the rejection sampler drops below 10%.
    pub fn sample_points(&self, seed: u64, count: usize) -> Result<Vec<ChartPoint>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut points = Vec::with_capacity(count);
        let mut attempted = 0usize;
        while points.len() < count {
            attempted += 1;
            if attempted > 10 * count.max(10) {
                return Err(Error::SamplingFailed { accepted: points.len(), attempted });
            }
            let p = self.sampler.draw(&mut rng, self.dim);
            if self.coframe.in_domain(&p) {
                points.push(p);
            }
        }
        Ok(points)
    }
}

/// Flat `C^n` with the standard coframe `phi_i = dz_i`.
pub fn euclidean(dim: usize) -> Result<HermitianModel> {
    let entries = (0..dim)
        .map(|i| {
            (0..2 * dim)
                .map(|s| if s == i { Some(Expr::real(1.0)) } else { None })
                .collect()
        })
        .collect();
    let coframe = ExprCoframe::new(dim, entries, None)?;
    Ok(HermitianModel {
        name: format!("euclidean(dim={dim})"),
        dim,
        coframe: Arc::new(coframe),
        flags: ModelFlags { chern_flat: true, riemann_flat: true, bismut_flat: true, kaehler: true },
        sampler: Sampler::Polydisc { radius: 2.0 },
        reference_torsion: None,
    })
}

/// The standard metric on `C^2` minus the origin, scaled by `c > 0`:
/// coframe `phi_i = sqrt(c) dz_i / |z|`.
pub fn hopf_surface(c: f64) -> Result<HermitianModel> {
    if c <= 0.0 {
        return Err(Error::InvalidModel(format!("scale must be positive, got {c}")));
    }
    let n = 2;
    let norm_sq = parse("z1*conj(z1)+z2*conj(z2)", n)?;
    let factor = Expr::real(c.sqrt()).div(norm_sq.clone().sqrt());
    let entries = vec![
        vec![Some(factor.clone()), None, None, None],
        vec![None, Some(factor), None, None],
    ];
    let domain = norm_sq.sub(Expr::real(1e-12));
    let coframe = ExprCoframe::new(n, entries, Some(domain))?;
    let scale = 2.0 * c.sqrt();
    let reference: TorsionOracle = Arc::new(move |p: &ChartPoint| {
        let z1 = p.coord(0);
        let z2 = p.coord(1);
        let norm = (z1.norm_sqr() + z2.norm_sqr()).sqrt();
        if norm == 0.0 {
            return Err(Error::OutsideDomain { point: p.to_string() });
        }
        let t1 = z2.conj() / (scale * norm);
        let t2 = -z1.conj() / (scale * norm);
        let mut t = vec![C64::default(); 8];
        t[idx3(2, 0, 0, 1)] = t1;
        t[idx3(2, 0, 1, 0)] = -t1;
        t[idx3(2, 1, 0, 1)] = t2;
        t[idx3(2, 1, 1, 0)] = -t2;
        Ok(t)
    });
    Ok(HermitianModel {
        name: format!("hopf(c={c})"),
        dim: n,
        coframe: Arc::new(coframe),
        flags: ModelFlags { bismut_flat: true, ..Default::default() },
        sampler: Sampler::Annulus { rmin: 0.5, rmax: 2.0 },
        reference_torsion: Some(reference),
    })
}

/// Hopf coframe with one entry perturbed by `eps * dz_2`; keeps the
/// Bismut-flat claim so the suite can demonstrate a detected failure.
pub fn hopf_perturbed(eps: f64) -> Result<HermitianModel> {
    let n = 2;
    let norm_sq = parse("z1*conj(z1)+z2*conj(z2)", n)?;
    let factor = Expr::real(1.0).div(norm_sq.clone().sqrt());
    let entries = vec![
        vec![Some(factor.clone()), Some(Expr::real(eps)), None, None],
        vec![None, Some(factor), None, None],
    ];
    let domain = norm_sq.sub(Expr::real(1e-12));
    let coframe = ExprCoframe::new(n, entries, Some(domain))?;
    Ok(HermitianModel {
        name: format!("hopf-perturbed(eps={eps})"),
        dim: n,
        coframe: Arc::new(coframe),
        flags: ModelFlags { bismut_flat: true, ..Default::default() },
        sampler: Sampler::Annulus { rmin: 0.5, rmax: 2.0 },
        reference_torsion: None,
    })
}

fn idx3(n: usize, k: usize, i: usize, j: usize) -> usize {
    (k * n + i) * n + j
}

/// Exponentially twisted flat metric on a domain of `C^2`:
/// `phi_1 = e^f dz_1`, `phi_2 = e^h dz_2` for holomorphic `f`, `h`.
pub fn boothby(f: Expr, h: Expr) -> Result<HermitianModel> {
    let n = 2;
    for (name, e) in [("f", &f), ("h", &h)] {
        if !e.is_conj_free() {
            return Err(Error::InvalidModel(format!("{name} must be holomorphic (no conj)")));
        }
        if e.max_var().unwrap_or(0) >= n {
            return Err(Error::InvalidModel(format!("{name} uses variables beyond z2")));
        }
    }
    let entries = vec![
        vec![Some(f.clone().exp()), None, None, None],
        vec![None, Some(h.clone().exp()), None, None],
    ];
    let coframe = ExprCoframe::new(n, entries, None)?;

    // Kaehler iff df/dz2 and dh/dz1 vanish; verified at seeded samples.
    let mut rng = ChaCha8Rng::seed_from_u64(0xB007);
    let mut kaehler = true;
    for _ in 0..8 {
        let p = ChartPoint::new(vec![draw_disc(&mut rng, 1.2), draw_disc(&mut rng, 1.2)])?;
        let fj = f.eval_jet(&p, 1)?;
        let hj = h.eval_jet(&p, 1)?;
        if fj.d1(1).norm() > 1e-12 || hj.d1(0).norm() > 1e-12 {
            kaehler = false;
            break;
        }
    }

    let f_ref = f.clone();
    let h_ref = h.clone();
    let reference: TorsionOracle = Arc::new(move |p: &ChartPoint| {
        let fj = f_ref.eval_jet(p, 1)?;
        let hj = h_ref.eval_jet(p, 1)?;
        let t1 = -0.5 * fj.d1(1) * (-hj.value()).exp();
        let t2 = 0.5 * hj.d1(0) * (-fj.value()).exp();
        let mut t = vec![C64::default(); 8];
        t[idx3(2, 0, 0, 1)] = t1;
        t[idx3(2, 0, 1, 0)] = -t1;
        t[idx3(2, 1, 0, 1)] = t2;
        t[idx3(2, 1, 1, 0)] = -t2;
        Ok(t)
    });

    Ok(HermitianModel {
        name: format!("boothby(f={},h={})", f.print(), h.print()),
        dim: n,
        coframe: Arc::new(coframe),
        flags: ModelFlags { chern_flat: true, kaehler, ..Default::default() },
        sampler: Sampler::Polydisc { radius: 1.5 },
        reference_torsion: Some(reference),
    })
}

/// The complete flat-Chern metric on all of `C^2`:
/// `phi_1 = dz_1`, `phi_2 = dz_2 - 2 z_1 z_2 dz_1`.
pub fn complete_chern_flat() -> Result<HermitianModel> {
    let n = 2;
    let entries = vec![
        vec![Some(Expr::real(1.0)), None, None, None],
        vec![
            Some(Expr::real(2.0).neg().mul(Expr::var(0)).mul(Expr::var(1))),
            Some(Expr::real(1.0)),
            None,
            None,
        ],
    ];
    let coframe = ExprCoframe::new(n, entries, None)?;
    let reference: TorsionOracle = Arc::new(move |p: &ChartPoint| {
        let x = p.coord(0);
        let mut t = vec![C64::default(); 8];
        t[idx3(2, 1, 0, 1)] = x;
        t[idx3(2, 1, 1, 0)] = -x;
        Ok(t)
    });
    Ok(HermitianModel {
        name: "complete-chern-flat".into(),
        dim: n,
        coframe: Arc::new(coframe),
        flags: ModelFlags { chern_flat: true, ..Default::default() },
        sampler: Sampler::Polydisc { radius: 2.0 },
        reference_torsion: Some(reference),
    })
}

/// Coframe field for the Riemannian-flat family with an extra pointwise
/// nondegeneracy predicate (the wedge of the two coframe legs must not
/// vanish).
struct NondegenerateCoframe {
    inner: ExprCoframe,
}

impl CoframeField for NondegenerateCoframe {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn in_domain(&self, point: &ChartPoint) -> bool {
        if !self.inner.in_domain(point) {
            return false;
        }
        let Ok(rows) = self.inner.coefficients(point, 0) else { return false };
        let n = self.dim();
        let a: Vec<C64> = (0..n * n)
            .map(|k| rows[k / n][k % n].value())
            .collect();
        complex_det(&a, n).norm() > 1e-10
    }

    fn coefficients(&self, point: &ChartPoint, order: usize) -> Result<Vec<Vec<Jet2>>> {
        self.inner.coefficients(point, order)
    }
}

/// Riemannian-flat surfaces determined by three holomorphic functions:
///
/// ```text
/// phi_1 = s/(sqrt(2 lambda)) du + s (i conj(v) - u conj(f)) / (sqrt(2) lambda^{3/2}) df
/// phi_2 = s/(sqrt(2 lambda)) dv - s (i conj(u) + v conj(f)) / (sqrt(2) lambda^{3/2}) df
/// ```
///
/// with `lambda = 1 + |f|^2` and an overall scale `s`. The named presets
/// `g1`, `g2` use `s = sqrt(2)` so their metric tensors take the familiar
/// diagonal-normalized shape.
pub fn riemann_flat_triple(u: Expr, v: Expr, f: Expr, scale: f64, name: &str) -> Result<HermitianModel> {
    let n = 2;
    for (label, e) in [("u", &u), ("v", &v), ("f", &f)] {
        if !e.is_conj_free() {
            return Err(Error::InvalidModel(format!("{label} must be holomorphic (no conj)")));
        }
    }
    let lambda = Expr::real(1.0).add(f.clone().mul(f.clone().conj()));
    let sqrt_lambda = lambda.clone().sqrt();
    let c1 = Expr::real(scale / std::f64::consts::SQRT_2);
    let i_lit = Expr::literal(C64::new(0.0, 1.0));
    // iv' - u f' and iu' + v f' conjugate combinations
    let top_mix = i_lit.clone().mul(v.clone().conj()).sub(u.clone().mul(f.clone().conj()));
    let bot_mix = i_lit.mul(u.clone().conj()).add(v.clone().mul(f.clone().conj()));

    let mut entries: Vec<Vec<Option<Expr>>> = vec![vec![None, None, None, None], vec![None, None, None, None]];
    for b in 0..n {
        let du_b = holomorphic_derivative(&u, b)?;
        let dv_b = holomorphic_derivative(&v, b)?;
        let df_b = holomorphic_derivative(&f, b)?;
        let a0 = c1
            .clone()
            .mul(du_b.add(top_mix.clone().mul(df_b.clone()).div(lambda.clone())))
            .div(sqrt_lambda.clone());
        let a1 = c1
            .clone()
            .mul(dv_b.sub(bot_mix.clone().mul(df_b).div(lambda.clone())))
            .div(sqrt_lambda.clone());
        entries[0][b] = Some(a0);
        entries[1][b] = Some(a1);
    }
    let coframe = NondegenerateCoframe { inner: ExprCoframe::new(n, entries, None)? };
    Ok(HermitianModel {
        name: name.to_string(),
        dim: n,
        coframe: Arc::new(coframe),
        flags: ModelFlags { riemann_flat: true, ..Default::default() },
        sampler: Sampler::Polydisc { radius: 1.0 },
        reference_torsion: None,
    })
}

/// Preset `(u, v, f) = (z1, 0, z2)` on the punctured-first-factor domain.
pub fn g1() -> Result<HermitianModel> {
    let mut m = riemann_flat_triple(
        Expr::var(0),
        Expr::real(0.0),
        Expr::var(1),
        std::f64::consts::SQRT_2,
        "g1",
    )?;
    m.sampler = Sampler::Bands { bounds: vec![(0.3, 1.5), (0.0, 1.2)] };
    Ok(m)
}

/// Preset `(u, v, f) = (z1, z2, i z1 z2)`, avoiding the `|z2| = 1` wall.
pub fn g2() -> Result<HermitianModel> {
    let f = Expr::literal(C64::new(0.0, 1.0)).mul(Expr::var(0)).mul(Expr::var(1));
    let mut m = riemann_flat_triple(Expr::var(0), Expr::var(1), f, std::f64::consts::SQRT_2, "g2")?;
    m.sampler = Sampler::Bands { bounds: vec![(0.0, 1.2), (0.0, 0.8)] };
    Ok(m)
}

/// One monomial `coeff * prod(factors)` where each factor is a coordinate
/// slot (`< n` plain, `>= n` conjugated).
#[derive(Clone, Debug)]
struct Monomial {
    coeff: C64,
    factors: Vec<usize>,
}

/// Polynomial-perturbed metric `g = I + eps * H(z, zbar)` with `H` a random
/// Hermitian-matrix-valued polynomial of degree <= 2, normalized so the
/// metric stays positive definite on the unit polydisc.
pub struct PerturbedMetricCoframe {
    dim: usize,
    eps: f64,
    /// Upper-triangle (and diagonal) entries of the random polynomial `P`;
    /// `H = P + P^H` after normalization.
    entries: Vec<Vec<Vec<Monomial>>>,
}

impl PerturbedMetricCoframe {
    pub fn new(seed: u64, eps: f64, dim: usize) -> Result<Self> {
        if !(0.0..0.2).contains(&eps) && eps != 0.0 {
            return Err(Error::InvalidModel(format!("eps must be in [0, 0.2), got {eps}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = 2 * dim;
        // all monomials of degree <= 2 over (z, zbar)
        let mut monos: Vec<Vec<usize>> = vec![vec![]];
        for a in 0..w {
            monos.push(vec![a]);
            for b in a..w {
                monos.push(vec![a, b]);
            }
        }
        let norm = 2.0 * monos.len() as f64 * dim as f64;
        let mut entries = Vec::with_capacity(dim * dim);
        for _r in 0..dim {
            let mut row = Vec::with_capacity(dim);
            for _c in 0..dim {
                let poly: Vec<Monomial> = monos
                    .iter()
                    .map(|m| Monomial {
                        coeff: C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) / norm,
                        factors: m.clone(),
                    })
                    .collect();
                row.push(poly);
            }
            entries.push(row);
        }
        Ok(PerturbedMetricCoframe { dim, eps, entries })
    }

    fn poly_jet(&self, poly: &[Monomial], point: &ChartPoint, order: usize) -> Result<Jet2> {
        let n = self.dim;
        let mut acc = Jet2::zero(n, order);
        for m in poly {
            let mut term = Jet2::constant(n, order, m.coeff);
            for &slot in &m.factors {
                let factor = Jet2::coordinate(point, slot % n, slot >= n, order)?;
                term = term.mul(&factor);
            }
            acc = acc.add(&term);
        }
        Ok(acc)
    }
}

impl CoframeField for PerturbedMetricCoframe {
    fn dim(&self) -> usize {
        self.dim
    }

    fn in_domain(&self, point: &ChartPoint) -> bool {
        point.coords().iter().all(|z| z.norm() <= 1.05)
    }

    fn coefficients(&self, point: &ChartPoint, order: usize) -> Result<Vec<Vec<Jet2>>> {
        let n = self.dim;
        // g = I + eps (P + P^H)
        let eps = C64::new(self.eps, 0.0);
        let mut p_jets = Vec::with_capacity(n * n);
        for r in 0..n {
            for c in 0..n {
                p_jets.push(self.poly_jet(&self.entries[r][c], point, order)?);
            }
        }
        let g = JetMatrix::from_fn(n, |r, c| {
            let h = p_jets[r * n + c].add(&p_jets[c * n + r].conj()).scale(eps);
            if r == c {
                Jet2::one(n, order).add(&h)
            } else {
                h
            }
        });
        let l = jet_cholesky(&g).map_err(|e| match e {
            Error::NotPositiveDefinite { min_eig, .. } => Error::NotPositiveDefinite {
                point: point.to_string(),
                min_eig,
            },
            other => other,
        })?;
        // phi_i = sum_a L[a][i] dz_a
        let mut rows = Vec::with_capacity(n);
        for i in 0..n {
            let mut row = Vec::with_capacity(2 * n);
            for a in 0..n {
                row.push(l.at(a, i).clone());
            }
            for _ in 0..n {
                row.push(Jet2::zero(n, order));
            }
            rows.push(row);
        }
        Ok(rows)
    }
}

/// Seeded perturbed metric on the unit polydisc.
pub fn perturbed_metric(seed: u64, eps: f64, dim: usize) -> Result<HermitianModel> {
    let coframe = PerturbedMetricCoframe::new(seed, eps, dim)?;
    let flags = if eps == 0.0 {
        ModelFlags { chern_flat: true, riemann_flat: true, bismut_flat: true, kaehler: true }
    } else {
        ModelFlags::default()
    };
    Ok(HermitianModel {
        name: format!("perturbed(seed={seed},eps={eps},dim={dim})"),
        dim,
        coframe: Arc::new(coframe),
        flags,
        sampler: Sampler::Polydisc { radius: 1.0 },
        reference_torsion: None,
    })
}

/// Block product of two coframe fields on disjoint coordinate groups.
pub struct ProductCoframe {
    pub a: Arc<dyn CoframeField>,
    pub b: Arc<dyn CoframeField>,
}

impl ProductCoframe {
    fn split(&self, point: &ChartPoint) -> Result<(ChartPoint, ChartPoint)> {
        let na = self.a.dim();
        let pa = ChartPoint::new(point.coords()[..na].to_vec())?;
        let pb = ChartPoint::new(point.coords()[na..].to_vec())?;
        Ok((pa, pb))
    }
}

impl CoframeField for ProductCoframe {
    fn dim(&self) -> usize {
        self.a.dim() + self.b.dim()
    }

    fn in_domain(&self, point: &ChartPoint) -> bool {
        match self.split(point) {
            Ok((pa, pb)) => self.a.in_domain(&pa) && self.b.in_domain(&pb),
            Err(_) => false,
        }
    }

    fn coefficients(&self, point: &ChartPoint, order: usize) -> Result<Vec<Vec<Jet2>>> {
        let n = self.dim();
        let na = self.a.dim();
        let nb = self.b.dim();
        let (pa, pb) = self.split(point)?;
        let ca = self.a.coefficients(&pa, order)?;
        let cb = self.b.coefficients(&pb, order)?;
        let zero = Jet2::zero(n, order);
        let mut rows = vec![vec![zero; 2 * n]; n];
        for i in 0..na {
            for s in 0..na {
                rows[i][s] = ca[i][s].embedded(0, n);
                rows[i][n + s] = ca[i][na + s].embedded(0, n);
            }
        }
        for i in 0..nb {
            for s in 0..nb {
                rows[na + i][na + s] = cb[i][s].embedded(na, n);
                rows[na + i][n + na + s] = cb[i][nb + s].embedded(na, n);
            }
        }
        Ok(rows)
    }
}

/// Product of two models on disjoint coordinate blocks.
pub fn product(a: &HermitianModel, b: &HermitianModel) -> HermitianModel {
    let dim = a.dim + b.dim;
    let coframe = ProductCoframe { a: a.coframe.clone(), b: b.coframe.clone() };
    let flags = ModelFlags {
        chern_flat: a.flags.chern_flat && b.flags.chern_flat,
        riemann_flat: a.flags.riemann_flat && b.flags.riemann_flat,
        bismut_flat: a.flags.bismut_flat && b.flags.bismut_flat,
        kaehler: a.flags.kaehler && b.flags.kaehler,
    };
    let reference = match (a.reference_torsion.clone(), b.reference_torsion.clone()) {
        (Some(ra), rb_opt) => {
            let na = a.dim;
            let nb = b.dim;
            let oracle: TorsionOracle = Arc::new(move |p: &ChartPoint| {
                let pa = ChartPoint::new(p.coords()[..na].to_vec())?;
                let pb = ChartPoint::new(p.coords()[na..].to_vec())?;
                let n = na + nb;
                let mut t = vec![C64::default(); n * n * n];
                let ta = ra(&pa)?;
                for k in 0..na {
                    for i in 0..na {
                        for j in 0..na {
                            t[idx3(n, k, i, j)] = ta[idx3(na, k, i, j)];
                        }
                    }
                }
                if let Some(rb) = &rb_opt {
                    let tb = rb(&pb)?;
                    for k in 0..nb {
                        for i in 0..nb {
                            for j in 0..nb {
                                t[idx3(n, na + k, na + i, na + j)] = tb[idx3(nb, k, i, j)];
                            }
                        }
                    }
                }
                Ok(t)
            });
            Some(oracle)
        }
        _ => None,
    };
    HermitianModel {
        name: format!("product({},{})", a.name, b.name),
        dim,
        coframe: Arc::new(coframe),
        flags,
        sampler: Sampler::Product {
            a: Box::new(a.sampler.clone()),
            a_dim: a.dim,
            b: Box::new(b.sampler.clone()),
            b_dim: b.dim,
        },
        reference_torsion: reference,
    }
}

/// `hopf(1) x C`: the three-dimensional product of the punctured-plane
/// metric with a flat line.
pub fn hopf_x_c() -> Result<HermitianModel> {
    let h = hopf_surface(1.0)?;
    let e = euclidean(1)?;
    let mut m = product(&h, &e);
    m.name = "hopf-x-c".into();
    m.sampler = Sampler::Product {
        a: Box::new(Sampler::Annulus { rmin: 0.5, rmax: 2.0 }),
        a_dim: 2,
        b: Box::new(Sampler::Bands { bounds: vec![(0.0, 1.2)] }),
        b_dim: 1,
    };
    Ok(m)
}

/// Orthogonal complex structures on `R^4` compatible with the flat metric
/// and orientation, parametrized by the Riemann sphere: the matrix of
/// `J_z` in the standard frame.
pub fn twistor_matrix(z: C64) -> [[f64; 4]; 4] {
    let denom = z.norm_sqr() + 1.0;
    let a = 2.0 * z.re / denom;
    let b = 2.0 * z.im / denom;
    let c = (z.norm_sqr() - 1.0) / denom;
    // blocks: [[aE, bE - cI], [bE + cI, -aE]] with E = [[0,1],[-1,0]]
    [
        [0.0, a, -c, b],
        [-a, 0.0, -b, -c],
        [c, b, 0.0, -a],
        [-b, c, a, 0.0],
    ]
}

/// Parses a model reference of the form `name` or `name:key=value,...`
/// (`name(key=value,...)` is accepted too).
pub fn parse_model_ref(text: &str) -> Result<HermitianModel> {
    let text = text.trim();
    let (name, args) = split_model_ref(text)?;
    let get = |key: &str| -> Option<&str> {
        args.iter()
            .find(|(k, _)| *k == key)
            .map(|(_, v)| *v)
    };
    let num = |key: &str, default: f64| -> Result<f64> {
        match get(key) {
            None => Ok(default),
            Some(v) => v
                .parse::<f64>()
                .map_err(|_| Error::InvalidModel(format!("bad numeric value for {key}: {v}"))),
        }
    };
    match name {
        "euclidean" => euclidean(num("dim", 2.0)? as usize),
        "hopf" => hopf_surface(num("c", 1.0)?),
        "hopf-perturbed" => hopf_perturbed(num("eps", 1e-3)?),
        "boothby" => {
            let f = parse(get("f").unwrap_or("0"), 2)?;
            let h = parse(get("h").unwrap_or("0"), 2)?;
            boothby(f, h)
        }
        "complete-chern-flat" => complete_chern_flat(),
        "riemann-flat" => {
            let u = parse(get("u").ok_or_else(|| missing("u"))?, 2)?;
            let v = parse(get("v").ok_or_else(|| missing("v"))?, 2)?;
            let f = parse(get("f").ok_or_else(|| missing("f"))?, 2)?;
            let m = riemann_flat_triple(u, v, f, 1.0, text)?;
            Ok(m)
        }
        "g1" => g1(),
        "g2" => g2(),
        "perturbed" => perturbed_metric(
            num("seed", 0.0)? as u64,
            num("eps", 0.1)?,
            num("dim", 2.0)? as usize,
        ),
        "hopf-x-c" => hopf_x_c(),
        other => Err(Error::Unknown { kind: "model", name: other.to_string() }),
    }
}

fn missing(key: &str) -> Error {
    Error::InvalidModel(format!("missing required parameter `{key}`"))
}

fn split_model_ref(text: &str) -> Result<(&str, Vec<(&str, &str)>)> {
    let (name, rest) = if let Some(i) = text.find(':') {
        (&text[..i], Some(&text[i + 1..]))
    } else if let Some(i) = text.find('(') {
        let inner = text[i..]
            .strip_prefix('(')
            .and_then(|s| s.strip_suffix(')'))
            .ok_or_else(|| Error::InvalidModel(format!("unbalanced parentheses in `{text}`")))?;
        (&text[..i], Some(inner))
    } else {
        (text, None)
    };
    let mut args = Vec::new();
    if let Some(rest) = rest {
        for part in rest.split(',') {
            let part = part.trim();
            if part.is_empty() {
                continue;
            }
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::InvalidModel(format!("expected key=value, got `{part}`")))?;
            args.push((k.trim(), v.trim()));
        }
    }
    Ok((name, args))
}

/// Names of the built-in models, for CLI listings.
pub fn builtin_names() -> Vec<&'static str> {
    vec![
        "euclidean[:dim=N]",
        "hopf[:c=C]",
        "hopf-perturbed[:eps=E]",
        "boothby:f=EXPR,h=EXPR",
        "complete-chern-flat",
        "riemann-flat:u=EXPR,v=EXPR,f=EXPR",
        "g1",
        "g2",
        "perturbed[:seed=S,eps=E,dim=N]",
        "hopf-x-c",
    ]
}

// ---------------------------------------------------------------------------
// Model-spec files
// ---------------------------------------------------------------------------

/// Parses the declarative model-spec format:
///
/// ```text
/// # comment
/// dim = 2
/// builtin = hopf(c=1)
/// ```
///
/// or, instead of `builtin`, an explicit coframe block of `n` lines with
/// `2n` comma-separated expressions each (dz coefficients first):
///
/// ```text
/// coframe:
///   1/sqrt(z1*conj(z1)+z2*conj(z2)), 0, 0, 0
///   0, 1/sqrt(z1*conj(z1)+z2*conj(z2)), 0, 0
/// end
/// domain = z1*conj(z1)+z2*conj(z2) - 0.000001
/// flags = bismut_flat
/// ```
pub fn parse_spec_file(text: &str) -> Result<HermitianModel> {
    let mut dim: Option<usize> = None;
    let mut builtin: Option<String> = None;
    let mut coframe_rows: Vec<Vec<String>> = Vec::new();
    let mut domain: Option<String> = None;
    let mut flags = ModelFlags::default();
    let mut name: Option<String> = None;

    let mut lines = text.lines().enumerate().peekable();
    while let Some((lineno, raw)) = lines.next() {
        let line = strip_comment(raw).trim().to_string();
        if line.is_empty() {
            continue;
        }
        if line == "coframe:" {
            loop {
                let Some((inner_no, inner_raw)) = lines.next() else {
                    return Err(Error::SpecFile {
                        line: lineno + 1,
                        message: "unterminated coframe block (missing `end`)".into(),
                    });
                };
                let inner = strip_comment(inner_raw).trim().to_string();
                if inner.is_empty() {
                    continue;
                }
                if inner == "end" {
                    break;
                }
                let row: Vec<String> = inner.split(',').map(|s| s.trim().to_string()).collect();
                if row.iter().any(String::is_empty) {
                    return Err(Error::SpecFile {
                        line: inner_no + 1,
                        message: "empty coframe entry".into(),
                    });
                }
                coframe_rows.push(row);
            }
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::SpecFile {
                line: lineno + 1,
                message: format!("expected `key = value`, got `{line}`"),
            });
        };
        let key = key.trim();
        let value = value.trim();
        match key {
            "dim" => {
                dim = Some(value.parse().map_err(|_| Error::SpecFile {
                    line: lineno + 1,
                    message: format!("invalid dimension `{value}`"),
                })?)
            }
            "builtin" => builtin = Some(value.to_string()),
            "domain" => domain = Some(value.to_string()),
            "name" => name = Some(value.to_string()),
            "flags" => {
                for f in value.split(',').map(str::trim) {
                    match f {
                        "chern_flat" => flags.chern_flat = true,
                        "riemann_flat" => flags.riemann_flat = true,
                        "bismut_flat" => flags.bismut_flat = true,
                        "kahler" => flags.kaehler = true,
                        other => {
                            return Err(Error::SpecFile {
                                line: lineno + 1,
                                message: format!("unknown flag `{other}`"),
                            })
                        }
                    }
                }
            }
            other => {
                return Err(Error::SpecFile {
                    line: lineno + 1,
                    message: format!("unknown key `{other}`"),
                })
            }
        }
    }

    if let Some(b) = builtin {
        return parse_model_ref(&b);
    }
    let dim = dim.ok_or(Error::SpecFile { line: 0, message: "missing `dim`".into() })?;
    if coframe_rows.len() != dim {
        return Err(Error::SpecFile {
            line: 0,
            message: format!("coframe block has {} rows, expected {dim}", coframe_rows.len()),
        });
    }
    let mut entries = Vec::with_capacity(dim);
    for row in &coframe_rows {
        if row.len() != 2 * dim {
            return Err(Error::SpecFile {
                line: 0,
                message: format!("coframe row has {} entries, expected {}", row.len(), 2 * dim),
            });
        }
        let mut jets_row = Vec::with_capacity(2 * dim);
        for cell in row {
            if cell == "0" {
                jets_row.push(None);
            } else {
                jets_row.push(Some(parse(cell, dim)?));
            }
        }
        entries.push(jets_row);
    }
    let domain_expr = domain.map(|d| parse(&d, dim)).transpose()?;
    let coframe = ExprCoframe::new(dim, entries, domain_expr)?;
    Ok(HermitianModel {
        name: name.unwrap_or_else(|| "spec-model".into()),
        dim,
        coframe: Arc::new(coframe),
        flags,
        sampler: Sampler::Polydisc { radius: 1.5 },
        reference_torsion: None,
    })
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::connection::{curvature_pack, max_frame_component, ConnectionPack};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn pt(coords: &[(f64, f64)]) -> ChartPoint {
        ChartPoint::new(coords.iter().map(|&(re, im)| c(re, im)).collect()).unwrap()
    }

    fn check_reference_torsion(model: &HermitianModel, points: usize, tol: f64) {
        let reference = model.reference_torsion.as_ref().expect("model has reference torsion");
        let n = model.dim;
        for p in model.sample_points(11, points).unwrap() {
            let pack = ConnectionPack::new(model.coframe.as_ref(), &p, 2).unwrap();
            let expect = reference(&p).unwrap();
            for k in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        let got = pack.torsion.value(k, i, j);
                        let want = expect[idx3(n, k, i, j)];
                        assert!(
                            (got - want).norm() < tol,
                            "{}: T^{}_{}{} = {got} want {want} at {p}",
                            model.name,
                            k + 1,
                            i + 1,
                            j + 1
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn hopf_metric_is_identity_on_sphere() {
        let m = hopf_surface(1.0).unwrap();
        let p = pt(&[(1.0, 0.0), (0.0, 0.0)]);
        let pack = ConnectionPack::new(m.coframe.as_ref(), &p, 2).unwrap();
        let g = pack.frame.metric_values();
        assert!((g[0] - c(1.0, 0.0)).norm() < 1e-14);
        assert!((g[3] - c(1.0, 0.0)).norm() < 1e-14);
        assert!(g[1].norm() < 1e-14);
        // domain predicate rejects the origin
        assert!(!m.coframe.in_domain(&pt(&[(0.0, 0.0), (0.0, 0.0)])));
    }

    #[test]
    fn hopf_reference_torsion_and_norm() {
        let m = hopf_surface(1.0).unwrap();
        check_reference_torsion(&m, 20, 1e-12);
        for p in m.sample_points(5, 50).unwrap() {
            let pack = ConnectionPack::new(m.coframe.as_ref(), &p, 2).unwrap();
            assert!((pack.torsion.norm_sq() - 0.5).abs() < 1e-12);
        }
        // scaled version: |T|^2 = 1/(2c)
        let m2 = hopf_surface(2.0).unwrap();
        check_reference_torsion(&m2, 10, 1e-12);
        let p = pt(&[(0.9, 0.1), (0.3, -0.5)]);
        let pack = ConnectionPack::new(m2.coframe.as_ref(), &p, 2).unwrap();
        assert!((pack.torsion.norm_sq() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn boothby_models() {
        // f = h = 0 is flat euclidean, Kaehler
        let m0 = boothby(Expr::real(0.0), Expr::real(0.0)).unwrap();
        assert!(m0.flags.kaehler);

        // f = z2, h = 0: T^1_12 = -1/2 everywhere
        let m = boothby(parse("z2", 2).unwrap(), Expr::real(0.0)).unwrap();
        assert!(!m.flags.kaehler);
        for p in m.sample_points(3, 10).unwrap() {
            let pack = ConnectionPack::new(m.coframe.as_ref(), &p, 2).unwrap();
            assert!((pack.torsion.value(0, 0, 1) - c(-0.5, 0.0)).norm() < 1e-11);
            assert!(pack.torsion.value(1, 0, 1).norm() < 1e-11);
        }

        // f = 0, h = z1 at z = (2, 0): T^2_12 = 1/2
        let m2 = boothby(Expr::real(0.0), parse("z1", 2).unwrap()).unwrap();
        let p = pt(&[(2.0, 0.0), (0.0, 0.0)]);
        let pack = ConnectionPack::new(m2.coframe.as_ref(), &p, 2).unwrap();
        assert!((pack.torsion.value(1, 0, 1) - c(0.5, 0.0)).norm() < 1e-11);

        check_reference_torsion(&m, 10, 1e-11);
        check_reference_torsion(&m2, 10, 1e-11);

        // conj rejected
        assert!(boothby(parse("conj(z1)", 2).unwrap(), Expr::real(0.0)).is_err());
    }

    #[test]
    fn complete_chern_flat_example() {
        let m = complete_chern_flat().unwrap();
        check_reference_torsion(&m, 20, 1e-11);
        // T^2_12 = x vanishes on the x = 0 slice
        let p = pt(&[(0.0, 0.0), (1.3, -0.4)]);
        let pack = ConnectionPack::new(m.coframe.as_ref(), &p, 2).unwrap();
        assert!(pack.torsion.value(1, 0, 1).norm() < 1e-12);
        // |T^c|^2 = 8 |T|^2 = 16 |x|^2: at (1, 1) that is 16
        let p = pt(&[(1.0, 0.0), (1.0, 0.0)]);
        let pack = ConnectionPack::new(m.coframe.as_ref(), &p, 2).unwrap();
        assert!((8.0 * pack.torsion.norm_sq() - 16.0).abs() < 1e-11);
        // Chern curvature vanishes at random points
        for p in m.sample_points(7, 20).unwrap() {
            let pack = ConnectionPack::new(m.coframe.as_ref(), &p, 2).unwrap();
            let curv = curvature_pack(&pack).unwrap();
            assert!(max_frame_component(&pack.frame, &curv.chern) < 1e-9);
        }
    }

    #[test]
    fn g2_metric_identity_at_origin() {
        let m = g2().unwrap();
        let p = pt(&[(0.0, 0.0), (0.0, 0.0)]);
        let pack = ConnectionPack::new(m.coframe.as_ref(), &p, 2).unwrap();
        let g = pack.frame.metric_values();
        assert!((g[0] - c(1.0, 0.0)).norm() < 1e-13, "g11 = {}", g[0]);
        assert!((g[3] - c(1.0, 0.0)).norm() < 1e-13, "g22 = {}", g[3]);
        assert!(g[1].norm() < 1e-13);
    }

    #[test]
    fn riemann_flat_triples_have_flat_levi_civita() {
        for model in [g1().unwrap(), g2().unwrap()] {
            for p in model.sample_points(13, 10).unwrap() {
                let pack = ConnectionPack::new(model.coframe.as_ref(), &p, 2).unwrap();
                let curv = curvature_pack(&pack).unwrap();
                let r1 = max_frame_component(&pack.frame, &curv.riem1);
                let r2 = max_frame_component(&pack.frame, &curv.riem2);
                assert!(r1 < 1e-9, "{}: riem1 {r1:.3e} at {p}", model.name);
                assert!(r2 < 1e-9, "{}: riem2 {r2:.3e} at {p}", model.name);
            }
        }

        // constant f degenerates to a constant-coefficient coframe
        let m = riemann_flat_triple(
            Expr::var(0),
            Expr::var(1),
            Expr::real(0.0),
            1.0,
            "riemann-flat-const",
        )
        .unwrap();
        let p = pt(&[(0.4, 0.2), (-0.1, 0.6)]);
        let pack = ConnectionPack::new(m.coframe.as_ref(), &p, 2).unwrap();
        let curv = curvature_pack(&pack).unwrap();
        assert!(max_frame_component(&pack.frame, &curv.riem1) < 1e-12);
        assert!(max_frame_component(&pack.frame, &curv.riem2) < 1e-12);
        // phi_1 = dz_1/sqrt(2) for the unscaled family with f = 0
        let a00 = pack.frame.coeffs[0][0].value();
        assert!((a00 - c(1.0 / 2.0f64.sqrt(), 0.0)).norm() < 1e-14);
    }

    #[test]
    fn perturbed_metric_is_deterministic_and_positive() {
        let m1 = perturbed_metric(9, 0.15, 3).unwrap();
        let m2 = perturbed_metric(9, 0.15, 3).unwrap();
        let p = pt(&[(0.3, -0.6), (0.2, 0.5), (-0.4, 0.1)]);
        let c1 = m1.coframe.coefficients(&p, 2).unwrap();
        let c2 = m2.coframe.coefficients(&p, 2).unwrap();
        for (r1, r2) in c1.iter().zip(&c2) {
            for (a, b) in r1.iter().zip(r2) {
                assert_eq!(a.value(), b.value());
                for s in 0..6 {
                    assert_eq!(a.d1(s), b.d1(s));
                }
            }
        }
        // eps = 0 reduces to the euclidean coframe
        let m0 = perturbed_metric(3, 0.0, 2).unwrap();
        let p0 = pt(&[(0.2, 0.1), (0.0, -0.3)]);
        let pack = ConnectionPack::new(m0.coframe.as_ref(), &p0, 2).unwrap();
        assert!(pack.theta.max_abs_value() < 1e-15);

        // positive-definiteness holds on the sampler's domain
        let m = perturbed_metric(4, 0.19, 3).unwrap();
        for p in m.sample_points(21, 30).unwrap() {
            assert!(ConnectionPack::new(m.coframe.as_ref(), &p, 2).is_ok());
        }
    }

    #[test]
    fn product_model_is_blockwise() {
        let m = hopf_x_c().unwrap();
        assert_eq!(m.dim, 3);
        assert!(m.flags.bismut_flat);
        check_reference_torsion(&m, 10, 1e-12);
        for p in m.sample_points(31, 10).unwrap() {
            let pack = ConnectionPack::new(m.coframe.as_ref(), &p, 2).unwrap();
            // torsion norm matches the first factor alone
            assert!((pack.torsion.norm_sq() - 0.5).abs() < 1e-12);
            let curv = curvature_pack(&pack).unwrap();
            assert!(max_frame_component(&pack.frame, &curv.bismut) < 1e-9);
        }
    }

    #[test]
    fn twistor_matrix_values() {
        let j0 = twistor_matrix(c(0.0, 0.0));
        // (a, b, c) = (0, 0, -1): block form [[0, I], [-I, 0]]
        let expect = [
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
            [-1.0, 0.0, 0.0, 0.0],
            [0.0, -1.0, 0.0, 0.0],
        ];
        for r in 0..4 {
            for s in 0..4 {
                assert!((j0[r][s] - expect[r][s]).abs() < 1e-15);
            }
        }
        // J^2 = -I for random z
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let z = c(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let j = twistor_matrix(z);
            for r in 0..4 {
                for s in 0..4 {
                    let mut acc = 0.0;
                    for k in 0..4 {
                        acc += j[r][k] * j[k][s];
                    }
                    let expect = if r == s { -1.0 } else { 0.0 };
                    assert!((acc - expect).abs() < 1e-12, "J^2 defect at ({r},{s})");
                }
            }
        }
    }

    #[test]
    fn model_refs_parse() {
        assert_eq!(parse_model_ref("hopf").unwrap().name, "hopf(c=1)");
        assert_eq!(parse_model_ref("hopf:c=2").unwrap().dim, 2);
        assert_eq!(parse_model_ref("hopf(c=2)").unwrap().dim, 2);
        assert!(parse_model_ref("boothby:f=z2,h=0").is_ok());
        assert!(parse_model_ref("riemann-flat:u=z1,v=z2,f=i*z1*z2").is_ok());
        assert!(parse_model_ref("nope").is_err());
        assert!(parse_model_ref("hopf:c=-1").is_err());
    }

    #[test]
    fn spec_file_round_trip() {
        let text = "\
# a punctured-plane model, written out explicitly
dim = 2
name = hand-rolled
coframe:
  1/sqrt(z1*conj(z1)+z2*conj(z2)), 0, 0, 0
  0, 1/sqrt(z1*conj(z1)+z2*conj(z2)), 0, 0
end
domain = z1*conj(z1)+z2*conj(z2) - 0.000001
flags = bismut_flat
";
        let m = parse_spec_file(text).unwrap();
        assert_eq!(m.name, "hand-rolled");
        assert!(m.flags.bismut_flat);
        let p = pt(&[(1.0, 0.0), (0.0, 0.0)]);
        let pack = ConnectionPack::new(m.coframe.as_ref(), &p, 2).unwrap();
        assert!((pack.torsion.value(1, 0, 1) - c(-0.5, 0.0)).norm() < 1e-12);

        let builtin = parse_spec_file("builtin = hopf(c=1)\n").unwrap();
        assert_eq!(builtin.name, "hopf(c=1)");

        assert!(parse_spec_file("dim = 2\ncoframe:\n1, 0, 0, 0\nend\n").is_err());
        assert!(parse_spec_file("wat = 1\n").is_err());
    }
}
