//! Anisotropic symbols `h(x, xi, tau)`, the quasi-homogeneous bracket,
//! and empirical certification of membership in the classes `S^{m,nu}_{1,0}`.
//!
//! A symbol of order `m` and regularity number `nu` satisfies, for every
//! multi-index `(alpha, beta, j)`,
//!
//! ```text
//! |d_x^beta d_xi^alpha d_tau^j h|
//!     <= C (<xi>^{nu-|alpha|} + {xi,tau}^{nu-|alpha|}) {xi,tau}^{m-nu-d j}.
//! ```
//!
//! [`check_estimates`] turns this into a falsifiable finite test: the
//! fitted constant over a log-spaced radial sample set must not keep
//! growing with the sample radius.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::{Error, Result};

/// Anisotropy weight `d > 0`; the operator order in the x-direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Anisotropy(f64);

impl Anisotropy {
    pub fn new(d: f64) -> Result<Self> {
        if d > 0.0 && d.is_finite() {
            Ok(Anisotropy(d))
        } else {
            Err(Error::InvalidParameter(format!(
                "anisotropy weight must be positive, got {d}"
            )))
        }
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }
}

/// `<xi> = (1 + |xi|^2)^{1/2}`.
#[inline]
pub fn angle_bracket(xi: &[f64]) -> f64 {
    (1.0 + xi.iter().map(|v| v * v).sum::<f64>()).sqrt()
}

/// The basic anisotropic invertible weight `{xi,tau} = (<xi>^{2d} + tau^2)^{1/(2d)}`.
#[inline]
pub fn bracket(xi: &[f64], tau: f64, d: Anisotropy) -> f64 {
    let td = 2.0 * d.get();
    (angle_bracket(xi).powf(td) + tau * tau).powf(1.0 / td)
}

fn exp_edge(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        (-1.0 / t).exp()
    }
}

/// C-infinity transition: 0 on `(-inf, 0]`, 1 on `[1, inf)`.
pub fn smoothstep(t: f64) -> f64 {
    let a = exp_edge(t);
    let b = exp_edge(1.0 - t);
    a / (a + b)
}

/// Smooth positive modification `[xi]` of `|xi|`: C-infinity, `>= 1/2`
/// everywhere, and exactly `|xi|` for `|xi| >= 1`.
///
/// Construction: `psi(|xi|) |xi| + (1 - psi(|xi|)) (1 + |xi|^2)/2` with the
/// exp-based smoothstep `psi` vanishing on `[0, 1/2]` and equal to 1 on
/// `[1, inf)`.
pub fn smooth_abs(xi: &[f64]) -> f64 {
    let r = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
    smooth_abs_scalar(r)
}

/// [`smooth_abs`] as a function of `r = |xi|`.
pub fn smooth_abs_scalar(r: f64) -> f64 {
    let psi = smoothstep(2.0 * r - 1.0);
    psi * r + (1.0 - psi) * (1.0 + r * r) / 2.0
}

/// Symbol evaluator: `(x, xi, tau) -> C`.
pub type Eval = Arc<dyn Fn(&[f64], &[f64], f64) -> Complex64 + Send + Sync>;

/// Optional analytic derivative evaluator: `(alpha, j, x, xi, tau)` returns
/// the `(d_xi^alpha d_tau^j)` derivative when it is available in closed form.
pub type DerivEval =
    Arc<dyn Fn(&[usize], usize, &[f64], &[f64], f64) -> Option<Complex64> + Send + Sync>;

/// A closed-form symbol with declared order `m`, regularity number `nu`,
/// and anisotropy `d`.
#[derive(Clone)]
pub struct SymbolSpec {
    n: usize,
    eval: Eval,
    order: f64,
    regularity: f64,
    d: Anisotropy,
    x_dependent: bool,
    analytic_derivs: Option<DerivEval>,
}

impl SymbolSpec {
    pub fn new(
        n: usize,
        d: Anisotropy,
        order: f64,
        regularity: f64,
        x_dependent: bool,
        eval: Eval,
    ) -> Self {
        SymbolSpec {
            n,
            eval,
            order,
            regularity,
            d,
            x_dependent,
            analytic_derivs: None,
        }
    }

    /// x-independent symbol (a Fourier multiplier once quantized).
    pub fn multiplier<F>(n: usize, d: Anisotropy, order: f64, regularity: f64, f: F) -> Self
    where
        F: Fn(&[f64], f64) -> Complex64 + Send + Sync + 'static,
    {
        Self::new(
            n,
            d,
            order,
            regularity,
            false,
            Arc::new(move |_x, xi, tau| f(xi, tau)),
        )
    }

    pub fn with_analytic_derivs(mut self, derivs: DerivEval) -> Self {
        self.analytic_derivs = Some(derivs);
        self
    }

    /// The bracket power `{xi,tau}^s`, class `(s, 2d)`, with closed-form
    /// derivatives up to xi-order 3 and tau-order 2 for n = 1 (finite
    /// differences at large radii would otherwise swamp the tiny
    /// higher-derivative bounds with roundoff).
    pub fn bracket_power(n: usize, d: Anisotropy, s: f64) -> Self {
        let dd = d.get();
        let q = s / (2.0 * dd);
        let eval = move |xi: &[f64], tau: f64| angle_bracket(xi).powf(2.0 * dd) + tau * tau;
        let sym = Self::multiplier(n, d, s, 2.0 * dd, move |xi, tau| {
            Complex64::new(eval(xi, tau).powf(q), 0.0)
        });
        // xi-derivatives of w^p for n = 1 via Faa di Bruno with
        // A = (1 + xi^2)^d (w = A + tau^2, so d/dxi w = A' etc.)
        let dxi_power = move |p: f64, k: usize, xi: f64, w: f64| -> Option<f64> {
            let u = 1.0 + xi * xi;
            let a1 = 2.0 * dd * xi * u.powf(dd - 1.0);
            let a2 = 2.0 * dd * u.powf(dd - 1.0)
                + 4.0 * dd * (dd - 1.0) * xi * xi * u.powf(dd - 2.0);
            let a3 = 12.0 * dd * (dd - 1.0) * xi * u.powf(dd - 2.0)
                + 8.0 * dd * (dd - 1.0) * (dd - 2.0) * xi * xi * xi * u.powf(dd - 3.0);
            Some(match k {
                0 => w.powf(p),
                1 => p * w.powf(p - 1.0) * a1,
                2 => p * (p - 1.0) * w.powf(p - 2.0) * a1 * a1 + p * w.powf(p - 1.0) * a2,
                3 => {
                    p * (p - 1.0) * (p - 2.0) * w.powf(p - 3.0) * a1 * a1 * a1
                        + 3.0 * p * (p - 1.0) * w.powf(p - 2.0) * a1 * a2
                        + p * w.powf(p - 1.0) * a3
                }
                _ => return None,
            })
        };
        let derivs: DerivEval = Arc::new(move |alpha, j, _x, xi, tau| {
            let k = alpha.iter().sum::<usize>();
            if k > 0 && xi.len() != 1 {
                return None; // multi-d xi-derivatives fall back to FD
            }
            let x1 = if xi.is_empty() { 0.0 } else { xi[0] };
            let w = eval(xi, tau);
            let v = match j {
                0 => dxi_power(q, k, x1, w)?,
                1 => 2.0 * q * tau * dxi_power(q - 1.0, k, x1, w)?,
                2 => {
                    2.0 * q * dxi_power(q - 1.0, k, x1, w)?
                        + 4.0 * q * (q - 1.0) * tau * tau * dxi_power(q - 2.0, k, x1, w)?
                }
                _ => return None,
            };
            Some(Complex64::new(v, 0.0))
        });
        sym.with_analytic_derivs(derivs)
    }

    #[inline]
    pub fn eval(&self, x: &[f64], xi: &[f64], tau: f64) -> Complex64 {
        (self.eval)(x, xi, tau)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn order(&self) -> f64 {
        self.order
    }

    pub fn regularity(&self) -> f64 {
        self.regularity
    }

    pub fn anisotropy(&self) -> Anisotropy {
        self.d
    }

    pub fn x_dependent(&self) -> bool {
        self.x_dependent
    }

    /// Re-declare the class `(m, nu)` without changing the evaluator.
    pub fn redeclared(&self, order: f64, regularity: f64) -> Self {
        let mut s = self.clone();
        s.order = order;
        s.regularity = regularity;
        s
    }

    /// Mixed partial derivative `d_x^beta d_xi^alpha d_tau^j h`.
    ///
    /// Uses supplied analytic derivatives when available; otherwise central
    /// finite differences with step `1e-4 (1 + |coord|)`, Richardson-extrapolated
    /// once per axis.
    pub fn deriv(
        &self,
        alpha: &[usize],
        beta: &[usize],
        j: usize,
        x: &[f64],
        xi: &[f64],
        tau: f64,
    ) -> Complex64 {
        if beta.iter().all(|&b| b == 0) {
            if let Some(ad) = &self.analytic_derivs {
                if let Some(v) = ad(alpha, j, x, xi, tau) {
                    return v;
                }
            }
        }
        // x-derivatives outermost so analytic (alpha, j) derivatives can be
        // used at the shifted x points.
        if let Some(axis) = beta.iter().position(|&b| b > 0) {
            let k = beta[axis];
            let mut beta_rest = beta.to_vec();
            beta_rest[axis] = 0;
            let h = FD_STEP; // x stays in a bounded box
            return fd_axis(k, h, |t| {
                let mut xs = x.to_vec();
                xs[axis] = t;
                self.deriv(alpha, &beta_rest, j, &xs, xi, tau)
            })(x[axis]);
        }
        if let Some(axis) = alpha.iter().position(|&a| a > 0) {
            let k = alpha[axis];
            let mut alpha_rest = alpha.to_vec();
            alpha_rest[axis] = 0;
            let h = FD_STEP * (1.0 + xi[axis].abs());
            return fd_axis(k, h, |t| {
                let mut xis = xi.to_vec();
                xis[axis] = t;
                self.deriv(&alpha_rest, beta, j, x, &xis, tau)
            })(xi[axis]);
        }
        if j > 0 {
            let h = FD_STEP * (1.0 + tau.abs());
            return fd_axis(j, h, |t| self.deriv(alpha, beta, 0, x, xi, t))(tau);
        }
        self.eval(x, xi, tau)
    }
}

const FD_STEP: f64 = 1e-4;

/// Central-difference stencil (offset, coefficient) for the k-th derivative,
/// second-order accurate; caller divides by `h^k`.
fn stencil(k: usize) -> &'static [(i32, f64)] {
    match k {
        1 => &[(-1, -0.5), (1, 0.5)],
        2 => &[(-1, 1.0), (0, -2.0), (1, 1.0)],
        3 => &[(-2, -0.5), (-1, 1.0), (1, -1.0), (2, 0.5)],
        _ => panic!("finite-difference depth limited to 3 per axis"),
    }
}

/// k-th derivative along one axis: central stencil at steps h and h/2,
/// combined by one Richardson step (O(h^2) -> O(h^4)).
fn fd_axis<F>(k: usize, h: f64, g: F) -> impl Fn(f64) -> Complex64
where
    F: Fn(f64) -> Complex64,
{
    move |t0: f64| {
        let eval_at = |step: f64| -> Complex64 {
            stencil(k)
                .iter()
                .map(|&(o, c)| g(t0 + o as f64 * step) * c)
                .sum::<Complex64>()
                / step.powi(k as i32)
        };
        let coarse = eval_at(h);
        let fine = eval_at(h / 2.0);
        (fine * 4.0 - coarse) / 3.0
    }
}

/// Multi-index for the estimate checker.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Multiindex {
    pub alpha: Vec<usize>,
    pub beta: Vec<usize>,
    pub j: usize,
}

impl Multiindex {
    pub fn order(&self) -> (usize, usize, usize) {
        (
            self.alpha.iter().sum(),
            self.beta.iter().sum(),
            self.j,
        )
    }
}

/// Sampling protocol for [`check_estimates`] and
/// [`verify_strong_ellipticity`].
#[derive(Debug, Clone, Serialize)]
pub struct SamplingSpec {
    /// Dyadic radius exponents for `|(xi, sign(tau)|tau|^{1/d})|`.
    pub radii_log2: Vec<u32>,
    /// Random directions per radius, drawn on the unit sphere of R^{n+1}.
    pub dirs_per_radius: usize,
    /// Random x points per frequency sample when the symbol is x-dependent.
    pub x_samples: usize,
    /// Half-width of the x sampling box.
    pub x_box: f64,
    /// Coordinate-axis directions are always included, so that the
    /// near-tau-axis region (bounded `<xi>`, large bracket) is probed.
    pub include_axes: bool,
    /// Growth slack: the constant over the top two dyadic radii may exceed
    /// the constant over the middle radii by at most this factor.
    pub slack: f64,
    pub seed: u64,
}

impl Default for SamplingSpec {
    fn default() -> Self {
        SamplingSpec {
            radii_log2: (0..=12).collect(),
            dirs_per_radius: 32,
            x_samples: 8,
            x_box: 4.0,
            include_axes: true,
            slack: 1.5,
            seed: 0x5eed,
        }
    }
}

impl SamplingSpec {
    fn describe(&self) -> String {
        format!(
            "radii 2^{{{}..={}}}, {} directions/radius (+axes: {}), {} x-samples, slack {}",
            self.radii_log2.first().copied().unwrap_or(0),
            self.radii_log2.last().copied().unwrap_or(0),
            self.dirs_per_radius,
            self.include_axes,
            self.x_samples,
            self.slack
        )
    }

    /// Frequency sample points `(xi, tau)` at one radius.
    fn frequency_samples(&self, n: usize, d: Anisotropy, radius: f64, rng_seed: u64) -> Vec<(Vec<f64>, f64)> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(rng_seed);
        let mut dirs: Vec<Vec<f64>> = Vec::new();
        for _ in 0..self.dirs_per_radius {
            let mut v: Vec<f64> = (0..=n)
                .map(|_| {
                    // Box-Muller pair, keep one
                    let u1: f64 = rng.gen_range(1e-12..1.0);
                    let u2: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                    (-2.0 * u1.ln()).sqrt() * u2.cos()
                })
                .collect();
            let norm = v.iter().map(|t| t * t).sum::<f64>().sqrt().max(1e-12);
            v.iter_mut().for_each(|t| *t /= norm);
            dirs.push(v);
        }
        if self.include_axes {
            for axis in 0..=n {
                for sign in [1.0, -1.0] {
                    let mut v = vec![0.0; n + 1];
                    v[axis] = sign;
                    dirs.push(v);
                }
            }
        }
        dirs.into_iter()
            .map(|v| {
                let xi: Vec<f64> = v[..n].iter().map(|t| t * radius).collect();
                let w = v[n] * radius;
                let tau = w.signum() * w.abs().powf(d.get());
                (xi, tau)
            })
            .collect()
    }

    fn x_points(&self, n: usize, x_dependent: bool, rng_seed: u64) -> Vec<Vec<f64>> {
        use rand::{Rng, SeedableRng};
        if !x_dependent {
            return vec![vec![0.0; n]];
        }
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(rng_seed ^ 0x9e3779b97f4a7c15);
        (0..self.x_samples)
            .map(|_| (0..n).map(|_| rng.gen_range(-self.x_box..self.x_box)).collect())
            .collect()
    }
}

/// Fitted-constant report for one multi-index of the estimates.
#[derive(Debug, Clone, Serialize)]
pub struct EstimateRow {
    pub index: Multiindex,
    /// Fitted constant: sup of the measured ratio over the full sample set.
    pub constant: f64,
    /// Per-radius sup of the ratio, ordered as `radii_log2`.
    pub per_radius: Vec<f64>,
    /// Sample point achieving the sup: (x, xi, tau).
    pub worst_point: (Vec<f64>, Vec<f64>, f64),
    pub pass: bool,
}

/// Result of the symbol-class certification run.
#[derive(Debug, Clone, Serialize)]
pub struct EstimateReport {
    pub order: f64,
    pub regularity: f64,
    pub rows: Vec<EstimateRow>,
    pub pass: bool,
    pub sample_spec: String,
}

impl EstimateReport {
    /// First failing row, if any.
    pub fn first_failure(&self) -> Option<&EstimateRow> {
        self.rows.iter().find(|r| !r.pass)
    }
}

fn multiindices(n: usize, max_alpha: usize, max_beta: usize, max_j: usize) -> Vec<Multiindex> {
    fn compositions(n: usize, total: usize) -> Vec<Vec<usize>> {
        if n == 1 {
            return vec![vec![total]];
        }
        let mut out = Vec::new();
        for first in 0..=total {
            for mut rest in compositions(n - 1, total - first) {
                let mut v = vec![first];
                v.append(&mut rest);
                out.push(v);
            }
        }
        out
    }
    let mut out = Vec::new();
    for a_tot in 0..=max_alpha {
        for alpha in compositions(n, a_tot) {
            for b_tot in 0..=max_beta {
                for beta in compositions(n, b_tot) {
                    for j in 0..=max_j {
                        out.push(Multiindex {
                            alpha: alpha.clone(),
                            beta: beta.clone(),
                            j,
                        });
                    }
                }
            }
        }
    }
    out
}

/// Empirically certify the declared class `(m, nu)` of `h` by measuring the
/// ratio of each derivative to its bound over a log-spaced sample set.
///
/// Passes when every fitted constant is finite and stabilizes: the sup over
/// the top two dyadic radii exceeds the sup over the middle radii by at most
/// the configured slack factor.
pub fn check_estimates(
    h: &SymbolSpec,
    max_alpha: usize,
    max_beta: usize,
    max_j: usize,
    samples: &SamplingSpec,
) -> EstimateReport {
    assert!(max_alpha <= 3 && max_j <= 2, "finite-difference depth guard");
    let n = h.dim();
    let d = h.anisotropy();
    let (m, nu) = (h.order(), h.regularity());
    let indices = multiindices(n, max_alpha, max_beta, max_j);

    let rows: Vec<EstimateRow> = indices
        .par_iter()
        .map(|idx| {
            let a_tot = idx.alpha.iter().sum::<usize>() as f64;
            let mut per_radius = Vec::with_capacity(samples.radii_log2.len());
            let mut constant: f64 = 0.0;
            let mut worst = (vec![0.0; n], vec![0.0; n], 0.0);
            for (ri, &e) in samples.radii_log2.iter().enumerate() {
                let radius = (2.0f64).powi(e as i32);
                let freq = samples.frequency_samples(n, d, radius, samples.seed ^ (ri as u64) << 8);
                let mut r_sup: f64 = 0.0;
                for (xi, tau) in &freq {
                    let sigma = angle_bracket(xi);
                    let kappa = bracket(xi, *tau, d);
                    let bound = (sigma.powf(nu - a_tot) + kappa.powf(nu - a_tot))
                        * kappa.powf(m - nu - d.get() * idx.j as f64);
                    for x in samples.x_points(n, h.x_dependent(), samples.seed ^ (ri as u64)) {
                        let dv = h.deriv(&idx.alpha, &idx.beta, idx.j, &x, xi, *tau);
                        let ratio = dv.norm() / bound;
                        if ratio > r_sup {
                            r_sup = ratio;
                        }
                        if ratio > constant {
                            constant = ratio;
                            worst = (x.clone(), xi.clone(), *tau);
                        }
                    }
                }
                per_radius.push(r_sup);
            }
            let pass = stabilizes(&per_radius, samples.slack) && constant.is_finite();
            EstimateRow {
                index: idx.clone(),
                constant,
                per_radius,
                worst_point: worst,
                pass,
            }
        })
        .collect();

    let pass = rows.iter().all(|r| r.pass);
    EstimateReport {
        order: m,
        regularity: nu,
        rows,
        pass,
        sample_spec: samples.describe(),
    }
}

fn stabilizes(per_radius: &[f64], slack: f64) -> bool {
    let len = per_radius.len();
    if len < 5 {
        return per_radius.iter().all(|c| c.is_finite());
    }
    let top = per_radius[len - 2..].iter().cloned().fold(0.0f64, f64::max);
    let mid = per_radius[2..len - 2].iter().cloned().fold(0.0f64, f64::max);
    top.is_finite() && top <= slack * mid + 1e-12
}

/// Composition rule for the class indices: `(m, nu) x (m', nu') ->
/// (m + m', min{nu, nu', nu + nu'})`.
pub fn product_regularity(m: f64, nu: f64, m2: f64, nu2: f64) -> (f64, f64) {
    (m + m2, nu.min(nu2).min(nu + nu2))
}

/// Sampled strong-ellipticity margin of a classical symbol of order `d`:
/// the infimum of `Re p0(x, xi) / |xi|^d` over `|xi| >= 1` and of `Re p0`
/// over `|xi| <= 1`. Positive margin means strongly elliptic.
pub fn verify_strong_ellipticity(p0: &SymbolSpec, samples: &SamplingSpec) -> f64 {
    use rand::{Rng, SeedableRng};
    let n = p0.dim();
    let d = p0.anisotropy().get();
    let xs = samples.x_points(n, p0.x_dependent(), samples.seed ^ 0xe111);
    let mut margin = f64::INFINITY;
    // |xi| >= 1: log-spaced radii with random and axis directions.
    for &e in &samples.radii_log2 {
        let radius = (2.0f64).powi(e as i32);
        for (xi, _) in samples.frequency_samples(n, p0.anisotropy(), radius, samples.seed ^ e as u64) {
            let r = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
            if r < 1.0 {
                continue;
            }
            for x in &xs {
                let v = p0.eval(x, &xi, 0.0).re / r.powf(d);
                margin = margin.min(v);
            }
        }
    }
    // |xi| <= 1: random points in the unit ball plus the origin.
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(samples.seed ^ 0xba11);
    let mut small: Vec<Vec<f64>> = vec![vec![0.0; n]];
    for _ in 0..64 {
        loop {
            let xi: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            if xi.iter().map(|v| v * v).sum::<f64>() <= 1.0 {
                small.push(xi);
                break;
            }
        }
    }
    for xi in &small {
        for x in &xs {
            margin = margin.min(p0.eval(x, xi, 0.0).re);
        }
    }
    margin
}

/// `p(x, xi) + i tau`, declared `(m, nu) = (d, d)`.
///
/// Rejects spatial symbols whose declared order differs from their
/// anisotropy weight.
pub fn heat_symbol(p: &SymbolSpec) -> Result<SymbolSpec> {
    let d = p.anisotropy();
    if (p.order() - d.get()).abs() > 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "heat symbol requires declared order {} equal to anisotropy {}",
            p.order(),
            d.get()
        )));
    }
    let inner = p.clone();
    let eval: Eval = Arc::new(move |x, xi, tau| inner.eval(x, xi, tau) + Complex64::new(0.0, tau));
    let inner2 = p.clone();
    let derivs: DerivEval = Arc::new(move |alpha, j, x, xi, tau| match j {
        0 => {
            if alpha.iter().all(|&a| a == 0) {
                Some(inner2.eval(x, xi, tau) + Complex64::new(0.0, tau))
            } else {
                // reuse p's analytic derivatives if it has them
                None
            }
        }
        1 => {
            if alpha.iter().all(|&a| a == 0) {
                Some(Complex64::new(0.0, 1.0))
            } else {
                Some(Complex64::new(0.0, 0.0))
            }
        }
        _ => Some(Complex64::new(0.0, 0.0)),
    });
    Ok(
        SymbolSpec::new(p.dim(), d, d.get(), d.get(), p.x_dependent(), eval)
            .with_analytic_derivs(derivs),
    )
}

/// Default minimal ellipticity margin accepted by [`parametrix_principal`].
pub const ELLIPTICITY_THRESHOLD: f64 = 1e-8;

/// Principal parametrix symbol `(p0(x, xi) + i tau)^{-1}`, declared
/// `(m, nu) = (-d, d)`. Fails when the sampled ellipticity margin is below
/// `threshold`.
pub fn parametrix_principal(p0: &SymbolSpec, threshold: f64) -> Result<SymbolSpec> {
    let margin = verify_strong_ellipticity(p0, &SamplingSpec::default());
    if margin < threshold {
        return Err(Error::NotElliptic { margin, threshold });
    }
    let d = p0.anisotropy();
    let inner = p0.clone();
    let eval: Eval = Arc::new(move |x, xi, tau| {
        (inner.eval(x, xi, tau) + Complex64::new(0.0, tau)).inv()
    });
    let sym = SymbolSpec::new(
        p0.dim(),
        d,
        -d.get(),
        d.get(),
        p0.x_dependent(),
        eval,
    );
    // closed-form derivatives of 1/(p + i tau) for n = 1 via the quotient
    // rule (d_tau g = i, higher tau-derivatives vanish); nested finite
    // differences of the reciprocal cancel catastrophically at large radii
    let inner = p0.clone();
    let derivs: DerivEval = Arc::new(move |alpha, j, x, xi, tau| {
        let k = alpha.iter().sum::<usize>();
        if xi.len() != 1 || k > 3 || j > 2 {
            return None;
        }
        let zero = vec![0usize; 1];
        let g = inner.eval(x, xi, tau) + Complex64::new(0.0, tau);
        let p1 = if k >= 1 { inner.deriv(&[1], &zero, 0, x, xi, tau) } else { Complex64::default() };
        let p2 = if k >= 2 { inner.deriv(&[2], &zero, 0, x, xi, tau) } else { Complex64::default() };
        let p3 = if k >= 3 { inner.deriv(&[3], &zero, 0, x, xi, tau) } else { Complex64::default() };
        let gi = g.inv();
        let g2 = gi * gi;
        let g3 = g2 * gi;
        let g4 = g3 * gi;
        let g5 = g4 * gi;
        let g6 = g5 * gi;
        let i = Complex64::new(0.0, 1.0);
        Some(match (j, k) {
            (0, 0) => gi,
            (0, 1) => -p1 * g2,
            (0, 2) => -p2 * g2 + 2.0 * p1 * p1 * g3,
            (0, 3) => -p3 * g2 + 6.0 * p1 * p2 * g3 - 6.0 * p1 * p1 * p1 * g4,
            (1, 0) => -i * g2,
            (1, 1) => 2.0 * i * p1 * g3,
            (1, 2) => 2.0 * i * p2 * g3 - 6.0 * i * p1 * p1 * g4,
            (1, 3) => {
                2.0 * i * p3 * g3 - 18.0 * i * p1 * p2 * g4
                    + 24.0 * i * p1 * p1 * p1 * g5
            }
            (2, 0) => -2.0 * g3,
            (2, 1) => 6.0 * p1 * g4,
            (2, 2) => 6.0 * p2 * g4 - 24.0 * p1 * p1 * g5,
            (2, 3) => {
                6.0 * p3 * g4 - 60.0 * p1 * p2 * g5 + 120.0 * p1 * p1 * p1 * g6
            }
            _ => return None,
        })
    });
    Ok(sym.with_analytic_derivs(derivs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn d(v: f64) -> Anisotropy {
        Anisotropy::new(v).unwrap()
    }

    #[test]
    fn bracket_basic_values() {
        assert_relative_eq!(bracket(&[0.0], 0.0, d(1.0)), 1.0, epsilon = 1e-14);
        assert_relative_eq!(bracket(&[0.0], 3f64.sqrt(), d(1.0)), 2.0, epsilon = 1e-14);
        // tau = 0 reduces the bracket to <xi> for any d
        for dd in [0.3, 1.0, 2.5] {
            assert_relative_eq!(
                bracket(&[3.0, 4.0], 0.0, d(dd)),
                26f64.sqrt(),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn bracket_lower_bounds() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..500 {
            let dd = rng.gen_range(0.2..2.5);
            let xi = [rng.gen_range(-50.0..50.0), rng.gen_range(-50.0..50.0)];
            let tau: f64 = rng.gen_range(-1e4..1e4);
            let k = bracket(&xi, tau, d(dd));
            let floor = 2f64.powf(-1.0 / (2.0 * dd));
            assert!(k >= angle_bracket(&xi) * floor - 1e-12);
            assert!(k >= tau.abs().powf(1.0 / dd) * floor - 1e-12);
            assert!(k + 1e-12 >= angle_bracket(&xi).max(tau.abs().powf(1.0 / dd)) * floor);
        }
    }

    #[test]
    fn smooth_abs_matches_spec() {
        assert_relative_eq!(smooth_abs(&[2.0]), 2.0, epsilon = 1e-14);
        assert_relative_eq!(smooth_abs(&[0.6, 0.8]), 1.0, epsilon = 1e-14);
        let at_zero = smooth_abs(&[0.0]);
        assert!((0.5..=1.0).contains(&at_zero));
        // >= 1/2 on a sweep
        for i in 0..200 {
            let r = i as f64 * 0.02;
            assert!(smooth_abs_scalar(r) >= 0.5 - 1e-14, "r={r}");
        }
    }

    #[test]
    fn quasi_homogeneity_of_bracket() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..300 {
            let dd = rng.gen_range(0.4..2.0);
            let r: f64 = rng.gen_range(2.0..100.0);
            let theta: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let xi = [r * theta.cos().abs().max(0.3) * theta.cos().signum().max(0.5)];
            let xi = [xi[0].abs().max(2.0)]; // |xi| >= 2
            let tau: f64 = rng.gen_range(-100.0..100.0);
            let lambda: f64 = rng.gen_range(1.0..8.0);
            let scaled = bracket(&[lambda * xi[0]], lambda.powf(dd) * tau, d(dd));
            let base = bracket(&xi, tau, d(dd));
            let slack = lambda / angle_bracket(&xi) * base;
            assert!(
                (scaled - lambda * base).abs() <= slack + 1e-9,
                "d={dd} xi={} tau={tau} lambda={lambda}",
                xi[0]
            );
        }
    }

    #[test]
    fn comparability_bound_factor_two() {
        // (sigma^{nu-|a|} + kappa^{nu-|a|}) kappa^{m-nu} within [1,2] * kappa^{m-|a|}
        // for 0 <= |alpha| <= nu (sigma <= kappa exactly).
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(13);
        for _ in 0..500 {
            let dd = rng.gen_range(0.3..2.0);
            let nu: f64 = rng.gen_range(0.0..4.0);
            let a_tot = rng.gen_range(0.0..nu.max(1e-9));
            let m: f64 = rng.gen_range(-3.0..3.0);
            let xi = [rng.gen_range(-100.0..100.0)];
            let tau: f64 = rng.gen_range(-1e4..1e4);
            let sigma = angle_bracket(&xi);
            let kappa = bracket(&xi, tau, d(dd));
            assert!(kappa.powf(2.0 * dd) >= sigma.powf(2.0 * dd) - 1e-9);
            let lhs = (sigma.powf(nu - a_tot) + kappa.powf(nu - a_tot)) * kappa.powf(m - nu);
            let target = kappa.powf(m - a_tot);
            assert!(lhs >= target * (1.0 - 1e-12));
            assert!(lhs <= 2.0 * target * (1.0 + 1e-12));
        }
    }

    #[test]
    fn elementary_inequality_2_10() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..2000 {
            let kappa: f64 = rng.gen_range(0.1..1e4);
            let sigma: f64 = rng.gen_range(1e-6..1.0) * kappa;
            let nu: f64 = rng.gen_range(-4.0..4.0);
            let nu2: f64 = rng.gen_range(-4.0..4.0);
            let nu_pp = nu.min(nu2).min(nu + nu2);
            let q = sigma / kappa;
            let lhs = (q.powf(nu) + 1.0) * (q.powf(nu2) + 1.0);
            let rhs = 3.0 * q.powf(nu_pp) + 1.0;
            assert!(lhs <= rhs * (1.0 + 1e-12), "q={q} nu={nu} nu'={nu2}");
        }
    }

    #[test]
    fn product_regularity_examples() {
        assert_eq!(product_regularity(1.0, 1.0, -1.0, 1.0), (0.0, 1.0));
        assert_eq!(product_regularity(1.0, -1.0, 2.0, 2.0), (3.0, -1.0));
        let (m, nu) = product_regularity(1.7, 0.4, 0.0, 0.0);
        assert_relative_eq!(m, 1.7);
        assert_relative_eq!(nu, 0.0f64.min(0.4));
    }

    #[test]
    fn product_regularity_commutative_and_associative() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(19);
        for _ in 0..300 {
            let t: Vec<(f64, f64)> = (0..3)
                .map(|_| (rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)))
                .collect();
            let ab = product_regularity(t[0].0, t[0].1, t[1].0, t[1].1);
            let ba = product_regularity(t[1].0, t[1].1, t[0].0, t[0].1);
            assert_eq!(ab, ba);
            let ab_c = product_regularity(ab.0, ab.1, t[2].0, t[2].1);
            let bc = product_regularity(t[1].0, t[1].1, t[2].0, t[2].1);
            let a_bc = product_regularity(t[0].0, t[0].1, bc.0, bc.1);
            assert_relative_eq!(ab_c.0, a_bc.0, epsilon = 1e-12);
            assert_relative_eq!(ab_c.1, a_bc.1, epsilon = 1e-12);
        }
    }

    fn bracket_power(n: usize, dd: f64, s: f64) -> SymbolSpec {
        SymbolSpec::bracket_power(n, d(dd), s)
    }

    fn quick_sampling() -> SamplingSpec {
        SamplingSpec {
            radii_log2: (0..=10).collect(),
            dirs_per_radius: 12,
            x_samples: 4,
            ..SamplingSpec::default()
        }
    }

    #[test]
    fn estimates_pass_for_bracket_power() {
        let h = bracket_power(1, 1.0, 1.3);
        let rep = check_estimates(&h, 2, 0, 1, &quick_sampling());
        assert!(rep.pass, "failure: {:?}", rep.first_failure());
    }

    #[test]
    fn estimates_fail_for_overdeclared_regularity() {
        // {xi,tau}^s declared with nu = 3d: the ratio grows along the tau
        // axis where <xi> stays bounded.
        let dd = 0.5;
        let h = bracket_power(1, dd, 1.0).redeclared(1.0, 3.0 * dd);
        let rep = check_estimates(&h, 2, 0, 0, &quick_sampling());
        assert!(!rep.pass);
        let bad = rep.first_failure().unwrap();
        let last = *bad.per_radius.last().unwrap();
        let mid = bad.per_radius[bad.per_radius.len() / 2];
        assert!(last > 2.0 * mid, "expected growth, got {:?}", bad.per_radius);
    }

    #[test]
    fn weaker_regularity_claim_also_passes() {
        let dd = 1.0;
        let h = bracket_power(1, dd, 0.7);
        let weak = h.redeclared(0.7, 2.0 * dd - dd / 2.0);
        let rep = check_estimates(&weak, 2, 0, 1, &quick_sampling());
        assert!(rep.pass, "failure: {:?}", rep.first_failure());
    }

    #[test]
    fn tau_independent_classical_symbol_in_smm() {
        // p(xi) = <xi>^m as a symbol constant in tau: class (m, m).
        let m = 1.4;
        let h = SymbolSpec::multiplier(1, d(1.0), m, m, move |xi, _tau| {
            Complex64::new(angle_bracket(xi).powf(m), 0.0)
        });
        let rep = check_estimates(&h, 2, 0, 1, &quick_sampling());
        assert!(rep.pass, "failure: {:?}", rep.first_failure());
    }

    #[test]
    fn heat_symbol_class_and_rejection() {
        let a = 0.4;
        let dd = 2.0 * a;
        let da = d(dd);
        let p = SymbolSpec::multiplier(1, da, dd, dd, move |xi, _| {
            Complex64::new(smooth_abs(xi).powf(2.0 * a), 0.0)
        });
        let h = heat_symbol(&p).unwrap();
        assert_eq!(h.order(), dd);
        assert_eq!(h.regularity(), dd);
        let rep = check_estimates(&h, 2, 0, 1, &quick_sampling());
        assert!(rep.pass, "failure: {:?}", rep.first_failure());

        let mismatched = p.redeclared(dd + 0.5, dd);
        assert!(heat_symbol(&mismatched).is_err());
    }

    #[test]
    fn heat_symbol_accepts_drift_example() {
        // [xi] + i b xi, order 1, d = 1
        let b = 0.5;
        let p = SymbolSpec::multiplier(1, d(1.0), 1.0, 1.0, move |xi, _| {
            Complex64::new(smooth_abs(xi), b * xi[0])
        });
        let h = heat_symbol(&p).unwrap();
        assert_eq!((h.order(), h.regularity()), (1.0, 1.0));
        let margin = verify_strong_ellipticity(&p, &quick_sampling());
        assert!(margin > 0.49, "margin = {margin}");
    }

    #[test]
    fn ellipticity_margins() {
        let a = 0.3;
        let p = SymbolSpec::multiplier(1, d(2.0 * a), 2.0 * a, 2.0 * a, move |xi, _| {
            Complex64::new(smooth_abs(xi).powf(2.0 * a), 0.0)
        });
        let margin = verify_strong_ellipticity(&p, &quick_sampling());
        assert!(margin >= 2f64.powf(-2.0 * a) - 1e-9, "margin = {margin}");

        let sign_changing = SymbolSpec::multiplier(1, d(1.0), 1.0, 1.0, |xi, _| {
            Complex64::new(xi[0], 0.0)
        });
        assert!(verify_strong_ellipticity(&sign_changing, &quick_sampling()) <= 0.0);
    }

    #[test]
    fn parametrix_principal_values_and_class() {
        // p0 = <xi>^2, at (xi, tau) = (0, 1): 1/(1+i)
        let p0 = SymbolSpec::multiplier(1, d(2.0), 2.0, 2.0, |xi, _| {
            Complex64::new(angle_bracket(xi).powi(2), 0.0)
        });
        let k0 = parametrix_principal(&p0, ELLIPTICITY_THRESHOLD).unwrap();
        assert_eq!((k0.order(), k0.regularity()), (-2.0, 2.0));
        let v = k0.eval(&[0.0], &[0.0], 1.0);
        assert_relative_eq!(v.re, 0.5, epsilon = 1e-14);
        assert_relative_eq!(v.im, -0.5, epsilon = 1e-14);

        // pointwise reciprocal of [xi]^{2a} at tau=0, xi=0
        let a = 0.35;
        let p1 = SymbolSpec::multiplier(1, d(2.0 * a), 2.0 * a, 2.0 * a, move |xi, _| {
            Complex64::new(smooth_abs(xi).powf(2.0 * a), 0.0)
        });
        let k1 = parametrix_principal(&p1, ELLIPTICITY_THRESHOLD).unwrap();
        let expect = smooth_abs(&[0.0]).powf(-2.0 * a);
        assert_relative_eq!(k1.eval(&[0.0], &[0.0], 0.0).re, expect, epsilon = 1e-12);
        let rep = check_estimates(&k1, 2, 0, 1, &quick_sampling());
        assert!(rep.pass, "failure: {:?}", rep.first_failure());
    }

    #[test]
    fn parametrix_principal_rejects_nonelliptic() {
        let p = SymbolSpec::multiplier(1, d(1.0), 1.0, 1.0, |xi, _| Complex64::new(xi[0], 0.0));
        assert!(matches!(
            parametrix_principal(&p, ELLIPTICITY_THRESHOLD),
            Err(Error::NotElliptic { .. })
        ));
    }

    #[test]
    fn finite_difference_matches_analytic() {
        // d^2/dxi^2 of <xi>^3 = 3<xi> + 6 xi^2 <xi>^{-1} - 3 xi^2 ... check
        // numerically against exact formula at a few points.
        let h = SymbolSpec::multiplier(1, d(1.0), 3.0, 3.0, |xi, _| {
            Complex64::new(angle_bracket(xi).powi(3), 0.0)
        });
        for &x in &[0.0f64, 0.7, 3.0, -12.0] {
            let s = (1.0 + x * x).sqrt();
            // f = s^3, f' = 3 s x, f'' = 3 s + 3 x^2 / s
            let exact = 3.0 * s + 3.0 * x * x / s;
            let fd = h.deriv(&[2], &[0], 0, &[0.0], &[x], 0.0).re;
            assert_relative_eq!(fd, exact, max_relative = 1e-5);
        }
    }
}
