//! Parabolic solves `Pu + d_t u = f` on the periodic space-time grid, the
//! parametrix chain with measured residual orders, and the global/local
//! regularity-lifting experiments.

use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use crate::quantize::{
    apply_multiplier, apply_xdep, fft_nd, theta, AnisoGrid, GridFunction, XDEP_BUDGET,
};
use crate::spaces::{
    beta_profile, beta_profile_banded, holder_scan, regularity_scan, regularity_scan_cut,
    CutoffFamily,
};
use crate::symbols::{
    angle_bracket, bracket, heat_symbol, parametrix_principal, smooth_abs, Anisotropy, DerivEval,
    Eval, SymbolSpec, ELLIPTICITY_THRESHOLD,
};
use crate::{Error, Result};

/// Mark a spatial (tau-independent) symbol as such: its tau-derivatives
/// vanish identically, which spares the estimate checker from numerically
/// differentiating a constant at large radii.
fn tau_independent(sym: SymbolSpec) -> SymbolSpec {
    let inner = sym.clone();
    let derivs: DerivEval = Arc::new(move |alpha, j, x, xi, tau| {
        if j > 0 {
            Some(Complex64::new(0.0, 0.0))
        } else if alpha.iter().all(|&a| a == 0) {
            Some(inner.eval(x, xi, tau))
        } else {
            None
        }
    });
    sym.with_analytic_derivs(derivs)
}

/// `[xi]^{2a}`: the constant-coefficient fractional-Laplacian symbol,
/// class `(2a, 2a)` with anisotropy `d = 2a`.
pub fn frac_lap_symbol(n: usize, a: f64) -> Result<SymbolSpec> {
    if !(0.0 < a && a < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "fractional order must lie in (0,1), got {a}"
        )));
    }
    let d = Anisotropy::new(2.0 * a)?;
    Ok(tau_independent(SymbolSpec::multiplier(
        n,
        d,
        2.0 * a,
        2.0 * a,
        move |xi, _| Complex64::new(smooth_abs(xi).powf(2.0 * a), 0.0),
    )))
}

/// `<xi>^2`: Laplacian-like symbol, class `(2, 2)`, anisotropy `d = 2`.
pub fn laplacian_symbol(n: usize) -> SymbolSpec {
    let d = Anisotropy::new(2.0).unwrap();
    tau_independent(SymbolSpec::multiplier(n, d, 2.0, 2.0, |xi, _| {
        Complex64::new(angle_bracket(xi).powi(2), 0.0)
    }))
}

/// `<xi>^m` for fractional orders (used by the lifting corpus at
/// non-integer `d`), class `(m, m)`, anisotropy `d = m`.
pub fn bessel_symbol(n: usize, m: f64) -> Result<SymbolSpec> {
    let d = Anisotropy::new(m)?;
    Ok(tau_independent(SymbolSpec::multiplier(
        n,
        d,
        m,
        m,
        move |xi, _| Complex64::new(angle_bracket(xi).powf(m), 0.0),
    )))
}

/// `[xi] + i b . xi`: square-root Laplacian with drift, class `(1, 1)`.
pub fn drift_symbol(b: Vec<f64>) -> SymbolSpec {
    let n = b.len();
    let d = Anisotropy::new(1.0).unwrap();
    tau_independent(SymbolSpec::multiplier(n, d, 1.0, 1.0, move |xi, _| {
        let dot: f64 = b.iter().zip(xi).map(|(bi, xii)| bi * xii).sum();
        Complex64::new(smooth_abs(xi), dot)
    }))
}

/// `(1 + eps sin x_1) [xi]^{2a}`: the x-dependent corpus symbol
/// (2 pi-periodic in x), class `(2a, 2a)`.
pub fn modulated_frac_lap(n: usize, a: f64, eps: f64) -> Result<SymbolSpec> {
    if !(0.0 < a && a < 1.0) || eps.abs() >= 1.0 {
        return Err(Error::InvalidParameter(
            "need 0 < a < 1 and |eps| < 1 for ellipticity".into(),
        ));
    }
    let d = Anisotropy::new(2.0 * a)?;
    Ok(SymbolSpec::new(
        n,
        d,
        2.0 * a,
        2.0 * a,
        true,
        Arc::new(move |x, xi, _tau| {
            Complex64::new((1.0 + eps * x[0].sin()) * smooth_abs(xi).powf(2.0 * a), 0.0)
        }),
    ))
}

/// Exact constant-coefficient solve: `u = OP((p + i tau)^{-1}) f`.
pub fn solve_constant(p: &SymbolSpec, f: &GridFunction) -> Result<GridFunction> {
    if p.x_dependent() {
        return Err(Error::InvalidParameter(
            "solve_constant requires an x-independent symbol".into(),
        ));
    }
    let k0 = parametrix_principal(p, ELLIPTICITY_THRESHOLD)?;
    apply_multiplier(&k0, f)
}

/// Apply the heat operator `OP(p + i tau)` (multiplier fast path for
/// x-independent p).
pub fn apply_heat(p: &SymbolSpec, u: &GridFunction) -> Result<GridFunction> {
    let h = heat_symbol(p)?;
    if p.x_dependent() {
        apply_xdep(&h, u, XDEP_BUDGET)
    } else {
        apply_multiplier(&h, u)
    }
}

/// Left-parametrix chain `k_0, ..., k_{J-1}` for `h = p + i tau`:
/// `k_0 = (p + i tau)^{-1}` and recursively
/// `k_j = -k_0 sum_{l + |alpha| = j, |alpha| >= 1} (1/alpha!)
/// D_xi^alpha k_l . d_x^alpha p`, which cancels the truncated Leibniz
/// product `k # h` order by order.
#[derive(Clone)]
pub struct ParametrixChain {
    pub terms: Vec<SymbolSpec>,
    pub base: SymbolSpec,
    pub heat: SymbolSpec,
}

fn multi_alphas(n: usize, total: usize) -> Vec<Vec<usize>> {
    fn rec(n: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == n {
            if cur.iter().sum::<usize>() > 0 {
                out.push(cur.clone());
            }
            return;
        }
        for v in 0..=left {
            cur.push(v);
            rec(n, left - v, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, total, &mut Vec::new(), &mut out);
    out.retain(|a| a.iter().sum::<usize>() == total);
    out
}

pub fn build_parametrix(p: &SymbolSpec, j_depth: usize) -> Result<ParametrixChain> {
    if j_depth == 0 || j_depth > 3 {
        return Err(Error::InvalidParameter(format!(
            "parametrix depth must lie in 1..=3, got {j_depth}"
        )));
    }
    let k0 = parametrix_principal(p, ELLIPTICITY_THRESHOLD)?;
    let d = p.anisotropy();
    let n = p.dim();
    let mut terms = vec![k0.clone()];
    for j in 1..j_depth {
        let prev: Vec<SymbolSpec> = terms.clone();
        let k0c = k0.clone();
        let pc = p.clone();
        let zero = vec![0usize; n];
        let x_dep = p.x_dependent();
        let eval: Eval = Arc::new(move |x, xi, tau| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (l, kl) in prev.iter().enumerate() {
                let a_tot = j - l;
                if a_tot == 0 || a_tot > j {
                    continue;
                }
                for alpha in multi_alphas(kl.dim(), a_tot) {
                    let fact: f64 = alpha.iter().map(|&ai| (1..=ai).product::<usize>() as f64).product();
                    let dk = kl.deriv(&alpha, &zero, 0, x, xi, tau)
                        * Complex64::new(0.0, -1.0).powu(a_tot as u32);
                    let dp = pc.deriv(&zero, &alpha, 0, x, xi, tau);
                    acc += dk * dp / fact;
                }
            }
            -k0c.eval(x, xi, tau) * acc
        });
        terms.push(SymbolSpec::new(
            n,
            d,
            -d.get() - j as f64,
            d.get(),
            x_dep,
            eval,
        ));
    }
    Ok(ParametrixChain {
        terms,
        base: p.clone(),
        heat: heat_symbol(p)?,
    })
}

impl ParametrixChain {
    pub fn depth(&self) -> usize {
        self.terms.len()
    }

    /// Sum of the chain terms as one symbol, class `(-d, d)`.
    pub fn sum_symbol(&self) -> SymbolSpec {
        let terms = self.terms.clone();
        let d = self.base.anisotropy();
        let n = self.base.dim();
        let x_dep = self.base.x_dependent();
        let eval: Eval = Arc::new(move |x, xi, tau| {
            terms.iter().map(|k| k.eval(x, xi, tau)).sum()
        });
        SymbolSpec::new(n, d, -d.get(), d.get(), x_dep, eval)
    }
}

/// Band-decay measurement of `OP(k) OP(h) - I`.
#[derive(Debug, Clone, Serialize)]
pub struct ResidualReport {
    pub bands: Vec<f64>,
    pub amplification: Vec<f64>,
    pub slope: f64,
    pub target_slope: f64,
    pub slope_slack: f64,
    pub pass: bool,
}

/// Random unit-L2 probe with spectrum concentrated on the bracket band
/// `[k_center / sqrt 2, k_center sqrt 2]`.
pub fn band_probe(grid: &AnisoGrid, k_center: f64, seed: u64) -> Result<GridFunction> {
    use rand::{Rng, SeedableRng};
    let d = grid.anisotropy();
    let lo = k_center / std::f64::consts::SQRT_2;
    let hi = k_center * std::f64::consts::SQRT_2;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut spec = vec![Complex64::new(0.0, 0.0); grid.len()];
    let mut hits = 0usize;
    for (i, v) in spec.iter_mut().enumerate() {
        let (xi, tau) = grid.freq(i);
        let k = bracket(&xi, tau, d);
        if k >= lo && k <= hi {
            *v = Complex64::from_polar(1.0, rng.gen_range(0.0..std::f64::consts::TAU));
            hits += 1;
        }
    }
    if hits == 0 {
        return Err(Error::InvalidParameter(format!(
            "band at bracket {k_center} contains no lattice modes"
        )));
    }
    let values = fft_nd(&spec, &grid.shape(), true);
    let mut u = GridFunction { grid: grid.clone(), values };
    let norm = u.l2_norm();
    u = u.scaled(Complex64::new(1.0 / norm, 0.0));
    Ok(u)
}

/// Slope slack accepted by residual and commutator order fits.
pub const SLOPE_SLACK: f64 = 0.3;

fn lsq_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let cov: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    cov / var
}

/// Measure the L2 amplification of `OP(sum k_j) OP(p + i tau) - I` on unit
/// band probes and fit the log-log decay slope; target is `-J` for a
/// depth-J chain.
pub fn residual_order(
    chain: &ParametrixChain,
    bands: &[f64],
    grid: &AnisoGrid,
    seed: u64,
) -> Result<ResidualReport> {
    if bands.len() < 2 {
        return Err(Error::InvalidParameter("need >= 2 bands".into()));
    }
    let k_sum = chain.sum_symbol();
    let x_dep = chain.base.x_dependent();
    let mut amps = Vec::with_capacity(bands.len());
    for (bi, &kc) in bands.iter().enumerate() {
        let probe = band_probe(grid, kc, seed ^ ((bi as u64) << 16))?;
        let v = if x_dep {
            apply_xdep(&chain.heat, &probe, XDEP_BUDGET)?
        } else {
            apply_multiplier(&chain.heat, &probe)?
        };
        let w = if x_dep {
            apply_xdep(&k_sum, &v, XDEP_BUDGET)?
        } else {
            apply_multiplier(&k_sum, &v)?
        };
        let r = w.sub(&probe)?;
        amps.push(r.l2_norm() / probe.l2_norm());
    }
    let xs: Vec<f64> = bands.iter().map(|b| b.log2()).collect();
    let ys: Vec<f64> = amps.iter().map(|a| a.max(1e-300).log2()).collect();
    let slope = lsq_slope(&xs, &ys);
    let target = -(chain.depth() as f64);
    Ok(ResidualReport {
        bands: bands.to_vec(),
        amplification: amps,
        slope,
        target_slope: target,
        slope_slack: SLOPE_SLACK,
        pass: slope <= target + SLOPE_SLACK,
    })
}

/// Like [`band_probe`] but restricted to the spatial sector
/// `|tau| <= <xi>^d` of the band. Operator-order fits use these: the
/// symbol-class bound of a commutator or spatial-derivative term is
/// realized where the spatial frequency dominates the bracket, and
/// full-band probes (volume-dominated by large tau) would under-read the
/// order for d > 1.
pub fn sector_probe(grid: &AnisoGrid, k_center: f64, seed: u64) -> Result<GridFunction> {
    use rand::{Rng, SeedableRng};
    let d = grid.anisotropy();
    let lo = k_center / std::f64::consts::SQRT_2;
    let hi = k_center * std::f64::consts::SQRT_2;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut spec = vec![Complex64::new(0.0, 0.0); grid.len()];
    let mut hits = 0usize;
    for (i, v) in spec.iter_mut().enumerate() {
        let (xi, tau) = grid.freq(i);
        let k = bracket(&xi, tau, d);
        if k >= lo && k <= hi && tau.abs() <= angle_bracket(&xi).powf(d.get()) {
            *v = Complex64::from_polar(1.0, rng.gen_range(0.0..std::f64::consts::TAU));
            hits += 1;
        }
    }
    if hits == 0 {
        return Err(Error::InvalidParameter(format!(
            "sector band at bracket {k_center} contains no lattice modes"
        )));
    }
    let values = fft_nd(&spec, &grid.shape(), true);
    let mut u = GridFunction { grid: grid.clone(), values };
    let norm = u.l2_norm();
    u = u.scaled(Complex64::new(1.0 / norm, 0.0));
    Ok(u)
}

/// Measured operator order of a map `u -> T u` by sector-probe amplification.
pub fn operator_order<T>(grid: &AnisoGrid, bands: &[f64], seed: u64, op: T) -> Result<f64>
where
    T: Fn(&GridFunction) -> Result<GridFunction>,
{
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (bi, &kc) in bands.iter().enumerate() {
        let probe = sector_probe(grid, kc, seed ^ ((bi as u64) << 20))?;
        let out = op(&probe)?;
        xs.push(kc.log2());
        ys.push((out.l2_norm() / probe.l2_norm()).max(1e-300).log2());
    }
    Ok(lsq_slope(&xs, &ys))
}

/// Global lifting experiment: forcing with measured critical regularity s
/// must produce a solution with critical regularity s + d.
#[derive(Debug, Clone, Serialize)]
pub struct LiftReport {
    pub crit_f: f64,
    pub crit_u: f64,
    pub shift: f64,
    pub d: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Tolerance on critical-regularity shifts.
pub const SHIFT_TOL: f64 = 0.2;

pub fn lifting_experiment(
    p: &SymbolSpec,
    s: f64,
    p_int: f64,
    base: &AnisoGrid,
    seed: u64,
) -> Result<LiftReport> {
    let d = p.anisotropy().get();
    let n = base.n as f64;
    let beta = s + (n + d) / 2.0;
    let top = s + d + 1.5;
    let s_grid: Vec<f64> = (0..)
        .map(|i| -0.5 + i as f64 * 0.1)
        .take_while(|&v| v <= top)
        .collect();
    let scan_f = regularity_scan(|g| beta_profile(g, beta, seed), base, 2, &s_grid, p_int)?;
    let scan_u = regularity_scan(
        |g| solve_constant(p, &beta_profile(g, beta, seed)).expect("elliptic corpus symbol"),
        base,
        2,
        &s_grid,
        p_int,
    )?;
    let shift = scan_u.critical_s - scan_f.critical_s;
    Ok(LiftReport {
        crit_f: scan_f.critical_s,
        crit_u: scan_u.critical_s,
        shift,
        d,
        tolerance: SHIFT_TOL,
        pass: (shift - d).abs() <= SHIFT_TOL && !scan_u.at_boundary,
    })
}

/// Local lifting experiment: the commutator bootstrap of the cutoff family.
#[derive(Debug, Clone, Serialize)]
pub struct LocalLiftReport {
    /// Measured global critical regularity of u (the weak a-priori info).
    pub crit_u_global: f64,
    /// Measured local critical regularity of the forcing inside the window.
    pub crit_f_local: f64,
    /// Measured order of the commutator `[H, psi]` (band probes); theory: d - 1.
    pub commutator_order: f64,
    /// Certificate chain: cert_0 = global crit, cert_j = min(cert_{j-1} +
    /// (d - commutator order), crit_f_local + d).
    pub certificates: Vec<f64>,
    /// Stages until the certificate reaches the target.
    pub stages_needed: usize,
    /// Shortfall of the single-stage certificate vs the target.
    pub single_stage_shortfall: f64,
    /// Refinement stability of the local norm at each stage certificate.
    pub stage_stable: Vec<bool>,
    /// Measured local critical regularity of the innermost cutoff of u.
    pub crit_local_final: f64,
    pub target: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Tolerance on the local critical regularity.
pub const LOCAL_TOL: f64 = 0.25;

/// Far-field mask: 0 on a neighborhood of the window, rising smoothly to 1.
/// Masks in time when the window's temporal support leaves room in the time
/// box (then the spatial multiplier part of the heat operator annihilates
/// the window slices exactly); otherwise masks radially in space (then the
/// `i tau` part does).
fn far_mask(
    base: &AnisoGrid,
    window: &CutoffFamily,
) -> Result<Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>> {
    let d = window.d.get();
    let r_outer = window.radii[0];
    let t_out = r_outer.powf(d);
    let half_t = base.l_t / 2.0;
    let half_x = base.l_x / 2.0;
    let make = |g0: f64, g1: f64| (g0, g1);
    if 1.02 * t_out + 0.2 < 0.95 * half_t {
        let (g0, g1) = make(1.02 * t_out, (1.02 * t_out + 1.0).min(0.95 * half_t));
        let ct = window.center_t;
        Ok(Arc::new(move |_x: &[f64], t: f64| {
            crate::symbols::smoothstep(((t - ct).abs() - g0) / (g1 - g0))
        }))
    } else if 1.02 * r_outer + 0.2 < 0.95 * half_x {
        let (g0, g1) = make(1.02 * r_outer, (1.02 * r_outer + 1.0).min(0.95 * half_x));
        let cx = window.center_x.clone();
        Ok(Arc::new(move |x: &[f64], _t: f64| {
            let rho = x
                .iter()
                .zip(&cx)
                .map(|(a, c)| (a - c) * (a - c))
                .sum::<f64>()
                .sqrt();
            crate::symbols::smoothstep((rho - g0) / (g1 - g0))
        }))
    } else {
        Err(Error::InvalidParameter(
            "window leaves no room for a far field in either direction".into(),
        ))
    }
}

/// Synthesize the local-lifting field on a grid: `u = K f + v_far` where
/// `f` is a rough profile (critical regularity s) and `v_far` is an
/// equally rough half-band field masked away from the window, so u has
/// global critical regularity s but solves `Hu = f + H v_far` with the
/// extra forcing vanishing on the window. The half-banding keeps the
/// sampled product alias-free, so the heat image of `v_far` vanishes on
/// the window to near machine precision instead of leaking spectrally.
fn local_field(
    p: &SymbolSpec,
    g: &AnisoGrid,
    beta: f64,
    seed: u64,
    mask: &(dyn Fn(&[f64], f64) -> f64 + Send + Sync),
) -> GridFunction {
    let kf = solve_constant(p, &beta_profile(g, beta, seed)).expect("elliptic corpus symbol");
    let rough = beta_profile_banded(g, beta, seed ^ 0xfa9);
    let v_far = rough.pointwise(|x, t| Complex64::new(mask(x, t), 0.0));
    kf.add(&v_far).expect("same grid")
}

pub fn local_lifting_experiment(
    p: &SymbolSpec,
    s: f64,
    p_int: f64,
    base: &AnisoGrid,
    window: &CutoffFamily,
    seed: u64,
) -> Result<LocalLiftReport> {
    if p.x_dependent() {
        return Err(Error::InvalidParameter(
            "local lifting experiment uses an x-independent operator".into(),
        ));
    }
    let d = p.anisotropy().get();
    let n = base.n as f64;
    let beta = s + (n + d) / 2.0;
    // the cut scans see strongly suppressed (preasymptotic) growth for
    // steep spectra; give them headroom and, for large d, one extra level
    let top = s + d + 2.0;
    let s_grid: Vec<f64> = (0..)
        .map(|i| -0.5 + i as f64 * 0.1)
        .take_while(|&v| v <= top)
        .collect();
    let cut_levels = if d > 1.5 { 3 } else { 2 };
    let mask = far_mask(base, window)?;

    // 1. global a-priori regularity of u
    let scan_u = regularity_scan(
        |g| local_field(p, g, beta, seed, mask.as_ref()),
        base,
        2,
        &s_grid,
        p_int,
    )?;
    // 2. local regularity of the forcing inside the window (cut-calibrated
    // at the design value s)
    let scan_f = regularity_scan_cut(
        |g| apply_heat(p, &local_field(p, g, beta, seed, mask.as_ref())).expect("heat apply"),
        window.psi(0),
        base,
        2,
        &s_grid,
        p_int,
        s,
    )?;
    // 3. commutator order by band probes on the fine grid
    let fine = base.refined();
    let kmax = std::f64::consts::PI * fine.n_x as f64 / fine.l_x / 2.0;
    let n_bands: Vec<f64> = [4.0, 8.0, 16.0, 32.0]
        .iter()
        .copied()
        .filter(|&k| k * std::f64::consts::SQRT_2 < kmax)
        .collect();
    let commutator_order = operator_order(&fine, &n_bands, seed ^ 0xc0, |probe| {
        let cut = |u: &GridFunction| {
            u.pointwise(|x, t| Complex64::new(window.psi(0)(x, t), 0.0))
        };
        let h_psi = apply_heat(p, &cut(probe))?;
        let psi_h = cut(&apply_heat(p, probe)?);
        h_psi.sub(&psi_h)
    })?;

    // 4. certificate chain: each stage j lifts by d - (commutator order),
    // since the commutator term joins the forcing at the previous
    // certificate minus the commutator order
    let target = s + d;
    let gain = (d - commutator_order).max(0.05);
    let mut certificates = vec![scan_u.critical_s];
    let mut stages = 0usize;
    while *certificates.last().unwrap() < target - 0.1 && stages < 8 {
        let next = (certificates.last().unwrap() + gain).min(target);
        certificates.push(next);
        stages += 1;
    }
    let single_stage_shortfall = target - (scan_u.critical_s + gain).min(target);

    // 5. per-stage stability: the local norm of psi_j u at the stage
    // certificate (minus a margin) must be refinement-stable
    let margin = 0.3;
    let mut stage_stable = Vec::with_capacity(stages);
    for j in 1..=stages {
        let psi_j = window.psi((j - 1).min(window.count() - 1));
        let s_j = certificates[j] - margin;
        let u0 = local_field(p, base, beta, seed, mask.as_ref());
        let u1 = local_field(p, &fine, beta, seed, mask.as_ref());
        let n0 = crate::spaces::local_norm(&u0, &psi_j, s_j, p.anisotropy(), crate::spaces::NormMethod::Hp { p: p_int })?;
        let n1 = crate::spaces::local_norm(&u1, &psi_j, s_j, p.anisotropy(), crate::spaces::NormMethod::Hp { p: p_int })?;
        stage_stable.push(n1 <= crate::spaces::SCAN_GROWTH * n0);
    }

    // 6. measured local critical regularity of the innermost cutoff of u
    // (cut-calibrated at the target)
    let last = window.count() - 1;
    let scan_local = regularity_scan_cut(
        |g| local_field(p, g, beta, seed, mask.as_ref()),
        window.psi(last),
        base,
        cut_levels,
        &s_grid,
        p_int,
        target,
    )?;

    let pass = (scan_local.critical_s - target).abs() <= LOCAL_TOL
        && (commutator_order - (d - 1.0)).abs() <= SLOPE_SLACK
        && stage_stable.iter().all(|&b| b);
    Ok(LocalLiftReport {
        crit_u_global: scan_u.critical_s,
        crit_f_local: scan_f.critical_s,
        commutator_order,
        certificates,
        stages_needed: stages,
        single_stage_shortfall,
        stage_stable,
        crit_local_final: scan_local.critical_s,
        target,
        tolerance: LOCAL_TOL,
        pass,
    })
}

/// Holder lifting: measured Holder-exponent gain of the solve, via the
/// embedding route (the Bessel scale measured at large p, reduced into the
/// Holder window by order reduction).
#[derive(Debug, Clone, Serialize)]
pub struct HolderLiftReport {
    pub holder_crit_f: f64,
    pub holder_crit_u_reduced: f64,
    pub gain: f64,
    pub d: f64,
    pub epsilon: f64,
    pub pass: bool,
}

/// Default epsilon-loss budget for the Holder lifting check.
pub const HOLDER_EPS: f64 = 0.1;

pub fn holder_lifting_check(
    p: &SymbolSpec,
    s: f64,
    base: &AnisoGrid,
    seed: u64,
) -> Result<HolderLiftReport> {
    let d = p.anisotropy().get();
    let n = base.n as f64;
    // forcing built to have Holder-scale critical exponent ~ s: the hp
    // critical value at p -> inf is beta - (n+d)/2 - (n+d)/p -> sup-scale
    // beta - (n+d); land both scans inside (0, 1)
    let beta = s + (n + d);
    let s_grid: Vec<f64> = (1..=9).map(|i| i as f64 * 0.1).collect();
    let scan_f = holder_scan(|g| beta_profile(g, beta, seed), base, 2, &s_grid)?;
    // Theta^d u has the same smoothness scale as f but is NOT f (the solve
    // multiplier (p + i tau)^{-1} differs from the bracket power)
    let scan_u = holder_scan(
        |g| theta(d, &solve_constant(p, &beta_profile(g, beta, seed)).expect("elliptic")),
        base,
        2,
        &s_grid,
    )?;
    let gain = (scan_u.critical_s + d) - scan_f.critical_s;
    Ok(HolderLiftReport {
        holder_crit_f: scan_f.critical_s,
        holder_crit_u_reduced: scan_u.critical_s,
        gain,
        d,
        epsilon: HOLDER_EPS,
        pass: gain >= d - 2.0 * HOLDER_EPS && gain <= d + 0.2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantize::random_band_limited;
    use crate::spaces::hp_norm;

    fn grid_1d(n_x: usize, n_t: usize, dd: f64) -> AnisoGrid {
        AnisoGrid::balanced(
            1,
            n_x,
            std::f64::consts::TAU,
            n_t,
            Anisotropy::new(dd).unwrap(),
        )
        .unwrap()
    }

    fn rel_l2(a: &GridFunction, b: &GridFunction) -> f64 {
        a.sub(b).unwrap().l2_norm() / b.l2_norm().max(1e-300)
    }

    #[test]
    fn solve_constant_round_trip() {
        let a = 0.4;
        let p = frac_lap_symbol(1, a).unwrap();
        let g = grid_1d(32, 32, 2.0 * a);
        let f = random_band_limited(&g, 12, 5);
        let u = solve_constant(&p, &f).unwrap();
        let back = apply_heat(&p, &u).unwrap();
        assert!(rel_l2(&back, &f) < 1e-10);
        // single mode division
        let w = GridFunction::plane_wave(g.clone(), &[3], 2);
        let uw = solve_constant(&p, &w).unwrap();
        let xi0 = std::f64::consts::TAU * 3.0 / g.l_x;
        let tau0 = std::f64::consts::TAU * 2.0 / g.l_t;
        let lam = Complex64::new(smooth_abs(&[xi0]).powf(2.0 * a), tau0);
        assert!(rel_l2(&uw, &w.scaled(lam.inv())) < 1e-10);
    }

    #[test]
    fn solve_constant_even_symmetry() {
        // f real and even in x, real even symbol: steady (tau = 0) component
        // of u stays real and even
        let a = 0.5;
        let p = frac_lap_symbol(1, a).unwrap();
        let g = grid_1d(32, 16, 2.0 * a);
        let f = GridFunction::from_fn(g.clone(), |x, _t| Complex64::new(x[0].cos(), 0.0));
        let u = solve_constant(&p, &f).unwrap();
        // check u(x) vs u(-x) (index N-i) at fixed t, and small imaginary part
        for t in 0..g.n_t {
            for i in 1..g.n_x {
                let a1 = u.values[i * g.n_t + t];
                let a2 = u.values[(g.n_x - i) * g.n_t + t];
                assert!((a1 - a2).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn parametrix_chain_structure() {
        let a = 0.5;
        let p = frac_lap_symbol(1, a).unwrap();
        let chain = build_parametrix(&p, 1).unwrap();
        assert_eq!(chain.depth(), 1);
        // x-independent: k_1 vanishes identically
        let chain2 = build_parametrix(&p, 2).unwrap();
        for &(xi, tau) in &[(0.5, 1.0), (3.0, -7.0), (20.0, 100.0)] {
            let v = chain2.terms[1].eval(&[0.3], &[xi], tau);
            assert!(v.norm() < 1e-8, "k1({xi},{tau}) = {v}");
        }
        assert!(build_parametrix(&p, 4).is_err());
    }

    #[test]
    fn residual_roundoff_for_x_independent() {
        let a = 0.4;
        let p = frac_lap_symbol(1, a).unwrap();
        let g = grid_1d(64, 64, 2.0 * a);
        let chain = build_parametrix(&p, 1).unwrap();
        let rep = residual_order(&chain, &[4.0, 8.0, 16.0], &g, 11).unwrap();
        for amp in &rep.amplification {
            assert!(*amp < 1e-10, "amp = {amp}");
        }
    }

    #[test]
    fn residual_slopes_on_x_dependent_symbol() {
        let a = 0.5;
        let p = modulated_frac_lap(1, a, 0.5).unwrap();
        let g = grid_1d(128, 128, 2.0 * a);
        let bands = [4.0, 8.0, 16.0, 32.0];
        let r1 = residual_order(&build_parametrix(&p, 1).unwrap(), &bands, &g, 23).unwrap();
        assert!(
            r1.slope <= -1.0 + SLOPE_SLACK,
            "J=1 slope {} amps {:?}",
            r1.slope,
            r1.amplification
        );
        assert!(r1.pass);
        let r2 = residual_order(&build_parametrix(&p, 2).unwrap(), &bands, &g, 23).unwrap();
        assert!(
            r2.slope <= -2.0 + SLOPE_SLACK,
            "J=2 slope {} amps {:?}",
            r2.slope,
            r2.amplification
        );
        // monotone improvement in J
        assert!(r2.slope <= r1.slope - 0.5, "J=1 {} J=2 {}", r1.slope, r2.slope);
        // amplification decreases along bands
        for w in r2.amplification.windows(2) {
            assert!(w[1] < w[0]);
        }
    }

    #[test]
    fn forward_boundedness_stable() {
        // hp_norm(OP(p + i tau) u, s - d) <= C hp_norm(u, s), C stable
        let a = 0.4;
        let p = frac_lap_symbol(1, a).unwrap();
        let d = Anisotropy::new(2.0 * a).unwrap();
        let s = 1.3;
        let ratio_on = |g: &AnisoGrid| -> f64 {
            let u = beta_profile(g, 2.0, 13);
            let hu = apply_heat(&p, &u).unwrap();
            hp_norm(&hu, s - 2.0 * a, 2.0, d).unwrap() / hp_norm(&u, s, 2.0, d).unwrap()
        };
        let g = grid_1d(32, 32, 2.0 * a);
        let c0 = ratio_on(&g);
        let c1 = ratio_on(&g.refined());
        assert!(c1 <= 1.2 * c0, "c0={c0} c1={c1}");
    }

    #[test]
    fn corollary_l2_control_stable() {
        // u = K f with f in L_p: hp_norm(u, d) <= C ||f||_p, C stable
        let a = 0.5;
        let p = frac_lap_symbol(1, a).unwrap();
        let d = Anisotropy::new(2.0 * a).unwrap();
        let beta = 1.4; // critical s of f ~ 0.4 > 0: f comfortably in L_2
        let ratio_on = |g: &AnisoGrid| -> f64 {
            let f = beta_profile(g, beta, 17);
            let u = solve_constant(&p, &f).unwrap();
            hp_norm(&u, 2.0 * a, 2.0, d).unwrap() / f.lp_norm(2.0)
        };
        let g = grid_1d(32, 32, 2.0 * a);
        let c0 = ratio_on(&g);
        let c1 = ratio_on(&g.refined());
        assert!(c1 <= 1.5 * c0, "c0={c0} c1={c1}");
    }

    #[test]
    fn lifting_d1() {
        let p = drift_symbol(vec![0.5]);
        let g = grid_1d(64, 64, 1.0);
        let rep = lifting_experiment(&p, 1.0, 2.0, &g, 31).unwrap();
        assert!(rep.pass, "{rep:?}");
        assert!((rep.shift - 1.0).abs() <= 0.2, "{rep:?}");
    }

    #[test]
    fn lifting_band_limited_tops_out() {
        // C-infinity band-limited forcing: solution scan reaches the top
        let a = 0.5;
        let p = frac_lap_symbol(1, a).unwrap();
        let g = grid_1d(32, 32, 2.0 * a);
        let s_grid: Vec<f64> = (0..=20).map(|i| i as f64 * 0.2).collect();
        let scan = regularity_scan(
            |gr| {
                let f = GridFunction::plane_wave(gr.clone(), &[2], 1);
                solve_constant(&p, &f).unwrap()
            },
            &g,
            2,
            &s_grid,
            2.0,
        )
        .unwrap();
        assert!(scan.at_boundary);
    }

    #[test]
    fn local_lifting_d1() {
        let p = bessel_symbol(1, 1.0).unwrap();
        let g = grid_1d(256, 256, 1.0);
        let window = CutoffFamily::new(
            vec![std::f64::consts::PI],
            g.l_t / 2.0,
            2.0,
            0.8,
            1,
            Anisotropy::new(1.0).unwrap(),
        )
        .unwrap();
        let s = 0.8;
        let rep = local_lifting_experiment(&p, s, 2.0, &g, &window, 41).unwrap();
        assert!(
            (rep.commutator_order - 0.0).abs() <= SLOPE_SLACK,
            "commutator order {}",
            rep.commutator_order
        );
        assert!(
            (rep.crit_local_final - rep.target).abs() <= LOCAL_TOL,
            "{rep:?}"
        );
        // d = 1: a single stage reaches the target
        assert!(rep.stages_needed <= 2, "{rep:?}");
        assert!(rep.pass, "{rep:?}");
    }

    #[test]
    fn holder_lifting_d1() {
        let a = 0.5;
        let p = frac_lap_symbol(1, a).unwrap();
        let g = grid_1d(64, 64, 1.0);
        let rep = holder_lifting_check(&p, 0.6, &g, 51).unwrap();
        assert!(rep.pass, "{rep:?}");
        assert!(rep.gain >= 0.8 && rep.gain <= 1.2, "{rep:?}");
    }
}
