//! Discrete operator application: Fourier multipliers and order-reducing
//! operators on periodic space-time grids, x-dependent Kohn-Nirenberg
//! quadrature, truncated Leibniz products, and the 1D flat-model operators
//! `Xi_pm^t` with the Poisson operator `K0`.

use std::io::{Read as _, Write as _};
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::symbols::{bracket, Anisotropy, SymbolSpec};
use crate::{Error, Result};

/// Periodic space-time sampling lattice with anisotropy weight `d`.
///
/// Layout: row-major over `(x_1, ..., x_n, t)`, t fastest. The frequency
/// lattice is `xi_k = 2 pi k / L_x`, `tau_m = 2 pi m / L_t` with signed
/// (wrap-around) indexing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnisoGrid {
    pub n: usize,
    pub n_x: usize,
    pub l_x: f64,
    pub n_t: usize,
    pub l_t: f64,
    d: f64,
}

fn require_pow2(n: usize, what: &str) -> Result<()> {
    if n >= 2 && n.is_power_of_two() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{what} must be a power of two >= 2, got {n}"
        )))
    }
}

impl AnisoGrid {
    pub fn new(n: usize, n_x: usize, l_x: f64, n_t: usize, l_t: f64, d: Anisotropy) -> Result<Self> {
        if !(n == 1 || n == 2) {
            return Err(Error::InvalidParameter(format!(
                "spatial dimension must be 1 or 2, got {n}"
            )));
        }
        require_pow2(n_x, "N_x")?;
        require_pow2(n_t, "N_t")?;
        if l_x <= 0.0 || l_t <= 0.0 {
            return Err(Error::InvalidParameter("periods must be positive".into()));
        }
        Ok(AnisoGrid {
            n,
            n_x,
            l_x,
            n_t,
            l_t,
            d: d.get(),
        })
    }

    /// Grid whose temporal period is chosen so the maximal `|tau|^{1/d}`
    /// matches the maximal `|xi|` (balanced anisotropic resolution).
    pub fn balanced(n: usize, n_x: usize, l_x: f64, n_t: usize, d: Anisotropy) -> Result<Self> {
        let xi_max = std::f64::consts::PI * n_x as f64 / l_x;
        let tau_max = xi_max.powf(d.get());
        let l_t = std::f64::consts::PI * n_t as f64 / tau_max;
        Self::new(n, n_x, l_x, n_t, l_t, d)
    }

    pub fn anisotropy(&self) -> Anisotropy {
        Anisotropy::new(self.d).expect("validated at construction")
    }

    pub fn len(&self) -> usize {
        self.n_x.pow(self.n as u32) * self.n_t
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Axis lengths in layout order: n spatial axes then time.
    pub fn shape(&self) -> Vec<usize> {
        let mut s = vec![self.n_x; self.n];
        s.push(self.n_t);
        s
    }

    #[inline]
    fn signed(idx: usize, n: usize) -> i64 {
        if idx < n / 2 {
            idx as i64
        } else {
            idx as i64 - n as i64
        }
    }

    #[inline]
    pub fn xi(&self, idx: usize) -> f64 {
        std::f64::consts::TAU * Self::signed(idx, self.n_x) as f64 / self.l_x
    }

    #[inline]
    pub fn tau(&self, idx: usize) -> f64 {
        std::f64::consts::TAU * Self::signed(idx, self.n_t) as f64 / self.l_t
    }

    #[inline]
    pub fn x(&self, idx: usize) -> f64 {
        self.l_x * idx as f64 / self.n_x as f64
    }

    #[inline]
    pub fn t(&self, idx: usize) -> f64 {
        self.l_t * idx as f64 / self.n_t as f64
    }

    /// Decompose a flat index into per-axis indices (layout order).
    pub fn unravel(&self, flat: usize) -> Vec<usize> {
        let shape = self.shape();
        let mut out = vec![0usize; shape.len()];
        let mut rem = flat;
        for ax in (0..shape.len()).rev() {
            out[ax] = rem % shape[ax];
            rem /= shape[ax];
        }
        out
    }

    /// Frequency point `(xi, tau)` for a flat lattice index.
    pub fn freq(&self, flat: usize) -> (Vec<f64>, f64) {
        let idx = self.unravel(flat);
        let xi: Vec<f64> = idx[..self.n].iter().map(|&k| self.xi(k)).collect();
        (xi, self.tau(idx[self.n]))
    }

    /// Space-time point `(x, t)` for a flat lattice index.
    pub fn point(&self, flat: usize) -> (Vec<f64>, f64) {
        let idx = self.unravel(flat);
        let x: Vec<f64> = idx[..self.n].iter().map(|&k| self.x(k)).collect();
        (x, self.t(idx[self.n]))
    }

    /// Cell measure for quadrature weights.
    pub fn cell(&self) -> f64 {
        (self.l_x / self.n_x as f64).powi(self.n as i32) * (self.l_t / self.n_t as f64)
    }

    /// Same periods, doubled counts.
    pub fn refined(&self) -> AnisoGrid {
        AnisoGrid {
            n: self.n,
            n_x: self.n_x * 2,
            l_x: self.l_x,
            n_t: self.n_t * 2,
            l_t: self.l_t,
            d: self.d,
        }
    }
}

/// Complex samples on an [`AnisoGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    pub grid: AnisoGrid,
    pub values: Vec<Complex64>,
}

impl GridFunction {
    pub fn new(grid: AnisoGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(GridFunction { grid, values })
    }

    pub fn zeros(grid: AnisoGrid) -> Self {
        let len = grid.len();
        GridFunction {
            grid,
            values: vec![Complex64::new(0.0, 0.0); len],
        }
    }

    /// Sample `(x, t) -> C` on the grid.
    pub fn from_fn<F>(grid: AnisoGrid, f: F) -> Self
    where
        F: Fn(&[f64], f64) -> Complex64 + Sync,
    {
        let values: Vec<Complex64> = (0..grid.len())
            .into_par_iter()
            .map(|i| {
                let (x, t) = grid.point(i);
                f(&x, t)
            })
            .collect();
        GridFunction { grid, values }
    }

    /// Synthesize from Fourier coefficients `(xi, tau) -> C` (unnormalized
    /// DFT convention: the value passed is the lattice `u_hat / N_total`).
    pub fn from_spectrum<F>(grid: AnisoGrid, f: F) -> Self
    where
        F: Fn(&[f64], f64) -> Complex64 + Sync,
    {
        let total = grid.len() as f64;
        let spectrum: Vec<Complex64> = (0..grid.len())
            .into_par_iter()
            .map(|i| {
                let (xi, tau) = grid.freq(i);
                f(&xi, tau) * total
            })
            .collect();
        let values = fft_nd(&spectrum, &grid.shape(), true);
        GridFunction { grid, values }
    }

    /// On-lattice plane wave `e^{i(x.xi + t tau)}` at signed mode indices.
    pub fn plane_wave(grid: AnisoGrid, k: &[i64], m: i64) -> Self {
        assert_eq!(k.len(), grid.n);
        let kx: Vec<f64> = k
            .iter()
            .map(|&ki| std::f64::consts::TAU * ki as f64 / grid.l_x)
            .collect();
        let tm = std::f64::consts::TAU * m as f64 / grid.l_t;
        GridFunction::from_fn(grid, move |x, t| {
            let phase: f64 = x.iter().zip(&kx).map(|(a, b)| a * b).sum::<f64>() + t * tm;
            Complex64::from_polar(1.0, phase)
        })
    }

    /// Discrete L2 norm with cell weights.
    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.cell()).sqrt()
    }

    /// Discrete Lp norm of the modulus with cell weights.
    pub fn lp_norm(&self, p: f64) -> f64 {
        (self
            .values
            .iter()
            .map(|v| v.norm().powf(p))
            .sum::<f64>()
            * self.grid.cell())
        .powf(1.0 / p)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        GridFunction {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }

    pub fn add(&self, other: &GridFunction) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch("add on different grids".into()));
        }
        Ok(GridFunction {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    pub fn sub(&self, other: &GridFunction) -> Result<Self> {
        Ok(self.add(&other.scaled(Complex64::new(-1.0, 0.0)))?)
    }

    /// Pointwise product with a sampled multiplier function of `(x, t)`.
    pub fn pointwise<F>(&self, f: F) -> Self
    where
        F: Fn(&[f64], f64) -> Complex64 + Sync,
    {
        let values: Vec<Complex64> = (0..self.grid.len())
            .into_par_iter()
            .map(|i| {
                let (x, t) = self.grid.point(i);
                self.values[i] * f(&x, t)
            })
            .collect();
        GridFunction {
            grid: self.grid.clone(),
            values,
        }
    }

    /// Forward DFT (unnormalized).
    pub fn spectrum(&self) -> Vec<Complex64> {
        fft_nd(&self.values, &self.grid.shape(), false)
    }
}

/// Multidimensional DFT by axis passes. `inverse = true` applies the
/// normalized inverse transform.
pub fn fft_nd(values: &[Complex64], shape: &[usize], inverse: bool) -> Vec<Complex64> {
    let total: usize = shape.iter().product();
    assert_eq!(values.len(), total);
    let mut data = values.to_vec();
    let mut planner = FftPlanner::<f64>::new();
    for (ax, &len) in shape.iter().enumerate() {
        let fft = if inverse {
            planner.plan_fft_inverse(len)
        } else {
            planner.plan_fft_forward(len)
        };
        let stride: usize = shape[ax + 1..].iter().product();
        let lines = total / len;
        let mut buf = vec![Complex64::new(0.0, 0.0); len];
        for line in 0..lines {
            // position of element 0 of this line
            let outer = line / stride;
            let inner = line % stride;
            let base = outer * stride * len + inner;
            for (j, b) in buf.iter_mut().enumerate() {
                *b = data[base + j * stride];
            }
            fft.process(&mut buf);
            for (j, b) in buf.iter().enumerate() {
                data[base + j * stride] = *b;
            }
        }
    }
    if inverse {
        let scale = 1.0 / total as f64;
        data.iter_mut().for_each(|v| *v *= scale);
    }
    data
}

/// Apply an x-independent symbol as an exact Fourier multiplier on the
/// grid's frequency lattice.
pub fn apply_multiplier(h: &SymbolSpec, u: &GridFunction) -> Result<GridFunction> {
    if h.x_dependent() {
        return Err(Error::InvalidParameter(
            "apply_multiplier requires an x-independent symbol".into(),
        ));
    }
    if h.dim() != u.grid.n {
        return Err(Error::GridMismatch(format!(
            "symbol dimension {} vs grid dimension {}",
            h.dim(),
            u.grid.n
        )));
    }
    let mut spec = u.spectrum();
    let grid = &u.grid;
    let x0 = vec![0.0; grid.n];
    spec.par_iter_mut().enumerate().for_each(|(i, v)| {
        let (xi, tau) = grid.freq(i);
        *v *= h.eval(&x0, &xi, tau);
    });
    let values = fft_nd(&spec, &grid.shape(), true);
    Ok(GridFunction {
        grid: grid.clone(),
        values,
    })
}

/// Order-reducing operator `Theta^s = OP({xi,tau}^s)`.
pub fn theta(s: f64, u: &GridFunction) -> GridFunction {
    let d = u.grid.anisotropy();
    let mut spec = u.spectrum();
    let grid = &u.grid;
    spec.par_iter_mut().enumerate().for_each(|(i, v)| {
        let (xi, tau) = grid.freq(i);
        *v *= bracket(&xi, tau, d).powf(s);
    });
    let values = fft_nd(&spec, &grid.shape(), true);
    GridFunction {
        grid: grid.clone(),
        values,
    }
}

/// Default point budget for [`apply_xdep`]: the quadrature is quadratic in
/// the total point count.
pub const XDEP_BUDGET: usize = 1 << 17;

/// Kohn-Nirenberg quadrature for an x-dependent symbol:
/// `(OP(h)u)(x,t) = sum_{xi,tau} e^{i(x.xi + t tau)} h(x,xi,tau) u_hat / N`.
///
/// For each spatial node the tau-sum is done by one inverse FFT in t, so
/// the cost is `O(N_space^2 N_t)` rather than fully quadratic.
pub fn apply_xdep(h: &SymbolSpec, u: &GridFunction, budget: usize) -> Result<GridFunction> {
    if h.dim() != u.grid.n {
        return Err(Error::GridMismatch(format!(
            "symbol dimension {} vs grid dimension {}",
            h.dim(),
            u.grid.n
        )));
    }
    if u.grid.len() > budget {
        return Err(Error::BudgetExceeded(format!(
            "grid has {} points, budget {budget}",
            u.grid.len()
        )));
    }
    if !h.x_dependent() {
        return apply_multiplier(h, u);
    }
    let grid = u.grid.clone();
    let spec = u.spectrum(); // unnormalized
    let n_space = grid.n_x.pow(grid.n as u32);
    let n_t = grid.n_t;
    let total = grid.len() as f64;

    // Per-frequency data, indexed (space-freq flat, t-freq)
    let out: Vec<Vec<Complex64>> = (0..n_space)
        .into_par_iter()
        .map(|xs| {
            // x node coordinates
            let xflat = xs * n_t; // any t index; x part is what we need
            let (x, _) = grid.point(xflat);
            // accumulate over spatial frequencies with phase e^{i x.xi}
            let mut acc = vec![Complex64::new(0.0, 0.0); n_t];
            for ks in 0..n_space {
                let kflat = ks * n_t;
                let (xi, _) = grid.freq(kflat);
                let phase: f64 = x.iter().zip(&xi).map(|(a, b)| a * b).sum();
                let rot = Complex64::from_polar(1.0, phase);
                for m in 0..n_t {
                    let tau = grid.tau(m);
                    acc[m] += rot * h.eval(&x, &xi, tau) * spec[kflat + m];
                }
            }
            // inverse transform in t only (unnormalized inverse; divide by total later)
            let mut line = fft_nd(&acc, &[n_t], true);
            let fixup = n_t as f64 / total;
            line.iter_mut().for_each(|v| *v *= fixup);
            line
        })
        .collect();

    let mut values = Vec::with_capacity(grid.len());
    for line in out {
        values.extend(line);
    }
    Ok(GridFunction { grid, values })
}

/// Truncated Leibniz product `sum_{|alpha| < J} (1/alpha!) D_xi^alpha h
/// . d_x^alpha h'`, with the class of the leading (pointwise-product) term.
pub fn leibniz_truncated(h: &SymbolSpec, h2: &SymbolSpec, j_depth: usize) -> Result<SymbolSpec> {
    if j_depth > 3 {
        return Err(Error::InvalidParameter(format!(
            "Leibniz truncation depth limited to 3, got {j_depth}"
        )));
    }
    if (h.anisotropy().get() - h2.anisotropy().get()).abs() > 1e-14 || h.dim() != h2.dim() {
        return Err(Error::GridMismatch(
            "Leibniz product requires matching anisotropy and dimension".into(),
        ));
    }
    let n = h.dim();
    let (m, nu) = crate::symbols::product_regularity(
        h.order(),
        h.regularity(),
        h2.order(),
        h2.regularity(),
    );
    // enumerate alpha with |alpha| < J, each exactly once
    let mut alphas: Vec<Vec<usize>> = Vec::new();
    fn rec(n: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == n {
            out.push(cur.clone());
            return;
        }
        for v in 0..=left {
            cur.push(v);
            rec(n, left - v, cur, out);
            cur.pop();
        }
    }
    rec(n, j_depth.max(1) - 1, &mut Vec::new(), &mut alphas);

    let ha = h.clone();
    let hb = h2.clone();
    let x_dep = h.x_dependent() || h2.x_dependent();
    let both_x_indep = !h.x_dependent() && !h2.x_dependent();
    let zero_beta = vec![0usize; n];
    let eval: crate::symbols::Eval = std::sync::Arc::new(move |x, xi, tau| {
        let mut acc = Complex64::new(0.0, 0.0);
        for alpha in &alphas {
            let a_tot: usize = alpha.iter().sum();
            if a_tot > 0 && both_x_indep {
                continue; // d_x^alpha h' = 0
            }
            let fact: f64 = alpha.iter().map(|&ai| factorial(ai)).product();
            // D_xi^alpha = (-i d_xi)^alpha
            let dh = ha.deriv(alpha, &zero_beta, 0, x, xi, tau)
                * Complex64::new(0.0, -1.0).powu(a_tot as u32);
            let dh2 = if a_tot == 0 {
                hb.eval(x, xi, tau)
            } else {
                hb.deriv(&zero_beta, alpha, 0, x, xi, tau)
            };
            acc += dh * dh2 / fact;
        }
        acc
    });
    Ok(SymbolSpec::new(n, h.anisotropy(), m, nu, x_dep, eval))
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|v| v as f64).product()
}

/// Uniform 1D lattice on `[-R, R)` representing the line with decay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineGrid {
    pub r: f64,
    pub n: usize,
}

impl LineGrid {
    pub fn new(r: f64, n: usize) -> Result<Self> {
        require_pow2(n, "line count")?;
        if r <= 0.0 {
            return Err(Error::InvalidParameter("half-period must be positive".into()));
        }
        Ok(LineGrid { r, n })
    }

    pub fn h(&self) -> f64 {
        2.0 * self.r / self.n as f64
    }

    #[inline]
    pub fn x(&self, idx: usize) -> f64 {
        -self.r + idx as f64 * self.h()
    }

    /// Signed frequency `xi_k = pi k / R`.
    #[inline]
    pub fn xi(&self, idx: usize) -> f64 {
        let k = AnisoGrid::signed(idx, self.n);
        std::f64::consts::PI * k as f64 / self.r
    }
}

/// Complex samples on a [`LineGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct LineFunction {
    pub grid: LineGrid,
    pub values: Vec<Complex64>,
}

impl LineFunction {
    pub fn from_fn<F>(grid: LineGrid, f: F) -> Self
    where
        F: Fn(f64) -> Complex64 + Sync,
    {
        let values: Vec<Complex64> = (0..grid.n)
            .into_par_iter()
            .map(|i| f(grid.x(i)))
            .collect();
        LineFunction { grid, values }
    }

    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.h()).sqrt()
    }

    pub fn sub(&self, other: &LineFunction) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch("line grids differ".into()));
        }
        Ok(LineFunction {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }
}

/// Relative boundary magnitude tolerated by [`xi_pm`] before warning about
/// wrap-around contamination.
pub const LINE_DECAY_TOL: f64 = 1e-8;

/// Sign selector for the order-reducing family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum HalfLine {
    Plus,
    Minus,
}

/// 1D flat-model order-reducing operator: Fourier multiplier `(1 +- i xi)^t`
/// with the principal branch (the base never crosses the cut since its real
/// part is 1). `Plus` preserves support in `{x >= 0}` up to the grid's
/// leakage tolerance, `Minus` in `{x <= 0}`.
pub fn xi_pm(t: f64, sign: HalfLine, u: &LineFunction) -> LineFunction {
    let sup = u.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let edge = u.values[0].norm().max(u.values[u.grid.n - 1].norm());
    if sup > 0.0 && edge > LINE_DECAY_TOL * sup {
        log::warn!(
            "xi_pm input boundary magnitude {:.3e} exceeds {:.1e} x sup; wrap-around contamination likely",
            edge,
            LINE_DECAY_TOL
        );
    }
    let s = match sign {
        HalfLine::Plus => 1.0,
        HalfLine::Minus => -1.0,
    };
    let mut spec = fft_nd(&u.values, &[u.grid.n], false);
    for (k, v) in spec.iter_mut().enumerate() {
        let xi = u.grid.xi(k);
        let base = Complex64::new(1.0, s * xi);
        *v *= base.powc(Complex64::new(t, 0.0));
    }
    let values = fft_nd(&spec, &[u.grid.n], true);
    LineFunction {
        grid: u.grid.clone(),
        values,
    }
}

/// Relative L2 mass of `u` on the wrong side of the origin, outside the
/// 5%-of-R leakage band. For `Plus`, measures mass in `{x < -0.05 R}`.
pub fn support_leakage(u: &LineFunction, sign: HalfLine) -> f64 {
    let band = 0.05 * u.grid.r;
    let total: f64 = u.values.iter().map(|v| v.norm_sqr()).sum();
    if total == 0.0 {
        return 0.0;
    }
    let bad: f64 = (0..u.grid.n)
        .filter(|&i| {
            let x = u.grid.x(i);
            match sign {
                HalfLine::Plus => x < -band,
                HalfLine::Minus => x > band,
            }
        })
        .map(|i| u.values[i].norm_sqr())
        .sum();
    bad / total
}

/// 1D Poisson operator `K0 phi = phi e^+ r^+ e^{-x}` (tangential bracket
/// collapses to 1). The jump node at x = 0 is sampled with the Fourier
/// midpoint convention `phi/2`; sampling the full value there shifts the
/// whole spectrum by half a sample and dominates the quadrature error.
pub fn poisson_k0(phi: f64, grid: &LineGrid) -> LineFunction {
    LineFunction::from_fn(grid.clone(), move |x| {
        if x > 0.0 {
            Complex64::new(phi * (-x).exp(), 0.0)
        } else if x == 0.0 {
            Complex64::new(phi / 2.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

/// Sidecar descriptor for serialized grid data.
#[derive(Debug, Serialize, Deserialize)]
pub struct GridDescriptor {
    pub grid: AnisoGrid,
    pub count: usize,
    pub format: String,
}

impl GridFunction {
    /// Bit-exact binary dump: little-endian f64 (re, im) pairs, plus a JSON
    /// sidecar `<path>.json` with the grid metadata.
    pub fn save_binary(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        let mut buf = Vec::with_capacity(self.values.len() * 16);
        for v in &self.values {
            buf.extend_from_slice(&v.re.to_le_bytes());
            buf.extend_from_slice(&v.im.to_le_bytes());
        }
        f.write_all(&buf)?;
        let desc = GridDescriptor {
            grid: self.grid.clone(),
            count: self.values.len(),
            format: "f64le-re-im".into(),
        };
        let side = path.with_extension(format!(
            "{}.json",
            path.extension().and_then(|e| e.to_str()).unwrap_or("bin")
        ));
        std::fs::write(side, serde_json::to_string_pretty(&desc)?)?;
        Ok(())
    }

    pub fn load_binary(path: &Path) -> Result<GridFunction> {
        let side = path.with_extension(format!(
            "{}.json",
            path.extension().and_then(|e| e.to_str()).unwrap_or("bin")
        ));
        let desc: GridDescriptor = serde_json::from_str(&std::fs::read_to_string(side)?)?;
        let mut f = std::fs::File::open(path)?;
        let mut buf = Vec::new();
        f.read_to_end(&mut buf)?;
        if buf.len() != desc.count * 16 {
            return Err(Error::GridMismatch(format!(
                "binary payload {} bytes, descriptor expects {}",
                buf.len(),
                desc.count * 16
            )));
        }
        let values: Vec<Complex64> = buf
            .chunks_exact(16)
            .map(|c| {
                Complex64::new(
                    f64::from_le_bytes(c[..8].try_into().unwrap()),
                    f64::from_le_bytes(c[8..].try_into().unwrap()),
                )
            })
            .collect();
        GridFunction::new(desc.grid, values)
    }

    /// CSV rows `index,re,im`.
    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("index,re,im\n");
        for (i, v) in self.values.iter().enumerate() {
            out.push_str(&format!("{i},{:?},{:?}\n", v.re, v.im));
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

/// Random band-limited field with unit-modulus coefficients on modes with
/// `|k|, |m| <= band`, deterministic in the seed.
pub fn random_band_limited(grid: &AnisoGrid, band: i64, seed: u64) -> GridFunction {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let shape = grid.shape();
    let mut spec = vec![Complex64::new(0.0, 0.0); grid.len()];
    for (i, v) in spec.iter_mut().enumerate() {
        let idx = grid.unravel(i);
        let ok = idx[..grid.n]
            .iter()
            .all(|&k| AnisoGrid::signed(k, grid.n_x).abs() <= band)
            && AnisoGrid::signed(idx[grid.n], grid.n_t).abs() <= band;
        if ok {
            let phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            *v = Complex64::from_polar(1.0, phase);
        }
    }
    let values = fft_nd(&spec, &shape, true);
    GridFunction {
        grid: grid.clone(),
        values,
    }
}
