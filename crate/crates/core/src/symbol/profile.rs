//! Discrete minimizer of G_λ(φ) = ∫ a (λφ² + φ'²) with φ(0) = 1.
//!
//! Piecewise-linear elements on the graded mesh t_j = T (j/N)^γ with
//! weight-integrated stiffness and weighted lumped mass, plus the closure
//! term a(T) κ φ(T)² with κ = √λ + a'(T)/(2a(T)).
//!
//! The tridiagonal system is eliminated from the far end towards t = 0.
//! Writing g_j = P_j g_{j-1} with 0 < P_j ≤ 1 and ρ_j = 1 - P_j computed
//! without subtraction keeps the profile, its increments and the boundary
//! flux accurate to rounding even when the first cells are 1e-100 wide.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use crate::error::{Error, Result};
use crate::interp::MonotoneCubic;
use crate::weight::Weight;

/// Truncation: T_max = max(min_truncation, DECAY_LENGTHS / √λ).
pub const DECAY_LENGTHS: f64 = 24.0;
const MAX_GRADING: f64 = 24.0;
const RICHARDSON_POINTS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileOptions {
    /// Target relative change of m between the last two refinements.
    pub tol: f64,
    /// Lower bound for the truncation point T_max.
    pub min_truncation: f64,
    pub initial_cells: usize,
    pub max_cells: usize,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        Self { tol: 1e-7, min_truncation: 10.0, initial_cells: 512, max_cells: 1 << 22 }
    }
}

impl ProfileOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileSolution {
    pub lambda: f64,
    pub t_mesh: Vec<f64>,
    pub g_values: Vec<f64>,
    /// a(t) g'(t) at the mesh nodes (≤ 0). Node 0 carries -m, the last node
    /// the closure flux, interior nodes the mean of the adjacent cell fluxes.
    pub flux_values: Vec<f64>,
    pub m_value: f64,
    pub energy_value: f64,
    pub truncation_t: f64,
    pub est_error: f64,
    pub grading: f64,
    /// true when the Richardson flux was rejected and m is the energy
    pub m_from_energy: bool,
    /// κ in the closure g'(T) = -κ g(T)
    pub closure_rate: f64,
}

impl ProfileSolution {
    fn zero_frequency(t_max: f64) -> Self {
        Self {
            lambda: 0.0,
            t_mesh: vec![0.0, t_max],
            g_values: vec![1.0, 1.0],
            flux_values: vec![0.0, 0.0],
            m_value: 0.0,
            energy_value: 0.0,
            truncation_t: t_max,
            est_error: 0.0,
            grading: 1.0,
            m_from_energy: false,
            closure_rate: 0.0,
        }
    }

    pub fn cells(&self) -> usize {
        self.t_mesh.len() - 1
    }

    /// Shape-preserving interpolant of g on the mesh; g is clipped to [0, 1].
    pub fn interpolant(&self) -> ProfileInterpolant {
        ProfileInterpolant { cubic: MonotoneCubic::new(self.t_mesh.clone(), self.g_values.clone()), t_max: self.truncation_t }
    }

    /// g at arbitrary t in [0, T_max].
    pub fn eval_g(&self, t: f64) -> Result<f64> {
        self.interpolant().eval(t)
    }
}

pub struct ProfileInterpolant {
    cubic: MonotoneCubic,
    t_max: f64,
}

impl ProfileInterpolant {
    pub fn eval(&self, t: f64) -> Result<f64> {
        if t < 0.0 {
            return Err(Error::InvalidArgument(format!("t = {t} is negative")));
        }
        if t == 0.0 {
            return Ok(1.0);
        }
        if t > self.t_max * (1.0 + 1e-12) {
            return Err(Error::BeyondTruncation { t, t_max: self.t_max });
        }
        Ok(self.cubic.eval(t).clamp(0.0, 1.0))
    }
}

/// Mesh with weight integrals; independent of λ once T and N are fixed.
#[derive(Debug)]
struct Mesh {
    t: Vec<f64>,
    /// cell widths
    h: Vec<f64>,
    /// ∫ a over each cell
    w: Vec<f64>,
    a_end: f64,
    da_end: f64,
}

impl Mesh {
    fn build(weight: &Weight, t_max: f64, cells: usize, grading: f64) -> Result<Self> {
        let n = cells as f64;
        let t: Vec<f64> = (0..=cells)
            .map(|j| if j == cells { t_max } else { t_max * (j as f64 / n).powf(grading) })
            .collect();
        let h: Vec<f64> = t.windows(2).map(|p| p[1] - p[0]).collect();
        if h[0] <= 0.0 {
            return Err(Error::InvalidArgument(format!("mesh underflow with {cells} cells and grading {grading}")));
        }
        let w: Vec<f64> = t.windows(2).map(|p| weight.cell_integral(p[0], p[1])).collect();
        if let Some(i) = w.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::WeightEval {
                t: t[i + 1],
                message: format!("cell integral of the weight is {} on [{}, {}]", w[i], t[i], t[i + 1]),
            });
        }
        let (a_end, da_end) = weight.eval(t_max)?;
        Ok(Self { t, h, w, a_end, da_end })
    }
}

struct Discrete {
    g: Vec<f64>,
    /// a g' on cells (negative)
    cell_flux: Vec<f64>,
    /// consistent boundary flux (K g)_0, equal to the discrete energy
    consistent_flux: f64,
    energy: f64,
    kappa: f64,
}

fn solve_on_mesh(mesh: &Mesh, lambda: f64) -> Result<Discrete> {
    let n = mesh.h.len();
    let k: Vec<f64> = mesh.w.iter().zip(&mesh.h).map(|(w, h)| w / (h * h)).collect();
    let kappa = lambda.sqrt() + 0.5 * mesh.da_end / mesh.a_end;
    if !(kappa > 0.0) {
        return Err(Error::InvalidArgument(format!("closure rate {kappa} is not positive; increase the truncation")));
    }
    // backward sweep; index j is the node, p[j] and rho[j] for j = 1..=n
    let mut p = vec![0.0; n + 1];
    let mut rho = vec![0.0; n + 1];
    let end = 0.5 * lambda * mesh.w[n - 1] + mesh.a_end * kappa;
    let pivot = k[n - 1] + end;
    p[n] = k[n - 1] / pivot;
    rho[n] = end / pivot;
    for j in (1..n).rev() {
        let lumped = 0.5 * lambda * (mesh.w[j - 1] + mesh.w[j]);
        let num = k[j] * rho[j + 1] + lumped;
        let pivot = k[j - 1] + num;
        p[j] = k[j - 1] / pivot;
        rho[j] = num / pivot;
    }
    let mut g = vec![0.0; n + 1];
    g[0] = 1.0;
    for j in 1..=n {
        g[j] = p[j] * g[j - 1];
    }
    // g_{e+1} - g_e = -rho_{e+1} g_e
    let cell_flux: Vec<f64> = (0..n).map(|e| -k[e] * rho[e + 1] * g[e]).collect();
    let consistent_flux = k[0] * rho[1] + 0.5 * lambda * mesh.w[0];
    let mut energy = mesh.a_end * kappa * g[n] * g[n];
    for e in 0..n {
        let dg = rho[e + 1] * g[e];
        energy += k[e] * dg * dg + 0.5 * lambda * mesh.w[e] * (g[e] * g[e] + g[e + 1] * g[e + 1]);
    }
    if !(consistent_flux.is_finite() && energy.is_finite()) {
        return Err(Error::InvalidArgument(format!("non-finite discrete solution at lambda = {lambda}")));
    }
    Ok(Discrete { g, cell_flux, consistent_flux, energy, kappa })
}

/// Least-squares extrapolation of the cell fluxes on the first cells to
/// zero cumulative weight mass. `None` when the fluxes are not monotone or
/// the intercept falls below the first flux.
fn richardson_flux(mesh: &Mesh, cell_flux: &[f64]) -> Option<f64> {
    let k = RICHARDSON_POINTS.min(cell_flux.len());
    if k < 2 {
        return None;
    }
    let mags: Vec<f64> = cell_flux[..k].iter().map(|q| -q).collect();
    // adjacent fluxes on the finest cells may differ by rounding only
    if mags.windows(2).any(|p| p[1] > p[0] * (1.0 + 1e-12)) {
        return None;
    }
    let mut mass = Vec::with_capacity(k);
    let mut acc = 0.0;
    for e in 0..k {
        mass.push(acc + 0.5 * mesh.w[e]);
        acc += mesh.w[e];
    }
    let km = k as f64;
    let mx = mass.iter().sum::<f64>() / km;
    let my = mags.iter().sum::<f64>() / km;
    let sxx: f64 = mass.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = mass.iter().zip(&mags).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    if intercept.is_finite() && intercept >= mags[0] {
        Some(intercept)
    } else {
        None
    }
}

type MeshKey = (u64, usize, u64);

/// Reusable solver for one weight. Meshes at the floor truncation are
/// shared between λ values (and threads).
pub struct ProfileSolver {
    weight: Weight,
    opts: ProfileOptions,
    grading: f64,
    cache: Mutex<HashMap<MeshKey, Arc<Mesh>>>,
}

impl ProfileSolver {
    pub fn new(weight: &Weight, opts: ProfileOptions) -> Result<Self> {
        if !(opts.tol > 0.0) {
            return Err(Error::InvalidArgument(format!("tolerance must be positive, got {}", opts.tol)));
        }
        if !(opts.min_truncation > 0.0) {
            return Err(Error::InvalidArgument("minimal truncation must be positive".into()));
        }
        let alpha = weight.exponent_at_origin();
        let grading = (2.0 / (1.0 - alpha.abs())).clamp(3.0, MAX_GRADING);
        Ok(Self { weight: weight.clone(), opts, grading, cache: Mutex::new(HashMap::new()) })
    }

    pub fn weight(&self) -> &Weight {
        &self.weight
    }

    pub fn options(&self) -> &ProfileOptions {
        &self.opts
    }

    pub fn grading(&self) -> f64 {
        self.grading
    }

    pub fn truncation(&self, lambda: f64) -> f64 {
        let floor = self.opts.min_truncation.max(10.0);
        if lambda > 0.0 {
            floor.max(DECAY_LENGTHS / lambda.sqrt())
        } else {
            floor
        }
    }

    fn mesh(&self, t_max: f64, cells: usize) -> Result<Arc<Mesh>> {
        let shared = t_max == self.opts.min_truncation.max(10.0);
        let key = (t_max.to_bits(), cells, self.grading.to_bits());
        if shared {
            if let Some(m) = self.cache.lock().unwrap().get(&key) {
                return Ok(m.clone());
            }
        }
        let mesh = Arc::new(Mesh::build(&self.weight, t_max, cells, self.grading)?);
        if shared {
            let mut cache = self.cache.lock().unwrap();
            // keep the two finest levels only
            if cache.len() > 6 {
                let min_cells = cache.keys().map(|k| k.1).min().unwrap_or(0);
                cache.retain(|k, _| k.1 != min_cells);
            }
            cache.insert(key, mesh.clone());
        }
        Ok(mesh)
    }

    /// Solves with successive mesh doubling until the relative change of m
    /// is below the tolerance.
    pub fn solve(&self, lambda: f64) -> Result<ProfileSolution> {
        self.solve_inner(lambda, None)
    }

    /// Solves on exactly `cells` and `2 cells` cells (no adaptivity).
    pub fn solve_fixed(&self, lambda: f64, cells: usize) -> Result<ProfileSolution> {
        self.solve_inner(lambda, Some(cells))
    }

    fn solve_inner(&self, lambda: f64, fixed: Option<usize>) -> Result<ProfileSolution> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!("lambda must be finite and non-negative, got {lambda}")));
        }
        let t_max = self.truncation(lambda);
        if lambda == 0.0 {
            return Ok(ProfileSolution::zero_frequency(t_max));
        }
        let mut cells = fixed.unwrap_or(self.opts.initial_cells).max(8);
        let mut prev: Option<f64> = None;
        loop {
            let mesh = self.mesh(t_max, cells)?;
            let d = solve_on_mesh(&mesh, lambda)?;
            let (m_value, m_from_energy) = match richardson_flux(&mesh, &d.cell_flux) {
                Some(m) => (m, false),
                None => (d.energy, true),
            };
            if let Some(pm) = prev {
                let est = (m_value - pm).abs() / m_value;
                if est <= self.opts.tol || fixed.is_some() {
                    return Ok(assemble(&mesh, d, lambda, m_value, m_from_energy, est, self.grading));
                }
                if cells * 2 > self.opts.max_cells {
                    return Err(Error::NoConvergence { lambda, est_error: est, tol: self.opts.tol });
                }
            }
            prev = Some(m_value);
            cells *= 2;
        }
    }
}

fn assemble(mesh: &Mesh, d: Discrete, lambda: f64, m_value: f64, m_from_energy: bool, est: f64, grading: f64) -> ProfileSolution {
    let n = mesh.h.len();
    let mut flux = Vec::with_capacity(n + 1);
    flux.push(-m_value);
    for j in 1..n {
        flux.push(0.5 * (d.cell_flux[j - 1] + d.cell_flux[j]));
    }
    flux.push(-mesh.a_end * d.kappa * d.g[n]);
    let _ = d.consistent_flux;
    ProfileSolution {
        lambda,
        t_mesh: mesh.t.clone(),
        g_values: d.g,
        flux_values: flux,
        m_value,
        energy_value: d.energy,
        truncation_t: *mesh.t.last().unwrap(),
        est_error: est,
        grading,
        m_from_energy,
        closure_rate: d.kappa,
    }
}

/// One-shot convenience wrapper around [`ProfileSolver`].
pub fn solve_profile(w: &Weight, lambda: f64, tol: f64) -> Result<ProfileSolution> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidArgument(format!("solve_profile needs lambda > 0, got {lambda}")));
    }
    ProfileSolver::new(w, ProfileOptions::with_tol(tol))?.solve(lambda)
}
