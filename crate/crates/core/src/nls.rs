//! Pseudo-spectral solvers for the periodic focusing cubic NLS
//! `q_t = iσ(q_xx + 2|q|²q)`.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::spectral::{trapezoid, PeriodicGrid, Spectral};

/// Samples of the NLS field on the periodic grid at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct InvariantField {
    pub grid: PeriodicGrid,
    pub values: Vec<C64>,
    pub t: f64,
    /// Equation convention: the coefficient `σ` in `q_t = iσ(q_xx + 2|q|²q)`.
    pub sigma: f64,
}

impl InvariantField {
    pub fn new(grid: PeriodicGrid, values: Vec<C64>, t: f64, sigma: f64) -> Self {
        assert_eq!(values.len(), grid.len(), "sample count does not match grid");
        Self { grid, values, t, sigma }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NlsScheme {
    /// Strang splitting: half nonlinear phase, exact linear step, half phase.
    #[default]
    SplitStep,
    /// Crank–Nicolson in Fourier space with a fixed-point solve of the
    /// averaged nonlinearity.
    ImplicitSpectral,
}

impl NlsScheme {
    pub fn name(self) -> &'static str {
        match self {
            NlsScheme::SplitStep => "split_step",
            NlsScheme::ImplicitSpectral => "implicit_spectral",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NlsOptions {
    pub scheme: NlsScheme,
    /// Fixed-point stopping tolerance on successive iterates (sup norm).
    pub tol_fp: f64,
    pub max_iter: usize,
    /// Apply the 2/3 rule after every step.
    pub dealias: bool,
}

impl Default for NlsOptions {
    fn default() -> Self {
        Self { scheme: NlsScheme::SplitStep, tol_fp: 1e-12, max_iter: 50, dealias: false }
    }
}

/// Residual above which an unconverged fixed-point solve is an error.
const FP_FAIL: f64 = 1e-8;

/// Advances `q` by one step of size `dt`.
pub fn nls_step(spec: &Spectral, q: &InvariantField, dt: f64, opts: &NlsOptions) -> Result<InvariantField> {
    assert!(dt > 0.0, "time step must be positive");
    let sigma = q.sigma;
    let mut values = match opts.scheme {
        NlsScheme::SplitStep => split_step(spec, &q.values, sigma, dt),
        NlsScheme::ImplicitSpectral => implicit_step(spec, &q.values, sigma, dt, opts)?,
    };
    if opts.dealias {
        values = dealias(spec, &values);
    }
    let out = InvariantField { grid: q.grid, values, t: q.t + dt, sigma };
    if !out.is_finite() {
        return Err(Error::NonFinite(out.t));
    }
    Ok(out)
}

fn nonlinear_phase(v: &mut [C64], sigma: f64, tau: f64) {
    for z in v {
        *z *= C64::from_polar(1.0, 2.0 * sigma * z.norm_sqr() * tau);
    }
}

fn split_step(spec: &Spectral, q: &[C64], sigma: f64, dt: f64) -> Vec<C64> {
    let mut v = q.to_vec();
    nonlinear_phase(&mut v, sigma, 0.5 * dt);
    let mut c = spec.forward(&v);
    for (i, z) in c.iter_mut().enumerate() {
        let k = spec.wavenumber(i);
        *z *= C64::from_polar(1.0, -sigma * k * k * dt);
    }
    let mut v = spec.inverse(&c);
    nonlinear_phase(&mut v, sigma, 0.5 * dt);
    v
}

fn implicit_step(spec: &Spectral, q: &[C64], sigma: f64, dt: f64, opts: &NlsOptions) -> Result<Vec<C64>> {
    let n = q.len();
    let qhat = spec.forward(q);
    // (1 + iσk²dt/2)⁻¹ and (1 − iσk²dt/2).
    let (lhs, rhs): (Vec<C64>, Vec<C64>) = (0..n)
        .map(|i| {
            let k = spec.wavenumber(i);
            let w = C64::new(0.0, 0.5 * sigma * k * k * dt);
            (1.0 / (1.0 + w), 1.0 - w)
        })
        .unzip();
    let mass_old: Vec<f64> = q.iter().map(|z| z.norm_sqr()).collect();
    let mut cur = q.to_vec();
    let mut residual = f64::INFINITY;
    for _ in 0..opts.max_iter {
        let nl: Vec<C64> = (0..n)
            .map(|j| (mass_old[j] + cur[j].norm_sqr()) * (q[j] + cur[j]) * 0.5)
            .collect();
        let nlhat = spec.forward(&nl);
        let coeff = C64::new(0.0, sigma * dt);
        let next_hat: Vec<C64> = (0..n)
            .map(|i| (qhat[i] * rhs[i] + coeff * nlhat[i]) * lhs[i])
            .collect();
        let next = spec.inverse(&next_hat);
        residual = next.iter().zip(&cur).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        cur = next;
        if residual < opts.tol_fp {
            return Ok(cur);
        }
    }
    if residual > FP_FAIL || !residual.is_finite() {
        return Err(Error::FixedPointDiverged(residual));
    }
    Ok(cur)
}

/// Zeroes every mode with `|k| > N/3`.
pub fn dealias(spec: &Spectral, v: &[C64]) -> Vec<C64> {
    let cut = spec.len() as f64 / 3.0;
    let mut c = spec.forward(v);
    for (i, z) in c.iter_mut().enumerate() {
        if spec.wavenumber(i).abs() > cut {
            *z = C64::new(0.0, 0.0);
        }
    }
    spec.inverse(&c)
}

/// Fields at every half step `t₀, t₀ + Δt/2, t₀ + Δt, …`.
#[derive(Debug, Clone)]
pub struct NlsTrajectory {
    pub fields: Vec<InvariantField>,
    /// Full frame step `Δt`; fields are spaced by `Δt/2`.
    pub dt: f64,
    pub scheme: NlsScheme,
    /// Relative drift of `H₁` between the first and last field.
    pub mass_drift: f64,
}

impl NlsTrajectory {
    /// Number of full `Δt` steps.
    pub fn steps(&self) -> usize {
        (self.fields.len() - 1) / 2
    }

    /// Field at half-step index `i`.
    pub fn half(&self, i: usize) -> &InvariantField {
        &self.fields[i]
    }

    /// Field at full step `n`.
    pub fn at_step(&self, n: usize) -> &InvariantField {
        &self.fields[2 * n]
    }

    pub fn last(&self) -> &InvariantField {
        self.fields.last().expect("trajectory is never empty")
    }

    pub fn sigma(&self) -> f64 {
        self.fields[0].sigma
    }
}

/// Number of `dt` steps covering `t_final`, failing when `dt` does not divide it.
pub fn step_count(t_final: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0) || !(t_final > 0.0) || t_final < dt * (1.0 - 1e-12) {
        return Err(Error::InvalidConfig(format!("need 0 < dt <= T, got dt = {dt}, T = {t_final}")));
    }
    let n = (t_final / dt).round();
    if (n * dt - t_final).abs() > 1e-9 * t_final {
        return Err(Error::InvalidConfig(format!("dt = {dt} does not divide T = {t_final}")));
    }
    Ok(n as usize)
}

/// Solves up to `t_final`, stepping internally at `dt/2` and keeping every field.
pub fn nls_solve(
    spec: &Spectral,
    q0: &InvariantField,
    t_final: f64,
    dt: f64,
    opts: &NlsOptions,
) -> Result<NlsTrajectory> {
    let steps = step_count(t_final, dt)?;
    let half = 0.5 * dt;
    let mut fields = Vec::with_capacity(2 * steps + 1);
    fields.push(q0.clone());
    for i in 1..=2 * steps {
        let mut next = nls_step(spec, &fields[i - 1], half, opts)?;
        // Pin times to the grid so long runs do not accumulate rounding.
        next.t = q0.t + half * i as f64;
        fields.push(next);
    }
    let h1_start = conserved_quantities(spec, &fields[0]).h1;
    let h1_end = conserved_quantities(spec, fields.last().unwrap()).h1;
    let mass_drift = if h1_start == 0.0 { h1_end.abs() } else { ((h1_end - h1_start) / h1_start).abs() };
    Ok(NlsTrajectory { fields, dt, scheme: opts.scheme, mass_drift })
}

/// The first four NLS conserved quantities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Conserved {
    /// `∮ |q|²`
    pub h1: f64,
    /// `∮ q̄ q_x`
    pub h2: C64,
    /// `∮ |q_x|² − |q|⁴`
    pub h3: f64,
    /// `∮ q q̄_x − q̄ q_x`
    pub h4: C64,
}

pub fn conserved_quantities(spec: &Spectral, q: &InvariantField) -> Conserved {
    let h = q.grid.h();
    let qx = spec.derivative(&q.values);
    let v = &q.values;
    let h1 = trapezoid(h, v.iter().map(|z| z.norm_sqr()));
    let h3 = trapezoid(h, v.iter().zip(&qx).map(|(z, d)| d.norm_sqr() - z.norm_sqr().powi(2)));
    let mut h2 = C64::new(0.0, 0.0);
    let mut h4 = C64::new(0.0, 0.0);
    for (z, d) in v.iter().zip(&qx) {
        h2 += z.conj() * d;
        h4 += z * d.conj() - z.conj() * d;
    }
    Conserved { h1, h2: h2 * h, h3, h4: h4 * h }
}
