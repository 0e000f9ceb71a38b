//! Scalar delayed-logistic reference implementations.
//!
//! With a local kernel, flat growth, and no advection the PDE collapses to
//! the classical delayed logistic equation `u' = r u (1 - u(t - tau))`, whose
//! characteristic roots, Hopf threshold `r tau_0 = pi/2`, center-manifold
//! coefficients, and trajectories are all computable by plain scalar
//! arithmetic. Everything here is written directly against the scalar
//! equation and never calls into the PDE pipeline, so it serves as an
//! independent oracle for the full machinery.

use num_complex::Complex64;

use crate::error::{Error, Result};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Rightmost root of the scalar characteristic equation
/// `mu + r e^{-mu tau} = 0`, by Newton from the principal-branch guess.
pub fn hutchinson_root(r: f64, tau: f64) -> Result<Complex64> {
    let mut mu = if r * tau > 1.0 / std::f64::consts::E {
        // Principal complex pair: imaginary part between 0 and pi/tau.
        Complex64::new(0.0, std::f64::consts::FRAC_PI_2 / tau)
    } else {
        // Real dominant root near -r.
        Complex64::new(-r * 0.9, 0.0)
    };
    for _ in 0..200 {
        let e = (-mu * tau).exp();
        let f = mu + r * e;
        let df = Complex64::new(1.0, 0.0) - r * tau * e;
        let step = f / df;
        mu -= step;
        if step.norm() < 1e-14 * mu.norm().max(1.0) {
            let res = (mu + r * (-mu * tau).exp()).norm();
            if res < 1e-10 {
                return Ok(mu);
            }
        }
    }
    Err(Error::NewtonDiverged {
        r,
        residual: (mu + r * (-mu * tau).exp()).norm(),
    })
}

/// `d mu / d tau` along a root of `mu + r e^{-mu tau} = 0`:
/// differentiating gives `mu' (1 + mu tau) = -mu^2`.
pub fn hutchinson_dmu_dtau(mu: Complex64, tau: f64) -> Complex64 {
    -mu * mu / (Complex64::new(1.0, 0.0) + mu * tau)
}

/// First Hopf delay of the scalar equation: `tau_0 = pi / (2 r)`.
pub fn hutchinson_tau0(r: f64) -> f64 {
    std::f64::consts::FRAC_PI_2 / r
}

/// Center-manifold data for the scalar equation at the ladder delay
/// `tau_n = (pi/2 + 2 n pi) / r`.
#[derive(Debug, Clone)]
pub struct ScalarNormalForm {
    pub tau_n: f64,
    /// `omega = nu tau_n = pi/2 + 2 n pi` (the crossing frequency is `nu = r`).
    pub omega: f64,
    pub s_n: Complex64,
    pub e_coeff: Complex64,
    pub f_coeff: Complex64,
    pub g20: Complex64,
    pub g11: Complex64,
    pub g02: Complex64,
    pub g21: Complex64,
    pub c1: Complex64,
    /// `d Re mu / d tau` at the crossing.
    pub re_mu_prime: f64,
    pub mu2: f64,
}

/// Hassard-style normal form for `u' = r u (1 - u(t - tau))` at `tau_n`,
/// derived on the time-rescaled equation `x'(t) = -a x(t-1) - a x(t) x(t-1)`
/// with `a = r tau_n`.
pub fn hutchinson_normal_form(r: f64, n: usize) -> ScalarNormalForm {
    let theta = std::f64::consts::FRAC_PI_2 + 2.0 * std::f64::consts::PI * n as f64;
    let tau_n = theta / r;
    let a = r * tau_n; // equals theta; kept separate for clarity
    let omega = a;
    // Pairing (q*, q) = D conj (1 + i a) = 1 under the delay bilinear form.
    let s_n = Complex64::new(1.0, a);
    let dbar = Complex64::new(1.0, 0.0) / s_n;
    let eim = (I * omega).exp(); // e^{i omega} = i at every ladder index
    let emim = eim.conj();

    let g20 = -2.0 * a * dbar * emim;
    let g11 = -a * dbar * (eim + emim);
    let g02 = -2.0 * a * dbar * eim;

    // Second-order history coefficients. The particular parts ride on the
    // eigenmodes; the free parts solve the resolvent conditions
    // E (2 i nu + r e^{-2 i omega}) = -2 r e^{-i omega} (in unscaled time
    // Delta(2 i nu) E = 2 r e^{-i omega}) and F Delta(0) = r (e^{i omega}
    // + e^{-i omega}) = 0.
    let nu = r;
    let delta_2inu = -2.0 * I * nu - r * (-2.0 * I * omega).exp();
    let e_coeff = 2.0 * r * emim / delta_2inu;
    let f_coeff = Complex64::new(0.0, 0.0);

    let w20_0 = I * g20 / omega + I * g02.conj() / (3.0 * omega) + e_coeff;
    let w20_m1 = (I * g20 / omega) * emim
        + (I * g02.conj() / (3.0 * omega)) * eim
        + e_coeff * (-2.0 * I * omega).exp();
    let w11_0 = -I * g11 / omega + I * g11.conj() / omega + f_coeff;
    let w11_m1 = (-I * g11 / omega) * emim + (I * g11.conj() / omega) * eim + f_coeff;

    let g21 = -a * dbar * (2.0 * w11_m1 + w20_m1 + eim * w20_0 + 2.0 * emim * w11_0);

    let c1 =
        I / (2.0 * omega) * (g20 * g11 - 2.0 * g11.norm_sqr() - g02.norm_sqr() / 3.0) + g21 / 2.0;

    let re_mu_prime = nu * nu / (1.0 + (nu * tau_n).powi(2));
    let mu2 = -c1.re / re_mu_prime;

    ScalarNormalForm {
        tau_n,
        omega,
        s_n,
        e_coeff,
        f_coeff,
        g20,
        g11,
        g02,
        g21,
        c1,
        re_mu_prime,
        mu2,
    }
}

/// Integrate `u' = r u (1 - u(t - tau))` with Heun steps and on-grid delay
/// reads (`dt = tau / m_delay`). Returns the state at every step including
/// the initial one.
pub fn integrate_delayed_logistic(
    r: f64,
    tau: f64,
    history: &dyn Fn(f64) -> f64,
    m_delay: usize,
    t_end: f64,
) -> Vec<f64> {
    let dt = tau / m_delay as f64;
    let n_steps = (t_end / dt).round() as usize;
    // Ring buffer of the last m_delay + 1 values; index 0 is u(t - tau).
    let mut ring: Vec<f64> = (0..=m_delay)
        .map(|k| history(-tau + k as f64 * dt))
        .collect();
    let mut head = 0usize; // position of the oldest entry
    let mut u = ring[m_delay];
    let mut out = Vec::with_capacity(n_steps + 1);
    out.push(u);
    for _ in 0..n_steps {
        let u_del = ring[head];
        let u_del_next = ring[(head + 1) % (m_delay + 1)];
        let f1 = r * u * (1.0 - u_del);
        let pred = u + dt * f1;
        let f2 = r * pred * (1.0 - u_del_next);
        u += 0.5 * dt * (f1 + f2);
        ring[head] = u;
        head = (head + 1) % (m_delay + 1);
        out.push(u);
    }
    out
}
