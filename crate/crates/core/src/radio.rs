//! SINR, interference Laplace functionals, coverage and ergodic rate.
//!
//! Coverage integrals are evaluated in the dimensionless coordinates
//! `w = (r1/r2)^2` and `b = pi L r2^2`. The ordered joint density of the two
//! nearest DUs becomes `b e^-b` in `b` and uniform in `w`, so the MAR split is
//! `w < gamma^(-2/alpha)` (DM) versus `w >= gamma^(-2/alpha)` (CM), and the
//! interference exponent `F` only depends on `w`.
//!
//! In DM the second-nearest DU is an interferer, so its fading term
//! `1/(1 + T (r1/r2)^alpha)` multiplies the Laplace functional of the PPP
//! beyond `r2`.

use std::cell::Cell;
use std::f64::consts::{LN_2, PI};

use serde::{Deserialize, Serialize};

use crate::geometry::{mar_analytic, ServingSet};
use crate::model::{Mode, NetworkModel};
use crate::quad::{integrate, integrate_to_infinity, integrate_with_breaks, QuadOptions};
use crate::{Error, Result};

/// Below this distance from `(r1/r2)^alpha = 1` the CM integrand switches to
/// its analytic limit.
const NU_LIMIT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeSelector {
    Dm,
    Cm,
    Total,
}

#[derive(Debug, Clone, Copy)]
pub struct CoverageQuery<'a> {
    pub sinr_threshold_linear: f64,
    pub gamma_linear: f64,
    pub model: &'a NetworkModel,
    pub mode_selector: ModeSelector,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateResult {
    pub rate_nats: f64,
    pub rate_bits: f64,
    pub quadrature_error_estimate: f64,
}

impl RateResult {
    fn from_nats(rate_nats: f64, err: f64) -> Self {
        Self {
            rate_nats,
            rate_bits: rate_nats / LN_2,
            quadrature_error_estimate: err,
        }
    }
}

/// SINR of `serving` given ascending `distances_m` and matching fading powers.
/// Every DU outside the serving set interferes.
pub fn sinr(
    serving: &ServingSet,
    distances_m: &[f64],
    fading: &[f64],
    alpha: f64,
    noise: f64,
) -> Result<f64> {
    if serving.du_indices.is_empty() {
        return Err(Error::EmptyServingSet);
    }
    if fading.len() != distances_m.len() {
        return Err(Error::InvalidArgument(format!(
            "{} fading draws for {} DUs",
            fading.len(),
            distances_m.len()
        )));
    }
    let mut signal = 0.0;
    let mut interference = 0.0;
    for (i, (&r, &h)) in distances_m.iter().zip(fading).enumerate() {
        let p = h * r.powf(-alpha);
        if serving.du_indices.contains(&i) {
            signal += p;
        } else {
            interference += p;
        }
    }
    Ok(signal / (interference + noise))
}

pub fn sinr_sample(
    serving: &ServingSet,
    all_distances_m: &[f64],
    fading_draws: &[f64],
    model: &NetworkModel,
) -> Result<f64> {
    sinr(
        serving,
        all_distances_m,
        fading_draws,
        model.pathloss_exponent,
        model.normalized_noise(),
    )
}

/// `F(x) = int_1^inf x / (u^(alpha/2) + x) du`, the normalized interference
/// exponent: `L_R(s) = exp(-pi L R^2 F(s R^-alpha / mu))`.
///
/// Evaluated as `(2x/(alpha-2)) int_0^1 dz / (1 + x z^(alpha/(alpha-2)))`,
/// which has a smooth integrand for every `alpha > 2`.
pub fn interference_exponent(x: f64, alpha: f64) -> (f64, f64) {
    if x == 0.0 {
        return (0.0, 0.0);
    }
    let p = alpha / (alpha - 2.0);
    let opts = QuadOptions {
        abs_tol: 1e-15,
        rel_tol: 1e-12,
        max_subdivisions: 400,
    };
    let r = integrate(|z| 1.0 / (1.0 + x * z.powf(p)), 0.0, 1.0, opts);
    let scale = 2.0 * x / (alpha - 2.0);
    (scale * r.value, scale * r.abs_error)
}

/// `dF/dx = (2/(alpha-2)) int_0^1 dz / (1 + x z^p)^2`.
pub fn interference_exponent_derivative(x: f64, alpha: f64) -> f64 {
    let p = alpha / (alpha - 2.0);
    let opts = QuadOptions {
        abs_tol: 1e-15,
        rel_tol: 1e-12,
        max_subdivisions: 400,
    };
    let r = integrate(
        |z| {
            let d = 1.0 + x * z.powf(p);
            1.0 / (d * d)
        },
        0.0,
        1.0,
        opts,
    );
    2.0 / (alpha - 2.0) * r.value
}

/// Laplace transform of the PPP interference from DUs beyond `exclusion_radius_m`.
pub fn interference_laplace(s: f64, exclusion_radius_m: f64, model: &NetworkModel) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::InvalidArgument(format!("s must be >= 0, got {s}")));
    }
    if !(exclusion_radius_m > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "exclusion radius must be > 0, got {exclusion_radius_m}"
        )));
    }
    let alpha = model.pathloss_exponent;
    let x = s * exclusion_radius_m.powf(-alpha) / model.fading_mean;
    let (f, err) = interference_exponent(x, alpha);
    let mass = PI * model.du_density_per_m2() * exclusion_radius_m * exclusion_radius_m;
    if !f.is_finite() || err > 1e-9 * f.max(1.0) {
        return Err(Error::Numerics {
            what: "interference exponent".into(),
            estimate: err,
        });
    }
    Ok((-mass * f).exp())
}

/// Per-`w` coverage densities for a fixed SINR threshold.
struct CoverageKernel {
    alpha: f64,
    t: f64,
    /// Noise coefficient: `mu T sigma^2 / (pi L)^(alpha/2)`.
    c: f64,
    f_t: f64,
    fp_t: f64,
    inner: QuadOptions,
    worst_error: Cell<f64>,
}

impl CoverageKernel {
    fn new(model: &NetworkModel, t: f64) -> Self {
        let alpha = model.pathloss_exponent;
        let lam_pi = PI * model.du_density_per_m2();
        let c = model.fading_mean * t * model.normalized_noise() / lam_pi.powf(alpha / 2.0);
        Self {
            alpha,
            t,
            c,
            f_t: interference_exponent(t, alpha).0,
            fp_t: interference_exponent_derivative(t, alpha),
            inner: QuadOptions {
                abs_tol: 1e-12,
                rel_tol: 1e-11,
                max_subdivisions: 400,
            },
            worst_error: Cell::new(0.0),
        }
    }

    fn note(&self, err: f64) {
        if err > self.worst_error.get() {
            self.worst_error.set(err);
        }
    }

    /// `int_0^inf b e^-b g(b) db` for a weight already containing `e^-(k b)`.
    fn b_average<G: Fn(f64) -> f64>(&self, g: G) -> f64 {
        let r = integrate_to_infinity(|b| b * (-b).exp() * g(b), 0.0, self.inner);
        self.note(r.abs_error);
        r.value
    }

    /// Conditional density of {DM, covered} at ratio `w` (w <= p_dm).
    fn dm(&self, w: f64) -> f64 {
        let h = self.alpha / 2.0;
        let q = w.powf(h);
        let k = interference_exponent(self.t * q, self.alpha).0;
        let second = 1.0 / (1.0 + self.t * q);
        if self.c == 0.0 {
            return second / ((1.0 + k) * (1.0 + k));
        }
        second * self.b_average(|b| (-b * k - self.c * (w * b).powf(h)).exp())
    }

    /// Conditional density of {CM, covered} at ratio `w` (w >= p_dm).
    fn cm(&self, w: f64) -> f64 {
        let h = self.alpha / 2.0;
        let q = w.powf(h);
        let (c, t, f_t) = (self.c, self.t, self.f_t);
        if 1.0 - q < NU_LIMIT {
            let tfp = t * self.fp_t;
            if c == 0.0 {
                let k = 1.0 + f_t;
                return 1.0 / (k * k) + 2.0 * tfp / (k * k * k);
            }
            return self.b_average(|b| {
                let nb = c * b.powf(h);
                (-b * f_t - nb).exp() * (1.0 + nb + b * tfp)
            });
        }
        let k1 = interference_exponent(t * q, self.alpha).0;
        if c == 0.0 {
            let a = 1.0 + k1;
            let b = 1.0 + f_t;
            return (1.0 / (a * a) - q / (b * b)) / (1.0 - q);
        }
        self.b_average(|b| {
            let near = (-b * k1 - c * (w * b).powf(h)).exp();
            let far = (-b * f_t - c * b.powf(h)).exp();
            (near - q * far) / (1.0 - q)
        })
    }
}

fn check_query(q: &CoverageQuery<'_>) -> Result<()> {
    q.model.validate()?;
    if !(q.sinr_threshold_linear >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "SINR threshold must be >= 0, got {}",
            q.sinr_threshold_linear
        )));
    }
    if !(q.gamma_linear >= 1.0) {
        return Err(Error::InvalidThreshold(q.gamma_linear));
    }
    Ok(())
}

const OUTER: QuadOptions = QuadOptions {
    abs_tol: 1e-10,
    rel_tol: 1e-10,
    max_subdivisions: 1000,
};

fn finish(value: f64, err: f64, converged: bool, what: &str) -> Result<f64> {
    if converged && value.is_finite() {
        Ok(value.clamp(0.0, 1.0))
    } else {
        Err(Error::Numerics {
            what: what.into(),
            estimate: err,
        })
    }
}

/// Joint probability of {DM mode, SINR >= T}.
pub fn coverage_dm(query: &CoverageQuery<'_>) -> Result<f64> {
    check_query(query)?;
    if query.sinr_threshold_linear.is_infinite() {
        return Ok(0.0);
    }
    let p_dm = mar_analytic(query.gamma_linear, query.model.pathloss_exponent)?.p_dm;
    let k = CoverageKernel::new(query.model, query.sinr_threshold_linear);
    let r = integrate(|w| k.dm(w), 0.0, p_dm, OUTER);
    finish(
        r.value,
        r.abs_error + k.worst_error.get(),
        r.converged,
        "coverage_dm",
    )
}

/// Joint probability of {CM mode with two DUs, SINR >= T}.
pub fn coverage_cm(query: &CoverageQuery<'_>) -> Result<f64> {
    check_query(query)?;
    if query.sinr_threshold_linear.is_infinite() {
        return Ok(0.0);
    }
    let p_dm = mar_analytic(query.gamma_linear, query.model.pathloss_exponent)?.p_dm;
    if p_dm >= 1.0 {
        return Ok(0.0);
    }
    let k = CoverageKernel::new(query.model, query.sinr_threshold_linear);
    let r = integrate(|w| k.cm(w), p_dm, 1.0, OUTER);
    finish(
        r.value,
        r.abs_error + k.worst_error.get(),
        r.converged,
        "coverage_cm",
    )
}

/// Total coverage as one integral over `w` whose integrand switches from the
/// DM to the CM density at `w = gamma^(-2/alpha)`.
pub fn total_coverage(query: &CoverageQuery<'_>) -> Result<f64> {
    check_query(query)?;
    if query.sinr_threshold_linear.is_infinite() {
        return Ok(0.0);
    }
    let p_dm = mar_analytic(query.gamma_linear, query.model.pathloss_exponent)?.p_dm;
    let k = CoverageKernel::new(query.model, query.sinr_threshold_linear);
    let r = integrate_with_breaks(
        |w| if w < p_dm { k.dm(w) } else { k.cm(w) },
        0.0,
        1.0,
        &[p_dm],
        OUTER,
    );
    finish(
        r.value,
        r.abs_error + k.worst_error.get(),
        r.converged,
        "total_coverage",
    )
}

pub fn coverage(query: &CoverageQuery<'_>) -> Result<f64> {
    match query.mode_selector {
        ModeSelector::Dm => coverage_dm(query),
        ModeSelector::Cm => coverage_cm(query),
        ModeSelector::Total => total_coverage(query),
    }
}

/// Coverage conditioned on the user being served in `mode`.
///
/// At the degenerate ends (`p_cm = 0` or `p_dm = 0`) the limit of the
/// conditional density is returned.
pub fn conditional_coverage(
    model: &NetworkModel,
    sinr_threshold_linear: f64,
    gamma_linear: f64,
    mode: Mode,
) -> Result<f64> {
    let query = CoverageQuery {
        sinr_threshold_linear,
        gamma_linear,
        model,
        mode_selector: match mode {
            Mode::Cm => ModeSelector::Cm,
            Mode::Dm => ModeSelector::Dm,
        },
    };
    check_query(&query)?;
    let mar = mar_analytic(gamma_linear, model.pathloss_exponent)?;
    let mass = mar.get(mode);
    if mass < 1e-9 {
        let k = CoverageKernel::new(model, sinr_threshold_linear);
        return Ok(match mode {
            Mode::Cm => k.cm(1.0),
            Mode::Dm => k.dm(0.0),
        }
        .clamp(0.0, 1.0));
    }
    Ok((coverage(&query)? / mass).clamp(0.0, 1.0))
}

/// Options for the outer rate integral over `xi = ln(1 + theta)`.
#[derive(Debug, Clone, Copy)]
pub struct RateOptions {
    pub abs_tol: f64,
    pub tail_tol: f64,
    pub segment: f64,
    pub max_xi: f64,
}

impl Default for RateOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-7,
            tail_tol: 1e-6,
            segment: 8.0,
            max_xi: 400.0,
        }
    }
}

/// `int_0^inf ccdf(theta) / (1 + theta) dtheta`, integrated over
/// `xi = ln(1 + theta)` in segments until the tail bound
/// `ccdf(theta_max) * alpha / 2` (the `theta^(-2/alpha)` decay of the SINR
/// tail) drops below `tail_tol`.
pub fn rate_from_ccdf<F>(ccdf: F, alpha: f64, opts: RateOptions) -> Result<RateResult>
where
    F: Fn(f64) -> Result<f64>,
{
    let failure: Cell<Option<Error>> = Cell::new(None);
    let eval = |xi: f64| match ccdf(xi.exp_m1()) {
        Ok(v) => v,
        Err(e) => {
            failure.set(Some(e));
            0.0
        }
    };
    let mut total = 0.0;
    let mut err = 0.0;
    let mut xi_max = 0.0;
    loop {
        let r = integrate(
            eval,
            xi_max,
            xi_max + opts.segment,
            QuadOptions::with_abs_tol(opts.abs_tol),
        );
        if let Some(e) = failure.take() {
            return Err(e);
        }
        if !r.converged {
            return Err(Error::Numerics {
                what: format!("rate integral on [{xi_max}, {}]", xi_max + opts.segment),
                estimate: r.abs_error,
            });
        }
        total += r.value;
        err += r.abs_error;
        xi_max += opts.segment;
        let tail = ccdf(xi_max.exp_m1())? * alpha / 2.0;
        if tail < opts.tail_tol {
            return Ok(RateResult::from_nats(total, err + tail));
        }
        if xi_max >= opts.max_xi {
            return Err(Error::Numerics {
                what: format!("rate tail not below tolerance at xi = {xi_max}"),
                estimate: tail,
            });
        }
    }
}

/// Ergodic rate `E[ln(1 + SINR)]` of a user with PLD threshold `gamma`.
pub fn ergodic_rate(gamma_linear: f64, model: &NetworkModel) -> Result<RateResult> {
    ergodic_rate_with(gamma_linear, model, RateOptions::default())
}

pub fn ergodic_rate_with(
    gamma_linear: f64,
    model: &NetworkModel,
    opts: RateOptions,
) -> Result<RateResult> {
    model.validate()?;
    if !(gamma_linear >= 1.0) {
        return Err(Error::InvalidThreshold(gamma_linear));
    }
    rate_from_ccdf(
        |theta| {
            total_coverage(&CoverageQuery {
                sinr_threshold_linear: theta,
                gamma_linear,
                model,
                mode_selector: ModeSelector::Total,
            })
        },
        model.pathloss_exponent,
        opts,
    )
}

/// `G(x) = (2 (mu T)^(2/alpha) / alpha) int_0^inf h^(2/alpha)
/// (Gamma(-2/alpha, mu T h x) - Gamma(-2/alpha)) mu e^(-mu h) dh`.
///
/// Uses `Gamma(-d, y) - Gamma(-d) = (gamma_lower(1-d, y) + y^-d e^-y) / d`.
/// The function equals `x^(-2/alpha) (1 + F(T x))`: it is decreasing in `x`
/// and diverges as `x -> 0`, where `+inf` is returned.
pub fn g_function(x: f64, t: f64, alpha: f64, mu: f64) -> Result<f64> {
    if !(x >= 0.0) || !(t > 0.0) || !(alpha > 2.0) || !(mu > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "g_function(x={x}, T={t}, alpha={alpha}, mu={mu})"
        )));
    }
    if x == 0.0 {
        return Ok(f64::INFINITY);
    }
    let d = 2.0 / alpha;
    let integrand = |h: f64| {
        if h <= 0.0 {
            return 0.0;
        }
        let y = mu * t * h * x;
        let lower = statrs::function::gamma::gamma_li(1.0 - d, y);
        let diff = (lower + y.powf(-d) * (-y).exp()) / d;
        h.powf(d) * diff * mu * (-mu * h).exp()
    };
    let r = integrate_to_infinity(integrand, 0.0, QuadOptions::with_abs_tol(1e-12));
    let value = 2.0 * (mu * t).powf(d) / alpha * r.checked("g_function")?;
    Ok(value)
}

/// `A_CM - A_DM` at `(r1, r2)`: the CM and DM coverage integrands with the
/// common noise factor `exp(-mu T r1^alpha sigma^2)` removed. `A_DM` uses the
/// Laplace functional of all DUs beyond `r1`; `A_CM` that beyond `r2`.
pub fn cm_dm_gap(r1_m: f64, r2_m: f64, t: f64, model: &NetworkModel) -> Result<f64> {
    let (a_cm, a_dm) = cm_dm_terms(r1_m, r2_m, t, model)?;
    Ok(a_cm - a_dm)
}

pub fn cm_dm_terms(r1_m: f64, r2_m: f64, t: f64, model: &NetworkModel) -> Result<(f64, f64)> {
    if !(r1_m > 0.0) || r2_m < r1_m {
        return Err(Error::OrderingViolation(format!(
            "r1 = {r1_m}, r2 = {r2_m}"
        )));
    }
    let alpha = model.pathloss_exponent;
    let lam_pi = PI * model.du_density_per_m2();
    let noise = model.normalized_noise();
    let mu = model.fading_mean;
    let q = (r1_m / r2_m).powf(alpha);
    let f_t = interference_exponent(t, alpha).0;
    let a_dm = (-lam_pi * r1_m * r1_m * f_t).exp();
    let m2 = lam_pi * r2_m * r2_m;
    let l2_far = (-m2 * f_t).exp();
    let a_cm = if 1.0 - q < NU_LIMIT {
        let s2n = mu * t * r2_m.powf(alpha) * noise;
        l2_far * (1.0 + s2n + m2 * t * interference_exponent_derivative(t, alpha))
    } else {
        let nu = q / (1.0 - q);
        let l2_near = (-m2 * interference_exponent(t * q, alpha).0).exp();
        let extra_noise = (-mu * t * (r2_m.powf(alpha) - r1_m.powf(alpha)) * noise).exp();
        (1.0 + nu) * l2_near - nu * extra_noise * l2_far
    };
    Ok((a_cm, a_dm))
}
