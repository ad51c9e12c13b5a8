use rand::Rng;
use std::f64::consts::{PI, TAU};

/// Concentrations below this are sampled as uniform; the total-variation
/// distance to the von Mises law is below 1e-6 there.
pub const UNIFORM_CUTOFF: f64 = 1e-6;

/// Draw an angle in [0, 2pi) with density proportional to
/// `exp(kappa * cos(theta - mu))`.
///
/// Best–Fisher wrapped-Cauchy envelope rejection. For `kappa <
/// UNIFORM_CUTOFF` the first uniform of the stream is returned as the angle,
/// so a zero tilt reproduces the untilted draw bit for bit.
pub fn sample<R: Rng + ?Sized>(mu: f64, kappa: f64, rng: &mut R) -> f64 {
    if kappa < UNIFORM_CUTOFF {
        let theta = TAU * crate::rng::unit_f64(rng.next_u64());
        return if theta >= TAU { 0.0 } else { theta };
    }
    let tau = 1.0 + (1.0 + 4.0 * kappa * kappa).sqrt();
    let rho = (tau - (2.0 * tau).sqrt()) / (2.0 * kappa);
    let r = (1.0 + rho * rho) / (2.0 * rho);
    let f = loop {
        let u1: f64 = rng.random();
        let u2: f64 = rng.random();
        let z = (PI * u1).cos();
        let f = (1.0 + r * z) / (r + z);
        let c = kappa * (r - f);
        if c * (2.0 - c) - u2 > 0.0 || (c / u2).ln() + 1.0 - c >= 0.0 {
            break f;
        }
    };
    let delta = f.clamp(-1.0, 1.0).acos();
    let theta = if rng.random::<bool>() {
        mu + delta
    } else {
        mu - delta
    };
    let theta = theta.rem_euclid(TAU);
    if theta >= TAU {
        0.0
    } else {
        theta
    }
}
