//! Distribution functions: Student-t, standard normal and Gamma quantiles.

use super::special::{beta_reg_split, gamma_reg, ln_beta};
use crate::error::{Error, Result};

const SQRT_2PI: f64 = 2.506_628_274_631_000_5;

fn check_prob(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("probability must lie in (0, 1), got {p}")))
    }
}

fn check_dof(dof: f64) -> Result<()> {
    if dof > 0.0 && dof.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("degrees of freedom must be finite and > 0, got {dof}")))
    }
}

/// P(T > t) for the standardized Student-t with `dof` degrees of freedom.
pub fn student_t_sf(t: f64, dof: f64) -> Result<f64> {
    check_dof(dof)?;
    if t.is_nan() {
        return Err(Error::Domain("student_t_sf of NaN".into()));
    }
    if t == 0.0 {
        return Ok(0.5);
    }
    let t2 = t * t;
    let denom = dof + t2;
    // P(|T| > |t|) = I_{ν/(ν+t²)}(ν/2, 1/2)
    let two_sided = beta_reg_split(0.5 * dof, 0.5, dof / denom, t2 / denom)?;
    Ok(if t > 0.0 { 0.5 * two_sided } else { 1.0 - 0.5 * two_sided })
}

/// Cumulative distribution of the standardized Student-t.
pub fn student_t_cdf(t: f64, dof: f64) -> Result<f64> {
    student_t_sf(-t, dof)
}

/// Density of the standardized Student-t.
pub fn student_t_pdf(t: f64, dof: f64) -> Result<f64> {
    check_dof(dof)?;
    let ln = -0.5 * (dof + 1.0) * (t * t / dof).ln_1p() - 0.5 * dof.ln() - ln_beta(0.5 * dof, 0.5)?;
    Ok(ln.exp())
}

/// Quantile of the standardized Student-t, by safeguarded Newton iteration on
/// the upper tail probability.
pub fn student_t_quantile(p: f64, dof: f64) -> Result<f64> {
    check_prob(p)?;
    check_dof(dof)?;
    if p == 0.5 {
        return Ok(0.0);
    }
    if p < 0.5 {
        return Ok(-student_t_quantile(1.0 - p, dof)?);
    }
    let tail = 1.0 - p;

    let mut lo = 0.0;
    let mut hi = normal_quantile(p)?.max(1.0);
    while student_t_sf(hi, dof)? > tail {
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::Domain(format!("t quantile overflow (p={p}, dof={dof})")));
        }
    }

    let mut t = 0.5 * (lo + hi);
    for _ in 0..500 {
        let f = student_t_sf(t, dof)? - tail;
        if f == 0.0 {
            return Ok(t);
        }
        if f > 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        let density = student_t_pdf(t, dof)?;
        let newton = t + f / density;
        let next = if density > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - t).abs() <= 4.0 * f64::EPSILON * t.abs().max(1.0) {
            return Ok(next);
        }
        t = next;
    }
    Ok(t)
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    let (_, q) = gamma_reg(0.5, 0.5 * z * z).expect("valid incomplete gamma arguments");
    if z < 0.0 {
        0.5 * q
    } else {
        1.0 - 0.5 * q
    }
}

/// Standard normal quantile (rational initial guess refined by Halley steps).
pub fn normal_quantile(p: f64) -> Result<f64> {
    check_prob(p)?;
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.024_25;

    let mut x = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    for _ in 0..2 {
        let e = normal_cdf(x) - p;
        let u = e * SQRT_2PI * (0.5 * x * x).exp();
        x -= u / (1.0 + 0.5 * x * u);
    }
    Ok(x)
}

/// Quantile of Gamma(shape, rate), by bisection on ln x.
pub fn gamma_quantile(p: f64, shape: f64, rate: f64) -> Result<f64> {
    check_prob(p)?;
    if !(shape > 0.0 && rate > 0.0 && shape.is_finite() && rate.is_finite()) {
        return Err(Error::Domain(format!("gamma_quantile needs shape, rate > 0 (got {shape}, {rate})")));
    }
    let cdf = |ln_x: f64| gamma_reg(shape, ln_x.exp()).map(|(lower, _)| lower);
    let center = shape.ln();
    let mut step = 1.0;
    let mut lo = center - step;
    while cdf(lo)? > p {
        step *= 2.0;
        lo = center - step;
        if lo < -740.0 {
            lo = -740.0;
            break;
        }
    }
    step = 1.0;
    let mut hi = center + step;
    while cdf(hi)? < p {
        step *= 2.0;
        hi = center + step;
    }
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid)? < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 * mid.abs().max(1.0) {
            break;
        }
    }
    Ok((0.5 * (lo + hi)).exp() / rate)
}

/// Standard deviation of a Student-t with the given scale; infinite for dof <= 2.
pub fn student_t_std(scale: f64, dof: f64) -> f64 {
    if dof > 2.0 {
        scale * (dof / (dof - 2.0)).sqrt()
    } else {
        f64::INFINITY
    }
}
