use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::case::{GridCase, RenewableScenario};
use crate::error::CaseError;

/// Lag-1 autocorrelation of the multiplicative noise process.
pub const AR1_COEFFICIENT: f64 = 0.8;

/// Rescales renewable availability so expected renewable energy equals
/// `penetration` times the inflexible load energy. All other fields are untouched.
pub fn scale_case(case: &GridCase, penetration: f64) -> Result<GridCase, CaseError> {
    if !(0.0..=1.0).contains(&penetration) {
        return Err(CaseError::Scale(format!("penetration {penetration} outside [0, 1]")));
    }
    let load = case.load_energy();
    if load <= 0.0 {
        return Err(CaseError::Scale("zero total load, cannot normalize penetration".into()));
    }
    let mut scaled = case.clone();
    if penetration == 0.0 {
        for sc in &mut scaled.scenarios {
            sc.available_power.iter_mut().for_each(|w| *w = 0.0);
        }
        return Ok(scaled);
    }
    let renewable = case.expected_renewable_energy();
    if renewable <= 0.0 {
        return Err(CaseError::Scale("case has no renewable energy to scale".into()));
    }
    let factor = penetration * load / renewable;
    for sc in &mut scaled.scenarios {
        sc.available_power.iter_mut().for_each(|w| *w *= factor);
    }
    Ok(scaled)
}

/// Draws `count` equiprobable perturbations of `base`.
///
/// Each trace is `base[t] * (1 + e[t])` clipped at zero, where `e` is a
/// stationary AR(1) process with coefficient [`AR1_COEFFICIENT`] and marginal
/// standard deviation `noise_scale`.
pub fn generate_scenarios(
    base: &RenewableScenario,
    count: usize,
    noise_scale: f64,
    seed: u64,
) -> Result<Vec<RenewableScenario>, CaseError> {
    if count == 0 {
        return Err(CaseError::Scale("scenario count must be at least 1".into()));
    }
    if !(noise_scale >= 0.0 && noise_scale.is_finite()) {
        return Err(CaseError::Scale(format!("noise_scale {noise_scale} must be finite and non-negative")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let innovation = (1.0 - AR1_COEFFICIENT * AR1_COEFFICIENT).sqrt() * noise_scale;
    let probability = 1.0 / count as f64;
    let scenarios = (0..count)
        .map(|_| {
            let mut e = 0.0;
            let trace = base
                .available_power
                .iter()
                .enumerate()
                .map(|(t, &w)| {
                    let xi: f64 = StandardNormal.sample(&mut rng);
                    e = if t == 0 { noise_scale * xi } else { AR1_COEFFICIENT * e + innovation * xi };
                    (w * (1.0 + e)).max(0.0)
                })
                .collect();
            RenewableScenario {
                bus: base.bus,
                available_power: trace,
                probability,
                curtailable: base.curtailable,
            }
        })
        .collect();
    Ok(scenarios)
}

/// Replaces the scenario set of `case` with synthetic draws around its first scenario.
pub fn with_generated_scenarios(
    case: &GridCase,
    count: usize,
    noise_scale: f64,
    seed: u64,
) -> Result<GridCase, CaseError> {
    let base = case
        .scenarios
        .first()
        .ok_or_else(|| CaseError::Scale("case has no base scenario".into()))?;
    let mut out = case.clone();
    out.scenarios = generate_scenarios(base, count, noise_scale, seed)?;
    out.validate()?;
    Ok(out)
}
