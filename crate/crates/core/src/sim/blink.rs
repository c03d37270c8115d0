use super::rng::{substream, Stage};
use crate::analytic::{BlinkModel, ExcitationClock};
use crate::error::Result;
use rand::Rng;

/// Samples the bright/dark state of the emitter at every excitation pulse.
///
/// The emitter is a stationary two-state telegraph with on-probability
/// `beta = 1/(1 + a_blink)` and switching rates `k_on = beta / t_blink`,
/// `k_off = (1 - beta) / t_blink`. Between consecutive pulses the chain is
/// advanced with its exact transition probabilities, so the on-state
/// autocorrelation decays as `exp(-dt / t_blink)`.
pub fn simulate_blink_trace(clock: &ExcitationClock, blink: &BlinkModel, seed: u64) -> Result<Vec<bool>> {
    clock.validate()?;
    blink.validate()?;
    let n = clock.n_pulses as usize;
    if blink.a_blink == 0.0 {
        return Ok(vec![true; n]);
    }
    let beta = blink.on_probability();
    let decay = (-(clock.rep_period as f64) / blink.t_blink).exp();
    let stay_on = beta + (1.0 - beta) * decay;
    let turn_on = beta * (1.0 - decay);

    // Markov chain: inherently sequential.
    let mut rng = substream(seed, Stage::Blink, 0);
    let mut trace = Vec::with_capacity(n);
    let mut on = rng.random::<f64>() < beta;
    for i in 0..n {
        if i > 0 {
            let u: f64 = rng.random();
            on = if on { u < stay_on } else { u < turn_on };
        }
        trace.push(on);
    }
    Ok(trace)
}
