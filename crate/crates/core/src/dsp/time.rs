use super::{BiquadSection, CascadeParams};
use crate::error::Result;

/// Runs `input` through the sections in order, each in transposed direct form II.
pub fn filter_sections(sections: &[BiquadSection], input: &[f64]) -> Vec<f64> {
    let mut buf = input.to_vec();
    for s in sections {
        let (mut s1, mut s2) = (0.0, 0.0);
        for x in buf.iter_mut() {
            let xin = *x;
            let y = s.b0 * xin + s1;
            s1 = s.b1 * xin - s.a1 * y + s2;
            s2 = s.b2 * xin - s.a2 * y;
            *x = y;
        }
    }
    buf
}

/// Time-domain filtering through a parametric cascade.
pub fn apply_cascade_time(c: &CascadeParams, fs: f64, input: &[f64]) -> Result<Vec<f64>> {
    Ok(filter_sections(&c.sections(fs)?, input))
}

/// Finds the lag maximizing `sum_n estimated[n] * target[n + lag]` and returns `estimated`
/// delayed by that lag (same length, zero filled) together with the lag.
///
/// Ties go to the smallest `|lag|`, then to the negative lag.
pub fn align_by_xcorr(estimated: &[f64], target: &[f64]) -> (Vec<f64>, isize) {
    if estimated.is_empty() || target.is_empty() {
        return (estimated.to_vec(), 0);
    }
    let ne = estimated.len() as isize;
    let nt = target.len() as isize;
    let corr = |lag: isize| -> f64 {
        let lo = 0.max(-lag);
        let hi = ne.min(nt - lag);
        (lo..hi)
            .map(|n| estimated[n as usize] * target[(n + lag) as usize])
            .sum()
    };
    let max_abs = (ne - 1).max(nt - 1);
    let mut best_lag = 0isize;
    let mut best = corr(0);
    for k in 1..=max_abs {
        for lag in [-k, k] {
            if lag <= -ne || lag >= nt {
                continue;
            }
            let c = corr(lag);
            if c > best {
                best = c;
                best_lag = lag;
            }
        }
    }
    let shifted = (0..ne)
        .map(|n| {
            let src = n - best_lag;
            if (0..ne).contains(&src) {
                estimated[src as usize]
            } else {
                0.0
            }
        })
        .collect();
    (shifted, best_lag)
}
