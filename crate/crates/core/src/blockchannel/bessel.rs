use crate::{Error, Result};

pub const MAX_ORDER: i32 = 64;
pub const MAX_ARGUMENT: f64 = 100.0;

/// Below this argument the power series converges without harmful
/// cancellation; above it the normalized downward recurrence takes over.
const SERIES_LIMIT: f64 = 8.0;

/// First-kind Bessel function J_l(z) for |l| ≤ 64 and 0 ≤ z ≤ 100.
pub fn bessel_j(order: i32, z: f64) -> Result<f64> {
    if order.abs() > MAX_ORDER || !(0.0..=MAX_ARGUMENT).contains(&z) {
        return Err(Error::BesselRange { order, argument: z });
    }
    let l = order.unsigned_abs() as usize;
    let value = if z < SERIES_LIMIT { series(l, z) } else { miller(l, z) };
    Ok(if order < 0 && l % 2 == 1 { -value } else { value })
}

fn series(l: usize, z: f64) -> f64 {
    let half = z / 2.0;
    let mut term = 1.0;
    for k in 1..=l {
        term *= half / k as f64;
    }
    if term == 0.0 {
        return 0.0;
    }
    let q = half * half;
    let mut sum = term;
    let mut k = 0usize;
    loop {
        k += 1;
        term *= -q / (k as f64 * (k + l) as f64);
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() || k > 500 {
            return sum;
        }
    }
}

/// Downward recurrence J_{k−1} = (2k/z)J_k − J_{k+1} from far above both
/// l and z, normalized with J_0 + 2ΣJ_{2k} = 1.
fn miller(l: usize, z: f64) -> f64 {
    let top = l.max(z.ceil() as usize);
    let mut start = top + 20 + (40.0 * top as f64).sqrt() as usize;
    start += start % 2;
    let (mut above, mut current) = (0.0f64, 1e-30f64);
    let mut norm = 0.0;
    let mut wanted = 0.0;
    for k in (1..=start).rev() {
        let below = 2.0 * k as f64 / z * current - above;
        above = current;
        current = below;
        let idx = k - 1;
        if idx == l {
            wanted = current;
        }
        if idx % 2 == 0 && idx > 0 {
            norm += 2.0 * current;
        }
        if current.abs() > 1e250 {
            above *= 1e-250;
            current *= 1e-250;
            norm *= 1e-250;
            wanted *= 1e-250;
        }
    }
    norm += current;
    wanted / norm
}
