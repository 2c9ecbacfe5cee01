use rand::Rng;

use super::Point2;
use crate::error::{Error, Result};
use crate::seed;

/// `n` points drawn i.i.d. uniform on `[0, side]²`.
pub fn sample_points(n: usize, side: f64, seed: u64) -> Result<Vec<Point2>> {
    if n < 4 {
        return Err(Error::InvalidArgument(format!("need at least 4 points, got {n}")));
    }
    if !(side > 0.0 && side.is_finite()) {
        return Err(Error::InvalidArgument(format!("side must be positive, got {side}")));
    }
    let mut rng = seed::rng(seed);
    Ok((0..n)
        .map(|_| Point2::new(side * rng.random::<f64>(), side * rng.random::<f64>()))
        .collect())
}
