use std::fmt;
use std::ops::{Add, AddAssign, Sub};

/// Absolute clamping tolerance for work-unit bookkeeping, in work-units.
pub const EPSILON: f64 = 1e-9;

/// Relative tolerance applied on top of [`EPSILON`] when deciding whether a
/// claim has drained. Work amounts in the 1e12 range leave float residues far
/// above any absolute epsilon, so completion checks scale with the claim's
/// initial work.
pub const REL_EPSILON: f64 = 1e-9;

/// Simulated time in seconds.
///
/// Plain `f64` seconds with a total order (no NaN admitted), so it can key a
/// priority queue. Ties between events at equal time are broken by the
/// enqueue sequence number, never by the time value itself.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimTime(f64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0.0);

    pub fn new(seconds: f64) -> SimTime {
        assert!(seconds.is_finite(), "simulated time must be finite: {seconds}");
        SimTime(seconds)
    }

    pub fn seconds(self) -> f64 {
        self.0
    }
}

impl Eq for SimTime {}

impl Ord for SimTime {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl PartialOrd for SimTime {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl From<f64> for SimTime {
    fn from(seconds: f64) -> Self {
        SimTime::new(seconds)
    }
}

impl Add<f64> for SimTime {
    type Output = SimTime;
    fn add(self, rhs: f64) -> SimTime {
        SimTime::new(self.0 + rhs)
    }
}

impl AddAssign<f64> for SimTime {
    fn add_assign(&mut self, rhs: f64) {
        *self = *self + rhs;
    }
}

impl Sub for SimTime {
    type Output = f64;
    fn sub(self, rhs: SimTime) -> f64 {
        self.0 - rhs.0
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.6}", self.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordering_is_total() {
        let a = SimTime::new(1.0);
        let b = SimTime::new(2.0);
        assert!(a < b);
        assert_eq!(a.max(b), b);
    }

    #[test]
    #[should_panic]
    fn rejects_nan() {
        let _ = SimTime::new(f64::NAN);
    }
}
