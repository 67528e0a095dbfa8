use serde::{Deserialize, Serialize};

use super::ProbeError;

/// Fractions of the training stream at which the sender retrains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TransmissionSchedule(Vec<f64>);

impl Default for TransmissionSchedule {
    /// 0.1% followed by doublings up to the full set.
    fn default() -> Self {
        TransmissionSchedule(vec![
            0.001, 0.002, 0.004, 0.008, 0.016, 0.032, 0.0625, 0.125, 0.25, 0.5, 1.0,
        ])
    }
}

impl TransmissionSchedule {
    pub fn new(fractions: Vec<f64>) -> Result<Self, ProbeError> {
        let bad = |m: String| Err(ProbeError::Config(format!("schedule: {m}")));
        match fractions.first() {
            None => return bad("empty".into()),
            Some(&t0) if t0.is_nan() || t0 <= 0.0 => return bad(format!("first timestep {t0} must be positive")),
            _ => {}
        }
        if fractions.iter().any(|f| f.is_nan()) || fractions.windows(2).any(|w| w[0] >= w[1]) {
            return bad("timesteps must be strictly increasing".into());
        }
        if fractions.last() != Some(&1.0) {
            return bad("last timestep must be 1.0".into());
        }
        Ok(TransmissionSchedule(fractions))
    }

    /// Parses a comma-separated list such as `0.01,0.1,1`.
    pub fn parse(text: &str) -> Result<Self, ProbeError> {
        let values: Result<Vec<f64>, _> = text.split(',').map(|s| s.trim().parse::<f64>()).collect();
        Self::new(values.map_err(|e| ProbeError::Config(format!("schedule: {e}")))?)
    }

    pub fn fractions(&self) -> &[f64] {
        &self.0
    }

    /// Prefix lengths `ceil(t * n)` clamped to `[1, n]`, duplicates removed.
    pub fn boundaries(&self, n: usize) -> Vec<usize> {
        let mut out: Vec<usize> = Vec::with_capacity(self.0.len());
        if n == 0 {
            return out;
        }
        for &t in &self.0 {
            // the epsilon keeps products like 0.001 * 2000 from rounding up
            let c = ((t * n as f64) - 1e-9).ceil().clamp(1.0, n as f64) as usize;
            if out.last() != Some(&c) {
                out.push(c);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid() {
        let s = TransmissionSchedule::default();
        assert!(TransmissionSchedule::new(s.fractions().to_vec()).is_ok());
    }

    #[test]
    fn boundaries_for_2000() {
        let b = TransmissionSchedule::default().boundaries(2000);
        assert_eq!(b, vec![2, 4, 8, 16, 32, 64, 125, 250, 500, 1000, 2000]);
    }

    #[test]
    fn small_n_collapses() {
        let b = TransmissionSchedule::default().boundaries(10);
        assert_eq!(b, vec![1, 2, 3, 5, 10]);
        assert_eq!(TransmissionSchedule::default().boundaries(1), vec![1]);
    }

    #[test]
    fn rejects_invalid() {
        assert!(TransmissionSchedule::new(vec![]).is_err());
        assert!(TransmissionSchedule::new(vec![0.0, 1.0]).is_err());
        assert!(TransmissionSchedule::new(vec![0.5, 0.5, 1.0]).is_err());
        assert!(TransmissionSchedule::new(vec![0.1, 0.9]).is_err());
        assert!(TransmissionSchedule::parse("0.1, 0.5,1").is_ok());
        assert!(TransmissionSchedule::parse("x,1").is_err());
    }
}
