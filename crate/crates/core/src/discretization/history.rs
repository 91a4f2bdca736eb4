use std::collections::VecDeque;

use crate::error::{Error, Result};

/// Equally spaced past velocity fields on Ω, enough to evaluate
/// `u_t(·, t - τ(t))` for any admissible delay.
#[derive(Debug, Clone)]
pub struct HistoryBuffer {
    dt: f64,
    tau1: f64,
    entries: VecDeque<(f64, Vec<f64>)>,
}

impl HistoryBuffer {
    pub fn new(dt: f64, tau1: f64) -> Result<Self> {
        if !(dt > 0.0) || !(tau1 >= 0.0) {
            return Err(Error::MalformedSpec(format!("history needs dt > 0 and tau1 >= 0, got {dt}, {tau1}")));
        }
        Ok(Self {
            dt,
            tau1,
            entries: VecDeque::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn span(&self) -> Option<(f64, f64)> {
        Some((self.entries.front()?.0, self.entries.back()?.0))
    }

    pub fn entry(&self, k: usize) -> &[f64] {
        &self.entries[k].1
    }

    fn tol(&self) -> f64 {
        1e-6 * self.dt
    }

    /// Appends the field at `t`, which must follow the last entry by exactly `dt`,
    /// and drops entries older than `t - τ₁ - 2dt`.
    pub fn push(&mut self, t: f64, field: Vec<f64>) -> Result<()> {
        if let Some((last, _)) = self.entries.back() {
            if (t - last - self.dt).abs() > self.tol() {
                return Err(Error::Ordering { last: *last, pushed: t });
            }
        }
        self.entries.push_back((t, field));
        let cutoff = t - self.tau1 - 2.0 * self.dt - self.tol();
        while self.entries.front().is_some_and(|(s, _)| *s < cutoff) {
            self.entries.pop_front();
        }
        Ok(())
    }

    /// Index `k` and weight θ with `query = t_k + θ dt`, `0 <= θ < 1`.
    pub fn bracket(&self, query: f64) -> Result<(usize, f64)> {
        let (start, end) = self.span().ok_or(Error::HistoryUnderflow {
            query,
            start: f64::NAN,
            end: f64::NAN,
        })?;
        if query < start - self.tol() || query > end + self.tol() {
            return Err(Error::HistoryUnderflow { query, start, end });
        }
        let pos = ((query - start) / self.dt).max(0.0);
        let mut k = pos.floor() as usize;
        let mut theta = pos - k as f64;
        if theta > 1.0 - 1e-9 {
            k += 1;
            theta = 0.0;
        } else if theta < 1e-9 {
            theta = 0.0;
        }
        let last = self.entries.len() - 1;
        if k >= last {
            return Ok((last, 0.0));
        }
        Ok((k, theta))
    }

    /// Nodewise linear interpolation in time.
    pub fn interpolate(&self, query: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.entries.front().map_or(0, |e| e.1.len())];
        self.interpolate_into(query, &mut out)?;
        Ok(out)
    }

    pub fn interpolate_into(&self, query: f64, out: &mut [f64]) -> Result<()> {
        let (k, theta) = self.bracket(query)?;
        let lo = &self.entries[k].1;
        if theta == 0.0 {
            out.copy_from_slice(lo);
            return Ok(());
        }
        let hi = &self.entries[k + 1].1;
        for ((o, a), b) in out.iter_mut().zip(lo).zip(hi) {
            *o = (1.0 - theta) * a + theta * b;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_entry() {
        let mut h = HistoryBuffer::new(0.1, 0.5).unwrap();
        h.push(0.0, vec![1.0, 2.0]).unwrap();
        assert_eq!(h.len(), 1);
        assert_eq!(h.interpolate(0.0).unwrap(), vec![1.0, 2.0]);
    }

    #[test]
    fn retention_window() {
        let mut h = HistoryBuffer::new(0.1, 0.5).unwrap();
        for k in 0..20 {
            h.push(k as f64 * 0.1, vec![k as f64]).unwrap();
            let t = k as f64 * 0.1;
            // The two entries around t - τ₁ always survive.
            if t >= 0.5 {
                assert!(h.interpolate(t - 0.5).is_ok());
            }
        }
        assert!(h.len() <= 8, "retained {}", h.len());
    }

    #[test]
    fn midpoint_interpolation() {
        let mut h = HistoryBuffer::new(0.1, 0.5).unwrap();
        h.push(0.0, vec![0.0; 3]).unwrap();
        h.push(0.1, vec![1.0; 3]).unwrap();
        let v = h.interpolate(0.05).unwrap();
        assert!(v.iter().all(|x| (x - 0.5).abs() < 1e-12));
    }

    #[test]
    fn constant_history() {
        let mut h = HistoryBuffer::new(0.01, 0.2).unwrap();
        for k in 0..50 {
            h.push(k as f64 * 0.01, vec![3.5; 4]).unwrap();
        }
        assert_eq!(h.interpolate(0.4321).unwrap(), vec![3.5; 4]);
    }

    #[test]
    fn quadratic_interpolation_error() {
        let dt = 0.01;
        let mut h = HistoryBuffer::new(dt, 10.0).unwrap();
        for k in 0..=200 {
            let t = k as f64 * dt;
            h.push(t, vec![t * t]).unwrap();
        }
        let mut worst: f64 = 0.0;
        for i in 0..=20_000 {
            let q = 2.0 * i as f64 / 20_000.0;
            let v = h.interpolate(q).unwrap()[0];
            worst = worst.max((v - q * q).abs());
        }
        // Error of linear interpolation of t² is dt²/4 at midpoints.
        assert!(worst <= 5e-5);
        assert!((worst - dt * dt / 4.0).abs() < 1e-9);
    }

    #[test]
    fn out_of_order_and_underflow() {
        let mut h = HistoryBuffer::new(0.1, 0.5).unwrap();
        h.push(0.0, vec![0.0]).unwrap();
        assert!(matches!(h.push(0.0, vec![0.0]), Err(Error::Ordering { .. })));
        assert!(matches!(h.push(0.25, vec![0.0]), Err(Error::Ordering { .. })));
        h.push(0.1, vec![1.0]).unwrap();
        assert!(matches!(h.interpolate(-0.2), Err(Error::HistoryUnderflow { .. })));
        assert!(matches!(h.interpolate(0.3), Err(Error::HistoryUnderflow { .. })));
    }

    proptest! {
        #[test]
        fn stored_timestamps_are_exact(values in prop::collection::vec(-1e3f64..1e3, 5..40), pick in 0usize..1000) {
            let dt = 0.013;
            let mut h = HistoryBuffer::new(dt, 100.0).unwrap();
            for (k, v) in values.iter().enumerate() {
                h.push(k as f64 * dt, vec![*v, -*v]).unwrap();
            }
            let k = pick % values.len();
            let got = h.interpolate(k as f64 * dt).unwrap();
            prop_assert_eq!(got, vec![values[k], -values[k]]);
        }
    }
}
