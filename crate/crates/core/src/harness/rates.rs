//! Convergence tables and exponential-decay fits.

use serde::{Deserialize, Serialize};

use super::norms::ErrorSeries;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub resolution: f64,
    pub error: f64,
    /// `None` on the first row.
    pub rate: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RateTable {
    pub rows: Vec<RateRow>,
}

impl RateTable {
    pub fn rates(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.rate).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("resolution,error,rate\n");
        for r in &self.rows {
            let rate = r.rate.map(|v| format!("{v:.16e}")).unwrap_or_default();
            out.push_str(&format!("{:.16e},{:.16e},{rate}\n", r.resolution, r.error));
        }
        out
    }
}

/// `rate_i = log(e_{i−1}/e_i) / log(r_{i−1}/r_i)` for rows ordered from
/// coarse to fine.
pub fn convergence_rates(rows: &[(f64, f64)]) -> Result<RateTable> {
    if rows.len() < 2 {
        return Err(Error::InvalidInput("need at least two rows for a rate table".into()));
    }
    if let Some(&(r, e)) = rows.iter().find(|(r, e)| !(*e > 0.0 && e.is_finite() && *r > 0.0)) {
        return Err(Error::InvalidInput(format!("bad rate-table row ({r}, {e})")));
    }
    if rows.windows(2).any(|w| w[1].0 >= w[0].0) {
        return Err(Error::InvalidInput("resolutions must be strictly decreasing".into()));
    }
    let mut table = RateTable::default();
    for (i, &(resolution, error)) in rows.iter().enumerate() {
        let rate = (i > 0).then(|| {
            let (r0, e0) = rows[i - 1];
            (e0 / error).ln() / (r0 / resolution).ln()
        });
        table.rows.push(RateRow { resolution, error, rate });
    }
    Ok(table)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    /// Least-squares slope of `ln e` against time; negative when decaying.
    pub log_slope: f64,
    pub plateau: f64,
    pub onset_step: usize,
}

impl DecayFit {
    pub fn rate(&self) -> f64 {
        -self.log_slope
    }
}

/// Plateau is the median of the last 10% of L2 errors, onset the first
/// record at or below 1.5× the plateau, and the slope is fitted over
/// records 2 to onset.
pub fn decay_analysis(series: &ErrorSeries) -> Result<DecayFit> {
    let n = series.len();
    if n < 20 {
        return Err(Error::InvalidInput(format!("decay analysis needs 20 records, got {n}")));
    }
    let tail_len = (n / 10).max(1);
    let mut tail: Vec<f64> = series.records[n - tail_len..].iter().map(|r| r.l2_error).collect();
    tail.sort_by(f64::total_cmp);
    let plateau = if tail_len % 2 == 1 {
        tail[tail_len / 2]
    } else {
        0.5 * (tail[tail_len / 2 - 1] + tail[tail_len / 2])
    };
    let onset = series.records.iter().position(|r| r.l2_error <= 1.5 * plateau).unwrap_or(n - 1);
    let fit: Vec<(f64, f64)> = series.records[2.min(onset)..=onset]
        .iter()
        .filter(|r| r.l2_error > 0.0)
        .map(|r| (r.time, r.l2_error.ln()))
        .collect();
    let slope = least_squares_slope(&fit);
    if !(slope < 0.0) {
        return Err(Error::NoDecay(slope));
    }
    Ok(DecayFit {
        log_slope: slope,
        plateau,
        onset_step: series.records[onset].step,
    })
}

fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    if pts.len() < 2 {
        return 0.0;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn synthetic(rate: f64, floor: f64, t_end: f64, n: usize) -> ErrorSeries {
        let mut s = ErrorSeries::default();
        for k in 0..=n {
            let t = t_end * k as f64 / n as f64;
            s.push(k, t, (-rate * t).exp() + floor, 0.0).unwrap();
        }
        s
    }

    #[test]
    fn table_examples() {
        let t = convergence_rates(&[(1.0 / 32.0, 4.690e-4), (1.0 / 64.0, 4.947e-5)]).unwrap();
        assert!((t.rates()[0] - 3.245).abs() < 1e-3);
        let t = convergence_rates(&[(0.2, 6.985e-5), (0.1, 1.870e-5)]).unwrap();
        assert!((t.rates()[0] - 1.901).abs() < 1e-3);
        let t = convergence_rates(&[(0.5, 2.0), (0.25, 2.0)]).unwrap();
        assert_eq!(t.rates()[0], 0.0);
        assert!(t.rows[0].rate.is_none());
    }

    #[test]
    fn rates_are_scale_invariant() {
        let rows = [(0.1, 3.0e-2), (0.05, 4.1e-3), (0.025, 5.3e-4)];
        let a = convergence_rates(&rows).unwrap().rates();
        let scaled: Vec<_> = rows.iter().map(|&(r, e)| (r, 1234.5 * e)).collect();
        let b = convergence_rates(&scaled).unwrap().rates();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-14);
        }
    }

    #[test]
    fn bad_rows_rejected() {
        assert!(convergence_rates(&[(0.1, 1.0)]).is_err());
        assert!(convergence_rates(&[(0.1, 1.0), (0.05, 0.0)]).is_err());
        assert!(convergence_rates(&[(0.1, 1.0), (0.2, 0.5)]).is_err());
    }

    #[test]
    fn synthetic_decay_example() {
        let fit = decay_analysis(&synthetic(1.0, 1e-6, 30.0, 3000)).unwrap();
        assert!((fit.rate() - 1.0).abs() < 0.05, "{fit:?}");
        assert!((fit.plateau / 1e-6 - 1.0).abs() < 0.2);
    }

    #[test]
    fn random_decays_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let rate = rng.random_range(0.5..20.0);
            let floor = 10f64.powf(rng.random_range(-10.0..-6.0));
            let t_end = 2.0 * (-floor.ln()) / rate;
            let fit = decay_analysis(&synthetic(rate, floor, t_end, 2000)).unwrap();
            assert!((fit.rate() / rate - 1.0).abs() < 0.05, "{rate} {floor}: {fit:?}");
            assert!((fit.plateau / floor - 1.0).abs() < 0.2, "{rate} {floor}: {fit:?}");
        }
    }

    #[test]
    fn constant_series_has_no_decay() {
        let mut s = ErrorSeries::default();
        for k in 0..40 {
            s.push(k, k as f64, 0.3, 0.0).unwrap();
        }
        assert!(matches!(decay_analysis(&s), Err(Error::NoDecay(_))));
    }
}
