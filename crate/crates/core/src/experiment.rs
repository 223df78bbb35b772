//! Parameter sweeps over the BB84 channel, summary statistics, and the
//! decibel ↔ damping-factor conversions.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bb84::{run_bb84, Bb84Config};
use crate::error::{QentError, Result};
use crate::noise::{ChannelPipeline, DampingMode};
use crate::rng::RandomSource;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesKind {
    Control,
    EveAlice,
    EveBob,
}

impl SeriesKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SeriesKind::Control => "control",
            SeriesKind::EveAlice => "eve_alice",
            SeriesKind::EveBob => "eve_bob",
        }
    }

    pub fn pipeline(self, eve_rate: f64, eta: f64, mode: DampingMode) -> Result<ChannelPipeline> {
        match self {
            SeriesKind::Control => ChannelPipeline::control(eta, mode),
            SeriesKind::EveAlice => ChannelPipeline::eve_near_alice(eve_rate, eta, mode),
            SeriesKind::EveBob => ChannelPipeline::eve_near_bob(eve_rate, eta, mode),
        }
    }
}

impl fmt::Display for SeriesKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SeriesKind {
    type Err = QentError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "control" => Ok(SeriesKind::Control),
            "eve_alice" => Ok(SeriesKind::EveAlice),
            "eve_bob" => Ok(SeriesKind::EveBob),
            other => Err(QentError::validation(format!(
                "unknown series {other:?} (expected control, eve_alice or eve_bob)"
            ))),
        }
    }
}

/// `0, step, 2·step, …, 1`. The step must divide 1.
pub fn eta_grid(step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(QentError::validation(format!("eta step must be in (0, 1], got {step}")));
    }
    let n = (1.0 / step).round();
    if (n * step - 1.0).abs() > 1e-9 {
        return Err(QentError::validation(format!("eta step {step} does not divide 1")));
    }
    let n = n as usize;
    Ok((0..=n).map(|i| i as f64 / n as f64).collect())
}

pub const DEFAULT_EVE_RATES: [f64; 6] = [0.1, 0.2, 0.3, 0.4, 0.5, 1.0];

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesConfig {
    pub series: SeriesKind,
    pub etas: Vec<f64>,
    /// Ignored for the control series.
    pub eve_rates: Vec<f64>,
    pub trials: usize,
    pub qubits: usize,
    pub master_seed: u64,
    pub damping: DampingMode,
}

impl SeriesConfig {
    pub fn new(series: SeriesKind, master_seed: u64) -> Self {
        Self {
            series,
            etas: eta_grid(0.05).expect("valid step"),
            eve_rates: DEFAULT_EVE_RATES.to_vec(),
            trials: 100,
            qubits: 1000,
            master_seed,
            damping: DampingMode::default(),
        }
    }

    /// Eve rates actually swept: `[0]` for the control series.
    pub fn swept_rates(&self) -> Vec<f64> {
        match self.series {
            SeriesKind::Control => vec![0.0],
            _ => self.eve_rates.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(QentError::validation("trials per point must be at least 1"));
        }
        if self.qubits == 0 {
            return Err(QentError::validation("qubits per trial must be at least 1"));
        }
        if self.etas.is_empty() {
            return Err(QentError::validation("no eta values"));
        }
        if self.series != SeriesKind::Control && self.eve_rates.is_empty() {
            return Err(QentError::validation(format!("series {} needs eve rates", self.series)));
        }
        for &v in self.etas.iter().chain(&self.swept_rates()) {
            if !(0.0..=1.0).contains(&v) {
                return Err(QentError::validation(format!("rate or eta {v} outside [0, 1]")));
            }
        }
        Ok(())
    }

    pub fn row_count(&self) -> usize {
        self.swept_rates().len() * self.etas.len() * self.trials
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRow {
    pub series: SeriesKind,
    pub eta: f64,
    pub eve_rate: f64,
    pub trial_index: usize,
    pub seed: u64,
    pub sent: u64,
    pub received: u64,
    pub sifted: u64,
    pub matched: u64,
    pub efficiency: f64,
    pub sifted_error_rate: f64,
    pub attenuation_db: f64,
}

/// One row per trial, in (eve rate, eta, trial) order whatever the
/// scheduling. Trial seeds are derived from the master seed by row index.
pub fn run_series(cfg: &SeriesConfig) -> Result<Vec<TrialRow>> {
    cfg.validate()?;
    let rates = cfg.swept_rates();
    let per_rate = cfg.etas.len() * cfg.trials;
    (0..cfg.row_count())
        .into_par_iter()
        .map(|idx| {
            let eve_rate = rates[idx / per_rate];
            let eta = cfg.etas[(idx % per_rate) / cfg.trials];
            let trial_index = idx % cfg.trials;
            let seed = RandomSource::derive_seed(cfg.master_seed, idx as u64);
            let pipeline = cfg.series.pipeline(eve_rate, eta, cfg.damping)?;
            let stats = run_bb84(&mut Bb84Config::new(cfg.qubits, pipeline, seed)?)?;
            Ok(TrialRow {
                series: cfg.series,
                eta,
                eve_rate,
                trial_index,
                seed,
                sent: stats.sent,
                received: stats.received,
                sifted: stats.sifted,
                matched: stats.matched,
                efficiency: stats.efficiency,
                sifted_error_rate: stats.sifted_error_rate,
                attenuation_db: stats.attenuation_db,
            })
        })
        .collect()
}

fn csv_error(e: csv::Error) -> QentError {
    QentError::Transport(format!("csv: {e}"))
}

pub fn write_rows<W: Write, T: Serialize>(w: W, rows: &[T]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r).map_err(csv_error)?;
    }
    out.flush()?;
    Ok(())
}

/// Least-squares polynomial `c0 + c1·x + c2·x²` (c2 = 0 for a linear fall-back).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurveFit {
    pub degree: usize,
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
}

impl CurveFit {
    pub fn eval(&self, x: f64) -> f64 {
        self.c0 + self.c1 * x + self.c2 * x * x
    }
}

/// Quadratic when at least three distinct abscissae exist, otherwise the
/// highest degree the points determine.
pub fn fit_curve(xs: &[f64], ys: &[f64]) -> Result<CurveFit> {
    if xs.is_empty() || xs.len() != ys.len() {
        return Err(QentError::validation("fit needs equal, nonempty x and y"));
    }
    let mut distinct = xs.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let degree = (distinct.len() - 1).min(2);
    let x = DMatrix::from_fn(xs.len(), degree + 1, |r, c| xs[r].powi(c as i32));
    let y = DVector::from_column_slice(ys);
    let coef = x
        .svd(true, true)
        .solve(&y, 1e-12)
        .map_err(|e| QentError::validation(format!("fit failed: {e}")))?;
    let at = |i: usize| if i <= degree { coef[i] } else { 0.0 };
    Ok(CurveFit {
        degree,
        c0: at(0),
        c1: at(1),
        c2: at(2),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub series: SeriesKind,
    pub pipeline: String,
    pub eve_rate: f64,
    pub eta: f64,
    pub trials: usize,
    pub mean: f64,
    pub stddev: f64,
    pub min: f64,
    pub max: f64,
    pub mean_sifted_error_rate: f64,
    pub mean_attenuation_db: f64,
    /// Fit of mean efficiency against eta over this row's curve.
    pub fit_degree: usize,
    pub fit_c0: f64,
    pub fit_c1: f64,
    pub fit_c2: f64,
}

/// Accumulated as offsets from the first sample, so constant input is exact.
fn mean(v: &[f64]) -> f64 {
    let first = v[0];
    if !first.is_finite() {
        return v.iter().sum::<f64>() / v.len() as f64;
    }
    first + v.iter().map(|x| x - first).sum::<f64>() / v.len() as f64
}

/// Sample standard deviation; zero for a single value.
fn stddev(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

/// Per (series, eve rate, eta) statistics, each carrying its curve's fit.
pub fn summarize(rows: &[TrialRow]) -> Result<Vec<SummaryRow>> {
    if rows.is_empty() {
        return Err(QentError::validation("nothing to summarize"));
    }
    let mut out: Vec<SummaryRow> = Vec::new();
    let mut start = 0;
    while start < rows.len() {
        let key = (rows[start].series, rows[start].eve_rate, rows[start].eta);
        let end = start
            + rows[start..]
                .iter()
                .take_while(|r| (r.series, r.eve_rate, r.eta) == key)
                .count();
        let group = &rows[start..end];
        let eff: Vec<f64> = group.iter().map(|r| r.efficiency).collect();
        let err: Vec<f64> = group.iter().map(|r| r.sifted_error_rate).collect();
        let db: Vec<f64> = group.iter().map(|r| r.attenuation_db).collect();
        let pipeline = key
            .0
            .pipeline(key.1, key.2, DampingMode::default())?
            .stage_names()
            .join(">");
        out.push(SummaryRow {
            series: key.0,
            pipeline,
            eve_rate: key.1,
            eta: key.2,
            trials: group.len(),
            mean: mean(&eff),
            stddev: stddev(&eff),
            min: eff.iter().copied().fold(f64::INFINITY, f64::min),
            max: eff.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            mean_sifted_error_rate: mean(&err),
            mean_attenuation_db: mean(&db),
            fit_degree: 0,
            fit_c0: 0.0,
            fit_c1: 0.0,
            fit_c2: 0.0,
        });
        start = end;
    }

    let mut i = 0;
    while i < out.len() {
        let curve = (out[i].series, out[i].eve_rate);
        let j = i + out[i..]
            .iter()
            .take_while(|r| (r.series, r.eve_rate) == curve)
            .count();
        let xs: Vec<f64> = out[i..j].iter().map(|r| r.eta).collect();
        let ys: Vec<f64> = out[i..j].iter().map(|r| r.mean).collect();
        let fit = fit_curve(&xs, &ys)?;
        for r in &mut out[i..j] {
            r.fit_degree = fit.degree;
            r.fit_c0 = fit.c0;
            r.fit_c1 = fit.c1;
            r.fit_c2 = fit.c2;
        }
        i = j;
    }
    Ok(out)
}

/// Attenuation in dB of a channel that loses the fraction `eta` of qubits.
pub fn attenuation_db(eta: f64) -> Result<f64> {
    if eta == 1.0 {
        return Err(QentError::validation("eta = 1 loses everything: attenuation is infinite"));
    }
    if !(0.0..1.0).contains(&eta) {
        return Err(QentError::validation(format!("eta must be in [0, 1), got {eta}")));
    }
    Ok(-10.0 * (1.0 - eta).log10())
}

pub fn eta_of_db(db: f64) -> Result<f64> {
    if !(db >= 0.0 && db.is_finite()) {
        return Err(QentError::validation(format!("attenuation must be a finite dB value ≥ 0, got {db}")));
    }
    Ok(1.0 - 10f64.powf(-db / 10.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_and_row_counts() {
        let cfg = SeriesConfig::new(SeriesKind::Control, 1);
        assert_eq!(cfg.etas.len(), 21);
        assert_eq!(cfg.etas[0], 0.0);
        assert_eq!(cfg.etas[20], 1.0);
        assert!((cfg.etas[7] - 0.35).abs() < 1e-15);
        assert_eq!(cfg.row_count(), 2100);
        assert_eq!(SeriesConfig::new(SeriesKind::EveAlice, 1).row_count(), 12_600);
        assert!(eta_grid(0.3).is_err());
        assert!(eta_grid(0.0).is_err());
        assert_eq!(eta_grid(1.0).unwrap(), vec![0.0, 1.0]);
    }

    #[test]
    fn single_point_gives_one_row() {
        let cfg = SeriesConfig {
            etas: vec![0.5],
            trials: 1,
            qubits: 10,
            ..SeriesConfig::new(SeriesKind::Control, 7)
        };
        let rows = run_series(&cfg).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].seed, RandomSource::derive_seed(7, 0));
    }

    #[test]
    fn rows_are_in_grid_order_and_deterministic() {
        let cfg = SeriesConfig {
            etas: vec![0.0, 0.5, 1.0],
            eve_rates: vec![0.2, 1.0],
            trials: 3,
            qubits: 50,
            ..SeriesConfig::new(SeriesKind::EveBob, 11)
        };
        let rows = run_series(&cfg).unwrap();
        assert_eq!(rows.len(), 18);
        assert_eq!((rows[4].eve_rate, rows[4].eta, rows[4].trial_index), (0.2, 0.5, 1));
        assert_eq!((rows[17].eve_rate, rows[17].eta, rows[17].trial_index), (1.0, 1.0, 2));
        let mut a = Vec::new();
        let mut b = Vec::new();
        write_rows(&mut a, &rows).unwrap();
        write_rows(&mut b, &run_series(&cfg).unwrap()).unwrap();
        assert_eq!(a, b);
        let header = String::from_utf8(a).unwrap().lines().next().unwrap().to_string();
        assert_eq!(
            header,
            "series,eta,eve_rate,trial_index,seed,sent,received,sifted,matched,efficiency,sifted_error_rate,attenuation_db"
        );
    }

    #[test]
    fn config_validation() {
        let base = SeriesConfig::new(SeriesKind::EveAlice, 1);
        assert!(SeriesConfig { trials: 0, ..base.clone() }.validate().is_err());
        assert!(SeriesConfig { eve_rates: vec![], ..base.clone() }.validate().is_err());
        assert!(SeriesConfig { etas: vec![1.5], ..base.clone() }.validate().is_err());
        let control = SeriesConfig { eve_rates: vec![], ..SeriesConfig::new(SeriesKind::Control, 1) };
        assert!(control.validate().is_ok());
    }

    fn row(eta: f64, efficiency: f64) -> TrialRow {
        TrialRow {
            series: SeriesKind::Control,
            eta,
            eve_rate: 0.0,
            trial_index: 0,
            seed: 0,
            sent: 10,
            received: 10,
            sifted: 5,
            matched: 5,
            efficiency,
            sifted_error_rate: 0.0,
            attenuation_db: 0.0,
        }
    }

    #[test]
    fn constant_efficiencies_summarize_flat() {
        let rows = vec![row(0.0, 0.4), row(0.0, 0.4), row(0.0, 0.4)];
        let s = summarize(&rows).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].stddev, 0.0);
        assert_eq!((s[0].min, s[0].mean, s[0].max), (0.4, 0.4, 0.4));
        assert_eq!(s[0].fit_degree, 0);
        assert!((s[0].fit_c0 - 0.4).abs() < 1e-12);
        assert_eq!(s[0].pipeline, "damp");
    }

    #[test]
    fn summary_statistics() {
        let rows = vec![row(0.0, 0.1), row(0.0, 0.3), row(0.5, 0.2)];
        let s = summarize(&rows).unwrap();
        assert_eq!(s.len(), 2);
        assert!((s[0].mean - 0.2).abs() < 1e-15);
        assert!((s[0].stddev - 0.02f64.sqrt()).abs() < 1e-15);
        assert_eq!(s[0].min, 0.1);
        assert_eq!(s[0].max, 0.3);
        // two points: linear fall-back through both means
        assert_eq!(s[0].fit_degree, 1);
        assert_eq!(s[0].fit_c2, 0.0);
        assert!((s[0].fit_c0 - 0.2).abs() < 1e-12 && s[0].fit_c1.abs() < 1e-12);
        assert!(summarize(&[]).is_err());
    }

    #[test]
    fn quadratic_fit_recovers_exact_parabola() {
        let xs = [0.0, 0.25, 0.5, 0.75, 1.0];
        let ys: Vec<f64> = xs.iter().map(|x| 0.5 - 0.2 * x - 0.3 * x * x).collect();
        let f = fit_curve(&xs, &ys).unwrap();
        assert_eq!(f.degree, 2);
        assert!((f.c0 - 0.5).abs() < 1e-12);
        assert!((f.c1 + 0.2).abs() < 1e-12);
        assert!((f.c2 + 0.3).abs() < 1e-12);
        assert!((f.eval(0.5) - ys[2]).abs() < 1e-12);
    }

    #[test]
    fn db_conversions() {
        assert!((attenuation_db(0.9).unwrap() - 10.0).abs() < 1e-12);
        assert_eq!(attenuation_db(0.0).unwrap(), 0.0);
        assert!((eta_of_db(5.1).unwrap() - 0.691).abs() < 5e-4);
        assert!((eta_of_db(42.6).unwrap() - 0.99994).abs() < 1e-5);
        assert!(attenuation_db(1.0).is_err());
        assert!(eta_of_db(-1.0).is_err());
        for eta in [0.0, 0.1, 0.68, 0.9, 0.99, 0.999] {
            let back = eta_of_db(attenuation_db(eta).unwrap()).unwrap();
            assert!((back - eta).abs() < 1e-12);
        }
    }
}
