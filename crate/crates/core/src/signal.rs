//! Synthetic multiexponential data `d_k = Σ f_j ζ_j^{k−1} + ε_k` and dataset
//! files.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{lit, Real};

/// Damping factors, amplitudes, noise level, sample count and master seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalModel<T> {
    pub zeta: Vec<T>,
    pub f: Vec<T>,
    pub sigma: T,
    pub n: usize,
    pub seed: u64,
}

impl<T: Real> SignalModel<T> {
    /// Validates and sorts the components by decreasing `ζ`.
    pub fn new(zeta: Vec<T>, f: Vec<T>, sigma: T, n: usize, seed: u64) -> Result<Self> {
        let mut m = Self {
            zeta,
            f,
            sigma,
            n,
            seed,
        };
        m.validate()?;
        let mut idx: Vec<usize> = (0..m.zeta.len()).collect();
        idx.sort_by(|&a, &b| m.zeta[b].partial_cmp(&m.zeta[a]).expect("finite"));
        m.zeta = idx.iter().map(|&i| m.zeta[i]).collect();
        m.f = idx.iter().map(|&i| m.f[i]).collect();
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.zeta.is_empty() || self.zeta.len() != self.f.len() {
            return Err(Error::invalid(
                "zeta and f must be non-empty and of equal length",
            ));
        }
        if let Some(z) = self
            .zeta
            .iter()
            .find(|z| !(**z > T::zero() && **z < T::one()))
        {
            return Err(Error::invalid(format!("zeta entries must lie in (0, 1), got {z}")));
        }
        for i in 0..self.zeta.len() {
            for j in 0..i {
                if self.zeta[i] == self.zeta[j] {
                    return Err(Error::invalid(format!("duplicate zeta {}", self.zeta[i])));
                }
            }
        }
        if self.f.iter().any(|v| *v == T::zero() || !v.is_finite()) {
            return Err(Error::invalid("amplitudes must be finite and nonzero"));
        }
        if !(self.sigma >= T::zero() && self.sigma.is_finite()) {
            return Err(Error::invalid(format!("sigma must be >= 0, got {}", self.sigma)));
        }
        if self.n < 2 || !self.n.is_multiple_of(2) {
            return Err(Error::invalid(format!(
                "n must be even and >= 2, got {}",
                self.n
            )));
        }
        Ok(())
    }

    /// Noiseless `d_k`, `k = 1..=n`.
    pub fn noiseless(&self) -> Vec<T> {
        noiseless_samples(&self.zeta, &self.f, self.n)
    }

    /// `Σ f_j ζ_j^{k−1}` at one 1-based index.
    pub fn noiseless_at(&self, k: usize) -> T {
        noiseless_value(&self.zeta, &self.f, k)
    }
}

fn noiseless_value<T: Real>(zeta: &[T], f: &[T], k: usize) -> T {
    zeta.iter()
        .zip(f)
        .fold(T::zero(), |acc, (&z, &a)| acc + a * z.powi(k as i32 - 1))
}

fn noiseless_samples<T: Real>(zeta: &[T], f: &[T], n: usize) -> Vec<T> {
    (1..=n).map(|k| noiseless_value(zeta, f, k)).collect()
}

/// The random stream of replication `r`: ChaCha20 keyed by the master seed,
/// with `r` as the stream id.
pub fn replication_rng(seed: u64, r: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(r);
    rng
}

/// One noisy realization; depends only on `(model.seed, r)`.
pub fn generate<T: Real>(model: &SignalModel<T>, r: u64) -> Vec<T> {
    let mut rng = replication_rng(model.seed, r);
    model
        .noiseless()
        .into_iter()
        .map(|d| {
            let e: f64 = rng.sample(StandardNormal);
            d + model.sigma * lit::<T>(e)
        })
        .collect()
}

/// Outcome of the sample-length rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SelectedN {
    pub n: usize,
    /// The rule did not trigger before `n_max`.
    pub capped: bool,
}

/// Smallest `k` with `|Σ f_j ζ_j^{k−1}| < σ`, rounded up to even and capped at
/// `n_max` (itself rounded down to even).
pub fn select_n<T: Real>(zeta: &[T], f: &[T], sigma: T, n_max: usize) -> Result<SelectedN> {
    if zeta.is_empty() || zeta.len() != f.len() {
        return Err(Error::invalid("zeta and f must be non-empty and of equal length"));
    }
    if zeta.iter().any(|z| !(z.abs() < T::one())) {
        return Err(Error::invalid("select_n needs a decaying model, |zeta| < 1"));
    }
    if !(sigma > T::zero()) {
        return Err(Error::invalid("sigma must be > 0"));
    }
    let cap = n_max - n_max % 2;
    if cap < 2 {
        return Err(Error::invalid("n_max must be >= 2"));
    }
    for k in 1..=cap {
        if noiseless_value(zeta, f, k).abs() < sigma {
            let n = (k + k % 2).min(cap);
            return Ok(SelectedN { n, capped: false });
        }
    }
    Ok(SelectedN { n: cap, capped: true })
}

/// A set of replications, optionally tagged with the generating model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<SignalModel<f64>>,
    pub data: Vec<Vec<f64>>,
}

/// On-disk dataset layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetFormat {
    Csv,
    Json,
}

impl DatasetFormat {
    /// From the file extension; anything other than `.json` is CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => DatasetFormat::Json,
            _ => DatasetFormat::Csv,
        }
    }
}

/// 17 significant digits.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

impl Dataset {
    pub fn generate(model: &SignalModel<f64>, replications: usize) -> Self {
        Self {
            model: Some(model.clone()),
            data: (0..replications as u64).map(|r| generate(model, r)).collect(),
        }
    }

    fn check_rectangular(&self) -> Result<usize> {
        let n = self.data.first().map_or(0, |r| r.len());
        if let Some(i) = self.data.iter().position(|r| r.len() != n) {
            return Err(Error::Parse {
                row: i + 1,
                column: self.data[i].len().min(n) + 1,
                message: format!("expected {n} values, found {}", self.data[i].len()),
            });
        }
        Ok(n)
    }

    pub fn write(&self, path: &Path, format: DatasetFormat) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        match format {
            DatasetFormat::Json => {
                serde_json::to_writer_pretty(&mut out, self)?;
                out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
            }
            DatasetFormat::Csv => {
                let n = self.check_rectangular()?;
                let mut w = csv::Writer::from_writer(out);
                let csv_err = |e: csv::Error| Error::io(path, e.into());
                w.write_record((1..=n).map(|k| format!("d{k}")))
                    .map_err(csv_err)?;
                for row in &self.data {
                    w.write_record(row.iter().map(|&v| format_f64(v)))
                        .map_err(csv_err)?;
                }
                w.flush().map_err(|e| Error::io(path, e))?;
                return Ok(());
            }
        }
        out.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path, format: DatasetFormat) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        match format {
            DatasetFormat::Json => {
                let ds: Dataset = serde_json::from_reader(BufReader::new(file))?;
                ds.check_rectangular()?;
                if let Some(m) = &ds.model {
                    m.validate()?;
                }
                Ok(ds)
            }
            DatasetFormat::Csv => Self::read_csv(file),
        }
    }

    fn read_csv(file: File) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(BufReader::new(file));
        let headers = rdr
            .headers()
            .map_err(|e| Error::Parse {
                row: 1,
                column: 1,
                message: e.to_string(),
            })?
            .clone();
        for (j, h) in headers.iter().enumerate() {
            if h.trim() != format!("d{}", j + 1) {
                return Err(Error::Parse {
                    row: 1,
                    column: j + 1,
                    message: format!("expected header d{}, found {h:?}", j + 1),
                });
            }
        }
        let n = headers.len();
        let mut data = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let row = i + 2;
            let rec = rec.map_err(|e| Error::Parse {
                row,
                column: 1,
                message: e.to_string(),
            })?;
            if rec.len() != n {
                return Err(Error::Parse {
                    row,
                    column: rec.len().min(n) + 1,
                    message: format!("expected {n} values, found {}", rec.len()),
                });
            }
            let values = rec
                .iter()
                .enumerate()
                .map(|(j, s)| {
                    s.trim().parse::<f64>().map_err(|e| Error::Parse {
                        row,
                        column: j + 1,
                        message: format!("{s:?}: {e}"),
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            data.push(values);
        }
        Ok(Self { model: None, data })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_geometric() {
        let m = SignalModel::new(vec![0.9f64], vec![2.0], 0.0, 4, 1).unwrap();
        let d = generate(&m, 0);
        let expected = [2.0, 1.8, 1.62, 1.458];
        for (a, b) in d.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn model_one_first_sample() {
        let m = SignalModel::new(vec![0.8, 0.9, 0.95], vec![1.0; 3], 0.0, 6, 0).unwrap();
        assert_eq!(m.noiseless_at(1), 3.0);
        assert_eq!(m.zeta, vec![0.95, 0.9, 0.8]);
    }

    #[test]
    fn select_n_cases() {
        assert_eq!(select_n(&[0.5], &[1.0], 0.26, 1000).unwrap().n, 4);
        assert_eq!(select_n(&[0.5], &[1.0], 2.0, 1000).unwrap().n, 2);
        let capped = select_n(&[0.999], &[1.0], 1e-9, 100).unwrap();
        assert_eq!(capped, SelectedN { n: 100, capped: true });
    }

    #[test]
    fn validation() {
        assert!(SignalModel::new(vec![1.2], vec![1.0], 0.1, 4, 0).is_err());
        assert!(SignalModel::new(vec![0.5], vec![0.0], 0.1, 4, 0).is_err());
        assert!(SignalModel::new(vec![0.5], vec![1.0], 0.1, 5, 0).is_err());
        assert!(SignalModel::new(vec![0.5, 0.5], vec![1.0, 1.0], 0.1, 4, 0).is_err());
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let m = SignalModel::new(vec![0.9], vec![1.0], 0.1, 8, 42).unwrap();
        assert_eq!(generate(&m, 3), generate(&m, 3));
        assert_ne!(generate(&m, 3), generate(&m, 4));
    }
}
