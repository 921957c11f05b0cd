//! Synthetic UGRansome-format records with class-conditional structure.
//!
//! Every feature carries a noisy class preference, so the three classes
//! are learnable but overlap. Used for smoke runs and tests when the real
//! corpus is not at hand.

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};

use crate::error::{Error, Result};
use crate::numerics::Matrix;

const PROTOCOLS: [&str; 3] = ["TCP", "UDP", "ICMP"];
const FLAGS: [&str; 9] = ["A", "AF", "AP", "APR", "APRS", "APS", "AR", "F", "S"];
const FAMILIES: [&str; 12] = [
    "APT", "CryptoLocker", "CryptXXX", "DMALocker", "EDA2", "Flyper", "Globe", "JigSaw", "Locky",
    "Razy", "SamSam", "WannaCry",
];
const IP_CLASSES: [&str; 4] = ["A", "B", "C", "D"];
const THREATS: [&str; 12] = [
    "Blacklist", "Bonet", "DoS", "NerisBonet", "Port Scanning", "SSH", "Scan", "Spam", "TCP Scan",
    "Tor", "UDP Scan", "Unknown",
];
const PORTS: [f64; 9] = [5061.0, 5062.0, 5063.0, 5064.0, 5065.0, 5066.0, 5067.0, 5068.0, 5069.0];
const LABELS: [&str; 3] = ["A", "S", "SS"];

pub const HEADER: [&str; 14] = [
    "Time",
    "Protcol",
    "Flag",
    "Family",
    "Clusters",
    "SeddAddress",
    "ExpAddress",
    "BTC",
    "USD",
    "Netflow_Bytes",
    "IPaddress",
    "Threats",
    "Port",
    "Prediction",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub rows: usize,
    pub seed: u64,
    /// Relative class frequencies for A, S, SS.
    pub class_weights: [f64; 3],
    /// Probability that a feature follows its class preference rather than
    /// being drawn from the shared background.
    pub signal: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            rows: 3000,
            seed: 7,
            class_weights: [0.5, 0.34, 0.16],
            signal: 0.75,
        }
    }
}

/// Picks the class's preferred slice of `pool` with probability `signal`,
/// otherwise any entry.
fn pick<'a, T, R: Rng>(rng: &mut R, pool: &'a [T], class: usize, signal: f64) -> &'a T {
    if rng.gen_bool(signal) {
        let k = pool.len() / 3;
        let lo = class * k;
        &pool[rng.gen_range(lo..lo + k)]
    } else {
        pool.choose(rng).expect("non-empty pool")
    }
}

fn address<R: Rng>(rng: &mut R, class: usize, signal: f64) -> String {
    let group = if rng.gen_bool(signal) { class } else { rng.gen_range(0..3) };
    format!("1{}{:02}x", ["DA", "GZ", "Kx"][group], rng.gen_range(0..10))
}

/// Generates records as CSV rows (header first) into `out`.
pub fn write_csv<W: Write>(cfg: &SyntheticConfig, out: W) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let total: f64 = cfg.class_weights.iter().sum();
    let time = [20.0, 50.0, 80.0].map(|m| Normal::new(m, 12.0).expect("valid normal"));
    let btc = [2.0, 3.2, 4.4].map(|m| LogNormal::new(m, 0.5).expect("valid lognormal"));
    let bytes = [6.5, 8.0, 9.5].map(|m| LogNormal::new(m, 0.6).expect("valid lognormal"));
    let clusters = [(1, 5), (5, 9), (9, 13)];

    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    for _ in 0..cfg.rows {
        let u = rng.gen::<f64>() * total;
        let class = if u < cfg.class_weights[0] {
            0
        } else if u < cfg.class_weights[0] + cfg.class_weights[1] {
            1
        } else {
            2
        };
        let s = cfg.signal;
        let t: f64 = time[class].sample(&mut rng);
        let t = t.max(0.0).round();
        let cl = if rng.gen_bool(s) {
            rng.gen_range(clusters[class].0..clusters[class].1)
        } else {
            rng.gen_range(1..13)
        };
        let b: f64 = btc[class].sample(&mut rng);
        let usd = b * 14.5 * rng.gen_range(0.9..1.1);
        let nb: f64 = bytes[class].sample(&mut rng);
        let rec = [
            format!("{t}"),
            pick(&mut rng, &PROTOCOLS, class, s).to_string(),
            pick(&mut rng, &FLAGS, class, s).to_string(),
            pick(&mut rng, &FAMILIES, class, s).to_string(),
            format!("{cl}"),
            address(&mut rng, class, s),
            address(&mut rng, class, s),
            format!("{:.0}", b.round()),
            format!("{:.0}", usd.round()),
            format!("{:.0}", nb.round()),
            IP_CLASSES.choose(&mut rng).expect("non-empty").to_string(),
            pick(&mut rng, &THREATS, class, s).to_string(),
            format!("{}", pick(&mut rng, &PORTS, class, s)),
            LABELS[class].to_string(),
        ];
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::Internal(format!("flushing synthetic csv: {e}")))?;
    Ok(())
}

pub fn write_csv_file(cfg: &SyntheticConfig, path: &Path) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv(cfg, std::io::BufWriter::new(f))
}

pub fn to_string(cfg: &SyntheticConfig) -> String {
    let mut buf = Vec::new();
    write_csv(cfg, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("ascii output")
}

/// `rows × width` table in `[0, 1]` that lies near a `rank`-dimensional
/// subspace: each row is a convex mix of `rank` latent factors plus
/// Gaussian noise, clipped to the unit interval.
pub fn low_rank_table(rows: usize, width: usize, rank: usize, noise: f64, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mix: Vec<Vec<f64>> = (0..width)
        .map(|_| {
            let w: Vec<f64> = (0..rank).map(|_| rng.gen::<f64>()).collect();
            let s: f64 = w.iter().sum();
            w.into_iter().map(|v| v / s).collect()
        })
        .collect();
    let eps = Normal::new(0.0, noise.max(0.0)).expect("valid normal");
    let mut out = Matrix::zeros(rows, width);
    for r in 0..rows {
        let z: Vec<f64> = (0..rank).map(|_| rng.gen::<f64>()).collect();
        for (j, m) in mix.iter().enumerate() {
            let x: f64 = m.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>() + eps.sample(&mut rng);
            out.set(r, j, x.clamp(0.0, 1.0));
        }
    }
    out
}
