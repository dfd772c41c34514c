//! Pixel-wise image quality metrics for signals with values in `[0, 1]`.

use serde::{Serialize, Serializer};
use wienerlab_core::spectral::Signal;

use crate::error::{LabError, LabResult};

pub const SSIM_WINDOW: usize = 8;
const C1: f64 = 0.01 * 0.01;
const C2: f64 = 0.03 * 0.03;

/// PSNR in decibels; identical inputs give `+inf`, written as `"inf"`.
fn serialize_db<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_infinite() {
        s.serialize_str(if *v > 0.0 { "inf" } else { "-inf" })
    } else {
        s.serialize_f64(*v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Metrics {
    pub mae: f64,
    pub mse: f64,
    #[serde(serialize_with = "serialize_db")]
    pub psnr: f64,
    pub ssim: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub mean: Metrics,
    pub per_sample: Vec<Metrics>,
}

fn windowed_ssim(a: &[f64], b: &[f64], rows: usize, cols: usize) -> f64 {
    let (wr, wc) = (SSIM_WINDOW.min(rows), SSIM_WINDOW.min(cols));
    let n = (wr * wc) as f64;
    let mut total = 0.0;
    let mut count = 0usize;
    for r0 in 0..=rows - wr {
        for c0 in 0..=cols - wc {
            let (mut sa, mut sb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for r in r0..r0 + wr {
                for c in c0..c0 + wc {
                    let (x, y) = (a[r * cols + c], b[r * cols + c]);
                    sa += x;
                    sb += y;
                    saa += x * x;
                    sbb += y * y;
                    sab += x * y;
                }
            }
            let (ma, mb) = (sa / n, sb / n);
            let va = saa / n - ma * ma;
            let vb = sbb / n - mb * mb;
            let cov = sab / n - ma * mb;
            total += ((2.0 * ma * mb + C1) * (2.0 * cov + C2))
                / ((ma * ma + mb * mb + C1) * (va + vb + C2));
            count += 1;
        }
    }
    total / count as f64
}

/// Metrics of `a` against reference `b`. SSIM uses a uniform 8x8 window
/// (clipped to the extent) at stride 1, averaged over windows and channels.
pub fn compute_metrics(a: &Signal, b: &Signal) -> LabResult<Metrics> {
    if !a.same_layout(b) {
        return Err(LabError::Data(format!(
            "metric inputs differ in layout: {:?}x{} vs {:?}x{}",
            a.shape(),
            a.channels(),
            b.shape(),
            b.channels()
        )));
    }
    let n = a.len() as f64;
    let (mut abs, mut sq) = (0.0, 0.0);
    for (x, y) in a.data().iter().zip(b.data()) {
        abs += (x - y).abs();
        sq += (x - y) * (x - y);
    }
    let mse = sq / n;
    let psnr = if mse == 0.0 {
        f64::INFINITY
    } else {
        -10.0 * mse.log10()
    };
    let (rows, cols) = match a.shape() {
        [c] => (1, *c),
        [r, c] => (*r, *c),
        _ => unreachable!("signals are 1D or 2D"),
    };
    let ssim = a
        .planes()
        .zip(b.planes())
        .map(|(pa, pb)| windowed_ssim(pa, pb, rows, cols))
        .sum::<f64>()
        / a.channels() as f64;
    Ok(Metrics {
        mae: abs / n,
        mse,
        psnr,
        ssim,
    })
}

pub fn metrics_report(a: &[Signal], b: &[Signal]) -> LabResult<MetricsReport> {
    if a.len() != b.len() || a.is_empty() {
        return Err(LabError::Data(format!(
            "metric batches of {} and {} signals",
            a.len(),
            b.len()
        )));
    }
    let per_sample = a
        .iter()
        .zip(b)
        .map(|(x, y)| compute_metrics(x, y))
        .collect::<LabResult<Vec<_>>>()?;
    let k = per_sample.len() as f64;
    let mean = Metrics {
        mae: per_sample.iter().map(|m| m.mae).sum::<f64>() / k,
        mse: per_sample.iter().map(|m| m.mse).sum::<f64>() / k,
        psnr: per_sample.iter().map(|m| m.psnr).sum::<f64>() / k,
        ssim: per_sample.iter().map(|m| m.ssim).sum::<f64>() / k,
    };
    Ok(MetricsReport { mean, per_sample })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn img(seed: u32) -> Signal {
        let data = (0..100)
            .map(|i| ((i as f64 * 0.61 + seed as f64).sin() * 0.5 + 0.5).clamp(0.0, 1.0))
            .collect();
        Signal::new(data, &[10, 10]).unwrap()
    }

    #[test]
    fn identical_inputs() {
        let a = img(1);
        let m = compute_metrics(&a, &a).unwrap();
        assert_eq!((m.mae, m.mse), (0.0, 0.0));
        assert!(m.psnr.is_infinite());
        assert!((m.ssim - 1.0).abs() < 1e-12);
        let json = serde_json::to_string(&m).unwrap();
        assert!(json.contains("\"psnr\":\"inf\""), "{json}");
    }

    #[test]
    fn constant_offset() {
        let b = Signal::new(vec![0.3; 64], &[8, 8]).unwrap();
        let a = b.with_data(vec![0.4; 64]).unwrap();
        let m = compute_metrics(&a, &b).unwrap();
        assert!((m.mae - 0.1).abs() < 1e-12);
        assert!((m.mse - 0.01).abs() < 1e-12);
        assert!((m.psnr - 20.0).abs() < 1e-9);
    }

    #[test]
    fn layout_mismatch() {
        let a = img(0);
        let b = Signal::zeros(&[100], 1).unwrap();
        assert!(compute_metrics(&a, &b).is_err());
    }
}
