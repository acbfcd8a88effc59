//! Running observation statistics.

use serde::{Deserialize, Serialize};

/// Clip range of normalized observations.
pub const OBS_CLIP: f64 = 10.0;
const EPS: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunningNorm {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub count: f64,
}

impl RunningNorm {
    pub fn new(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            var: vec![1.0; dim],
            count: 1e-4,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Merges the moments of `rows` (row-major, `dim` columns).
    pub fn update(&mut self, rows: &[f64]) {
        let dim = self.dim();
        let n = rows.len() / dim;
        if n == 0 {
            return;
        }
        let nf = n as f64;
        for c in 0..dim {
            let col = rows.chunks_exact(dim).map(|r| r[c]);
            let bm = col.clone().sum::<f64>() / nf;
            let bv = col.map(|x| (x - bm).powi(2)).sum::<f64>() / nf;
            let total = self.count + nf;
            let delta = bm - self.mean[c];
            let m2 = self.var[c] * self.count + bv * nf + delta * delta * self.count * nf / total;
            self.mean[c] += delta * nf / total;
            self.var[c] = m2 / total;
        }
        self.count += nf;
    }

    pub fn normalize_into(&self, x: &[f64], out: &mut [f32]) {
        for ((o, v), (m, var)) in out.iter_mut().zip(x).zip(self.mean.iter().zip(&self.var)) {
            *o = ((v - m) / (var + EPS).sqrt()).clamp(-OBS_CLIP, OBS_CLIP) as f32;
        }
    }

    pub fn normalize(&self, x: &[f64]) -> Vec<f32> {
        let mut out = vec![0.0; x.len()];
        self.normalize_into(x, &mut out);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn incremental_matches_batch() {
        let data: Vec<f64> = (0..200).map(|i| ((i * 37) % 101) as f64 * 0.1 - 3.0).collect();
        let mut a = RunningNorm::new(2);
        a.count = 0.0;
        a.update(&data[..60]);
        a.update(&data[60..]);
        let col: Vec<f64> = data.iter().step_by(2).copied().collect();
        let m = col.iter().sum::<f64>() / col.len() as f64;
        let v = col.iter().map(|x| (x - m).powi(2)).sum::<f64>() / col.len() as f64;
        assert!((a.mean[0] - m).abs() < 1e-12);
        assert!((a.var[0] - v).abs() < 1e-10);
    }

    #[test]
    fn clips() {
        let n = RunningNorm::new(1);
        assert_eq!(n.normalize(&[1e6])[0], 10.0);
    }
}
