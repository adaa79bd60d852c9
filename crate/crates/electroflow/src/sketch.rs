//! l2 heavy-hitter sketch (count-sketch with median estimates) used by the
//! locator to recover congested edges from a small number of inner
//! products. Rows live in {-1,0,1}^m. When the bucket budget 16/eps^2
//! already exceeds the edge count, each edge gets its own bucket and a
//! single repetition measures the vector exactly.

use crate::error::{Error, Result};
use crate::projection::QVec;
use crate::rng::RngStream;
use std::rc::Rc;

#[derive(Debug, Clone)]
pub struct HeavyHitterSketch {
    pub m: usize,
    pub eps: f64,
    pub reps: usize,
    pub buckets: usize,
    /// Per repetition: random signs and bucket assignment of every edge.
    signs: Vec<Rc<Vec<i8>>>,
    bucket_of: Vec<Rc<Vec<u32>>>,
    /// True when every edge has a private bucket (identity measurement).
    pub exact: bool,
}

/// Default shape: 4 ceil(log2 m) repetitions of ceil(16/eps^2) buckets,
/// degenerating to one exact repetition when buckets >= m.
pub fn make_sketch(m: usize, eps: f64, rng: &mut RngStream) -> Result<HeavyHitterSketch> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidArgument("sketch eps must be in (0,1)".into()));
    }
    let want_buckets = (16.0 / (eps * eps)).ceil() as usize;
    if want_buckets >= m {
        // One row per edge: v_i = rho_i exactly.
        let signs = Rc::new(vec![1i8; m]);
        let bucket_of = Rc::new((0..m as u32).collect::<Vec<u32>>());
        return Ok(HeavyHitterSketch {
            m,
            eps,
            reps: 1,
            buckets: m,
            signs: vec![signs],
            bucket_of: vec![bucket_of],
            exact: true,
        });
    }
    let reps = 4 * (m.max(2) as f64).log2().ceil() as usize;
    let mut signs = Vec::with_capacity(reps);
    let mut bucket_of = Vec::with_capacity(reps);
    for rep in 0..reps {
        let mut rrng = rng.derive_idx("sketch-rep", rep as u64);
        signs.push(Rc::new(
            (0..m)
                .map(|_| if rrng.next_u64() & 1 == 0 { 1i8 } else { -1i8 })
                .collect::<Vec<i8>>(),
        ));
        bucket_of.push(Rc::new(
            (0..m)
                .map(|_| rrng.gen_range(want_buckets) as u32)
                .collect::<Vec<u32>>(),
        ));
    }
    Ok(HeavyHitterSketch {
        m,
        eps,
        reps,
        buckets: want_buckets,
        signs,
        bucket_of,
        exact: false,
    })
}

impl HeavyHitterSketch {
    /// Total number of measurement rows K = reps * buckets.
    pub fn rows(&self) -> usize {
        self.reps * self.buckets
    }

    /// Row i as a q-vector in {-1,0,1}^m.
    pub fn row(&self, i: usize) -> QVec {
        if self.exact {
            return QVec::Indicator(i);
        }
        let rep = i / self.buckets;
        let bucket = (i % self.buckets) as u32;
        QVec::SketchRow {
            signs: Rc::clone(&self.signs[rep]),
            bucket_of: Rc::clone(&self.bucket_of[rep]),
            bucket,
        }
    }

    /// Exact measurements of a vector, for tests: v_i = <q^i, rho>.
    pub fn measure(&self, rho: &[f64]) -> Vec<f64> {
        let mut v = vec![0.0; self.rows()];
        if self.exact {
            v.copy_from_slice(rho);
            return v;
        }
        for rep in 0..self.reps {
            let signs = &self.signs[rep];
            let buckets = &self.bucket_of[rep];
            for e in 0..self.m {
                v[rep * self.buckets + buckets[e] as usize] += signs[e] as f64 * rho[e];
            }
        }
        v
    }

    /// Median-of-repetitions point estimate of rho_e from measurements.
    pub fn estimate(&self, v: &[f64], e: usize) -> f64 {
        if self.exact {
            return v[e];
        }
        let mut ests: Vec<f64> = (0..self.reps)
            .map(|rep| {
                let b = self.bucket_of[rep][e] as usize;
                self.signs[rep][e] as f64 * v[rep * self.buckets + b]
            })
            .collect();
        ests.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mid = ests.len() / 2;
        if ests.len() % 2 == 1 {
            ests[mid]
        } else {
            0.5 * (ests[mid - 1] + ests[mid])
        }
    }

    /// All edges whose median estimate clears the threshold, capped at
    /// `max_out` entries ranked by estimate magnitude. Estimates are linear
    /// in the measurements, so recovery on summed measurement vectors equals
    /// recovery on the sum.
    pub fn recover(&self, v: &[f64], theta: f64, max_out: usize) -> Vec<usize> {
        let mut hits: Vec<(usize, f64)> = (0..self.m)
            .filter_map(|e| {
                let est = self.estimate(v, e);
                (est.abs() >= theta).then_some((e, est.abs()))
            })
            .collect();
        hits.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        hits.truncate(max_out);
        let mut out: Vec<usize> = hits.into_iter().map(|(e, _)| e).collect();
        out.sort_unstable();
        out
    }
}
