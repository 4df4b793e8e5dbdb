//! Linkage rules expressed as Lance–Williams updates.
//!
//! When clusters `s` and `t` merge into `u`, each rule gives the distance
//! from `u` to every other active cluster `v` using only pre-merge distances
//! and cluster sizes.

use std::fmt;

pub trait Linkage: Send + Sync {
    fn name(&self) -> &'static str;

    /// Distance from `s ∪ t` to `v`.
    fn update(&self, d_sv: f64, d_tv: f64, d_st: f64, size_s: usize, size_t: usize, size_v: usize) -> f64;
}

impl fmt::Debug for dyn Linkage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Linkage({})", self.name())
    }
}

/// Shortest distance between members.
#[derive(Debug, Clone, Copy, Default)]
pub struct Single;

/// Longest distance between members.
#[derive(Debug, Clone, Copy, Default)]
pub struct Complete;

/// Mean over all member pairs (UPGMA).
#[derive(Debug, Clone, Copy, Default)]
pub struct Average;

/// Mean of the two children's distances regardless of their sizes (WPGMA).
#[derive(Debug, Clone, Copy, Default)]
pub struct Weighted;

/// Ward's minimum-variance criterion, applied to the input distances as if
/// they were Euclidean.
#[derive(Debug, Clone, Copy, Default)]
pub struct Ward;

impl Linkage for Single {
    fn name(&self) -> &'static str {
        "single"
    }

    fn update(&self, d_sv: f64, d_tv: f64, _: f64, _: usize, _: usize, _: usize) -> f64 {
        d_sv.min(d_tv)
    }
}

impl Linkage for Complete {
    fn name(&self) -> &'static str {
        "complete"
    }

    fn update(&self, d_sv: f64, d_tv: f64, _: f64, _: usize, _: usize, _: usize) -> f64 {
        d_sv.max(d_tv)
    }
}

impl Linkage for Average {
    fn name(&self) -> &'static str {
        "average"
    }

    fn update(&self, d_sv: f64, d_tv: f64, _: f64, size_s: usize, size_t: usize, _: usize) -> f64 {
        let (ns, nt) = (size_s as f64, size_t as f64);
        (ns * d_sv + nt * d_tv) / (ns + nt)
    }
}

impl Linkage for Weighted {
    fn name(&self) -> &'static str {
        "weighted"
    }

    fn update(&self, d_sv: f64, d_tv: f64, _: f64, _: usize, _: usize, _: usize) -> f64 {
        0.5 * (d_sv + d_tv)
    }
}

impl Linkage for Ward {
    fn name(&self) -> &'static str {
        "ward"
    }

    fn update(&self, d_sv: f64, d_tv: f64, d_st: f64, size_s: usize, size_t: usize, size_v: usize) -> f64 {
        let (ns, nt, nv) = (size_s as f64, size_t as f64, size_v as f64);
        let sq = ((nv + ns) * d_sv * d_sv + (nv + nt) * d_tv * d_tv - nv * d_st * d_st) / (ns + nt + nv);
        sq.max(0.0).sqrt()
    }
}
