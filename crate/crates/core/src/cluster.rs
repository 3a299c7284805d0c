//! Seeded Lloyd k-means over the seven cluster-profile attributes, with
//! per-cluster mean / standard-deviation profiles in original units.

use std::fmt::Write as _;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kpi::{Attribute, KpiRecord};
use crate::scalar::Scalar;

pub const NUM_FEATURES: usize = 7;

/// Clustering features with their report labels, in report row order.
pub const CLUSTER_FEATURES: [(Attribute, &str); NUM_FEATURES] = [
    (Attribute::TchCallDropRate, "TCH Failures"),
    (Attribute::HandoverAttempts, "TCH Attempts"),
    (Attribute::Rab, "RAB"),
    (Attribute::HandoverFailuresRate, "Handover Failures"),
    (Attribute::TchDropSuddenLostCon, "TCH Dropped Suddenly Lost Connection"),
    (Attribute::HandoverSuccessSeizure, "TCH Congestion Rate"),
    (Attribute::HandoverSuccessRate, "Handover Success Rate"),
];

pub type Point<T> = [T; NUM_FEATURES];

pub fn feature_label(i: usize) -> &'static str {
    CLUSTER_FEATURES[i].1
}

/// Resolves a report label (or any attribute alias) to its feature index.
pub fn feature_index(name: &str) -> Option<usize> {
    let key = crate::kpi::normalize_name(name);
    CLUSTER_FEATURES
        .iter()
        .position(|(_, label)| crate::kpi::normalize_name(label) == key)
        .or_else(|| {
            let a = Attribute::from_name(name)?;
            CLUSTER_FEATURES.iter().position(|(f, _)| *f == a)
        })
}

pub fn features<T: Scalar>(r: &KpiRecord<T>) -> Point<T> {
    CLUSTER_FEATURES.map(|(a, _)| r.get(a))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClusterParams {
    pub k: usize,
    pub max_iterations: usize,
    pub seed: u64,
    pub restarts: usize,
    pub standardize: bool,
}

impl Default for ClusterParams {
    fn default() -> Self {
        ClusterParams {
            k: 9,
            max_iterations: 100,
            seed: 0,
            restarts: 10,
            standardize: true,
        }
    }
}

/// Per-feature z-score transform. A zero-variance feature keeps scale 1.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureScaler<T = f64> {
    pub means: Point<T>,
    pub std_devs: Point<T>,
    pub enabled: bool,
}

impl<T: Scalar> FeatureScaler<T> {
    pub fn fit(points: &[Point<T>], enabled: bool) -> Self {
        let (means, std_devs) = mean_and_std(points.iter());
        FeatureScaler { means, std_devs, enabled }
    }

    fn scale(&self, d: usize) -> T {
        if self.std_devs[d] > T::zero() {
            self.std_devs[d]
        } else {
            T::one()
        }
    }

    pub fn transform(&self, p: &Point<T>) -> Point<T> {
        if !self.enabled {
            return *p;
        }
        std::array::from_fn(|d| (p[d] - self.means[d]) / self.scale(d))
    }

    pub fn inverse(&self, p: &Point<T>) -> Point<T> {
        if !self.enabled {
            return *p;
        }
        std::array::from_fn(|d| p[d] * self.scale(d) + self.means[d])
    }
}

/// Mean and sample standard deviation (n - 1 denominator, 0 for n <= 1).
fn mean_and_std<'a, T: Scalar>(points: impl Iterator<Item = &'a Point<T>> + Clone) -> (Point<T>, Point<T>) {
    let n = points.clone().count();
    let mut mean = [T::zero(); NUM_FEATURES];
    let mut std = [T::zero(); NUM_FEATURES];
    if n == 0 {
        return (mean, std);
    }
    let nf = T::lit(n as f64);
    for p in points.clone() {
        for d in 0..NUM_FEATURES {
            mean[d] = mean[d] + p[d];
        }
    }
    mean = mean.map(|s| s / nf);
    if n > 1 {
        for p in points {
            for d in 0..NUM_FEATURES {
                let dev = p[d] - mean[d];
                std[d] = std[d] + dev * dev;
            }
        }
        let denom = T::lit((n - 1) as f64);
        std = std.map(|s| (s / denom).sqrt());
    }
    (mean, std)
}

fn sq_dist<T: Scalar>(a: &Point<T>, b: &Point<T>) -> T {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum()
}

/// Nearest centroid; ties go to the lowest cluster id.
fn nearest<T: Scalar>(p: &Point<T>, centroids: &[Point<T>]) -> usize {
    let mut best = 0;
    let mut best_d = sq_dist(p, &centroids[0]);
    for (j, c) in centroids.iter().enumerate().skip(1) {
        let d = sq_dist(p, c);
        if d < best_d {
            best = j;
            best_d = d;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterProfile<T = f64> {
    pub size: usize,
    pub mean: Point<T>,
    pub std_dev: Point<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel<T = f64> {
    /// Centroids in the scaler's (standardized) space.
    pub centroids: Vec<Point<T>>,
    pub assignments: Vec<usize>,
    pub profiles: Vec<ClusterProfile<T>>,
    pub wcss: T,
    pub iterations_run: usize,
    pub feature_names: Vec<&'static str>,
    pub scaler: FeatureScaler<T>,
    /// Objective of the returned run after every assignment and every
    /// update step, in order.
    pub wcss_history: Vec<T>,
    pub params: ClusterParams,
}

impl<T: Scalar> ClusterModel<T> {
    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.profiles.iter().map(|p| p.size).collect()
    }

    /// Centroid `j` mapped back to original units.
    pub fn centroid_original(&self, j: usize) -> Point<T> {
        self.scaler.inverse(&self.centroids[j])
    }
}

struct Run<T> {
    centroids: Vec<Point<T>>,
    assignments: Vec<usize>,
    wcss: T,
    iterations: usize,
    history: Vec<T>,
}

fn objective<T: Scalar>(points: &[Point<T>], assignments: &[usize], centroids: &[Point<T>]) -> T {
    points
        .iter()
        .zip(assignments)
        .map(|(p, &a)| sq_dist(p, &centroids[a]))
        .sum()
}

fn update_centroids<T: Scalar>(points: &[Point<T>], assignments: &[usize], k: usize) -> (Vec<Point<T>>, Vec<usize>) {
    let mut sums = vec![[T::zero(); NUM_FEATURES]; k];
    let mut sizes = vec![0usize; k];
    for (p, &a) in points.iter().zip(assignments) {
        sizes[a] += 1;
        for d in 0..NUM_FEATURES {
            sums[a][d] = sums[a][d] + p[d];
        }
    }
    let centroids = sums
        .into_iter()
        .zip(&sizes)
        .map(|(s, &n)| if n == 0 { s } else { s.map(|x| x / T::lit(n as f64)) })
        .collect();
    (centroids, sizes)
}

/// Moves the record farthest from its centroid (among clusters with more
/// than one member) into each empty cluster.
fn repair_empty<T: Scalar>(points: &[Point<T>], assignments: &mut [usize], centroids: &mut [Point<T>], sizes: &mut [usize]) {
    let k = centroids.len();
    for j in 0..k {
        if sizes[j] > 0 {
            continue;
        }
        let mut pick: Option<(usize, T)> = None;
        for (i, p) in points.iter().enumerate() {
            let a = assignments[i];
            if sizes[a] < 2 {
                continue;
            }
            let d = sq_dist(p, &centroids[a]);
            if pick.is_none_or(|(_, bd)| d > bd) {
                pick = Some((i, d));
            }
        }
        let Some((i, _)) = pick else { continue };
        let donor = assignments[i];
        assignments[i] = j;
        sizes[donor] -= 1;
        sizes[j] = 1;
        centroids[j] = points[i];
        let mut sum = [T::zero(); NUM_FEATURES];
        for (p, _) in points.iter().zip(assignments.iter()).filter(|(_, &a)| a == donor) {
            for d in 0..NUM_FEATURES {
                sum[d] = sum[d] + p[d];
            }
        }
        centroids[donor] = sum.map(|x| x / T::lit(sizes[donor] as f64));
    }
}

fn lloyd<T: Scalar>(points: &[Point<T>], k: usize, max_iterations: usize, rng: &mut ChaCha8Rng) -> Run<T> {
    let n = points.len();
    let mut centroids: Vec<Point<T>> = sample(rng, n, k).into_iter().map(|i| points[i]).collect();
    let mut assignments = vec![usize::MAX; n];
    let mut history = Vec::new();
    let mut iterations = 0;
    while iterations < max_iterations {
        iterations += 1;
        let mut changed = false;
        for (p, a) in points.iter().zip(assignments.iter_mut()) {
            let j = nearest(p, &centroids);
            if *a != j {
                *a = j;
                changed = true;
            }
        }
        history.push(objective(points, &assignments, &centroids));
        if !changed {
            break;
        }
        let (mut next, mut sizes) = update_centroids(points, &assignments, k);
        repair_empty(points, &mut assignments, &mut next, &mut sizes);
        centroids = next;
        history.push(objective(points, &assignments, &centroids));
    }
    Run {
        wcss: objective(points, &assignments, &centroids),
        centroids,
        assignments,
        iterations,
        history,
    }
}

/// Best-of-`restarts` Lloyd k-means with uniform random initial centroids.
pub fn fit<T: Scalar>(data: &[KpiRecord<T>], p: &ClusterParams) -> Result<ClusterModel<T>> {
    let raw: Vec<Point<T>> = data.iter().map(features).collect();
    fit_points(&raw, p)
}

/// As [`fit`], on raw feature vectors in [`CLUSTER_FEATURES`] order.
pub fn fit_points<T: Scalar>(raw: &[Point<T>], p: &ClusterParams) -> Result<ClusterModel<T>> {
    if p.k == 0 {
        return Err(Error::validation("k must be at least 1"));
    }
    if raw.len() < p.k {
        return Err(Error::validation(format!("need at least k = {} records, got {}", p.k, raw.len())));
    }
    if p.max_iterations == 0 || p.restarts == 0 {
        return Err(Error::validation("max_iterations and restarts must be at least 1"));
    }
    if let Some(i) = raw.iter().position(|pt| pt.iter().any(|v| !v.is_finite())) {
        return Err(Error::validation(format!("record {} has a non-finite clustering feature", i + 1)));
    }
    let scaler = FeatureScaler::fit(raw, p.standardize);
    let points: Vec<Point<T>> = raw.iter().map(|x| scaler.transform(x)).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut best: Option<Run<T>> = None;
    for _ in 0..p.restarts {
        let run = lloyd(&points, p.k, p.max_iterations, &mut rng);
        if best.as_ref().is_none_or(|b| run.wcss < b.wcss) {
            best = Some(run);
        }
    }
    let run = best.expect("at least one restart");

    let profiles = (0..p.k)
        .map(|j| {
            let members: Vec<&Point<T>> = raw.iter().zip(&run.assignments).filter(|(_, &a)| a == j).map(|(x, _)| x).collect();
            let (mean, std_dev) = mean_and_std(members.iter().copied());
            ClusterProfile {
                size: members.len(),
                mean,
                std_dev,
            }
        })
        .collect();

    Ok(ClusterModel {
        centroids: run.centroids,
        assignments: run.assignments,
        profiles,
        wcss: run.wcss,
        iterations_run: run.iterations,
        feature_names: CLUSTER_FEATURES.iter().map(|(_, l)| *l).collect(),
        scaler,
        wcss_history: run.history,
        params: *p,
    })
}

pub fn assign<T: Scalar>(m: &ClusterModel<T>, r: &KpiRecord<T>) -> Result<usize> {
    let raw = features(r);
    if let Some(d) = raw.iter().position(|v| !v.is_finite()) {
        return Err(Error::Assign(format!(
            "cell {}: feature {} is not finite",
            r.cell_id,
            feature_label(d)
        )));
    }
    Ok(nearest(&m.scaler.transform(&raw), &m.centroids))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileAttribute {
    pub attribute: &'static str,
    pub mean: f64,
    pub std_dev: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileColumn {
    pub cluster: usize,
    pub size: usize,
    pub attributes: Vec<ProfileAttribute>,
}

/// Cluster profiles in report form: one column per cluster, one
/// (mean, std-dev) block per feature.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileTable {
    pub k: usize,
    pub wcss: f64,
    pub clusters: Vec<ProfileColumn>,
}

pub fn profile_report<T: Scalar>(m: &ClusterModel<T>) -> ProfileTable {
    ProfileTable {
        k: m.k(),
        wcss: m.wcss.as_f64(),
        clusters: m
            .profiles
            .iter()
            .enumerate()
            .map(|(j, p)| ProfileColumn {
                cluster: j,
                size: p.size,
                attributes: (0..NUM_FEATURES)
                    .map(|d| ProfileAttribute {
                        attribute: feature_label(d),
                        mean: p.mean[d].as_f64(),
                        std_dev: p.std_dev[d].as_f64(),
                    })
                    .collect(),
            })
            .collect(),
    }
}

impl ProfileTable {
    /// Table layout: a header row of clusters, then per attribute a `Mean`
    /// and a `Std.Dev` row, values to two decimals.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = write!(out, "{:<40}", "Attribute (KPI)");
        for c in &self.clusters {
            let _ = write!(out, "{:>12}", format!("Cluster {}", c.cluster));
        }
        out.push('\n');
        let _ = write!(out, "{:<40}", "  Size");
        for c in &self.clusters {
            let _ = write!(out, "{:>12}", c.size);
        }
        out.push('\n');
        for d in 0..NUM_FEATURES {
            let _ = writeln!(out, "{}", feature_label(d));
            for (stat, pick) in [("Mean", true), ("Std.Dev", false)] {
                let _ = write!(out, "{:<40}", format!("  {stat}"));
                for c in &self.clusters {
                    let a = &c.attributes[d];
                    let _ = write!(out, "{:>12.2}", if pick { a.mean } else { a.std_dev });
                }
                out.push('\n');
            }
        }
        out
    }

    /// Long form: `attribute,statistic,cluster,value`, full precision.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("attribute,statistic,cluster,value\n");
        for d in 0..NUM_FEATURES {
            for c in &self.clusters {
                let a = &c.attributes[d];
                let _ = writeln!(out, "{},mean,{},{}", a.attribute, c.cluster, a.mean);
                let _ = writeln!(out, "{},std_dev,{},{}", a.attribute, c.cluster, a.std_dev);
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("profile serializes")
    }
}
