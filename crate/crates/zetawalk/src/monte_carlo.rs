//! Parallel Monte Carlo estimation of the moments of Z_n(x) and of the
//! sampled zeta values, verification against the closed forms, and
//! trajectory simulation of the normalized partial sums.
//!
//! Determinism contract: every estimate is a pure function of (seed, R,
//! query). Replicates are partitioned into fixed contiguous batches; batches
//! are mapped in parallel, collected in index order, and reduced
//! sequentially, so results are independent of worker count and scheduling.
//! The batches double as the batch-means groups for standard errors, which
//! stay robust when the summands are heavy-tailed.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kahan::{Kahan, KahanComplex};
use crate::second_order::{self, MomentQuery};
use crate::walk::{generate_walk, RngStreamKey, WalkPath};
use crate::zeta::{h_kernel, zeta_critical, DirichletTable, ZetaEvalConfig};

/// Number of batch-means groups.
pub const BATCHES: u64 = 30;

fn batch_ranges(r: u64) -> Vec<(u64, u64)> {
    (0..BATCHES)
        .map(|b| (b * r / BATCHES, (b + 1) * r / BATCHES))
        .collect()
}

fn batch_stderr(batch_means: &[f64]) -> f64 {
    let b = batch_means.len() as f64;
    let mean = batch_means.iter().sum::<f64>() / b;
    let var = batch_means.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>() / (b - 1.0);
    (var / b).sqrt()
}

/// Z_n(x) for one realized walk: the truncated kernel at u = S_n.
pub fn simulate_z(n: u32, sigma: f64, x: f64, walk: &WalkPath) -> Result<Complex64> {
    if n == 0 || walk.len() < n as usize {
        return Err(Error::InvalidArg(format!(
            "walk of length {} cannot provide S_{n}",
            walk.len()
        )));
    }
    if !(x >= 1.0) {
        return Err(Error::Domain(format!("x >= 1 required, got {x}")));
    }
    if !(sigma > 0.0) {
        return Err(Error::Domain("sigma must be positive".into()));
    }
    Ok(h_kernel(sigma, walk.position(n as usize), x))
}

/// Sample moments of Z_n together with the (n, m) cross moment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    /// Sample mean of Z_n.
    pub mean: Complex64,
    /// Sample mean of |Z_n|^2.
    pub second_moment_abs: f64,
    /// Sample mean of Z_n conj(Z_m).
    pub cross_moment: Complex64,
    /// Batch-means standard error of `mean` (componentwise, combined in
    /// quadrature).
    pub stderr_mean: f64,
    /// Batch-means standard error of `second_moment_abs`.
    pub stderr_second: f64,
    pub replicates: u64,
}

#[derive(Clone, Copy, Default)]
struct MomentBatch {
    zn: KahanComplex,
    abs2: Kahan,
    cross: KahanComplex,
    count: u64,
}

/// Unbiased sample moments over R independent walks, deterministic in
/// (seed, R) regardless of worker count.
pub fn estimate_moments(
    n: u32,
    m: u32,
    sigma: f64,
    x: f64,
    r: u64,
    seed: u64,
) -> Result<MomentEstimate> {
    if r < 100 {
        return Err(Error::InvalidArg(format!("R >= 100 required, got {r}")));
    }
    if m < n || n == 0 {
        return Err(Error::InvalidArg(format!("need 1 <= n <= m, got n={n}, m={m}")));
    }
    MomentQuery::new(n, m, sigma, x)?;

    let table = DirichletTable::new(sigma, x);
    let batches: Vec<MomentBatch> = batch_ranges(r)
        .into_par_iter()
        .map(|(lo, hi)| {
            let mut acc = MomentBatch::default();
            for rep in lo..hi {
                let walk = generate_walk(m as usize, RngStreamKey::new(seed, rep));
                let zn = table.eval(walk.position(n as usize));
                let zm = if m == n { zn } else { table.eval(walk.position(m as usize)) };
                acc.zn.add(zn);
                acc.abs2.add(zn.norm_sqr());
                acc.cross.add(zn * zm.conj());
                acc.count += 1;
            }
            acc
        })
        .collect();

    let mut total_zn = KahanComplex::new();
    let mut total_abs2 = Kahan::new();
    let mut total_cross = KahanComplex::new();
    for b in &batches {
        total_zn.add(b.zn.value());
        total_abs2.add(b.abs2.value());
        total_cross.add(b.cross.value());
    }
    let rf = r as f64;
    let mean = total_zn.value() / rf;
    let second = total_abs2.value() / rf;
    let cross = total_cross.value() / rf;

    let re_means: Vec<f64> = batches.iter().map(|b| b.zn.value().re / b.count as f64).collect();
    let im_means: Vec<f64> = batches.iter().map(|b| b.zn.value().im / b.count as f64).collect();
    let abs_means: Vec<f64> = batches.iter().map(|b| b.abs2.value() / b.count as f64).collect();
    let se_re = batch_stderr(&re_means);
    let se_im = batch_stderr(&im_means);

    Ok(MomentEstimate {
        mean,
        second_moment_abs: second,
        cross_moment: cross,
        stderr_mean: (se_re * se_re + se_im * se_im).sqrt(),
        stderr_second: batch_stderr(&abs_means),
        replicates: r,
    })
}

/// One estimated block value with componentwise standard errors.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockStat {
    pub value: Complex64,
    pub stderr_re: f64,
    pub stderr_im: f64,
}

/// Block-resolved sample second moments of (Z_{n1}, Z_{n2}, Z_{m1}, Z_{m2}).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockEstimates {
    pub c11: BlockStat,
    pub c12: BlockStat,
    pub c21: BlockStat,
    pub c22: BlockStat,
    pub combined: BlockStat,
    pub mean_n: BlockStat,
    pub replicates: u64,
}

#[derive(Clone, Copy, Default)]
struct BlockBatch {
    c11: KahanComplex,
    c12: KahanComplex,
    c21: KahanComplex,
    c22: KahanComplex,
    combined: KahanComplex,
    mean_n: KahanComplex,
    count: u64,
}

fn block_stat(batches: &[BlockBatch], pick: impl Fn(&BlockBatch) -> Complex64, r: u64) -> BlockStat {
    let mut total = KahanComplex::new();
    for b in batches {
        total.add(pick(b));
    }
    let value = total.value() / r as f64;
    let re: Vec<f64> = batches.iter().map(|b| pick(b).re / b.count as f64).collect();
    let im: Vec<f64> = batches.iter().map(|b| pick(b).im / b.count as f64).collect();
    BlockStat {
        value,
        stderr_re: batch_stderr(&re),
        stderr_im: batch_stderr(&im),
    }
}

/// Sample means of the four covariance blocks and their combination.
pub fn estimate_blocks(
    n: u32,
    m: u32,
    sigma: f64,
    x: f64,
    r: u64,
    seed: u64,
) -> Result<BlockEstimates> {
    if r < 100 {
        return Err(Error::InvalidArg(format!("R >= 100 required, got {r}")));
    }
    MomentQuery::new(n, m, sigma, x)?;

    let table = DirichletTable::new(sigma, x);
    let batches: Vec<BlockBatch> = batch_ranges(r)
        .into_par_iter()
        .map(|(lo, hi)| {
            let mut acc = BlockBatch::default();
            for rep in lo..hi {
                let walk = generate_walk(m as usize, RngStreamKey::new(seed, rep));
                let (zn1, zn2) = table.eval_parts(walk.position(n as usize));
                let (zm1, zm2) = if m == n {
                    (zn1, zn2)
                } else {
                    table.eval_parts(walk.position(m as usize))
                };
                acc.c11.add(zn1 * zm1.conj());
                acc.c12.add(zn1 * zm2.conj());
                acc.c21.add(zn2 * zm1.conj());
                acc.c22.add(zn2 * zm2.conj());
                acc.combined.add((zn1 - zn2) * (zm1 - zm2).conj());
                acc.mean_n.add(zn1 - zn2);
                acc.count += 1;
            }
            acc
        })
        .collect();

    Ok(BlockEstimates {
        c11: block_stat(&batches, |b| b.c11.value(), r),
        c12: block_stat(&batches, |b| b.c12.value(), r),
        c21: block_stat(&batches, |b| b.c21.value(), r),
        c22: block_stat(&batches, |b| b.c22.value(), r),
        combined: block_stat(&batches, |b| b.combined.value(), r),
        mean_n: block_stat(&batches, |b| b.mean_n.value(), r),
        replicates: r,
    })
}

/// Mean of Z_a conj(Z_b) without index-order restriction (the conjugate
/// symmetry check needs both orders from the same walks).
pub(crate) fn cross_moment_unordered(
    a: u32,
    b: u32,
    sigma: f64,
    x: f64,
    r: u64,
    seed: u64,
) -> Complex64 {
    let table = DirichletTable::new(sigma, x);
    let len = a.max(b) as usize;
    let mut total = KahanComplex::new();
    for rep in 0..r {
        let walk = generate_walk(len, RngStreamKey::new(seed, rep));
        let za = table.eval(walk.position(a as usize));
        let zb = table.eval(walk.position(b as usize));
        total.add(za * zb.conj());
    }
    total.value() / r as f64
}

/// Options for the verification gate.
#[derive(Clone, Copy, Debug)]
pub struct VerifyOptions {
    /// |z| threshold for a pass (default 4).
    pub threshold: f64,
    /// Route the singular c22 band through quadrature automatically.
    pub quadrature_fallback: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            threshold: 4.0,
            quadrature_fallback: true,
        }
    }
}

/// One block compared against its closed form.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BlockComparison {
    pub block: String,
    pub exact: f64,
    pub estimate_re: f64,
    pub estimate_im: f64,
    pub stderr_re: f64,
    pub stderr_im: f64,
    pub z: f64,
}

/// Exact-vs-Monte-Carlo comparison across all blocks of one query.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VerificationReport {
    pub query: MomentQuery,
    pub replicates: u64,
    pub seed: u64,
    pub threshold: f64,
    pub blocks: Vec<BlockComparison>,
    /// max |z| over blocks and combination.
    pub z_score: f64,
    pub pass: bool,
    pub c22_by_quadrature: bool,
}

fn z_value(diff: f64, stderr: f64) -> f64 {
    if stderr == 0.0 {
        if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        diff / stderr
    }
}

fn comparison(name: &str, exact: f64, est: &BlockStat) -> BlockComparison {
    BlockComparison {
        block: name.to_string(),
        exact,
        estimate_re: est.value.re,
        estimate_im: est.value.im,
        stderr_re: est.stderr_re,
        stderr_im: est.stderr_im,
        z: z_value(est.value.re - exact, est.stderr_re),
    }
}

/// Estimate all blocks by simulation and gate them against the closed forms.
pub fn verify_second_order(
    n: u32,
    m: u32,
    sigma: f64,
    x: f64,
    r: u64,
    seed: u64,
    opts: &VerifyOptions,
) -> Result<VerificationReport> {
    let query = MomentQuery::new(n, m, sigma, x)?;
    let exact = second_order::second_moment_with(&query, opts.quadrature_fallback)?;
    let est = estimate_blocks(n, m, sigma, x, r, seed)?;

    let blocks = vec![
        comparison("c11", exact.c11.re, &est.c11),
        comparison("c12", exact.c12.re, &est.c12),
        comparison("c21", exact.c21.re, &est.c21),
        comparison("c22", exact.c22.re, &est.c22),
        comparison("combined", exact.combined.re, &est.combined),
    ];
    let z_score = blocks.iter().fold(0.0f64, |acc, b| acc.max(b.z.abs()));
    Ok(VerificationReport {
        query,
        replicates: r,
        seed,
        threshold: opts.threshold,
        pass: z_score <= opts.threshold,
        z_score,
        blocks,
        c22_by_quadrature: exact.c22_by_quadrature,
    })
}

/// One point of the L2 approximation-gap curve.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct GapPoint {
    pub x: f64,
    pub gap: f64,
    pub stderr: f64,
}

/// E |Z_n(x) - Z_n(x_ref)|^2 for each x, sharing walks across all x
/// (common random numbers), as a computable proxy for the L2 distance to
/// the limiting zeta sample.
pub fn approximation_gap(
    n: u32,
    x_list: &[f64],
    x_ref: f64,
    r: u64,
    seed: u64,
) -> Result<Vec<GapPoint>> {
    if x_list.is_empty() {
        return Err(Error::InvalidArg("x_list must be non-empty".into()));
    }
    if !x_list.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::InvalidArg("x_list must be strictly ascending".into()));
    }
    if x_list[0] < 1.0 {
        return Err(Error::Domain("x values must be >= 1".into()));
    }
    for &x in x_list {
        if x != x_ref && 10.0 * x > x_ref {
            return Err(Error::InvalidArg(format!(
                "x_ref must be at least 10 * max(x_list), got x = {x}, x_ref = {x_ref}"
            )));
        }
    }
    if r < 100 {
        return Err(Error::InvalidArg(format!("R >= 100 required, got {r}")));
    }
    if n == 0 {
        return Err(Error::InvalidArg("n must be at least 1".into()));
    }

    let sigma = 0.5;
    let mut xs: Vec<f64> = x_list.to_vec();
    xs.push(x_ref);
    let table = DirichletTable::new(sigma, x_ref);

    let per_batch: Vec<(Vec<Kahan>, u64)> = batch_ranges(r)
        .into_par_iter()
        .map(|(lo, hi)| {
            let mut sums = vec![Kahan::new(); x_list.len()];
            for rep in lo..hi {
                let walk = generate_walk(n as usize, RngStreamKey::new(seed, rep));
                let evals = table.eval_prefixes(walk.position(n as usize), &xs);
                let z_ref = evals[x_list.len()];
                for (j, sum) in sums.iter_mut().enumerate() {
                    sum.add((evals[j] - z_ref).norm_sqr());
                }
            }
            (sums, hi - lo)
        })
        .collect();

    let rf = r as f64;
    let mut out = Vec::with_capacity(x_list.len());
    for (j, &x) in x_list.iter().enumerate() {
        let mut total = Kahan::new();
        for (sums, _) in &per_batch {
            total.add(sums[j].value());
        }
        let means: Vec<f64> = per_batch
            .iter()
            .map(|(sums, count)| sums[j].value() / *count as f64)
            .collect();
        out.push(GapPoint {
            x,
            gap: total.value() / rf,
            stderr: batch_stderr(&means),
        });
    }
    Ok(out)
}

/// Checkpoint grid {3} union {ceil(10^{j/4})} capped at n_max.
pub fn checkpoints(n_max: u64) -> Vec<u64> {
    let mut pts = vec![3u64];
    let mut j = 0u32;
    loop {
        let v = 10f64.powf(j as f64 / 4.0).ceil() as u64;
        if v > n_max {
            break;
        }
        if v >= 3 {
            pts.push(v);
        }
        j += 1;
    }
    pts.sort_unstable();
    pts.dedup();
    pts.retain(|&v| v <= n_max);
    pts
}

/// State of the running zeta partial sum at one checkpoint.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub n: u64,
    pub s_n: f64,
    pub zeta: Complex64,
    pub running_sum: Complex64,
    /// |M_n - n| / (n^{1/2} (log n)^b), defined for n >= 3.
    pub normalized_stat: f64,
    /// Whether any sample up to this checkpoint exceeded the cap.
    pub capped: bool,
}

/// One simulated trajectory with its cap accounting.
#[derive(Clone, Debug)]
pub struct TrajectoryRun {
    pub records: Vec<TrajectoryRecord>,
    pub capped_count: u64,
    pub samples: u64,
    /// sup of the normalized statistic over all n in [3, N].
    pub sup_stat: f64,
}

fn normalized_stat(m_sum: Complex64, n: u64, b: f64) -> f64 {
    let nf = n as f64;
    (m_sum - Complex64::new(nf, 0.0)).norm() / (nf.sqrt() * nf.ln().powf(b))
}

fn trajectory_core(
    walk: &WalkPath,
    b: f64,
    cfg: &ZetaEvalConfig,
    marks: &[u64],
    sup_marks: &[u64],
) -> Result<(TrajectoryRun, Vec<(f64, u64)>)> {
    let mut records = Vec::with_capacity(marks.len());
    let mut sup_out = Vec::with_capacity(sup_marks.len());
    let mut running = KahanComplex::new();
    let mut capped_count = 0u64;
    let mut sup: f64 = 0.0;
    let mut mark_iter = marks.iter().peekable();
    let mut sup_iter = sup_marks.iter().peekable();

    for k in 1..=walk.len() as u64 {
        let s_k = walk.position(k as usize);
        let (zeta_k, capped_k) = match zeta_critical(s_k, cfg) {
            Ok(sample) => (sample.value, false),
            Err(Error::CapExceeded { .. }) => (Complex64::new(1.0, 0.0), true),
            Err(e) => return Err(e),
        };
        if capped_k {
            capped_count += 1;
        }
        running.add(zeta_k);
        let m_sum = running.value();
        let stat = if k >= 3 { normalized_stat(m_sum, k, b) } else { 0.0 };
        if k >= 3 {
            sup = sup.max(stat);
        }
        if mark_iter.peek() == Some(&&k) {
            mark_iter.next();
            records.push(TrajectoryRecord {
                n: k,
                s_n: s_k,
                zeta: zeta_k,
                running_sum: m_sum,
                normalized_stat: stat,
                capped: capped_count > 0,
            });
        }
        if sup_iter.peek() == Some(&&k) {
            sup_iter.next();
            sup_out.push((sup, capped_count));
        }
    }
    Ok((
        TrajectoryRun {
            records,
            capped_count,
            samples: walk.len() as u64,
            sup_stat: sup,
        },
        sup_out,
    ))
}

/// Trajectory from an explicit walk (test hook and building block).
pub fn theorem2_trajectory(walk: &WalkPath, b: f64, cfg: &ZetaEvalConfig) -> Result<TrajectoryRun> {
    cfg.validate()?;
    let marks = checkpoints(walk.len() as u64);
    Ok(trajectory_core(walk, b, cfg, &marks, &[])?.0)
}

/// Simulate M_n = sum_{k<=n} zeta(1/2 + i S_k) along a fresh walk,
/// checkpointing on the geometric grid. Capped samples contribute the
/// mean-centering value 1 and are counted, never hidden.
pub fn theorem2_run(n: u64, b: f64, seed: u64, cfg: &ZetaEvalConfig) -> Result<TrajectoryRun> {
    if n < 3 {
        return Err(Error::InvalidArg(format!("N >= 3 required, got {n}")));
    }
    let walk = generate_walk(n as usize, RngStreamKey::new(seed, 0));
    theorem2_trajectory(&walk, b, cfg)
}

/// Ensemble estimate of E sup_{3<=n<=N} stat^2 at one or more horizons.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SupStat {
    pub n_max: u64,
    pub estimate: f64,
    pub stderr: f64,
    pub capped_fraction: f64,
}

/// Second moment of the running sup of the normalized statistic over R
/// independent trajectories, reported at each horizon of `n_list`
/// (ascending) from a single pass to the largest.
pub fn ensemble_sup_stat_multi(
    b: f64,
    n_list: &[u64],
    r: u64,
    seed: u64,
    cfg: &ZetaEvalConfig,
) -> Result<Vec<SupStat>> {
    if !(b > 2.0) {
        return Err(Error::InvalidArg(format!("b > 2 required, got {b}")));
    }
    if r < 20 {
        return Err(Error::InvalidArg(format!("R >= 20 required, got {r}")));
    }
    if n_list.is_empty() || !n_list.windows(2).all(|w| w[0] < w[1]) || n_list[0] < 3 {
        return Err(Error::InvalidArg(
            "n_list must be ascending with first entry >= 3".into(),
        ));
    }
    cfg.validate()?;
    let n_max = *n_list.last().unwrap();

    let rows: Vec<Vec<(f64, u64)>> = (0..r)
        .into_par_iter()
        .map(|rep| {
            let walk = generate_walk(n_max as usize, RngStreamKey::new(seed, rep));
            trajectory_core(&walk, b, cfg, &[], n_list).map(|(_, sups)| sups)
        })
        .collect::<Result<Vec<_>>>()?;

    let rf = r as f64;
    let mut out = Vec::with_capacity(n_list.len());
    for (j, &nj) in n_list.iter().enumerate() {
        let sq: Vec<f64> = rows.iter().map(|row| row[j].0 * row[j].0).collect();
        let mean = sq.iter().sum::<f64>() / rf;
        let var = sq.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (rf - 1.0);
        let capped: u64 = rows.iter().map(|row| row[j].1).sum();
        out.push(SupStat {
            n_max: nj,
            estimate: mean,
            stderr: (var / rf).sqrt(),
            capped_fraction: capped as f64 / (rf * nj as f64),
        });
    }
    Ok(out)
}

/// Single-horizon convenience wrapper.
pub fn ensemble_sup_stat(
    b: f64,
    n: u64,
    r: u64,
    seed: u64,
    cfg: &ZetaEvalConfig,
) -> Result<SupStat> {
    Ok(ensemble_sup_stat_multi(b, &[n], r, seed, cfg)?[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::second_order::{cross_n2m2, diag_n2, mean_zn};
    use crate::zeta::truncated_zeta;

    #[test]
    fn simulate_z_hand_values() {
        let key = RngStreamKey::new(0, 0);
        let walk = WalkPath::from_values(key, vec![0.0]);
        // h(1, 0) = 1 - 2 = -1.
        let z = simulate_z(1, 0.5, 1.0, &walk).unwrap();
        assert!((z.re - (-1.0)).abs() < 1e-15);
        assert_eq!(z.im, 0.0);
        // h(4, 0) matches the truncated evaluator.
        let z = simulate_z(1, 0.5, 4.0, &walk).unwrap();
        let t = truncated_zeta(0.5, 0.0, 4).unwrap();
        assert_eq!(z, t);
        assert!((z.re - (-1.215_542_949_623_827)).abs() < 1e-12);
    }

    #[test]
    fn simulate_z_conjugation() {
        let key = RngStreamKey::new(5, 0);
        let walk = generate_walk(8, key);
        let negated = WalkPath::from_values(key, walk.values().iter().map(|v| -v).collect());
        for n in 1..=8u32 {
            let a = simulate_z(n, 0.5, 64.0, &walk).unwrap();
            let b = simulate_z(n, 0.5, 64.0, &negated).unwrap();
            assert_eq!(a.re.to_bits(), b.re.to_bits());
            assert_eq!(a.im.to_bits(), (-b.im).to_bits());
        }
    }

    #[test]
    fn simulate_z_preconditions() {
        let walk = generate_walk(3, RngStreamKey::new(1, 1));
        assert!(simulate_z(4, 0.5, 10.0, &walk).is_err());
        assert!(simulate_z(1, 0.5, 0.5, &walk).is_err());
    }

    #[test]
    fn estimate_matches_mean_formula() {
        // E Z_1(4) = 0.0043368...; R = 20000 keeps the test quick and the
        // band tight enough to be meaningful.
        let r = 20_000;
        let est = estimate_moments(1, 1, 0.5, 4.0, r, 31).unwrap();
        let exact = mean_zn(&MomentQuery::new(1, 1, 0.5, 4.0).unwrap());
        assert!(
            (est.mean.re - exact).abs() <= 4.0 * est.stderr_mean,
            "mean {} vs exact {exact} (se {})",
            est.mean.re,
            est.stderr_mean
        );
        assert!(est.mean.im.abs() <= 4.0 * est.stderr_mean);
        // Spec invariant: second moment dominates squared mean.
        assert!(est.second_moment_abs >= est.mean.norm_sqr() - 4.0 * est.stderr_second);
    }

    #[test]
    fn estimate_c22_against_diagonal_closed_form() {
        let r = 20_000;
        let est = estimate_blocks(1, 1, 0.5, 100.0, r, 77).unwrap();
        let exact = diag_n2(1, 0.5, 100.0);
        assert!((exact - 400.0 / 3.0).abs() < 1e-9);
        let z = (est.c22.value.re - exact) / est.c22.stderr_re;
        assert!(z.abs() <= 4.0, "z = {z}");
        assert_eq!(
            cross_n2m2(&MomentQuery::new(1, 1, 0.5, 100.0).unwrap()).unwrap(),
            exact
        );
    }

    #[test]
    fn determinism_across_worker_counts() {
        let run = || {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
            pool.install(|| estimate_moments(2, 3, 0.5, 50.0, 600, 9).unwrap())
        };
        let a = run();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let b = pool.install(|| estimate_moments(2, 3, 0.5, 50.0, 600, 9).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn stderr_shrinks_with_root_r() {
        let a = estimate_moments(1, 1, 0.5, 16.0, 4000, 4).unwrap();
        let b = estimate_moments(1, 1, 0.5, 16.0, 8000, 4).unwrap();
        let ratio = b.stderr_mean / a.stderr_mean;
        let root_half = 0.5f64.sqrt();
        assert!(
            ratio > root_half * 0.8 && ratio < root_half * 1.25,
            "ratio = {ratio}"
        );
    }

    #[test]
    fn cross_moment_conjugate_symmetry() {
        let a = cross_moment_unordered(2, 5, 0.5, 30.0, 500, 123);
        let b = cross_moment_unordered(5, 2, 0.5, 30.0, 500, 123);
        assert_eq!(a.re.to_bits(), b.re.to_bits());
        assert_eq!(a.im.to_bits(), (-b.im).to_bits());
    }

    #[test]
    fn verify_produces_report() {
        let report =
            verify_second_order(1, 1, 0.5, 50.0, 2000, 11, &VerifyOptions::default()).unwrap();
        assert_eq!(report.blocks.len(), 5);
        assert!(report.z_score.is_finite());
        assert!(!report.c22_by_quadrature);
        // Imaginary parts of second-moment estimates stay near zero.
        for b in &report.blocks {
            assert!(
                b.estimate_im.abs() <= 4.0 * b.stderr_im + 1e-12,
                "{}: im {} se {}",
                b.block,
                b.estimate_im,
                b.stderr_im
            );
        }
    }

    #[test]
    fn verify_singular_band_uses_quadrature() {
        let report =
            verify_second_order(2, 3, 0.5, 60.0, 2000, 3, &VerifyOptions::default()).unwrap();
        assert!(report.c22_by_quadrature);
        let no_fallback = VerifyOptions {
            quadrature_fallback: false,
            ..VerifyOptions::default()
        };
        assert!(verify_second_order(2, 3, 0.5, 60.0, 2000, 3, &no_fallback).is_err());
    }

    #[test]
    fn gap_preconditions() {
        assert!(approximation_gap(2, &[], 1e4, 200, 0).is_err());
        assert!(approximation_gap(2, &[100.0, 50.0], 1e4, 200, 0).is_err());
        assert!(approximation_gap(2, &[100.0], 500.0, 200, 0).is_err());
        assert!(approximation_gap(2, &[100.0], 1000.0, 50, 0).is_err());
    }

    #[test]
    fn gap_zero_at_reference_and_positive_otherwise() {
        // x equal to x_ref is admitted and gives gap exactly 0.
        let pts = approximation_gap(2, &[40.0, 1000.0], 1000.0, 200, 5).unwrap();
        assert!(pts[0].gap > 0.0);
        assert_eq!(pts[1].gap, 0.0);
        assert_eq!(pts[1].stderr, 0.0);
    }

    #[test]
    fn gap_decreasing_small_case() {
        let pts = approximation_gap(2, &[10.0, 100.0], 4000.0, 400, 21).unwrap();
        assert!(
            pts[0].gap + 2.0 * pts[0].stderr > pts[1].gap - 2.0 * pts[1].stderr,
            "expected decreasing trend: {pts:?}"
        );
        assert!(pts[0].gap > pts[1].gap);
    }

    #[test]
    fn checkpoint_grid() {
        let pts = checkpoints(1000);
        assert_eq!(pts[0], 3);
        assert!(pts.contains(&10));
        assert!(pts.contains(&1000));
        assert!(pts.windows(2).all(|w| w[0] < w[1]));
        assert!(*pts.last().unwrap() <= 1000);
        assert_eq!(checkpoints(3), vec![3]);
    }

    #[test]
    fn trajectory_zero_walk_composition() {
        // All S_k forced to 0: M_3 = 3 zeta_eval(0).
        let cfg = ZetaEvalConfig {
            x_min: 10_000,
            ..ZetaEvalConfig::default()
        };
        let key = RngStreamKey::new(0, 0);
        let walk = WalkPath::from_values(key, vec![0.0, 0.0, 0.0]);
        let run = theorem2_trajectory(&walk, 2.5, &cfg).unwrap();
        let z0 = zeta_critical(0.0, &cfg).unwrap().value;
        let rec = run.records.last().unwrap();
        assert_eq!(rec.n, 3);
        assert!((rec.running_sum - 3.0 * z0).norm() < 1e-12);
        // With a long truncation the evaluation sits near zeta(1/2).
        assert!((z0.re - (-1.460_354_508_8)).abs() < 0.02);
        let expected_stat = (rec.running_sum - Complex64::new(3.0, 0.0)).norm()
            / (3.0f64.sqrt() * 3.0f64.ln().powf(2.5));
        assert_eq!(rec.normalized_stat, expected_stat);
        assert_eq!(run.capped_count, 0);
        assert!(!rec.capped);
    }

    #[test]
    fn trajectory_caps_are_data() {
        // A tiny cap forces every sample onto the capped path.
        let cfg = ZetaEvalConfig {
            t_cap: 1e-12,
            ..ZetaEvalConfig::default()
        };
        let key = RngStreamKey::new(77, 0);
        let walk = generate_walk(5, key);
        let run = theorem2_trajectory(&walk, 2.5, &cfg).unwrap();
        assert_eq!(run.capped_count, 5);
        let rec = run.records.last().unwrap();
        assert!(rec.capped);
        // Capped samples contribute exactly 1.
        assert_eq!(rec.running_sum, Complex64::new(5.0, 0.0));
    }

    #[test]
    fn theorem2_run_matches_trajectory_of_same_walk() {
        let cfg = ZetaEvalConfig::default();
        let run = theorem2_run(50, 2.5, 99, &cfg).unwrap();
        let walk = generate_walk(50, RngStreamKey::new(99, 0));
        let direct = theorem2_trajectory(&walk, 2.5, &cfg).unwrap();
        assert_eq!(run.records.len(), direct.records.len());
        assert_eq!(
            run.records.last().unwrap().running_sum,
            direct.records.last().unwrap().running_sum
        );
    }

    #[test]
    fn sup_stat_preconditions() {
        let cfg = ZetaEvalConfig::default();
        assert!(ensemble_sup_stat(2.5, 100, 1, 0, &cfg).is_err());
        assert!(ensemble_sup_stat(2.0, 100, 20, 0, &cfg).is_err());
        assert!(ensemble_sup_stat_multi(2.5, &[100, 50], 20, 0, &cfg).is_err());
    }

    #[test]
    fn sup_stat_monotone_in_b() {
        let cfg = ZetaEvalConfig::default();
        let lo_b = ensemble_sup_stat(2.5, 200, 20, 17, &cfg).unwrap();
        let hi_b = ensemble_sup_stat(10.0, 200, 20, 17, &cfg).unwrap();
        assert!(hi_b.estimate < lo_b.estimate);
        assert!(lo_b.estimate.is_finite() && lo_b.estimate > 0.0);
    }

    #[test]
    fn sup_multi_is_prefix_consistent() {
        let cfg = ZetaEvalConfig::default();
        let multi = ensemble_sup_stat_multi(2.5, &[50, 200], 20, 8, &cfg).unwrap();
        let single = ensemble_sup_stat(2.5, 50, 20, 8, &cfg).unwrap();
        assert_eq!(multi[0].estimate, single.estimate);
        // Sup over a longer prefix cannot shrink.
        assert!(multi[1].estimate >= multi[0].estimate - 1e-15);
    }
}
