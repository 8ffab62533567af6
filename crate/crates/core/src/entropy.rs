//! Lower bounds for the entropy of the geodesic flow on an assembled
//! manifold: a Monte Carlo estimate of `int_{SM} tr sqrt(-R(., v)v) dmu`
//! over the normalized Liouville measure, the rescaling to curvature
//! `>= -1`, and the model growth rate of hyperbolic balls.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::assembly::{ManifoldAssembly, Region};
use crate::numerics::{intervals_for, ln_sphere_volume, log_sum_exp, SIMPSON_STEP};
use crate::oracle::{jacobi_operator, tr_sqrt_neg, unit_from_frame, CoordinateMetric, JacobiPath, CLAMP_TOL};
use crate::warp::{WarpKind, WarpProfile};
use crate::{Error, Result};

pub const DEFAULT_SAMPLES: usize = 100_000;
pub const DEFAULT_SEED: u64 = 42;
/// Samples drawn from one random stream.
const CHUNK: usize = 4096;
/// Cells in the tabulated radial distribution.
const CDF_CELLS: usize = 1 << 15;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Stratum {
    pub label: String,
    pub volume_fraction: f64,
    pub samples: usize,
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyCertificate {
    pub n: usize,
    pub bw_integral: f64,
    pub mc_stderr: f64,
    pub mc_seed: u64,
    pub mc_samples: usize,
    pub w_fraction: f64,
    /// Volume fraction whose integrand is `n - 1` exactly.
    pub exact_fraction: f64,
    pub integrand_min: f64,
    pub integrand_max: f64,
    pub strata: Vec<Stratum>,
    /// Curvature range `[k_lo, k_hi]` certified for the assembly.
    pub curvature_range: (f64, f64),
    pub k_le_0_certified: bool,
    /// `max((n-1) w_fraction, bw_integral - 3 stderr)`.
    pub bound_before: f64,
    pub rescale_eps: f64,
    pub lambda: f64,
    pub bound_after: f64,
    pub eps_bar: f64,
}

impl EntropyCertificate {
    /// `(n - 1) - eps_bar`, the value the rescaled bound is compared with.
    pub fn target(&self) -> f64 {
        (self.n - 1) as f64 - self.eps_bar
    }

    pub fn meets_target(&self) -> bool {
        self.bound_after >= self.target() - 1e-12
    }
}

/// Inverse-CDF sampler for a radial density on `[a, b]`.
struct RadialSampler {
    grid: Vec<f64>,
    cdf: Vec<f64>,
}

impl RadialSampler {
    fn new<F: Fn(f64) -> f64>(density: F, a: f64, b: f64) -> Self {
        let h = (b - a) / CDF_CELLS as f64;
        let grid: Vec<f64> = (0..=CDF_CELLS).map(|i| if i == CDF_CELLS { b } else { a + h * i as f64 }).collect();
        let vals: Vec<f64> = grid.iter().map(|&t| density(t).max(0.0)).collect();
        let mut cdf = Vec::with_capacity(grid.len());
        cdf.push(0.0);
        for i in 0..CDF_CELLS {
            let prev = cdf[i];
            cdf.push(prev + 0.5 * (vals[i] + vals[i + 1]) * (grid[i + 1] - grid[i]));
        }
        let total = cdf[CDF_CELLS];
        for c in &mut cdf {
            *c /= total;
        }
        Self { grid, cdf }
    }

    fn sample(&self, u: f64) -> f64 {
        let i = self.cdf.partition_point(|&c| c <= u).clamp(1, CDF_CELLS) - 1;
        let (c0, c1) = (self.cdf[i], self.cdf[i + 1]);
        let frac = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.5 };
        self.grid[i] + frac * (self.grid[i + 1] - self.grid[i])
    }
}

/// A region whose integrand varies and has to be sampled.
struct SampledRegion {
    label: String,
    volume: f64,
    metric: CoordinateMetric,
    sampler: RadialSampler,
    symmetric: bool,
}

fn sampled_region(label: String, volume: f64, profile: &WarpProfile, n: usize, interval: (f64, f64)) -> Result<SampledRegion> {
    let metric = CoordinateMetric::new(*profile, n)?;
    let (density, symmetric): (Box<dyn Fn(f64) -> f64>, bool) = match profile.kind {
        WarpKind::Tube => (
            Box::new(|t: f64| {
                let v = profile.values_unchecked(t);
                v.s * v.c.powi(n as i32 - 2)
            }),
            false,
        ),
        _ => (Box::new(|t: f64| profile.values_unchecked(t).c.powi(n as i32 - 1)), true),
    };
    Ok(SampledRegion {
        label,
        volume,
        metric,
        sampler: RadialSampler::new(density, interval.0, interval.1),
        symmetric,
    })
}

#[derive(Debug, Clone, Copy)]
struct ChunkStats {
    count: usize,
    sum: f64,
    sum_sq: f64,
    min: f64,
    max: f64,
}

impl ChunkStats {
    fn empty() -> Self {
        Self { count: 0, sum: 0.0, sum_sq: 0.0, min: f64::INFINITY, max: f64::NEG_INFINITY }
    }

    fn merge(self, o: Self) -> Self {
        Self {
            count: self.count + o.count,
            sum: self.sum + o.sum,
            sum_sq: self.sum_sq + o.sum_sq,
            min: self.min.min(o.min),
            max: self.max.max(o.max),
        }
    }
}

fn run_chunk(region: &SampledRegion, n: usize, seed: u64, stream: u64, count: usize) -> Result<ChunkStats> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut stats = ChunkStats::empty();
    let mut frame = vec![0.0; n];
    let mut x = vec![0.0; n];
    for _ in 0..count {
        let mut t = region.sampler.sample(rng.random::<f64>()).max(1e-12);
        if region.symmetric && rng.random::<bool>() {
            t = -t;
        }
        for f in frame.iter_mut() {
            *f = rng.sample(StandardNormal);
        }
        x[0] = t;
        let v = unit_from_frame(&region.metric, t, &frame)?;
        let j = jacobi_operator(&region.metric, &x, &v, JacobiPath::ClosedForm)?;
        let val = tr_sqrt_neg(&j, CLAMP_TOL)?;
        stats.count += 1;
        stats.sum += val;
        stats.sum_sq += val * val;
        stats.min = stats.min.min(val);
        stats.max = stats.max.max(val);
    }
    Ok(stats)
}

/// Monte Carlo estimate of the Ballmann-Wojtkowski integral.
///
/// Core and cusp remnants have `K = -1` and contribute `n - 1` exactly. Each
/// tube or channel is sampled with base points drawn from its warped volume
/// density and directions uniform on the unit sphere; samples are split
/// across these regions in proportion to volume.
pub fn bw_bound(a: &ManifoldAssembly, samples: usize, seed: u64) -> Result<EntropyCertificate> {
    if !a.pinching_passed() {
        return Err(Error::Precondition(
            "entropy bound needs an assembly with certified K <= 0".into(),
        ));
    }
    let n = a.n;
    let nm1 = (n - 1) as f64;
    let total = a.total_volume;

    let mut exact_volume = 0.0;
    let mut sampled = Vec::new();
    for r in &a.regions {
        match r {
            Region::Core { volume, .. } => exact_volume += volume,
            Region::CuspRemnant(c) => exact_volume += c.volume,
            Region::Tube(t) => sampled.push(sampled_region(
                format!("tube {}", t.cusp_index),
                t.volume.value,
                &t.profile,
                n,
                (0.0, t.t0.t0 + 1.0),
            )?),
            Region::Channel(c) => sampled.push(sampled_region(
                format!("channel {}", c.cusp_index),
                c.volume.value,
                &c.profile,
                n,
                (0.0, c.t0 + 1.0),
            )?),
        }
    }
    if !sampled.is_empty() && samples == 0 {
        return Err(Error::InvalidArgument("at least one Monte Carlo sample is needed".into()));
    }

    let sampled_volume: f64 = sampled.iter().map(|s| s.volume).sum();
    let mut alloc: Vec<usize> = sampled
        .iter()
        .map(|s| ((samples as f64 * s.volume / sampled_volume).floor() as usize).max(1))
        .collect();
    if !alloc.is_empty() {
        let used: usize = alloc[1..].iter().sum();
        alloc[0] = samples.saturating_sub(used).max(1);
    }

    let mut jobs = Vec::new();
    let mut stream = 0u64;
    for (ri, &count) in alloc.iter().enumerate() {
        let mut left = count;
        while left > 0 {
            let c = left.min(CHUNK);
            jobs.push((ri, stream, c));
            stream += 1;
            left -= c;
        }
    }
    let chunk_stats: Vec<(usize, ChunkStats)> = jobs
        .par_iter()
        .map(|&(ri, st, c)| run_chunk(&sampled[ri], n, seed, st, c).map(|s| (ri, s)))
        .collect::<Result<_>>()?;
    let mut per_region = vec![ChunkStats::empty(); sampled.len()];
    for (ri, s) in chunk_stats {
        per_region[ri] = per_region[ri].merge(s);
    }

    let mut bw = nm1 * exact_volume / total;
    let mut var = 0.0;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    if exact_volume > 0.0 {
        lo = nm1;
        hi = nm1;
    }
    let mut strata = Vec::new();
    for (region, st) in sampled.iter().zip(&per_region) {
        let w = region.volume / total;
        let k = st.count as f64;
        let mean = st.sum / k;
        let sample_var = if st.count > 1 { ((st.sum_sq - k * mean * mean) / (k - 1.0)).max(0.0) } else { 0.0 };
        let stderr = (sample_var / k).sqrt();
        bw += w * mean;
        var += w * w * stderr * stderr;
        lo = lo.min(st.min);
        hi = hi.max(st.max);
        strata.push(Stratum { label: region.label.clone(), volume_fraction: w, samples: st.count, mean, stderr });
    }
    let mc_stderr = var.sqrt();
    let bound_before = (nm1 * a.w_fraction).max(bw - 3.0 * mc_stderr);
    Ok(EntropyCertificate {
        n,
        bw_integral: bw,
        mc_stderr,
        mc_seed: seed,
        mc_samples: alloc.iter().sum::<usize>() * usize::from(!sampled.is_empty()),
        w_fraction: a.w_fraction,
        exact_fraction: exact_volume / total,
        integrand_min: lo,
        integrand_max: hi,
        strata,
        curvature_range: a.checks.curvature.value,
        k_le_0_certified: true,
        bound_before,
        rescale_eps: 0.0,
        lambda: 1.0,
        bound_after: bound_before,
        eps_bar: 0.0,
    })
}

/// `eps_bar = (n-1)(1 - (1-eps)/sqrt(1+eps))`.
pub fn eps_bar(n: usize, eps: f64) -> f64 {
    (n - 1) as f64 * (1.0 - (1.0 - eps) / (1.0 + eps).sqrt())
}

/// Rescales the metric by `lambda = sqrt(1 + eps)` so that `K >= -1 - eps`
/// becomes `K >= -1`; entropies divide by `lambda`.
pub fn rescale_bound(cert: &EntropyCertificate, eps: f64) -> Result<EntropyCertificate> {
    if !(eps >= 0.0) || !eps.is_finite() {
        return Err(Error::InvalidArgument(format!("eps must be >= 0, got {eps}")));
    }
    let lambda = (1.0 + eps).sqrt();
    Ok(EntropyCertificate {
        rescale_eps: eps,
        lambda,
        bound_after: cert.bound_before / lambda,
        eps_bar: eps_bar(cert.n, eps),
        ..cert.clone()
    })
}

/// The curvature budget to rescale by: `eps` once any cusp has been
/// replaced, zero for a purely hyperbolic assembly.
pub fn rescale_eps_for(a: &ManifoldAssembly) -> f64 {
    if a.regions.iter().any(|r| matches!(r, Region::Tube(_) | Region::Channel(_))) {
        a.eps
    } else {
        0.0
    }
}

/// `(1/r) ln vol B_r` in hyperbolic `n`-space, with
/// `vol B_r = vol(S^{n-1}) int_0^r sinh^{n-1}`, evaluated in log space.
pub fn model_volume_entropy(n: usize, r_max: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("dimension must be >= 2, got {n}")));
    }
    if !(r_max >= 10.0) || !r_max.is_finite() {
        return Err(Error::InvalidArgument(format!("r_max must be >= 10, got {r_max}")));
    }
    Ok(ln_ball_volume(n, r_max) / r_max)
}

fn ln_sinh(u: f64) -> f64 {
    if u <= 0.0 {
        return f64::NEG_INFINITY;
    }
    u + (-(-2.0 * u).exp()).ln_1p() - std::f64::consts::LN_2
}

/// `ln vol B_r` by Simpson's rule on `ln` of the weighted terms.
pub fn ln_ball_volume(n: usize, r: f64) -> f64 {
    let m = (intervals_for(0.0, r, SIMPSON_STEP) + 1) & !1;
    let h = r / m as f64;
    let k = (n - 1) as f64;
    let terms: Vec<f64> = (0..=m)
        .map(|i| {
            let w: f64 = if i == 0 || i == m {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            w.ln() + k * ln_sinh(h * i as f64)
        })
        .collect();
    ln_sphere_volume((n - 1) as u32) + (h / 3.0).ln() + log_sum_exp(&terms)
}

/// Plain-text account of the chain `h_v = h_t >= h_mu >= BW integral` with
/// the computed numbers. The `K <= 0` step is refused when the assembly's
/// pinching was not certified.
pub fn entropy_chain_report(cert: Option<&EntropyCertificate>, a: &ManifoldAssembly) -> String {
    let mut s = String::new();
    let n = a.n;
    let _ = writeln!(s, "entropy chain, n = {n}, mode = {:?}", a.mode);
    let (lo, hi) = a.checks.curvature.value;
    let _ = writeln!(s, "hypotheses");
    if a.pinching_passed() {
        let _ = writeln!(s, "  K <= 0 on every region: certified (range [{lo}, {hi}], target [{}, 0])", -1.0 - a.eps);
    } else {
        let _ = writeln!(s, "  K <= 0 on every region: NOT certified (range [{lo}, {hi}])");
        let _ = writeln!(s, "refused");
        let _ = writeln!(s, "  h_v = h_t needs K <= 0 (Manning); the entropy chain is not applied.");
        return s;
    }
    let _ = writeln!(s, "  mu: normalized Liouville measure on the unit tangent bundle");
    let _ = writeln!(s, "steps");
    let _ = writeln!(s, "  h_v = h_t          Manning, uses K <= 0");
    let _ = writeln!(s, "  h_t >= h_mu        Goodwyn");
    let _ = writeln!(s, "  h_mu >= BW         Ballmann-Wojtkowski, applied under K <= 0");
    let Some(c) = cert else {
        let _ = writeln!(s, "numbers: none (no certificate)");
        return s;
    };
    let _ = writeln!(s, "numbers");
    if c.mc_samples > 0 {
        let _ = writeln!(
            s,
            "  BW integral         = {} +- {} ({} samples, seed {})",
            c.bw_integral, c.mc_stderr, c.mc_samples, c.mc_seed
        );
    } else {
        let _ = writeln!(s, "  BW integral         = {} (exact, K = -1 everywhere)", c.bw_integral);
    }
    let _ = writeln!(s, "  (n-1) vol(W)/vol(M) = {}", (n - 1) as f64 * c.w_fraction);
    let _ = writeln!(s, "  bound before rescale = {}", c.bound_before);
    let _ = writeln!(s, "  rescale lambda      = sqrt(1 + {}) = {}", c.rescale_eps, c.lambda);
    let _ = writeln!(s, "  bound after rescale = {}", c.bound_after);
    let _ = writeln!(s, "  target (n-1) - eps_bar = {} (eps_bar = {})", c.target(), c.eps_bar);
    let _ = writeln!(s, "result");
    let _ = writeln!(s, "  h_v >= {}", c.bound_after);
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{assemble, AssemblyMode, AssemblyOptions};
    use crate::lattice::FlatLattice;

    fn core_only(n: usize) -> ManifoldAssembly {
        assemble(5.0, &[], 0.1, n, AssemblyMode::Close, &AssemblyOptions::default()).unwrap()
    }

    #[test]
    fn core_only_is_exact() {
        let c = bw_bound(&core_only(4), 1000, 1).unwrap();
        assert_eq!(c.bw_integral, 3.0);
        assert_eq!(c.mc_stderr, 0.0);
        assert_eq!(c.mc_samples, 0);
        let text = entropy_chain_report(Some(&c), &core_only(4));
        assert!(text.contains("h_v >= 3\n"), "{text}");
    }

    #[test]
    fn rescale_examples() {
        let base = bw_bound(&core_only(4), 10, 1).unwrap();
        let same = rescale_bound(&base, 0.0).unwrap();
        assert_eq!(same.lambda, 1.0);
        assert_eq!(same.bound_after, base.bound_before);
        assert_eq!(same.eps_bar, 0.0);
        let c = EntropyCertificate { bound_before: 2.7, ..base };
        let r = rescale_bound(&c, 0.1).unwrap();
        assert_eq!(r.bound_after, 2.7 / 1.1f64.sqrt());
        assert!(rescale_bound(&c, -0.1).is_err());
    }

    #[test]
    fn eps_bar_decreases_to_zero() {
        let vals: Vec<f64> = [0.2, 0.1, 0.05, 0.01].iter().map(|&e| eps_bar(4, e)).collect();
        assert!(vals.windows(2).all(|w| w[1] < w[0]));
        assert!(vals[3] < 0.02 * 3.0);
        assert_eq!(eps_bar(4, 0.0), 0.0);
    }

    #[test]
    fn model_entropy_values() {
        assert!((model_volume_entropy(2, 30.0).unwrap() - 1.0).abs() < 0.1);
        assert!((model_volume_entropy(4, 30.0).unwrap() - 3.0).abs() < 0.1);
        assert!(model_volume_entropy(4, 5.0).is_err());
        // n = 2: vol B_r = 2 pi (cosh r - 1)
        let exact = (2.0 * std::f64::consts::PI * (12f64.cosh() - 1.0)).ln();
        assert!((ln_ball_volume(2, 12.0) - exact).abs() < 1e-10);
    }

    #[test]
    fn radial_sampler_uniform() {
        let s = RadialSampler::new(|_| 1.0, 2.0, 4.0);
        assert!((s.sample(0.25) - 2.5).abs() < 1e-9);
        assert_eq!(s.sample(0.0), 2.0);
        assert!((s.sample(1.0) - 4.0).abs() < 1e-9);
    }

    fn small_close() -> ManifoldAssembly {
        let lat = FlatLattice::from_rows(vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]).unwrap();
        assemble(1.0, &[lat], 0.1, 4, AssemblyMode::Close, &AssemblyOptions::default()).unwrap()
    }

    #[test]
    fn tube_sampling_is_deterministic_and_bounded() {
        let a = small_close();
        let c1 = bw_bound(&a, 20_000, 7).unwrap();
        let c2 = bw_bound(&a, 20_000, 7).unwrap();
        assert_eq!(c1, c2);
        assert!(c1.integrand_min >= 0.0);
        assert!(c1.integrand_max <= 3.0 * 1.1f64.sqrt() + 1e-6);
        assert!(c1.bw_integral >= 3.0 * a.w_fraction - 3.0 * c1.mc_stderr);
        assert!(c1.bw_integral <= 3.0 * 1.1f64.sqrt());
    }

    #[test]
    fn failed_pinching_refuses() {
        let mut a = small_close();
        a.pinching_verdict = crate::warp::Verdict::Fail;
        assert!(bw_bound(&a, 100, 1).is_err());
        let text = entropy_chain_report(None, &a);
        assert!(text.contains("refused"));
        assert!(!text.contains("h_v >="));
    }
}
