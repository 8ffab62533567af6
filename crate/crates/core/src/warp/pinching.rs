use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{sectional_curvatures, SectionalReport, WarpProfile};
use crate::{Error, Result};

/// Target curvature interval `[lo, hi]` widened by `tol` on each side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvatureBounds {
    pub lo: f64,
    pub hi: f64,
    pub tol: f64,
}

impl CurvatureBounds {
    pub fn new(lo: f64, hi: f64, tol: f64) -> Self {
        Self { lo, hi, tol }
    }

    /// `[-1 - eps, 0]`, the pinching window for budget `eps`.
    pub fn pinched(eps: f64, tol: f64) -> Self {
        Self::new(-1.0 - eps, 0.0, tol)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PinchingCertificate {
    pub n: usize,
    pub interval: (f64, f64),
    pub grid_step: f64,
    pub points: usize,
    pub target: CurvatureBounds,
    /// Raw extremes over the grid samples.
    pub k_min: f64,
    pub k_max: f64,
    /// Largest inter-grid margin applied to any segment.
    pub margin: f64,
    /// Extremes after the inter-grid margin, with the `t` where they occur.
    pub k_min_margined: f64,
    pub k_max_margined: f64,
    pub t_at_min: f64,
    pub t_at_max: f64,
    pub verdict: Verdict,
}

impl PinchingCertificate {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

fn component(r: &SectionalReport, idx: usize) -> Option<f64> {
    match idx {
        0 => r.k_t_phi,
        1 => Some(r.k_t_u),
        2 => r.k_phi_u,
        _ => r.k_u_v,
    }
}

/// Samples every defined sectional curvature on a uniform grid over
/// `interval` and bounds each function between samples.
///
/// Between grid points the margin is `L * h / 2` where `L` is twice the
/// largest absolute slope among the segment and its two neighbours. This is
/// a heuristic estimate, not an interval-arithmetic enclosure.
pub fn certify_pinching(
    w: &WarpProfile,
    n: usize,
    interval: (f64, f64),
    target: CurvatureBounds,
    grid_step: f64,
) -> Result<PinchingCertificate> {
    let (a, b) = interval;
    if !(grid_step > 0.0) {
        return Err(Error::InvalidArgument(format!("grid step must be > 0, got {grid_step}")));
    }
    if !(a <= b) {
        return Err(Error::InvalidArgument(format!("empty interval [{a}, {b}]")));
    }
    for t in [a, b] {
        if !w.contains(t) {
            return Err(Error::OutsideDomain { t, lo: w.domain.0, hi: w.domain.1 });
        }
    }
    let segments = ((b - a) / grid_step).ceil() as usize;
    let h = if segments == 0 { 0.0 } else { (b - a) / segments as f64 };
    let reports: Vec<SectionalReport> = (0..=segments)
        .into_par_iter()
        .map(|i| {
            let t = if i == segments { b } else { a + h * i as f64 };
            sectional_curvatures(w, t, n)
        })
        .collect::<Result<_>>()?;

    let mut k_min = f64::INFINITY;
    let mut k_max = f64::NEG_INFINITY;
    let mut lo_m = (f64::INFINITY, a);
    let mut hi_m = (f64::NEG_INFINITY, a);
    let mut margin_max: f64 = 0.0;

    for idx in 0..4 {
        let Some(vals) = reports.iter().map(|r| component(r, idx)).collect::<Option<Vec<f64>>>() else {
            continue;
        };
        for (i, &k) in vals.iter().enumerate() {
            k_min = k_min.min(k);
            k_max = k_max.max(k);
            if segments == 0 {
                if k < lo_m.0 {
                    lo_m = (k, reports[i].t);
                }
                if k > hi_m.0 {
                    hi_m = (k, reports[i].t);
                }
            }
        }
        if segments == 0 {
            continue;
        }
        let slopes: Vec<f64> = vals.windows(2).map(|p| ((p[1] - p[0]) / h).abs()).collect();
        for i in 0..segments {
            let mut window = slopes[i];
            if i > 0 {
                window = window.max(slopes[i - 1]);
            }
            if i + 1 < segments {
                window = window.max(slopes[i + 1]);
            }
            let lipschitz = 2.0 * window;
            let margin = lipschitz * h / 2.0;
            margin_max = margin_max.max(margin);
            let (k0, k1) = (vals[i], vals[i + 1]);
            let lower = k0.min(k1) - margin;
            let upper = k0.max(k1) + margin;
            let t_mid = 0.5 * (reports[i].t + reports[i + 1].t);
            if lower < lo_m.0 {
                lo_m = (lower, t_mid);
            }
            if upper > hi_m.0 {
                hi_m = (upper, t_mid);
            }
        }
    }

    let ok = lo_m.0 >= target.lo - target.tol && hi_m.0 <= target.hi + target.tol;
    Ok(PinchingCertificate {
        n,
        interval,
        grid_step: h,
        points: segments + 1,
        target,
        k_min,
        k_max,
        margin: margin_max,
        k_min_margined: lo_m.0,
        k_max_margined: hi_m.0,
        t_at_min: lo_m.1,
        t_at_max: hi_m.1,
        verdict: Verdict::from_bool(ok),
    })
}
