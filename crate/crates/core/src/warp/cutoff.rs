use serde::{Deserialize, Serialize};

use super::{certify_pinching, tube_profile, CurvatureBounds, DEFAULT_GRID_STEP, PINCHING_TOL};
use crate::{Error, Result};

/// Quintic smoothstep complement `1 - (10u^3 - 15u^4 + 6u^5)` on `[0, 1]`,
/// clamped outside. Returns `(value, d/du, d^2/du^2)`.
pub fn smoothstep5(u: f64) -> (f64, f64, f64) {
    if u <= 0.0 {
        return (1.0, 0.0, 0.0);
    }
    if u >= 1.0 {
        return (0.0, 0.0, 0.0);
    }
    let v = 1.0 - u;
    let step = u * u * u * (10.0 - 15.0 * u + 6.0 * u * u);
    (1.0 - step, -30.0 * u * u * v * v, -60.0 * u * v * (1.0 - 2.0 * u))
}

/// The cutoff `phi_eps`: identically 1 on `[0, 1]`, identically 0 on
/// `[r_eps, inf)`, a C^2 quintic transition in between.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffProfile {
    pub r_eps: f64,
    pub eps_budget: f64,
}

impl CutoffProfile {
    pub fn new(r_eps: f64, eps_budget: f64) -> Result<Self> {
        if !(r_eps > 1.0) || !r_eps.is_finite() {
            return Err(Error::InvalidArgument(format!("r_eps must be > 1, got {r_eps}")));
        }
        if !(eps_budget > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "eps budget must be > 0, got {eps_budget}"
            )));
        }
        Ok(Self { r_eps, eps_budget })
    }

    fn width(&self) -> f64 {
        self.r_eps - 1.0
    }

    /// `(phi, phi', phi'')` at `t`.
    pub fn jet(&self, t: f64) -> (f64, f64, f64) {
        let w = self.width();
        let (p, dp, d2p) = smoothstep5((t - 1.0) / w);
        (p, dp / w, d2p / (w * w))
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.jet(t).0
    }

    pub fn deriv1(&self, t: f64) -> f64 {
        self.jet(t).1
    }

    pub fn deriv2(&self, t: f64) -> f64 {
        self.jet(t).2
    }

    /// Closed-form maxima of `|phi'|` and `|phi''|` over the transition.
    pub fn derivative_bounds(&self) -> (f64, f64) {
        let w = self.width();
        // max |30 u^2 (1-u)^2| = 15/8 at u = 1/2;
        // max |60 u (1-u)(1-2u)| = 10/sqrt(3) at u = (3 - sqrt 3)/6.
        (15.0 / 8.0 / w, 10.0 / 3f64.sqrt() / (w * w))
    }
}

/// Knobs for the adaptive `r_eps` search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffSearch {
    pub r_ceiling: f64,
    pub grid_step: f64,
    pub tol: f64,
    /// Dimension used for the design check; any `n >= 4` exercises all four planes.
    pub design_dim: usize,
}

impl Default for CutoffSearch {
    fn default() -> Self {
        Self {
            r_ceiling: 512.0,
            grid_step: DEFAULT_GRID_STEP,
            tol: PINCHING_TOL,
            design_dim: 4,
        }
    }
}

/// Candidate transition ends live on the fixed grid `r = 2^(k / STEPS_PER_OCTAVE)`.
const STEPS_PER_OCTAVE: i64 = 128;

fn grid_r(k: i64) -> f64 {
    (k as f64 / STEPS_PER_OCTAVE as f64).exp2()
}

pub fn make_cutoff(eps: f64) -> Result<CutoffProfile> {
    make_cutoff_with(eps, &CutoffSearch::default())
}

/// Smallest grid `r_eps` whose tube profile certifies `K in [-1-eps, 0]` on
/// `[0, r_eps + 2]`. Doubling search from `4/eps`, then bisection on the
/// grid index (resolution 1/128 octave, below 1%).
pub fn make_cutoff_with(eps: f64, search: &CutoffSearch) -> Result<CutoffProfile> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::InvalidArgument(format!("eps must lie in (0, 1], got {eps}")));
    }
    let passes = |k: i64| -> Result<bool> {
        if k <= 0 {
            return Ok(false);
        }
        let r = grid_r(k);
        let cut = CutoffProfile::new(r, eps)?;
        let profile = tube_profile(&cut);
        let cert = certify_pinching(
            &profile,
            search.design_dim,
            (0.0, r + 2.0),
            CurvatureBounds::new(-1.0 - eps, 0.0, search.tol),
            search.grid_step,
        )?;
        Ok(cert.passed())
    };

    let start = (4.0 / eps).log2() * STEPS_PER_OCTAVE as f64;
    let ceiling_k = (search.r_ceiling.log2() * STEPS_PER_OCTAVE as f64).floor() as i64;
    if ceiling_k < 1 {
        return Err(Error::CutoffInfeasible {
            eps,
            ceiling: search.r_ceiling,
        });
    }
    let mut k = (start.ceil() as i64).clamp(1, ceiling_k);
    let (mut lo, mut hi);
    if passes(k)? {
        hi = k;
        loop {
            let down = hi - STEPS_PER_OCTAVE;
            if down <= 0 {
                lo = 0;
                break;
            }
            if passes(down)? {
                hi = down;
            } else {
                lo = down;
                break;
            }
        }
    } else {
        lo = k;
        loop {
            k += STEPS_PER_OCTAVE;
            if k > ceiling_k {
                return Err(Error::CutoffInfeasible {
                    eps,
                    ceiling: search.r_ceiling,
                });
            }
            if passes(k)? {
                hi = k;
                break;
            }
            lo = k;
        }
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if passes(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    log::debug!("make_cutoff: eps = {eps}, r_eps = {}", grid_r(hi));
    CutoffProfile::new(grid_r(hi), eps)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smoothstep_endpoints_are_flat() {
        for u in [0.0, 1.0] {
            let (_, d1, d2) = smoothstep5(u);
            assert_eq!(d1, 0.0);
            assert_eq!(d2, 0.0);
        }
        assert_eq!(smoothstep5(0.0).0, 1.0);
        assert_eq!(smoothstep5(1.0).0, 0.0);
        assert!((smoothstep5(0.5).0 - 0.5).abs() < 1e-15);
    }

    #[test]
    fn smoothstep_derivatives_match_finite_differences() {
        let h = 1e-6;
        for i in 1..20 {
            let u = i as f64 / 20.0;
            let (_, d1, d2) = smoothstep5(u);
            let fd1 = (smoothstep5(u + h).0 - smoothstep5(u - h).0) / (2.0 * h);
            let fd2 = (smoothstep5(u + h).1 - smoothstep5(u - h).1) / (2.0 * h);
            assert!((d1 - fd1).abs() < 1e-7, "u={u}");
            assert!((d2 - fd2).abs() < 1e-6, "u={u}");
        }
    }

    #[test]
    fn derivative_bounds_dominate_samples() {
        let cut = CutoffProfile::new(6.0, 0.1).unwrap();
        let (b1, b2) = cut.derivative_bounds();
        for i in 0..=10_000 {
            let t = 1.0 + 5.0 * i as f64 / 10_000.0;
            let (_, d1, d2) = cut.jet(t);
            assert!(d1.abs() <= b1 + 1e-12);
            assert!(d2.abs() <= b2 + 1e-12);
        }
    }

    #[test]
    fn cutoff_invariants() {
        let cut = CutoffProfile::new(7.5, 0.2).unwrap();
        let mut prev = 1.0;
        for i in 0..=2000 {
            let t = 10.0 * i as f64 / 2000.0;
            let (p, d1, _) = cut.jet(t);
            assert!((0.0..=1.0).contains(&p));
            assert!(d1 <= 0.0);
            assert!(p <= prev + 1e-15);
            prev = p;
            if t <= 1.0 {
                assert_eq!(p, 1.0);
            }
            if t >= 7.5 {
                assert_eq!(p, 0.0);
            }
        }
        for t in [1.0, 7.5] {
            assert_eq!(cut.deriv1(t), 0.0);
            assert_eq!(cut.deriv2(t), 0.0);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(CutoffProfile::new(1.0, 0.1).is_err());
        assert!(CutoffProfile::new(3.0, 0.0).is_err());
        assert!(make_cutoff(0.0).is_err());
        assert!(make_cutoff(2.0).is_err());
        assert!(make_cutoff(f64::NAN).is_err());
    }

    #[test]
    fn eps_one_clamped_regions() {
        let cut = make_cutoff(1.0).unwrap();
        assert_eq!(cut.eval(0.5), 1.0);
        assert_eq!(cut.eval(cut.r_eps + 1.0), 0.0);
    }

    #[test]
    fn ceiling_is_enforced() {
        let search = CutoffSearch {
            r_ceiling: 1.5,
            ..CutoffSearch::default()
        };
        assert!(matches!(
            make_cutoff_with(1e-3, &search),
            Err(Error::CutoffInfeasible { .. })
        ));
    }
}
