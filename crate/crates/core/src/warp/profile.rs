use serde::{Deserialize, Serialize};

use super::CutoffProfile;
use crate::{Error, Result};

/// Which metric family a profile describes.
///
/// - `Tube`: `dt^2 + s^2 dphi^2 + c^2 dsigma^2` on `[0, inf) x S^1 x R^{n-2}`.
/// - `Channel`: `dt^2 + c^2 dsigma^2` on `R x R^{n-1}`, with `c` even.
/// - `Cusp`: `dt^2 + f^2 dsigma^2` with `f = e^{-t}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WarpKind {
    Tube,
    Channel,
    Cusp,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum WarpShape {
    /// `2c = e^t + phi e^{-t}`, `2s = e^t - phi e^{-t}`.
    Cutoff(CutoffProfile),
    /// `s = sinh`, `c = cosh`.
    Hyperbolic,
    /// `s = t`, `c = 1`: flat space in cylindrical coordinates.
    Euclidean,
    /// `s = c = e^t / 2`: constant curvature -1 everywhere.
    Exponential,
    /// `c = beta (e^|t| + phi(|t|) e^{-|t|}) / 2`.
    Channel { cutoff: CutoffProfile, beta: f64 },
    /// `f = e^{-t}`.
    Cusp,
}

/// Warp functions and their first two derivatives at one `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WarpValues {
    pub t: f64,
    pub s: f64,
    pub ds: f64,
    pub d2s: f64,
    pub c: f64,
    pub dc: f64,
    pub d2c: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WarpProfile {
    pub kind: WarpKind,
    pub shape: WarpShape,
    pub domain: (f64, f64),
}

/// Largest `t` for which `e^t` stays comfortably finite.
const T_MAX: f64 = 700.0;

pub fn tube_profile(cut: &CutoffProfile) -> WarpProfile {
    WarpProfile {
        kind: WarpKind::Tube,
        shape: WarpShape::Cutoff(*cut),
        domain: (0.0, T_MAX),
    }
}

/// Doubling channel with waist `c(0) = beta`. Represented on `[0, T]`; the
/// even extension is implied and `values` accepts negative `t`.
pub fn channel_profile(cut: &CutoffProfile, beta: f64) -> Result<WarpProfile> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::InvalidArgument(format!("channel waist must be > 0, got {beta}")));
    }
    Ok(WarpProfile {
        kind: WarpKind::Channel,
        shape: WarpShape::Channel { cutoff: *cut, beta },
        domain: (0.0, T_MAX),
    })
}

/// Cutoff-built tube pair `(s, c)` at `t >= 0`, written so that no
/// cancellation occurs near the axis.
fn cutoff_pair(cut: &CutoffProfile, t: f64) -> WarpValues {
    if t <= 1.0 {
        let (sh, ch) = (t.sinh(), t.cosh());
        return WarpValues { t, s: sh, ds: ch, d2s: sh, c: ch, dc: sh, d2c: ch };
    }
    if t >= cut.r_eps {
        let h = 0.5 * t.exp();
        return WarpValues { t, s: h, ds: h, d2s: h, c: h, dc: h, d2c: h };
    }
    let (phi, dphi, d2phi) = cut.jet(t);
    let (g, dg, d2g) = (1.0 - phi, -dphi, -d2phi);
    let e = 0.5 * (-t).exp();
    let (sh, ch) = (t.sinh(), t.cosh());
    let first = (dg - g) * e;
    let second = (d2g - 2.0 * dg + g) * e;
    WarpValues {
        t,
        s: sh + g * e,
        ds: ch + first,
        d2s: sh + second,
        c: ch - g * e,
        dc: sh - first,
        d2c: ch - second,
    }
}

impl WarpProfile {
    pub fn hyperbolic(t_max: f64) -> Self {
        Self { kind: WarpKind::Tube, shape: WarpShape::Hyperbolic, domain: (0.0, t_max) }
    }

    pub fn euclidean(t_max: f64) -> Self {
        Self { kind: WarpKind::Tube, shape: WarpShape::Euclidean, domain: (0.0, t_max) }
    }

    pub fn exponential(t_max: f64) -> Self {
        Self { kind: WarpKind::Tube, shape: WarpShape::Exponential, domain: (0.0, t_max) }
    }

    pub fn cusp(t_max: f64) -> Self {
        Self { kind: WarpKind::Cusp, shape: WarpShape::Cusp, domain: (0.0, t_max) }
    }

    pub fn with_domain(mut self, lo: f64, hi: f64) -> Self {
        self.domain = (lo, hi);
        self
    }

    pub fn cutoff(&self) -> Option<&CutoffProfile> {
        match &self.shape {
            WarpShape::Cutoff(c) | WarpShape::Channel { cutoff: c, .. } => Some(c),
            _ => None,
        }
    }

    pub fn contains(&self, t: f64) -> bool {
        let probe = if self.kind == WarpKind::Channel { t.abs() } else { t };
        probe >= self.domain.0 && probe <= self.domain.1
    }

    pub fn values(&self, t: f64) -> Result<WarpValues> {
        if !self.contains(t) {
            return Err(Error::OutsideDomain { t, lo: self.domain.0, hi: self.domain.1 });
        }
        Ok(self.values_unchecked(t))
    }

    pub fn values_unchecked(&self, t: f64) -> WarpValues {
        match self.shape {
            WarpShape::Cutoff(ref cut) => cutoff_pair(cut, t),
            WarpShape::Hyperbolic => {
                let (sh, ch) = (t.sinh(), t.cosh());
                WarpValues { t, s: sh, ds: ch, d2s: sh, c: ch, dc: sh, d2c: ch }
            }
            WarpShape::Euclidean => WarpValues { t, s: t, ds: 1.0, d2s: 0.0, c: 1.0, dc: 0.0, d2c: 0.0 },
            WarpShape::Exponential => {
                let h = 0.5 * t.exp();
                WarpValues { t, s: h, ds: h, d2s: h, c: h, dc: h, d2c: h }
            }
            WarpShape::Channel { ref cutoff, beta } => {
                let half = cutoff_pair(cutoff, t.abs());
                let sign = if t < 0.0 { -1.0 } else { 1.0 };
                let (c, dc, d2c) = (beta * half.c, sign * beta * half.dc, beta * half.d2c);
                WarpValues { t, s: c, ds: dc, d2s: d2c, c, dc, d2c }
            }
            WarpShape::Cusp => {
                let f = (-t).exp();
                WarpValues { t, s: f, ds: -f, d2s: f, c: f, dc: -f, d2c: f }
            }
        }
    }

    /// `s'''(0)` for profiles whose circle factor collapses at `t = 0`, used to
    /// evaluate `-s''/s` by its limit on the axis. `None` when `s(0) != 0`.
    pub fn axis_third_derivative(&self) -> Option<f64> {
        match self.shape {
            WarpShape::Cutoff(_) | WarpShape::Hyperbolic => Some(1.0),
            WarpShape::Euclidean => Some(0.0),
            _ => None,
        }
    }

    /// Checks `s(0)=0, s'(0)=1, c(0)=1, c'(0)=0` for tube kind, or `c'(0)=0`
    /// for channel kind.
    pub fn check_axis_conditions(&self, tol: f64) -> Result<()> {
        let v = self.values_unchecked(0.0);
        let bad = match self.kind {
            WarpKind::Tube => {
                v.s.abs() > tol || (v.ds - 1.0).abs() > tol || (v.c - 1.0).abs() > tol || v.dc.abs() > tol
            }
            WarpKind::Channel => v.dc.abs() > tol,
            WarpKind::Cusp => false,
        };
        if bad {
            return Err(Error::Precondition(format!(
                "{:?} profile fails the smooth-closing conditions at t = 0: {v:?}",
                self.kind
            )));
        }
        Ok(())
    }
}
