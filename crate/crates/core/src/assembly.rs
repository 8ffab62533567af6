//! Cusp closing and doubling.
//!
//! Conventions. A cusp lattice `Gamma_0` is given at height 0, where the
//! cusp meets the core; at height `h` the cross-section is
//! `R^{n-1} / e^{-h} Gamma_0`. The cusp is kept on `[0, T]` and everything
//! beyond `T` is replaced:
//!
//! - closing: a tube `[0, t0 + 1] x S^1 x R^{n-2} / Delta` whose end
//!   `t = t0 + 1` sits at height `T`, so tube `t` faces height
//!   `T + t0 + 1 - t`; generators are picked in `Gamma_{T+1}` and
//!   `2 pi s(t0) = |gamma_1|` there.
//! - doubling: a channel `[-t0 - 1, t0 + 1] x R^{n-1} / Gamma_0` whose ends
//!   sit at height `T` of the two copies, with waist
//!   `beta = 2 e^{-(T + t0 + 1)}`.
//!
//! The collar `[T, T + 1]` is where both descriptions are compared.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::lattice::{choose_k, delta_action, greedy_generators, FlatLattice, GeneratorSystem, SwapForm};
use crate::numerics::{bisect, simpson, simpson_checked, intervals_for, SIMPSON_STEP};
use crate::warp::{
    certify_pinching, channel_profile, make_cutoff_with, tube_profile, CurvatureBounds, CutoffProfile,
    CutoffSearch, PinchingCertificate, Verdict, WarpProfile, DEFAULT_GRID_STEP, PINCHING_TOL,
};
use crate::{Error, Result};

/// Relative tolerance for collar metric agreement.
pub const GLUING_TOL: f64 = 1e-9;
/// Relative tolerance for `|2 pi s(t0) - |gamma_1||`.
pub const T0_TOL: f64 = 1e-10;
/// Collar depths at which both sides are compared.
pub const COLLAR_DEPTHS: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AssemblyMode {
    Close,
    Double,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CuspSpec {
    pub lattice: FlatLattice,
    pub cut_height: f64,
}

impl CuspSpec {
    pub fn new(lattice: FlatLattice, cut_height: f64) -> Result<Self> {
        if !(cut_height >= 0.0) || !cut_height.is_finite() {
            return Err(Error::InvalidArgument(format!("cut height must be >= 0, got {cut_height}")));
        }
        Ok(Self { lattice, cut_height })
    }

    /// Cross-section lattice at height `h`.
    pub fn lattice_at(&self, h: f64) -> Result<FlatLattice> {
        self.lattice.rescale((-h).exp())
    }

    fn check_rank(&self, n: usize) -> Result<()> {
        let m = self.lattice.rank();
        if m != n - 1 || self.lattice.ambient_dim() != n - 1 {
            return Err(Error::Precondition(format!(
                "cusp lattice must have rank {} in R^{}, got rank {m} in R^{}",
                n - 1,
                n - 1,
                self.lattice.ambient_dim()
            )));
        }
        Ok(())
    }
}

fn check_dim(n: usize) -> Result<()> {
    if n < 3 {
        return Err(Error::InvalidArgument(format!("dimension must be >= 3, got {n}")));
    }
    Ok(())
}

/// Volume of the cusp beyond height `T`: `covol e^{-(n-1)T} / (n-1)`.
pub fn cusp_tail_volume(c: &CuspSpec, n: usize) -> Result<f64> {
    check_dim(n)?;
    let k = (n - 1) as f64;
    Ok(c.lattice.covolume() * (-k * c.cut_height).exp() / k)
}

/// The same tail volume by Simpson quadrature of `covol e^{-(n-1)t}` on
/// `[T, T + 40/(n-1)]`; the truncated remainder is below `e^{-40}`.
pub fn cusp_tail_volume_quadrature(c: &CuspSpec, n: usize) -> Result<f64> {
    check_dim(n)?;
    let k = (n - 1) as f64;
    let covol = c.lattice.covolume();
    let (a, b) = (c.cut_height, c.cut_height + 40.0 / k);
    Ok(simpson(|t| covol * (-k * t).exp(), a, b, intervals_for(a, b, SIMPSON_STEP)))
}

/// Volume of the retained cusp `[0, T]`.
pub fn cusp_retained_volume(c: &CuspSpec, n: usize) -> Result<f64> {
    check_dim(n)?;
    let k = (n - 1) as f64;
    Ok(c.lattice.covolume() * -(-k * c.cut_height).exp_m1() / k)
}

/// Smallest `T >= 0` whose tail volume is at most `budget`.
pub fn cut_height_for_budget(lattice: &FlatLattice, n: usize, budget: f64) -> Result<f64> {
    check_dim(n)?;
    if !(budget > 0.0) {
        return Err(Error::InvalidArgument(format!("volume budget must be > 0, got {budget}")));
    }
    let k = (n - 1) as f64;
    Ok(((lattice.covolume() / (k * budget)).ln() / k).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct T0Solution {
    pub t0: f64,
    /// `ln(L / pi)`, valid because `s = e^t / 2` for `t >= r_eps`.
    pub closed_form: f64,
    pub residual: f64,
    pub rel_residual: f64,
}

/// Solves `2 pi s(t0) = gamma1_length` for `t0 >= r_eps + 1` by bisection.
pub fn solve_t0(profile: &WarpProfile, gamma1_length: f64) -> Result<T0Solution> {
    let cut = match (profile.kind, profile.cutoff()) {
        (crate::warp::WarpKind::Tube, Some(c)) => *c,
        _ => return Err(Error::Precondition("solve_t0 needs a cutoff tube profile".into())),
    };
    let lo = cut.r_eps + 1.0;
    let circle = |t: f64| 2.0 * PI * profile.values_unchecked(t).s;
    let l_min = circle(lo);
    if !(gamma1_length.is_finite()) || gamma1_length < l_min * (1.0 - 1e-15) {
        return Err(Error::Precondition(format!(
            "gamma_1 length {gamma1_length} is below 2 pi s(r_eps + 1) = {l_min}"
        )));
    }
    let closed_form = (gamma1_length / PI).ln();
    let t0 = if gamma1_length <= l_min {
        lo
    } else {
        let hi = closed_form.max(lo) + 1.0;
        if !profile.contains(hi) {
            return Err(Error::OutsideDomain { t: hi, lo: profile.domain.0, hi: profile.domain.1 });
        }
        bisect(|t| circle(t) - gamma1_length, lo, hi, 1e-15 * hi, 200)?
    };
    let residual = (circle(t0) - gamma1_length).abs();
    let rel_residual = residual / gamma1_length;
    if rel_residual > T0_TOL {
        return Err(Error::InterfaceMismatch {
            interface: "gluing equation".into(),
            error: rel_residual,
            tol: T0_TOL,
        });
    }
    Ok(T0Solution { t0, closed_form, residual, rel_residual })
}

/// One collar depth: the Gram matrix of the cross-section generators seen
/// from the cusp and from the filling region.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CollarSample {
    pub depth: f64,
    pub height: f64,
    pub t: f64,
    /// Generator lengths, cusp side and filling side.
    pub cusp_lengths: Vec<f64>,
    pub fill_lengths: Vec<f64>,
    /// Largest Gram entry difference relative to the largest diagonal entry.
    pub gram_rel_error: f64,
    /// Cross-section volumes, cusp side and filling side.
    pub cusp_section_volume: f64,
    pub fill_section_volume: f64,
    /// Worst of the Gram and cross-section volume mismatches.
    pub rel_error: f64,
}

impl CollarSample {
    fn new(
        depth: f64,
        height: f64,
        t: f64,
        cusp: &DMatrix<f64>,
        fill: &DMatrix<f64>,
        cusp_section_volume: f64,
        fill_section_volume: f64,
    ) -> Self {
        let gram_rel_error = gram_compare(cusp, fill);
        let vol_err = ((cusp_section_volume - fill_section_volume) / cusp_section_volume).abs();
        Self {
            depth,
            height,
            t,
            cusp_lengths: diag_sqrt(cusp),
            fill_lengths: diag_sqrt(fill),
            gram_rel_error,
            cusp_section_volume,
            fill_section_volume,
            rel_error: gram_rel_error.max(vol_err),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InterfaceCertificate {
    pub name: String,
    pub samples: Vec<CollarSample>,
    pub max_rel_error: f64,
    pub tol: f64,
    pub verdict: Verdict,
}

impl InterfaceCertificate {
    fn from_samples(name: String, samples: Vec<CollarSample>, tol: f64) -> Self {
        let max_rel_error = samples.iter().map(|s| s.rel_error).fold(0.0, f64::max);
        Self { name, samples, max_rel_error, tol, verdict: Verdict::from_bool(max_rel_error <= tol) }
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

fn gram_compare(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let scale = (0..a.nrows()).map(|i| a[(i, i)].abs()).fold(0.0, f64::max);
    (a - b).abs().max() / scale
}

fn diag_sqrt(g: &DMatrix<f64>) -> Vec<f64> {
    (0..g.nrows()).map(|i| g[(i, i)].sqrt()).collect()
}

/// A subgroup `Z^rank` of the fundamental group, with generators given as
/// vectors in the flat torus that carries it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AbelianWitness {
    pub source: String,
    pub rank: usize,
    pub generators: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VolumeIntegral {
    pub value: f64,
    /// Part lying in the constant curvature `-1` set.
    pub constant_curvature: f64,
    /// Largest relative change seen when the quadrature step is halved.
    pub richardson_rel_change: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TubeRegion {
    pub cusp_index: usize,
    pub profile: WarpProfile,
    pub r_eps: f64,
    pub cut_height: f64,
    pub l_min: f64,
    pub generators: GeneratorSystem,
    pub swap_form: SwapForm,
    pub k: u64,
    pub covering_index: u64,
    pub gamma1: Vec<f64>,
    pub gamma1_length: f64,
    pub t0: T0Solution,
    /// Rotation of the circle by each `Delta` generator, as a fraction of a turn.
    pub twists: Vec<f64>,
    /// `Delta` in tube `sigma` coordinates: projected to `gamma_1^perp`, scaled by `1/c(t0)`.
    pub delta: FlatLattice,
    pub volume: VolumeIntegral,
    pub boundary_torus_volume: f64,
    /// `C(n) = 2^{n-2}/(n-1)` bounds `volume / boundary_torus_volume`.
    pub volume_constant: f64,
    pub volume_ratio: f64,
    pub interface: InterfaceCertificate,
    pub pinching: PinchingCertificate,
    pub witness: AbelianWitness,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChannelRegion {
    pub cusp_index: usize,
    pub profile: WarpProfile,
    pub r_eps: f64,
    pub cut_height: f64,
    pub t0: f64,
    pub beta: f64,
    pub lattice: FlatLattice,
    pub volume: VolumeIntegral,
    /// `|2 * half - full| / full` for the even integrand.
    pub mirror_rel_error: f64,
    pub waist_k_u_v: f64,
    pub interfaces: Vec<InterfaceCertificate>,
    pub pinching: PinchingCertificate,
    pub witness: AbelianWitness,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CuspRemnant {
    pub cusp_index: usize,
    pub copy: usize,
    pub cut_height: f64,
    pub volume: f64,
    pub tail_volume: f64,
    pub tail_volume_quadrature: f64,
    pub pinching: Option<PinchingCertificate>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "region", rename_all = "snake_case")]
pub enum Region {
    Core { copy: usize, volume: f64 },
    CuspRemnant(CuspRemnant),
    Tube(Box<TubeRegion>),
    Channel(Box<ChannelRegion>),
}

impl Region {
    pub fn volume(&self) -> f64 {
        match self {
            Region::Core { volume, .. } => *volume,
            Region::CuspRemnant(c) => c.volume,
            Region::Tube(t) => t.volume.value,
            Region::Channel(c) => c.volume.value,
        }
    }

    /// Volume of the part where `K = -1` identically.
    pub fn constant_curvature_volume(&self) -> f64 {
        match self {
            Region::Core { volume, .. } => *volume,
            Region::CuspRemnant(c) => c.volume,
            Region::Tube(t) => t.volume.constant_curvature,
            Region::Channel(c) => c.volume.constant_curvature,
        }
    }

    pub fn pinching(&self) -> Option<&PinchingCertificate> {
        match self {
            Region::Core { .. } => None,
            Region::CuspRemnant(c) => c.pinching.as_ref(),
            Region::Tube(t) => Some(&t.pinching),
            Region::Channel(c) => Some(&c.pinching),
        }
    }

    pub fn interfaces(&self) -> Vec<&InterfaceCertificate> {
        match self {
            Region::Tube(t) => vec![&t.interface],
            Region::Channel(c) => c.interfaces.iter().collect(),
            _ => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssemblyOptions {
    pub allow_dim3: bool,
    pub swap_form: SwapForm,
    /// Volume allowed beyond each cut; defaults to `eps * core_volume / (10 * cusps)`.
    pub cut_budget: Option<f64>,
    /// The `v` of the volume check; defaults to [`default_volume_bound`].
    pub volume_bound: Option<f64>,
    pub pinching_grid_step: f64,
    pub quadrature_step: f64,
    pub gluing_tol: f64,
    pub r_ceiling: f64,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        Self {
            allow_dim3: false,
            swap_form: SwapForm::Unimodular,
            cut_budget: None,
            volume_bound: None,
            pinching_grid_step: DEFAULT_GRID_STEP,
            quadrature_step: SIMPSON_STEP,
            gluing_tol: GLUING_TOL,
            r_ceiling: CutoffSearch::default().r_ceiling,
        }
    }
}

impl AssemblyOptions {
    fn search(&self) -> CutoffSearch {
        CutoffSearch { r_ceiling: self.r_ceiling, ..CutoffSearch::default() }
    }
}

/// `2^{n-2}/(n-1)`: a tube filling a cusp cut where the torus has volume
/// `A` has volume at most `C(n) A`, from `s <= e^t/2` and `c <= e^t`.
pub fn tube_volume_constant(n: usize) -> f64 {
    2f64.powi(n as i32 - 2) / (n - 1) as f64
}

/// An `eps`-independent volume bound: every region beyond the core is
/// bounded by `(1 + 2^{n-2})` times the full cusp volume `covol/(n-1)`.
pub fn default_volume_bound(core_volume: f64, cusps: &[FlatLattice], n: usize, mode: AssemblyMode) -> f64 {
    let copies = match mode {
        AssemblyMode::Close => 1.0,
        AssemblyMode::Double => 2.0,
    };
    let k = (n - 1) as f64;
    let cusp: f64 = cusps.iter().map(|l| l.covolume() / k).sum();
    copies * (core_volume + (1.0 + 2f64.powi(n as i32 - 2)) * cusp)
}

/// Simpson over consecutive pieces, returning the total, the part over the
/// pieces flagged constant-curvature, and the worst Richardson change.
fn piecewise_integral<F: Fn(f64) -> f64 + Sync>(
    f: &F,
    pieces: &[(f64, f64, bool)],
    step: f64,
) -> VolumeIntegral {
    let mut value = 0.0;
    let mut constant = 0.0;
    let mut worst: f64 = 0.0;
    for &(a, b, flat) in pieces {
        if b <= a {
            continue;
        }
        let (v, rel) = simpson_checked(f, a, b, step);
        value += v;
        if flat {
            constant += v;
        }
        worst = worst.max(rel);
    }
    VolumeIntegral { value, constant_curvature: constant, richardson_rel_change: worst }
}

/// Replaces the cusp beyond `c.cut_height` by a tube around a codimension-2 torus.
pub fn close_cusp(
    c: &CuspSpec,
    cut: &CutoffProfile,
    n: usize,
    cusp_index: usize,
    opts: &AssemblyOptions,
) -> Result<TubeRegion> {
    check_dim(n)?;
    if n < 4 && !opts.allow_dim3 {
        return Err(Error::Precondition(
            "closing a cusp in dimension 3 needs the allow_dim3 option".into(),
        ));
    }
    c.check_rank(n)?;
    let eps = cut.eps_budget;
    let profile = tube_profile(cut);
    let r = cut.r_eps;
    let l_min = 2.0 * PI * profile.values(r + 1.0)?.s;

    let glue = c.lattice_at(c.cut_height + 1.0)?;
    let gs = greedy_generators(&glue)?;
    let swap = choose_k(&gs, l_min, opts.swap_form)?;
    let t0 = solve_t0(&profile, swap.gamma1_norm)?;
    let t_end = t0.t0 + 1.0;
    let action = delta_action(&gs, &swap)?;
    let c_t0 = profile.values(t0.t0)?.c;
    let delta = action.projected.rescale(1.0 / c_t0)?;

    let fiber = delta.covolume();
    let density = |t: f64| {
        let v = profile.values_unchecked(t);
        2.0 * PI * v.s * v.c.powi(n as i32 - 2) * fiber
    };
    let volume = piecewise_integral(
        &density,
        &[(0.0, 1.0_f64.min(r), true), (1.0, r, false), (r, t_end, true)],
        opts.quadrature_step,
    );
    let boundary_torus_volume = c.lattice_at(c.cut_height)?.covolume();

    // Collar: tube t = t0 + 1 - u faces height T + u, where the cusp lattice
    // is e^{1-u} Gamma_{T+1}. Generators: gamma_1, then alpha_2, ...
    let section_covol = glue.covolume();
    let mut gens = vec![swap.gamma1.clone()];
    gens.extend(gs.alphas[1..].iter().cloned());
    let m = gens.len();
    let cusp_gram0 = DMatrix::from_fn(m, m, |i, j| gens[i].iter().zip(&gens[j]).map(|(a, b)| a * b).sum());
    // Tube coordinates of each generator: circle angle and sigma translation.
    let mut angle = vec![2.0 * PI];
    let mut sigma: Vec<Vec<f64>> = vec![vec![0.0; n - 2]];
    for (j, tw) in action.twists.iter().enumerate() {
        angle.push(2.0 * PI * tw);
        sigma.push(delta.basis_vector(j));
    }
    let samples = COLLAR_DEPTHS
        .iter()
        .map(|&u| -> Result<CollarSample> {
            let t = t_end - u;
            let v = profile.values(t)?;
            let cusp = &cusp_gram0 * (2.0 * (1.0 - u)).exp();
            let fill = DMatrix::from_fn(m, m, |i, j| {
                v.s * v.s * angle[i] * angle[j]
                    + v.c * v.c * sigma[i].iter().zip(&sigma[j]).map(|(a, b)| a * b).sum::<f64>()
            });
            let cusp_section = section_covol * ((n - 1) as f64 * (1.0 - u)).exp();
            let fill_section = 2.0 * PI * v.s * v.c.powi(n as i32 - 2) * fiber;
            Ok(CollarSample::new(u, c.cut_height + u, t, &cusp, &fill, cusp_section, fill_section))
        })
        .collect::<Result<Vec<_>>>()?;
    let interface =
        InterfaceCertificate::from_samples(format!("cusp {cusp_index} / tube"), samples, opts.gluing_tol);
    if !interface.passed() && swap.covering_index == 1 {
        return Err(Error::InterfaceMismatch {
            interface: interface.name.clone(),
            error: interface.max_rel_error,
            tol: interface.tol,
        });
    }

    let pinching = certify_pinching(
        &profile,
        n,
        (0.0, t_end),
        CurvatureBounds::pinched(eps, PINCHING_TOL),
        opts.pinching_grid_step,
    )?;
    let volume_ratio = volume.value / boundary_torus_volume;
    Ok(TubeRegion {
        cusp_index,
        profile,
        r_eps: r,
        cut_height: c.cut_height,
        l_min,
        swap_form: swap.form,
        k: swap.k,
        covering_index: swap.covering_index,
        gamma1_length: swap.gamma1_norm,
        gamma1: swap.gamma1.clone(),
        generators: GeneratorSystem { swap: Some(swap), ..gs.clone() },
        t0,
        twists: action.twists,
        delta,
        volume,
        boundary_torus_volume,
        volume_constant: tube_volume_constant(n),
        volume_ratio,
        interface,
        pinching,
        witness: AbelianWitness {
            source: format!("core torus R^{}/Delta of tube {cusp_index}", n - 2),
            rank: n - 2,
            generators: gs.alphas[1..].to_vec(),
        },
    })
}

/// Joins the cusp of two copies through a convex channel with a flat
/// totally geodesic torus at `t = 0`.
pub fn double_cusp(
    c: &CuspSpec,
    cut: &CutoffProfile,
    n: usize,
    cusp_index: usize,
    opts: &AssemblyOptions,
) -> Result<ChannelRegion> {
    check_dim(n)?;
    c.check_rank(n)?;
    let r = cut.r_eps;
    let t0 = r + 1.0;
    let t_end = t0 + 1.0;
    let beta = 2.0 * (-(c.cut_height + t_end)).exp();
    let profile = channel_profile(cut, beta)?;
    let covol = c.lattice.covolume();
    let density = |t: f64| covol * profile.values_unchecked(t).c.powi(n as i32 - 1);
    let half_pieces = [(0.0, 1.0_f64.min(r), false), (1.0, r, false), (r, t_end, true)];
    let half = piecewise_integral(&density, &half_pieces, opts.quadrature_step);
    let mut full_pieces: Vec<(f64, f64, bool)> = half_pieces.iter().rev().map(|&(a, b, f)| (-b, -a, f)).collect();
    full_pieces.extend(half_pieces);
    let volume = piecewise_integral(&density, &full_pieces, opts.quadrature_step);
    let mirror_rel_error = ((2.0 * half.value - volume.value) / volume.value).abs();

    let basis = c.lattice.basis_vectors();
    let gram0 = c.lattice.gram().clone();
    let mut interfaces = Vec::new();
    for (side, sign) in [("+", 1.0), ("-", -1.0)] {
        let samples = COLLAR_DEPTHS
            .iter()
            .map(|&u| -> Result<CollarSample> {
                let t = sign * (t_end - u);
                let cv = profile.values(t)?.c;
                let cusp = &gram0 * (-2.0 * (c.cut_height + u)).exp();
                let fill = &gram0 * (cv * cv);
                let cusp_section = covol * (-((n - 1) as f64) * (c.cut_height + u)).exp();
                let fill_section = covol * cv.powi(n as i32 - 1);
                Ok(CollarSample::new(u, c.cut_height + u, t, &cusp, &fill, cusp_section, fill_section))
            })
            .collect::<Result<Vec<_>>>()?;
        let cert = InterfaceCertificate::from_samples(
            format!("cusp {cusp_index} copy {side} / channel"),
            samples,
            opts.gluing_tol,
        );
        if !cert.passed() {
            return Err(Error::InterfaceMismatch { interface: cert.name, error: cert.max_rel_error, tol: cert.tol });
        }
        interfaces.push(cert);
    }
    let waist = crate::warp::sectional_curvatures(&profile, 0.0, n)?;
    let pinching = certify_pinching(
        &profile,
        n,
        (-t_end, t_end),
        CurvatureBounds::pinched(cut.eps_budget, PINCHING_TOL),
        opts.pinching_grid_step,
    )?;
    Ok(ChannelRegion {
        cusp_index,
        profile,
        r_eps: r,
        cut_height: c.cut_height,
        t0,
        beta,
        lattice: c.lattice.clone(),
        volume,
        mirror_rel_error,
        waist_k_u_v: waist.k_u_v.unwrap_or(0.0),
        interfaces,
        pinching,
        witness: AbelianWitness {
            source: format!("flat totally geodesic torus at the waist of channel {cusp_index}"),
            rank: n - 1,
            generators: basis,
        },
    })
}

fn remnant(c: &CuspSpec, n: usize, cusp_index: usize, copy: usize, eps: f64, opts: &AssemblyOptions) -> Result<CuspRemnant> {
    let pinching = if c.cut_height > 0.0 {
        Some(certify_pinching(
            &WarpProfile::cusp(c.cut_height),
            n,
            (0.0, c.cut_height),
            CurvatureBounds::pinched(eps, PINCHING_TOL),
            opts.pinching_grid_step.max(c.cut_height / 1000.0),
        )?)
    } else {
        None
    };
    Ok(CuspRemnant {
        cusp_index,
        copy,
        cut_height: c.cut_height,
        volume: cusp_retained_volume(c, n)?,
        tail_volume: cusp_tail_volume(c, n)?,
        tail_volume_quadrature: cusp_tail_volume_quadrature(c, n)?,
        pinching,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check<T> {
    pub value: T,
    pub required: T,
    pub verdict: Verdict,
}

/// The four properties of the assembled manifold.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ManifoldChecks {
    /// Certified `K` range over the non-core regions against `[-1 - eps, 0]`.
    pub curvature: Check<(f64, f64)>,
    pub volume: Check<f64>,
    pub w_fraction: Check<f64>,
    pub abelian_rank: Check<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ManifoldAssembly {
    pub n: usize,
    pub eps: f64,
    pub mode: AssemblyMode,
    pub core_volume: f64,
    pub copies: usize,
    pub r_eps: Option<f64>,
    pub cut_budget: Option<f64>,
    pub regions: Vec<Region>,
    pub total_volume: f64,
    /// `|sum of region volumes - sum of per-kind subtotals| / total`.
    pub additivity_rel_error: f64,
    pub w_volume: f64,
    pub w_fraction: f64,
    pub volume_bound: f64,
    pub witnesses: Vec<AbelianWitness>,
    pub checks: ManifoldChecks,
    pub pinching_verdict: Verdict,
    pub interface_verdict: Verdict,
    pub verdict: Verdict,
}

impl ManifoldAssembly {
    pub fn pinching_passed(&self) -> bool {
        self.pinching_verdict == Verdict::Pass
    }

    pub fn tubes(&self) -> impl Iterator<Item = &TubeRegion> {
        self.regions.iter().filter_map(|r| match r {
            Region::Tube(t) => Some(t.as_ref()),
            _ => None,
        })
    }

    pub fn channels(&self) -> impl Iterator<Item = &ChannelRegion> {
        self.regions.iter().filter_map(|r| match r {
            Region::Channel(c) => Some(c.as_ref()),
            _ => None,
        })
    }

    pub fn max_witness_rank(&self) -> usize {
        self.witnesses.iter().map(|w| w.rank).max().unwrap_or(0)
    }
}

/// Closes or doubles every cusp and certifies the result. With no cusps the
/// core alone is returned as a single copy.
pub fn assemble(
    core_volume: f64,
    cusps: &[FlatLattice],
    eps: f64,
    n: usize,
    mode: AssemblyMode,
    opts: &AssemblyOptions,
) -> Result<ManifoldAssembly> {
    check_dim(n)?;
    if !(core_volume > 0.0) || !core_volume.is_finite() {
        return Err(Error::InvalidArgument(format!("core volume must be > 0, got {core_volume}")));
    }
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::InvalidArgument(format!("eps must lie in (0, 1], got {eps}")));
    }
    if mode == AssemblyMode::Close && n < 4 && !opts.allow_dim3 && !cusps.is_empty() {
        return Err(Error::Precondition(
            "closing cusps in dimension 3 needs the allow_dim3 option".into(),
        ));
    }
    let copies = if cusps.is_empty() || mode == AssemblyMode::Close { 1 } else { 2 };
    let budget = if cusps.is_empty() {
        None
    } else {
        Some(opts.cut_budget.unwrap_or(eps * core_volume / (10.0 * cusps.len() as f64)))
    };
    let specs = cusps
        .iter()
        .map(|l| CuspSpec::new(l.clone(), cut_height_for_budget(l, n, budget.unwrap())?))
        .collect::<Result<Vec<_>>>()?;
    let cut = if cusps.is_empty() { None } else { Some(make_cutoff_with(eps, &opts.search())?) };

    let mut regions: Vec<Region> = (0..copies).map(|copy| Region::Core { copy, volume: core_volume }).collect();
    for copy in 0..copies {
        for (i, c) in specs.iter().enumerate() {
            regions.push(Region::CuspRemnant(remnant(c, n, i, copy, eps, opts)?));
        }
    }
    if let Some(cut) = cut.as_ref() {
        let fills: Vec<Region> = specs
            .par_iter()
            .enumerate()
            .map(|(i, c)| match mode {
                AssemblyMode::Close => close_cusp(c, cut, n, i, opts).map(|t| Region::Tube(Box::new(t))),
                AssemblyMode::Double => double_cusp(c, cut, n, i, opts).map(|ch| Region::Channel(Box::new(ch))),
            })
            .collect::<Result<_>>()?;
        regions.extend(fills);
    }

    let total_volume: f64 = regions.iter().map(Region::volume).sum();
    let subtotal = copies as f64 * core_volume
        + regions
            .iter()
            .filter(|r| !matches!(r, Region::Core { .. }))
            .map(Region::volume)
            .sum::<f64>();
    let additivity_rel_error = ((total_volume - subtotal) / total_volume).abs();
    let w_volume: f64 = regions.iter().map(Region::constant_curvature_volume).sum();
    let w_fraction = w_volume / total_volume;

    let (mut k_lo, mut k_hi) = (-1.0_f64, -1.0_f64);
    let mut pinching_ok = true;
    for cert in regions.iter().filter_map(Region::pinching) {
        k_lo = k_lo.min(cert.k_min_margined);
        k_hi = k_hi.max(cert.k_max_margined);
        pinching_ok &= cert.passed();
    }
    let interfaces_ok = regions.iter().flat_map(Region::interfaces).all(InterfaceCertificate::passed)
        && regions.iter().all(|r| match r {
            Region::Tube(t) => t.covering_index == 1,
            _ => true,
        });
    let volume_bound = opts
        .volume_bound
        .unwrap_or_else(|| default_volume_bound(core_volume, cusps, n, mode));
    let witnesses: Vec<AbelianWitness> = regions
        .iter()
        .filter_map(|r| match r {
            Region::Tube(t) => Some(t.witness.clone()),
            Region::Channel(c) => Some(c.witness.clone()),
            _ => None,
        })
        .collect();
    let rank = witnesses.iter().map(|w| w.rank).max().unwrap_or(0);
    let checks = ManifoldChecks {
        curvature: Check {
            value: (k_lo, k_hi),
            required: (-1.0 - eps, 0.0),
            verdict: Verdict::from_bool(pinching_ok),
        },
        volume: Check {
            value: total_volume,
            required: volume_bound,
            verdict: Verdict::from_bool(total_volume <= volume_bound),
        },
        w_fraction: Check {
            value: w_fraction,
            required: 1.0 - eps,
            verdict: Verdict::from_bool(w_fraction >= 1.0 - eps),
        },
        abelian_rank: Check { value: rank, required: 2, verdict: Verdict::from_bool(rank >= 2) },
    };
    let all = [
        checks.curvature.verdict,
        checks.volume.verdict,
        checks.w_fraction.verdict,
        checks.abelian_rank.verdict,
        Verdict::from_bool(interfaces_ok),
    ];
    Ok(ManifoldAssembly {
        n,
        eps,
        mode,
        core_volume,
        copies,
        r_eps: cut.map(|c| c.r_eps),
        cut_budget: budget,
        regions,
        total_volume,
        additivity_rel_error,
        w_volume,
        w_fraction,
        volume_bound,
        witnesses,
        checks,
        pinching_verdict: Verdict::from_bool(pinching_ok),
        interface_verdict: Verdict::from_bool(interfaces_ok),
        verdict: Verdict::from_bool(all.iter().all(|v| *v == Verdict::Pass)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::warp::make_cutoff;

    fn unit_lattice(m: usize, scale: f64) -> FlatLattice {
        FlatLattice::from_rows((0..m).map(|i| (0..m).map(|j| if i == j { scale } else { 0.0 }).collect()).collect())
            .unwrap()
    }

    fn skew3() -> FlatLattice {
        FlatLattice::from_rows(vec![vec![1.0, 0.0, 0.0], vec![0.3, 1.1, 0.0], vec![0.2, -0.4, 1.3]]).unwrap()
    }

    #[test]
    fn tail_volume_examples() {
        let c = CuspSpec::new(unit_lattice(2, 1.0), 0.0).unwrap();
        assert!((cusp_tail_volume(&c, 3).unwrap() - 0.5).abs() < 1e-15);
        let q = cusp_tail_volume_quadrature(&c, 3).unwrap();
        assert!((q - 0.5).abs() < 1e-9 * 0.5, "{q}");
        let c1 = CuspSpec::new(unit_lattice(3, 1.0), 1.3).unwrap();
        let c2 = CuspSpec::new(unit_lattice(3, 1.0), 2.3).unwrap();
        let ratio = cusp_tail_volume(&c2, 4).unwrap() / cusp_tail_volume(&c1, 4).unwrap();
        assert!((ratio - (-3f64).exp()).abs() < 1e-14);
        let q = cusp_tail_volume_quadrature(&c1, 4).unwrap();
        let e = cusp_tail_volume(&c1, 4).unwrap();
        assert!(((q - e) / e).abs() < 1e-9);
    }

    #[test]
    fn retained_plus_tail_is_full_cusp() {
        let c = CuspSpec::new(skew3(), 0.7).unwrap();
        let full = skew3().covolume() / 3.0;
        let sum = cusp_retained_volume(&c, 4).unwrap() + cusp_tail_volume(&c, 4).unwrap();
        assert!(((sum - full) / full).abs() < 1e-14);
    }

    #[test]
    fn cut_height_examples() {
        let z2 = unit_lattice(2, 1.0);
        assert_eq!(cut_height_for_budget(&z2, 3, 0.5).unwrap(), 0.0);
        assert_eq!(cut_height_for_budget(&z2, 3, 7.0).unwrap(), 0.0);
        let t = cut_height_for_budget(&z2, 3, 0.05).unwrap();
        assert!((t - 10f64.sqrt().ln()).abs() < 1e-14);
        let c = CuspSpec::new(z2.clone(), t).unwrap();
        assert!((cusp_tail_volume(&c, 3).unwrap() - 0.05).abs() < 1e-15);
        let t2 = cut_height_for_budget(&z2, 3, 0.025).unwrap();
        assert!((t2 - t - 2f64.ln() / 2.0).abs() < 1e-14);
        assert!(cut_height_for_budget(&z2, 3, 0.0).is_err());
    }

    #[test]
    fn solve_t0_examples() {
        let cut = make_cutoff(0.1).unwrap();
        let p = tube_profile(&cut);
        let l0 = 2.0 * PI * p.values(cut.r_eps + 1.0).unwrap().s;
        assert_eq!(solve_t0(&p, l0).unwrap().t0, cut.r_eps + 1.0);
        let sol = solve_t0(&p, PI * 7f64.exp()).unwrap();
        assert!((sol.t0 - 7.0).abs() < 1e-12);
        assert!(sol.rel_residual <= T0_TOL);
        for l in [l0 * 1.001, l0 * 3.7, l0 * 1234.5] {
            let sol = solve_t0(&p, l).unwrap();
            assert!((sol.t0 - sol.closed_form).abs() < 1e-9);
        }
        assert!(solve_t0(&p, l0 * 0.5).is_err());
        assert!(solve_t0(&WarpProfile::hyperbolic(10.0), 100.0).is_err());
    }

    #[test]
    fn close_cusp_n4() {
        let cut = make_cutoff(0.1).unwrap();
        let c = CuspSpec::new(skew3(), 0.0).unwrap();
        let tube = close_cusp(&c, &cut, 4, 0, &AssemblyOptions::default()).unwrap();
        assert!(tube.t0.t0 >= cut.r_eps + 1.0);
        assert!(tube.interface.passed(), "{}", tube.interface.max_rel_error);
        assert!(tube.pinching.passed());
        assert!(tube.volume.richardson_rel_change < 1e-8);
        assert!(tube.volume_ratio <= tube.volume_constant);
        assert_eq!(tube.witness.rank, 2);
        assert_eq!(tube.covering_index, 1);
        assert_eq!(tube.generators.unimodular_check.abs(), 1);
    }

    #[test]
    fn close_cusp_rejects_dim3_without_flag() {
        let cut = make_cutoff(0.1).unwrap();
        let c = CuspSpec::new(unit_lattice(2, 1.0), 0.0).unwrap();
        assert!(matches!(close_cusp(&c, &cut, 3, 0, &AssemblyOptions::default()), Err(Error::Precondition(_))));
        let opts = AssemblyOptions { allow_dim3: true, ..AssemblyOptions::default() };
        let tube = close_cusp(&c, &cut, 3, 0, &opts).unwrap();
        assert!(tube.interface.passed());
        assert_eq!(tube.witness.rank, 1);
    }

    #[test]
    fn wrong_rank_lattice_rejected() {
        let cut = make_cutoff(0.1).unwrap();
        let c = CuspSpec::new(unit_lattice(2, 1.0), 0.0).unwrap();
        assert!(close_cusp(&c, &cut, 4, 0, &AssemblyOptions::default()).is_err());
    }

    #[test]
    fn literal_swap_fails_interface() {
        let cut = make_cutoff(0.1).unwrap();
        let c = CuspSpec::new(skew3(), 0.0).unwrap();
        let opts = AssemblyOptions { swap_form: SwapForm::Literal, ..AssemblyOptions::default() };
        let tube = close_cusp(&c, &cut, 4, 0, &opts).unwrap();
        assert!(tube.covering_index > 1);
        assert!(!tube.interface.passed());
    }

    #[test]
    fn double_cusp_n4() {
        let cut = make_cutoff(0.1).unwrap();
        let c = CuspSpec::new(skew3(), 0.5).unwrap();
        let ch = double_cusp(&c, &cut, 4, 0, &AssemblyOptions::default()).unwrap();
        assert!(ch.mirror_rel_error < 1e-12);
        assert_eq!(ch.waist_k_u_v, 0.0);
        assert!(ch.interfaces.iter().all(InterfaceCertificate::passed));
        assert!(ch.pinching.passed());
        assert_eq!(ch.witness.rank, 3);
    }

    #[test]
    fn assemble_core_only() {
        let a = assemble(10.0, &[], 0.1, 4, AssemblyMode::Close, &AssemblyOptions::default()).unwrap();
        assert_eq!(a.total_volume, 10.0);
        assert_eq!(a.w_fraction, 1.0);
        assert!(a.pinching_passed());
        assert_eq!(a.checks.abelian_rank.verdict, Verdict::Fail);
    }

    #[test]
    fn assemble_dim3_close_gated() {
        let z2 = unit_lattice(2, 1.0);
        let r = assemble(10.0, &[z2], 0.1, 3, AssemblyMode::Close, &AssemblyOptions::default());
        assert!(matches!(r, Err(Error::Precondition(_))));
    }

    #[test]
    fn w_fraction_grows_with_core() {
        let lat = [skew3()];
        let opts = AssemblyOptions { cut_budget: Some(0.01), ..AssemblyOptions::default() };
        let mut prev = 0.0;
        for core in [1.0, 10.0, 100.0, 1000.0] {
            let a = assemble(core, &lat, 0.1, 4, AssemblyMode::Close, &opts).unwrap();
            assert!(a.w_fraction > prev);
            assert!(a.additivity_rel_error < 1e-9);
            prev = a.w_fraction;
        }
        assert!(prev > 0.999);
    }
}
