//! Numeric kernel for improper delay distributions.
//!
//! A [`DeltaQ`] is the cumulative delay behaviour of one outcome: the
//! probability of completing within a time bound, where the total
//! probability may fall short of one. The deficit is split into two
//! buckets: `overflow` (completes at some finite time beyond the analysis
//! grid) and `intangible` (never completes, i.e. failure).
//!
//! The representation is a dense per-bin mass vector on a uniform grid.
//! Bin `k` holds the probability of completion in `((k-1)*dt, k*dt]`, with
//! bin 0 holding atoms at t = 0, so `cdf(k)` is exactly the probability of
//! completing within `k*dt`. The overflow bucket behaves like an atom at a
//! virtual finite time strictly beyond the grid: it dominates every
//! in-grid time under max, is dominated under min, and anything convolved
//! past the grid lands in it. This keeps total mass conserved while
//! distinguishing "late" from "never".

use std::fmt::Write as _;
use thiserror::Error;

/// Tolerance for mass-conservation checks.
pub const MASS_TOLERANCE: f64 = 1e-9;

/// Bin count above which convolution switches to the FFT path.
const FFT_THRESHOLD: usize = 4096;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum DeltaQError {
    #[error("grid mismatch: {0} vs {1}")]
    GridMismatch(Grid, Grid),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("mass not conserved: sum(mass) + overflow + intangible = {total}, |total - 1| > {MASS_TOLERANCE}")]
    MassNotConserved { total: f64 },
    #[error("negative component: {0}")]
    NegativeComponent(String),
    #[error("cannot properise unconditional failure (intangible mass is 1)")]
    ProperiseFailure,
    #[error("mixture weights must be non-negative with a positive sum (got {w_left}, {w_right})")]
    BadMixtureWeights { w_left: f64, w_right: f64 },
    #[error("time {t} is outside the grid [0, {t_max}]")]
    TimeOutsideGrid { t: f64, t_max: f64 },
}

/// Uniform discretisation: `n_bins` steps of width `dt`, covering
/// `[0, n_bins * dt]`. Every `DeltaQ` combined in one computation must
/// share a grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    dt: f64,
    n_bins: usize,
}

impl Grid {
    pub fn new(dt: f64, n_bins: usize) -> Result<Self, DeltaQError> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(DeltaQError::InvalidGrid(format!("dt must be positive, got {dt}")));
        }
        if n_bins == 0 {
            return Err(DeltaQError::InvalidGrid("n_bins must be at least 1".into()));
        }
        Ok(Grid { dt, n_bins })
    }

    /// Grid over `[0, t_max]` at the default resolution `dt = t_max/1000`.
    pub fn from_t_max(t_max: f64) -> Result<Self, DeltaQError> {
        if !(t_max.is_finite() && t_max > 0.0) {
            return Err(DeltaQError::InvalidGrid(format!("t_max must be positive, got {t_max}")));
        }
        Grid::new(t_max / 1000.0, 1000)
    }

    /// Grid over `[0, t_max]` with the given step; the bin count is rounded.
    pub fn with_dt(dt: f64, t_max: f64) -> Result<Self, DeltaQError> {
        if !(t_max.is_finite() && t_max > 0.0) {
            return Err(DeltaQError::InvalidGrid(format!("t_max must be positive, got {t_max}")));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(DeltaQError::InvalidGrid(format!("dt must be positive, got {dt}")));
        }
        let n = (t_max / dt).round();
        if !(1.0..=1e8).contains(&n) {
            return Err(DeltaQError::InvalidGrid(format!(
                "t_max/dt must give between 1 and 1e8 bins, got {n}"
            )));
        }
        Grid::new(dt, n as usize)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn t_max(&self) -> f64 {
        self.dt * self.n_bins as f64
    }

    /// Lattice index for a finite time, or `None` when it lies beyond the
    /// grid (overflow). Times within rounding noise of a lattice point are
    /// snapped onto it so that atoms at exact multiples of `dt` stay exact.
    fn bin_for_time(&self, t: f64) -> Option<usize> {
        debug_assert!(t >= 0.0);
        let x = t / self.dt;
        let r = x.round();
        let k = if (x - r).abs() < 1e-9 { r } else { x.ceil() };
        if k <= self.n_bins as f64 {
            Some(k as usize)
        } else {
            None
        }
    }

    fn check(&self, other: &Grid) -> Result<(), DeltaQError> {
        if self == other {
            Ok(())
        } else {
            Err(DeltaQError::GridMismatch(*self, *other))
        }
    }
}

impl std::fmt::Display for Grid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(dt={}, n_bins={})", self.dt, self.n_bins)
    }
}

/// An improper delay distribution on a grid. Immutable after construction;
/// all operations are pure functions, so values can be shared freely
/// across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaQ {
    grid: Grid,
    /// `mass[k]` = probability of completion at lattice time `k*dt`
    /// (continuous mass in `((k-1)*dt, k*dt]` is carried by bin `k`).
    /// Length `n_bins + 1`.
    mass: Vec<f64>,
    /// Completion at a finite time beyond the grid.
    overflow: f64,
    /// Never completes.
    intangible: f64,
}

impl DeltaQ {
    /// Perfection: a unit atom at t = 0 (CDF identically 1).
    pub fn perfection(grid: Grid) -> Self {
        let mut mass = vec![0.0; grid.n_bins + 1];
        mass[0] = 1.0;
        DeltaQ { grid, mass, overflow: 0.0, intangible: 0.0 }
    }

    /// Unconditional failure: all mass intangible (CDF identically 0).
    pub fn failure(grid: Grid) -> Self {
        DeltaQ { grid, mass: vec![0.0; grid.n_bins + 1], overflow: 0.0, intangible: 1.0 }
    }

    /// A unit atom at time `t`; lands in overflow when `t` is beyond the grid.
    pub fn atom(grid: Grid, t: f64) -> Result<Self, DeltaQError> {
        if !(t.is_finite() && t >= 0.0) {
            return Err(DeltaQError::NegativeComponent(format!("atom time {t}")));
        }
        let mut mass = vec![0.0; grid.n_bins + 1];
        let mut overflow = 0.0;
        match grid.bin_for_time(t) {
            Some(k) => mass[k] = 1.0,
            None => overflow = 1.0,
        }
        Ok(DeltaQ { grid, mass, overflow, intangible: 0.0 })
    }

    /// Assemble from raw parts, validating non-negativity and mass
    /// conservation to within [`MASS_TOLERANCE`].
    pub fn from_parts(
        grid: Grid,
        mass: Vec<f64>,
        overflow: f64,
        intangible: f64,
    ) -> Result<Self, DeltaQError> {
        if mass.len() != grid.n_bins + 1 {
            return Err(DeltaQError::InvalidGrid(format!(
                "mass vector has {} entries, grid needs {}",
                mass.len(),
                grid.n_bins + 1
            )));
        }
        for (k, &m) in mass.iter().enumerate() {
            if m.is_nan() || m < 0.0 {
                return Err(DeltaQError::NegativeComponent(format!("mass[{k}] = {m}")));
            }
        }
        if overflow.is_nan() || overflow < 0.0 {
            return Err(DeltaQError::NegativeComponent(format!("overflow = {overflow}")));
        }
        if intangible.is_nan() || intangible < 0.0 {
            return Err(DeltaQError::NegativeComponent(format!("intangible = {intangible}")));
        }
        let total = mass.iter().sum::<f64>() + overflow + intangible;
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(DeltaQError::MassNotConserved { total });
        }
        Ok(DeltaQ { grid, mass, overflow, intangible })
    }

    /// Internal constructor for op results: clamps the sub-ulp negative
    /// noise that pointwise float arithmetic can leave behind.
    fn assemble(grid: Grid, mut mass: Vec<f64>, overflow: f64, intangible: f64) -> Self {
        for m in &mut mass {
            debug_assert!(*m > -1e-12, "mass component {m} too negative");
            if *m < 0.0 {
                *m = 0.0;
            }
        }
        debug_assert!(overflow > -1e-9, "overflow {overflow} too negative");
        debug_assert!(intangible > -1e-12, "intangible {intangible} too negative");
        let dq = DeltaQ {
            grid,
            mass,
            overflow: overflow.max(0.0),
            intangible: intangible.max(0.0),
        };
        debug_assert!(
            (dq.total_mass() - 1.0).abs() <= MASS_TOLERANCE,
            "mass not conserved: {}",
            dq.total_mass()
        );
        dq
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn overflow(&self) -> f64 {
        self.overflow
    }

    /// The intangible (failure) mass: one minus the limit of the CDF.
    pub fn intangible(&self) -> f64 {
        self.intangible
    }

    pub fn total_mass(&self) -> f64 {
        self.mass.iter().sum::<f64>() + self.overflow + self.intangible
    }

    /// Cumulative view: `cdf()[k]` is the probability of completing within
    /// `k*dt`. Nondecreasing, ending at `1 - intangible - overflow`.
    pub fn cdf(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.mass
            .iter()
            .map(|m| {
                acc += m;
                acc
            })
            .collect()
    }

    /// CDF linearly interpolated between bin edges; errors beyond the grid.
    pub fn cdf_at(&self, t: f64) -> Result<f64, DeltaQError> {
        if !(0.0..=self.grid.t_max() + 1e-9).contains(&t) {
            return Err(DeltaQError::TimeOutsideGrid { t, t_max: self.grid.t_max() });
        }
        let x = (t / self.grid.dt).min(self.grid.n_bins as f64);
        let lo = x.floor() as usize;
        let frac = x - lo as f64;
        let cdf = self.cdf();
        let a = cdf[lo];
        let b = if lo < self.grid.n_bins { cdf[lo + 1] } else { a };
        Ok(a + frac * (b - a))
    }

    /// Sequential composition: delays add (discrete convolution).
    pub fn convolve(&self, other: &DeltaQ) -> Result<DeltaQ, DeltaQError> {
        self.grid.check(&other.grid)?;
        let n = self.grid.n_bins;
        let mass = if n > FFT_THRESHOLD {
            convolve_fft(&self.mass, &other.mass, n + 1)
        } else {
            convolve_direct(&self.mass, &other.mass, n + 1)
        };
        self.combine_tail(other, mass, either_fails)
    }

    /// Probabilistic choice: convex combination with weights `m/(m+m')`,
    /// `m'/(m+m')` applied componentwise.
    pub fn mixture(&self, other: &DeltaQ, w_left: f64, w_right: f64) -> Result<DeltaQ, DeltaQError> {
        self.grid.check(&other.grid)?;
        if !(w_left >= 0.0 && w_right >= 0.0 && w_left + w_right > 0.0) {
            return Err(DeltaQError::BadMixtureWeights { w_left, w_right });
        }
        let total = w_left + w_right;
        let (wa, wb) = (w_left / total, w_right / total);
        let mass = self
            .mass
            .iter()
            .zip(&other.mass)
            .map(|(a, b)| wa * a + wb * b)
            .collect();
        Ok(DeltaQ::assemble(
            self.grid,
            mass,
            wa * self.overflow + wb * other.overflow,
            wa * self.intangible + wb * other.intangible,
        ))
    }

    /// All-to-finish: completion when the later of the two completes
    /// (pointwise CDF product; max of delays).
    pub fn all_to_finish(&self, other: &DeltaQ) -> Result<DeltaQ, DeltaQError> {
        self.grid.check(&other.grid)?;
        let (fa, fb) = (self.cdf(), other.cdf());
        let mut mass = Vec::with_capacity(fa.len());
        let mut prev = 0.0;
        for (a, b) in fa.iter().zip(&fb) {
            let f = a * b;
            mass.push(f - prev);
            prev = f;
        }
        self.combine_tail(other, mass, either_fails)
    }

    /// Any-to-finish: completion when the earlier of the two completes
    /// (pointwise inclusion-exclusion on CDFs; min of delays).
    pub fn any_to_finish(&self, other: &DeltaQ) -> Result<DeltaQ, DeltaQError> {
        self.grid.check(&other.grid)?;
        let (fa, fb) = (self.cdf(), other.cdf());
        let mut mass = Vec::with_capacity(fa.len());
        let mut prev = 0.0;
        for (a, b) in fa.iter().zip(&fb) {
            let f = a + b - a * b;
            mass.push(f - prev);
            prev = f;
        }
        self.combine_tail(other, mass, |ia, ib| ia * ib)
    }

    /// Finish an operation: given the in-grid mass vector and the rule for
    /// combining intangibles, rebalance so overflow absorbs exactly the
    /// tangible mass that did not land on the grid.
    fn combine_tail(
        &self,
        other: &DeltaQ,
        mass: Vec<f64>,
        intangible_of: impl Fn(f64, f64) -> f64,
    ) -> Result<DeltaQ, DeltaQError> {
        let intangible = intangible_of(self.intangible, other.intangible);
        let in_grid: f64 = mass.iter().map(|m| m.max(0.0)).sum();
        let overflow = 1.0 - intangible - in_grid;
        Ok(DeltaQ::assemble(self.grid, mass, overflow, intangible))
    }

    /// Scale the tangible mass by `1/(1 - intangible)` and drop the
    /// intangible mass to zero. Errors on unconditional failure.
    pub fn properised(&self) -> Result<DeltaQ, DeltaQError> {
        if self.intangible >= 1.0 {
            return Err(DeltaQError::ProperiseFailure);
        }
        if self.intangible == 0.0 {
            return Ok(self.clone());
        }
        let scale = 1.0 / (1.0 - self.intangible);
        let mass = self.mass.iter().map(|m| m * scale).collect();
        Ok(DeltaQ::assemble(self.grid, mass, self.overflow * scale, 0.0))
    }

    /// The timeliness partial order: `self` is at least as timely as
    /// `required` when its CDF is everywhere at or above `required`'s and
    /// it fails no more (to the left of and above it, in plot terms).
    pub fn leq(&self, required: &DeltaQ) -> Result<bool, DeltaQError> {
        self.leq_with_tolerance(required, 0.0)
    }

    /// `leq` with a slack for comparing values produced by different
    /// floating-point routes.
    pub fn leq_with_tolerance(&self, required: &DeltaQ, eps: f64) -> Result<bool, DeltaQError> {
        self.grid.check(&required.grid)?;
        let (fa, fb) = (self.cdf(), required.cdf());
        let cdf_ok = fa.iter().zip(&fb).all(|(a, b)| *a + eps >= *b);
        Ok(cdf_ok && self.intangible <= required.intangible + eps)
    }

    /// Largest absolute difference between the two CDFs over the grid.
    pub fn cdf_sup_distance(&self, other: &DeltaQ) -> Result<f64, DeltaQError> {
        self.grid.check(&other.grid)?;
        Ok(self
            .cdf()
            .iter()
            .zip(&other.cdf())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// CSV export: header `t,cdf`, one row per bin edge, then trailing
    /// comment lines for the two off-grid buckets.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,cdf\n");
        let cdf = self.cdf();
        for (k, f) in cdf.iter().enumerate() {
            let _ = writeln!(out, "{},{}", k as f64 * self.grid.dt, f);
        }
        let _ = writeln!(out, "# overflow={}", self.overflow);
        let _ = writeln!(out, "# intangible={}", self.intangible);
        out
    }
}

/// Intangible mass when both sides must complete: `1 - (1-ia)(1-ib)`,
/// computed on the failure side so tiny masses add without rounding
/// through `1 - tiny`, with the saturated cases kept exact.
fn either_fails(ia: f64, ib: f64) -> f64 {
    if ia >= 1.0 || ib >= 1.0 {
        1.0
    } else {
        ia + ib - ia * ib
    }
}

/// Plain O(n^2) convolution, truncated to `keep` coefficients; the tail is
/// reconstructed from mass conservation by the caller.
fn convolve_direct(a: &[f64], b: &[f64], keep: usize) -> Vec<f64> {
    let mut out = vec![0.0; keep];
    for (i, &ai) in a.iter().enumerate() {
        if ai == 0.0 || i >= keep {
            continue;
        }
        let top = (keep - i).min(b.len());
        for (j, &bj) in b[..top].iter().enumerate() {
            out[i + j] += ai * bj;
        }
    }
    out
}

/// FFT convolution via complex transforms, truncated to `keep` coefficients.
fn convolve_fft(a: &[f64], b: &[f64], keep: usize) -> Vec<f64> {
    use rustfft::{num_complex::Complex, FftPlanner};

    let full = a.len() + b.len() - 1;
    let size = full.next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(size);
    let ifft = planner.plan_fft_inverse(size);

    let mut fa: Vec<Complex<f64>> = a.iter().map(|&x| Complex::new(x, 0.0)).collect();
    fa.resize(size, Complex::new(0.0, 0.0));
    let mut fb: Vec<Complex<f64>> = b.iter().map(|&x| Complex::new(x, 0.0)).collect();
    fb.resize(size, Complex::new(0.0, 0.0));

    fft.process(&mut fa);
    fft.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= y;
    }
    ifft.process(&mut fa);

    let scale = 1.0 / size as f64;
    fa.iter()
        .take(keep)
        .map(|c| (c.re * scale).max(0.0))
        .collect()
}
