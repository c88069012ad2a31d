//! Adaptive cubature over rectangles, plus a one-dimensional Gauss–Kronrod companion.
//!
//! Each subrectangle is integrated with the Genz–Malik degree-7 rule and its embedded
//! degree-5 companion (17 points); the difference is the local error estimate. The
//! region with the largest estimate is bisected across its longer side until the
//! global estimate meets the tolerance or the evaluation budget runs out.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Esn2Error, Result};

const POINTS_PER_RULE: usize = 17;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CubatureControls {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_evals: usize,
}

impl Default for CubatureControls {
    fn default() -> Self {
        CubatureControls { rel_tol: 1e-6, abs_tol: 1e-12, max_evals: 1_000_000 }
    }
}

impl CubatureControls {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) || !self.rel_tol.is_finite() {
            return Err(Esn2Error::InvalidControls(format!("rel_tol must be positive, got {}", self.rel_tol)));
        }
        if !(self.abs_tol >= 0.0) || !self.abs_tol.is_finite() {
            return Err(Esn2Error::InvalidControls(format!("abs_tol must be non-negative, got {}", self.abs_tol)));
        }
        if self.max_evals < POINTS_PER_RULE {
            return Err(Esn2Error::InvalidControls(format!(
                "max_evals must allow one rule application ({POINTS_PER_RULE}), got {}",
                self.max_evals
            )));
        }
        Ok(())
    }

    /// Target error for a given estimate.
    pub fn tolerance_for(&self, value: f64) -> f64 {
        self.abs_tol.max(self.rel_tol * value.abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CubatureResult {
    pub value: f64,
    pub error_estimate: f64,
    pub evals: usize,
    pub converged: bool,
}

// Generators on [-1, 1]².
const L2: f64 = 0.358_568_582_800_318_1; // sqrt(9/70)
const L3: f64 = 0.948_683_298_050_513_8; // sqrt(9/10)
const L4: f64 = 0.948_683_298_050_513_8; // sqrt(9/10)
const L5: f64 = 0.688_247_201_611_685_3; // sqrt(9/19)

// Degree-7 weights (n = 2), per point, relative to the region volume.
const W7: [f64; 5] = [-3816.0 / 19683.0, 980.0 / 6561.0, 1020.0 / 19683.0, 200.0 / 19683.0, 6859.0 / 19683.0 / 4.0];
// Embedded degree-5 weights.
const W5: [f64; 5] = [-971.0 / 729.0, 245.0 / 486.0, 65.0 / 1458.0, 25.0 / 729.0, 0.0];

#[derive(Debug, Clone, Copy)]
struct Region {
    center: [f64; 2],
    half: [f64; 2],
    value: f64,
    error: f64,
    serial: u64,
}

impl PartialEq for Region {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Region {}

impl PartialOrd for Region {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Region {
    // Max-heap on error; among equal errors the earlier region wins.
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error).then_with(|| other.serial.cmp(&self.serial))
    }
}

fn apply_rule<F>(f: &F, center: [f64; 2], half: [f64; 2]) -> Result<(f64, f64)>
where
    F: Fn(f64, f64) -> f64,
{
    let eval = |u: f64, v: f64| -> Result<f64> {
        let x = center[0] + half[0] * u;
        let y = center[1] + half[1] * v;
        let fx = f(x, y);
        if fx.is_finite() {
            Ok(fx)
        } else {
            Err(Esn2Error::NonFiniteIntegrand { x, y })
        }
    };
    let s1 = eval(0.0, 0.0)?;
    let s2 = eval(L2, 0.0)? + eval(-L2, 0.0)? + eval(0.0, L2)? + eval(0.0, -L2)?;
    let s3 = eval(L3, 0.0)? + eval(-L3, 0.0)? + eval(0.0, L3)? + eval(0.0, -L3)?;
    let s4 = eval(L4, L4)? + eval(-L4, L4)? + eval(L4, -L4)? + eval(-L4, -L4)?;
    let s5 = eval(L5, L5)? + eval(-L5, L5)? + eval(L5, -L5)? + eval(-L5, -L5)?;
    let vol = 4.0 * half[0] * half[1];
    let i7 = vol * (W7[0] * s1 + W7[1] * s2 + W7[2] * s3 + W7[3] * s4 + W7[4] * s5);
    let i5 = vol * (W5[0] * s1 + W5[1] * s2 + W5[2] * s3 + W5[3] * s4);
    Ok((i7, (i7 - i5).abs()))
}

/// Integrates `f` over `[lower, upper]`.
pub fn integrate_2d<F>(f: F, lower: [f64; 2], upper: [f64; 2], controls: CubatureControls) -> Result<CubatureResult>
where
    F: Fn(f64, f64) -> f64,
{
    integrate_2d_grid(f, lower, upper, [1, 1], controls)
}

/// Like [`integrate_2d`] but starts from a uniform `cells[0] × cells[1]` partition, so that
/// features smaller than the box cannot hide between the rule points of one application.
pub fn integrate_2d_grid<F>(
    f: F,
    lower: [f64; 2],
    upper: [f64; 2],
    cells: [usize; 2],
    controls: CubatureControls,
) -> Result<CubatureResult>
where
    F: Fn(f64, f64) -> f64,
{
    controls.validate()?;
    if !(lower[0] < upper[0] && lower[1] < upper[1]) || lower.iter().chain(&upper).any(|v| !v.is_finite()) {
        return Err(Esn2Error::InvalidBox { lower, upper });
    }
    let n_cells = cells[0].saturating_mul(cells[1]);
    if n_cells == 0 || n_cells.saturating_mul(POINTS_PER_RULE) > controls.max_evals {
        return Err(Esn2Error::InvalidControls(format!(
            "initial partition {}x{} does not fit max_evals {}",
            cells[0], cells[1], controls.max_evals
        )));
    }

    let half = [0.5 * (upper[0] - lower[0]) / cells[0] as f64, 0.5 * (upper[1] - lower[1]) / cells[1] as f64];
    let mut heap = BinaryHeap::with_capacity(n_cells);
    let mut serial = 0u64;
    let mut total = 0.0;
    let mut total_err = 0.0;
    for i in 0..cells[0] {
        for j in 0..cells[1] {
            let center = [lower[0] + (2 * i + 1) as f64 * half[0], lower[1] + (2 * j + 1) as f64 * half[1]];
            let (value, error) = apply_rule(&f, center, half)?;
            heap.push(Region { center, half, value, error, serial });
            serial += 1;
            total += value;
            total_err += error;
        }
    }
    let mut evals = n_cells * POINTS_PER_RULE;

    loop {
        if total_err <= controls.tolerance_for(total) {
            // running sums drift under cancellation; confirm with fresh sums
            let (v, e) = resum(&heap);
            total = v;
            total_err = e;
            if total_err <= controls.tolerance_for(total) {
                break;
            }
        }
        if evals + 2 * POINTS_PER_RULE > controls.max_evals {
            break;
        }
        let Some(worst) = heap.pop() else { break };
        let axis = if worst.half[0] >= worst.half[1] { 0 } else { 1 };
        let mut half = worst.half;
        half[axis] *= 0.5;
        total -= worst.value;
        total_err -= worst.error;
        for sign in [-1.0, 1.0] {
            let mut c = worst.center;
            c[axis] += sign * half[axis];
            let (value, error) = apply_rule(&f, c, half)?;
            heap.push(Region { center: c, half, value, error, serial });
            serial += 1;
            total += value;
            total_err += error;
        }
        evals += 2 * POINTS_PER_RULE;
    }

    let (value, error_estimate) = resum(&heap);
    Ok(CubatureResult { value, error_estimate, evals, converged: error_estimate <= controls.tolerance_for(value) })
}

/// Sums in creation order so the result does not depend on heap layout.
fn resum(heap: &BinaryHeap<Region>) -> (f64, f64) {
    let mut regions: Vec<&Region> = heap.iter().collect();
    regions.sort_by_key(|r| r.serial);
    regions.iter().fold((0.0, 0.0), |(v, e), r| (v + r.value, e + r.error))
}

// Gauss–Kronrod 7/15 abscissae on [0, 1] (the rule is symmetric); odd indices are Gauss nodes.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] =
    [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];
const POINTS_PER_SEGMENT: usize = 15;

struct Segment<const N: usize> {
    center: f64,
    half: f64,
    value: [f64; N],
    error: [f64; N],
    priority: f64,
    serial: u64,
}

impl<const N: usize> PartialEq for Segment<N> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<const N: usize> Eq for Segment<N> {}

impl<const N: usize> PartialOrd for Segment<N> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<const N: usize> Ord for Segment<N> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.priority.total_cmp(&other.priority).then_with(|| other.serial.cmp(&self.serial))
    }
}

fn apply_gk<F, const N: usize>(f: &F, center: f64, half: f64) -> Result<([f64; N], [f64; N])>
where
    F: Fn(f64) -> [f64; N],
{
    let eval = |x: f64| -> Result<[f64; N]> {
        let v = f(x);
        if v.iter().all(|c| c.is_finite()) {
            Ok(v)
        } else {
            Err(Esn2Error::NonFiniteIntegrand { x, y: 0.0 })
        }
    };
    let mid = eval(center)?;
    let mut kronrod = mid.map(|v| v * WGK[7]);
    let mut gauss = mid.map(|v| v * WG[3]);
    for k in 0..7 {
        let d = half * XGK[k];
        let (lo, hi) = (eval(center - d)?, eval(center + d)?);
        for i in 0..N {
            let s = lo[i] + hi[i];
            kronrod[i] += WGK[k] * s;
            if k % 2 == 1 {
                gauss[i] += WG[k / 2] * s;
            }
        }
    }
    let value = kronrod.map(|v| v * half);
    let mut error = [0.0; N];
    for i in 0..N {
        error[i] = (value[i] - gauss[i] * half).abs();
    }
    Ok((value, error))
}

/// Adaptive Gauss–Kronrod (7/15) integration of a vector of integrands over `[lower, upper]`,
/// starting from `cells` equal segments. Component `i` is accurate to
/// `max(controls.abs_tol, floors[i], controls.rel_tol·|value|)`.
pub fn integrate_1d<F, const N: usize>(
    f: F,
    lower: f64,
    upper: f64,
    cells: usize,
    floors: [f64; N],
    controls: CubatureControls,
) -> Result<[CubatureResult; N]>
where
    F: Fn(f64) -> [f64; N],
{
    controls.validate()?;
    if !(lower < upper) || !lower.is_finite() || !upper.is_finite() {
        return Err(Esn2Error::InvalidBox { lower: [lower, 0.0], upper: [upper, 0.0] });
    }
    if cells == 0 || cells.saturating_mul(POINTS_PER_SEGMENT) > controls.max_evals {
        return Err(Esn2Error::InvalidControls(format!(
            "initial partition of {cells} segments does not fit max_evals {}",
            controls.max_evals
        )));
    }
    let tolerance = |total: &[f64; N]| -> [f64; N] {
        let mut t = [0.0; N];
        for i in 0..N {
            t[i] = controls.abs_tol.max(floors[i]).max(controls.rel_tol * total[i].abs());
        }
        t
    };

    let half = 0.5 * (upper - lower) / cells as f64;
    let mut pieces = Vec::with_capacity(cells);
    for k in 0..cells {
        let center = lower + (2 * k + 1) as f64 * half;
        let (value, error) = apply_gk(&f, center, half)?;
        pieces.push((center, value, error));
    }
    let sum = |rows: &mut dyn Iterator<Item = ([f64; N], [f64; N])>| {
        rows.fold(([0.0; N], [0.0; N]), |(mut v, mut e), (rv, re)| {
            for i in 0..N {
                v[i] += rv[i];
                e[i] += re[i];
            }
            (v, e)
        })
    };
    let (initial, _) = sum(&mut pieces.iter().map(|p| (p.1, p.2)));
    // priorities are measured against the tolerance implied by the first pass
    let scale = tolerance(&initial).map(|t| if t > 0.0 { t } else { f64::MIN_POSITIVE });
    let priority = |error: &[f64; N]| (0..N).map(|i| error[i] / scale[i]).fold(0.0, f64::max);

    let mut heap = BinaryHeap::with_capacity(cells);
    let mut serial = 0u64;
    for (center, value, error) in pieces {
        heap.push(Segment { center, half, value, error, priority: priority(&error), serial });
        serial += 1;
    }
    let mut evals = cells * POINTS_PER_SEGMENT;
    let totals = |heap: &BinaryHeap<Segment<N>>| {
        let mut segs: Vec<&Segment<N>> = heap.iter().collect();
        segs.sort_by_key(|s| s.serial);
        sum(&mut segs.iter().map(|s| (s.value, s.error)))
    };
    let within = |v: &[f64; N], e: &[f64; N]| {
        let t = tolerance(v);
        (0..N).all(|i| e[i] <= t[i])
    };

    let (mut v, mut e) = totals(&heap);
    loop {
        if within(&v, &e) {
            (v, e) = totals(&heap);
            if within(&v, &e) {
                break;
            }
        }
        if evals + 2 * POINTS_PER_SEGMENT > controls.max_evals {
            break;
        }
        let Some(worst) = heap.pop() else { break };
        for i in 0..N {
            v[i] -= worst.value[i];
            e[i] -= worst.error[i];
        }
        let half = 0.5 * worst.half;
        for sign in [-1.0, 1.0] {
            let center = worst.center + sign * half;
            let (value, error) = apply_gk(&f, center, half)?;
            for i in 0..N {
                v[i] += value[i];
                e[i] += error[i];
            }
            heap.push(Segment { center, half, value, error, priority: priority(&error), serial });
            serial += 1;
        }
        evals += 2 * POINTS_PER_SEGMENT;
    }

    let (value, error) = totals(&heap);
    let tol = tolerance(&value);
    let mut out = [CubatureResult { value: 0.0, error_estimate: 0.0, evals, converged: true }; N];
    for i in 0..N {
        out[i] = CubatureResult { value: value[i], error_estimate: error[i], evals, converged: error[i] <= tol[i] };
    }
    Ok(out)
}
