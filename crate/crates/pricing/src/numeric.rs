//! Shared numeric utilities: deterministic seeding, adaptive quadrature,
//! golden-section minimization, and normal-distribution helpers.
//!
//! All routines are deterministic; nothing here draws randomness except
//! through an explicitly provided seed.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

// ── Seeding ──────────────────────────────────────────────────────────────

/// SplitMix64 finalizer. Bijective on u64 with good avalanche behavior;
/// used to derive independent stream seeds from a base seed.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `base` and an ordered list of tags.
///
/// `derive_seed(b, &[t0, t1])` folds each tag through [`mix64`], so distinct
/// tag sequences yield independent-looking seeds and the mapping is stable
/// across platforms and releases.
pub fn derive_seed(base: u64, tags: &[u64]) -> u64 {
    let mut s = mix64(base);
    for &t in tags {
        s = mix64(s ^ mix64(t));
    }
    s
}

/// Deterministic, platform-stable RNG for a derived seed.
pub fn seeded_rng(base: u64, tags: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, tags))
}

// ── Quadrature ───────────────────────────────────────────────────────────

/// Adaptive Simpson integration of `f` over `[a, b]`.
///
/// Splits intervals until the Richardson error estimate is below `tol`
/// (distributed proportionally to interval length) or the interval budget
/// is exhausted. Integrands are assumed finite on `[a, b]`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64, max_intervals: u32) -> f64 {
    if a >= b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = simpson(a, b, fa, fm, fb);
    let mut budget = max_intervals;
    simpson_recurse(&f, a, b, fa, fm, fb, whole, tol, 50, &mut budget)
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn simpson_recurse<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    budget: &mut u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || *budget == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    *budget = budget.saturating_sub(2);
    simpson_recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, budget)
        + simpson_recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, budget)
}

// ── One-dimensional minimization ─────────────────────────────────────────

const INV_PHI: f64 = 0.618_033_988_749_894_9; // 1/golden ratio

/// Golden-section search for a minimum of `f` on `[a, b]`.
///
/// Assumes `f` is unimodal on the bracket. Returns `(x, f(x))` once the
/// bracket width falls below `tol_x` or `max_iters` shrink steps have run.
/// The effective tolerance is floored at sqrt(machine epsilon) times the
/// coordinate scale: below that width, objective comparisons are noise and
/// the bracket would drift.
pub fn golden_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol_x: f64, max_iters: u32) -> (f64, f64) {
    let tol_x = tol_x.max(1.5e-8 * (1.0 + 0.5 * (a.abs() + b.abs())));
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..max_iters {
        if (b - a).abs() <= tol_x {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Dense grid scan over `[a, b]` followed by golden-section refinement in
/// the bracketing cell. Ties on the grid resolve toward smaller `x`.
///
/// Returns the better of the refined point and the best grid point, so the
/// result never regresses on multimodal objectives.
pub fn grid_then_golden_min<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n_grid: usize) -> (f64, f64) {
    assert!(n_grid >= 2, "grid needs at least two points");
    assert!(b > a, "empty scan interval");
    let step = (b - a) / (n_grid - 1) as f64;
    let mut best_i = 0usize;
    let mut best_v = f64::INFINITY;
    for i in 0..n_grid {
        let x = a + step * i as f64;
        let v = f(x);
        if v < best_v {
            best_v = v;
            best_i = i;
        }
    }
    let lo = if best_i == 0 { a } else { a + step * (best_i - 1) as f64 };
    let hi = if best_i + 1 >= n_grid { b } else { a + step * (best_i + 1) as f64 };
    let best_x = a + step * best_i as f64;
    let (gx, gv) = golden_min(&f, lo, hi, 1e-12 * (1.0 + (b - a).abs()), 200);
    if gv < best_v {
        (gx, gv)
    } else {
        (best_x, best_v)
    }
}

/// Maximization counterpart of [`grid_then_golden_min`].
pub fn grid_then_golden_max<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n_grid: usize) -> (f64, f64) {
    let (x, v) = grid_then_golden_min(|x| -f(x), a, b, n_grid);
    (x, -v)
}

// ── Normal distribution helpers ──────────────────────────────────────────

pub const SQRT_2PI: f64 = 2.506_628_274_631_000_5;

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / SQRT_2PI
}

/// Error function, Abramowitz–Stegun 7.1.26 rational approximation.
/// Absolute error below 1.5e-7, adequate for distribution-level checks.
pub fn erf(x: f64) -> f64 {
    let sign = if x < 0.0 { -1.0 } else { 1.0 };
    let x = x.abs();
    let t = 1.0 / (1.0 + 0.327_591_1 * x);
    let poly = t
        * (0.254_829_592 + t * (-0.284_496_736 + t * (1.421_413_741 + t * (-1.453_152_027 + t * 1.061_405_429))));
    sign * (1.0 - poly * (-x * x).exp())
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2))
}

/// Standard normal quantile (Acklam's rational approximation, relative
/// error below 1.2e-9 over (0, 1)).
pub fn normal_quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "quantile argument must lie in (0,1)");
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.024_25;
    let x = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    x
}

// ── Summation ────────────────────────────────────────────────────────────

/// Fixed chunk length for deterministic reductions over sample arrays.
/// Partial sums are accumulated per chunk and then combined in index
/// order, so the result is bit-stable for a given input regardless of
/// how chunks might later be scheduled.
pub const REDUCE_CHUNK: usize = 4096;

/// Chunked deterministic sum of `f(i)` for `i` in `0..n`.
pub fn chunked_sum<F: Fn(usize) -> f64>(n: usize, f: F) -> f64 {
    let mut total = 0.0;
    let mut start = 0usize;
    while start < n {
        let end = (start + REDUCE_CHUNK).min(n);
        let mut local = 0.0;
        for i in start..end {
            local += f(i);
        }
        total += local;
        start = end;
    }
    total
}

/// Mean and population standard deviation (divisor `n`, not `n-1`).
pub fn mean_and_pop_sd(xs: &[f64]) -> (f64, f64) {
    assert!(!xs.is_empty(), "empty slice");
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}
