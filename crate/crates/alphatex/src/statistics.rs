//! Index sets for the covariance models, the statistic vector computation
//! (periodic or windowed), and the closed-form statistic counts.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Texture;
use crate::representation::{compute_representation, phase_grid, RectifiedStack};
use crate::wavelets::FilterBank;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    S,
    I,
    L,
    C,
    CReduced,
}

impl Variant {
    pub fn channels(self) -> usize {
        match self {
            Variant::S | Variant::I | Variant::L => 1,
            Variant::C | Variant::CReduced => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    Periodic,
    Windowed,
}

/// Spatial shifts of dyadic moduli aligned with the wavelet orientations:
/// {0} plus round(2^j (cos t, sin t)) over the full turn, deduplicated.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShiftSet {
    pub shifts: Vec<(i32, i32)>,
}

pub fn build_shift_set(j_max: usize, l_count: usize) -> ShiftSet {
    let mut shifts = vec![(0i32, 0i32)];
    for j in 0..j_max {
        let r = (1u64 << j) as f64;
        for k in 0..2 * l_count {
            let t = k as f64 * std::f64::consts::PI / l_count as f64;
            let tau = ((r * t.cos()).round() as i32, (r * t.sin()).round() as i32);
            if !shifts.contains(&tau) {
                shifts.push(tau);
            }
        }
    }
    ShiftSet { shifts }
}

/// One representation index (j, theta, alpha[, c]), stored as grid indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GammaIdx {
    pub c: usize,
    pub j: usize,
    pub l: usize,
    pub a: usize,
}

impl GammaIdx {
    /// Tie-break key for the canonical dedup rule: (theta, alpha, c).
    fn lex_key(&self) -> (usize, usize, usize) {
        (self.l, self.a, self.c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CovEntry {
    pub g1: GammaIdx,
    pub g2: GammaIdx,
    pub tau: (i32, i32),
}

/// The index set Upsilon of one model variant plus the low-pass covariances.
#[derive(Debug, Clone)]
pub struct IndexSet {
    pub variant: Variant,
    pub j_max: usize,
    pub l_count: usize,
    pub alpha_count: usize,
    pub channels: usize,
    pub entries: Vec<CovEntry>,
    /// (channel, tau) pairs for the uncentered low-pass covariances.
    pub lowpass_entries: Vec<(usize, (i32, i32))>,
    pub shift_set: ShiftSet,
}

impl IndexSet {
    #[inline]
    pub fn plane_index(&self, g: GammaIdx) -> usize {
        ((g.c * self.j_max + g.j) * self.l_count + g.l) * self.alpha_count + g.a
    }

    pub fn plane_count(&self) -> usize {
        self.channels * self.j_max * self.l_count * self.alpha_count
    }

    pub fn len_means(&self) -> usize {
        self.plane_count()
    }

    pub fn len_total(&self) -> usize {
        self.len_means() + self.entries.len() + self.lowpass_entries.len()
    }
}

/// Checks the Table-1 constraints of a variant plus the canonical scale order
/// j2 >= j1.
pub fn validate_entry(variant: Variant, e: &CovEntry, j_max: usize) -> bool {
    let (g1, g2) = (&e.g1, &e.g2);
    if g1.j >= j_max || g2.j >= j_max || g2.j < g1.j {
        return false;
    }
    let gray = g1.c == 0 && g2.c == 0;
    match variant {
        Variant::S => {
            gray && g2.j - g1.j <= 1
                && g2.a == 0
                && (e.tau == (0, 0) || (g1.j == g2.j && g1.l == g2.l))
        }
        Variant::I => gray && g2.a == 0,
        Variant::L => gray,
        Variant::C => g1.c < 3 && g2.c < 3 && g2.a == 0,
        Variant::CReduced => {
            g1.c < 3 && g2.c < 3 && g2.a == 0 && (e.tau == (0, 0) || g1.c == g2.c)
        }
    }
}

fn swapped(e: &CovEntry) -> CovEntry {
    CovEntry {
        g1: e.g2,
        g2: e.g1,
        tau: e.tau,
    }
}

/// Canonical dedup: at j1 == j2 and tau == 0, C(g1, g2, 0) == C(g2, g1, 0),
/// so the entry whose swap is also a legal member keeps only the
/// lexicographically smaller (theta, alpha, c) first.
fn dropped_by_dedup(variant: Variant, e: &CovEntry, j_max: usize) -> bool {
    e.g1.j == e.g2.j
        && e.tau == (0, 0)
        && e.g2.lex_key() < e.g1.lex_key()
        && validate_entry(variant, &swapped(e), j_max)
}

/// Enumerates Upsilon for a variant. Entries are emitted with tau innermost
/// so that all shifts of one (gamma, gamma') pair are contiguous.
pub fn build_index_set(
    variant: Variant,
    j_max: usize,
    l_count: usize,
    alpha_count: usize,
) -> Result<IndexSet> {
    if j_max < 1 || l_count < 1 || alpha_count < 1 {
        return Err(Error::InvalidConfig("index set parameters must be positive".into()));
    }
    let shift_set = build_shift_set(j_max, l_count);
    let channels = variant.channels();
    let mut entries = Vec::new();
    for c1 in 0..channels {
        for c2 in 0..channels {
            for j1 in 0..j_max {
                for j2 in j1..j_max {
                    for l1 in 0..l_count {
                        for l2 in 0..l_count {
                            for a1 in 0..alpha_count {
                                let a2_range = match variant {
                                    Variant::L => alpha_count,
                                    _ => 1,
                                };
                                for a2 in 0..a2_range {
                                    for &tau in &shift_set.shifts {
                                        let e = CovEntry {
                                            g1: GammaIdx { c: c1, j: j1, l: l1, a: a1 },
                                            g2: GammaIdx { c: c2, j: j2, l: l2, a: a2 },
                                            tau,
                                        };
                                        if validate_entry(variant, &e, j_max)
                                            && !dropped_by_dedup(variant, &e, j_max)
                                        {
                                            entries.push(e);
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    let lowpass_entries: Vec<(usize, (i32, i32))> = (0..channels)
        .flat_map(|c| shift_set.shifts.iter().map(move |&t| (c, t)))
        .collect();
    Ok(IndexSet {
        variant,
        j_max,
        l_count,
        alpha_count,
        channels,
        entries,
        lowpass_entries,
        shift_set,
    })
}

/// Observation spatial averages used for centering: full-grid per plane, and
/// per interior window level when the windowed boundary mode is in use.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObsMeans {
    pub full: Vec<f64>,
    /// windowed[jm][plane] for jm in 0..j_max.
    pub windowed: Option<Vec<Vec<f64>>>,
}

#[inline]
fn window_bounds(n: usize, level: usize) -> (usize, usize) {
    let m = 1usize << level;
    (m, n - m)
}

fn window_mean(plane: &[f64], n: usize, level: usize) -> f64 {
    let (lo, hi) = window_bounds(n, level);
    let mut acc = 0.0;
    for y in lo..hi {
        acc += plane[y * n + lo..y * n + hi].iter().sum::<f64>();
    }
    acc / ((hi - lo) * (hi - lo)) as f64
}

pub fn compute_obs_means(stack: &RectifiedStack, boundary: Boundary) -> ObsMeans {
    let n = stack.n;
    let full: Vec<f64> = stack
        .planes
        .iter()
        .map(|p| p.iter().sum::<f64>() / (n * n) as f64)
        .collect();
    let windowed = match boundary {
        Boundary::Periodic => None,
        Boundary::Windowed => Some(
            (0..stack.j_max)
                .map(|jm| {
                    stack
                        .planes
                        .iter()
                        .map(|p| window_mean(p, n, jm))
                        .collect()
                })
                .collect(),
        ),
    };
    ObsMeans { full, windowed }
}

/// Flat statistic vector: [first-order means | covariances over Upsilon |
/// low-pass covariances].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StatisticsVector {
    pub values: Vec<f64>,
    pub n_means: usize,
    pub n_cov: usize,
    pub n_lowpass: usize,
}

impl StatisticsVector {
    pub fn same_layout(&self, other: &Self) -> bool {
        self.n_means == other.n_means
            && self.n_cov == other.n_cov
            && self.n_lowpass == other.n_lowpass
    }
}

/// Euclidean norm of the difference of two statistic vectors.
pub fn statistics_distance(a: &StatisticsVector, b: &StatisticsVector) -> Result<f64> {
    if !a.same_layout(b) {
        return Err(Error::LayoutMismatch);
    }
    Ok(a.values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt())
}

// ---------------------------------------------------------------------------
// Shifted-product kernels (periodic).

/// sum_u a(u) * b(u - tau)
pub(crate) fn shifted_dot(a: &[f64], b: &[f64], n: usize, tau: (i32, i32)) -> f64 {
    let (dx, dy) = tau;
    let d = dx.rem_euclid(n as i32) as usize;
    let mut acc = 0.0;
    for y in 0..n {
        let sy = (y as i32 - dy).rem_euclid(n as i32) as usize;
        let ra = &a[y * n..(y + 1) * n];
        let rb = &b[sy * n..(sy + 1) * n];
        // b index (x - d) mod n split into two contiguous segments.
        for (va, vb) in ra[..d].iter().zip(&rb[n - d..]) {
            acc += va * vb;
        }
        for (va, vb) in ra[d..].iter().zip(&rb[..n - d]) {
            acc += va * vb;
        }
    }
    acc
}

/// dst(u) += c * src(u - tau)
pub(crate) fn shifted_axpy(dst: &mut [f64], src: &[f64], n: usize, tau: (i32, i32), c: f64) {
    let (dx, dy) = tau;
    let d = dx.rem_euclid(n as i32) as usize;
    for y in 0..n {
        let sy = (y as i32 - dy).rem_euclid(n as i32) as usize;
        let rd = &mut dst[y * n..(y + 1) * n];
        let rs = &src[sy * n..(sy + 1) * n];
        for (vd, vs) in rd[..d].iter_mut().zip(&rs[n - d..]) {
            *vd += c * vs;
        }
        for (vd, vs) in rd[d..].iter_mut().zip(&rs[..n - d]) {
            *vd += c * vs;
        }
    }
}

// ---------------------------------------------------------------------------
// Windowed kernels. The indicator is evaluated at the periodically wrapped
// positions, exactly as the averaging formula is written.

fn windowed_cov_sum(
    a: &[f64],
    b: &[f64],
    n: usize,
    tau: (i32, i32),
    level: usize,
    mu_a: f64,
    mu_b: f64,
) -> f64 {
    let (lo, hi) = window_bounds(n, level);
    let (dx, dy) = tau;
    let mut acc = 0.0;
    for y in lo..hi {
        let sy = (y as i32 - dy).rem_euclid(n as i32) as usize;
        if sy < lo || sy >= hi {
            continue;
        }
        for x in lo..hi {
            let sx = (x as i32 - dx).rem_euclid(n as i32) as usize;
            if sx < lo || sx >= hi {
                continue;
            }
            acc += (a[y * n + x] - mu_a) * (b[sy * n + sx] - mu_b);
        }
    }
    acc
}

#[allow(clippy::too_many_arguments)]
fn windowed_cov_backward(
    a: &[f64],
    b: &[f64],
    ga: &mut [f64],
    gb: &mut [f64],
    n: usize,
    tau: (i32, i32),
    level: usize,
    mu_a: f64,
    mu_b: f64,
    coeff: f64,
) {
    let (lo, hi) = window_bounds(n, level);
    let (dx, dy) = tau;
    for y in lo..hi {
        let sy = (y as i32 - dy).rem_euclid(n as i32) as usize;
        if sy < lo || sy >= hi {
            continue;
        }
        for x in lo..hi {
            let sx = (x as i32 - dx).rem_euclid(n as i32) as usize;
            if sx < lo || sx >= hi {
                continue;
            }
            ga[y * n + x] += coeff * (b[sy * n + sx] - mu_b);
            gb[sy * n + sx] += coeff * (a[y * n + x] - mu_a);
        }
    }
}

// ---------------------------------------------------------------------------
// Forward / backward statistics engine shared by compute_statistics and the
// synthesis loss.

pub(crate) fn forward_stats(
    stack: &RectifiedStack,
    set: &IndexSet,
    obs: &ObsMeans,
    boundary: Boundary,
) -> StatisticsVector {
    let n = stack.n;
    let nn = (n * n) as f64;
    let mut values = Vec::with_capacity(set.len_total());
    // First-order means of the candidate itself.
    match boundary {
        Boundary::Periodic => {
            for p in &stack.planes {
                values.push(p.iter().sum::<f64>() / nn);
            }
        }
        Boundary::Windowed => {
            for (idx, p) in stack.planes.iter().enumerate() {
                let j = plane_scale(set, idx);
                values.push(window_mean(p, n, j));
            }
        }
    }
    // Second-order covariances.
    let sums: Vec<f64> = stack.planes.iter().map(|p| p.iter().sum()).collect();
    for e in &set.entries {
        let p1 = set.plane_index(e.g1);
        let p2 = set.plane_index(e.g2);
        let v = match boundary {
            Boundary::Periodic => {
                let mu1 = obs.full[p1];
                let mu2 = obs.full[p2];
                (shifted_dot(&stack.planes[p1], &stack.planes[p2], n, e.tau)
                    - mu2 * sums[p1]
                    - mu1 * sums[p2]
                    + nn * mu1 * mu2)
                    / nn
            }
            Boundary::Windowed => {
                let jm = e.g1.j.max(e.g2.j);
                let w = obs.windowed.as_ref().expect("windowed means");
                let (lo, hi) = window_bounds(n, jm);
                let norm = ((hi - lo) * (hi - lo)) as f64;
                windowed_cov_sum(
                    &stack.planes[p1],
                    &stack.planes[p2],
                    n,
                    e.tau,
                    jm,
                    w[jm][p1],
                    w[jm][p2],
                ) / norm
            }
        };
        values.push(v);
    }
    // Low-pass covariances (uncentered).
    for &(c, tau) in &set.lowpass_entries {
        let lp = &stack.low_pass[c];
        let v = match boundary {
            Boundary::Periodic => shifted_dot(lp, lp, n, tau) / nn,
            Boundary::Windowed => {
                let (lo, hi) = window_bounds(n, set.j_max);
                let norm = ((hi - lo) * (hi - lo)) as f64;
                windowed_cov_sum(lp, lp, n, tau, set.j_max, 0.0, 0.0) / norm
            }
        };
        values.push(v);
    }
    StatisticsVector {
        values,
        n_means: set.len_means(),
        n_cov: set.entries.len(),
        n_lowpass: set.lowpass_entries.len(),
    }
}

fn plane_scale(set: &IndexSet, plane_idx: usize) -> usize {
    (plane_idx / (set.l_count * set.alpha_count)) % set.j_max
}

/// Distributes dL/dvalue back onto the rectified planes and low-pass planes.
pub(crate) fn backward_stats(
    stack: &RectifiedStack,
    set: &IndexSet,
    obs: &ObsMeans,
    boundary: Boundary,
    residual: &[f64],
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let n = stack.n;
    let nn = (n * n) as f64;
    let mut grads: Vec<Vec<f64>> = stack.planes.iter().map(|_| vec![0.0; n * n]).collect();
    let mut bias = vec![0.0f64; stack.planes.len()];
    let mut lp_grads: Vec<Vec<f64>> = stack.low_pass.iter().map(|_| vec![0.0; n * n]).collect();

    // First-order means.
    for (idx, r) in residual[..set.len_means()].iter().enumerate() {
        if *r == 0.0 {
            continue;
        }
        match boundary {
            Boundary::Periodic => bias[idx] += r / nn,
            Boundary::Windowed => {
                let j = plane_scale(set, idx);
                let (lo, hi) = window_bounds(n, j);
                let c = r / ((hi - lo) * (hi - lo)) as f64;
                let g = &mut grads[idx];
                for y in lo..hi {
                    for v in &mut g[y * n + lo..y * n + hi] {
                        *v += c;
                    }
                }
            }
        }
    }

    // Covariances.
    let cov_res = &residual[set.len_means()..set.len_means() + set.entries.len()];
    for (e, &r) in set.entries.iter().zip(cov_res) {
        if r == 0.0 {
            continue;
        }
        let p1 = set.plane_index(e.g1);
        let p2 = set.plane_index(e.g2);
        match boundary {
            Boundary::Periodic => {
                let mu1 = obs.full[p1];
                let mu2 = obs.full[p2];
                let c = r / nn;
                if p1 == p2 {
                    let (head, tail) = grads.split_at_mut(p1 + 1);
                    let g = &mut head[p1];
                    let _ = tail;
                    shifted_axpy(g, &stack.planes[p2], n, e.tau, c);
                    shifted_axpy(g, &stack.planes[p1], n, (-e.tau.0, -e.tau.1), c);
                    bias[p1] -= c * (mu1 + mu2);
                } else {
                    shifted_axpy(&mut grads[p1], &stack.planes[p2], n, e.tau, c);
                    bias[p1] -= c * mu2;
                    shifted_axpy(&mut grads[p2], &stack.planes[p1], n, (-e.tau.0, -e.tau.1), c);
                    bias[p2] -= c * mu1;
                }
            }
            Boundary::Windowed => {
                let jm = e.g1.j.max(e.g2.j);
                let w = obs.windowed.as_ref().expect("windowed means");
                let (lo, hi) = window_bounds(n, jm);
                let c = r / ((hi - lo) * (hi - lo)) as f64;
                if p1 == p2 {
                    // Same plane in both roles; accumulate through a scratch
                    // to keep the two contributions additive.
                    let mut scratch = vec![0.0; n * n];
                    windowed_cov_backward(
                        &stack.planes[p1],
                        &stack.planes[p2],
                        &mut scratch,
                        &mut grads[p1],
                        n,
                        e.tau,
                        jm,
                        w[jm][p1],
                        w[jm][p2],
                        c,
                    );
                    for (g, s) in grads[p1].iter_mut().zip(&scratch) {
                        *g += s;
                    }
                } else {
                    let (a, b) = if p1 < p2 {
                        let (x, y) = grads.split_at_mut(p2);
                        (&mut x[p1], &mut y[0])
                    } else {
                        let (x, y) = grads.split_at_mut(p1);
                        (&mut y[0], &mut x[p2])
                    };
                    windowed_cov_backward(
                        &stack.planes[p1],
                        &stack.planes[p2],
                        a,
                        b,
                        n,
                        e.tau,
                        jm,
                        w[jm][p1],
                        w[jm][p2],
                        c,
                    );
                }
            }
        }
    }
    for (g, b) in grads.iter_mut().zip(&bias) {
        if *b != 0.0 {
            for v in g.iter_mut() {
                *v += b;
            }
        }
    }

    // Low-pass covariances.
    let lp_res = &residual[set.len_means() + set.entries.len()..];
    for (&(c, tau), &r) in set.lowpass_entries.iter().zip(lp_res) {
        if r == 0.0 {
            continue;
        }
        let lp = &stack.low_pass[c];
        match boundary {
            Boundary::Periodic => {
                let k = r / nn;
                shifted_axpy(&mut lp_grads[c], lp, n, tau, k);
                shifted_axpy(&mut lp_grads[c], lp, n, (-tau.0, -tau.1), k);
            }
            Boundary::Windowed => {
                let (lo, hi) = window_bounds(n, set.j_max);
                let k = r / ((hi - lo) * (hi - lo)) as f64;
                let mut scratch = vec![0.0; n * n];
                windowed_cov_backward(
                    lp,
                    lp,
                    &mut scratch,
                    &mut lp_grads[c],
                    n,
                    tau,
                    set.j_max,
                    0.0,
                    0.0,
                    k,
                );
                for (g, s) in lp_grads[c].iter_mut().zip(&scratch) {
                    *g += s;
                }
            }
        }
    }

    (grads, lp_grads)
}

/// Computes the statistic vector of an image. `means` carries the observation
/// averages for centering; when absent this is the observation pass and the
/// image's own averages are used.
pub fn compute_statistics(
    x: &Texture,
    bank: &FilterBank,
    set: &IndexSet,
    means: Option<&ObsMeans>,
    boundary: Boundary,
) -> Result<StatisticsVector> {
    if x.channel_count() != set.channels {
        return Err(Error::SizeMismatch(format!(
            "image has {} channels but the index set expects {}",
            x.channel_count(),
            set.channels
        )));
    }
    if boundary == Boundary::Windowed && bank.n() <= (1 << (set.j_max + 1)) + 1 {
        return Err(Error::InvalidConfig(
            "windowed mode requires n > 2^(j_max+1)+1".into(),
        ));
    }
    let alphas = phase_grid(set.alpha_count);
    let stack = compute_representation(x, bank, &alphas, None)?;
    let own_means;
    let obs = match means {
        Some(m) => m,
        None => {
            own_means = compute_obs_means(&stack, boundary);
            &own_means
        }
    };
    let v = forward_stats(&stack, set, obs, boundary);
    if v.values.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("statistics"));
    }
    Ok(v)
}

/// A single raw covariance between two real planes (used by property tests
/// and verification identities).
pub fn covariance_entry(
    a: &[f64],
    b: &[f64],
    n: usize,
    tau: (i32, i32),
    mu_a: f64,
    mu_b: f64,
) -> f64 {
    let sa: f64 = a.iter().sum();
    let sb: f64 = b.iter().sum();
    let nn = (n * n) as f64;
    (shifted_dot(a, b, n, tau) - mu_b * sa - mu_a * sb + nn * mu_a * mu_b) / nn
}

// ---------------------------------------------------------------------------
// Closed-form statistic counts.

/// Upper bound on the number of second-order statistics of an ALPHA variant
/// (excludes first-order means and low-pass terms).
pub fn count_alpha_statistics(
    variant: Variant,
    j: u64,
    l: u64,
    a: u64,
    shift_count: u64,
) -> u64 {
    match variant {
        Variant::S => (2 * j - 1) * l * l * a + j * l * a * shift_count,
        Variant::I => j * (j + 1) / 2 * l * l * a * shift_count,
        Variant::L => j * (j + 1) / 2 * l * l * a * a * shift_count,
        Variant::C => 9 * j * (j + 1) / 2 * l * l * a * shift_count,
        Variant::CReduced => j * (j + 1) / 2 * l * l * a * (9 + 3 * (shift_count - 1)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PsMode {
    Gray,
    Color,
}

/// Per-category statistic counts of the classical steerable-pyramid texture
/// model, with the total and the subtotal excluding the two categories that
/// exist only in the reference software.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PsBreakdown {
    pub categories: Vec<(String, u64)>,
    pub total: u64,
    pub paper_counted: u64,
}

pub fn count_ps_statistics(mode: PsMode, j: u64, l: u64, delta: u64) -> PsBreakdown {
    let na = 2 * delta + 1;
    let na2 = na * na;
    let (categories, software_only): (Vec<(String, u64)>, u64) = match mode {
        PsMode::Gray => {
            let marginal = 6;
            let marginal_wavelet = 2 * (j + 1) + 1;
            let autocorr = (j + 1) * (na2 + 1) / 2;
            let autocorr_mag = j * l * (na2 + 1) / 2 + j * l * (l - 1) / 2 + (j - 1) * l * l;
            let mean_mag = j * l + 2;
            let cross_phase = 2 * (j - 1) * l * l + j * l * l;
            (
                vec![
                    ("marginal".into(), marginal),
                    ("marginal-wavelet".into(), marginal_wavelet),
                    ("autocorrelation".into(), autocorr),
                    ("autocorrelation-magnitude".into(), autocorr_mag),
                    ("mean-magnitude".into(), mean_mag),
                    ("cross-scale-phase".into(), cross_phase),
                ],
                mean_mag + j * l * l,
            )
        }
        PsMode::Color => {
            let marginal = 6 * 3 + 3 * 4;
            let marginal_wavelet = 6 * (j + 1) + 9;
            let autocorr = 3 * (j + 2) * (na2 + 1) / 2;
            let autocorr_mag =
                3 * j * l * (na2 + 1) / 2 + j * (3 * l) * (3 * l - 1) / 2 + (j - 1) * 9 * l * l;
            let mean_mag = 3 * (j * l + 2);
            let cross_phase = j * 9 * l * l + (j - 1) * (3 * l) * (6 * l);
            (
                vec![
                    ("marginal".into(), marginal),
                    ("marginal-wavelet".into(), marginal_wavelet),
                    ("autocorrelation".into(), autocorr),
                    ("autocorrelation-magnitude".into(), autocorr_mag),
                    ("mean-magnitude".into(), mean_mag),
                    ("cross-scale-phase".into(), cross_phase),
                ],
                mean_mag + j * 9 * l * l,
            )
        }
    };
    let total: u64 = categories.iter().map(|(_, v)| v).sum();
    PsBreakdown {
        categories,
        total,
        paper_counted: total - software_only,
    }
}

// ---------------------------------------------------------------------------
// Statistic vector export descriptors.

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StatDescriptor {
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub j: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_idx: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_idx: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub j2: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta2_idx: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha2_idx: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c2: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<[i32; 2]>,
}

/// One descriptor per position of the flat statistics vector.
pub fn index_map(set: &IndexSet) -> Vec<StatDescriptor> {
    let mut out = Vec::with_capacity(set.len_total());
    for c in 0..set.channels {
        for j in 0..set.j_max {
            for l in 0..set.l_count {
                for a in 0..set.alpha_count {
                    out.push(StatDescriptor {
                        kind: "mean".into(),
                        j: Some(j),
                        theta_idx: Some(l),
                        alpha_idx: Some(a),
                        c: Some(c),
                        j2: None,
                        theta2_idx: None,
                        alpha2_idx: None,
                        c2: None,
                        tau: None,
                    });
                }
            }
        }
    }
    for e in &set.entries {
        out.push(StatDescriptor {
            kind: "cov".into(),
            j: Some(e.g1.j),
            theta_idx: Some(e.g1.l),
            alpha_idx: Some(e.g1.a),
            c: Some(e.g1.c),
            j2: Some(e.g2.j),
            theta2_idx: Some(e.g2.l),
            alpha2_idx: Some(e.g2.a),
            c2: Some(e.g2.c),
            tau: Some([e.tau.0, e.tau.1]),
        });
    }
    for &(c, tau) in &set.lowpass_entries {
        out.push(StatDescriptor {
            kind: "lowpass".into(),
            j: None,
            theta_idx: None,
            alpha_idx: None,
            c: Some(c),
            j2: None,
            theta2_idx: None,
            alpha2_idx: None,
            c2: None,
            tau: Some([tau.0, tau.1]),
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::{sample_gaussian_image, Seed};
    use crate::wavelets::{build_filter_bank, WaveletFamily};
    use std::collections::HashSet;

    #[test]
    fn shift_set_small_cases() {
        let s = build_shift_set(1, 1);
        assert_eq!(s.shifts, vec![(0, 0), (1, 0), (-1, 0)]);
        let s = build_shift_set(2, 2);
        assert_eq!(s.shifts.len(), 9);
        assert!(s.shifts.contains(&(0, 2)));
        assert!(s.shifts.contains(&(-2, 0)));
    }

    #[test]
    fn shift_set_default_configuration() {
        // Nearest-integer rounding collapses the j=0 and j=1 diagonals onto
        // (+-1, +-1), leaving 37 distinct shifts for J=5, L=4. This is the
        // shift count that reproduces the reported model sizes.
        let s = build_shift_set(5, 4);
        assert_eq!(s.shifts.len(), 37);
        assert_eq!(s.shifts[0], (0, 0));
        let set: HashSet<_> = s.shifts.iter().collect();
        assert_eq!(set.len(), s.shifts.len());
        // Symmetric: -tau present for every tau.
        for &(x, y) in &s.shifts {
            assert!(set.contains(&(-x, -y)));
        }
    }

    #[test]
    fn built_set_sizes_match_reported_model_sizes() {
        // +-15% bands around 3.5k / 35k / 142k / 320k / 113k.
        let sizes = [
            (Variant::S, 3_500.0),
            (Variant::I, 35_000.0),
            (Variant::L, 142_000.0),
            (Variant::C, 320_000.0),
            (Variant::CReduced, 113_000.0),
        ];
        for (variant, reported) in sizes {
            let set = build_index_set(variant, 5, 4, 4).unwrap();
            let got = set.entries.len() as f64;
            assert!(
                (got - reported).abs() <= 0.15 * reported,
                "{variant:?}: built {got} vs reported {reported}"
            );
            // Upper-bound property against the closed-form count.
            let bound = count_alpha_statistics(
                variant,
                5,
                4,
                4,
                set.shift_set.shifts.len() as u64,
            );
            assert!(set.entries.len() as u64 <= bound);
        }
    }

    #[test]
    fn alpha_i_built_set_within_spec_band() {
        let set = build_index_set(Variant::I, 5, 4, 4).unwrap();
        assert!(set.entries.len() >= 33_000 && set.entries.len() <= 39_360);
    }

    #[test]
    fn count_formulas() {
        assert_eq!(count_alpha_statistics(Variant::I, 5, 4, 4, 41), 39_360);
        assert_eq!(count_alpha_statistics(Variant::L, 5, 4, 4, 41), 157_440);
        assert_eq!(count_alpha_statistics(Variant::C, 5, 4, 4, 41), 354_240);
        assert_eq!(count_alpha_statistics(Variant::S, 5, 4, 4, 41), 3_856);
    }

    #[test]
    fn ps_counts_reproduce_reported_totals() {
        let g = count_ps_statistics(PsMode::Gray, 4, 4, 3);
        assert_eq!(g.total, 792);
        assert_eq!(g.paper_counted, 710);
        let g2 = count_ps_statistics(PsMode::Gray, 5, 8, 4);
        assert_eq!(g2.total, 3_175);
        let c = count_ps_statistics(PsMode::Color, 5, 8, 4);
        assert_eq!(c.total, 17_154);
    }

    #[test]
    fn exhaustive_membership_small_grid() {
        // Every generated entry passes the validator; every legal triple not
        // in the set is excluded only by the canonical dedup rule.
        let (j_max, l_count, a_count) = (2usize, 2usize, 2usize);
        for variant in [Variant::S, Variant::I, Variant::L, Variant::C, Variant::CReduced] {
            let set = build_index_set(variant, j_max, l_count, a_count).unwrap();
            let members: HashSet<CovEntry> = set.entries.iter().copied().collect();
            assert_eq!(members.len(), set.entries.len(), "no duplicates");
            let channels = variant.channels();
            let shifts = build_shift_set(j_max, l_count).shifts;
            for c1 in 0..channels {
                for c2 in 0..channels {
                    for j1 in 0..j_max {
                        for j2 in 0..j_max {
                            for l1 in 0..l_count {
                                for l2 in 0..l_count {
                                    for a1 in 0..a_count {
                                        for a2 in 0..a_count {
                                            for &tau in &shifts {
                                                let e = CovEntry {
                                                    g1: GammaIdx { c: c1, j: j1, l: l1, a: a1 },
                                                    g2: GammaIdx { c: c2, j: j2, l: l2, a: a2 },
                                                    tau,
                                                };
                                                let legal = validate_entry(variant, &e, j_max);
                                                let expected = legal
                                                    && !dropped_by_dedup(variant, &e, j_max);
                                                assert_eq!(
                                                    members.contains(&e),
                                                    expected,
                                                    "{variant:?} {e:?}"
                                                );
                                            }
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn periodic_statistics_shift_invariant() {
        let n = 32;
        let bank = build_filter_bank(n, 2, 2, WaveletFamily::Morlet).unwrap();
        let set = build_index_set(Variant::I, 2, 2, 4).unwrap();
        let x = sample_gaussian_image(n, 0.5, 0.2, Seed(10)).unwrap();
        let shifted = x.circular_shift(5, 9);
        let a = compute_statistics(&Texture::Gray(x), &bank, &set, None, Boundary::Periodic)
            .unwrap();
        let b = compute_statistics(
            &Texture::Gray(shifted),
            &bank,
            &set,
            None,
            Boundary::Periodic,
        )
        .unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() < 1e-10, "{x} vs {y}");
        }
    }

    #[test]
    fn variance_entries_nonnegative() {
        let n = 16;
        let bank = build_filter_bank(n, 2, 2, WaveletFamily::Morlet).unwrap();
        let set = build_index_set(Variant::I, 2, 2, 4).unwrap();
        let x = sample_gaussian_image(n, 0.0, 1.0, Seed(3)).unwrap();
        let stats =
            compute_statistics(&Texture::Gray(x), &bank, &set, None, Boundary::Periodic).unwrap();
        for (i, e) in set.entries.iter().enumerate() {
            if e.g1 == e.g2 && e.tau == (0, 0) {
                assert!(stats.values[set.len_means() + i] >= -1e-15);
            }
        }
    }

    #[test]
    fn windowed_window_size_example() {
        let (lo, hi) = window_bounds(64, 3);
        assert_eq!((hi - lo) * (hi - lo), 2304);
    }

    #[test]
    fn distance_properties() {
        let mk = |seed| {
            let n = 16;
            let bank = build_filter_bank(n, 2, 2, WaveletFamily::Morlet).unwrap();
            let set = build_index_set(Variant::S, 2, 2, 4).unwrap();
            let x = sample_gaussian_image(n, 0.0, 1.0, Seed(seed)).unwrap();
            compute_statistics(&Texture::Gray(x), &bank, &set, None, Boundary::Periodic).unwrap()
        };
        let (a, b, c) = (mk(1), mk(2), mk(3));
        assert_eq!(statistics_distance(&a, &a).unwrap(), 0.0);
        let dab = statistics_distance(&a, &b).unwrap();
        let dba = statistics_distance(&b, &a).unwrap();
        assert_eq!(dab, dba);
        let dac = statistics_distance(&a, &c).unwrap();
        let dcb = statistics_distance(&c, &b).unwrap();
        assert!(dab <= dac + dcb + 1e-12);
    }

    #[test]
    fn prop2_identity_through_compute_statistics() {
        // With zeroed means, the weighted four-phase combination of the
        // covariances recovers the raw second-order wavelet correlation.
        use crate::wavelets::wavelet_transform;
        use num_complex::Complex64;
        let n = 16;
        let bank = build_filter_bank(n, 2, 2, WaveletFamily::Morlet).unwrap();
        let set = build_index_set(Variant::L, 2, 2, 4).unwrap();
        let x = sample_gaussian_image(n, 0.0, 1.0, Seed(21)).unwrap();
        let zero_means = ObsMeans {
            full: vec![0.0; set.plane_count()],
            windowed: None,
        };
        let stats = compute_statistics(
            &Texture::Gray(x.clone()),
            &bank,
            &set,
            Some(&zero_means),
            Boundary::Periodic,
        )
        .unwrap();
        let w = wavelet_transform(&x, &bank).unwrap();
        // Coefficients of Eq-style decomposition: a for z, b for conj(z').
        let wa = [
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, -1.0),
            Complex64::new(-1.0, 0.0),
            Complex64::new(0.0, 1.0),
        ];
        let wb = [
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 1.0),
            Complex64::new(-1.0, 0.0),
            Complex64::new(0.0, -1.0),
        ];
        // Pick one cross-scale pair and one shift present in the L set.
        let (j1, l1, j2, l2) = (0usize, 0usize, 1usize, 1usize);
        let tau = (1, 0);
        let mut lhs = Complex64::default();
        for (i, e) in set.entries.iter().enumerate() {
            if e.g1.j == j1 && e.g1.l == l1 && e.g2.j == j2 && e.g2.l == l2 && e.tau == tau {
                lhs += wa[e.g1.a] * wb[e.g2.a] * stats.values[set.len_means() + i];
            }
        }
        lhs *= (n * n) as f64;
        let p1 = w.plane(j1, l1);
        let p2 = w.plane(j2, l2);
        let mut rhs = Complex64::default();
        for y in 0..n {
            let sy = (y as i32 - tau.1).rem_euclid(n as i32) as usize;
            for xx in 0..n {
                let sx = (xx as i32 - tau.0).rem_euclid(n as i32) as usize;
                rhs += p1[y * n + xx] * p2[sy * n + sx].conj();
            }
        }
        assert!(
            (lhs - rhs).norm() <= 1e-8 * rhs.norm(),
            "lhs {lhs} rhs {rhs}"
        );
    }
}
