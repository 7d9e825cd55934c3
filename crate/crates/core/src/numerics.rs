//! Small numerical helpers shared by the energy, potential and estimator code.

/// Neumaier-compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl std::iter::FromIterator<f64> for KahanSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = KahanSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Fixed-order pairwise sum. The reduction tree depends only on the length,
/// so the result is bit-reproducible.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 16 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Gauss–Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p1, mut p2) = (1.0, 0.0);
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / dp;
            if (z - z1).abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Composite Gauss–Legendre rule for `f` on `[a, b]` with `panels` panels
/// of `order` nodes each.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, panels: usize, order: usize) -> f64 {
    let (x, w) = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    let mut acc = KahanSum::new();
    for k in 0..panels {
        let lo = a + k as f64 * h;
        let mid = lo + 0.5 * h;
        for (xi, wi) in x.iter().zip(&w) {
            acc.add(0.5 * h * wi * f(mid + 0.5 * h * xi));
        }
    }
    acc.value()
}

/// Integral of `f` over `[a, ∞)` for an integrand that decays at least like
/// a power law, computed on geometrically growing panels. Returns `None`
/// when the tail does not decay fast enough to be integrable.
pub fn integrate_to_infinity<F: FnMut(f64) -> f64>(mut f: F, a: f64) -> Option<f64> {
    let mut lo = a;
    let mut width = 1.0f64.max(a.abs() * 0.25);
    let mut total = KahanSum::new();
    for _ in 0..200 {
        let hi = lo + width;
        let piece = integrate(&mut f, lo, hi, 4, 16);
        total.add(piece);
        let t = total.value();
        if piece.abs() <= 1e-15 * t.abs().max(1e-300) {
            return Some(t);
        }
        lo = hi;
        width *= 2.0;
    }
    // Still contributing after 2^200 widths: check the local power-law
    // exponent of the integrand to decide.
    let (x1, x2) = (lo, 2.0 * lo);
    let (f1, f2) = (f(x1).abs(), f(x2).abs());
    if f1 == 0.0 || f2 == 0.0 {
        return Some(total.value());
    }
    let slope = (f2 / f1).ln() / 2.0f64.ln();
    if slope < -1.0 {
        let tail = f1 * x1 / (-slope - 1.0);
        Some(total.value() + tail.copysign(f(x1)))
    } else {
        None
    }
}

/// Hurwitz zeta ζ(s, q) = Σ_{k≥0} (q+k)^{-s} for s > 1, q > 0, via
/// Euler–Maclaurin summation.
pub fn hurwitz_zeta(s: f64, q: f64) -> f64 {
    assert!(s > 1.0 && q > 0.0, "hurwitz_zeta needs s > 1 and q > 0");
    const N: usize = 24;
    // B_{2j} / (2j)!
    const COEF: [f64; 8] = [
        1.0 / 12.0,
        -1.0 / 720.0,
        1.0 / 30240.0,
        -1.0 / 1209600.0,
        1.0 / 47900160.0,
        -691.0 / 1307674368000.0,
        1.0 / 74724249600.0,
        -3617.0 / 10670622842880000.0,
    ];
    let mut acc = KahanSum::new();
    for k in 0..N {
        acc.add((q + k as f64).powf(-s));
    }
    let a = q + N as f64;
    acc.add(a.powf(1.0 - s) / (s - 1.0));
    acc.add(0.5 * a.powf(-s));
    // rising factorial s (s+1) ... (s+2j-2)
    let mut rising = s;
    let mut power = a.powf(-s - 1.0);
    for (j, c) in COEF.iter().enumerate() {
        acc.add(c * rising * power);
        let k = 2 * j + 1;
        rising *= (s + k as f64) * (s + k as f64 + 1.0);
        power /= a * a;
    }
    acc.value()
}

/// Ordinary least-squares line fit.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual.
    pub residual: f64,
    /// Standard error of the slope.
    pub slope_se: f64,
    pub n: usize,
}

pub fn fit_line(xs: &[f64], ys: &[f64]) -> Option<LineFit> {
    fit_line_weighted(xs, ys, None)
}

/// Weighted least squares; `weights` are inverse variances.
pub fn fit_line_weighted(xs: &[f64], ys: &[f64], weights: Option<&[f64]>) -> Option<LineFit> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let w = |i: usize| weights.map_or(1.0, |w| w[i]);
    let sw: f64 = (0..n).map(w).sum();
    let mx = (0..n).map(|i| w(i) * xs[i]).sum::<f64>() / sw;
    let my = (0..n).map(|i| w(i) * ys[i]).sum::<f64>() / sw;
    let sxx: f64 = (0..n).map(|i| w(i) * (xs[i] - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = (0..n).map(|i| w(i) * (xs[i] - mx) * (ys[i] - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = (0..n)
        .map(|i| w(i) * (ys[i] - intercept - slope * xs[i]).powi(2))
        .sum();
    let residual = (rss / sw).sqrt();
    let slope_se = if weights.is_some() {
        (1.0 / sxx).sqrt()
    } else if n > 2 {
        (rss / (n as f64 - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Some(LineFit {
        slope,
        intercept,
        residual,
        slope_se,
        n,
    })
}

/// Log-spaced points between `lo` and `hi` inclusive.
pub fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && n >= 2);
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}
