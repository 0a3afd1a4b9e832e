//! Shared numerical utilities: Gauss-Legendre rules, endpoint-clustered time
//! maps, and the volume constants of round balls.

/// Gauss-Legendre nodes and weights on `[-1, 1]`, computed by Newton
/// iteration on the Legendre polynomial with the usual cosine initial guess.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Legendre recurrence for P_n(x) and P'_n(x).
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Gauss-Legendre rule mapped to `[a, b]`.
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    (
        x.iter().map(|&t| mid + half * t).collect(),
        w.iter().map(|&t| half * t).collect(),
    )
}

/// Quadrature nodes on the normalized time interval `(0, 1)` with symmetric
/// clustering at both endpoints.
///
/// Gauss-Legendre points `u` are pushed through `sigma = sin^2(pi u / 2)`,
/// which absorbs integrable endpoint singularities `sigma^-a (1-sigma)^-a`
/// with `a < 1` (this is the profile of normalized bridge-time integrands).
pub fn clustered_time_nodes(n: usize) -> (Vec<f64>, Vec<f64>) {
    let (u, w) = gauss_legendre_on(n, 0.0, 1.0);
    let mut sigma = Vec::with_capacity(n);
    let mut weight = Vec::with_capacity(n);
    for (ui, wi) in u.iter().zip(&w) {
        let s = (std::f64::consts::FRAC_PI_2 * ui).sin();
        sigma.push(s * s);
        weight.push(wi * std::f64::consts::FRAC_PI_2 * (std::f64::consts::PI * ui).sin());
    }
    (sigma, weight)
}

/// `Gamma(k/2)` for positive half-integer arguments, exact in closed form.
pub fn gamma_half(k: u32) -> f64 {
    assert!(k >= 1);
    if k % 2 == 0 {
        // Gamma(m) = (m-1)!
        let m = k / 2;
        (1..m).map(|j| j as f64).product()
    } else {
        // Gamma(m + 1/2) = (2m)! sqrt(pi) / (4^m m!)
        let m = (k - 1) / 2;
        let mut v = std::f64::consts::PI.sqrt();
        for j in 1..=m {
            v *= j as f64 - 0.5;
        }
        v
    }
}

/// Volume of the unit ball in `R^n`: `pi^(n/2) / Gamma(n/2 + 1)`.
pub fn unit_ball_volume(n: usize) -> f64 {
    std::f64::consts::PI.powf(n as f64 / 2.0) / gamma_half(n as u32 + 2)
}

/// Surface area of the unit sphere `S^{n-1}` in `R^n`.
pub fn unit_sphere_area(n: usize) -> f64 {
    n as f64 * unit_ball_volume(n)
}

/// Least-squares slope of `y` against `x`.
pub fn regression_slope(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
    }
    sxy / sxx
}

/// Adaptively integrates `f` over `[a, b]` by bisection of 15-point
/// Gauss-Legendre panels until the panel-splitting correction is below
/// `tol` (relative to the accumulated absolute mass).
pub fn integrate_adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn panel(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
        let (x, w) = gauss_legendre_on(15, a, b);
        x.iter().zip(&w).map(|(&xi, &wi)| wi * f(xi)).sum()
    }
    fn recurse(f: &dyn Fn(f64) -> f64, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let mid = 0.5 * (a + b);
        let left = panel(f, a, mid);
        let right = panel(f, mid, b);
        let delta = left + right - whole;
        if delta.abs() <= tol || depth >= 24 {
            return left + right;
        }
        recurse(f, a, mid, left, tol * 0.5, depth + 1)
            + recurse(f, mid, b, right, tol * 0.5, depth + 1)
    }
    let whole = panel(f, a, b);
    recurse(f, a, b, whole, tol * whole.abs().max(1e-300), 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        // An n-point rule is exact through degree 2n - 1.
        let (x, w) = gauss_legendre_on(5, 0.0, 1.0);
        let integral: f64 = x.iter().zip(&w).map(|(&xi, &wi)| wi * xi.powi(9)).sum();
        assert_relative_eq!(integral, 0.1, epsilon = 1e-14);
        let total: f64 = w.iter().sum();
        assert_relative_eq!(total, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn clustered_nodes_integrate_endpoint_singularities() {
        // integral of (s(1-s))^(-1/2) over (0,1) = B(1/2, 1/2) = pi;
        // the sin^2 map makes this integrand smooth, so the rule nails it
        let (s, w) = clustered_time_nodes(64);
        let mild: f64 = s
            .iter()
            .zip(&w)
            .map(|(&si, &wi)| wi * (si * (1.0 - si)).powf(-0.5))
            .sum();
        assert_relative_eq!(mild, std::f64::consts::PI, max_relative = 1e-12);

        // integral of (s(1-s))^(-3/4) over (0,1) = B(1/4, 1/4): the mapped
        // integrand keeps a u^(-1/2) edge, so accuracy degrades to ~1%
        let strong: f64 = s
            .iter()
            .zip(&w)
            .map(|(&si, &wi)| wi * (si * (1.0 - si)).powf(-0.75))
            .sum();
        let beta_quarter = 7.416_298_708_763_581; // B(1/4, 1/4)
        assert_relative_eq!(strong, beta_quarter, max_relative = 2e-2);
    }

    #[test]
    fn gamma_half_values() {
        assert_relative_eq!(gamma_half(1), std::f64::consts::PI.sqrt());
        assert_relative_eq!(gamma_half(2), 1.0);
        assert_relative_eq!(gamma_half(3), 0.5 * std::f64::consts::PI.sqrt());
        assert_relative_eq!(gamma_half(8), 6.0);
    }

    #[test]
    fn ball_volumes() {
        assert_relative_eq!(unit_ball_volume(1), 2.0);
        assert_relative_eq!(unit_ball_volume(2), std::f64::consts::PI);
        assert_relative_eq!(unit_ball_volume(3), 4.0 / 3.0 * std::f64::consts::PI);
        assert_relative_eq!(unit_sphere_area(3), 4.0 * std::f64::consts::PI);
    }

    #[test]
    fn adaptive_integrator_handles_peaks() {
        // A narrow Gaussian: integral over [-1, 1] is essentially sqrt(pi) * 0.01.
        let f = |x: f64| (-(x / 0.01) * (x / 0.01)).exp();
        let got = integrate_adaptive(&f, -1.0, 1.0, 1e-10);
        assert_relative_eq!(got, std::f64::consts::PI.sqrt() * 0.01, max_relative = 1e-9);
    }
}
