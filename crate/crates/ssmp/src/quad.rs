//! Gauss–Legendre quadrature with geometric refinement toward a singular endpoint.

use std::sync::OnceLock;

/// Node count per smooth piece.
pub const GL_NODES: usize = 256;

struct Rule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

fn rule() -> &'static Rule {
    static RULE: OnceLock<Rule> = OnceLock::new();
    RULE.get_or_init(|| compute_rule(GL_NODES))
}

/// The cached `GL_NODES`-point rule on `[-1, 1]` as `(nodes, weights)`.
pub fn legendre_rule() -> (&'static [f64], &'static [f64]) {
    let r = rule();
    (&r.nodes, &r.weights)
}

/// Nodes and weights on [-1, 1] via Newton iteration on the Legendre recurrence.
fn compute_rule(n: usize) -> Rule {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = nf * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    Rule { nodes, weights }
}

/// Integral of `f` over the finite interval `[a, b]` with one Gauss–Legendre panel.
pub fn gauss_legendre<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let r = rule();
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    r.nodes
        .iter()
        .zip(&r.weights)
        .map(|(x, w)| w * f(mid + half * x))
        .sum::<f64>()
        * half
}

/// Integral over `[a, b]` where the integrand may be singular at `pole`, an
/// endpoint of the interval. The interval is cut into dyadic pieces shrinking
/// toward the pole; pieces are added until the last one is negligible.
///
/// Returns `None` when the pieces stop shrinking (non-integrable singularity).
pub fn integrate_toward<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, pole: f64) -> Option<f64> {
    if b <= a {
        return Some(0.0);
    }
    let at_left = (pole - a).abs() <= (pole - b).abs();
    let len = b - a;
    let mut total = 0.0;
    let mut d = len;
    let mut small_run = 0;
    for _ in 0..2000 {
        let inner = 0.5 * d;
        let piece = if at_left {
            gauss_legendre(f, a + inner, a + d)
        } else {
            gauss_legendre(f, b - d, b - inner)
        };
        total += piece;
        d = inner;
        if d < 1e-280 {
            return None;
        }
        if piece.abs() <= 1e-17 * total.abs().max(1e-300) {
            small_run += 1;
            if small_run >= 3 {
                return Some(total);
            }
        } else {
            small_run = 0;
        }
    }
    None
}

/// Integral over `(-inf, b]` of an integrand that decays at least like `e^{rate x}`.
pub fn integrate_left_tail<F: Fn(f64) -> f64>(f: &F, b: f64, rate: f64) -> f64 {
    let len = 4.0 / rate;
    let mut total = 0.0;
    let mut hi = b;
    for k in 0..400 {
        let piece = gauss_legendre(f, hi - len, hi);
        total += piece;
        hi -= len;
        if k > 4 && piece.abs() <= 1e-18 * total.abs().max(1e-300) {
            break;
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn weights_sum_to_two() {
        let s: f64 = rule().weights.iter().sum();
        assert_relative_eq!(s, 2.0, epsilon = 1e-13);
    }

    #[test]
    fn polynomials_are_exact() {
        let v = gauss_legendre(&|x: f64| x.powi(7) - 3.0 * x * x, -1.0, 2.0);
        let exact = (2f64.powi(8) - 1.0) / 8.0 - (8.0 + 1.0);
        assert_relative_eq!(v, exact, max_relative = 1e-13);
    }

    #[test]
    fn algebraic_endpoint_singularity() {
        // ∫_0^1 x^{-1/2} dx = 2
        let v = integrate_toward(&|x: f64| x.powf(-0.5), 0.0, 1.0, 0.0).unwrap();
        assert_relative_eq!(v, 2.0, max_relative = 1e-11);
        // mirrored
        let v = integrate_toward(&|x: f64| (-x).powf(-0.8), -1.0, 0.0, 0.0).unwrap();
        assert_relative_eq!(v, 5.0, max_relative = 1e-10);
    }

    #[test]
    fn divergent_integral_is_reported() {
        assert!(integrate_toward(&|x: f64| 1.0 / x, 0.0, 1.0, 0.0).is_none());
    }

    #[test]
    fn exponential_tail() {
        let v = integrate_left_tail(&|x: f64| (2.0 * x).exp(), 0.0, 2.0);
        assert_relative_eq!(v, 0.5, max_relative = 1e-13);
    }
}
