/// Two-trajectory renormalization estimate with its own RK4, independent of
/// the library integrator.
pub fn benettin_lorenz(sigma: f64, beta: f64, rho: f64, dt: f64, transient: usize, steps: usize) -> f64 {
    let f = |s: [f64; 3]| [sigma * (s[1] - s[0]), s[0] * (rho - s[2]) - s[1], s[0] * s[1] - beta * s[2]];
    let step = |s: [f64; 3]| {
        let add = |a: [f64; 3], b: [f64; 3], h: f64| [a[0] + h * b[0], a[1] + h * b[1], a[2] + h * b[2]];
        let k1 = f(s);
        let k2 = f(add(s, k1, dt / 2.0));
        let k3 = f(add(s, k2, dt / 2.0));
        let k4 = f(add(s, k3, dt));
        [0, 1, 2].map(|i| s[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
    };
    let mut a = [1.0, 1.05, -1.0];
    for _ in 0..transient {
        a = step(a);
    }
    let d0 = 1e-8;
    let mut b = [a[0] + d0, a[1], a[2]];
    let mut sum = 0.0;
    for _ in 0..steps {
        a = step(a);
        b = step(b);
        let d = ((0..3).map(|i| (b[i] - a[i]).powi(2)).sum::<f64>()).sqrt();
        sum += (d / d0).ln();
        b = [0, 1, 2].map(|i| a[i] + (b[i] - a[i]) * d0 / d);
    }
    sum / (steps as f64 * dt)
}
