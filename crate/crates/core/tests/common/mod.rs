#![allow(dead_code)]

/// Euclidean projection onto the probability simplex (sort-based).
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (k, &x) in u.iter().enumerate() {
        cum += x;
        let t = (cum - 1.0) / (k as f64 + 1.0);
        if x - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

fn objective(d: &[f64], omega: &[f64], q: &[f64]) -> f64 {
    d.iter()
        .zip(omega.iter().zip(q))
        .map(|(&di, (&wi, &qi))| if di > 0.0 { di * qi - di * (di / wi).ln() } else { 0.0 })
        .sum()
}

/// Projected gradient ascent with backtracking on `E_d[Q] - KL(d || omega)`.
pub fn numeric_dphi(omega: &[f64], q: &[f64]) -> Vec<f64> {
    let n = omega.len();
    let mut d = vec![1.0 / n as f64; n];
    let mut step = 0.1;
    for _ in 0..200_000 {
        let grad: Vec<f64> = d.iter().zip(omega.iter().zip(q)).map(|(&di, (&wi, &qi))| qi - (di.max(1e-300) / wi).ln() - 1.0).collect();
        let f0 = objective(&d, omega, q);
        let mut moved = false;
        let mut s = step;
        while s > 1e-14 {
            let cand = project_simplex(&d.iter().zip(&grad).map(|(x, g)| x + s * g).collect::<Vec<_>>());
            if objective(&cand, omega, q) > f0 {
                let change = cand.iter().zip(&d).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                d = cand;
                moved = true;
                step = (s * 2.0).min(1.0);
                if change < 1e-13 {
                    return d;
                }
                break;
            }
            s *= 0.5;
        }
        if !moved {
            break;
        }
    }
    d
}
